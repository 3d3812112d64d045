//! Stage bodies. Each returns the files it produces, keyed by path relative
//! to the output directory; the scheduler writes and stamps them.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;

use anyhow::anyhow;
use gptatlas_core::corpus::{
    ingest_boundaries, ingest_companies, ingest_papers, ingest_registry, load_artifact, write_rejection_report,
    ArtifactKind, Cell, CompanyRecord, Ingested, PaperRecord, PipelineArtifact, Region, Rejection, Table,
};
use gptatlas_core::econometrics::{
    assemble_region_rows, build_feature_table, model_suite_specs, per_subject_models, run_model_suite,
    FeatureTable, ModelSuiteReport, RegionContext, TargetSpec,
};
use gptatlas_core::geo::{aggregate_activity, ActivityMatrix, Level, RegionIndex};
use gptatlas_core::linkage::{link_corpus, match_table};
use gptatlas_core::metrics::{
    above_median_citations, concentration_top_k, dl_share_timeseries, highly_cited_flags, impact_overrepresentation,
    rca, rca_dispersion, rca_table, share_timeseries_table, subject_share_before_after, subject_shares_table,
    PaperFacts, RcaTable,
};
use gptatlas_core::nlp::{label_dl, label_table, preprocess_corpus, TopicModel};
use gptatlas_core::relatedness::{
    research_industry_relatedness, subject_relatedness, train_category_classifier, RelatednessMatrix,
};

use crate::pipeline::*;
use crate::{report, CliError};

pub(crate) type Files = Vec<(String, Vec<u8>)>;

/// Category used for the DL label in relatedness and activity matrices.
pub const DL: &str = "dl";
pub const NON_DL: &str = "non_dl";

pub(crate) fn run(stage: Stage, ws: &Workspace) -> Result<Files, CliError> {
    match stage {
        Stage::Ingest => ingest(ws),
        Stage::Link => link(ws),
        Stage::Geocode => geocode(ws),
        Stage::Label => label(ws),
        Stage::Relate => relate(ws),
        Stage::Metrics => metrics(ws),
        Stage::Regress => regress(ws),
        Stage::Report => report::emit(ws),
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

fn papers(ws: &Workspace) -> Result<Ingested<PaperRecord>, CliError> {
    ingest_papers(&ws.cfg.inputs.papers, &ws.cfg.ingest).map_err(invalid)
}

fn companies(ws: &Workspace) -> Result<Ingested<CompanyRecord>, CliError> {
    ingest_companies(&ws.cfg.inputs.companies).map_err(invalid)
}

pub(crate) fn regions(ws: &Workspace) -> Result<Ingested<Region>, CliError> {
    ingest_boundaries(&ws.cfg.inputs.boundaries).map_err(invalid)
}

fn topic_model(ws: &Workspace) -> Result<TopicModel, CliError> {
    let path = &ws.cfg.inputs.topics;
    let file = File::open(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    TopicModel::from_csv(file).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

pub(crate) fn load(ws: &Workspace, name: &str) -> Result<PipelineArtifact, CliError> {
    load_artifact(&ws.artifact_path(name)).map_err(|e| CliError::Internal(anyhow!(e)))
}

fn artifact(ws: &Workspace, kind: ArtifactKind, tables: Vec<(&str, Table)>) -> Vec<u8> {
    tables
        .into_iter()
        .fold(PipelineArtifact::new(kind, ws.provenance()), |a, (name, t)| a.with_table(name, t))
        .to_bytes()
}

fn json_bytes(v: &serde_json::Value) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(v).expect("json serializes");
    bytes.push(b'\n');
    bytes
}

/// Two-column `metric,value` table.
fn summary(rows: Vec<(&str, Cell)>) -> Table {
    let mut t = Table::new(&["metric", "value"]);
    for (k, v) in rows {
        t.push(vec![Cell::text(k), v]);
    }
    t
}

pub(crate) fn column<'a>(t: &'a Table, name: &str) -> Result<usize, CliError> {
    t.column_index(name).ok_or_else(|| CliError::Internal(anyhow!("artifact table lacks column `{name}`")))
}

fn text(cell: &Cell) -> String {
    cell.as_str().unwrap_or_default().to_string()
}

fn list(cell: &Cell) -> Vec<String> {
    cell.as_list().map(<[String]>::to_vec).unwrap_or_default()
}

fn count(n: usize) -> Cell {
    Cell::Int(n as i64)
}

// ---------------------------------------------------------------- ingest

fn rejection_summary<T>(kind: &str, d: &Ingested<T>) -> serde_json::Value {
    let mut reasons: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &d.rejections {
        *reasons.entry(r.reason_code.as_str()).or_insert(0) += 1;
    }
    log::info!("{kind}: {} read, {} retained, {} rejected", d.rows_read, d.records.len(), d.rejections.len());
    serde_json::json!({
        "rows_read": d.rows_read,
        "retained": d.records.len(),
        "rejected": d.rejections.len(),
        "reasons": reasons,
    })
}

fn rejection_csv(rejections: &[Rejection]) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_rejection_report(rejections, &mut buf).map_err(|e| CliError::Internal(anyhow!(e)))?;
    Ok(buf)
}

fn ingest(ws: &Workspace) -> Result<Files, CliError> {
    let p = papers(ws)?;
    let r = ingest_registry(&ws.cfg.inputs.registry).map_err(invalid)?;
    let c = companies(ws)?;
    let b = regions(ws)?;
    let model = topic_model(ws)?;
    ws.cfg.labeling.validate(&model).map_err(|e| invalid(format!("labeling: {e}")))?;
    let report = serde_json::json!({
        "config_hash": ws.config_hash,
        "input_digests": ws.input_digests,
        "datasets": {
            "papers": rejection_summary("papers", &p),
            "registry": rejection_summary("registry", &r),
            "companies": rejection_summary("companies", &c),
            "boundaries": rejection_summary("boundaries", &b),
        },
        "topics": model.topics().len(),
    });
    Ok(vec![
        (artifact_file(INGEST_REPORT), json_bytes(&report)),
        ("artifacts/rejections_papers.csv".into(), rejection_csv(&p.rejections)?),
        ("artifacts/rejections_registry.csv".into(), rejection_csv(&r.rejections)?),
        ("artifacts/rejections_companies.csv".into(), rejection_csv(&c.rejections)?),
        ("artifacts/rejections_boundaries.csv".into(), rejection_csv(&b.rejections)?),
    ])
}

// ---------------------------------------------------------------- link

fn link(ws: &Workspace) -> Result<Files, CliError> {
    let p = papers(ws)?;
    let r = ingest_registry(&ws.cfg.inputs.registry).map_err(invalid)?;
    let out = link_corpus(&p.records, &r.records, &ws.cfg.matching);
    let mut linked = Table::new(&["paper_id", "registry_ids"]);
    for lp in &out.papers {
        linked.push(vec![Cell::text(&lp.paper.id), Cell::List(lp.registry_ids.clone())]);
    }
    let rep = &out.report;
    let mut rows = vec![
        ("affiliations", count(out.matches.len())),
        ("match_rate", Cell::opt_float(rep.match_rate)),
        ("paper_institute_pairs", count(rep.paper_institute_pairs)),
        ("min_accept_score", Cell::float(rep.min_accept_score)),
    ];
    let method_keys: Vec<String> = rep.counts_by_method.keys().map(|k| format!("method_{k}")).collect();
    for (k, v) in method_keys.iter().zip(rep.counts_by_method.values()) {
        rows.push((k.as_str(), count(*v)));
    }
    let bins: Vec<String> = (0..rep.score_histogram.len()).map(|i| format!("score_bin_{i}")).collect();
    for (k, v) in bins.iter().zip(&rep.score_histogram) {
        rows.push((k.as_str(), count(*v)));
    }
    let bytes = artifact(
        ws,
        ArtifactKind::LinkedCorpus,
        vec![("papers", linked), ("matches", match_table(&out.matches)), ("summary", summary(rows))],
    );
    Ok(vec![(artifact_file(LINKED_CORPUS), bytes)])
}

// ---------------------------------------------------------------- geocode

fn geocode(ws: &Workspace) -> Result<Files, CliError> {
    let linked = load(ws, LINKED_CORPUS)?;
    let registry = ingest_registry(&ws.cfg.inputs.registry).map_err(invalid)?;
    let bounds = regions(ws)?;
    let comps = companies(ws)?;
    let index = RegionIndex::new(&bounds.records);
    let country: BTreeMap<&str, &str> =
        bounds.records.iter().map(|r| (r.region_id.as_str(), r.country_code.as_str())).collect();

    let mut region_table = Table::new(&["region_id", "country_code"]);
    for (id, cc) in &country {
        region_table.push(vec![Cell::text(*id), Cell::text(*cc)]);
    }

    let mut institute_region: BTreeMap<&str, Option<String>> = BTreeMap::new();
    let mut institutes = Table::new(&["registry_id", "region_id"]);
    for inst in &registry.records {
        let region = index.assign(inst.location).map(|r| r.region_id.clone());
        institutes.push(vec![Cell::text(&inst.registry_id), region.as_ref().map_or(Cell::Null, Cell::text)]);
        institute_region.insert(&inst.registry_id, region);
    }

    let lt = linked.table("papers").map_err(|e| CliError::Internal(anyhow!(e)))?;
    let (pi, ri) = (column(lt, "paper_id")?, column(lt, "registry_ids")?);
    let mut paper_table = Table::new(&["paper_id", "regions", "countries"]);
    let (mut no_region, mut inst_pairs, mut region_pairs) = (0usize, 0usize, 0usize);
    for row in &lt.rows {
        let ids = list(&row[ri]);
        inst_pairs += ids.len();
        let regs: BTreeSet<String> =
            ids.iter().filter_map(|id| institute_region.get(id.as_str()).cloned().flatten()).collect();
        let countries: BTreeSet<String> = regs.iter().map(|r| country[r.as_str()].to_string()).collect();
        no_region += usize::from(regs.is_empty());
        region_pairs += regs.len();
        paper_table.push(vec![
            row[pi].clone(),
            Cell::List(regs.into_iter().collect()),
            Cell::List(countries.into_iter().collect()),
        ]);
    }

    let mut company_table = Table::new(&["company_id", "region_id", "country_code"]);
    let mut located = 0usize;
    for c in &comps.records {
        let region = index.assign(c.location);
        located += usize::from(region.is_some());
        company_table.push(vec![
            Cell::text(&c.id),
            region.map_or(Cell::Null, |r| Cell::text(&r.region_id)),
            region.map_or(Cell::Null, |r| Cell::text(&r.country_code)),
        ]);
    }

    let stats = summary(vec![
        ("papers", count(paper_table.len())),
        ("papers_no_region", count(no_region)),
        ("paper_institute_pairs", count(inst_pairs)),
        ("paper_region_pairs", count(region_pairs)),
        ("companies", count(company_table.len())),
        ("companies_located", count(located)),
    ]);
    let bytes = artifact(
        ws,
        ArtifactKind::ActivityMatrix,
        vec![
            ("regions", region_table),
            ("institutes", institutes),
            ("papers", paper_table),
            ("companies", company_table),
            ("summary", stats),
        ],
    );
    Ok(vec![(artifact_file(ACTIVITY_MATRIX), bytes)])
}

// ---------------------------------------------------------------- label

fn label(ws: &Workspace) -> Result<Files, CliError> {
    let p = papers(ws)?;
    let model = topic_model(ws)?;
    let docs: Vec<(String, String)> = p.records.iter().map(|r| (r.id.clone(), r.abstract_text.clone())).collect();
    let pre = preprocess_corpus(&docs, &ws.cfg.preprocess);
    let (labels, s) = label_dl(&pre.documents, &model, &ws.cfg.labeling).map_err(|e| invalid(format!("labeling: {e}")))?;
    let mut table = label_table(&labels);
    table.columns.push("tokens".into());
    for (row, doc) in table.rows.iter_mut().zip(&pre.documents) {
        row.push(Cell::List(doc.tokens.iter().cloned().collect()));
    }
    let mut dropped = Table::new(&["paper_id", "token_count"]);
    for d in &pre.dropped {
        dropped.push(vec![Cell::text(&d.paper_id), count(d.token_count)]);
    }
    let stats = summary(vec![
        ("documents", count(s.documents)),
        ("dl_count", count(s.dl_count)),
        ("dl_share", Cell::opt_float(s.dl_share)),
        ("dropped", count(pre.dropped.len())),
        ("vocabulary", count(pre.vocabulary.len())),
        ("gamma", Cell::float(s.gamma)),
    ]);
    let bytes =
        artifact(ws, ArtifactKind::LabeledCorpus, vec![("labels", table), ("dropped", dropped), ("summary", stats)]);
    Ok(vec![(artifact_file(LABELED_CORPUS), bytes)])
}

/// A labeled paper with its geography.
#[derive(Debug, Clone)]
pub(crate) struct Located {
    pub facts: PaperFacts,
    pub tokens: BTreeSet<String>,
    pub regions: Vec<String>,
    pub countries: Vec<String>,
}

/// Labeled papers in corpus order, joined with the paper records and, when
/// geocoded, their regions.
fn labeled_papers(ws: &Workspace, with_geo: bool) -> Result<Vec<Located>, CliError> {
    let p = papers(ws)?;
    let labeled = load(ws, LABELED_CORPUS)?;
    let lt = labeled.table("labels").map_err(|e| CliError::Internal(anyhow!(e)))?;
    let (li, di, ti) = (column(lt, "paper_id")?, column(lt, "dl_flag")?, column(lt, "tokens")?);
    let labels: BTreeMap<String, (bool, BTreeSet<String>)> = lt
        .rows
        .iter()
        .map(|r| (text(&r[li]), (r[di].as_bool().unwrap_or(false), list(&r[ti]).into_iter().collect())))
        .collect();
    let mut geo: BTreeMap<String, (Vec<String>, Vec<String>)> = BTreeMap::new();
    if with_geo {
        let am = load(ws, ACTIVITY_MATRIX)?;
        let gt = am.table("papers").map_err(|e| CliError::Internal(anyhow!(e)))?;
        let (gi, ri, ci) = (column(gt, "paper_id")?, column(gt, "regions")?, column(gt, "countries")?);
        for r in &gt.rows {
            geo.insert(text(&r[gi]), (list(&r[ri]), list(&r[ci])));
        }
    }
    Ok(p.records
        .iter()
        .filter_map(|rec| {
            let (dl, tokens) = labels.get(&rec.id)?;
            let (regions, countries) = geo.get(&rec.id).cloned().unwrap_or_default();
            Some(Located {
                facts: PaperFacts::from_record(rec, *dl),
                tokens: tokens.clone(),
                regions,
                countries,
            })
        })
        .collect())
}

/// Subjects seen among labeled papers, plus the DL category.
fn categories(papers: &[Located]) -> Vec<String> {
    let mut cats: BTreeSet<String> = papers.iter().flat_map(|p| p.facts.subjects.iter().cloned()).collect();
    cats.insert(DL.into());
    cats.into_iter().collect()
}

fn with_dl(p: &Located) -> BTreeSet<String> {
    let mut c = p.facts.subjects.clone();
    if p.facts.is_dl {
        c.insert(DL.into());
    }
    c
}

// ---------------------------------------------------------------- relate

fn relate(ws: &Workspace) -> Result<Files, CliError> {
    let labeled = labeled_papers(ws, false)?;
    let cats = categories(&labeled);
    let subjects = subject_relatedness(&cats, &labeled.iter().map(with_dl).collect::<Vec<_>>());

    let comps = companies(ws)?;
    let training: Vec<&CompanyRecord> = comps.records.iter().filter(|c| c.is_training_row()).collect();
    let docs: Vec<(String, String)> = training.iter().map(|c| (c.id.clone(), c.description.clone())).collect();
    let pre = preprocess_corpus(&docs, &ws.cfg.company_preprocess);
    let sectors: BTreeMap<&str, &BTreeSet<String>> = training.iter().map(|c| (c.id.as_str(), &c.categories)).collect();
    let documents: Vec<(String, BTreeSet<String>, BTreeSet<String>)> = pre
        .documents
        .iter()
        .map(|d| (d.paper_id.clone(), d.tokens.clone(), sectors[d.paper_id.as_str()].clone()))
        .collect();
    let clf = train_category_classifier(&documents, &ws.cfg.classifier).map_err(|e| invalid(format!("classifier: {e}")))?;
    let pairs: Vec<(BTreeSet<String>, BTreeSet<String>)> = labeled.iter().map(|p| (with_dl(p), p.tokens.clone())).collect();
    let industry = research_industry_relatedness(&cats, &pairs, &clf, ws.cfg.relate.threshold);

    let mut training_table =
        Table::new(&["sector", "positives", "status", "chosen_lambda", "validation_accuracy"]);
    for s in &clf.report.sectors {
        training_table.push(vec![
            Cell::text(&s.sector),
            count(s.positives),
            Cell::text(&s.status),
            Cell::opt_float(s.chosen_lambda),
            Cell::opt_float(s.validation_accuracy),
        ]);
    }
    let mut excluded = Table::new(&["matrix", "category"]);
    for (m, list) in [("subjects", &subjects.excluded), ("industry", &industry.excluded)] {
        for c in list {
            excluded.push(vec![Cell::text(m), Cell::text(c)]);
        }
    }
    let stats = summary(vec![
        ("training_companies", count(documents.len())),
        ("companies_dropped_short", count(pre.dropped.len())),
        ("trained_sectors", count(clf.sectors.len())),
        ("threshold", Cell::float(ws.cfg.relate.threshold)),
    ]);
    let bytes = artifact(
        ws,
        ArtifactKind::RelatednessMatrix,
        vec![
            ("subjects", subjects.to_long_table()),
            ("industry", industry.to_long_table()),
            ("training", training_table),
            ("excluded", excluded),
            ("summary", stats),
        ],
    );
    Ok(vec![
        (artifact_file(RELATEDNESS_MATRIX), bytes),
        (artifact_file(CLASSIFIER), clf.to_json().into_bytes()),
    ])
}

// ---------------------------------------------------------------- metrics

fn locations(p: &Located, level: Level) -> Vec<String> {
    match level {
        Level::Country => p.countries.clone(),
        Level::Region => p.regions.clone(),
    }
}

fn dl_category(p: &Located) -> Vec<String> {
    vec![if p.facts.is_dl { DL } else { NON_DL }.to_string()]
}

fn dl_matrix(papers: &[&Located], level: Level) -> ActivityMatrix {
    aggregate_activity(papers, level, |p: &&Located| locations(p, level), |p: &&Located| dl_category(p))
}

/// Papers entering the geographic measures: located, and above the citation
/// median of their year when the filter is on.
fn geographic_sample(ws: &Workspace, papers: &[Located]) -> (Vec<usize>, Table) {
    let mut t = Table::new(&["year", "median", "status"]);
    if !ws.cfg.filters.citation_filter {
        return ((0..papers.len()).collect(), t);
    }
    let facts: Vec<PaperFacts> = papers.iter().map(|p| p.facts.clone()).collect();
    let f = above_median_citations(&facts);
    let mut years: BTreeMap<i32, (Option<f64>, &str)> = f.medians.iter().map(|(y, m)| (*y, (Some(*m), "kept"))).collect();
    for (y, _) in &f.dropped_years {
        years.insert(*y, (None, "dropped_fewer_than_two_papers"));
    }
    for (y, (m, s)) in years {
        t.push(vec![Cell::Int(y.into()), Cell::opt_float(m), Cell::text(s)]);
    }
    (f.kept, t)
}

fn period_matrices(ws: &Workspace, sample: &[&Located], level: Level) -> [ActivityMatrix; 2] {
    let split = ws.cfg.split;
    let t0: Vec<&Located> = sample.iter().copied().filter(|p| p.facts.year <= split.t0_max_year).collect();
    let t1: Vec<&Located> = sample.iter().copied().filter(|p| p.facts.year > split.t0_max_year).collect();
    [dl_matrix(&t0, level), dl_matrix(&t1, level)]
}

fn rca_changes(t: &RcaTable, level: Level, out: &mut Table) {
    let locs: BTreeSet<&str> = t.rows.iter().map(|r| r.location.as_str()).collect();
    for loc in locs {
        if let (Some(a), Some(b)) = (t.get(loc, DL, "t0"), t.get(loc, DL, "t1")) {
            out.push(vec![Cell::text(level.as_str()), Cell::text(loc), Cell::float(a), Cell::float(b), Cell::float(b - a)]);
        }
    }
}

fn prepend(t: Table, name: &str, value: Cell) -> Table {
    let mut columns = vec![name.to_string()];
    columns.extend(t.columns);
    let mut out = Table::new(&columns);
    for row in t.rows {
        let mut r = vec![value.clone()];
        r.extend(row);
        out.push(r);
    }
    out
}

fn append_rows(into: &mut Option<Table>, t: Table) {
    match into {
        Some(acc) => acc.rows.extend(t.rows),
        None => *into = Some(t),
    }
}

fn metrics(ws: &Workspace) -> Result<Files, CliError> {
    let f = &ws.cfg.filters;
    let papers = labeled_papers(ws, true)?;
    let facts: Vec<PaperFacts> = papers.iter().map(|p| p.facts.clone()).collect();

    let shares = dl_share_timeseries(&facts, f.ma_window).map_err(invalid)?;
    let subjects = subject_share_before_after(&facts, ws.cfg.split);
    let subject_ids: Vec<String> = subjects.iter().map(|s| s.subject.clone()).collect();
    let flags = highly_cited_flags(&facts);
    let mut impact: Option<Table> = None;
    let mut impact_excluded = Table::new(&["min_year", "subject"]);
    for &y in &f.impact_min_years {
        let rep = impact_overrepresentation(&facts, &flags, &subject_ids, y);
        append_rows(&mut impact, prepend(rep.to_table(), "min_year", Cell::Int(y.into())));
        for s in rep.excluded {
            impact_excluded.push(vec![Cell::Int(y.into()), Cell::text(s)]);
        }
    }

    let (kept, citation_table) = geographic_sample(ws, &papers);
    let sample: Vec<&Located> = kept.iter().map(|&i| &papers[i]).filter(|p| !p.regions.is_empty()).collect();
    let years: BTreeSet<i32> = sample.iter().map(|p| p.facts.year).collect();

    let mut tables = Vec::new();
    let mut changes = Table::new(&["level", "location", "rca_t0", "rca_t1", "change"]);
    let mut concentration =
        Table::new(&["level", "year", "series", "k", "locations", "activity", "top_k_share"]);
    let mut dispersion: Option<Table> = None;
    let mut omitted = Table::new(&["level", "year"]);
    for (level, floor, k, top_n) in [
        (Level::Country, f.country_floor_percentile, f.country_top_k, f.country_dispersion_top_n),
        (Level::Region, f.region_floor_percentile, f.region_top_k, f.region_dispersion_top_n),
    ] {
        let [m0, m1] = period_matrices(ws, &sample, level);
        let table = rca_table(&[("t0".into(), m0), ("t1".into(), m1)], ws.cfg.split, Some(floor)).map_err(invalid)?;
        rca_changes(&table, level, &mut changes);

        let mut per_year = BTreeMap::new();
        for &year in &years {
            let in_year: Vec<&Located> = sample.iter().copied().filter(|p| p.facts.year == year).collect();
            let m = dl_matrix(&in_year, level);
            let dl_col = m.column_index(DL);
            for series in ["dl", "all"] {
                let activity: Vec<f64> = (0..m.rows().len())
                    .map(|i| match (series, dl_col) {
                        ("all", _) => m.row_total(i),
                        (_, Some(j)) => m.at(i, j),
                        (_, None) => 0.0,
                    })
                    .filter(|v| *v > 0.0)
                    .collect();
                if let Ok(share) = concentration_top_k(&activity, k) {
                    concentration.push(vec![
                        Cell::text(level.as_str()),
                        Cell::Int(year.into()),
                        Cell::text(series),
                        count(k),
                        count(activity.len()),
                        Cell::float(activity.iter().sum()),
                        Cell::float(share),
                    ]);
                }
            }
            let entries: Vec<(String, f64, f64)> = m
                .rows()
                .iter()
                .enumerate()
                .filter_map(|(i, loc)| rca(&m, loc, DL).ok().map(|v| (loc.clone(), v, m.row_total(i))))
                .collect();
            per_year.insert(year, entries);
        }
        let disp = rca_dispersion(&per_year, top_n);
        for y in &disp.omitted_years {
            omitted.push(vec![Cell::text(level.as_str()), Cell::Int((*y).into())]);
        }
        append_rows(&mut dispersion, prepend(disp.to_table(), "level", Cell::text(level.as_str())));
        let name = level.as_str();
        tables.push((format!("rca_{name}"), table.to_table()));
        tables.push((format!("rca_{name}_exclusions"), table.exclusions_table()));
    }

    let stats = summary(vec![
        ("labeled_papers", count(papers.len())),
        ("geographic_sample", count(sample.len())),
        ("citation_filter", Cell::Bool(f.citation_filter)),
        ("t0_max_year", Cell::Int(ws.cfg.split.t0_max_year.into())),
        ("country_floor_percentile", Cell::float(f.country_floor_percentile)),
        ("region_floor_percentile", Cell::float(f.region_floor_percentile)),
        ("ma_window", count(f.ma_window)),
    ]);
    let mut all: Vec<(&str, Table)> = tables.iter().map(|(n, t)| (n.as_str(), t.clone())).collect();
    all.extend([
        ("rca_changes", changes),
        ("concentration", concentration),
        ("dispersion", dispersion.unwrap_or_default()),
        ("dispersion_omitted", omitted),
        ("dl_share", share_timeseries_table(&shares)),
        ("subject_shares", subject_shares_table(&subjects)),
        ("impact", impact.unwrap_or_default()),
        ("impact_excluded", impact_excluded),
        ("citation_filter", citation_table),
        ("summary", stats),
    ]);
    Ok(vec![(artifact_file(METRICS_TABLES), artifact(ws, ArtifactKind::MetricsTables, all))])
}

// ---------------------------------------------------------------- regress

fn relatedness(art: &PipelineArtifact, name: &str) -> Result<RelatednessMatrix, CliError> {
    let t = art.table(name).map_err(|e| CliError::Internal(anyhow!(e)))?;
    if t.is_empty() {
        return Ok(RelatednessMatrix {
            rows: Vec::new(),
            columns: Vec::new(),
            values: Vec::new(),
            excluded: Vec::new(),
        });
    }
    RelatednessMatrix::from_long_table(t).ok_or_else(|| CliError::Internal(anyhow!("malformed `{name}` relatedness table")))
}

fn region_context(ws: &Workspace, sample: &[&Located]) -> Result<RegionContext, CliError> {
    let t0_max = ws.cfg.split.t0_max_year;
    let am = load(ws, ACTIVITY_MATRIX)?;
    let rt = am.table("regions").map_err(|e| CliError::Internal(anyhow!(e)))?;
    let (ri, ci) = (column(rt, "region_id")?, column(rt, "country_code")?);
    let region_country: BTreeMap<String, String> = rt.rows.iter().map(|r| (text(&r[ri]), text(&r[ci]))).collect();

    let ct = am.table("companies").map_err(|e| CliError::Internal(anyhow!(e)))?;
    let (cid, creg) = (column(ct, "company_id")?, column(ct, "region_id")?);
    let company_region: BTreeMap<String, String> =
        ct.rows.iter().filter_map(|r| r[creg].as_str().map(|g| (text(&r[cid]), g.to_string()))).collect();
    let comps = companies(ws)?;
    let early: Vec<(&CompanyRecord, &String)> = comps
        .records
        .iter()
        .filter(|c| c.founded_year.map_or(false, |y| y <= t0_max))
        .filter_map(|c| company_region.get(&c.id).map(|r| (c, r)))
        .collect();
    let industry = aggregate_activity(&early, Level::Region, |(_, r)| vec![(*r).clone()], |(c, _)| {
        c.categories.iter().cloned().collect()
    });
    let mut company_totals = BTreeMap::new();
    for (_, r) in &early {
        *company_totals.entry((*r).clone()).or_insert(0.0) += 1.0;
    }

    let by_period = |keep: &dyn Fn(i32) -> bool| -> Vec<&Located> {
        sample.iter().copied().filter(|p| keep(p.facts.year)).collect()
    };
    let (s0, s1) = (by_period(&|y| y <= t0_max), by_period(&|y| y > t0_max));
    let subject_matrix = |ps: &[&Located]| {
        aggregate_activity(ps, Level::Region, |p: &&Located| p.regions.clone(), |p: &&Located| {
            p.facts.subjects.iter().cloned().collect()
        })
    };
    let rel = load(ws, RELATEDNESS_MATRIX)?;
    Ok(RegionContext {
        dl_by_period: [dl_matrix(&s0, Level::Region), dl_matrix(&s1, Level::Region)],
        subjects_by_period: [subject_matrix(&s0), subject_matrix(&s1)],
        industry,
        company_totals,
        subject_relatedness: relatedness(&rel, "subjects")?,
        industry_relatedness: relatedness(&rel, "industry")?,
        region_country,
    })
}

fn feature_table(ctx: &RegionContext, target: &TargetSpec, ws: &Workspace) -> (Result<FeatureTable, String>, Vec<(String, String)>) {
    let (raw, skipped) = assemble_region_rows(ctx, target);
    (build_feature_table(&raw, &ws.cfg.regression.feature_config()).map_err(|e| e.to_string()), skipped)
}

/// Subjects ranked by labeled paper count, ties by code.
fn top_subjects(papers: &[Located], n: usize) -> Vec<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for p in papers {
        for s in &p.facts.subjects {
            *counts.entry(s).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.into_iter().take(n).map(|(s, _)| s.to_string()).collect()
}

fn regress(ws: &Workspace) -> Result<Files, CliError> {
    let papers = labeled_papers(ws, true)?;
    let (kept, _) = geographic_sample(ws, &papers);
    let sample: Vec<&Located> = kept.iter().map(|&i| &papers[i]).filter(|p| !p.regions.is_empty()).collect();
    let ctx = region_context(ws, &sample)?;
    let specs = model_suite_specs();
    let order = ws.cfg.regression.interaction_order;

    let (built, assembly_skipped) = feature_table(&ctx, &TargetSpec::Dl, ws);
    let mut exclusions = Table::new(&["region_id", "reason"]);
    for (r, why) in &assembly_skipped {
        exclusions.push(vec![Cell::text(r), Cell::text(why)]);
    }
    let (suite, features, status) = match &built {
        Ok(t) => {
            exclusions.rows.extend(t.exclusions_table().rows);
            (run_model_suite(t, &specs), t.to_table(), "ok".to_string())
        }
        Err(e) => {
            log::warn!("feature table: {e}");
            (ModelSuiteReport::unfitted(&specs, e, order), Table::default(), e.clone())
        }
    };
    let mut standardization = Table::new(&["column", "mean", "sd"]);
    if let Ok(t) = &built {
        for (c, (m, sd)) in &t.standardization {
            standardization.push(vec![Cell::text(c), Cell::float(*m), Cell::float(*sd)]);
        }
    }

    let mut tables = Vec::new();
    let mut skipped = Vec::new();
    for subject in top_subjects(&papers, ws.cfg.regression.per_subject_top_n) {
        match feature_table(&ctx, &TargetSpec::Subject(subject.clone()), ws).0 {
            Ok(t) => tables.push((subject, t)),
            Err(e) => skipped.push((subject, e)),
        }
    }
    let full = specs.last().expect("four specifications");
    let per_subject = per_subject_models(&tables, full, ws.cfg.regression.per_subject_min_rows);
    skipped.extend(per_subject.skipped.iter().cloned());
    skipped.sort();
    let mut skipped_table = Table::new(&["subject", "reason"]);
    for (s, why) in skipped {
        skipped_table.push(vec![Cell::text(s), Cell::text(why)]);
    }

    let feature_bytes = artifact(
        ws,
        ArtifactKind::FeatureTable,
        vec![
            ("features", features),
            ("exclusions", exclusions),
            ("standardization", standardization),
            ("summary", summary(vec![("status", Cell::text(status))])),
        ],
    );
    let model_bytes = artifact(
        ws,
        ArtifactKind::ModelReport,
        vec![("table3", suite.to_table()), ("per_subject", per_subject.to_table()), ("per_subject_skipped", skipped_table)],
    );
    Ok(vec![
        (artifact_file(FEATURE_TABLE), feature_bytes),
        (artifact_file(MODEL_REPORT), model_bytes),
        (artifact_file(MODEL_SUITE), suite.to_json().into_bytes()),
    ])
}
