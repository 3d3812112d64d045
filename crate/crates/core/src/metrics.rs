//! Citation filters, revealed comparative advantage, relatedness-weighted
//! specialization, DL share trends and concentration diagnostics.
//!
//! Quantiles are nearest-rank throughout (see [`crate::stats`]).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Cell, PaperRecord, Table};
use crate::geo::ActivityMatrix;
use crate::stats::{mean, nearest_rank, sample_sd, upper_median};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("undefined_rca: {location}/{category}: {reason}")]
    UndefinedRca {
        location: String,
        category: String,
        reason: &'static str,
    },
    #[error("undefined_score: similarity weights sum to zero")]
    UndefinedScore,
    #[error("category `{0}` has a similarity weight but no RCA value")]
    MissingCategory(String),
    #[error("activity is empty or sums to zero")]
    EmptyActivity,
    #[error("moving-average window must be odd and positive, got {0}")]
    Window(usize),
    #[error("percentile must lie in [0, 100], got {0}")]
    Percentile(f64),
}

/// The per-paper facts the metrics need.
#[derive(Debug, Clone, PartialEq)]
pub struct PaperFacts {
    pub id: String,
    pub year: i32,
    pub citations: u64,
    pub subjects: BTreeSet<String>,
    pub is_dl: bool,
}

impl PaperFacts {
    pub fn from_record(p: &PaperRecord, is_dl: bool) -> Self {
        Self {
            id: p.id.clone(),
            year: p.pub_year,
            citations: p.citations,
            subjects: p.subjects.clone(),
            is_dl,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PeriodSplit {
    /// Last year of the first period.
    pub t0_max_year: i32,
}

impl Default for PeriodSplit {
    fn default() -> Self {
        Self { t0_max_year: 2012 }
    }
}

impl PeriodSplit {
    pub fn label(&self, year: i32) -> &'static str {
        if year <= self.t0_max_year {
            "t0"
        } else {
            "t1"
        }
    }
}

fn by_year<'a>(papers: &'a [PaperFacts]) -> BTreeMap<i32, Vec<usize>> {
    let mut years: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, p) in papers.iter().enumerate() {
        years.entry(p.year).or_default().push(i);
    }
    years
}

#[derive(Debug, Clone, PartialEq)]
pub struct CitationFilter {
    /// Indices into the input, ascending.
    pub kept: Vec<usize>,
    /// Per-year median used as the strict threshold.
    pub medians: BTreeMap<i32, f64>,
    /// Years with fewer than two papers, dropped entirely: (year, papers).
    pub dropped_years: Vec<(i32, usize)>,
}

/// Keeps papers cited strictly more than the (upper) median of their year.
pub fn above_median_citations(papers: &[PaperFacts]) -> CitationFilter {
    let mut out = CitationFilter {
        kept: Vec::new(),
        medians: BTreeMap::new(),
        dropped_years: Vec::new(),
    };
    for (year, idx) in by_year(papers) {
        if idx.len() < 2 {
            out.dropped_years.push((year, idx.len()));
            continue;
        }
        let cites: Vec<f64> = idx.iter().map(|&i| papers[i].citations as f64).collect();
        let median = upper_median(&cites).expect("non-empty year");
        out.medians.insert(year, median);
        out.kept.extend(idx.into_iter().filter(|&i| papers[i].citations as f64 > median));
    }
    out.kept.sort_unstable();
    out
}

/// Flags papers in the top citation quartile of their year (boundary
/// value included).
pub fn highly_cited_flags(papers: &[PaperFacts]) -> Vec<bool> {
    let mut flags = vec![false; papers.len()];
    for (_, idx) in by_year(papers) {
        let cites: Vec<f64> = idx.iter().map(|&i| papers[i].citations as f64).collect();
        let p75 = nearest_rank(&cites, 0.75).expect("non-empty year");
        for i in idx {
            flags[i] = papers[i].citations as f64 >= p75;
        }
    }
    flags
}

/// `(A[l,c] / A[l,·]) / (A[·,c] / A[·,·])`.
pub fn rca(matrix: &ActivityMatrix, location: &str, category: &str) -> Result<f64, MetricsError> {
    let undefined = |reason| MetricsError::UndefinedRca {
        location: location.to_string(),
        category: category.to_string(),
        reason,
    };
    let i = matrix.row_index(location).ok_or_else(|| undefined("unknown location"))?;
    let j = matrix.column_index(category).ok_or_else(|| undefined("unknown category"))?;
    rca_at(matrix, i, j).map_err(undefined)
}

fn rca_at(matrix: &ActivityMatrix, i: usize, j: usize) -> Result<f64, &'static str> {
    let row = matrix.row_total(i);
    if row <= 0.0 {
        return Err("location has no activity");
    }
    let col = matrix.column_total(j);
    if col <= 0.0 {
        return Err("category has no activity");
    }
    Ok((matrix.at(i, j) / row) / (col / matrix.total()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcaRow {
    pub location: String,
    pub category: String,
    pub period: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcaExclusion {
    pub location: String,
    pub category: Option<String>,
    pub period: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcaTable {
    pub rows: Vec<RcaRow>,
    pub exclusions: Vec<RcaExclusion>,
    pub split: PeriodSplit,
    pub floor_percentile: Option<f64>,
    /// Total activity a location needs to be retained.
    pub floor_value: Option<f64>,
}

impl RcaTable {
    pub fn get(&self, location: &str, category: &str, period: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.location == location && r.category == category && r.period == period)
            .map(|r| r.value)
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["location", "period", "category", "rca"]);
        for r in &self.rows {
            t.push(vec![
                Cell::text(&r.location),
                Cell::text(&r.period),
                Cell::text(&r.category),
                Cell::float(r.value),
            ]);
        }
        t
    }

    pub fn exclusions_table(&self) -> Table {
        let mut t = Table::new(&["location", "period", "category", "reason"]);
        for e in &self.exclusions {
            t.push(vec![
                Cell::text(&e.location),
                e.period.as_ref().map_or(Cell::Null, Cell::text),
                e.category.as_ref().map_or(Cell::Null, Cell::text),
                Cell::text(&e.reason),
            ]);
        }
        t
    }
}

/// RCA for every location, category and period.
///
/// RCA is computed against the full matrix of each period. The activity
/// floor is then applied as a retention filter: a location is kept when its
/// activity summed over all periods reaches the nearest-rank
/// `floor_percentile` of those sums.
pub fn rca_table(
    periods: &[(String, ActivityMatrix)],
    split: PeriodSplit,
    floor_percentile: Option<f64>,
) -> Result<RcaTable, MetricsError> {
    let mut totals: BTreeMap<&str, f64> = BTreeMap::new();
    for (_, m) in periods {
        for (i, loc) in m.rows().iter().enumerate() {
            *totals.entry(loc).or_insert(0.0) += m.row_total(i);
        }
    }
    let floor_value = match floor_percentile {
        Some(p) if !(0.0..=100.0).contains(&p) => return Err(MetricsError::Percentile(p)),
        Some(p) => nearest_rank(&totals.values().copied().collect::<Vec<_>>(), p / 100.0),
        None => None,
    };
    let mut table = RcaTable {
        rows: Vec::new(),
        exclusions: Vec::new(),
        split,
        floor_percentile,
        floor_value,
    };
    let retained = |loc: &str| floor_value.map_or(true, |f| totals.get(loc).copied().unwrap_or(0.0) >= f);
    for (loc, total) in &totals {
        if !retained(loc) {
            table.exclusions.push(RcaExclusion {
                location: loc.to_string(),
                category: None,
                period: None,
                reason: format!("below activity floor ({total} < {})", floor_value.unwrap_or(0.0)),
            });
        }
    }
    for (period, m) in periods {
        for (i, loc) in m.rows().iter().enumerate() {
            if !retained(loc) {
                continue;
            }
            for (j, cat) in m.columns().iter().enumerate() {
                match rca_at(m, i, j) {
                    Ok(v) => table.rows.push(RcaRow {
                        location: loc.clone(),
                        category: cat.clone(),
                        period: period.clone(),
                        value: v,
                    }),
                    Err(reason) => table.exclusions.push(RcaExclusion {
                        location: loc.clone(),
                        category: Some(cat.clone()),
                        period: Some(period.clone()),
                        reason: format!("undefined_rca: {reason}"),
                    }),
                }
            }
        }
    }
    Ok(table)
}

/// Similarity-weighted mean of a location's RCA over categories, leaving
/// the target category out.
pub fn related_specialization(
    rca_by_category: &BTreeMap<String, f64>,
    similarity_to_target: &BTreeMap<String, f64>,
    target: &str,
) -> Result<f64, MetricsError> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (c, &s) in similarity_to_target {
        if c == target {
            continue;
        }
        let r = rca_by_category.get(c).ok_or_else(|| MetricsError::MissingCategory(c.clone()))?;
        num += s * r;
        den += s;
    }
    if den == 0.0 {
        return Err(MetricsError::UndefinedScore);
    }
    Ok(num / den)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareRow {
    pub year: i32,
    pub papers: usize,
    pub dl_papers: usize,
    pub share: f64,
    pub moving_average: f64,
}

/// Yearly DL share with a centered moving average over the years present;
/// windows are truncated at the edges.
pub fn dl_share_timeseries(papers: &[PaperFacts], window: usize) -> Result<Vec<ShareRow>, MetricsError> {
    if window == 0 || window % 2 == 0 {
        return Err(MetricsError::Window(window));
    }
    let half = (window / 2) as i32;
    let mut counts: BTreeMap<i32, (usize, usize)> = BTreeMap::new();
    for p in papers {
        let e = counts.entry(p.year).or_insert((0, 0));
        e.0 += 1;
        e.1 += usize::from(p.is_dl);
    }
    let shares: BTreeMap<i32, f64> = counts.iter().map(|(&y, &(n, d))| (y, d as f64 / n as f64)).collect();
    Ok(counts
        .iter()
        .map(|(&year, &(n, d))| {
            let in_window: Vec<f64> = shares.range(year - half..=year + half).map(|(_, s)| *s).collect();
            ShareRow {
                year,
                papers: n,
                dl_papers: d,
                share: shares[&year],
                moving_average: mean(&in_window).expect("window holds its own year"),
            }
        })
        .collect())
}

pub fn share_timeseries_table(rows: &[ShareRow]) -> Table {
    let mut t = Table::new(&["year", "papers", "dl_papers", "dl_share", "dl_share_ma"]);
    for r in rows {
        t.push(vec![
            Cell::Int(r.year.into()),
            Cell::Int(r.papers as i64),
            Cell::Int(r.dl_papers as i64),
            Cell::float(r.share),
            Cell::float(r.moving_average),
        ]);
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectShareRow {
    pub subject: String,
    pub papers: usize,
    pub papers_t0: usize,
    pub papers_t1: usize,
    /// `None` when the subject has no papers in the period.
    pub dl_share_t0: Option<f64>,
    pub dl_share_t1: Option<f64>,
}

/// DL share inside each subject before and after the split, ranked by total
/// activity (ties by subject code).
pub fn subject_share_before_after(papers: &[PaperFacts], split: PeriodSplit) -> Vec<SubjectShareRow> {
    // subject -> [(papers, dl) for t0, t1]
    let mut acc: BTreeMap<&str, [(usize, usize); 2]> = BTreeMap::new();
    for p in papers {
        let k = usize::from(split.label(p.year) == "t1");
        for s in &p.subjects {
            let e = &mut acc.entry(s).or_default()[k];
            e.0 += 1;
            e.1 += usize::from(p.is_dl);
        }
    }
    let share = |(n, d): (usize, usize)| (n > 0).then(|| d as f64 / n as f64);
    let mut rows: Vec<SubjectShareRow> = acc
        .into_iter()
        .map(|(s, [a, b])| SubjectShareRow {
            subject: s.to_string(),
            papers: a.0 + b.0,
            papers_t0: a.0,
            papers_t1: b.0,
            dl_share_t0: share(a),
            dl_share_t1: share(b),
        })
        .collect();
    rows.sort_by(|x, y| y.papers.cmp(&x.papers).then_with(|| x.subject.cmp(&y.subject)));
    rows
}

pub fn subject_shares_table(rows: &[SubjectShareRow]) -> Table {
    let mut t = Table::new(&["rank", "subject", "papers", "papers_t0", "papers_t1", "dl_share_t0", "dl_share_t1"]);
    for (rank, r) in rows.iter().enumerate() {
        t.push(vec![
            Cell::Int(rank as i64 + 1),
            Cell::text(&r.subject),
            Cell::Int(r.papers as i64),
            Cell::Int(r.papers_t0 as i64),
            Cell::Int(r.papers_t1 as i64),
            Cell::opt_float(r.dl_share_t0),
            Cell::opt_float(r.dl_share_t1),
        ]);
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactRow {
    pub subject: String,
    pub papers: usize,
    pub highly_cited: usize,
    pub dl_share_all: f64,
    /// `None` when the subject has no highly cited papers.
    pub dl_share_highly_cited: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpactReport {
    pub rows: Vec<ImpactRow>,
    /// Subjects of `subjects` with no papers from `min_year` on.
    pub excluded: Vec<String>,
}

/// DL share among all papers versus among highly cited papers, per subject,
/// for papers published in `min_year` or later. `highly_cited` is aligned
/// with `papers`.
pub fn impact_overrepresentation(
    papers: &[PaperFacts],
    highly_cited: &[bool],
    subjects: &[String],
    min_year: i32,
) -> ImpactReport {
    assert_eq!(papers.len(), highly_cited.len(), "flags must align with papers");
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    for s in subjects.iter().collect::<BTreeSet<_>>() {
        let members: Vec<usize> = (0..papers.len())
            .filter(|&i| papers[i].year >= min_year && papers[i].subjects.contains(s))
            .collect();
        if members.is_empty() {
            excluded.push(s.clone());
            continue;
        }
        let dl = members.iter().filter(|&&i| papers[i].is_dl).count();
        let hc: Vec<usize> = members.iter().copied().filter(|&i| highly_cited[i]).collect();
        let hc_dl = hc.iter().filter(|&&i| papers[i].is_dl).count();
        rows.push(ImpactRow {
            subject: s.clone(),
            papers: members.len(),
            highly_cited: hc.len(),
            dl_share_all: dl as f64 / members.len() as f64,
            dl_share_highly_cited: (!hc.is_empty()).then(|| hc_dl as f64 / hc.len() as f64),
        });
    }
    ImpactReport { rows, excluded }
}

impl ImpactReport {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["subject", "papers", "highly_cited", "dl_share_all", "dl_share_highly_cited"]);
        for r in &self.rows {
            t.push(vec![
                Cell::text(&r.subject),
                Cell::Int(r.papers as i64),
                Cell::Int(r.highly_cited as i64),
                Cell::float(r.dl_share_all),
                Cell::opt_float(r.dl_share_highly_cited),
            ]);
        }
        t
    }
}

/// Share of total activity held by the `k` most active locations.
pub fn concentration_top_k(activity: &[f64], k: usize) -> Result<f64, MetricsError> {
    let total: f64 = activity.iter().sum();
    if activity.is_empty() || total <= 0.0 {
        return Err(MetricsError::EmptyActivity);
    }
    if k >= activity.len() {
        return Ok(1.0);
    }
    let mut sorted = activity.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(sorted[..k].iter().sum::<f64>() / total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionRow {
    pub year: i32,
    pub locations: usize,
    pub min: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub max: f64,
    pub mean: f64,
    pub sd: f64,
    /// (location, rca) pairs behind the summary.
    pub values: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispersionReport {
    pub rows: Vec<DispersionRow>,
    pub omitted_years: Vec<i32>,
}

/// Per-year RCA distribution over the `top_n` most active locations of that
/// year. Input: year → (location, rca, activity); ties in activity go to the
/// smaller location id.
pub fn rca_dispersion(per_year: &BTreeMap<i32, Vec<(String, f64, f64)>>, top_n: usize) -> DispersionReport {
    let mut report = DispersionReport {
        rows: Vec::new(),
        omitted_years: Vec::new(),
    };
    for (&year, entries) in per_year {
        let mut ranked: Vec<&(String, f64, f64)> = entries.iter().collect();
        ranked.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(top_n);
        if ranked.is_empty() {
            report.omitted_years.push(year);
            continue;
        }
        let mut values: Vec<(String, f64)> = ranked.iter().map(|e| (e.0.clone(), e.1)).collect();
        values.sort_by(|a, b| a.0.cmp(&b.0));
        let v: Vec<f64> = values.iter().map(|e| e.1).collect();
        let q = |p| nearest_rank(&v, p).expect("non-empty");
        report.rows.push(DispersionRow {
            year,
            locations: v.len(),
            min: q(0.0),
            p25: q(0.25),
            p50: q(0.5),
            p75: q(0.75),
            max: q(1.0),
            mean: mean(&v).expect("non-empty"),
            sd: sample_sd(&v).expect("non-empty"),
            values,
        });
    }
    report
}

impl DispersionReport {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["year", "locations", "min", "p25", "p50", "p75", "max", "mean", "sd", "values"]);
        for r in &self.rows {
            t.push(vec![
                Cell::Int(r.year.into()),
                Cell::Int(r.locations as i64),
                Cell::float(r.min),
                Cell::float(r.p25),
                Cell::float(r.p50),
                Cell::float(r.p75),
                Cell::float(r.max),
                Cell::float(r.mean),
                Cell::float(r.sd),
                Cell::List(r.values.iter().map(|(l, v)| format!("{l}={v}")).collect()),
            ]);
        }
        t
    }
}
