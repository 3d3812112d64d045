use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EconError;
use crate::corpus::{Cell, Table};
use crate::geo::ActivityMatrix;
use crate::metrics::{rca, related_specialization};
use crate::relatedness::RelatednessMatrix;
use crate::stats::{mean, nearest_rank, sample_sd};

/// Column ids of the feature table.
pub mod columns {
    pub const RCA_T1: &str = "rca_t1";
    pub const RCA_T0: &str = "rca_t0";
    pub const ARXIV_SP: &str = "arxiv_sp";
    pub const CRUNCHBASE_SP: &str = "crunchbase_sp";
    pub const ARXIV_TOT: &str = "arxiv_tot";
    pub const CRUNCHBASE_TOT: &str = "crunchbase_tot";
    pub const IS_CHINA: &str = "is_china";
    pub const SP_X_SP: &str = "arxiv_sp_x_crunchbase_sp";
    pub const SP_X_TOT: &str = "arxiv_sp_x_crunchbase_tot";

    pub const ALL: [&str; 9] = [RCA_T1, RCA_T0, ARXIV_SP, CRUNCHBASE_SP, ARXIV_TOT, CRUNCHBASE_TOT, IS_CHINA, SP_X_SP, SP_X_TOT];
}

use columns::*;

/// Unstandardized per-region inputs. Totals are raw counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRegionRow {
    pub region_id: String,
    pub country_code: String,
    pub rca_t1: f64,
    pub rca_t0: f64,
    pub arxiv_sp: f64,
    pub crunchbase_sp: f64,
    pub arxiv_total: f64,
    pub crunchbase_total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionOrder {
    /// Products of z-scored base columns, not re-standardized.
    #[default]
    StandardizeThenMultiply,
    /// Products of the logged raw columns, then z-scored.
    MultiplyThenStandardize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    /// Regions must have arXiv activity strictly above this nearest-rank
    /// percentile of all regions; `None` keeps every region.
    pub sample_floor_percentile: Option<f64>,
    pub china_code: String,
    pub interaction_order: InteractionOrder,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            sample_floor_percentile: Some(75.0),
            china_code: "CN".into(),
            interaction_order: InteractionOrder::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub region_ids: Vec<String>,
    pub country_codes: Vec<String>,
    pub columns: BTreeMap<String, Vec<f64>>,
    /// (region, reason) for every dropped region.
    pub excluded: Vec<(String, String)>,
    pub floor_value: Option<f64>,
    /// Column → (mean, sd) used for z-scores.
    pub standardization: BTreeMap<String, (f64, f64)>,
    pub interaction_order: InteractionOrder,
}

impl FeatureTable {
    pub fn n(&self) -> usize {
        self.region_ids.len()
    }

    pub fn column(&self, name: &str) -> Result<&[f64], EconError> {
        self.columns
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| EconError::UnknownColumn(name.to_string()))
    }

    pub fn to_table(&self) -> Table {
        let mut header = vec!["region_id", "country_code"];
        header.extend(ALL);
        let mut t = Table::new(&header);
        for i in 0..self.n() {
            let mut row = vec![Cell::text(&self.region_ids[i]), Cell::text(&self.country_codes[i])];
            row.extend(ALL.iter().map(|c| Cell::float(self.columns[*c][i])));
            t.push(row);
        }
        t
    }

    pub fn exclusions_table(&self) -> Table {
        let mut t = Table::new(&["region_id", "reason"]);
        for (r, why) in &self.excluded {
            t.push(vec![Cell::text(r), Cell::text(why)]);
        }
        t
    }
}

fn zscore(name: &str, v: &[f64]) -> Result<(Vec<f64>, (f64, f64)), EconError> {
    let m = mean(v).ok_or_else(|| EconError::ZeroVariance(name.to_string()))?;
    let sd = sample_sd(v).unwrap_or(0.0);
    if v.len() < 2 || !(sd > 0.0) {
        return Err(EconError::ZeroVariance(name.to_string()));
    }
    Ok((v.iter().map(|x| (x - m) / sd).collect(), (m, sd)))
}

/// Applies the activity floor, logs the totals and z-scores every column
/// except the China dummy. Rows are ordered by region id.
pub fn build_feature_table(raw: &[RawRegionRow], cfg: &FeatureConfig) -> Result<FeatureTable, EconError> {
    let mut rows: Vec<&RawRegionRow> = raw.iter().collect();
    rows.sort_by(|a, b| a.region_id.cmp(&b.region_id));
    let floor_value = cfg
        .sample_floor_percentile
        .and_then(|p| nearest_rank(&rows.iter().map(|r| r.arxiv_total).collect::<Vec<_>>(), p / 100.0));

    let mut excluded = Vec::new();
    let mut kept = Vec::new();
    for r in rows {
        let values = [r.rca_t1, r.rca_t0, r.arxiv_sp, r.crunchbase_sp, r.arxiv_total, r.crunchbase_total];
        let reason = if floor_value.is_some_and(|f| r.arxiv_total <= f) {
            Some("below_activity_floor".to_string())
        } else if values.iter().any(|v| !v.is_finite()) {
            Some("missing_value".to_string())
        } else if r.arxiv_total <= 0.0 {
            Some("zero_total:arxiv".to_string())
        } else if r.crunchbase_total <= 0.0 {
            Some("zero_total:crunchbase".to_string())
        } else {
            None
        };
        match reason {
            Some(why) => excluded.push((r.region_id.clone(), why)),
            None => kept.push(r),
        }
    }

    let pick = |f: fn(&RawRegionRow) -> f64| kept.iter().map(|r| f(r)).collect::<Vec<f64>>();
    let mut base: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    base.insert(RCA_T1, pick(|r| r.rca_t1));
    base.insert(RCA_T0, pick(|r| r.rca_t0));
    base.insert(ARXIV_SP, pick(|r| r.arxiv_sp));
    base.insert(CRUNCHBASE_SP, pick(|r| r.crunchbase_sp));
    base.insert(ARXIV_TOT, pick(|r| r.arxiv_total.ln()));
    base.insert(CRUNCHBASE_TOT, pick(|r| r.crunchbase_total.ln()));

    let product = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).collect::<Vec<f64>>();
    let mut out: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut standardization = BTreeMap::new();
    if cfg.interaction_order == InteractionOrder::MultiplyThenStandardize {
        let sp_x_sp = product(&base[ARXIV_SP], &base[CRUNCHBASE_SP]);
        let sp_x_tot = product(&base[ARXIV_SP], &base[CRUNCHBASE_TOT]);
        base.insert(SP_X_SP, sp_x_sp);
        base.insert(SP_X_TOT, sp_x_tot);
    }
    for (name, v) in &base {
        let (z, params) = zscore(name, v)?;
        out.insert(name.to_string(), z);
        standardization.insert(name.to_string(), params);
    }
    if cfg.interaction_order == InteractionOrder::StandardizeThenMultiply {
        out.insert(SP_X_SP.into(), product(&out[ARXIV_SP], &out[CRUNCHBASE_SP]));
        out.insert(SP_X_TOT.into(), product(&out[ARXIV_SP], &out[CRUNCHBASE_TOT]));
    }
    out.insert(
        IS_CHINA.into(),
        kept.iter().map(|r| f64::from(u8::from(r.country_code == cfg.china_code))).collect(),
    );

    Ok(FeatureTable {
        region_ids: kept.iter().map(|r| r.region_id.clone()).collect(),
        country_codes: kept.iter().map(|r| r.country_code.clone()).collect(),
        columns: out,
        excluded,
        floor_value,
        standardization,
        interaction_order: cfg.interaction_order,
    })
}

/// The activity whose specialization is the dependent variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSpec {
    Dl,
    Subject(String),
}

impl TargetSpec {
    pub fn label(&self) -> &str {
        match self {
            TargetSpec::Dl => "dl",
            TargetSpec::Subject(s) => s,
        }
    }
}

/// Everything needed to derive raw regional rows for any target.
#[derive(Debug, Clone)]
pub struct RegionContext {
    /// Region × {dl, non_dl} paper counts for the first and second period.
    pub dl_by_period: [ActivityMatrix; 2],
    /// Region × subject counts (full counting) per period.
    pub subjects_by_period: [ActivityMatrix; 2],
    /// Region × sector company counts in the first period.
    pub industry: ActivityMatrix,
    /// Companies per region in the first period.
    pub company_totals: BTreeMap<String, f64>,
    /// Subject × subject similarity, with a `dl` row.
    pub subject_relatedness: RelatednessMatrix,
    /// Subject × sector shares, with a `dl` row.
    pub industry_relatedness: RelatednessMatrix,
    pub region_country: BTreeMap<String, String>,
}

fn rca_row(m: &ActivityMatrix, region: &str) -> BTreeMap<String, f64> {
    m.columns()
        .iter()
        .filter_map(|c| rca(m, region, c).ok().map(|v| (c.clone(), v)))
        .collect()
}

fn weighted(rcas: &BTreeMap<String, f64>, sims: &RelatednessMatrix, target: &str) -> Option<f64> {
    let row: BTreeMap<String, f64> = sims.row(target)?.into_iter().filter(|(c, _)| rcas.contains_key(c)).collect();
    related_specialization(rcas, &row, target).ok()
}

/// Raw rows for `target`, one per region of `region_country`, plus
/// (region, reason) for regions where some input is undefined.
pub fn assemble_region_rows(ctx: &RegionContext, target: &TargetSpec) -> (Vec<RawRegionRow>, Vec<(String, String)>) {
    let (matrices, category) = match target {
        TargetSpec::Dl => (&ctx.dl_by_period, "dl"),
        TargetSpec::Subject(s) => (&ctx.subjects_by_period, s.as_str()),
    };
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (region, country) in &ctx.region_country {
        let t0 = rca(&matrices[0], region, category);
        let t1 = rca(&matrices[1], region, category);
        let arxiv_sp = weighted(&rca_row(&ctx.subjects_by_period[0], region), &ctx.subject_relatedness, target.label());
        let crunchbase_sp = weighted(&rca_row(&ctx.industry, region), &ctx.industry_relatedness, target.label());
        let reason = match (&t0, &t1, arxiv_sp, crunchbase_sp) {
            (Err(_), _, _, _) => Some("undefined rca_t0"),
            (_, Err(_), _, _) => Some("undefined rca_t1"),
            (_, _, None, _) => Some("undefined arxiv_sp"),
            (_, _, _, None) => Some("undefined crunchbase_sp"),
            _ => None,
        };
        if let Some(why) = reason {
            skipped.push((region.clone(), why.to_string()));
            continue;
        }
        let arxiv_total = ctx.dl_by_period[0].row_index(region).map_or(0.0, |i| ctx.dl_by_period[0].row_total(i));
        rows.push(RawRegionRow {
            region_id: region.clone(),
            country_code: country.clone(),
            rca_t1: t1.unwrap(),
            rca_t0: t0.unwrap(),
            arxiv_sp: arxiv_sp.unwrap(),
            crunchbase_sp: crunchbase_sp.unwrap(),
            arxiv_total,
            crunchbase_total: ctx.company_totals.get(region).copied().unwrap_or(0.0),
        });
    }
    (rows, skipped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn raw(id: &str, cc: &str, v: [f64; 6]) -> RawRegionRow {
        RawRegionRow {
            region_id: id.into(),
            country_code: cc.into(),
            rca_t1: v[0],
            rca_t0: v[1],
            arxiv_sp: v[2],
            crunchbase_sp: v[3],
            arxiv_total: v[4],
            crunchbase_total: v[5],
        }
    }

    fn eight() -> Vec<RawRegionRow> {
        (0..8)
            .map(|i| {
                let f = i as f64;
                raw(&format!("r{i}"), if i % 2 == 0 { "CN" } else { "US" }, [f, 8.0 - f, f * f, 1.0 + f % 3.0, 10.0 * (f + 1.0), 5.0 + f])
            })
            .collect()
    }

    #[test]
    fn top_quartile_floor_keeps_two_of_eight() {
        let t = build_feature_table(&eight(), &FeatureConfig::default()).unwrap();
        assert_eq!(t.region_ids, ["r6", "r7"]);
        assert_eq!(t.floor_value, Some(60.0));
        assert_eq!(t.excluded.len(), 6);
        assert_eq!(t.column(IS_CHINA).unwrap(), [1.0, 0.0]);
    }

    #[test]
    fn standardized_columns_have_zero_mean_unit_sd() {
        let cfg = FeatureConfig {
            sample_floor_percentile: None,
            ..Default::default()
        };
        let t = build_feature_table(&eight(), &cfg).unwrap();
        for c in [RCA_T1, RCA_T0, ARXIV_SP, CRUNCHBASE_SP, ARXIV_TOT, CRUNCHBASE_TOT] {
            let v = t.column(c).unwrap();
            assert!(mean(v).unwrap().abs() < 1e-12, "{c}");
            assert!((sample_sd(v).unwrap() - 1.0).abs() < 1e-12, "{c}");
        }
        let (a, b, p) = (t.column(ARXIV_SP).unwrap(), t.column(CRUNCHBASE_SP).unwrap(), t.column(SP_X_SP).unwrap());
        for i in 0..t.n() {
            assert_eq!(p[i], a[i] * b[i]);
        }
    }

    #[test]
    fn zero_crunchbase_total_is_excluded() {
        let mut rows = eight();
        rows[3].crunchbase_total = 0.0;
        let cfg = FeatureConfig {
            sample_floor_percentile: None,
            ..Default::default()
        };
        let t = build_feature_table(&rows, &cfg).unwrap();
        assert_eq!(t.n(), 7);
        assert_eq!(t.excluded, [("r3".to_string(), "zero_total:crunchbase".to_string())]);
    }

    #[test]
    fn zero_variance_names_column() {
        let mut rows = eight();
        rows.iter_mut().for_each(|r| r.arxiv_sp = 2.0);
        let cfg = FeatureConfig {
            sample_floor_percentile: None,
            ..Default::default()
        };
        assert_eq!(build_feature_table(&rows, &cfg), Err(EconError::ZeroVariance(ARXIV_SP.into())));
    }

    proptest! {
        #[test]
        fn rescaling_raw_column_leaves_features_unchanged(scale in 0.01f64..100.0) {
            let cfg = FeatureConfig { sample_floor_percentile: None, ..Default::default() };
            let base = build_feature_table(&eight(), &cfg).unwrap();
            let scaled: Vec<_> = eight().into_iter().map(|mut r| { r.arxiv_sp *= scale; r.crunchbase_total *= scale; r }).collect();
            let t = build_feature_table(&scaled, &cfg).unwrap();
            for c in ALL {
                for (a, b) in base.column(c).unwrap().iter().zip(t.column(c).unwrap()) {
                    prop_assert!((a - b).abs() < 1e-9, "{}: {} vs {}", c, a, b);
                }
            }
        }
    }
}
