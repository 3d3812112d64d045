//! Run configuration: one TOML file plus `GPTATLAS_` environment overrides.
//!
//! Overrides use `GPTATLAS_<SECTION>__<KEY>=<value>`, with `__` separating
//! nesting levels (`GPTATLAS_CLASSIFIER__SOLVER__TOL=1e-6`). Top-level keys
//! take no section (`GPTATLAS_SEED=7`). Values are parsed as TOML literals
//! and fall back to plain strings.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gptatlas_core::corpus::IngestConfig;
use gptatlas_core::econometrics::{FeatureConfig, InteractionOrder};
use gptatlas_core::linkage::FuzzyMatchConfig;
use gptatlas_core::metrics::PeriodSplit;
use gptatlas_core::nlp::{PreprocessConfig, TopicAssignmentConfig};
use gptatlas_core::relatedness::ClassifierConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const ENV_PREFIX: &str = "GPTATLAS_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    pub papers: PathBuf,
    pub registry: PathBuf,
    pub companies: PathBuf,
    pub boundaries: PathBuf,
    /// Topic-word weights, CSV `topic_id,word,weight`.
    pub topics: PathBuf,
}

impl InputPaths {
    pub fn labelled(&self) -> [(&'static str, &Path); 5] {
        [
            ("papers", &self.papers),
            ("registry", &self.registry),
            ("companies", &self.companies),
            ("boundaries", &self.boundaries),
            ("topics", &self.topics),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelateConfig {
    /// Probability at or above which a paper counts as predicted into a sector.
    pub threshold: f64,
}

impl Default for RelateConfig {
    fn default() -> Self {
        Self { threshold: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// Keep only papers cited above their year's median for the geographic
    /// measures.
    pub citation_filter: bool,
    /// Activity floors for the RCA tables; 0 keeps every location.
    pub country_floor_percentile: f64,
    pub region_floor_percentile: f64,
    pub ma_window: usize,
    pub country_top_k: usize,
    pub region_top_k: usize,
    pub country_dispersion_top_n: usize,
    pub region_dispersion_top_n: usize,
    pub impact_min_years: Vec<i32>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            citation_filter: true,
            country_floor_percentile: 90.0,
            region_floor_percentile: 99.0,
            ma_window: 3,
            country_top_k: 10,
            region_top_k: 30,
            country_dispersion_top_n: 50,
            region_dispersion_top_n: 150,
            impact_min_years: vec![2009, 2012, 2015],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionConfig {
    pub sample_floor: bool,
    pub sample_floor_percentile: f64,
    pub china_code: String,
    pub interaction_order: InteractionOrder,
    /// Most active subjects fitted as quasi-controls.
    pub per_subject_top_n: usize,
    pub per_subject_min_rows: usize,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        let f = FeatureConfig::default();
        Self {
            sample_floor: true,
            sample_floor_percentile: f.sample_floor_percentile.unwrap_or(75.0),
            china_code: f.china_code,
            interaction_order: f.interaction_order,
            per_subject_top_n: 10,
            per_subject_min_rows: 20,
        }
    }
}

impl RegressionConfig {
    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            sample_floor_percentile: self.sample_floor.then_some(self.sample_floor_percentile),
            china_code: self.china_code.clone(),
            interaction_order: self.interaction_order,
        }
    }
}

fn company_preprocess_default() -> PreprocessConfig {
    PreprocessConfig {
        rare_min_count: 2,
        ngram_min_count: 5,
        min_tokens: 3,
        ..Default::default()
    }
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub inputs: InputPaths,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub ingest: IngestConfig,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default = "company_preprocess_default")]
    pub company_preprocess: PreprocessConfig,
    #[serde(default)]
    pub matching: FuzzyMatchConfig,
    #[serde(default)]
    pub labeling: TopicAssignmentConfig,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    #[serde(default)]
    pub relate: RelateConfig,
    #[serde(default)]
    pub split: PeriodSplit,
    #[serde(default)]
    pub filters: FilterConfig,
    #[serde(default)]
    pub regression: RegressionConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Parses a `GPTATLAS_` override value: a TOML literal when it parses as
/// one, otherwise a string.
fn override_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Applies `(variable, value)` overrides to a parsed TOML document.
pub fn apply_overrides<I>(doc: &mut toml::Table, vars: I) -> Result<Vec<String>, ConfigError>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut applied = Vec::new();
    let vars: BTreeMap<String, String> = vars.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    for (var, raw) in vars {
        let path: Vec<String> = var[ENV_PREFIX.len()..].split("__").map(str::to_lowercase).collect();
        if path.iter().any(String::is_empty) {
            return Err(ConfigError::Invalid(format!("malformed override variable {var}")));
        }
        let mut table = &mut *doc;
        for key in &path[..path.len() - 1] {
            let entry = table.entry(key.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
            table = entry
                .as_table_mut()
                .ok_or_else(|| ConfigError::Invalid(format!("{var}: `{key}` is not a section")))?;
        }
        table.insert(path[path.len() - 1].clone(), override_value(&raw));
        applied.push(var);
    }
    Ok(applied)
}

impl RunConfig {
    /// Reads the file, applies environment overrides and resolves relative
    /// paths against the config file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::load_with_env(path, std::env::vars())
    }

    pub fn load_with_env<I>(path: &Path, vars: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let mut doc: toml::Table = toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for var in apply_overrides(&mut doc, vars)? {
            log::info!("config override from {var}");
        }
        let mut cfg: RunConfig =
            toml::Value::Table(doc).try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.inputs.papers);
        resolve(&mut cfg.inputs.registry);
        resolve(&mut cfg.inputs.companies);
        resolve(&mut cfg.inputs.boundaries);
        resolve(&mut cfg.inputs.topics);
        resolve(&mut cfg.out_dir);
        Ok(cfg)
    }

    /// Checks paths and parameter ranges. Topic ids are checked against the
    /// model when it is loaded.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        for (label, p) in self.inputs.labelled() {
            if !p.is_file() {
                return bad(format!("inputs.{label}: {} does not exist", p.display()));
            }
        }
        if self.ingest.min_year > self.ingest.max_year {
            return bad("ingest.min_year exceeds ingest.max_year".into());
        }
        self.matching.validate().map_err(|e| ConfigError::Invalid(format!("matching: {e}")))?;
        if !(self.labeling.gamma >= 0.0) {
            return bad(format!("labeling.gamma must be >= 0, got {}", self.labeling.gamma));
        }
        if self.labeling.dl_topic_ids.is_empty() {
            return bad("labeling.dl_topic_ids is empty".into());
        }
        let c = &self.classifier;
        if !(c.validation_fraction > 0.0 && c.validation_fraction < 1.0) {
            return bad(format!("classifier.validation_fraction must lie in (0, 1), got {}", c.validation_fraction));
        }
        if c.lambda_grid.is_empty() || c.lambda_grid.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return bad("classifier.lambda_grid needs positive finite values".into());
        }
        if !(0.0..=1.0).contains(&self.relate.threshold) {
            return bad(format!("relate.threshold must lie in [0, 1], got {}", self.relate.threshold));
        }
        let f = &self.filters;
        if f.ma_window == 0 || f.ma_window % 2 == 0 {
            return bad(format!("filters.ma_window must be odd, got {}", f.ma_window));
        }
        for (name, p) in [
            ("filters.country_floor_percentile", f.country_floor_percentile),
            ("filters.region_floor_percentile", f.region_floor_percentile),
            ("regression.sample_floor_percentile", self.regression.sample_floor_percentile),
        ] {
            if !(0.0..=100.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 100], got {p}"));
            }
        }
        Ok(())
    }

    /// SHA-256 of the parameters, leaving out file locations: inputs are
    /// tracked by content digest and the output directory is not a parameter.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("inputs");
            obj.remove("out_dir");
        }
        hex::encode(Sha256::digest(serde_json::to_vec(&v).expect("json value serializes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 1
[inputs]
papers = "p.jsonl"
registry = "r.jsonl"
companies = "c.jsonl"
boundaries = "b.geojson"
topics = "t.csv"
[filters]
ma_window = 5
"#;

    fn write(dir: &Path) -> PathBuf {
        let path = dir.join("run.toml");
        std::fs::write(&path, MINIMAL).unwrap();
        path
    }

    #[test]
    fn defaults_and_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::load_with_env(&write(dir.path()), Vec::new()).unwrap();
        assert_eq!(cfg.filters.ma_window, 5);
        assert_eq!(cfg.filters.region_top_k, 30);
        assert_eq!(cfg.split.t0_max_year, 2012);
        assert_eq!(cfg.inputs.papers, dir.path().join("p.jsonl"));
        assert_eq!(cfg.out_dir, dir.path().join("out"));
    }

    #[test]
    fn env_overrides_nested_keys() {
        let dir = tempfile::tempdir().unwrap();
        let vars = vec![
            ("GPTATLAS_SEED".to_string(), "9".to_string()),
            ("GPTATLAS_FILTERS__MA_WINDOW".to_string(), "7".to_string()),
            ("GPTATLAS_CLASSIFIER__SOLVER__TOL".to_string(), "1e-5".to_string()),
            ("GPTATLAS_REGRESSION__CHINA_CODE".to_string(), "CHN".to_string()),
            ("OTHER_SEED".to_string(), "3".to_string()),
        ];
        let cfg = RunConfig::load_with_env(&write(dir.path()), vars).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.filters.ma_window, 7);
        assert_eq!(cfg.classifier.solver.tol, 1e-5);
        assert_eq!(cfg.regression.china_code, "CHN");
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let vars = vec![("GPTATLAS_FILTERS__NOPE".to_string(), "1".to_string())];
        assert!(matches!(RunConfig::load_with_env(&write(dir.path()), vars), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn hash_ignores_locations_only() {
        let dir = tempfile::tempdir().unwrap();
        let a = RunConfig::load_with_env(&write(dir.path()), Vec::new()).unwrap();
        let mut b = a.clone();
        b.out_dir = PathBuf::from("/elsewhere");
        b.inputs.papers = PathBuf::from("/elsewhere/p.jsonl");
        assert_eq!(a.hash(), b.hash());
        b.seed = 2;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn validation_reports_missing_inputs_and_bad_ranges() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::load_with_env(&write(dir.path()), Vec::new()).unwrap();
        assert!(cfg.validate().unwrap_err().to_string().contains("inputs.papers"));
        for f in ["p.jsonl", "r.jsonl", "c.jsonl", "b.geojson", "t.csv"] {
            std::fs::write(dir.path().join(f), "").unwrap();
        }
        let mut cfg = cfg;
        cfg.labeling.dl_topic_ids = [0].into();
        cfg.validate().unwrap();
        cfg.filters.ma_window = 4;
        assert!(cfg.validate().unwrap_err().to_string().contains("ma_window"));
    }
}
