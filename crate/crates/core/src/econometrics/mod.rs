//! Regional drivers regression: feature assembly and standardization, OLS
//! by QR, country-clustered standard errors and the nested model suite.

mod features;
mod ols;
mod suite;

pub use features::{
    assemble_region_rows, build_feature_table, columns, FeatureConfig, FeatureTable, InteractionOrder,
    RawRegionRow, RegionContext, TargetSpec,
};
pub use ols::{classical_se, clustered_covariance, clustered_se, ols_fit, OlsFit};
pub use suite::{
    fit_spec, model_suite_specs, per_subject_models, run_model_suite, stars, ModelResult, ModelSuiteReport,
    PerSubjectReport, PerSubjectRow, RegressionSpec, Term, REPORT_ROWS,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EconError {
    #[error("design has {rows} rows but {values} values were supplied")]
    Dimension { rows: usize, values: usize },
    #[error("need more rows than columns: n = {n}, k = {k}")]
    InsufficientRows { n: usize, k: usize },
    #[error("rank-deficient design; collinear columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),
    #[error("clustered variance undefined with a single cluster")]
    SingleCluster,
    #[error("standardization failed: column `{0}` has zero variance")]
    ZeroVariance(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("regressor `{0}` listed twice")]
    DuplicateRegressor(String),
}
