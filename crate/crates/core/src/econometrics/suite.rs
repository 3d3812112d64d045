use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::columns::*;
use super::ols::{clustered_se, ols_fit};
use super::{EconError, FeatureTable, InteractionOrder};
use crate::corpus::{Cell, Table};
use crate::stats::normal_two_sided_p;

/// Report rows in display order: (column id, label).
pub const REPORT_ROWS: [(&str, &str); 7] = [
    (RCA_T0, "RCA_t0"),
    (ARXIV_SP, "arXiv_sp"),
    (CRUNCHBASE_SP, "CrunchBase_sp"),
    (SP_X_SP, "arXiv_sp x CrunchBase_sp"),
    (SP_X_TOT, "arXiv_sp x CrunchBase_tot"),
    (ARXIV_TOT, "arXiv_tot"),
    (IS_CHINA, "is_China"),
];

const CI_Z: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSpec {
    pub name: String,
    pub dependent: String,
    pub regressors: Vec<String>,
}

impl RegressionSpec {
    pub fn validate(&self, table: &FeatureTable) -> Result<(), EconError> {
        let mut seen = BTreeSet::new();
        for r in &self.regressors {
            if !seen.insert(r) {
                return Err(EconError::DuplicateRegressor(r.clone()));
            }
            table.column(r)?;
        }
        table.column(&self.dependent).map(|_| ())
    }
}

/// The four nested specifications.
pub fn model_suite_specs() -> Vec<RegressionSpec> {
    let base = [RCA_T0, ARXIV_SP, ARXIV_TOT, IS_CHINA];
    let steps: [&[&str]; 4] = [&[], &[CRUNCHBASE_SP], &[CRUNCHBASE_SP, SP_X_SP], &[CRUNCHBASE_SP, SP_X_SP, SP_X_TOT]];
    steps
        .iter()
        .enumerate()
        .map(|(i, extra)| {
            let included: BTreeSet<&str> = base.iter().chain(extra.iter()).copied().collect();
            RegressionSpec {
                name: format!("Model {}", i + 1),
                dependent: RCA_T1.into(),
                regressors: REPORT_ROWS
                    .iter()
                    .filter(|(c, _)| included.contains(c))
                    .map(|(c, _)| c.to_string())
                    .collect(),
            }
        })
        .collect()
}

/// `***` below 0.01, `**` below 0.05, `*` below 0.10.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.10 {
        "*"
    } else {
        ""
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub name: String,
    pub label: String,
    pub coefficient: Option<f64>,
    pub se: Option<f64>,
    pub p_value: Option<f64>,
    pub stars: String,
}

impl Term {
    fn empty(name: &str, label: &str) -> Self {
        Self {
            name: name.into(),
            label: label.into(),
            coefficient: None,
            se: None,
            p_value: None,
            stars: String::new(),
        }
    }

    fn fitted(name: &str, label: &str, b: f64, se: f64) -> Self {
        let p = normal_two_sided_p(b / se);
        Self {
            name: name.into(),
            label: label.into(),
            coefficient: Some(b),
            se: Some(se),
            p_value: Some(p),
            stars: stars(p).into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub name: String,
    /// `ok`, or the reason the model could not be fitted.
    pub status: String,
    pub dependent: String,
    pub n: usize,
    pub r_squared: Option<f64>,
    pub intercept: Term,
    /// Every report row; rows outside the specification stay empty.
    pub terms: Vec<Term>,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

impl ModelResult {
    pub fn term(&self, name: &str) -> Option<&Term> {
        self.terms.iter().find(|t| t.name == name)
    }
}

fn design(table: &FeatureTable, spec: &RegressionSpec) -> Result<(DMatrix<f64>, Vec<String>), EconError> {
    let cols: Vec<&[f64]> = spec.regressors.iter().map(|r| table.column(r)).collect::<Result<_, _>>()?;
    let x = DMatrix::from_fn(table.n(), cols.len() + 1, |i, j| if j == 0 { 1.0 } else { cols[j - 1][i] });
    let mut names = vec!["intercept".to_string()];
    names.extend(spec.regressors.iter().cloned());
    Ok((x, names))
}

/// OLS with country-clustered standard errors for one specification.
pub fn fit_spec(table: &FeatureTable, spec: &RegressionSpec) -> Result<ModelResult, EconError> {
    spec.validate(table)?;
    let (x, names) = design(table, spec)?;
    let y = table.column(&spec.dependent)?;
    let fit = ols_fit(&x, y, &names)?;
    let se = clustered_se(&x, &fit, &table.country_codes)?;
    let coef_of = |name: &str| names.iter().position(|n| n == name).map(|j| (fit.coefficients[j], se[j]));
    let terms = REPORT_ROWS
        .iter()
        .map(|(c, label)| match coef_of(c) {
            Some((b, s)) => Term::fitted(c, label, b, s),
            None => Term::empty(c, label),
        })
        .collect();
    Ok(ModelResult {
        name: spec.name.clone(),
        status: "ok".into(),
        dependent: spec.dependent.clone(),
        n: table.n(),
        r_squared: fit.r_squared.is_finite().then_some(fit.r_squared),
        intercept: Term::fitted("intercept", "Intercept", fit.coefficients[0], se[0]),
        terms,
        residuals: fit.residuals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSuiteReport {
    pub dependent: String,
    pub standard_errors: String,
    pub star_levels: String,
    pub interaction_order: String,
    pub models: Vec<ModelResult>,
}

impl ModelSuiteReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Long form: model, row, coefficient, se, p_value, stars.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["model", "term", "coefficient", "se", "p_value", "stars"]);
        for m in &self.models {
            for term in std::iter::once(&m.intercept).chain(&m.terms) {
                t.push(vec![
                    Cell::text(&m.name),
                    Cell::text(&term.label),
                    Cell::opt_float(term.coefficient),
                    Cell::opt_float(term.se),
                    Cell::opt_float(term.p_value),
                    Cell::text(&term.stars),
                ]);
            }
            t.push(vec![Cell::text(&m.name), Cell::text("R2"), Cell::opt_float(m.r_squared), Cell::Null, Cell::Null, Cell::text("")]);
            t.push(vec![Cell::text(&m.name), Cell::text("n"), Cell::Int(m.n as i64), Cell::Null, Cell::Null, Cell::text("")]);
        }
        t
    }
}

impl ModelResult {
    /// An empty slot for a model that could not be estimated.
    pub fn failed(spec: &RegressionSpec, n: usize, status: String) -> Self {
        ModelResult {
            name: spec.name.clone(),
            status,
            dependent: spec.dependent.clone(),
            n,
            r_squared: None,
            intercept: Term::empty("intercept", "Intercept"),
            terms: REPORT_ROWS.iter().map(|(c, l)| Term::empty(c, l)).collect(),
            residuals: Vec::new(),
        }
    }
}

impl ModelSuiteReport {
    fn with_models(models: Vec<ModelResult>, order: InteractionOrder) -> Self {
        ModelSuiteReport {
            dependent: "RCA_dl,t1".into(),
            standard_errors: "clustered by country (CR1)".into(),
            star_levels: "*** p<0.01, ** p<0.05, * p<0.10 (normal reference)".into(),
            interaction_order: serde_json::to_value(order)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
            models,
        }
    }

    /// Every model slot empty, for when no feature table could be built.
    pub fn unfitted(specs: &[RegressionSpec], reason: &str, order: InteractionOrder) -> Self {
        let models = specs.iter().map(|s| ModelResult::failed(s, 0, reason.to_string())).collect();
        Self::with_models(models, order)
    }
}

/// Fits every specification. A model that cannot be estimated keeps its
/// place in the report with empty cells and the failure as its status.
pub fn run_model_suite(table: &FeatureTable, specs: &[RegressionSpec]) -> ModelSuiteReport {
    let models = specs
        .iter()
        .map(|spec| {
            fit_spec(table, spec).unwrap_or_else(|e| {
                log::warn!("{}: {e}", spec.name);
                ModelResult::failed(spec, table.n(), e.to_string())
            })
        })
        .collect();
    ModelSuiteReport::with_models(models, table.interaction_order)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerSubjectRow {
    pub subject: String,
    pub term: String,
    pub coefficient: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PerSubjectReport {
    pub rows: Vec<PerSubjectRow>,
    pub skipped: Vec<(String, String)>,
}

impl PerSubjectReport {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["subject", "term", "coefficient", "se", "ci_low", "ci_high", "n"]);
        for r in &self.rows {
            t.push(vec![
                Cell::text(&r.subject),
                Cell::text(&r.term),
                Cell::float(r.coefficient),
                Cell::float(r.se),
                Cell::float(r.ci_low),
                Cell::float(r.ci_high),
                Cell::Int(r.n as i64),
            ]);
        }
        t
    }
}

/// Fits `spec` once per subject table; coefficients carry 95% intervals
/// of `±1.96` clustered standard errors.
pub fn per_subject_models(tables: &[(String, FeatureTable)], spec: &RegressionSpec, min_rows: usize) -> PerSubjectReport {
    let mut report = PerSubjectReport::default();
    for (subject, table) in tables {
        if table.n() < min_rows {
            report.skipped.push((subject.clone(), format!("{} rows below floor {min_rows}", table.n())));
            continue;
        }
        match fit_spec(table, spec) {
            Ok(m) => {
                for term in m.terms.iter().filter(|t| t.coefficient.is_some()) {
                    let (b, se) = (term.coefficient.unwrap(), term.se.unwrap());
                    report.rows.push(PerSubjectRow {
                        subject: subject.clone(),
                        term: term.label.clone(),
                        coefficient: b,
                        se,
                        ci_low: b - CI_Z * se,
                        ci_high: b + CI_Z * se,
                        n: m.n,
                    });
                }
            }
            Err(e) => report.skipped.push((subject.clone(), e.to_string())),
        }
    }
    report
}
