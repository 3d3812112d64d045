//! Subject–subject relatedness from co-occurrence, and research–industry
//! relatedness by transferring a company-sector text classifier to papers.

mod classifier;
mod logistic;

use std::collections::BTreeSet;

use crate::corpus::{Cell, Table};

pub use classifier::{
    predict_categories, research_industry_relatedness, train_category_classifier, ClassifierConfig,
    LinearClassifier, SectorModel, SectorReport, TrainingReport,
};
pub use logistic::{
    fit_l1_logistic, kkt_violation, l1_objective, mean_log_loss, saturation_lambda, sigmoid,
    L1LogisticConfig, L1LogisticFit, SparseRows,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RelatednessError {
    #[error("undefined_similarity: cosine similarity of a zero vector")]
    UndefinedSimilarity,
    #[error("vectors must be non-negative")]
    NegativeEntry,
    #[error("dimension mismatch: {left} vs {right}")]
    Dimension { left: usize, right: usize },
    #[error("regularization strength must be positive and finite, got {0}")]
    Lambda(f64),
    #[error("labels must contain both classes")]
    SingleClass,
    #[error("no convergence after {iterations} iterations: optimality gap {gap:e}, objective {objective}")]
    NonConvergence {
        iterations: usize,
        gap: f64,
        objective: f64,
    },
    #[error("validation fraction must lie in (0, 1), got {0}")]
    ValidationFraction(f64),
    #[error("no training rows with a usable description")]
    NoTrainingRows,
}

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64, RelatednessError> {
    if u.len() != v.len() {
        return Err(RelatednessError::Dimension {
            left: u.len(),
            right: v.len(),
        });
    }
    if u.iter().chain(v).any(|x| *x < 0.0) {
        return Err(RelatednessError::NegativeEntry);
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|b| b * b).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(RelatednessError::UndefinedSimilarity);
    }
    Ok((dot / (nu * nv)).min(1.0))
}

/// Rows × columns of values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct RelatednessMatrix {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub values: Vec<Vec<f64>>,
    /// Row categories left out because they had no papers.
    pub excluded: Vec<String>,
}

impl RelatednessMatrix {
    pub fn get(&self, row: &str, column: &str) -> Option<f64> {
        let i = self.rows.iter().position(|r| r == row)?;
        let j = self.columns.iter().position(|c| c == column)?;
        Some(self.values[i][j])
    }

    /// The row as (column, value) pairs.
    pub fn row(&self, row: &str) -> Option<Vec<(String, f64)>> {
        let i = self.rows.iter().position(|r| r == row)?;
        Some(self.columns.iter().cloned().zip(self.values[i].iter().copied()).collect())
    }

    /// Long format: row_id, col_id, value.
    pub fn to_long_table(&self) -> Table {
        let mut t = Table::new(&["row_id", "col_id", "value"]);
        for (i, r) in self.rows.iter().enumerate() {
            for (j, c) in self.columns.iter().enumerate() {
                t.push(vec![Cell::text(r), Cell::text(c), Cell::Float(self.values[i][j])]);
            }
        }
        t
    }

    pub fn from_long_table(table: &Table) -> Option<Self> {
        let (ri, ci, vi) = (table.column_index("row_id")?, table.column_index("col_id")?, table.column_index("value")?);
        let mut rows: Vec<String> = Vec::new();
        let mut columns: Vec<String> = Vec::new();
        for r in &table.rows {
            let (a, b) = (r[ri].as_str()?.to_string(), r[ci].as_str()?.to_string());
            if !rows.contains(&a) {
                rows.push(a);
            }
            if !columns.contains(&b) {
                columns.push(b);
            }
        }
        let mut values = vec![vec![0.0; columns.len()]; rows.len()];
        for r in &table.rows {
            let i = rows.iter().position(|x| Some(x.as_str()) == r[ri].as_str())?;
            let j = columns.iter().position(|x| Some(x.as_str()) == r[ci].as_str())?;
            values[i][j] = r[vi].as_f64()?;
        }
        Some(Self {
            rows,
            columns,
            values,
            excluded: Vec::new(),
        })
    }
}

/// Cosine similarity of binary paper-incidence vectors for every pair of
/// categories in `categories`. Each element of `paper_categories` is the
/// category set of one paper (subjects, plus the DL label when flagged).
pub fn subject_relatedness(categories: &[String], paper_categories: &[BTreeSet<String>]) -> RelatednessMatrix {
    let mut kept = Vec::new();
    let mut vectors = Vec::new();
    let mut excluded = Vec::new();
    let mut sorted: Vec<&String> = categories.iter().collect::<BTreeSet<_>>().into_iter().collect();
    sorted.dedup();
    for c in sorted {
        let v: Vec<f64> = paper_categories.iter().map(|cats| if cats.contains(c) { 1.0 } else { 0.0 }).collect();
        if v.iter().any(|&x| x > 0.0) {
            kept.push(c.clone());
            vectors.push(v);
        } else {
            excluded.push(c.clone());
        }
    }
    let n = kept.len();
    let mut values = vec![vec![0.0; n]; n];
    for i in 0..n {
        values[i][i] = 1.0;
        for j in (i + 1)..n {
            let s = cosine_similarity(&vectors[i], &vectors[j]).expect("non-zero incidence vectors");
            values[i][j] = s;
            values[j][i] = s;
        }
    }
    RelatednessMatrix {
        rows: kept.clone(),
        columns: kept,
        values,
        excluded,
    }
}
