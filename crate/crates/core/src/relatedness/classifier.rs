use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::logistic::{fit_l1_logistic, L1LogisticConfig, SparseRows};
use super::{RelatednessError, RelatednessMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub lambda_grid: Vec<f64>,
    pub validation_fraction: f64,
    /// Sectors with fewer positive examples are skipped.
    pub min_examples: usize,
    pub seed: u64,
    pub solver: L1LogisticConfig,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            lambda_grid: vec![1e-4, 1e-3, 1e-2, 0.1, 1.0],
            validation_fraction: 0.2,
            min_examples: 50,
            seed: 0,
            solver: L1LogisticConfig::default(),
        }
    }
}

/// One trained sector: sparse weights keyed by vocabulary index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorModel {
    pub sector: String,
    pub lambda: f64,
    pub intercept: f64,
    pub weights: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorReport {
    pub sector: String,
    pub positives: usize,
    /// `trained`, `below_min_examples`, `single_class_split` or `no_converged_fit`.
    pub status: String,
    pub chosen_lambda: Option<f64>,
    pub validation_accuracy: Option<f64>,
    /// Validation accuracy per grid value; `None` where the fit failed.
    pub grid: Vec<(f64, Option<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub seed: u64,
    pub validation_fraction: f64,
    pub lambda_grid: Vec<f64>,
    pub n_train: usize,
    pub n_validation: usize,
    pub sectors: Vec<SectorReport>,
}

/// One-vs-rest sector classifier over binary bag-of-words features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub vocabulary: Vec<String>,
    pub sectors: Vec<SectorModel>,
    pub report: TrainingReport,
}

impl LinearClassifier {
    fn features(&self, tokens: &BTreeSet<String>) -> Vec<usize> {
        tokens
            .iter()
            .filter_map(|t| self.vocabulary.binary_search(t).ok())
            .collect()
    }

    /// Sigmoid probability for every trained sector, in sector order.
    pub fn probabilities(&self, tokens: &BTreeSet<String>) -> Vec<(String, f64)> {
        let feats = self.features(tokens);
        self.sectors
            .iter()
            .map(|m| {
                let z = m.intercept + feats.iter().filter_map(|j| m.weights.get(j)).sum::<f64>();
                (m.sector.clone(), super::sigmoid(z))
            })
            .collect()
    }

    pub fn sector_names(&self) -> Vec<String> {
        self.sectors.iter().map(|m| m.sector.clone()).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("classifier serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

fn binary_rows(docs: &[&BTreeSet<String>], vocabulary: &[String]) -> SparseRows {
    let mut x = SparseRows::new(vocabulary.len());
    for d in docs {
        x.push_row(
            d.iter()
                .filter_map(|t| vocabulary.binary_search(t).ok())
                .map(|j| (j, 1.0))
                .collect(),
        );
    }
    x
}

fn accuracy(fit: &super::L1LogisticFit, x: &SparseRows, y: &[bool]) -> f64 {
    let hits = (0..x.n_rows()).filter(|&i| (fit.predict_proba(x.row(i)) >= 0.5) == y[i]).count();
    hits as f64 / y.len() as f64
}

/// Trains one L1 logistic model per sector. `documents` pairs an id and the
/// preprocessed token set with the sector labels of that document.
///
/// The split is a seeded shuffle of the id-sorted documents; the first
/// `ceil(fraction · n)` form the validation set. For each sector the grid
/// value with the best validation accuracy wins (ties go to the larger
/// penalty), and the final model is refit on all documents.
pub fn train_category_classifier(
    documents: &[(String, BTreeSet<String>, BTreeSet<String>)],
    cfg: &ClassifierConfig,
) -> Result<LinearClassifier, RelatednessError> {
    if !(cfg.validation_fraction > 0.0 && cfg.validation_fraction < 1.0) {
        return Err(RelatednessError::ValidationFraction(cfg.validation_fraction));
    }
    if let Some(bad) = cfg.lambda_grid.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(RelatednessError::Lambda(*bad));
    }
    let mut docs: Vec<&(String, BTreeSet<String>, BTreeSet<String>)> =
        documents.iter().filter(|d| !d.1.is_empty()).collect();
    if docs.is_empty() {
        return Err(RelatednessError::NoTrainingRows);
    }
    docs.sort_by(|a, b| a.0.cmp(&b.0));

    let vocabulary: Vec<String> = docs
        .iter()
        .flat_map(|d| d.1.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let tokens: Vec<&BTreeSet<String>> = docs.iter().map(|d| &d.1).collect();
    let x_all = binary_rows(&tokens, &vocabulary);

    let mut order: Vec<usize> = (0..docs.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let n_val = ((cfg.validation_fraction * docs.len() as f64).ceil() as usize).min(docs.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let (mut val_idx, mut train_idx) = (val_idx.to_vec(), train_idx.to_vec());
    val_idx.sort_unstable();
    train_idx.sort_unstable();
    let x_train = x_all.select(&train_idx);
    let x_val = x_all.select(&val_idx);

    let sectors: BTreeSet<&String> = docs.iter().flat_map(|d| d.2.iter()).collect();
    let mut models = Vec::new();
    let mut reports = Vec::new();
    for sector in sectors {
        let y_all: Vec<bool> = docs.iter().map(|d| d.2.contains(sector)).collect();
        let positives = y_all.iter().filter(|&&v| v).count();
        let mut report = SectorReport {
            sector: sector.clone(),
            positives,
            status: String::new(),
            chosen_lambda: None,
            validation_accuracy: None,
            grid: Vec::new(),
        };
        if positives < cfg.min_examples {
            report.status = "below_min_examples".into();
            log::info!("sector {sector}: {positives} positives, skipped");
            reports.push(report);
            continue;
        }
        let y_train: Vec<bool> = train_idx.iter().map(|&i| y_all[i]).collect();
        let y_val: Vec<bool> = val_idx.iter().map(|&i| y_all[i]).collect();
        if y_train.iter().all(|&v| v) || y_train.iter().all(|&v| !v) || positives == y_all.len() {
            report.status = "single_class_split".into();
            reports.push(report);
            continue;
        }
        let mut best: Option<(f64, f64)> = None;
        for &lambda in &cfg.lambda_grid {
            let acc = match fit_l1_logistic(&x_train, &y_train, lambda, &cfg.solver) {
                Ok(fit) => Some(accuracy(&fit, &x_val, &y_val)),
                Err(e) => {
                    log::warn!("sector {sector}, λ={lambda}: {e}");
                    None
                }
            };
            report.grid.push((lambda, acc));
            if let Some(a) = acc {
                let better = match best {
                    None => true,
                    Some((ba, bl)) => a > ba || (a == ba && lambda > bl),
                };
                if better {
                    best = Some((a, lambda));
                }
            }
        }
        let Some((acc, lambda)) = best else {
            report.status = "no_converged_fit".into();
            reports.push(report);
            continue;
        };
        match fit_l1_logistic(&x_all, &y_all, lambda, &cfg.solver) {
            Ok(fit) => {
                models.push(SectorModel {
                    sector: sector.clone(),
                    lambda,
                    intercept: fit.intercept,
                    weights: fit
                        .weights
                        .iter()
                        .enumerate()
                        .filter(|(_, w)| **w != 0.0)
                        .map(|(j, w)| (j, *w))
                        .collect(),
                });
                report.status = "trained".into();
                report.chosen_lambda = Some(lambda);
                report.validation_accuracy = Some(acc);
            }
            Err(e) => {
                log::warn!("sector {sector}: final refit failed: {e}");
                report.status = "no_converged_fit".into();
            }
        }
        reports.push(report);
    }

    Ok(LinearClassifier {
        vocabulary,
        sectors: models,
        report: TrainingReport {
            seed: cfg.seed,
            validation_fraction: cfg.validation_fraction,
            lambda_grid: cfg.lambda_grid.clone(),
            n_train: train_idx.len(),
            n_validation: val_idx.len(),
            sectors: reports,
        },
    })
}

/// Sectors whose probability reaches `threshold` (inclusive).
pub fn predict_categories(
    tokens: &BTreeSet<String>,
    classifier: &LinearClassifier,
    threshold: f64,
) -> Vec<(String, f64)> {
    classifier
        .probabilities(tokens)
        .into_iter()
        .filter(|(_, p)| *p >= threshold)
        .collect()
}

/// Share of documents in each category predicted into each sector. Each
/// element of `papers` is (category set, token set); categories in
/// `categories` with no papers are listed in `excluded`.
pub fn research_industry_relatedness(
    categories: &[String],
    papers: &[(BTreeSet<String>, BTreeSet<String>)],
    classifier: &LinearClassifier,
    threshold: f64,
) -> RelatednessMatrix {
    let columns = classifier.sector_names();
    let predicted: Vec<BTreeSet<String>> = papers
        .iter()
        .map(|(_, t)| predict_categories(t, classifier, threshold).into_iter().map(|(s, _)| s).collect())
        .collect();
    let mut rows = Vec::new();
    let mut values = Vec::new();
    let mut excluded = Vec::new();
    for cat in categories.iter().collect::<BTreeSet<_>>() {
        let members: Vec<usize> = (0..papers.len()).filter(|&i| papers[i].0.contains(cat)).collect();
        if members.is_empty() {
            excluded.push(cat.clone());
            continue;
        }
        let n = members.len() as f64;
        values.push(
            columns
                .iter()
                .map(|c| members.iter().filter(|&&i| predicted[i].contains(c)).count() as f64 / n)
                .collect(),
        );
        rows.push(cat.clone());
    }
    RelatednessMatrix {
        rows,
        columns,
        values,
        excluded,
    }
}
