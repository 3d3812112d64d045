//! L1-penalized logistic regression by accelerated proximal gradient with
//! backtracking. Steps that would raise the objective are rejected and the
//! momentum restarted, so the objective never increases.

use serde::{Deserialize, Serialize};

use super::RelatednessError;

/// Row-major sparse feature matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRows {
    n_features: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    pub fn new(n_features: usize) -> Self {
        Self {
            n_features,
            rows: Vec::new(),
        }
    }

    /// Entries must have in-range, strictly increasing indices.
    pub fn push_row(&mut self, row: Vec<(usize, f64)>) {
        debug_assert!(row.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(row.iter().all(|&(j, _)| j < self.n_features));
        self.rows.push(row);
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n_features = rows.first().map_or(0, Vec::len);
        let mut m = Self::new(n_features);
        for r in rows {
            m.push_row(r.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect());
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            n_features: self.n_features,
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    fn dot(&self, i: usize, w: &[f64]) -> f64 {
        self.rows[i].iter().map(|&(j, v)| w[j] * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct L1LogisticConfig {
    pub max_iter: usize,
    /// Bound on the optimality-condition violation at convergence.
    pub tol: f64,
}

impl Default for L1LogisticConfig {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct L1LogisticFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub objective: f64,
    pub iterations: usize,
    /// Objective after every iteration.
    pub objective_trace: Vec<f64>,
}

impl L1LogisticFit {
    pub fn predict_proba(&self, row: &[(usize, f64)]) -> f64 {
        sigmoid(self.intercept + row.iter().map(|&(j, v)| self.weights[j] * v).sum::<f64>())
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

// log(1 + exp(z)) without overflow
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean logistic loss (no penalty).
pub fn mean_log_loss(x: &SparseRows, y: &[bool], weights: &[f64], intercept: f64) -> f64 {
    let n = x.n_rows() as f64;
    (0..x.n_rows())
        .map(|i| {
            let z = intercept + x.dot(i, weights);
            if y[i] {
                softplus(-z)
            } else {
                softplus(z)
            }
        })
        .sum::<f64>()
        / n
}

/// Mean logistic loss plus `lambda · ‖w‖₁`; the intercept is unpenalized.
pub fn l1_objective(x: &SparseRows, y: &[bool], weights: &[f64], intercept: f64, lambda: f64) -> f64 {
    mean_log_loss(x, y, weights, intercept) + lambda * weights.iter().map(|w| w.abs()).sum::<f64>()
}

/// Gradient of the mean loss: (d/dw, d/db).
fn gradient(x: &SparseRows, y: &[bool], weights: &[f64], intercept: f64) -> (Vec<f64>, f64) {
    let n = x.n_rows() as f64;
    let mut gw = vec![0.0; x.n_features()];
    let mut gb = 0.0;
    for i in 0..x.n_rows() {
        let r = sigmoid(intercept + x.dot(i, weights)) - f64::from(u8::from(y[i]));
        gb += r;
        for &(j, v) in x.row(i) {
            gw[j] += r * v;
        }
    }
    gw.iter_mut().for_each(|g| *g /= n);
    (gw, gb / n)
}

fn base_rate_logit(y: &[bool]) -> f64 {
    let p = y.iter().filter(|&&v| v).count() as f64 / y.len() as f64;
    (p / (1.0 - p)).ln()
}

/// Smallest penalty at which every feature weight is zero at the optimum:
/// the largest absolute loss gradient at the intercept-only solution.
pub fn saturation_lambda(x: &SparseRows, y: &[bool]) -> f64 {
    let zeros = vec![0.0; x.n_features()];
    let (g, _) = gradient(x, y, &zeros, base_rate_logit(y));
    g.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Largest violation of the optimality conditions: the subgradient of the
/// penalized objective must contain zero in every coordinate.
pub fn kkt_violation(x: &SparseRows, y: &[bool], weights: &[f64], intercept: f64, lambda: f64) -> f64 {
    let (g, gb) = gradient(x, y, weights, intercept);
    let mut worst = gb.abs();
    for (w, gj) in weights.iter().zip(&g) {
        let v = if *w == 0.0 {
            (gj.abs() - lambda).max(0.0)
        } else {
            (gj + lambda * w.signum()).abs()
        };
        worst = worst.max(v);
    }
    worst
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

pub fn fit_l1_logistic(
    x: &SparseRows,
    y: &[bool],
    lambda: f64,
    cfg: &L1LogisticConfig,
) -> Result<L1LogisticFit, RelatednessError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(RelatednessError::Lambda(lambda));
    }
    if x.n_rows() != y.len() {
        return Err(RelatednessError::Dimension {
            left: x.n_rows(),
            right: y.len(),
        });
    }
    let positives = y.iter().filter(|&&v| v).count();
    if positives == 0 || positives == y.len() {
        return Err(RelatednessError::SingleClass);
    }

    let p = x.n_features();
    let objective = |w: &[f64], b: f64| l1_objective(x, y, w, b, lambda);
    let smooth = |w: &[f64], b: f64| mean_log_loss(x, y, w, b);

    // Global Lipschitz bound of the mean-loss gradient; backtracking starts
    // well below it and only ever increases.
    let max_row_sq = (0..x.n_rows())
        .map(|i| 1.0 + x.row(i).iter().map(|(_, v)| v * v).sum::<f64>())
        .fold(0.0, f64::max);
    let mut lipschitz = (0.25 * max_row_sq / 16.0).max(1e-12);

    let mut w = vec![0.0; p];
    let mut b = base_rate_logit(y);
    let mut f_cur = objective(&w, b);
    let mut w_prev = w.clone();
    let mut b_prev: f64;
    let (mut yw, mut yb) = (w.clone(), b);
    let mut momentum = 1.0f64;
    let mut trace = Vec::new();

    for iter in 1..=cfg.max_iter {
        let (gw, gb) = gradient(x, y, &yw, yb);
        let f_y = smooth(&yw, yb);
        let (zw, zb) = loop {
            let step = 1.0 / lipschitz;
            let zw: Vec<f64> = yw.iter().zip(&gw).map(|(v, g)| soft_threshold(v - step * g, step * lambda)).collect();
            let zb = yb - step * gb;
            let mut lin = (zb - yb) * gb;
            let mut sq = (zb - yb).powi(2);
            for j in 0..p {
                let d = zw[j] - yw[j];
                lin += d * gw[j];
                sq += d * d;
            }
            if smooth(&zw, zb) <= f_y + lin + 0.5 * lipschitz * sq + 1e-15 * f_y.abs() {
                break (zw, zb);
            }
            lipschitz *= 2.0;
        };

        let f_z = objective(&zw, zb);
        w_prev.clone_from(&w);
        b_prev = b;
        if f_z <= f_cur {
            w.clone_from(&zw);
            b = zb;
            f_cur = f_z;
        }
        trace.push(f_cur);

        if f_z > f_cur {
            // rejected step: restart the momentum from the incumbent
            momentum = 1.0;
            yw.clone_from(&w);
            yb = b;
        } else {
            let next_momentum = (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt()) / 2.0;
            let c = (momentum - 1.0) / next_momentum;
            for j in 0..p {
                yw[j] = w[j] + c * (w[j] - w_prev[j]);
            }
            yb = b + c * (b - b_prev);
            momentum = next_momentum;
        }

        if iter % 10 == 0 || iter == cfg.max_iter {
            let gap = kkt_violation(x, y, &w, b, lambda);
            if gap <= cfg.tol {
                return Ok(L1LogisticFit {
                    weights: w,
                    intercept: b,
                    lambda,
                    objective: f_cur,
                    iterations: iter,
                    objective_trace: trace,
                });
            }
            if iter == cfg.max_iter {
                return Err(RelatednessError::NonConvergence {
                    iterations: iter,
                    gap,
                    objective: f_cur,
                });
            }
        }
    }
    unreachable!("loop returns on the final iteration")
}
