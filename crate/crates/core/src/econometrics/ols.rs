use nalgebra::{DMatrix, DVector};

use super::EconError;

/// Relative size below which a diagonal entry of R marks a column as
/// linearly dependent on the columns before it.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub r_squared: f64,
    /// `(XᵀX)⁻¹`, kept for the variance estimators.
    pub xtx_inv: DMatrix<f64>,
}

impl OlsFit {
    pub fn n(&self) -> usize {
        self.residuals.len()
    }

    pub fn k(&self) -> usize {
        self.coefficients.len()
    }
}

/// Least squares by Householder QR. `x` already carries any intercept
/// column; `names` labels its columns for error messages.
pub fn ols_fit(x: &DMatrix<f64>, y: &[f64], names: &[String]) -> Result<OlsFit, EconError> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(EconError::Dimension {
            rows: n,
            values: y.len(),
        });
    }
    if n <= k {
        return Err(EconError::InsufficientRows { n, k });
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = (0..k).map(|j| x.column(j).norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let collinear: Vec<String> = (0..k)
        .filter(|&j| r[(j, j)].abs() <= RANK_TOL * scale)
        .map(|j| names.get(j).cloned().unwrap_or_else(|| format!("column {j}")))
        .collect();
    if !collinear.is_empty() {
        return Err(EconError::RankDeficient(collinear));
    }

    let yv = DVector::from_column_slice(y);
    let qty = qr.q().transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .expect("non-singular after the rank check");
    let resid = &yv - x * &beta;
    let mean_y = yv.mean();
    let sst: f64 = yv.iter().map(|v| (v - mean_y).powi(2)).sum();
    let ssr = resid.norm_squared();
    let r_inv = r.solve_upper_triangular(&DMatrix::identity(k, k)).expect("non-singular");
    Ok(OlsFit {
        coefficients: beta.iter().copied().collect(),
        residuals: resid.iter().copied().collect(),
        r_squared: if sst > 0.0 { 1.0 - ssr / sst } else { f64::NAN },
        xtx_inv: &r_inv * r_inv.transpose(),
    })
}

/// Homoskedastic standard errors, `σ² = SSR / (n − k)`.
pub fn classical_se(fit: &OlsFit) -> Vec<f64> {
    let (n, k) = (fit.n(), fit.k());
    let sigma2 = fit.residuals.iter().map(|e| e * e).sum::<f64>() / (n - k) as f64;
    (0..k).map(|j| (sigma2 * fit.xtx_inv[(j, j)]).sqrt()).collect()
}

/// Cluster-robust sandwich with the CR1 factor `G/(G−1) · (n−1)/(n−k)`.
pub fn clustered_se(x: &DMatrix<f64>, fit: &OlsFit, clusters: &[String]) -> Result<Vec<f64>, EconError> {
    Ok(clustered_covariance(x, fit, clusters)?.diagonal().iter().map(|v| v.sqrt()).collect())
}

pub fn clustered_covariance(x: &DMatrix<f64>, fit: &OlsFit, clusters: &[String]) -> Result<DMatrix<f64>, EconError> {
    let (n, k) = x.shape();
    if clusters.len() != n {
        return Err(EconError::Dimension {
            rows: n,
            values: clusters.len(),
        });
    }
    let mut scores: std::collections::BTreeMap<&str, DVector<f64>> = std::collections::BTreeMap::new();
    for (i, g) in clusters.iter().enumerate() {
        let s = scores.entry(g).or_insert_with(|| DVector::zeros(k));
        *s += x.row(i).transpose() * fit.residuals[i];
    }
    let g = scores.len();
    if g < 2 {
        return Err(EconError::SingleCluster);
    }
    let mut meat = DMatrix::zeros(k, k);
    for s in scores.values() {
        meat += s * s.transpose();
    }
    let factor = (g as f64 / (g - 1) as f64) * ((n - 1) as f64 / (n - k) as f64);
    Ok(&fit.xtx_inv * meat * &fit.xtx_inv * factor)
}
