//! Principal-component factor extraction for the diffusion-index and
//! factor-augmented models.
//!
//! Loadings are sqrt(N) times the top-r eigenvectors of the sample
//! covariance of the standardized panel, so that Lambda Lambda' / N = I_r.
//! Factor scores divide by N by default (`FactorScale::OverN`), making them
//! the usual principal-component scores; the unscaled convention is kept as
//! a switch since the difference is absorbed by downstream regression
//! coefficients.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scale convention for factor scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorScale {
    /// F_t = Lambda x_t / N (principal-component scores).
    #[default]
    OverN,
    /// F_t = Lambda x_t.
    Raw,
}

/// A standardized panel: each retained column has mean 0 and unit standard
/// deviation (1/T divisor).
#[derive(Debug, Clone)]
pub struct StandardizedPanel {
    pub ids: Vec<String>,
    /// T x N matrix of standardized observations.
    pub data: DMatrix<f64>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

/// Standardizes `columns` (each `(id, values)` of common length T), dropping
/// the ids listed in `exclude`.
pub fn standardize_panel(
    columns: &[(String, Vec<f64>)],
    exclude: &[String],
) -> Result<StandardizedPanel> {
    let kept: Vec<&(String, Vec<f64>)> = columns
        .iter()
        .filter(|(id, _)| !exclude.contains(id))
        .collect();
    if kept.is_empty() {
        return Err(Error::Config("no columns left after exclusions".into()));
    }
    let t = kept[0].1.len();
    if t == 0 {
        return Err(Error::Degenerate("empty panel".into()));
    }
    let n = kept.len();
    let mut data = DMatrix::zeros(t, n);
    let mut ids = Vec::with_capacity(n);
    let mut means = Vec::with_capacity(n);
    let mut sds = Vec::with_capacity(n);
    for (j, (id, values)) in kept.iter().enumerate() {
        if values.len() != t {
            return Err(Error::Config(format!(
                "column '{id}' has {} rows, expected {t}",
                values.len()
            )));
        }
        let mean = values.iter().sum::<f64>() / t as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / t as f64;
        if var <= 0.0 {
            return Err(Error::Degenerate(format!(
                "column '{id}' has zero variance"
            )));
        }
        let sd = var.sqrt();
        for i in 0..t {
            data[(i, j)] = (values[i] - mean) / sd;
        }
        ids.push(id.clone());
        means.push(mean);
        sds.push(sd);
    }
    Ok(StandardizedPanel { ids, data, means, sds })
}

/// Estimated factor structure.
#[derive(Debug, Clone)]
pub struct FactorModel {
    /// r x N loading matrix, sqrt(N)-normalized eigenvectors as rows.
    pub loadings: DMatrix<f64>,
    /// T x r factor scores.
    pub factors: DMatrix<f64>,
    /// Top-r eigenvalues of the sample covariance, descending.
    pub eigenvalues: Vec<f64>,
    /// Share of total variance carried by the retained factors.
    pub variance_explained: f64,
    pub scale: FactorScale,
    pub excluded_ids: Vec<String>,
}

impl FactorModel {
    /// Factor values at one observation row of a standardized panel.
    pub fn project_row(&self, row: &[f64]) -> Vec<f64> {
        let n = self.loadings.ncols();
        debug_assert_eq!(row.len(), n);
        let denom = match self.scale {
            FactorScale::OverN => n as f64,
            FactorScale::Raw => 1.0,
        };
        (0..self.loadings.nrows())
            .map(|k| {
                (0..n).map(|j| self.loadings[(k, j)] * row[j]).sum::<f64>() / denom
            })
            .collect()
    }
}

/// Extracts `r` principal-component factors from a standardized panel.
pub fn extract_factors(
    panel: &StandardizedPanel,
    r: usize,
    scale: FactorScale,
    excluded_ids: Vec<String>,
) -> Result<FactorModel> {
    let t = panel.data.nrows();
    let n = panel.data.ncols();
    if r == 0 || r > n || r > t.saturating_sub(1) {
        return Err(Error::Config(format!(
            "factor count r={r} out of range for a {t}x{n} panel"
        )));
    }
    // 1/T covariance of standardized data
    let cov = panel.data.transpose() * &panel.data / t as f64;
    let eigen = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));

    let total: f64 = eigen.eigenvalues.iter().sum();
    let mut loadings = DMatrix::zeros(r, n);
    let mut eigenvalues = Vec::with_capacity(r);
    let sqrt_n = (n as f64).sqrt();
    for (k, &idx) in order.iter().take(r).enumerate() {
        let ev = eigen.eigenvalues[idx];
        if !ev.is_finite() {
            return Err(Error::Numerical("eigen decomposition failed".into()));
        }
        eigenvalues.push(ev.max(0.0));
        let col = eigen.eigenvectors.column(idx);
        // sign convention: largest-magnitude entry positive
        let dominant = col
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let flip = if col[dominant] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            loadings[(k, j)] = sqrt_n * flip * col[j];
        }
    }
    let denom = match scale {
        FactorScale::OverN => n as f64,
        FactorScale::Raw => 1.0,
    };
    let factors = &panel.data * loadings.transpose() / denom;
    let variance_explained = if total > 0.0 {
        eigenvalues.iter().sum::<f64>() / total
    } else {
        0.0
    };
    Ok(FactorModel {
        loadings,
        factors,
        eigenvalues,
        variance_explained,
        scale,
        excluded_ids,
    })
}
