//! Direct h-step projection: one least-squares fit per horizon, regressing
//! the h-month-ahead target on information dated today.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Extra observations required beyond the coefficient count.
pub const MIN_EXTRA_OBS: usize = 10;

/// A fitted direct projection at one horizon.
#[derive(Debug, Clone)]
pub struct ProjectionFit {
    pub horizon: usize,
    pub coeffs: Vec<f64>,
    /// Conventional standard errors (degrees-of-freedom corrected).
    pub coef_se: Vec<f64>,
    /// Maximum-likelihood residual variance, SSR / nobs.
    pub resid_var: f64,
    pub ssr: f64,
    pub nobs: usize,
}

impl ProjectionFit {
    pub fn predict(&self, regressors: &[f64]) -> f64 {
        debug_assert_eq!(regressors.len(), self.coeffs.len());
        regressors
            .iter()
            .zip(&self.coeffs)
            .map(|(x, b)| x * b)
            .sum()
    }

    /// T ln(sigma^2) + 2k on the fitting sample.
    pub fn aic(&self) -> f64 {
        let t = self.nobs as f64;
        t * self.resid_var.max(f64::MIN_POSITIVE).ln() + 2.0 * self.coeffs.len() as f64
    }
}

/// Regresses `y[i+h]` on `x.row(i)` for `i = 0..n-h`. The design matrix `x`
/// must already contain an intercept column if one is wanted; rows of `x`
/// and entries of `y` are aligned by date.
pub fn direct_projection_fit(y: &[f64], x: &DMatrix<f64>, h: usize) -> Result<ProjectionFit> {
    if h == 0 {
        return Err(Error::Config("projection horizon must be >= 1".into()));
    }
    if x.nrows() != y.len() {
        return Err(Error::Config(format!(
            "design has {} rows but target has {} entries",
            x.nrows(),
            y.len()
        )));
    }
    let k = x.ncols();
    let n = y.len().saturating_sub(h);
    if n < k + MIN_EXTRA_OBS {
        return Err(Error::InsufficientData { needed: k + MIN_EXTRA_OBS, got: n });
    }
    let xa = x.rows(0, n).into_owned();
    let ya = DVector::from_iterator(n, y[h..h + n].iter().copied());

    let xtx = xa.transpose() * &xa;
    let xty = xa.transpose() * &ya;
    let chol = Cholesky::new(xtx)
        .ok_or_else(|| Error::Rank(format!("singular design matrix ({n}x{k})")))?;
    let coeffs = chol.solve(&xty);
    let resid = &ya - &xa * &coeffs;
    let ssr = resid.dot(&resid);
    let dof = (n - k).max(1) as f64;
    let s2 = ssr / dof;
    let inv = chol.inverse();
    let coef_se = (0..k).map(|j| (s2 * inv[(j, j)]).max(0.0).sqrt()).collect();
    Ok(ProjectionFit {
        horizon: h,
        coeffs: coeffs.iter().copied().collect(),
        coef_se,
        resid_var: ssr / n as f64,
        ssr,
        nobs: n,
    })
}
