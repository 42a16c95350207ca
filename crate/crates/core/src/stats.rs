//! Shared estimation primitives: ordinary least squares and small helpers.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// A fitted least-squares regression. `coeffs` is ordered as the columns of
/// the design matrix passed to [`ols`].
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coeffs: DVector<f64>,
    /// Maximum-likelihood residual variance, SSR / T.
    pub resid_var: f64,
    pub ssr: f64,
    pub nobs: usize,
}

impl OlsFit {
    pub fn predict(&self, row: &[f64]) -> f64 {
        debug_assert_eq!(row.len(), self.coeffs.len());
        row.iter().zip(self.coeffs.iter()).map(|(x, b)| x * b).sum()
    }

    /// Akaike information criterion with `k` estimated coefficients:
    /// `T ln(sigma^2) + 2k`, computed on the fitting sample.
    pub fn aic(&self) -> f64 {
        let t = self.nobs as f64;
        let sigma2 = (self.resid_var).max(f64::MIN_POSITIVE);
        t * sigma2.ln() + 2.0 * self.coeffs.len() as f64
    }
}

/// Least squares of `y` on the columns of `x` (include an intercept column
/// yourself if wanted). Solved through the normal equations with a Cholesky
/// factorization; a failed factorization is reported as a rank error.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    let (t, k) = (x.nrows(), x.ncols());
    if t != y.len() {
        return Err(Error::Config(format!(
            "design has {t} rows but response has {} entries",
            y.len()
        )));
    }
    if t < k {
        return Err(Error::InsufficientData { needed: k, got: t });
    }
    let xtx = x.transpose() * x;
    let xty = x.transpose() * y;
    let chol = Cholesky::new(xtx)
        .ok_or_else(|| Error::Rank(format!("singular design matrix ({t}x{k})")))?;
    let coeffs = chol.solve(&xty);
    let resid = y - x * &coeffs;
    let ssr = resid.dot(&resid);
    Ok(OlsFit {
        coeffs,
        resid_var: ssr / t as f64,
        ssr,
        nobs: t,
    })
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance (1/T divisor).
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

/// Verification oracles used by the unit and acceptance suites. They stay
/// independent of the implementation paths they are used to check.
pub mod oracle {
    use nalgebra::{DMatrix, DVector};

    /// Brute-force normal equations via explicit Gauss-Jordan inversion,
    /// kept independent of the Cholesky path used by `ols`.
    pub fn normal_equations(x: &DMatrix<f64>, y: &DVector<f64>) -> Vec<f64> {
        let k = x.ncols();
        let xtx = x.transpose() * x;
        let xty = x.transpose() * y;
        let mut a = xtx.clone();
        let mut inv = DMatrix::<f64>::identity(k, k);
        for col in 0..k {
            let mut pivot = col;
            for r in col + 1..k {
                if a[(r, col)].abs() > a[(pivot, col)].abs() {
                    pivot = r;
                }
            }
            a.swap_rows(col, pivot);
            inv.swap_rows(col, pivot);
            let p = a[(col, col)];
            assert!(p.abs() > 1e-12, "oracle pivot underflow");
            for c in 0..k {
                a[(col, c)] /= p;
                inv[(col, c)] /= p;
            }
            for r in 0..k {
                if r != col {
                    let f = a[(r, col)];
                    for c in 0..k {
                        a[(r, c)] -= f * a[(col, c)];
                        inv[(r, c)] -= f * inv[(col, c)];
                    }
                }
            }
        }
        let beta = inv * xty;
        beta.iter().copied().collect()
    }
}
