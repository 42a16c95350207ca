//! Diebold-Mariano test of equal predictive accuracy.
//!
//! The statistic is the mean loss differential studentized by a Bartlett/HAC
//! long-run variance with truncation lag h-1 (h-step-ahead errors overlap at
//! most h-1 periods). Stars come from two-sided standard-normal critical
//! values. The small-sample correction of Harvey, Leybourne and Newbold is
//! available behind [`DmVariance::HacSmallSample`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::mean;

/// Two-sided significance reached against N(0,1) critical values
/// 1.645 / 1.960 / 2.576.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Significance {
    None,
    Ten,
    Five,
    One,
}

impl Significance {
    pub fn from_statistic(stat: f64) -> Self {
        let a = stat.abs();
        if a > 2.576 {
            Significance::One
        } else if a > 1.960 {
            Significance::Five
        } else if a > 1.645 {
            Significance::Ten
        } else {
            Significance::None
        }
    }

    pub fn stars(self) -> &'static str {
        match self {
            Significance::None => "",
            Significance::Ten => "*",
            Significance::Five => "**",
            Significance::One => "***",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DmVariance {
    /// Bartlett-kernel HAC long-run variance, truncation lag h-1.
    #[default]
    Hac,
    /// HAC plus the Harvey-Leybourne-Newbold finite-sample adjustment.
    HacSmallSample,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DmResult {
    pub statistic: f64,
    pub significance: Significance,
    pub nobs: usize,
    /// HAC truncation lag actually used.
    pub truncation: usize,
    /// Set when the HAC estimate was non-positive and the naive variance
    /// was used instead.
    pub naive_fallback: bool,
}

const MIN_OBS: usize = 8;

/// Tests equal accuracy of two aligned loss series at forecast horizon `h`.
/// Positive statistics mean `loss_a` is larger (model A worse).
pub fn dm_test(loss_a: &[f64], loss_b: &[f64], h: usize) -> Result<DmResult> {
    dm_test_with(loss_a, loss_b, h, DmVariance::Hac)
}

pub fn dm_test_with(
    loss_a: &[f64],
    loss_b: &[f64],
    h: usize,
    variance: DmVariance,
) -> Result<DmResult> {
    if loss_a.len() != loss_b.len() {
        return Err(Error::Config(format!(
            "loss series lengths differ: {} vs {}",
            loss_a.len(),
            loss_b.len()
        )));
    }
    let t = loss_a.len();
    if t < MIN_OBS {
        return Err(Error::InsufficientData { needed: MIN_OBS, got: t });
    }
    if h == 0 {
        return Err(Error::Config("horizon must be >= 1".into()));
    }
    let d: Vec<f64> = loss_a.iter().zip(loss_b).map(|(a, b)| a - b).collect();
    if d.iter().all(|&x| x == 0.0) {
        return Err(Error::Degenerate(
            "identical loss series: DM statistic undefined".into(),
        ));
    }
    let dbar = mean(&d);
    let centered: Vec<f64> = d.iter().map(|x| x - dbar).collect();
    let tf = t as f64;
    let autocov = |k: usize| -> f64 {
        (k..t).map(|i| centered[i] * centered[i - k]).sum::<f64>() / tf
    };
    let truncation = (h - 1).min(t - 1);
    let gamma0 = autocov(0);
    let mut lrv = gamma0;
    for k in 1..=truncation {
        let w = 1.0 - k as f64 / h as f64; // Bartlett weight with lag window h-1
        lrv += 2.0 * w * autocov(k);
    }
    let mut naive_fallback = false;
    if lrv <= 0.0 {
        lrv = gamma0;
        naive_fallback = true;
    }
    let mut statistic = if lrv > 0.0 {
        dbar / (lrv / tf).sqrt()
    } else {
        // constant non-zero differential: infinitely significant
        f64::INFINITY.copysign(dbar)
    };
    if variance == DmVariance::HacSmallSample {
        let hf = h as f64;
        let adj = ((tf + 1.0 - 2.0 * hf + hf * (hf - 1.0) / tf) / tf).max(0.0).sqrt();
        statistic *= adj;
    }
    Ok(DmResult {
        statistic,
        significance: Significance::from_statistic(statistic),
        nobs: t,
        truncation,
        naive_fallback,
    })
}
