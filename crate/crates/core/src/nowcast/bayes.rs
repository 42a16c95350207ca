//! Bayesian AR(1) nowcasting models: constant volatility, stochastic
//! volatility, and stochastic volatility with outliers.
//!
//! All three are Gibbs samplers over the regression y_t = c + phi y_{t-1} + e_t.
//! Volatility variants model ln Var(e_t) as a Gaussian random walk, sampled
//! with the standard 7-component Gaussian-mixture approximation to log-chi^2(1)
//! and forward-filter backward-sampling. The outlier variant scales each
//! innovation by a discrete per-observation factor o_t in {1,...,10}.
//!
//! Samplers are pure functions of (data, config, seed): a fixed seed yields
//! bit-identical output.

use nalgebra::{Cholesky, Matrix2, Vector2};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::derive_rng;
use crate::stats::variance;

/// MCMC run length and seed. The seed is mandatory in run configs whenever a
/// Bayesian family is enabled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub draws: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl McmcConfig {
    pub fn new(seed: u64) -> Self {
        McmcConfig { draws: 2000, burn_in: 1000, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.draws == 0 {
            return Err(Error::Config("mcmc draws must be positive".into()));
        }
        Ok(())
    }
}

/// Prior settings. Defaults: coefficients N(0, 10 I); innovation variance
/// IG(3, 2 * sample variance of the differenced data); log-volatility
/// innovation variance IG(3, 0.05).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarPriors {
    pub coef_var: f64,
    pub sigma_shape: f64,
    /// Multiplier on the sample variance of the differenced data.
    pub sigma_scale_mult: f64,
    pub logvol_shape: f64,
    pub logvol_scale: f64,
}

impl Default for BarPriors {
    fn default() -> Self {
        BarPriors {
            coef_var: 10.0,
            sigma_shape: 3.0,
            sigma_scale_mult: 2.0,
            logvol_shape: 3.0,
            logvol_scale: 0.05,
        }
    }
}

/// Posterior summary for one forecast horizon.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HorizonStat {
    /// Posterior predictive mean.
    pub mean: f64,
    /// Posterior standard deviation of the conditional mean across draws.
    pub sd: f64,
}

/// Output of a Bayesian nowcast run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BayesForecast {
    /// Index 0 is horizon 1.
    pub horizons: Vec<HorizonStat>,
    /// Posterior mean and sd of (intercept, slope).
    pub coef_mean: [f64; 2],
    pub coef_sd: [f64; 2],
    /// Posterior mean log-volatility per regression observation
    /// (volatility families only).
    pub logvol_mean: Option<Vec<f64>>,
    /// Posterior probability that each observation is an outlier
    /// (outlier family only).
    pub outlier_prob: Option<Vec<f64>>,
}

const MIN_HISTORY: usize = 12;

/// 7-component Gaussian mixture approximation to ln chi^2(1)
/// (mixture mean -1.2704, matching E[ln z^2] for z ~ N(0,1)).
const MIX_PROB: [f64; 7] = [0.00730, 0.10556, 0.00002, 0.04395, 0.34001, 0.24566, 0.25750];
const MIX_MEAN: [f64; 7] =
    [-11.40039, -5.24321, -9.83726, 1.50746, -0.65098, 0.52478, -2.35859];
const MIX_VAR: [f64; 7] = [5.79596, 2.61369, 5.17950, 0.16735, 0.64009, 0.34023, 1.26261];

const MAX_OUTLIER_SCALE: usize = 10;
const OUTLIER_PRIOR_NONE: f64 = 0.99;

enum Volatility {
    Constant,
    Stochastic { outliers: bool },
}

fn draw_std_normal(rng: &mut ChaCha12Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// sigma^2 ~ InvGamma(shape, scale): scale / Gamma(shape, 1).
fn draw_inv_gamma(rng: &mut ChaCha12Rng, shape: f64, scale: f64) -> Result<f64> {
    let g = Gamma::new(shape, 1.0)
        .map_err(|e| Error::Numerical(format!("gamma sampler: {e}")))?;
    let draw: f64 = g.sample(rng);
    let v = scale / draw;
    if !v.is_finite() || v <= 0.0 {
        return Err(Error::Numerical(
            "non-convergent variance draw (numerical underflow)".into(),
        ));
    }
    Ok(v)
}

/// Draws (c, phi) from its conditional posterior given per-observation
/// precisions `weights`, with N(0, coef_var I) prior.
fn draw_coefficients(
    rng: &mut ChaCha12Rng,
    targets: &[f64],
    lags: &[f64],
    weights: &[f64],
    coef_var: f64,
) -> Result<Vector2<f64>> {
    let prior_prec = 1.0 / coef_var;
    let mut p00 = prior_prec;
    let mut p01 = 0.0;
    let mut p11 = prior_prec;
    let mut b0 = 0.0;
    let mut b1 = 0.0;
    for i in 0..targets.len() {
        let w = weights[i];
        let x = lags[i];
        p00 += w;
        p01 += w * x;
        p11 += w * x * x;
        b0 += w * targets[i];
        b1 += w * x * targets[i];
    }
    let prec = Matrix2::new(p00, p01, p01, p11);
    let chol = Cholesky::new(prec)
        .ok_or_else(|| Error::Numerical("posterior precision not positive definite".into()))?;
    let mean = chol.solve(&Vector2::new(b0, b1));
    // beta = mean + L^{-T} z gives covariance (L L^T)^{-1} = prec^{-1}
    let z = Vector2::new(draw_std_normal(rng), draw_std_normal(rng));
    let l = chol.l();
    let shock = l.transpose().solve_upper_triangular(&z).ok_or_else(|| {
        Error::Numerical("posterior precision factor not invertible".into())
    })?;
    let beta = mean + shock;
    if !beta.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical("non-finite coefficient draw".into()));
    }
    Ok(beta)
}

/// Forward-filter backward-sample for the random-walk log-volatility state.
fn sample_logvol_path(
    rng: &mut ChaCha12Rng,
    obs: &[f64],
    obs_var: &[f64],
    sigma_eta2: f64,
    init_mean: f64,
    init_var: f64,
    path: &mut Vec<f64>,
) {
    let t_eff = obs.len();
    let mut filt_mean = vec![0.0; t_eff];
    let mut filt_var = vec![0.0; t_eff];
    let mut pred_mean = init_mean;
    let mut pred_var = init_var;
    for t in 0..t_eff {
        let gain = pred_var / (pred_var + obs_var[t]);
        filt_mean[t] = pred_mean + gain * (obs[t] - pred_mean);
        filt_var[t] = (1.0 - gain) * pred_var;
        pred_mean = filt_mean[t];
        pred_var = filt_var[t] + sigma_eta2;
    }
    path.clear();
    path.resize(t_eff, 0.0);
    path[t_eff - 1] = filt_mean[t_eff - 1] + filt_var[t_eff - 1].sqrt() * draw_std_normal(rng);
    for t in (0..t_eff - 1).rev() {
        let denom = filt_var[t] + sigma_eta2;
        let m = filt_mean[t] + filt_var[t] / denom * (path[t + 1] - filt_mean[t]);
        let v = filt_var[t] * sigma_eta2 / denom;
        path[t] = m + v.sqrt() * draw_std_normal(rng);
    }
}

fn sample_categorical(rng: &mut ChaCha12Rng, log_weights: &[f64]) -> usize {
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut cum = 0.0;
    let weights: Vec<f64> = log_weights
        .iter()
        .map(|&lw| {
            cum += (lw - max).exp();
            cum
        })
        .collect();
    let u: f64 = rng.gen_range(0.0..cum);
    weights.iter().position(|&c| u < c).unwrap_or(log_weights.len() - 1)
}

fn run_gibbs(
    history: &[f64],
    mcmc: &McmcConfig,
    priors: &BarPriors,
    horizons: usize,
    vol: Volatility,
    rng: &mut ChaCha12Rng,
) -> Result<BayesForecast> {
    mcmc.validate()?;
    if history.len() < MIN_HISTORY {
        return Err(Error::InsufficientData { needed: MIN_HISTORY, got: history.len() });
    }
    let t_eff = history.len() - 1;
    let targets: Vec<f64> = history[1..].to_vec();
    let lags: Vec<f64> = history[..t_eff].to_vec();

    let diffs: Vec<f64> = history.windows(2).map(|w| w[1] - w[0]).collect();
    let var_diff = variance(&diffs);
    let scale = 1.0 + history.iter().map(|v| v * v).sum::<f64>() / history.len() as f64;
    // keeps the weighted precision matrix representable when the data are
    // (near-)noiseless
    let sigma_floor = 1e-10 * scale;
    let sigma_b0 = (priors.sigma_scale_mult * var_diff).max(1e-12 * scale);
    let sigma_a0 = priors.sigma_shape;

    let stochastic = matches!(vol, Volatility::Stochastic { .. });
    let with_outliers = matches!(vol, Volatility::Stochastic { outliers: true });

    let mut sigma2 = var_diff.max(sigma_floor);
    let init_logvol = sigma2.ln();
    let mut logvol = vec![init_logvol; t_eff];
    let mut sigma_eta2 = priors.logvol_scale / (priors.logvol_shape - 1.0);
    let mut outlier_scale = vec![1usize; t_eff];
    let mut weights = vec![0.0; t_eff];
    let mut resid = vec![0.0; t_eff];
    let mut ystar = vec![0.0; t_eff];
    let mut obs_var = vec![0.0; t_eff];
    let mut mix = vec![0usize; t_eff];
    let mut path_buf: Vec<f64> = Vec::new();

    let total = mcmc.burn_in + mcmc.draws;
    let mut fc_sum = vec![0.0; horizons];
    let mut fc_sumsq = vec![0.0; horizons];
    let mut coef_sum = [0.0; 2];
    let mut coef_sumsq = [0.0; 2];
    let mut logvol_sum = vec![0.0; t_eff];
    let mut outlier_count = vec![0usize; t_eff];

    let outlier_log_prior: Vec<f64> = (1..=MAX_OUTLIER_SCALE)
        .map(|o| {
            if o == 1 {
                OUTLIER_PRIOR_NONE.ln()
            } else {
                ((1.0 - OUTLIER_PRIOR_NONE) / (MAX_OUTLIER_SCALE - 1) as f64).ln()
            }
        })
        .collect();

    for sweep in 0..total {
        // (a) coefficients given volatilities
        for t in 0..t_eff {
            let v = if stochastic {
                let o = outlier_scale[t] as f64;
                (logvol[t].clamp(-300.0, 300.0)).exp() * o * o
            } else {
                sigma2
            };
            weights[t] = 1.0 / v.max(f64::MIN_POSITIVE);
        }
        let beta = draw_coefficients(rng, &targets, &lags, &weights, priors.coef_var)?;
        let (c, phi) = (beta[0], beta[1]);
        for t in 0..t_eff {
            resid[t] = targets[t] - c - phi * lags[t];
        }

        if stochastic {
            let mse = resid.iter().map(|e| e * e).sum::<f64>() / t_eff as f64;
            let offset = 1e-6 * (mse + 1e-300);

            if with_outliers {
                // (b') per-observation outlier scale
                for t in 0..t_eff {
                    let e2 = resid[t] * resid[t];
                    let h = logvol[t].clamp(-300.0, 300.0).exp();
                    let logw: Vec<f64> = (1..=MAX_OUTLIER_SCALE)
                        .map(|o| {
                            let of = o as f64;
                            outlier_log_prior[o - 1] - of.ln() - e2 / (2.0 * of * of * h)
                        })
                        .collect();
                    outlier_scale[t] = sample_categorical(rng, &logw) + 1;
                }
            }

            // (b) mixture indicators and log-volatility path
            for t in 0..t_eff {
                let o = outlier_scale[t] as f64;
                ystar[t] = (resid[t] * resid[t] + offset).ln() - (o * o).ln();
            }
            for t in 0..t_eff {
                let logw: Vec<f64> = (0..7)
                    .map(|j| {
                        let d = ystar[t] - logvol[t] - MIX_MEAN[j];
                        MIX_PROB[j].ln() - 0.5 * MIX_VAR[j].ln() - d * d / (2.0 * MIX_VAR[j])
                    })
                    .collect();
                mix[t] = sample_categorical(rng, &logw);
            }
            let obs: Vec<f64> = (0..t_eff).map(|t| ystar[t] - MIX_MEAN[mix[t]]).collect();
            for t in 0..t_eff {
                obs_var[t] = MIX_VAR[mix[t]];
            }
            sample_logvol_path(rng, &obs, &obs_var, sigma_eta2, init_logvol, 10.0, &mut path_buf);
            logvol.copy_from_slice(&path_buf);

            // (c) volatility-process variance
            let dh2: f64 = logvol.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum();
            sigma_eta2 = draw_inv_gamma(
                rng,
                priors.logvol_shape + (t_eff - 1) as f64 / 2.0,
                priors.logvol_scale + dh2 / 2.0,
            )?;
        } else {
            // (b) innovation variance
            let ssr: f64 = resid.iter().map(|e| e * e).sum();
            sigma2 = draw_inv_gamma(rng, sigma_a0 + t_eff as f64 / 2.0, sigma_b0 + ssr / 2.0)?
                .max(sigma_floor);
        }

        if sweep >= mcmc.burn_in {
            coef_sum[0] += c;
            coef_sum[1] += phi;
            coef_sumsq[0] += c * c;
            coef_sumsq[1] += phi * phi;
            // iterate the conditional-mean recursion; innovations are
            // mean-zero so this is the per-draw predictive mean
            let mut prev = *history.last().expect("non-empty");
            for h in 0..horizons {
                prev = c + phi * prev;
                fc_sum[h] += prev;
                fc_sumsq[h] += prev * prev;
            }
            if stochastic {
                for t in 0..t_eff {
                    logvol_sum[t] += logvol[t];
                }
                if with_outliers {
                    for t in 0..t_eff {
                        if outlier_scale[t] > 1 {
                            outlier_count[t] += 1;
                        }
                    }
                }
            }
        }
    }

    let n = mcmc.draws as f64;
    let stat = |sum: f64, sumsq: f64| {
        let m = sum / n;
        HorizonStat { mean: m, sd: (sumsq / n - m * m).max(0.0).sqrt() }
    };
    let coef = |i: usize| stat(coef_sum[i], coef_sumsq[i]);
    Ok(BayesForecast {
        horizons: (0..horizons).map(|h| stat(fc_sum[h], fc_sumsq[h])).collect(),
        coef_mean: [coef(0).mean, coef(1).mean],
        coef_sd: [coef(0).sd, coef(1).sd],
        logvol_mean: stochastic.then(|| logvol_sum.iter().map(|s| s / n).collect()),
        outlier_prob: with_outliers
            .then(|| outlier_count.iter().map(|&k| k as f64 / n).collect()),
    })
}

/// Bayesian AR(1) with constant volatility. Forecasts horizons 1..=`horizons`.
pub fn bar_posterior(
    history: &[f64],
    mcmc: &McmcConfig,
    priors: &BarPriors,
    horizons: usize,
    rng: &mut ChaCha12Rng,
) -> Result<BayesForecast> {
    run_gibbs(history, mcmc, priors, horizons, Volatility::Constant, rng)
}

/// Bayesian AR(1) with stochastic volatility.
pub fn bar_sv_posterior(
    history: &[f64],
    mcmc: &McmcConfig,
    priors: &BarPriors,
    horizons: usize,
    rng: &mut ChaCha12Rng,
) -> Result<BayesForecast> {
    run_gibbs(
        history,
        mcmc,
        priors,
        horizons,
        Volatility::Stochastic { outliers: false },
        rng,
    )
}

/// Bayesian AR(1) with stochastic volatility and outlier scaling.
pub fn bar_svo_posterior(
    history: &[f64],
    mcmc: &McmcConfig,
    priors: &BarPriors,
    horizons: usize,
    rng: &mut ChaCha12Rng,
) -> Result<BayesForecast> {
    run_gibbs(
        history,
        mcmc,
        priors,
        horizons,
        Volatility::Stochastic { outliers: true },
        rng,
    )
}

/// Derives the sampler stream for a (model, variable, vintage) task.
pub fn sampler_rng(seed: u64, family: &str, variable: &str, vintage: &str) -> ChaCha12Rng {
    derive_rng(seed, &["nowcast", family, variable, vintage])
}
