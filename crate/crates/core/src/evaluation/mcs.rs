//! Model Confidence Set via moving-block bootstrap.
//!
//! Iterative elimination: at each step the equivalence statistic (T_max by
//! default, the range statistic behind a flag) is studentized with
//! moving-block-bootstrap variances and compared with its bootstrap
//! distribution; the model with the largest relative t-statistic is removed
//! and its MCS p-value is the running maximum of the step p-values. The
//! surviving set at level alpha is every model with p-value >= alpha.
//!
//! Bootstrap indices are shared across models within a replication to
//! preserve cross-model dependence, and each replication derives its RNG
//! stream from (seed, T, B, block, replication) alone, so results do not
//! depend on model ordering, scheduling, or worker count.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::LossMatrix;
use crate::error::{Error, Result};
use crate::rng::derive_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McsStatistic {
    #[default]
    TMax,
    TRange,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McsConfig {
    /// Bootstrap replications B.
    pub replications: usize,
    /// Moving-block length.
    pub block: usize,
    /// Confidence levels for surviving-set membership, e.g. [0.10, 0.25].
    pub alphas: Vec<f64>,
    pub seed: u64,
    pub statistic: McsStatistic,
}

impl McsConfig {
    pub fn new(seed: u64) -> Self {
        McsConfig {
            replications: 10_000,
            block: 6,
            alphas: vec![0.10, 0.25],
            seed,
            statistic: McsStatistic::TMax,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McsResult {
    /// Model ids in the input order of the loss matrix.
    pub models: Vec<String>,
    /// MCS p-value per model, aligned with `models`.
    pub p_values: Vec<f64>,
    /// Ids in elimination order; the final entry is the last survivor.
    pub elimination_order: Vec<String>,
    /// Surviving set per alpha, ascending alpha.
    pub ssm: Vec<(f64, Vec<String>)>,
    pub replications: usize,
    pub block: usize,
    pub seed: u64,
}

impl McsResult {
    pub fn p_value(&self, model: &str) -> Option<f64> {
        self.models
            .iter()
            .position(|m| m == model)
            .map(|i| self.p_values[i])
    }

    pub fn ssm_at(&self, alpha: f64) -> Option<&[String]> {
        self.ssm
            .iter()
            .find(|(a, _)| (*a - alpha).abs() < 1e-12)
            .map(|(_, set)| set.as_slice())
    }
}

/// One replication's resampled row indices: overlapping blocks of fixed
/// length concatenated and truncated to T.
fn block_indices(rng: &mut impl Rng, t: usize, block: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(t + block);
    while out.len() < t {
        let start = rng.gen_range(0..=(t - block));
        for k in 0..block {
            out.push((start + k) as u32);
        }
    }
    out.truncate(t);
    out
}

fn studentize(num: f64, se: f64) -> f64 {
    if se > 1e-300 {
        num / se
    } else if num.abs() <= 1e-300 {
        0.0
    } else {
        f64::INFINITY.copysign(num)
    }
}

pub fn mcs_procedure(losses: &LossMatrix, cfg: &McsConfig) -> Result<McsResult> {
    let models = losses.models().to_vec();
    let m_total = models.len();
    if m_total == 0 {
        return Err(Error::Degenerate("loss matrix has no models".into()));
    }
    let t = losses.dates().len();
    let mut alphas = cfg.alphas.clone();
    alphas.sort_by(f64::total_cmp);

    if m_total == 1 {
        return Ok(McsResult {
            models: models.clone(),
            p_values: vec![1.0],
            elimination_order: models.clone(),
            ssm: alphas.iter().map(|&a| (a, models.clone())).collect(),
            replications: cfg.replications,
            block: cfg.block,
            seed: cfg.seed,
        });
    }
    if cfg.block == 0 || t < 2 * cfg.block {
        return Err(Error::Config(format!(
            "need T >= 2*block, got T={t}, block={}",
            cfg.block
        )));
    }
    if cfg.replications == 0 {
        return Err(Error::Config("bootstrap replications must be positive".into()));
    }

    // all computation runs in canonical (name-sorted) model order so that
    // permuting the input columns cannot change any floating-point result
    let mut canon: Vec<usize> = (0..m_total).collect();
    canon.sort_by(|&a, &b| models[a].cmp(&models[b]));

    // Full-sample and bootstrap means per model; everything downstream is a
    // function of these. Index by canonical position.
    let b = cfg.replications;
    let sample_mean: Vec<f64> = canon
        .iter()
        .map(|&j| losses.column(j).iter().sum::<f64>() / t as f64)
        .collect();
    let boot_means: Vec<Vec<f64>> = (0..b)
        .into_par_iter()
        .map(|rep| {
            let mut rng = derive_rng(
                cfg.seed,
                &[
                    "mcs",
                    &format!("T{t}"),
                    &format!("B{b}"),
                    &format!("L{}", cfg.block),
                    &format!("rep{rep}"),
                ],
            );
            let idx = block_indices(&mut rng, t, cfg.block);
            canon
                .iter()
                .map(|&j| {
                    let col = losses.column(j);
                    idx.iter().map(|&i| col[i as usize]).sum::<f64>() / t as f64
                })
                .collect()
        })
        .collect();

    let mut active: Vec<usize> = (0..m_total).collect(); // canonical positions
    let mut p_values = vec![f64::NAN; m_total];
    let mut elimination_order = Vec::with_capacity(m_total);
    let mut running_max = 0.0f64;

    // mean over j != i of pairwise differences; identical columns yield
    // exact zeros, which keeps full-tie cases at p = 1
    fn relative_means(values: &[f64], active: &[usize]) -> Vec<f64> {
        let m = active.len();
        active
            .iter()
            .map(|&i| {
                active
                    .iter()
                    .filter(|&&j| j != i)
                    .map(|&j| values[i] - values[j])
                    .sum::<f64>()
                    / (m - 1) as f64
            })
            .collect()
    }

    while active.len() > 1 {
        let m = active.len();
        // d-bar_i. relative to the current set, with bootstrap variance
        let dbar_dot: Vec<f64> = relative_means(&sample_mean, &active);
        let boot_dot: Vec<Vec<f64>> = boot_means
            .iter()
            .map(|bm| relative_means(bm, &active))
            .collect();
        let se_dot: Vec<f64> = (0..m)
            .map(|i| {
                let v = boot_dot
                    .iter()
                    .map(|bd| {
                        let c = bd[i] - dbar_dot[i];
                        c * c
                    })
                    .sum::<f64>()
                    / b as f64;
                v.sqrt()
            })
            .collect();
        let t_stats: Vec<f64> = (0..m).map(|i| studentize(dbar_dot[i], se_dot[i])).collect();

        let (observed, boot_stats): (f64, Vec<f64>) = match cfg.statistic {
            McsStatistic::TMax => {
                let obs = t_stats.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let bs = boot_dot
                    .iter()
                    .map(|bd| {
                        (0..m)
                            .map(|i| studentize(bd[i] - dbar_dot[i], se_dot[i]))
                            .fold(f64::NEG_INFINITY, f64::max)
                    })
                    .collect();
                (obs, bs)
            }
            McsStatistic::TRange => {
                let mut se_pair = vec![vec![0.0; m]; m];
                for i in 0..m {
                    for j in (i + 1)..m {
                        let d_ij = sample_mean[active[i]] - sample_mean[active[j]];
                        let v = boot_means
                            .iter()
                            .map(|bm| {
                                let c = (bm[active[i]] - bm[active[j]]) - d_ij;
                                c * c
                            })
                            .sum::<f64>()
                            / b as f64;
                        se_pair[i][j] = v.sqrt();
                    }
                }
                let mut obs = f64::NEG_INFINITY;
                for i in 0..m {
                    for j in (i + 1)..m {
                        let d_ij = sample_mean[active[i]] - sample_mean[active[j]];
                        obs = obs.max(studentize(d_ij.abs(), se_pair[i][j]));
                    }
                }
                let bs = boot_means
                    .iter()
                    .map(|bm| {
                        let mut s = f64::NEG_INFINITY;
                        for i in 0..m {
                            for j in (i + 1)..m {
                                let d_ij = sample_mean[active[i]] - sample_mean[active[j]];
                                let c = (bm[active[i]] - bm[active[j]]) - d_ij;
                                s = s.max(studentize(c.abs(), se_pair[i][j]));
                            }
                        }
                        s
                    })
                    .collect();
                (obs, bs)
            }
        };

        let exceed = boot_stats.iter().filter(|&&s| s >= observed).count();
        let p_step = exceed as f64 / b as f64;
        running_max = running_max.max(p_step);

        // eliminate the model with the largest relative t-statistic
        let worst = t_stats
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("non-empty active set");
        let victim = active.remove(worst);
        p_values[canon[victim]] = running_max;
        elimination_order.push(models[canon[victim]].clone());
    }
    let survivor = active[0];
    p_values[canon[survivor]] = 1.0;
    elimination_order.push(models[canon[survivor]].clone());

    let ssm = alphas
        .iter()
        .map(|&a| {
            let set: Vec<String> = (0..m_total)
                .filter(|&i| p_values[i] >= a)
                .map(|i| models[i].clone())
                .collect();
            (a, set)
        })
        .collect();

    Ok(McsResult {
        models,
        p_values,
        elimination_order,
        ssm,
        replications: cfg.replications,
        block: cfg.block,
        seed: cfg.seed,
    })
}
