//! Forecast combination: equal-weight averaging plus MCS-screened variants
//! that re-select the member set in real time from a trailing window of
//! realized losses.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::dates::YearMonth;
use crate::error::{Error, Result};
use crate::evaluation::{mcs_procedure, LossMatrix, McsConfig};
use crate::models::ForecastRecord;
use crate::vintage::Metal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolVariant {
    /// Equal-weight average of every model available at the origin.
    All,
    /// Average of the MCS surviving set at `alpha`.
    Ssm,
    /// Average of the two best models by MCS p-value.
    Top2,
}

impl PoolVariant {
    /// Model id of the pooled stream in the forecast table.
    pub fn model_id(self, alpha: f64) -> String {
        match self {
            PoolVariant::All => "pool_all".to_string(),
            PoolVariant::Ssm => format!("pool_ssm{:.0}", alpha * 100.0),
            PoolVariant::Top2 => "pool_top2".to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoolingSpec {
    /// Origins pooled with the plain average before screening starts.
    pub warmup: usize,
    /// Trailing realized origins fed to the MCS screen.
    pub screen_window: usize,
    /// MCS confidence level for the surviving set.
    pub alpha: f64,
    pub variant: PoolVariant,
    /// Bootstrap settings for the screen (replications, block, seed).
    pub mcs: McsConfig,
}

impl PoolingSpec {
    pub fn new(variant: PoolVariant, seed: u64) -> Self {
        PoolingSpec {
            warmup: 12,
            screen_window: 12,
            alpha: 0.25,
            variant,
            mcs: McsConfig {
                replications: 500,
                block: 6,
                alphas: vec![0.25],
                seed,
                statistic: Default::default(),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.warmup < self.screen_window {
            return Err(Error::Config(format!(
                "warmup ({}) must be >= screen_window ({})",
                self.warmup, self.screen_window
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha {} outside (0,1)", self.alpha)));
        }
        if self.screen_window < 2 * self.mcs.block {
            return Err(Error::Config(format!(
                "screen_window ({}) must be >= 2*block ({})",
                self.screen_window,
                2 * self.mcs.block
            )));
        }
        Ok(())
    }
}

/// Arithmetic mean of the member forecasts at one (origin, horizon).
pub fn pool_average(forecasts: &[f64]) -> Result<f64> {
    if forecasts.is_empty() {
        return Err(Error::Degenerate("no forecasts to pool".into()));
    }
    Ok(forecasts.iter().sum::<f64>() / forecasts.len() as f64)
}

/// One pooled cell plus the member set that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PooledForecast {
    pub record: ForecastRecord,
    pub members: Vec<String>,
    /// Set when Top2 fell back to the SSM average (fewer than two models
    /// available) or when screening had too little realized history and the
    /// plain average was used instead.
    pub fallback: bool,
}

struct HorizonStream<'a> {
    metal: Metal,
    horizon: usize,
    /// origin -> (model -> record)
    by_origin: BTreeMap<YearMonth, BTreeMap<&'a str, &'a ForecastRecord>>,
}

/// Pools one variant across all (metal, horizon) streams in `records`.
/// Sequential over origins within a stream (the screen is a rolling state),
/// parallel across streams.
pub fn pool_mcs(records: &[ForecastRecord], spec: &PoolingSpec) -> Result<Vec<PooledForecast>> {
    spec.validate()?;
    let mut streams: BTreeMap<(Metal, usize), HorizonStream> = BTreeMap::new();
    for r in records {
        let stream = streams
            .entry((r.metal, r.horizon))
            .or_insert_with(|| HorizonStream {
                metal: r.metal,
                horizon: r.horizon,
                by_origin: BTreeMap::new(),
            });
        stream
            .by_origin
            .entry(r.origin)
            .or_default()
            .insert(r.model.as_str(), r);
    }
    let streams: Vec<HorizonStream> = streams.into_values().collect();
    let pooled: Vec<Result<Vec<PooledForecast>>> = streams
        .par_iter()
        .map(|s| pool_stream(s, spec))
        .collect();
    let mut out = Vec::new();
    for p in pooled {
        out.extend(p?);
    }
    Ok(out)
}

fn pool_stream(stream: &HorizonStream, spec: &PoolingSpec) -> Result<Vec<PooledForecast>> {
    let origins: Vec<YearMonth> = stream.by_origin.keys().copied().collect();
    let h = stream.horizon;
    let model_id = spec.variant.model_id(spec.alpha);
    let mut out = Vec::with_capacity(origins.len());

    for (idx, &origin) in origins.iter().enumerate() {
        let at_origin = &stream.by_origin[&origin];
        if at_origin.is_empty() {
            continue;
        }
        let realized = at_origin.values().find_map(|r| r.realized);

        let mut fallback = false;
        let members: Vec<String> = if spec.variant == PoolVariant::All || idx < spec.warmup {
            at_origin.keys().map(|s| s.to_string()).collect()
        } else {
            // trailing screen: most recent `screen_window` origins whose
            // horizon-h realizations are already observed at `origin`
            let cutoff = origin.add_months(-(h as i32));
            let mut screen: Vec<YearMonth> = origins[..idx]
                .iter()
                .rev()
                .filter(|&&o| o <= cutoff)
                .take(spec.screen_window)
                .copied()
                .collect();
            screen.reverse();
            if screen.len() < spec.screen_window {
                // too little realized history at this horizon: extend the
                // plain-average warmup rather than screen on a short window
                fallback = true;
                at_origin.keys().map(|s| s.to_string()).collect()
            } else {
                // screenable models have realized losses across the whole
                // screen window and a forecast at the current origin
                let mut universe: Vec<&str> = at_origin.keys().copied().collect();
                universe.retain(|m| {
                    screen.iter().all(|o| {
                        stream.by_origin[o]
                            .get(m)
                            .is_some_and(|r| r.realized.is_some())
                    })
                });
                if universe.len() < 2 {
                    fallback = true;
                    at_origin.keys().map(|s| s.to_string()).collect()
                } else {
                    let rows: Vec<Vec<f64>> = screen
                        .iter()
                        .map(|o| {
                            universe
                                .iter()
                                .map(|m| {
                                    let r = stream.by_origin[o][m];
                                    let e = r.level - r.realized.expect("screened");
                                    e * e
                                })
                                .collect()
                        })
                        .collect();
                    let losses = LossMatrix::new(
                        h,
                        screen.clone(),
                        universe.iter().map(|s| s.to_string()).collect(),
                        rows,
                    )?;
                    let cfg = McsConfig {
                        alphas: vec![spec.alpha],
                        ..spec.mcs.clone()
                    };
                    let mcs = mcs_procedure(&losses, &cfg)?;
                    match spec.variant {
                        PoolVariant::Ssm => mcs
                            .ssm_at(spec.alpha)
                            .map(<[String]>::to_vec)
                            .unwrap_or_default(),
                        PoolVariant::Top2 => {
                            // tie-breaks: lower trailing RMSPE, then id
                            let mut ranked: Vec<(f64, f64, String)> = universe
                                .iter()
                                .enumerate()
                                .map(|(j, m)| {
                                    let rmspe = (losses.column(j).iter().sum::<f64>()
                                        / screen.len() as f64)
                                        .sqrt();
                                    (mcs.p_values[j], rmspe, m.to_string())
                                })
                                .collect();
                            ranked.sort_by(|a, b| {
                                b.0.total_cmp(&a.0)
                                    .then(a.1.total_cmp(&b.1))
                                    .then(a.2.cmp(&b.2))
                            });
                            ranked.into_iter().take(2).map(|(_, _, m)| m).collect()
                        }
                        PoolVariant::All => unreachable!("handled above"),
                    }
                }
            }
        };

        let values: Vec<f64> = members
            .iter()
            .filter_map(|m| at_origin.get(m.as_str()).map(|r| r.level))
            .collect();
        if values.is_empty() {
            continue;
        }
        let level = pool_average(&values)?;
        out.push(PooledForecast {
            record: ForecastRecord {
                metal: stream.metal,
                model: model_id.clone(),
                origin,
                horizon: h,
                growth: None,
                level,
                realized,
            },
            members,
            fallback,
        });
    }
    Ok(out)
}
