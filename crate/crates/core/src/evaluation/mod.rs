//! Forecast evaluation: RMSFE/RMSPE, ratio tables with Diebold-Mariano
//! stars, the model confidence set, and cumulative ratio paths.

mod dm;
mod mcs;

pub use dm::{dm_test, dm_test_with, DmResult, DmVariance, Significance};
pub use mcs::{mcs_procedure, McsConfig, McsResult, McsStatistic};

use serde::{Deserialize, Serialize};

use crate::dates::YearMonth;
use crate::error::{Error, Result};

/// Evaluation-period x model matrix of squared prediction errors in level
/// units, for one horizon.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossMatrix {
    horizon: usize,
    dates: Vec<YearMonth>,
    models: Vec<String>,
    /// Row-major: `losses[date][model]`, stored per model for fast columns.
    columns: Vec<Vec<f64>>,
}

impl LossMatrix {
    /// `rows[i][j]` is the squared error of model `j` at `dates[i]`.
    pub fn new(
        horizon: usize,
        dates: Vec<YearMonth>,
        models: Vec<String>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if dates.len() != rows.len() {
            return Err(Error::Config(format!(
                "loss matrix has {} dates but {} rows",
                dates.len(),
                rows.len()
            )));
        }
        {
            let mut names: Vec<&str> = models.iter().map(String::as_str).collect();
            names.sort_unstable();
            names.dedup();
            if names.len() != models.len() {
                return Err(Error::Config("duplicate model ids in loss matrix".into()));
            }
        }
        let mut columns = vec![Vec::with_capacity(dates.len()); models.len()];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != models.len() {
                return Err(Error::Config(format!(
                    "loss row {i} has {} entries for {} models",
                    row.len(),
                    models.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Domain(format!(
                        "invalid squared error {v} for model '{}' at {}",
                        models[j], dates[i]
                    )));
                }
                columns[j].push(v);
            }
        }
        Ok(LossMatrix { horizon, dates, models, columns })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn dates(&self) -> &[YearMonth] {
        &self.dates
    }

    pub fn models(&self) -> &[String] {
        &self.models
    }

    pub fn column(&self, model_index: usize) -> &[f64] {
        &self.columns[model_index]
    }

    pub fn column_of(&self, model: &str) -> Option<&[f64]> {
        self.models
            .iter()
            .position(|m| m == model)
            .map(|j| self.column(j))
    }
}

/// Root mean squared error of a vector of forecast errors.
pub fn rmsfe(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::Degenerate("empty error sample".into()));
    }
    Ok((errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt())
}

fn rmspe_from_losses(losses: &[f64]) -> f64 {
    (losses.iter().sum::<f64>() / losses.len() as f64).sqrt()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatioRow {
    pub model: String,
    pub rmspe: f64,
    /// RMSPE(model) / RMSPE(benchmark).
    pub ratio: f64,
    /// Diebold-Mariano test against the benchmark; absent when the test is
    /// degenerate (identical forecasts).
    pub dm: Option<DmResult>,
}

impl RatioRow {
    pub fn stars(&self) -> &'static str {
        self.dm.map(|d| d.significance.stars()).unwrap_or("")
    }
}

/// Table-row layout of a model comparison at one horizon: the benchmark cell
/// holds the raw RMSPE, every other cell a ratio with significance stars.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatioTable {
    pub horizon: usize,
    pub benchmark: String,
    pub benchmark_rmspe: f64,
    pub rows: Vec<RatioRow>,
}

pub fn ratio_table(losses: &LossMatrix, benchmark: &str) -> Result<RatioTable> {
    ratio_table_with(losses, benchmark, DmVariance::Hac)
}

pub fn ratio_table_with(
    losses: &LossMatrix,
    benchmark: &str,
    variance: DmVariance,
) -> Result<RatioTable> {
    let bench = losses
        .column_of(benchmark)
        .ok_or_else(|| Error::Config(format!("benchmark '{benchmark}' not in loss matrix")))?;
    if bench.is_empty() {
        return Err(Error::Degenerate("empty evaluation period".into()));
    }
    let bench_rmspe = rmspe_from_losses(bench);
    if bench_rmspe == 0.0 {
        return Err(Error::Degenerate("benchmark has zero RMSPE".into()));
    }
    let mut rows = Vec::new();
    for (j, model) in losses.models().iter().enumerate() {
        if model == benchmark {
            continue;
        }
        let col = losses.column(j);
        let rmspe = rmspe_from_losses(col);
        let dm = match dm_test_with(col, bench, losses.horizon(), variance) {
            Ok(d) => Some(d),
            Err(Error::Degenerate(_)) => None,
            Err(e) => return Err(e.context(model)),
        };
        rows.push(RatioRow {
            model: model.clone(),
            rmspe,
            ratio: rmspe / bench_rmspe,
            dm,
        });
    }
    Ok(RatioTable {
        horizon: losses.horizon(),
        benchmark: benchmark.to_string(),
        benchmark_rmspe: bench_rmspe,
        rows,
    })
}

/// One model's cumulative RMSPE ratio over time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CumulativePath {
    pub model: String,
    pub points: Vec<(YearMonth, f64)>,
}

/// Cumulative RMSPE ratios relative to `benchmark`, skipping the first
/// `skip` evaluation periods so the ratio can stabilize. The final value of
/// each path equals the full-sample ratio.
pub fn cumulative_ratio_path(
    losses: &LossMatrix,
    benchmark: &str,
    skip: usize,
) -> Result<Vec<CumulativePath>> {
    let t = losses.dates().len();
    if skip >= t {
        return Err(Error::Config(format!(
            "skip ({skip}) must be smaller than the evaluation length ({t})"
        )));
    }
    let bench = losses
        .column_of(benchmark)
        .ok_or_else(|| Error::Config(format!("benchmark '{benchmark}' not in loss matrix")))?;
    let mut out = Vec::new();
    for (j, model) in losses.models().iter().enumerate() {
        if model == benchmark {
            continue;
        }
        let col = losses.column(j);
        let mut cum_m = 0.0;
        let mut cum_b = 0.0;
        let mut points = Vec::with_capacity(t - skip);
        for i in 0..t {
            cum_m += col[i];
            cum_b += bench[i];
            if i >= skip {
                // sqrt(mean_m)/sqrt(mean_b); sample sizes cancel
                points.push((losses.dates()[i], (cum_m / cum_b).sqrt()));
            }
        }
        out.push(CumulativePath {
            model: model.clone(),
            points,
        });
    }
    Ok(out)
}
