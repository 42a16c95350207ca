//! Ragged-edge nowcasting: fills missing trailing observations of each
//! vintage with model-based estimates and runs the six-model horse race
//! that compares candidate gap fillers out of sample.

pub mod ar;
pub mod bayes;

pub use ar::{ar_ols_fit, rwd_forecast, select_lag_aic, ArFit};
pub use bayes::{
    bar_posterior, bar_sv_posterior, bar_svo_posterior, BarPriors, BayesForecast, HorizonStat,
    McmcConfig,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::dates::YearMonth;
use crate::error::{Error, Result};
use crate::evaluation::{dm_test, Significance};
use crate::series::MonthlySeries;
use crate::vintage::{merge_first_release, RealTimePanel, SeriesMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NowcastFamily {
    Rwd,
    Ar,
    ArAic,
    Bar,
    BarSv,
    BarSvo,
}

impl NowcastFamily {
    pub fn is_bayesian(self) -> bool {
        matches!(self, NowcastFamily::Bar | NowcastFamily::BarSv | NowcastFamily::BarSvo)
    }

    /// Display name used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            NowcastFamily::Rwd => "RW-D",
            NowcastFamily::Ar => "AR(1)",
            NowcastFamily::ArAic => "AR(AIC)",
            NowcastFamily::Bar => "BAR(1)",
            NowcastFamily::BarSv => "BAR(1)-SV",
            NowcastFamily::BarSvo => "BAR(1)-SVo",
        }
    }
}

impl FromStr for NowcastFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rwd" | "rw-d" => Ok(NowcastFamily::Rwd),
            "ar" | "ar1" | "ar(1)" => Ok(NowcastFamily::Ar),
            "araic" | "ar-aic" | "ar(aic)" => Ok(NowcastFamily::ArAic),
            "bar" | "bar(1)" => Ok(NowcastFamily::Bar),
            "barsv" | "bar-sv" | "bar(1)-sv" => Ok(NowcastFamily::BarSv),
            "barsvo" | "bar-svo" | "bar(1)-svo" => Ok(NowcastFamily::BarSvo),
            other => Err(Error::Config(format!("unknown nowcast family '{other}'"))),
        }
    }
}

impl fmt::Display for NowcastFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Declarative description of one nowcasting model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NowcastModelSpec {
    pub family: NowcastFamily,
    /// AIC search bound; only read by the AR(AIC) family.
    pub max_lag: usize,
    /// MCMC settings; only read by the Bayesian families.
    pub mcmc: McmcConfig,
}

impl NowcastModelSpec {
    pub fn new(family: NowcastFamily, seed: u64) -> Self {
        NowcastModelSpec {
            family,
            max_lag: 6,
            mcmc: McmcConfig::new(seed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_lag == 0 {
            return Err(Error::Config("max_lag must be >= 1".into()));
        }
        self.mcmc.validate()
    }

    /// Point forecasts for horizons 1..=h, in the original units of
    /// `history`. `variable` and `vintage` key the private RNG stream of the
    /// Bayesian samplers so parallel scheduling cannot change results.
    pub fn forecast(
        &self,
        history: &[f64],
        h: usize,
        variable: &str,
        vintage: YearMonth,
    ) -> Result<Vec<f64>> {
        self.validate()?;
        match self.family {
            NowcastFamily::Rwd => (1..=h).map(|k| ar::rwd_forecast(history, k)).collect(),
            NowcastFamily::Ar => {
                let fit = ar::ar_ols_fit(history, 1)?;
                Ok(fit.iterate_forecast(history, h))
            }
            NowcastFamily::ArAic => {
                let p = ar::select_lag_aic(history, self.max_lag)?;
                let fit = ar::ar_ols_fit(history, p)?;
                Ok(fit.iterate_forecast(history, h))
            }
            NowcastFamily::Bar | NowcastFamily::BarSv | NowcastFamily::BarSvo => {
                let mut rng = bayes::sampler_rng(
                    self.mcmc.seed,
                    self.family.label(),
                    variable,
                    &vintage.to_string(),
                );
                let priors = BarPriors::default();
                let post = match self.family {
                    NowcastFamily::Bar => {
                        bar_posterior(history, &self.mcmc, &priors, h, &mut rng)?
                    }
                    NowcastFamily::BarSv => {
                        bar_sv_posterior(history, &self.mcmc, &priors, h, &mut rng)?
                    }
                    _ => bar_svo_posterior(history, &self.mcmc, &priors, h, &mut rng)?,
                };
                Ok(post.horizons.iter().map(|s| s.mean).collect())
            }
        }
    }
}

/// One variable inside a completed snapshot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotSeries {
    pub meta: SeriesMeta,
    /// Observed history with nowcast-filled tail, running through the
    /// snapshot date.
    pub values: MonthlySeries,
    /// Last genuinely observed month; later values are nowcasts.
    pub observed_through: YearMonth,
}

/// A vintage snapshot with every variable completed through `as_of`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub as_of: YearMonth,
    pub series: Vec<SnapshotSeries>,
}

impl Snapshot {
    pub fn series_of(&self, id: &str) -> Option<&SnapshotSeries> {
        self.series.iter().find(|s| s.meta.id == id)
    }
}

/// Completes the panel at `as_of`: each variable's missing trailing months
/// are replaced by forecasts from `model`, estimated on the last
/// `window`-many observations of its vintage (full history when `None`).
/// Observed values are never altered.
pub fn fill_missing_tail(
    panel: &RealTimePanel,
    as_of: YearMonth,
    model: &NowcastModelSpec,
    window: Option<usize>,
) -> Result<Snapshot> {
    let (first, last) = panel.span();
    if as_of < first || as_of > last {
        return Err(Error::Config(format!(
            "as_of {as_of} outside panel span [{first}, {last}]"
        )));
    }
    let series = panel
        .variables()
        .iter()
        .map(|var| {
            let vintage = var
                .vintage_at(as_of)
                .ok_or_else(|| Error::MissingVariable(var.meta.id.clone()))?;
            let missing = vintage.missing_tail(as_of) as usize;
            let mut values = vintage.values.clone();
            if missing > 0 {
                let est = match window {
                    Some(w) => vintage.values.tail(w),
                    None => vintage.values.values(),
                };
                let forecasts = model
                    .forecast(est, missing, &var.meta.id, as_of)
                    .map_err(|e| e.context(&var.meta.id))?;
                for f in forecasts {
                    values.push(f);
                }
            }
            Ok(SnapshotSeries {
                meta: var.meta.clone(),
                values,
                observed_through: vintage.values.end(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Snapshot { as_of, series })
}

/// Rolling-window settings for the horse race.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct HorseRaceWindow {
    /// Estimation window length in months; full vintage history when `None`.
    pub estimation: Option<usize>,
    /// Restrict evaluated vintages to `[first, last]` when set.
    pub first: Option<YearMonth>,
    pub last: Option<YearMonth>,
}

/// Minimum number of evaluation vintages required per variable.
pub const MIN_EVAL_VINTAGES: usize = 24;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NowcastCell {
    pub model: String,
    /// RMSFE(model) / RMSFE(baseline).
    pub ratio: f64,
    pub significance: Significance,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NowcastRow {
    pub horizon: usize,
    /// Raw RMSFE of the baseline model in original units.
    pub baseline_rmsfe: f64,
    /// Number of evaluated vintages.
    pub n: usize,
    pub cells: Vec<NowcastCell>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NowcastVariableBlock {
    pub id: String,
    pub rows: Vec<NowcastRow>,
}

/// Horse-race report: per (variable, horizon, model) the RMSFE ratio to the
/// baseline, with the baseline's raw RMSFE per row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NowcastReport {
    pub baseline: String,
    pub models: Vec<String>,
    pub variables: Vec<NowcastVariableBlock>,
}

impl NowcastReport {
    /// CSV with one row per (variable, horizon): baseline RMSFE, then
    /// star-annotated ratio strings per model.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("variable,horizon,n");
        out.push_str(&format!(",{}", self.baseline));
        for m in &self.models {
            out.push_str(&format!(",{m}"));
        }
        out.push('\n');
        for block in &self.variables {
            for row in &block.rows {
                out.push_str(&format!(
                    "{},{},{},{:.6}",
                    block.id, row.horizon, row.n, row.baseline_rmsfe
                ));
                for cell in &row.cells {
                    out.push_str(&format!(
                        ",{:.4}{}",
                        cell.ratio,
                        cell.significance.stars()
                    ));
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Runs the nowcasting horse race: every model re-estimated on each vintage,
/// forecasting the 1..lag missing months, scored against later-published
/// first-release values. The first model must be the RW-D baseline.
pub fn nowcast_horse_race(
    panel: &RealTimePanel,
    models: &[NowcastModelSpec],
    window: &HorseRaceWindow,
) -> Result<NowcastReport> {
    if models.is_empty() {
        return Err(Error::Config("no nowcast models configured".into()));
    }
    if models[0].family != NowcastFamily::Rwd {
        return Err(Error::Config(
            "the first horse-race model must be the RW-D baseline".into(),
        ));
    }
    let model_names: Vec<String> = models.iter().map(|m| m.family.label().to_string()).collect();

    let blocks: Vec<Result<Option<NowcastVariableBlock>>> = panel
        .variables()
        .par_iter()
        .map(|var| {
            let lag = var.meta.publication_lag as usize;
            if lag == 0 {
                return Ok(None);
            }
            let truth = merge_first_release(&var.vintages).map_err(|e| e.context(&var.meta.id))?;

            // vintages whose 1-step truth is already published
            let usable: Vec<_> = var
                .vintages
                .iter()
                .filter(|v| window.first.is_none_or(|f| v.as_of >= f))
                .filter(|v| window.last.is_none_or(|l| v.as_of <= l))
                .filter(|v| truth.get(v.values.end().next()).is_some())
                .collect();
            if usable.len() < MIN_EVAL_VINTAGES {
                return Err(Error::InsufficientData {
                    needed: MIN_EVAL_VINTAGES,
                    got: usable.len(),
                });
            }

            // forecast errors per (model, horizon, vintage)
            let mut errors: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); lag]; models.len()];
            for vintage in &usable {
                let est = match window.estimation {
                    Some(w) => vintage.values.tail(w),
                    None => vintage.values.values(),
                };
                let horizon_truth: Vec<Option<f64>> = (1..=lag)
                    .map(|h| truth.get(vintage.values.end().add_months(h as i32)))
                    .collect();
                for (mi, model) in models.iter().enumerate() {
                    let fc = model
                        .forecast(est, lag, &var.meta.id, vintage.as_of)
                        .map_err(|e| e.context(&var.meta.id))?;
                    for h in 1..=lag {
                        if let Some(actual) = horizon_truth[h - 1] {
                            errors[mi][h - 1].push(fc[h - 1] - actual);
                        }
                        // no realized truth yet: cell omitted
                    }
                }
            }

            let mut rows = Vec::with_capacity(lag);
            for h in 1..=lag {
                let base_err = &errors[0][h - 1];
                if base_err.is_empty() {
                    continue;
                }
                let base_rmsfe = crate::evaluation::rmsfe(base_err)?;
                let base_losses: Vec<f64> = base_err.iter().map(|e| e * e).collect();
                let mut cells = Vec::with_capacity(models.len().saturating_sub(1));
                for mi in 1..models.len() {
                    let errs = &errors[mi][h - 1];
                    let rmsfe_m = crate::evaluation::rmsfe(errs)?;
                    let losses: Vec<f64> = errs.iter().map(|e| e * e).collect();
                    let significance = match dm_test(&losses, &base_losses, h) {
                        Ok(d) => d.significance,
                        Err(Error::Degenerate(_)) => Significance::None,
                        Err(e) => return Err(e.context(&var.meta.id)),
                    };
                    cells.push(NowcastCell {
                        model: model_names[mi].clone(),
                        ratio: rmsfe_m / base_rmsfe,
                        significance,
                    });
                }
                rows.push(NowcastRow {
                    horizon: h,
                    baseline_rmsfe: base_rmsfe,
                    n: base_err.len(),
                    cells,
                });
            }
            Ok(Some(NowcastVariableBlock {
                id: var.meta.id.clone(),
                rows,
            }))
        })
        .collect();

    let mut variables = Vec::new();
    for b in blocks {
        if let Some(block) = b? {
            variables.push(block);
        }
    }
    Ok(NowcastReport {
        baseline: model_names[0].clone(),
        models: model_names[1..].to_vec(),
        variables,
    })
}
