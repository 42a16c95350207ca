//! Backtest orchestration: rolls the information set forward one vintage at
//! a time, nowcast-fills, fits every model, reconstructs level forecasts,
//! and evaluates the whole table with ratio/DM/MCS/pooling reports.
//!
//! Determinism contract: with a fixed seed the run is bit-identical across
//! repetitions and worker counts. Every stochastic task derives its RNG
//! stream from (seed, task identity); parallel fan-outs collect in input
//! order.

pub mod config;
mod emit;

pub use config::{BacktestConfig, Overrides, PoolingSettings, DEFAULT_WINDOW};
pub use emit::{emit_report, read_forecast_csv};

use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;

use crate::dates::YearMonth;
use crate::error::{Error, Result};
use crate::evaluation::{
    cumulative_ratio_path, mcs_procedure, ratio_table_with, CumulativePath, LossMatrix,
    McsResult, RatioTable,
};
use crate::model_free::{
    cpi_index_projection, fixed_event_to_fixed_horizon, futures_implied_real_price,
    FixedEventSurvey, FuturesQuote, FUTURES_MATURITIES, SURVEY_HORIZONS,
};
use crate::models::{DataWindow, ForecastRecord};
use crate::nowcast::fill_missing_tail;
use crate::pooling::{pool_mcs, PoolVariant, PooledForecast};
use crate::series::MonthlySeries;
use crate::vintage::{
    deflate_nominal, load_panel, merge_first_release, Group, Metal, RealTimePanel,
};

/// Horizons reported in the pooling table.
pub const POOL_TABLE_HORIZONS: [usize; 9] = [1, 3, 6, 9, 12, 15, 18, 21, 24];

/// One entry of the error ledger: a cell (or cell range) that produced no
/// forecast, with the reason.
#[derive(Debug, Clone, Serialize)]
pub struct CellError {
    pub metal: Option<Metal>,
    pub model: Option<String>,
    pub origin: Option<YearMonth>,
    pub horizon: Option<usize>,
    pub message: String,
}

impl CellError {
    fn log_line(&self) -> String {
        format!(
            "metal={} model={} origin={} horizon={} :: {}",
            self.metal.map_or_else(|| "-".into(), |m| m.to_string()),
            self.model.as_deref().unwrap_or("-"),
            self.origin.map_or_else(|| "-".into(), |o| o.to_string()),
            self.horizon.map_or_else(|| "-".into(), |h| h.to_string()),
            self.message
        )
    }
}

/// Per-metal evaluation bundle.
#[derive(Debug, Clone, Serialize)]
pub struct MetalEvaluation {
    pub metal: Metal,
    /// One ratio table per configured horizon (skipped horizons noted in
    /// the error ledger).
    pub ratio_tables: Vec<RatioTable>,
    /// Pooled-stream comparison at the pooling-table horizons.
    pub pooled_tables: Vec<RatioTable>,
    pub mcs: Vec<(usize, McsResult)>,
    pub cumulative: Vec<(usize, Vec<CumulativePath>)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub version: String,
    pub seed: u64,
    pub workers: usize,
    pub config: serde_json::Value,
}

/// Factor scores over one (metal, origin) window, for plotting.
#[derive(Debug, Clone, Serialize)]
pub struct FactorPathDump {
    pub metal: Metal,
    pub origin: YearMonth,
    pub dates: Vec<YearMonth>,
    /// One inner vector per factor, aligned with `dates`.
    pub factors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BacktestReport {
    /// Model and pooled forecasts in canonical (metal, model, origin,
    /// horizon) order.
    pub forecasts: Vec<ForecastRecord>,
    pub evaluations: Vec<MetalEvaluation>,
    /// Pooled cells with member sets, for inspection and the Jensen checks.
    pub pooled: Vec<PooledForecast>,
    pub errors: Vec<CellError>,
    /// Present when `dump_factors` is enabled.
    pub factor_paths: Vec<FactorPathDump>,
    pub manifest: RunManifest,
    /// Filled by the nowcast-race front end; the backtest leaves it empty.
    pub horse_race: Option<crate::nowcast::NowcastReport>,
}

/// Realized real prices per metal, derived from the merged first-release
/// price and CPI paths.
fn realized_truth(panel: &RealTimePanel, base_month: YearMonth) -> Result<BTreeMap<Metal, MonthlySeries>> {
    let cpi_var = panel
        .variable("CPI")
        .ok_or_else(|| Error::Config("panel has no 'CPI' variable".into()))?;
    let cpi = merge_first_release(&cpi_var.vintages)?;
    let mut out = BTreeMap::new();
    for var in panel.variables() {
        if var.meta.group != Group::Target {
            continue;
        }
        let metal = var.meta.metal.ok_or_else(|| {
            Error::Config(format!("price variable '{}' has no metal tag", var.meta.id))
        })?;
        let nominal = merge_first_release(&var.vintages)?;
        // truth exists only where first-release CPI already covers the month
        let end = nominal.end().min(cpi.end());
        let nominal = nominal.slice(nominal.start(), end)?;
        let real = deflate_nominal(metal, &nominal, &cpi, base_month)?;
        out.insert(metal, real.values);
    }
    Ok(out)
}

struct ModelFreeData {
    /// (metal, quote date, maturity) -> nominal futures price
    futures: BTreeMap<(Metal, YearMonth, usize), f64>,
    /// (metal, survey date) -> survey
    surveys: BTreeMap<(Metal, YearMonth), FixedEventSurvey>,
}

pub const FUTURES_MODEL_ID: &str = "Futures";
pub const SURVEY_MODEL_ID: &str = "Professional Forecasters";

fn load_model_free(config: &BacktestConfig) -> Result<ModelFreeData> {
    let mut futures = BTreeMap::new();
    if let Some(path) = &config.futures {
        for q in crate::model_free::read_futures_csv(path)? {
            futures.insert((q.metal, q.quote_date, q.maturity_months), q.price);
        }
    }
    let mut surveys = BTreeMap::new();
    if let Some(path) = &config.surveys {
        for s in crate::model_free::read_surveys_csv(path)? {
            surveys.insert((s.metal, s.survey_date), s);
        }
    }
    Ok(ModelFreeData { futures, surveys })
}

/// Forecasts produced at one (metal, origin) cell.
struct CellOutput {
    records: Vec<ForecastRecord>,
    errors: Vec<CellError>,
    factor_paths: Option<FactorPathDump>,
}

#[allow(clippy::too_many_arguments)]
fn forecast_cell(
    config: &BacktestConfig,
    snapshot: &crate::nowcast::Snapshot,
    metal: Metal,
    origin: YearMonth,
    truth: &BTreeMap<Metal, MonthlySeries>,
    model_free: &ModelFreeData,
    max_h: usize,
) -> CellOutput {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    let mut factor_paths = None;
    let realized_at =
        |h: usize| -> Option<f64> { truth.get(&metal).and_then(|s| s.get(origin.add_months(h as i32))) };

    let window = match DataWindow::from_snapshot(
        snapshot,
        metal,
        config.base_month,
        config.window,
        config.factor_scale,
    ) {
        Ok(w) => w,
        Err(e) => {
            errors.push(CellError {
                metal: Some(metal),
                model: None,
                origin: Some(origin),
                horizon: None,
                message: format!("window construction failed: {e}"),
            });
            return CellOutput { records, errors, factor_paths };
        }
    };
    if config.dump_factors {
        match window.factor_columns(2, std::slice::from_ref(&window.target_price_id)) {
            Ok(factors) => {
                factor_paths = Some(FactorPathDump {
                    metal,
                    origin,
                    dates: window.dates.clone(),
                    factors,
                })
            }
            Err(e) => errors.push(CellError {
                metal: Some(metal),
                model: None,
                origin: Some(origin),
                horizon: None,
                message: format!("factor dump failed: {e}"),
            }),
        }
    }
    let all_horizons: Vec<usize> = (1..=max_h).collect();
    for model in &config.models {
        match model.forecast_fan(&window, &all_horizons) {
            Ok(fan) => {
                for &h in &config.horizons {
                    let growth: f64 = fan[..h].iter().sum();
                    match crate::models::reconstruct_level(window.origin_price, &fan, h) {
                        Ok(level) => records.push(ForecastRecord {
                            metal,
                            model: model.id.clone(),
                            origin,
                            horizon: h,
                            growth: Some(growth),
                            level,
                            realized: realized_at(h),
                        }),
                        Err(e) => errors.push(CellError {
                            metal: Some(metal),
                            model: Some(model.id.clone()),
                            origin: Some(origin),
                            horizon: Some(h),
                            message: e.to_string(),
                        }),
                    }
                }
            }
            Err(e) => errors.push(CellError {
                metal: Some(metal),
                model: Some(model.id.clone()),
                origin: Some(origin),
                horizon: None,
                message: e.to_string(),
            }),
        }
    }

    // model-free benchmarks, at the horizons where they exist
    let cpi_snapshot = snapshot.series_of("CPI").map(|s| &s.values);
    if let Some(cpi) = cpi_snapshot {
        let base_level = cpi.get(config.base_month);
        let win_start = origin.add_months(-(config.window as i32) + 1);
        let cpi_window = cpi.slice(win_start.max(cpi.start()), origin).ok();
        if let (Some(base_level), Some(cpi_window)) = (base_level, cpi_window) {
            for &h in &config.horizons {
                if !FUTURES_MATURITIES.contains(&h) {
                    continue;
                }
                let Some(&price) = model_free.futures.get(&(metal, origin, h)) else {
                    continue;
                };
                let quote = FuturesQuote { metal, quote_date: origin, maturity_months: h, price };
                let implied = cpi_index_projection(&cpi_window, h)
                    .and_then(|proj| futures_implied_real_price(&quote, &proj, base_level));
                match implied {
                    Ok(level) => records.push(ForecastRecord {
                        metal,
                        model: FUTURES_MODEL_ID.into(),
                        origin,
                        horizon: h,
                        growth: None,
                        level,
                        realized: realized_at(h),
                    }),
                    Err(e) => errors.push(CellError {
                        metal: Some(metal),
                        model: Some(FUTURES_MODEL_ID.into()),
                        origin: Some(origin),
                        horizon: Some(h),
                        message: e.to_string(),
                    }),
                }
            }
            if let Some(survey) = model_free.surveys.get(&(metal, origin)) {
                for &h in &config.horizons {
                    if !SURVEY_HORIZONS.contains(&h) {
                        continue;
                    }
                    let nominal = match fixed_event_to_fixed_horizon(survey, h) {
                        Ok(v) => v,
                        Err(Error::Coverage(_)) => continue, // unbracketed horizon: dash
                        Err(e) => {
                            errors.push(CellError {
                                metal: Some(metal),
                                model: Some(SURVEY_MODEL_ID.into()),
                                origin: Some(origin),
                                horizon: Some(h),
                                message: e.to_string(),
                            });
                            continue;
                        }
                    };
                    let level = if config.deflate_surveys {
                        cpi_index_projection(&cpi_window, h)
                            .map(|proj| nominal * base_level / proj.projected)
                    } else {
                        Ok(nominal)
                    };
                    match level {
                        Ok(level) if level > 0.0 => records.push(ForecastRecord {
                            metal,
                            model: SURVEY_MODEL_ID.into(),
                            origin,
                            horizon: h,
                            growth: None,
                            level,
                            realized: realized_at(h),
                        }),
                        Ok(level) => errors.push(CellError {
                            metal: Some(metal),
                            model: Some(SURVEY_MODEL_ID.into()),
                            origin: Some(origin),
                            horizon: Some(h),
                            message: format!("non-positive survey level {level}"),
                        }),
                        Err(e) => errors.push(CellError {
                            metal: Some(metal),
                            model: Some(SURVEY_MODEL_ID.into()),
                            origin: Some(origin),
                            horizon: Some(h),
                            message: e.to_string(),
                        }),
                    }
                }
            }
        }
    }
    CellOutput { records, errors, factor_paths }
}

/// Evaluation settings shared by the backtest and the standalone report
/// command.
#[derive(Debug, Clone)]
pub struct EvalSettings {
    pub benchmark: String,
    pub horizons: Vec<usize>,
    pub dm_variance: crate::evaluation::DmVariance,
    pub mcs: crate::evaluation::McsConfig,
    pub pooling: PoolingSettings,
    pub cumulative_skip: usize,
    pub seed: u64,
}

impl EvalSettings {
    pub fn from_config(config: &BacktestConfig) -> Self {
        EvalSettings {
            benchmark: config.benchmark.clone(),
            horizons: config.horizons.clone(),
            dm_variance: config.dm_variance,
            mcs: config.mcs.clone(),
            pooling: config.pooling.clone(),
            cumulative_skip: config.cumulative_skip,
            seed: config.seed,
        }
    }
}

/// Builds the per-horizon loss matrix for one metal: rows are origins where
/// the benchmark forecast has a realization; columns are the models with a
/// realized forecast at every such origin. Dropped models are reported.
fn build_loss_matrix(
    records: &[&ForecastRecord],
    horizon: usize,
    benchmark: &str,
    errors: &mut Vec<CellError>,
    metal: Metal,
) -> Option<LossMatrix> {
    let mut by_model: BTreeMap<&str, BTreeMap<YearMonth, f64>> = BTreeMap::new();
    for r in records {
        if r.horizon != horizon {
            continue;
        }
        if let Some(truth) = r.realized {
            let e = r.level - truth;
            by_model
                .entry(r.model.as_str())
                .or_default()
                .insert(r.origin, e * e);
        }
    }
    let bench = by_model.get(benchmark)?;
    if bench.is_empty() {
        return None;
    }
    let dates: Vec<YearMonth> = bench.keys().copied().collect();
    let mut models: Vec<&str> = vec![benchmark];
    for (m, losses) in &by_model {
        if *m == benchmark {
            continue;
        }
        if dates.iter().all(|d| losses.contains_key(d)) {
            models.push(m);
        } else {
            errors.push(CellError {
                metal: Some(metal),
                model: Some(m.to_string()),
                origin: None,
                horizon: Some(horizon),
                message: format!(
                    "excluded from h={horizon} evaluation: covers {}/{} origins",
                    dates.iter().filter(|d| losses.contains_key(d)).count(),
                    dates.len()
                ),
            });
        }
    }
    let rows: Vec<Vec<f64>> = dates
        .iter()
        .map(|d| models.iter().map(|m| by_model[m][d]).collect())
        .collect();
    LossMatrix::new(
        horizon,
        dates,
        models.iter().map(|m| m.to_string()).collect(),
        rows,
    )
    .ok()
}

/// Evaluates a forecast table: ratio tables, MCS, cumulative paths, pooled
/// streams and their comparison tables.
pub fn evaluate_records(
    records: &[ForecastRecord],
    metals: &[Metal],
    settings: &EvalSettings,
) -> Result<(Vec<MetalEvaluation>, Vec<PooledForecast>, Vec<CellError>)> {
    let mut errors = Vec::new();

    // pooled streams over the full table
    let mut pooled = Vec::new();
    for variant in [PoolVariant::All, PoolVariant::Ssm, PoolVariant::Top2] {
        let spec = settings.pooling.to_spec(variant, settings.seed);
        pooled.extend(pool_mcs(records, &spec)?);
    }
    let pooled_records: Vec<ForecastRecord> =
        pooled.iter().map(|p| p.record.clone()).collect();

    let evaluations: Vec<MetalEvaluation> = metals
        .par_iter()
        .map(|&metal| {
            let mut errs = Vec::new();
            let metal_records: Vec<&ForecastRecord> =
                records.iter().filter(|r| r.metal == metal).collect();
            let mut ratio_tables = Vec::new();
            let mut mcs_results = Vec::new();
            let mut cumulative = Vec::new();
            for &h in &settings.horizons {
                let Some(losses) =
                    build_loss_matrix(&metal_records, h, &settings.benchmark, &mut errs, metal)
                else {
                    errs.push(CellError {
                        metal: Some(metal),
                        model: None,
                        origin: None,
                        horizon: Some(h),
                        message: "no realized benchmark forecasts; horizon skipped".into(),
                    });
                    continue;
                };
                match ratio_table_with(&losses, &settings.benchmark, settings.dm_variance) {
                    Ok(t) => ratio_tables.push(t),
                    Err(e) => errs.push(CellError {
                        metal: Some(metal),
                        model: None,
                        origin: None,
                        horizon: Some(h),
                        message: format!("ratio table failed: {e}"),
                    }),
                }
                if losses.models().len() >= 2 && losses.dates().len() >= 2 * settings.mcs.block {
                    match mcs_procedure(&losses, &settings.mcs) {
                        Ok(r) => mcs_results.push((h, r)),
                        Err(e) => errs.push(CellError {
                            metal: Some(metal),
                            model: None,
                            origin: None,
                            horizon: Some(h),
                            message: format!("MCS failed: {e}"),
                        }),
                    }
                }
                if losses.dates().len() > settings.cumulative_skip {
                    match cumulative_ratio_path(
                        &losses,
                        &settings.benchmark,
                        settings.cumulative_skip,
                    ) {
                        Ok(paths) => cumulative.push((h, paths)),
                        Err(e) => errs.push(CellError {
                            metal: Some(metal),
                            model: None,
                            origin: None,
                            horizon: Some(h),
                            message: format!("cumulative path failed: {e}"),
                        }),
                    }
                }
            }

            // pooled streams vs the benchmark at the pooling-table horizons
            let mut pooled_tables = Vec::new();
            let bench_pool: Vec<&ForecastRecord> = metal_records
                .iter()
                .copied()
                .filter(|r| r.model == settings.benchmark)
                .chain(pooled_records.iter().filter(|r| r.metal == metal))
                .collect();
            for &h in POOL_TABLE_HORIZONS
                .iter()
                .filter(|h| settings.horizons.contains(h))
            {
                if let Some(losses) =
                    build_loss_matrix(&bench_pool, h, &settings.benchmark, &mut errs, metal)
                {
                    if losses.models().len() > 1 {
                        match ratio_table_with(&losses, &settings.benchmark, settings.dm_variance)
                        {
                            Ok(t) => pooled_tables.push(t),
                            Err(e) => errs.push(CellError {
                                metal: Some(metal),
                                model: None,
                                origin: None,
                                horizon: Some(h),
                                message: format!("pooled table failed: {e}"),
                            }),
                        }
                    }
                }
            }
            (
                MetalEvaluation {
                    metal,
                    ratio_tables,
                    pooled_tables,
                    mcs: mcs_results,
                    cumulative,
                },
                errs,
            )
        })
        .collect::<Vec<_>>()
        .into_iter()
        .map(|(ev, errs)| {
            errors.extend(errs);
            ev
        })
        .collect();

    Ok((evaluations, pooled, errors))
}

/// Runs the full backtest described by `config`.
pub fn run_backtest(config: &BacktestConfig) -> Result<BacktestReport> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    pool.install(|| run_inner(config))
}

fn run_inner(config: &BacktestConfig) -> Result<BacktestReport> {
    let (panel, _entries) = load_panel(&config.manifest)?;
    let model_free = load_model_free(config)?;
    let truth = realized_truth(&panel, config.base_month)?;
    for metal in &config.metals {
        if !truth.contains_key(metal) {
            return Err(Error::Config(format!(
                "manifest has no target price variable for {metal}"
            )));
        }
    }

    // earliest origin with full window coverage after transforms
    let (span_first, span_last) = panel.span();
    let data_start = panel
        .variables()
        .iter()
        .map(|v| {
            let drop = v.meta.transform.leading_drop().max(2); // CPI deflation + d2log reach
            v.vintages[0].values.start().add_months(drop as i32)
        })
        .max()
        .expect("non-empty panel");
    let min_origin = data_start.add_months(config.window as i32 - 1).max(span_first);
    let first = config.first_origin.unwrap_or(min_origin);
    let last = config.last_origin.unwrap_or(span_last);
    if first < min_origin {
        return Err(Error::Config(format!(
            "first_origin {first} leaves no full data window (earliest usable: {min_origin})"
        )));
    }
    if last > span_last || first > last {
        return Err(Error::Config(format!(
            "origin range [{first}, {last}] outside panel span [{span_first}, {span_last}]"
        )));
    }
    let origins: Vec<YearMonth> = first.range_to(last).collect();
    let max_h = *config.horizons.iter().max().expect("non-empty");

    // phase 1: nowcast-fill snapshots, one per origin
    let snapshots: Vec<(YearMonth, Result<crate::nowcast::Snapshot>)> = origins
        .par_iter()
        .map(|&o| {
            (
                o,
                fill_missing_tail(&panel, o, &config.nowcast, config.nowcast_window),
            )
        })
        .collect();
    let mut errors = Vec::new();
    let mut good_snapshots = Vec::new();
    for (o, s) in snapshots {
        match s {
            Ok(snap) => good_snapshots.push(snap),
            Err(e) => errors.push(CellError {
                metal: None,
                model: None,
                origin: Some(o),
                horizon: None,
                message: format!("nowcast fill failed: {e}"),
            }),
        }
    }

    // phase 2: forecast fan-out across (metal, origin)
    let tasks: Vec<(Metal, &crate::nowcast::Snapshot)> = config
        .metals
        .iter()
        .flat_map(|&m| good_snapshots.iter().map(move |s| (m, s)))
        .collect();
    let outputs: Vec<CellOutput> = tasks
        .par_iter()
        .map(|&(metal, snapshot)| {
            forecast_cell(config, snapshot, metal, snapshot.as_of, &truth, &model_free, max_h)
        })
        .collect();
    let mut forecasts: Vec<ForecastRecord> = Vec::new();
    let mut factor_paths = Vec::new();
    for out in outputs {
        forecasts.extend(out.records);
        errors.extend(out.errors);
        factor_paths.extend(out.factor_paths);
    }
    forecasts.sort_by(|a, b| {
        (a.metal, &a.model, a.origin, a.horizon).cmp(&(b.metal, &b.model, b.origin, b.horizon))
    });

    // phase 3: evaluation + pooling
    let settings = EvalSettings::from_config(config);
    let (evaluations, pooled, eval_errors) =
        evaluate_records(&forecasts, &config.metals, &settings)?;
    errors.extend(eval_errors);

    let mut all_records = forecasts;
    all_records.extend(pooled.iter().map(|p| p.record.clone()));
    all_records.sort_by(|a, b| {
        (a.metal, &a.model, a.origin, a.horizon).cmp(&(b.metal, &b.model, b.origin, b.horizon))
    });

    Ok(BacktestReport {
        forecasts: all_records,
        evaluations,
        pooled,
        errors,
        factor_paths,
        manifest: RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            workers: config.workers,
            config: serde_json::to_value(config)
                .map_err(|e| Error::Config(format!("config echo: {e}")))?,
        },
        horse_race: None,
    })
}

/// Convenience wrapper: run and write every report file into
/// `config.out_dir`.
pub fn run_and_emit(config: &BacktestConfig) -> Result<BacktestReport> {
    let report = run_backtest(config)?;
    emit_report(&report, Path::new(&config.out_dir))?;
    Ok(report)
}
