//! Batch front end: config parsing, backtest orchestration, report and
//! plot-data emission.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use metalcast_core::backtest::{self, BacktestConfig, EvalSettings, Overrides};
use metalcast_core::dates::YearMonth;
use metalcast_core::error::{Error, Result};
use metalcast_core::nowcast::{
    nowcast_horse_race, HorseRaceWindow, NowcastFamily, NowcastModelSpec,
};
use metalcast_core::synth::{generate_dataset, write_ip_fixture, SynthConfig};
use metalcast_core::vintage::load_panel;

#[derive(Parser)]
#[command(
    name = "metalcast",
    version,
    about = "Real-time metal price forecasting engine"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOverrides {
    /// Master seed; overrides the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; overrides the config file.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory; overrides the config file.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonOverrides {
    fn to_overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            workers: self.workers,
            out_dir: self.out.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the full rolling-origin backtest and write all report files.
    Backtest {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: CommonOverrides,
    },
    /// Race the six nowcasting models across all lagged variables.
    NowcastRace {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: CommonOverrides,
    },
    /// Generate the synthetic dataset (vintages, manifest, futures, surveys).
    Synthgen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// First observation month.
        #[arg(long, default_value = "2000-01")]
        start: YearMonth,
        #[arg(long, default_value = "2015-04")]
        first_vintage: YearMonth,
        #[arg(long, default_value = "2021-12")]
        last_vintage: YearMonth,
    },
    /// Write the industrial-production publication-matrix fixture.
    Fixtures {
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run evaluation and report emission from a saved forecast table.
    Report {
        #[arg(long)]
        config: PathBuf,
        /// Forecast table CSV (defaults to <out>/forecast_table.csv).
        #[arg(long)]
        forecasts: Option<PathBuf>,
        #[command(flatten)]
        common: CommonOverrides,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Backtest { config, common } => {
            let cfg = BacktestConfig::from_file(&config, &common.to_overrides())?;
            let report = backtest::run_and_emit(&cfg)?;
            println!(
                "backtest complete: {} forecasts, {} ledger entries -> {}",
                report.forecasts.len(),
                report.errors.len(),
                cfg.out_dir.display()
            );
            Ok(())
        }
        Command::NowcastRace { config, common } => {
            let cfg = BacktestConfig::from_file(&config, &common.to_overrides())?;
            let (panel, _) = load_panel(&cfg.manifest)?;
            let models: Vec<NowcastModelSpec> = [
                NowcastFamily::Rwd,
                NowcastFamily::Ar,
                NowcastFamily::ArAic,
                NowcastFamily::Bar,
                NowcastFamily::BarSv,
                NowcastFamily::BarSvo,
            ]
            .into_iter()
            .map(|family| NowcastModelSpec {
                family,
                max_lag: cfg.nowcast.max_lag,
                mcmc: cfg.nowcast.mcmc,
            })
            .collect();
            let window = HorseRaceWindow {
                estimation: cfg.nowcast_window,
                first: cfg.first_origin,
                last: cfg.last_origin,
            };
            let pool = rayon_pool(cfg.workers)?;
            let report = pool.install(|| nowcast_horse_race(&panel, &models, &window))?;
            std::fs::create_dir_all(&cfg.out_dir)?;
            std::fs::write(cfg.out_dir.join("nowcast_horse_race.csv"), report.to_csv())?;
            std::fs::write(
                cfg.out_dir.join("nowcast_horse_race.json"),
                serde_json::to_string_pretty(&report)
                    .map_err(|e| Error::Config(format!("race json: {e}")))?,
            )?;
            println!(
                "horse race complete: {} variables -> {}",
                report.variables.len(),
                cfg.out_dir.display()
            );
            Ok(())
        }
        Command::Synthgen { out, seed, start, first_vintage, last_vintage } => {
            let cfg = SynthConfig {
                seed,
                panel_start: start,
                first_vintage,
                last_vintage,
            };
            if cfg.first_vintage <= cfg.panel_start || cfg.last_vintage < cfg.first_vintage {
                return Err(Error::Config(
                    "require start < first_vintage <= last_vintage".into(),
                ));
            }
            generate_dataset(&out, &cfg)?;
            println!("synthetic dataset written to {}", out.display());
            Ok(())
        }
        Command::Fixtures { out } => {
            let (path, _) = write_ip_fixture(&out)?;
            println!("fixture written to {}", path.display());
            Ok(())
        }
        Command::Report { config, forecasts, common } => {
            let cfg = BacktestConfig::from_file(&config, &common.to_overrides())?;
            let table = forecasts.unwrap_or_else(|| cfg.out_dir.join("forecast_table.csv"));
            let records = backtest::read_forecast_csv(&table)?;
            // pooled rows from a previous run are regenerated, not re-pooled
            let records: Vec<_> = records
                .into_iter()
                .filter(|r| !r.model.starts_with("pool_"))
                .collect();
            let settings = EvalSettings::from_config(&cfg);
            let pool = rayon_pool(cfg.workers)?;
            let (evaluations, pooled, errors) =
                pool.install(|| backtest::evaluate_records(&records, &cfg.metals, &settings))?;
            let mut all_records = records;
            all_records.extend(pooled.iter().map(|p| p.record.clone()));
            all_records.sort_by(|a, b| {
                (a.metal, &a.model, a.origin, a.horizon)
                    .cmp(&(b.metal, &b.model, b.origin, b.horizon))
            });
            let report = backtest::BacktestReport {
                forecasts: all_records,
                evaluations,
                pooled,
                errors,
                factor_paths: Vec::new(),
                manifest: backtest::RunManifest {
                    version: env!("CARGO_PKG_VERSION").to_string(),
                    seed: cfg.seed,
                    workers: cfg.workers,
                    config: serde_json::to_value(&cfg)
                        .map_err(|e| Error::Config(format!("config echo: {e}")))?,
                },
                horse_race: None,
            };
            backtest::emit_report(&report, &cfg.out_dir)?;
            println!("report written to {}", cfg.out_dir.display());
            Ok(())
        }
    }
}

fn rayon_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
