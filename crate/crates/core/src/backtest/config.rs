//! Backtest configuration: a TOML file plus CLI-style overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dates::{ym, YearMonth};
use crate::error::{Error, Result};
use crate::evaluation::{DmVariance, McsConfig, McsStatistic};
use crate::factors::FactorScale;
use crate::models::{self, Lags, ModelFamily, ModelSpec, PredictorSet, MAX_HORIZON};
use crate::nowcast::{McmcConfig, NowcastFamily, NowcastModelSpec};
use crate::pooling::{PoolVariant, PoolingSpec};
use crate::vintage::Metal;

/// Default rolling estimation window length in months.
pub const DEFAULT_WINDOW: usize = 184;

#[derive(Debug, Clone, Serialize)]
pub struct BacktestConfig {
    pub manifest: PathBuf,
    pub futures: Option<PathBuf>,
    pub surveys: Option<PathBuf>,
    pub metals: Vec<Metal>,
    pub models: Vec<ModelSpec>,
    pub horizons: Vec<usize>,
    /// Rolling estimation window length in months.
    pub window: usize,
    pub first_origin: Option<YearMonth>,
    pub last_origin: Option<YearMonth>,
    /// Gap-filling model for the ragged edge.
    pub nowcast: NowcastModelSpec,
    /// Estimation window for nowcasts; full vintage history when `None`.
    pub nowcast_window: Option<usize>,
    /// Benchmark model id for ratio tables (must name a configured model).
    pub benchmark: String,
    pub dm_variance: DmVariance,
    pub mcs: McsConfig,
    pub pooling: PoolingSettings,
    /// CPI base month for deflation.
    pub base_month: YearMonth,
    /// Evaluation periods dropped at the start of cumulative ratio paths.
    pub cumulative_skip: usize,
    /// Deflate survey levels with the projected CPI (they are assumed
    /// nominal at source).
    pub deflate_surveys: bool,
    /// Write per-(metal, origin) factor path CSVs for plotting.
    pub dump_factors: bool,
    pub factor_scale: FactorScale,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub workers: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolingSettings {
    pub warmup: usize,
    pub screen_window: usize,
    pub alpha: f64,
    pub replications: usize,
    pub block: usize,
}

impl Default for PoolingSettings {
    fn default() -> Self {
        PoolingSettings {
            warmup: 12,
            screen_window: 12,
            alpha: 0.25,
            replications: 500,
            block: 6,
        }
    }
}

impl PoolingSettings {
    pub fn to_spec(&self, variant: PoolVariant, seed: u64) -> PoolingSpec {
        PoolingSpec {
            warmup: self.warmup,
            screen_window: self.screen_window,
            alpha: self.alpha,
            variant,
            mcs: McsConfig {
                replications: self.replications,
                block: self.block,
                alphas: vec![self.alpha],
                seed,
                statistic: McsStatistic::TMax,
            },
        }
    }
}

/// Flag/field overrides that sit above the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

// ---- raw TOML shapes ----

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    manifest: String,
    futures: Option<String>,
    surveys: Option<String>,
    metals: Vec<String>,
    horizons: Option<RawHorizons>,
    window: Option<usize>,
    first_origin: Option<String>,
    last_origin: Option<String>,
    benchmark: Option<String>,
    base_month: Option<String>,
    cumulative_skip: Option<usize>,
    deflate_surveys: Option<bool>,
    dump_factors: Option<bool>,
    factor_scale: Option<String>,
    seed: u64,
    out_dir: Option<String>,
    workers: Option<usize>,
    nowcast: Option<RawNowcast>,
    evaluation: Option<RawEvaluation>,
    pooling: Option<PoolingSettings>,
    #[serde(rename = "models")]
    models: Vec<RawModel>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawHorizons {
    Range(String),
    List(Vec<usize>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNowcast {
    family: String,
    max_lag: Option<usize>,
    draws: Option<usize>,
    burn_in: Option<usize>,
    window: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvaluation {
    mcs_replications: Option<usize>,
    mcs_block: Option<usize>,
    alphas: Option<Vec<f64>>,
    mcs_statistic: Option<String>,
    dm: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    id: String,
    family: String,
    p: Option<toml::Value>,
    s: Option<toml::Value>,
    max_lag: Option<usize>,
    predictors: Option<Vec<String>>,
    group: Option<String>,
    factors: Option<usize>,
    endogenous: Option<Vec<String>>,
    iterated: Option<bool>,
}

fn parse_lags(v: &Option<toml::Value>, max_lag: Option<usize>, what: &str) -> Result<Lags> {
    match v {
        None => Ok(Lags::Fixed(1)),
        Some(toml::Value::Integer(p)) => {
            if *p < 1 {
                return Err(Error::Config(format!("{what}: lag {p} must be >= 1")));
            }
            Ok(Lags::Fixed(*p as usize))
        }
        Some(toml::Value::String(s)) if s.eq_ignore_ascii_case("aic") => Ok(Lags::Aic {
            max: max_lag.unwrap_or(6),
        }),
        Some(other) => Err(Error::Config(format!(
            "{what}: expected an integer or \"aic\", got {other}"
        ))),
    }
}

fn parse_model(raw: &RawModel) -> Result<ModelSpec> {
    let family = match raw.family.to_ascii_lowercase().as_str() {
        "rwd" | "rw-d" => ModelFamily::Rwd,
        "ar" => ModelFamily::Ar {
            p: parse_lags(&raw.p, raw.max_lag, &raw.id)?,
        },
        "ardl" => {
            let predictors = match (&raw.predictors, &raw.group) {
                (Some(ids), None) => PredictorSet::Ids(ids.clone()),
                (None, Some(g)) => PredictorSet::Group(g.parse()?),
                _ => {
                    return Err(Error::Config(format!(
                        "{}: ardl needs exactly one of `predictors` or `group`",
                        raw.id
                    )))
                }
            };
            ModelFamily::Ardl {
                p: parse_lags(&raw.p, raw.max_lag, &raw.id)?,
                s: parse_lags(&raw.s, raw.max_lag, &raw.id)?,
                predictors,
            }
        }
        "ardi" => ModelFamily::Ardi {
            p: parse_lags(&raw.p, raw.max_lag, &raw.id)?,
            s: parse_lags(&raw.s, raw.max_lag, &raw.id)?,
            factors: raw.factors.unwrap_or(1),
        },
        "var" => ModelFamily::Var {
            p: match parse_lags(&raw.p, None, &raw.id)? {
                Lags::Fixed(p) => p,
                Lags::Aic { .. } => {
                    return Err(Error::Config(format!("{}: VAR order must be fixed", raw.id)))
                }
            },
            endogenous: raw
                .endogenous
                .clone()
                .unwrap_or_else(models::default_endogenous),
            iterated: raw.iterated.unwrap_or(false),
        },
        "favar" => ModelFamily::Favar {
            p: match parse_lags(&raw.p, None, &raw.id)? {
                Lags::Fixed(p) => p,
                Lags::Aic { .. } => {
                    return Err(Error::Config(format!("{}: VAR order must be fixed", raw.id)))
                }
            },
            factors: raw.factors.unwrap_or(1),
            endogenous: raw
                .endogenous
                .clone()
                .unwrap_or_else(models::default_endogenous),
            iterated: raw.iterated.unwrap_or(false),
        },
        other => return Err(Error::Config(format!("unknown model family '{other}'"))),
    };
    let spec = ModelSpec { id: raw.id.clone(), family };
    spec.validate()?;
    Ok(spec)
}

fn parse_horizons(raw: &Option<RawHorizons>) -> Result<Vec<usize>> {
    let hs: Vec<usize> = match raw {
        None => (1..=MAX_HORIZON).collect(),
        Some(RawHorizons::List(v)) => v.clone(),
        Some(RawHorizons::Range(s)) => {
            let (a, b) = s
                .split_once("..")
                .ok_or_else(|| Error::Config(format!("bad horizons range '{s}'")))?;
            let a: usize = a
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad horizons range '{s}'")))?;
            let b: usize = b
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad horizons range '{s}'")))?;
            (a..=b).collect()
        }
    };
    if hs.is_empty() {
        return Err(Error::Config("horizons must not be empty".into()));
    }
    let mut sorted = hs.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != hs.len() {
        return Err(Error::Config("horizons contain duplicates".into()));
    }
    if let Some(&bad) = sorted.iter().find(|&&h| h == 0 || h > MAX_HORIZON) {
        return Err(Error::Config(format!(
            "horizon {bad} outside 1..={MAX_HORIZON}"
        )));
    }
    Ok(sorted)
}

impl BacktestConfig {
    /// Parses the TOML text. Relative data paths are resolved against
    /// `base_dir` (normally the config file's directory).
    pub fn from_toml(text: &str, base_dir: &Path, overrides: &Overrides) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        let resolve = |s: &str| -> PathBuf {
            let p = PathBuf::from(s);
            if p.is_absolute() {
                p
            } else {
                base_dir.join(p)
            }
        };
        let metals: Vec<Metal> = raw
            .metals
            .iter()
            .map(|m| m.parse())
            .collect::<Result<_>>()?;
        if metals.is_empty() {
            return Err(Error::Config("at least one metal required".into()));
        }
        let models: Vec<ModelSpec> = raw.models.iter().map(parse_model).collect::<Result<_>>()?;
        if models.is_empty() {
            return Err(Error::Config("at least one model required".into()));
        }
        {
            let mut ids: Vec<&str> = models.iter().map(|m| m.id.as_str()).collect();
            ids.sort_unstable();
            ids.dedup();
            if ids.len() != models.len() {
                return Err(Error::Config("duplicate model ids".into()));
            }
        }
        let seed = overrides.seed.unwrap_or(raw.seed);
        let benchmark = raw.benchmark.unwrap_or_else(|| "RW-D".to_string());
        if !models.iter().any(|m| m.id == benchmark) {
            return Err(Error::Config(format!(
                "benchmark '{benchmark}' is not a configured model"
            )));
        }

        let nowcast = match &raw.nowcast {
            None => NowcastModelSpec::new(NowcastFamily::Rwd, seed),
            Some(rn) => {
                let family: NowcastFamily = rn.family.parse()?;
                let mut mcmc = McmcConfig::new(seed);
                if let Some(d) = rn.draws {
                    mcmc.draws = d;
                }
                if let Some(b) = rn.burn_in {
                    mcmc.burn_in = b;
                }
                NowcastModelSpec {
                    family,
                    max_lag: rn.max_lag.unwrap_or(6),
                    mcmc,
                }
            }
        };
        let nowcast_window = raw.nowcast.as_ref().and_then(|n| n.window);

        let eval = raw.evaluation.as_ref();
        let mcs = McsConfig {
            replications: eval.and_then(|e| e.mcs_replications).unwrap_or(10_000),
            block: eval.and_then(|e| e.mcs_block).unwrap_or(6),
            alphas: eval
                .and_then(|e| e.alphas.clone())
                .unwrap_or_else(|| vec![0.10, 0.25]),
            seed,
            statistic: match eval.and_then(|e| e.mcs_statistic.as_deref()) {
                None | Some("t_max") | Some("tmax") => McsStatistic::TMax,
                Some("t_range") | Some("trange") => McsStatistic::TRange,
                Some(other) => {
                    return Err(Error::Config(format!("unknown MCS statistic '{other}'")))
                }
            },
        };
        let dm_variance = match eval.and_then(|e| e.dm.as_deref()) {
            None | Some("hac") => DmVariance::Hac,
            Some("hac_small_sample") | Some("hln") => DmVariance::HacSmallSample,
            Some(other) => return Err(Error::Config(format!("unknown DM variance '{other}'"))),
        };

        let config = BacktestConfig {
            manifest: resolve(&raw.manifest),
            futures: raw.futures.as_deref().map(resolve),
            surveys: raw.surveys.as_deref().map(resolve),
            metals,
            models,
            horizons: parse_horizons(&raw.horizons)?,
            window: raw.window.unwrap_or(DEFAULT_WINDOW),
            first_origin: raw.first_origin.as_deref().map(str::parse).transpose()?,
            last_origin: raw.last_origin.as_deref().map(str::parse).transpose()?,
            nowcast,
            nowcast_window,
            benchmark,
            dm_variance,
            mcs,
            pooling: raw.pooling.unwrap_or_default(),
            base_month: raw
                .base_month
                .as_deref()
                .map(str::parse)
                .transpose()?
                .unwrap_or(ym(2015, 2)),
            cumulative_skip: raw.cumulative_skip.unwrap_or(12),
            deflate_surveys: raw.deflate_surveys.unwrap_or(true),
            dump_factors: raw.dump_factors.unwrap_or(false),
            factor_scale: match raw.factor_scale.as_deref() {
                None | Some("over_n") => FactorScale::OverN,
                Some("raw") => FactorScale::Raw,
                Some(other) => {
                    return Err(Error::Config(format!("unknown factor scale '{other}'")))
                }
            },
            seed,
            out_dir: overrides
                .out_dir
                .clone()
                .unwrap_or_else(|| resolve(raw.out_dir.as_deref().unwrap_or("out"))),
            workers: overrides.workers.or(raw.workers).unwrap_or(4),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml(&text, base, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 24 {
            return Err(Error::Config(format!(
                "window {} too short; need at least 24 months",
                self.window
            )));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        if let (Some(a), Some(b)) = (self.first_origin, self.last_origin) {
            if b < a {
                return Err(Error::Config(format!(
                    "last_origin {b} before first_origin {a}"
                )));
            }
        }
        self.nowcast.validate()?;
        for m in &self.models {
            m.validate()?;
        }
        Ok(())
    }
}
