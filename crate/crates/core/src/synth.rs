//! Synthetic dataset generation: a factor-driven panel with realistic
//! publication lags, futures quotes, and survey forecasts, so the full
//! pipeline can run without any proprietary data. Also materializes the
//! small industrial-production publication-matrix fixture used by the
//! first-release tests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dates::{ym, YearMonth};
use crate::error::Result;
use crate::rng::derive_rng;
use crate::vintage::Metal;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    /// First observation month of every series.
    pub panel_start: YearMonth,
    /// First and last publication months.
    pub first_vintage: YearMonth,
    pub last_vintage: YearMonth,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 42,
            panel_start: ym(2000, 1),
            first_vintage: ym(2015, 4),
            last_vintage: ym(2021, 12),
        }
    }
}

struct VariableDef {
    id: &'static str,
    group: &'static str,
    transform: &'static str,
    lag: u32,
    metal: Option<Metal>,
}

const VARIABLES: &[VariableDef] = &[
    VariableDef { id: "CPI", group: "prices", transform: "d2log", lag: 2, metal: None },
    VariableDef { id: "PPI-M", group: "prices", transform: "dlog", lag: 2, metal: None },
    VariableDef { id: "IP", group: "ec_act", transform: "dlog", lag: 2, metal: None },
    VariableDef { id: "HEM", group: "ec_act", transform: "log", lag: 2, metal: None },
    VariableDef { id: "NO-M", group: "ec_act", transform: "log", lag: 2, metal: None },
    VariableDef { id: "NO-A", group: "ec_act", transform: "log", lag: 3, metal: None },
    VariableDef { id: "CU-P", group: "cu", transform: "log", lag: 2, metal: None },
    VariableDef { id: "CU-M", group: "cu", transform: "log", lag: 2, metal: None },
    VariableDef { id: "PPI-B", group: "et", transform: "dlog", lag: 2, metal: None },
    VariableDef { id: "MVS", group: "et", transform: "log", lag: 3, metal: None },
    VariableDef { id: "AUS", group: "ex_rates", transform: "dlog", lag: 2, metal: None },
    VariableDef { id: "CHL", group: "ex_rates", transform: "dlog", lag: 2, metal: None },
    VariableDef { id: "CHN", group: "ex_rates", transform: "dlog", lag: 2, metal: None },
    VariableDef {
        id: "ALU-V",
        group: "inventories",
        transform: "dlog",
        lag: 0,
        metal: Some(Metal::Aluminum),
    },
    VariableDef {
        id: "COP-V",
        group: "inventories",
        transform: "dlog",
        lag: 0,
        metal: Some(Metal::Copper),
    },
    VariableDef {
        id: "NIC-V",
        group: "inventories",
        transform: "dlog",
        lag: 0,
        metal: Some(Metal::Nickel),
    },
    VariableDef {
        id: "ZNC-V",
        group: "inventories",
        transform: "dlog",
        lag: 0,
        metal: Some(Metal::Zinc),
    },
    VariableDef {
        id: "aluminum",
        group: "target",
        transform: "dlog",
        lag: 0,
        metal: Some(Metal::Aluminum),
    },
    VariableDef {
        id: "copper",
        group: "target",
        transform: "dlog",
        lag: 0,
        metal: Some(Metal::Copper),
    },
    VariableDef {
        id: "nickel",
        group: "target",
        transform: "dlog",
        lag: 0,
        metal: Some(Metal::Nickel),
    },
    VariableDef {
        id: "zinc",
        group: "target",
        transform: "dlog",
        lag: 0,
        metal: Some(Metal::Zinc),
    },
];

/// Master paths for every variable.
struct MasterData {
    dates: Vec<YearMonth>,
    series: Vec<(String, Vec<f64>)>,
}

impl MasterData {
    fn series_of(&self, id: &str) -> &[f64] {
        &self
            .series
            .iter()
            .find(|(s, _)| s == id)
            .expect("known id")
            .1
    }
}

fn metal_params(metal: Metal) -> (f64, f64, f64, f64) {
    // (start level, loading on f1, loading on f2, growth noise sd)
    match metal {
        Metal::Aluminum => (1700.0, 0.010, 0.003, 0.025),
        Metal::Copper => (5500.0, 0.012, 0.004, 0.030),
        Metal::Nickel => (14000.0, 0.008, 0.006, 0.045),
        Metal::Zinc => (2200.0, 0.010, 0.005, 0.035),
    }
}

fn simulate_master(cfg: &SynthConfig) -> MasterData {
    let months = cfg.last_vintage.months_since(cfg.panel_start) as usize + 1;
    let dates: Vec<YearMonth> = (0..months)
        .map(|i| cfg.panel_start.add_months(i as i32))
        .collect();
    let mut rng = derive_rng(cfg.seed, &["synth", "master"]);
    let mut draw = move || -> f64 { StandardNormal.sample(&mut rng) };

    // two persistent latent factors drive the panel
    let mut f1 = vec![0.0; months];
    let mut f2 = vec![0.0; months];
    for t in 1..months {
        f1[t] = 0.85 * f1[t - 1] + draw();
        f2[t] = 0.60 * f2[t - 1] + draw();
    }

    let mut series: Vec<(String, Vec<f64>)> = Vec::new();

    // CPI: trending index with mildly persistent inflation
    let mut cpi = Vec::with_capacity(months);
    let mut level: f64 = 0.80;
    let mut infl = 0.0017;
    for t in 0..months {
        if t > 0 {
            infl = 0.0017 + 0.3 * (infl - 0.0017) + 0.0006 * draw();
            level *= infl.exp();
        }
        cpi.push(level);
    }
    series.push(("CPI".into(), cpi));

    fn idio(draw: &mut dyn FnMut() -> f64, n: usize) -> Vec<f64> {
        let mut e = vec![0.0; n];
        for t in 1..n {
            e[t] = 0.5 * e[t - 1] + draw();
        }
        e
    }

    {
        let mut growth_series = |start: f64, trend: f64, b1: f64, b2: f64, sd: f64| {
            let noise = idio(&mut draw, months);
            let mut out = Vec::with_capacity(months);
            let mut level = start;
            for t in 0..months {
                if t > 0 {
                    let g = trend + b1 * f1[t] + b2 * f2[t] + sd * noise[t];
                    level *= g.exp();
                }
                out.push(level);
            }
            out
        };
        series.push(("PPI-M".into(), growth_series(95.0, 0.001, 0.0, 0.006, 0.003)));
        series.push(("IP".into(), growth_series(100.0, 0.001, 0.010, 0.0, 0.004)));
        series.push(("PPI-B".into(), growth_series(90.0, 0.0008, 0.0, 0.004, 0.003)));
        series.push(("AUS".into(), growth_series(100.0, 0.0, 0.0, 0.004, 0.010)));
        series.push(("CHL".into(), growth_series(100.0, 0.0, 0.0, 0.004, 0.010)));
        series.push(("CHN".into(), growth_series(100.0, 0.0, 0.0, 0.004, 0.010)));
    }
    {
        let mut log_level_series = |base: f64, b1: f64, b2: f64, sd: f64| {
            let noise = idio(&mut draw, months);
            (0..months)
                .map(|t| (base + b1 * f1[t] + b2 * f2[t] + sd * noise[t]).exp())
                .collect::<Vec<f64>>()
        };
        series.push(("HEM".into(), log_level_series(3.70, 0.020, 0.0, 0.010)));
        series.push(("NO-M".into(), log_level_series(9.90, 0.050, 0.020, 0.020)));
        series.push(("NO-A".into(), log_level_series(6.60, 0.040, 0.0, 0.020)));
        series.push(("CU-P".into(), log_level_series(4.35, 0.015, 0.0, 0.008)));
        series.push(("CU-M".into(), log_level_series(4.33, 0.018, 0.0, 0.008)));
        series.push(("MVS".into(), log_level_series(6.20, 0.030, 0.020, 0.020)));
    }

    // inventories mean-revert and move against the demand factor
    for metal in Metal::ALL {
        let id = match metal {
            Metal::Aluminum => "ALU-V",
            Metal::Copper => "COP-V",
            Metal::Nickel => "NIC-V",
            Metal::Zinc => "ZNC-V",
        };
        let noise = idio(&mut draw, months);
        let base: f64 = 12.0;
        let mut lg = vec![base; months];
        for t in 1..months {
            lg[t] = 0.98 * lg[t - 1] + 0.02 * base - 0.010 * f1[t - 1] + 0.030 * noise[t];
        }
        series.push((id.into(), lg.iter().map(|v| v.exp()).collect()));
    }

    // nominal metal prices: random walks whose growth loads on lagged factors
    for metal in Metal::ALL {
        let (start, b1, b2, sd) = metal_params(metal);
        let noise = idio(&mut draw, months);
        let mut out = Vec::with_capacity(months);
        let mut level = start;
        for t in 0..months {
            if t > 0 {
                let g = 0.001 + b1 * f1[t - 1] + b2 * f2[t - 1] + sd * noise[t];
                level *= g.exp();
            }
            out.push(level);
        }
        series.push((metal.name().into(), out));
    }

    MasterData { dates, series }
}

fn write_vintage_csv(
    path: &Path,
    dates: &[YearMonth],
    master: &[f64],
    vintages: &[YearMonth],
    lag: u32,
) -> Result<()> {
    let mut out = String::from("obs_date");
    for v in vintages {
        let _ = write!(out, ",{v}");
    }
    out.push('\n');
    let last_obs: Vec<YearMonth> = vintages.iter().map(|v| v.add_months(-(lag as i32))).collect();
    for (i, date) in dates.iter().enumerate() {
        if last_obs.iter().all(|&lo| *date > lo) {
            break;
        }
        let _ = write!(out, "{date}");
        for &lo in &last_obs {
            if *date <= lo {
                let _ = write!(out, ",{:.6}", master[i]);
            } else {
                out.push(',');
            }
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Generates the full synthetic dataset into `dir`: per-variable vintage
/// CSVs, the manifest, futures quotes, and survey forecasts.
pub fn generate_dataset(dir: &Path, cfg: &SynthConfig) -> Result<()> {
    fs::create_dir_all(dir)?;
    let master = simulate_master(cfg);
    let vintages: Vec<YearMonth> = cfg.first_vintage.range_to(cfg.last_vintage).collect();

    let mut manifest = String::from("# synthetic real-time panel\n");
    for def in VARIABLES {
        let file = format!("{}.csv", def.id.to_ascii_lowercase().replace('-', "_"));
        write_vintage_csv(
            &dir.join(&file),
            &master.dates,
            master.series_of(def.id),
            &vintages,
            def.lag,
        )?;
        let _ = writeln!(manifest, "{}.file = {}", def.id, file);
        let _ = writeln!(manifest, "{}.group = {}", def.id, def.group);
        let _ = writeln!(manifest, "{}.transform = {}", def.id, def.transform);
        let _ = writeln!(manifest, "{}.lag = {}", def.id, def.lag);
        if let Some(m) = def.metal {
            let _ = writeln!(manifest, "{}.metal = {}", def.id, m);
        }
        if def.group == "target" || def.group == "inventories" {
            let _ = writeln!(manifest, "{}.frequency = daily_averaged", def.id);
        }
        manifest.push('\n');
    }
    fs::write(dir.join("manifest.txt"), manifest)?;

    // futures: noisy drifting quotes off the nominal spot
    let mut rng = derive_rng(cfg.seed, &["synth", "futures"]);
    let mut futures = String::from("metal,quote_date,maturity_months,price\n");
    for metal in Metal::ALL {
        let spot = master.series_of(metal.name());
        for &quote_date in &vintages {
            let i = quote_date.months_since(cfg.panel_start) as usize;
            for h in [3usize, 15] {
                let z: f64 = StandardNormal.sample(&mut rng);
                let price = spot[i] * (0.001 * h as f64 + 0.04 * z).exp();
                let _ = writeln!(futures, "{metal},{quote_date},{h},{price:.6}");
            }
        }
    }
    fs::write(dir.join("futures.csv"), futures)?;

    // surveys: monthly snapshots with mean forecasts at quarterly events
    let mut rng = derive_rng(cfg.seed, &["synth", "surveys"]);
    let mut surveys = String::from("metal,survey_date,event_date,mean_forecast\n");
    let horizon_reach = 21i32;
    for metal in Metal::ALL {
        let spot = master.series_of(metal.name());
        for &survey_date in &vintages {
            let mut event = survey_date.next();
            while !event.is_quarter_end() {
                event = event.next();
            }
            while event.months_since(survey_date) <= horizon_reach {
                let i = event.months_since(cfg.panel_start) as usize;
                let anchor = if i < spot.len() { spot[i] } else { spot[spot.len() - 1] };
                // forecast uncertainty fans out with the event horizon
                let ahead = event.months_since(survey_date) as f64;
                let sd = 0.04 + 0.012 * ahead;
                let z: f64 = StandardNormal.sample(&mut rng);
                let forecast = anchor * (sd * z).exp();
                let _ = writeln!(surveys, "{metal},{survey_date},{event},{forecast:.6}");
                event = event.add_months(3);
            }
        }
    }
    fs::write(dir.join("surveys.csv"), surveys)?;
    Ok(())
}

/// The anchor values of the industrial-production publication matrix:
/// (observation month, first-release value).
fn ip_fixture_master() -> Vec<(YearMonth, f64)> {
    let mut out = vec![
        (ym(1992, 1), 100.00),
        (ym(1992, 2), 100.60),
        (ym(1992, 3), 100.90),
    ];
    // smooth log-linear path between the anchors shown in the source table
    let from = 100.90f64;
    let to = 155.28f64;
    let steps = ym(2011, 9).months_since(ym(1992, 3));
    for k in 1..steps {
        let date = ym(1992, 3).add_months(k);
        let v = from * (to / from).powf(k as f64 / steps as f64);
        out.push((date, (v * 100.0).round() / 100.0));
    }
    out.extend([
        (ym(2011, 9), 155.28),
        (ym(2011, 10), 156.28),
        (ym(2011, 11), 155.94),
        (ym(2011, 12), 156.59),
        (ym(2012, 1), 156.63),
        (ym(2012, 2), 156.66),
    ]);
    out
}

/// Writes the four-vintage industrial-production fixture (publications
/// January through April 2012, two-month lag) and returns the file path and
/// the expected first-release series.
pub fn write_ip_fixture(dir: &Path) -> Result<(PathBuf, Vec<(YearMonth, f64)>)> {
    fs::create_dir_all(dir)?;
    let master = ip_fixture_master();
    let dates: Vec<YearMonth> = master.iter().map(|&(d, _)| d).collect();
    let values: Vec<f64> = master.iter().map(|&(_, v)| v).collect();
    let vintages: Vec<YearMonth> = ym(2012, 1).range_to(ym(2012, 4)).collect();

    let mut out = String::from("obs_date");
    for v in &vintages {
        let _ = write!(out, ",{v}");
    }
    out.push('\n');
    for (i, date) in dates.iter().enumerate() {
        let _ = write!(out, "{date}");
        for v in &vintages {
            if *date <= v.add_months(-2) {
                let _ = write!(out, ",{:.2}", values[i]);
            } else {
                out.push(',');
            }
        }
        out.push('\n');
    }
    let path = dir.join("ip_first_release.csv");
    fs::write(&path, out)?;
    Ok((path, master))
}
