//! Acceptance suite: every release criterion as a checked test with a
//! pass/fail line. Tolerances and runtime budgets are pinned in the
//! assertions themselves.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use metalcast_core::backtest::{self, BacktestConfig, BacktestReport, Overrides};
use metalcast_core::dates::{ym, YearMonth};
use metalcast_core::error::Error;
use metalcast_core::evaluation::{dm_test, mcs_procedure, LossMatrix, McsConfig, McsStatistic};
use metalcast_core::factors::{extract_factors, standardize_panel, FactorScale};
use metalcast_core::model_free::{
    cpi_index_projection, fixed_event_to_fixed_horizon, futures_implied_real_price,
    CpiProjection, FixedEventSurvey, FuturesQuote,
};
use metalcast_core::models::{direct_projection_fit, fit_var_equation};
use metalcast_core::nowcast::{
    ar_ols_fit, bar_posterior, bar_svo_posterior, nowcast_horse_race, BarPriors,
    HorseRaceWindow, McmcConfig, NowcastFamily, NowcastModelSpec,
};
use metalcast_core::rng::derive_rng;
use metalcast_core::series::MonthlySeries;
use metalcast_core::stats;
use metalcast_core::synth::{generate_dataset, write_ip_fixture, SynthConfig};
use metalcast_core::vintage::{
    ingest_vintage_csv, merge_first_release, ragged_edge_profile, Group, Metal, RealTimePanel,
    SeriesMeta, SourceFrequency, Transform, VariableVintages, Vintage,
};

fn pass(criterion: usize, what: &str) {
    println!("[PASS] criterion {criterion}: {what}");
}

fn meta(id: &str, lag: u32) -> SeriesMeta {
    SeriesMeta {
        id: id.into(),
        group: Group::EcAct,
        transform: Transform::DLog,
        publication_lag: lag,
        source_frequency: SourceFrequency::Monthly,
        metal: None,
    }
}

// ---------------------------------------------------------------------------
// criterion 1: publication-matrix fixture
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_first_release_fixture() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let (path, expected) = write_ip_fixture(dir.path()).unwrap();
    let vintages = ingest_vintage_csv(&path, &meta("IP", 2)).unwrap();
    assert_eq!(vintages.len(), 4);

    let merged = merge_first_release(&vintages).unwrap();
    assert_eq!(merged.start(), ym(1992, 1));
    assert_eq!(merged.end(), ym(2012, 2));
    // zero tolerance: merged diagonal equals the first-release master
    for (date, value) in &expected {
        assert_eq!(merged.get(*date), Some(*value), "diagonal differs at {date}");
    }
    assert_eq!(merged.get(ym(1992, 1)), Some(100.00));
    assert_eq!(merged.get(ym(2012, 2)), Some(156.66));

    let panel = RealTimePanel::new(vec![VariableVintages {
        meta: meta("IP", 2),
        vintages,
    }])
    .unwrap();
    for month in 1..=4u32 {
        let profile = ragged_edge_profile(&panel, ym(2012, month)).unwrap();
        assert_eq!(profile[0].1, 2, "IP missing-tail at vintage 2012-{month:02}");
    }

    assert!(
        started.elapsed() < Duration::from_secs(1),
        "fixture check took {:?}",
        started.elapsed()
    );
    pass(1, "first-release diagonal reproduced exactly, ragged edge = 2");
}

// ---------------------------------------------------------------------------
// criterion 2: nowcast horse race on an AR(1) panel
// ---------------------------------------------------------------------------

fn ar1_panel(seed: u64, t: usize, phi: f64, lag: u32) -> RealTimePanel {
    let mut rng = derive_rng(seed, &["acceptance", "ar1-panel"]);
    let mut master = vec![0.0];
    for _ in 1..t {
        let e: f64 = StandardNormal.sample(&mut rng);
        master.push(phi * master.last().unwrap() + e);
    }
    let start = ym(1995, 1);
    let mut vintages = Vec::new();
    for n in 60..=master.len() {
        vintages.push(Vintage {
            as_of: start.add_months(n as i32 - 1 + lag as i32),
            values: MonthlySeries::new(start, master[..n].to_vec()).unwrap(),
        });
    }
    RealTimePanel::new(vec![VariableVintages {
        meta: meta("X", lag),
        vintages,
    }])
    .unwrap()
}

#[test]
fn criterion_02_nowcast_horse_race() {
    let started = Instant::now();
    let models = vec![
        NowcastModelSpec::new(NowcastFamily::Rwd, 0),
        NowcastModelSpec::new(NowcastFamily::Ar, 0),
    ];
    let mut wins = 0;
    for seed in 0..50 {
        let panel = ar1_panel(seed, 300, 0.8, 2);
        let report = nowcast_horse_race(&panel, &models, &HorseRaceWindow::default()).unwrap();
        let h1 = &report.variables[0].rows[0];
        assert_eq!(h1.horizon, 1);
        if h1.cells[0].ratio < 1.0 {
            wins += 1;
        }
    }
    assert!(wins >= 40, "AR(1) beat RW-D at h=1 in only {wins}/50 seeds");

    // report schema: baseline column holds raw RMSFE levels, other columns
    // star-annotated ratio strings, one row per (variable, horizon)
    let panel = ar1_panel(99, 300, 0.8, 2);
    let models3 = vec![
        NowcastModelSpec::new(NowcastFamily::Rwd, 0),
        NowcastModelSpec::new(NowcastFamily::Ar, 0),
        NowcastModelSpec::new(NowcastFamily::ArAic, 0),
    ];
    let report = nowcast_horse_race(&panel, &models3, &HorseRaceWindow::default()).unwrap();
    assert_eq!(report.baseline, "RW-D");
    assert_eq!(report.models, vec!["AR(1)", "AR(AIC)"]);
    let rows = &report.variables[0].rows;
    assert_eq!(rows.iter().map(|r| r.horizon).collect::<Vec<_>>(), vec![1, 2]);
    for row in rows {
        assert!(row.baseline_rmsfe > 0.0);
        for cell in &row.cells {
            assert!(cell.ratio > 0.0);
        }
    }
    let csv = report.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "variable,horizon,n,RW-D,AR(1),AR(AIC)");
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 6);
        // baseline level parses as a plain number
        assert!(fields[3].parse::<f64>().is_ok(), "baseline cell '{}'", fields[3]);
        // ratio cells: number with optional stars
        for cell in &fields[4..] {
            let trimmed = cell.trim_end_matches('*');
            assert!(trimmed.parse::<f64>().is_ok(), "ratio cell '{cell}'");
            assert!(cell.len() - trimmed.len() <= 3, "too many stars in '{cell}'");
        }
    }

    assert!(
        started.elapsed() < Duration::from_secs(30),
        "horse race took {:?}",
        started.elapsed()
    );
    pass(2, "AR(1) ratio < 1 at h=1 in >= 80% of seeds; table schema verified");
}

// ---------------------------------------------------------------------------
// criterion 3: estimation oracles
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_normal_equations_oracles() {
    let started = Instant::now();
    let mut rng = derive_rng(303, &["acceptance", "oracles"]);
    let mut checked = 0;

    // plain OLS and direct projections
    for case in 0..50 {
        let t = rng.gen_range(40..=200);
        let k = rng.gen_range(2..=10);
        let h = rng.gen_range(1..=3);
        let mut x = DMatrix::zeros(t, k);
        let mut y = DVector::zeros(t);
        for i in 0..t {
            x[(i, 0)] = 1.0;
            for j in 1..k {
                x[(i, j)] = rng.gen_range(-1.0..1.0);
            }
            y[i] = rng.gen_range(-1.0..1.0);
        }
        if case % 2 == 0 {
            let fit = stats::ols(&x, &y).unwrap();
            let oracle = stats::oracle::normal_equations(&x, &y);
            for j in 0..k {
                assert!((fit.coeffs[j] - oracle[j]).abs() < 1e-8, "ols case {case}");
            }
        } else {
            let yv: Vec<f64> = y.iter().copied().collect();
            let fit = direct_projection_fit(&yv, &x, h).unwrap();
            let rows = t - h;
            let xa = x.rows(0, rows).into_owned();
            let ya = DVector::from_iterator(rows, yv[h..].iter().copied());
            let oracle = stats::oracle::normal_equations(&xa, &ya);
            for j in 0..k {
                assert!((fit.coeffs[j] - oracle[j]).abs() < 1e-8, "proj case {case}");
            }
        }
        checked += 1;
    }

    // AR fits
    for case in 0..25 {
        let t = rng.gen_range(60..=200);
        let p = rng.gen_range(1..=6);
        let y: Vec<f64> = (0..t).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let fit = ar_ols_fit(&y, p).unwrap();
        let rows = t - p;
        let mut x = DMatrix::zeros(rows, p + 1);
        let mut yv = DVector::zeros(rows);
        for (row, i) in (p..t).enumerate() {
            x[(row, 0)] = 1.0;
            for lag in 1..=p {
                x[(row, lag)] = y[i - lag];
            }
            yv[row] = y[i];
        }
        let oracle = stats::oracle::normal_equations(&x, &yv);
        assert!((fit.intercept - oracle[0]).abs() < 1e-8, "ar case {case}");
        for j in 0..p {
            assert!((fit.coeffs[j] - oracle[j + 1]).abs() < 1e-8, "ar case {case}");
        }
        checked += 1;
    }

    // VAR target equations
    for case in 0..25 {
        let t = rng.gen_range(60..=200);
        let p = rng.gen_range(1..=3);
        let h = rng.gen_range(1..=3);
        let a: Vec<f64> = (0..t).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..t).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..t).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let start = ym(2000, 1);
        let win = metalcast_core::models::DataWindow {
            metal: Metal::Copper,
            origin: start.add_months(t as i32 - 1),
            dates: start.range_to(start.add_months(t as i32 - 1)).collect(),
            target: a.clone(),
            origin_price: 100.0,
            predictors: vec![
                metalcast_core::models::PredictorColumn {
                    id: "copper".into(),
                    group: Group::Target,
                    values: a.clone(),
                },
                metalcast_core::models::PredictorColumn {
                    id: "B".into(),
                    group: Group::EcAct,
                    values: b.clone(),
                },
                metalcast_core::models::PredictorColumn {
                    id: "C".into(),
                    group: Group::Inventories,
                    values: c.clone(),
                },
            ],
            target_price_id: "copper".into(),
            inventory_id: Some("C".into()),
            factor_scale: FactorScale::OverN,
        };
        let endo = vec!["@target".to_string(), "B".to_string(), "C".to_string()];
        let (fit, _) = fit_var_equation(&win, p, &endo, &[], h).unwrap();
        // brute-force design: [1, p lags of (a, b, c)] rows p-1..t
        let series = [&a, &b, &c];
        let rows_all = t - (p - 1);
        let k = 1 + 3 * p;
        let mut x = DMatrix::zeros(rows_all, k);
        let mut yv = Vec::with_capacity(rows_all);
        for (row, i) in ((p - 1)..t).enumerate() {
            x[(row, 0)] = 1.0;
            for lag in 0..p {
                for (s_idx, s) in series.iter().enumerate() {
                    x[(row, 1 + lag * 3 + s_idx)] = s[i - lag];
                }
            }
            yv.push(a[i]);
        }
        let n = rows_all - h;
        let xa = x.rows(0, n).into_owned();
        let ya = DVector::from_iterator(n, yv[h..h + n].iter().copied());
        let oracle = stats::oracle::normal_equations(&xa, &ya);
        for j in 0..k {
            assert!((fit.coeffs[j] - oracle[j]).abs() < 1e-8, "var case {case}");
        }
        checked += 1;
    }

    assert_eq!(checked, 100);
    assert!(
        started.elapsed() < Duration::from_secs(10),
        "oracle suite took {:?}",
        started.elapsed()
    );
    pass(3, "100 random OLS/AR/VAR/projection fits match normal equations within 1e-8");
}

// ---------------------------------------------------------------------------
// criterion 4: PCA invariants
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_pca_invariants() {
    let mut rng = derive_rng(404, &["acceptance", "pca"]);
    for case in 0..100 {
        let t = rng.gen_range(30..=150);
        let n = rng.gen_range(5..=15);
        let cols: Vec<(String, Vec<f64>)> = (0..n)
            .map(|j| {
                (
                    format!("v{j}"),
                    (0..t).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                )
            })
            .collect();
        let panel = standardize_panel(&cols, &[]).unwrap();
        let r = rng.gen_range(1..=n.min(t - 1).min(4));
        let fm = extract_factors(&panel, r, FactorScale::OverN, vec![]).unwrap();
        let gram = &fm.loadings * fm.loadings.transpose() / n as f64;
        for i in 0..r {
            for j in 0..r {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (gram[(i, j)] - want).abs() < 1e-8,
                    "case {case}: gram[{i},{j}] = {}",
                    gram[(i, j)]
                );
            }
        }
        for w in fm.eigenvalues.windows(2) {
            assert!(w[0] >= w[1] - 1e-12, "eigenvalues not descending");
        }
    }

    // rank-1 panel
    let t = 80;
    let u: Vec<f64> = (0..t).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let cols: Vec<(String, Vec<f64>)> = (0..9)
        .map(|j| {
            let w: f64 = rng.gen_range(0.3..3.0) * if j % 3 == 0 { -1.0 } else { 1.0 };
            (format!("v{j}"), u.iter().map(|x| w * x).collect())
        })
        .collect();
    let panel = standardize_panel(&cols, &[]).unwrap();
    let fm = extract_factors(&panel, 2, FactorScale::OverN, vec![]).unwrap();
    assert!(fm.eigenvalues[1] < 1e-10, "second eigenvalue {}", fm.eigenvalues[1]);

    // full-basis reconstruction, 20 instances
    for case in 0..20 {
        let t = rng.gen_range(30..=80);
        let n = rng.gen_range(4..=10);
        let cols: Vec<(String, Vec<f64>)> = (0..n)
            .map(|j| {
                (
                    format!("v{j}"),
                    (0..t).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                )
            })
            .collect();
        let panel = standardize_panel(&cols, &[]).unwrap();
        let fm = extract_factors(&panel, n, FactorScale::OverN, vec![]).unwrap();
        let rebuilt = &fm.factors * &fm.loadings;
        for i in 0..t {
            for j in 0..n {
                assert!(
                    (rebuilt[(i, j)] - panel.data[(i, j)]).abs() < 1e-8,
                    "case {case}: reconstruction off at ({i},{j})"
                );
            }
        }
    }
    pass(4, "loading normalization, rank-1 collapse, and full-basis reconstruction hold");
}

// ---------------------------------------------------------------------------
// criterion 5: Diebold-Mariano test
// ---------------------------------------------------------------------------

/// Hand-written HAC formula, independent of the library path.
fn dm_oracle(a: &[f64], b: &[f64], h: usize) -> f64 {
    let t = a.len() as f64;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let dbar = d.iter().sum::<f64>() / t;
    let mut lrv = 0.0;
    for k in 0..h.min(d.len()) {
        let mut g = 0.0;
        for i in k..d.len() {
            g += (d[i] - dbar) * (d[i - k] - dbar);
        }
        g /= t;
        lrv += if k == 0 { g } else { 2.0 * (1.0 - k as f64 / h as f64) * g };
    }
    dbar / (lrv / t).sqrt()
}

#[test]
fn criterion_05_dm_test() {
    let mut rng = derive_rng(505, &["acceptance", "dm"]);
    let mut cases = 0;
    while cases < 20 {
        let h = [1usize, 3, 12][cases % 3];
        let t = rng.gen_range(60..=240);
        let a: Vec<f64> = (0..t)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                (1.0 + e).powi(2)
            })
            .collect();
        let b: Vec<f64> = (0..t)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                e * e
            })
            .collect();
        let r = dm_test(&a, &b, h).unwrap();
        if r.naive_fallback {
            continue; // oracle covers the HAC branch
        }
        let oracle = dm_oracle(&a, &b, h);
        assert!(
            (r.statistic - oracle).abs() < 1e-10,
            "case {cases} h={h}: {} vs {oracle}",
            r.statistic
        );
        // antisymmetry is exact
        let rev = dm_test(&b, &a, h).unwrap();
        assert_eq!(r.statistic.to_bits(), (-rev.statistic).to_bits());
        cases += 1;
    }
    let same = vec![1.5; 40];
    assert!(matches!(dm_test(&same, &same, 3), Err(Error::Degenerate(_))));
    pass(5, "DM statistic matches the HAC formula within 1e-10; antisymmetry exact");
}

// ---------------------------------------------------------------------------
// criterion 6: model confidence set
// ---------------------------------------------------------------------------

fn dominated_losses(seed: u64, t: usize) -> LossMatrix {
    let mut rng = derive_rng(seed, &["acceptance", "mcs"]);
    let dates: Vec<YearMonth> = (0..t).map(|i| ym(2016, 1).add_months(i as i32)).collect();
    let rows: Vec<Vec<f64>> = (0..t)
        .map(|_| {
            (0..3)
                .map(|j| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    10.0 + if j == 0 { 0.0 } else { 2.0 } + e
                })
                .collect()
        })
        .collect();
    LossMatrix::new(
        1,
        dates,
        vec!["good".into(), "bad1".into(), "bad2".into()],
        rows,
    )
    .unwrap()
}

#[test]
fn criterion_06_mcs_procedure() {
    let started = Instant::now();
    let cfg = |seed: u64| McsConfig {
        replications: 2000,
        block: 6,
        alphas: vec![0.10, 0.25],
        seed,
        statistic: McsStatistic::TMax,
    };

    let mut dominant_in_ssm = 0;
    let mut dominated_rejected = 0;
    for seed in 0..50 {
        let losses = dominated_losses(seed, 120);
        let r = mcs_procedure(&losses, &cfg(seed + 1000)).unwrap();
        if r.ssm_at(0.25).unwrap().contains(&"good".to_string()) {
            dominant_in_ssm += 1;
        }
        if r.p_value("bad1").unwrap() < 0.05 && r.p_value("bad2").unwrap() < 0.05 {
            dominated_rejected += 1;
        }
        // p-values weakly increasing along the elimination order
        let ps: Vec<f64> = r
            .elimination_order
            .iter()
            .map(|m| r.p_value(m).unwrap())
            .collect();
        for w in ps.windows(2) {
            assert!(w[0] <= w[1]);
        }
        assert_eq!(*ps.last().unwrap(), 1.0);
        // SSM(0.10) contains SSM(0.25)
        let loose = r.ssm_at(0.10).unwrap();
        for m in r.ssm_at(0.25).unwrap() {
            assert!(loose.contains(m));
        }
    }
    assert_eq!(dominant_in_ssm, 50, "dominant model left SSM(0.25)");
    assert!(
        dominated_rejected >= 45,
        "dominated models rejected in only {dominated_rejected}/50 seeds"
    );

    // exact ties: all retained with p = 1
    let col: Vec<f64> = (0..120).map(|i| 1.0 + (i % 7) as f64).collect();
    let dates: Vec<YearMonth> = (0..120).map(|i| ym(2016, 1).add_months(i)).collect();
    let rows: Vec<Vec<f64>> = col.iter().map(|&v| vec![v, v, v]).collect();
    let ties = LossMatrix::new(1, dates, vec!["a".into(), "b".into(), "c".into()], rows).unwrap();
    let r = mcs_procedure(&ties, &cfg(7)).unwrap();
    assert!(r.p_values.iter().all(|&p| p == 1.0));
    assert_eq!(r.ssm_at(0.25).unwrap().len(), 3);

    // worker-count invariance: 1 vs 8 workers, bit-identical
    let losses = dominated_losses(123, 120);
    let c = cfg(55);
    let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let pool8 = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
    let r1 = pool1.install(|| mcs_procedure(&losses, &c)).unwrap();
    let r8 = pool8.install(|| mcs_procedure(&losses, &c)).unwrap();
    assert_eq!(r1.elimination_order, r8.elimination_order);
    for (a, b) in r1.p_values.iter().zip(&r8.p_values) {
        assert_eq!(a.to_bits(), b.to_bits());
    }

    assert!(
        started.elapsed() < Duration::from_secs(60),
        "MCS suite took {:?}",
        started.elapsed()
    );
    pass(6, "dominant model always survives, dominated rejected, ties kept, worker-invariant");
}

// ---------------------------------------------------------------------------
// criterion 7: fixed-event interpolation
// ---------------------------------------------------------------------------

#[test]
fn criterion_07_fixed_event_interpolation() {
    // boundary: h = h1 returns the event value exactly
    let s = FixedEventSurvey {
        metal: Metal::Aluminum,
        survey_date: ym(2020, 1),
        events: vec![(ym(2020, 3), 100.0), (ym(2020, 6), 130.0)],
    };
    assert_eq!(fixed_event_to_fixed_horizon(&s, 2).unwrap(), 100.0);
    // the 2/3-1/3 case returns 110 exactly
    assert_eq!(fixed_event_to_fixed_horizon(&s, 3).unwrap(), 110.0);

    let mut rng = derive_rng(707, &["acceptance", "events"]);
    for _ in 0..1000 {
        let y1 = rng.gen_range(10.0..500.0);
        let y2 = rng.gen_range(10.0..500.0);
        let event1 = ym(2018, 3).add_months(3 * rng.gen_range(0..10));
        let h1: usize = rng.gen_range(1..=6);
        let off = rng.gen_range(0..=3);
        let s = FixedEventSurvey {
            metal: Metal::Zinc,
            survey_date: event1.add_months(-(h1 as i32)),
            events: vec![(event1, y1), (event1.add_months(3), y2)],
        };
        let y = fixed_event_to_fixed_horizon(&s, h1 + off).unwrap();
        let d = 3.0;
        let w1 = (d - off as f64) / d;
        let w2 = (d - (3.0 - off as f64)) / d;
        assert!((w1 + w2 - 1.0).abs() < 1e-12, "weights do not sum to one");
        assert!((y - (w1 * y1 + w2 * y2)).abs() < 1e-9 * y.abs().max(1.0));
    }
    pass(7, "boundary and 2/3-1/3 cases exact; weights sum to one on 1000 brackets");
}

// ---------------------------------------------------------------------------
// criterion 8: futures formula
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_futures_formula() {
    // worked example: F = 10000, p_T = 2.0, g = 0.05 (base level 1.0)
    let quote = FuturesQuote {
        metal: Metal::Copper,
        quote_date: ym(2020, 1),
        maturity_months: 15,
        price: 10_000.0,
    };
    let proj = CpiProjection {
        current: 2.0,
        horizon: 15,
        growth: 0.05,
        projected: 2.0 * 1.05,
    };
    let p = futures_implied_real_price(&quote, &proj, 1.0).unwrap();
    assert!((p - 4761.904761904762).abs() < 1e-9);

    let mut rng = derive_rng(808, &["acceptance", "futures"]);
    for _ in 0..1000 {
        let f = rng.gen_range(100.0..30000.0);
        let cur = rng.gen_range(0.5..3.0);
        let g = rng.gen_range(-0.1..0.4);
        let base = rng.gen_range(0.5..3.0);
        let k = rng.gen_range(0.1..8.0);
        let h = if rng.gen_bool(0.5) { 3 } else { 15 };
        let q = FuturesQuote {
            metal: Metal::Nickel,
            quote_date: ym(2019, 6),
            maturity_months: h,
            price: f,
        };
        let proj = CpiProjection { current: cur, horizon: h, growth: g, projected: cur * (1.0 + g) };
        let p0 = futures_implied_real_price(&q, &proj, base).unwrap();
        // homogeneous of degree 1 in F
        let p1 =
            futures_implied_real_price(&FuturesQuote { price: k * f, ..q }, &proj, base).unwrap();
        assert!((p1 - k * p0).abs() <= 1e-9 * p0.abs().max(1.0));
        // homogeneous of degree -1 in the projected deflator
        let proj_k = CpiProjection {
            current: k * cur,
            projected: k * cur * (1.0 + g),
            ..proj
        };
        let p2 = futures_implied_real_price(&q, &proj_k, base).unwrap();
        assert!((p2 - p0 / k).abs() <= 1e-9 * p0.abs().max(1.0));
        // direct-division oracle
        assert!((p0 - f / (proj.projected / base)).abs() <= 1e-9 * p0.abs().max(1.0));
    }
    pass(8, "futures formula homogeneity and the worked example hold");
}

// ---------------------------------------------------------------------------
// criteria 9-11 share one full synthetic backtest
// ---------------------------------------------------------------------------

struct Artifacts {
    report: BacktestReport,
    out_dirs: [PathBuf; 3],
    timed_run: Duration,
    #[allow(dead_code)]
    dir: tempfile::TempDir,
}

fn full_config_text(seed: u64, workers: usize) -> String {
    format!(
        r#"
seed = {seed}
workers = {workers}
manifest = "manifest.txt"
futures = "futures.csv"
surveys = "surveys.csv"
metals = ["aluminum", "copper", "nickel", "zinc"]
window = 120
horizons = "1..24"
first_origin = "2015-04"
last_origin = "2020-03"

[nowcast]
family = "barsv"
draws = 800
burn_in = 400
window = 120

[evaluation]
mcs_replications = 2000
mcs_block = 6
alphas = [0.10, 0.25]

[pooling]
warmup = 12
screen_window = 12
alpha = 0.25
replications = 300
block = 6

[[models]]
id = "RW-D"
family = "rwd"

[[models]]
id = "AR(1)"
family = "ar"
p = 1

[[models]]
id = "AR(AIC)"
family = "ar"
p = "aic"
max_lag = 6

[[models]]
id = "ARDL(1,1)-IP"
family = "ardl"
p = 1
s = 1
predictors = ["IP"]

[[models]]
id = "ARDL(1,1)-NO-M"
family = "ardl"
p = 1
s = 1
predictors = ["NO-M"]

[[models]]
id = "ARDL(1)-EcAct"
family = "ardl"
p = 1
s = 1
group = "ec_act"

[[models]]
id = "VAR(1)"
family = "var"
p = 1

[[models]]
id = "ARDI(1,1)-1F"
family = "ardi"
p = 1
s = 1
factors = 1

[[models]]
id = "ARDI(1,1)-2F"
family = "ardi"
p = 1
s = 1
factors = 2

[[models]]
id = "FAVAR(1)-1F"
family = "favar"
p = 1
factors = 1

[[models]]
id = "FAVAR(1)-2F"
family = "favar"
p = 1
factors = 2
"#
    )
}

fn artifacts() -> &'static Artifacts {
    static ARTIFACTS: OnceLock<Artifacts> = OnceLock::new();
    ARTIFACTS.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("data");
        generate_dataset(
            &data,
            &SynthConfig {
                seed: 2024,
                panel_start: ym(2004, 6),
                first_vintage: ym(2015, 4),
                last_vintage: ym(2022, 6),
            },
        )
        .unwrap();

        let run = |out: &Path, workers: usize| -> (BacktestReport, Duration) {
            let mut cfg = BacktestConfig::from_toml(
                &full_config_text(99, workers),
                &data,
                &Overrides::default(),
            )
            .unwrap();
            cfg.out_dir = out.to_path_buf();
            let t0 = Instant::now();
            let report = backtest::run_and_emit(&cfg).unwrap();
            (report, t0.elapsed())
        };

        let out1 = dir.path().join("run1");
        let out2 = dir.path().join("run2");
        let out3 = dir.path().join("run3");
        let (report, timed_run) = run(&out1, 4);
        let (_r2, _) = run(&out2, 4);
        let (_r3, _) = run(&out3, 1);
        Artifacts {
            report,
            out_dirs: [out1, out2, out3],
            timed_run,
            dir,
        }
    })
}

#[test]
fn criterion_09_pooling_jensen_bound_and_table() {
    let art = artifacts();
    let report = &art.report;
    // member levels lookup
    let mut levels: BTreeMap<(Metal, &str, YearMonth, usize), f64> = BTreeMap::new();
    for r in &report.forecasts {
        levels.insert((r.metal, r.model.as_str(), r.origin, r.horizon), r.level);
    }
    let mut checked = 0;
    for p in &report.pooled {
        let rec = &p.record;
        let member_levels: Vec<f64> = p
            .members
            .iter()
            .map(|m| levels[&(rec.metal, m.as_str(), rec.origin, rec.horizon)])
            .collect();
        // convex hull, exact
        let lo = member_levels.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = member_levels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(rec.level >= lo && rec.level <= hi, "pooled level outside member hull");
        if let Some(truth) = rec.realized {
            // Jensen: pooled squared error <= mean member squared error
            let pooled_sq = (rec.level - truth) * (rec.level - truth);
            let mean_sq = member_levels
                .iter()
                .map(|l| (l - truth) * (l - truth))
                .sum::<f64>()
                / member_levels.len() as f64;
            assert!(
                pooled_sq <= mean_sq,
                "Jensen bound violated at {} {} h{}: {pooled_sq} > {mean_sq}",
                rec.metal,
                rec.origin,
                rec.horizon
            );
            checked += 1;
        }
    }
    assert!(checked > 1000, "only {checked} pooled cells had realizations");

    // pooling table format: SSM25 and Top-2 rows at the report horizons
    for metal in Metal::ALL {
        let path = art.out_dirs[0].join(format!("pooling_{metal}.csv"));
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert_eq!(
            header, "model,h1,h3,h6,h9,h12,h15,h18,h21,h24",
            "pooling table horizons for {metal}"
        );
        let rows: Vec<&str> = lines.collect();
        assert!(rows[0].starts_with("RW-D,"), "benchmark level row first");
        assert!(rows.iter().any(|r| r.starts_with("pool_ssm25,")));
        assert!(rows.iter().any(|r| r.starts_with("pool_top2,")));
    }
    pass(9, "Jensen bound and convex hull hold for every pooled cell; table format correct");
}

#[test]
fn criterion_10_end_to_end_determinism_and_runtime() {
    let art = artifacts();
    assert!(
        art.timed_run < Duration::from_secs(60),
        "full backtest took {:?}",
        art.timed_run
    );
    // model count sanity: 11 configured models plus futures/surveys streams
    let models: std::collections::BTreeSet<&str> = art
        .report
        .forecasts
        .iter()
        .map(|r| r.model.as_str())
        .collect();
    assert!(models.len() >= 13, "only {} model streams", models.len());
    assert!(models.contains("ARDI(1,1)-2F") && models.contains("FAVAR(1)-1F"));

    let [out1, out2, out3] = &art.out_dirs;
    let mut names: Vec<String> = std::fs::read_dir(out1)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(names.len() > 10);
    for name in &names {
        if name == "run_manifest.json" {
            continue; // provenance echo includes the worker count by design
        }
        let a = std::fs::read(out1.join(name)).unwrap();
        let b = std::fs::read(out2.join(name)).unwrap();
        let c = std::fs::read(out3.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
        assert_eq!(a, c, "{name} differs between 4 and 1 workers");
    }
    pass(10, "full synthetic backtest < 60 s and byte-identical across runs and worker counts");
}

#[test]
fn criterion_11_cumulative_ratio_paths() {
    let art = artifacts();
    let mut checked = 0;
    for ev in &art.report.evaluations {
        for (h, paths) in &ev.cumulative {
            let table = ev
                .ratio_tables
                .iter()
                .find(|t| t.horizon == *h)
                .expect("table for horizon");
            for path in paths {
                let row = table
                    .rows
                    .iter()
                    .find(|r| r.model == path.model)
                    .expect("row for model");
                let last = path.points.last().unwrap().1;
                assert!(
                    (last - row.ratio).abs() < 1e-12,
                    "{} h{h} {}: path end {last} vs table {}",
                    ev.metal,
                    path.model,
                    row.ratio
                );
                checked += 1;
            }
        }
    }
    assert!(checked > 100, "only {checked} paths checked");

    // paths start after the 12-period skip: first point is the 13th origin
    let ev = &art.report.evaluations[0];
    let (h, paths) = &ev.cumulative[0];
    let table_dates = {
        // reconstruct the evaluation dates from the forecast table
        let mut dates: Vec<YearMonth> = art
            .report
            .forecasts
            .iter()
            .filter(|r| {
                r.metal == ev.metal
                    && r.model == "RW-D"
                    && r.horizon == *h
                    && r.realized.is_some()
            })
            .map(|r| r.origin)
            .collect();
        dates.sort();
        dates
    };
    for path in paths {
        assert_eq!(path.points.len(), table_dates.len() - 12);
        assert_eq!(path.points[0].0, table_dates[12]);
    }
    pass(11, "cumulative paths end at the full-sample ratio and start after the skip");
}

// ---------------------------------------------------------------------------
// criterion 12: Bayesian samplers
// ---------------------------------------------------------------------------

#[test]
fn criterion_12_bayesian_samplers() {
    // flat-prior BAR posterior mean vs OLS within 3 MC standard errors
    let mut rng = derive_rng(1212, &["acceptance", "bar-data"]);
    let mut y = vec![0.0];
    for _ in 1..200 {
        let e: f64 = StandardNormal.sample(&mut rng);
        y.push(0.3 + 0.6 * y.last().unwrap() + e);
    }
    let mcmc = McmcConfig { draws: 4000, burn_in: 1000, seed: 31 };
    let priors = BarPriors { coef_var: 1e10, ..BarPriors::default() };
    let mut srng = derive_rng(mcmc.seed, &["acceptance", "bar"]);
    let post = bar_posterior(&y, &mcmc, &priors, 1, &mut srng).unwrap();
    let ols = ar_ols_fit(&y, 1).unwrap();
    for (i, target) in [ols.intercept, ols.coeffs[0]].iter().enumerate() {
        let mc_se = post.coef_sd[i] / (mcmc.draws as f64).sqrt();
        assert!(
            (post.coef_mean[i] - target).abs() < 3.0 * mc_se,
            "coef {i}: {} vs OLS {target} (3 mc-se = {})",
            post.coef_mean[i],
            3.0 * mc_se
        );
    }

    // SVo flags an injected 10-sigma outlier as the max-probability date
    let mut hits = 0;
    for seed in 0..50u64 {
        let mut rng = derive_rng(seed, &["acceptance", "svo-data"]);
        let mut y = vec![0.0];
        for _ in 1..150 {
            let e: f64 = StandardNormal.sample(&mut rng);
            y.push(0.5 * y.last().unwrap() + e);
        }
        let spike_at = 90;
        y[spike_at] += 10.0;
        let mcmc = McmcConfig { draws: 1000, burn_in: 500, seed: seed + 5000 };
        let mut srng = derive_rng(mcmc.seed, &["acceptance", "svo"]);
        let post = bar_svo_posterior(&y, &mcmc, &BarPriors::default(), 1, &mut srng).unwrap();
        let probs = post.outlier_prob.unwrap();
        let max_idx = probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap();
        if max_idx == spike_at - 1 {
            hits += 1;
        }
    }
    assert!(hits >= 45, "outlier flagged as max-probability date in {hits}/50 seeds");
    pass(12, "flat-prior BAR matches OLS within MC error; SVo pins the injected outlier");
}

// ---------------------------------------------------------------------------
// supporting check: CPI projection on a window (shared by model-free tests)
// ---------------------------------------------------------------------------

#[test]
fn cpi_projection_window_consistency() {
    let vals: Vec<f64> = (0..60).map(|i| 1.0 * 1.002f64.powi(i)).collect();
    let cpi = MonthlySeries::new(ym(2014, 1), vals).unwrap();
    for h in [3usize, 15] {
        let p = cpi_index_projection(&cpi, h).unwrap();
        let g = 1.002f64.powi(h as i32) - 1.0;
        assert!((p.growth - g).abs() < 1e-10);
    }
}
