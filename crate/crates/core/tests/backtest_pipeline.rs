//! End-to-end pipeline checks on a small synthetic dataset.

use std::fs;
use std::path::Path;

use metalcast_core::backtest::{run_backtest, BacktestConfig, Overrides};
use metalcast_core::dates::ym;
use metalcast_core::synth::{generate_dataset, SynthConfig};

fn small_config(data_dir: &Path, seed: u64, workers: usize) -> BacktestConfig {
    let text = format!(
        r#"
seed = {seed}
workers = {workers}
manifest = "manifest.txt"
futures = "futures.csv"
surveys = "surveys.csv"
metals = ["copper", "zinc"]
window = 60
horizons = [1, 3, 6, 12]
first_origin = "2015-06"
last_origin = "2018-06"

[nowcast]
family = "rwd"

[evaluation]
mcs_replications = 300
mcs_block = 6

[pooling]
warmup = 12
screen_window = 12
alpha = 0.25
replications = 200
block = 6

[[models]]
id = "RW-D"
family = "rwd"

[[models]]
id = "AR(1)"
family = "ar"
p = 1

[[models]]
id = "ARDL(1,1)-IP"
family = "ardl"
p = 1
s = 1
predictors = ["IP"]

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
"#
    );
    BacktestConfig::from_toml(&text, data_dir, &Overrides::default()).unwrap()
}

fn make_data(dir: &Path) {
    let cfg = SynthConfig {
        seed: 11,
        panel_start: ym(2009, 1),
        first_vintage: ym(2015, 4),
        last_vintage: ym(2019, 12),
    };
    generate_dataset(dir, &cfg).unwrap();
}

#[test]
fn full_pipeline_produces_reports_and_files() {
    let dir = tempfile::tempdir().unwrap();
    make_data(dir.path());
    let mut config = small_config(dir.path(), 42, 2);
    let out = dir.path().join("out");
    config.out_dir = out.clone();
    let report = metalcast_core::backtest::run_and_emit(&config).unwrap();

    // every (metal, model, origin, horizon) either has a record or a ledger
    // entry; with this config everything should succeed
    let n_origins = ym(2018, 6).months_since(ym(2015, 6)) as usize + 1;
    let model_cells = 2 * 5 * n_origins * 4;
    let model_records = report
        .forecasts
        .iter()
        .filter(|r| !r.model.starts_with("pool") && r.model != "Futures" && r.model != "Professional Forecasters")
        .count();
    assert_eq!(model_records, model_cells, "errors: {:?}", report.errors);

    // model-free records appear only at their horizons
    for r in &report.forecasts {
        if r.model == "Futures" {
            assert_eq!(r.horizon, 3, "futures exist at h=3 only in this config");
        }
        if r.model == "Professional Forecasters" {
            assert!(r.horizon == 6 || r.horizon == 12);
        }
    }

    // evaluations cover both metals and all horizons
    assert_eq!(report.evaluations.len(), 2);
    for ev in &report.evaluations {
        assert_eq!(ev.ratio_tables.len(), 4);
        for t in &ev.ratio_tables {
            assert!(t.benchmark_rmspe > 0.0);
            for row in &t.rows {
                assert!(row.ratio.is_finite() && row.ratio > 0.0);
            }
        }
        assert!(!ev.mcs.is_empty());
        for (_, paths) in &ev.cumulative {
            for p in paths {
                let last = p.points.last().unwrap().1;
                assert!(last.is_finite());
            }
        }
        // pooled tables carry the three pooled rows
        assert!(!ev.pooled_tables.is_empty());
        for t in &ev.pooled_tables {
            let names: Vec<&str> = t.rows.iter().map(|r| r.model.as_str()).collect();
            assert!(names.contains(&"pool_all"));
            assert!(names.contains(&"pool_ssm25"));
            assert!(names.contains(&"pool_top2"));
        }
    }

    for file in [
        "forecast_table.csv",
        "ratio_table_copper.csv",
        "ratio_table_numeric_copper.csv",
        "pooling_copper.csv",
        "mcs_copper.json",
        "ratio_table_zinc.csv",
        "nowcast_horse_race.csv",
        "errors.log",
        "run_manifest.json",
    ] {
        assert!(out.join(file).exists(), "missing {file}");
    }
    // at least one cumulative path file per metal
    assert!(out.join("cumpath_copper_h1.csv").exists());

    // forecast table roundtrip
    let loaded =
        metalcast_core::backtest::read_forecast_csv(&out.join("forecast_table.csv")).unwrap();
    assert_eq!(loaded.len(), report.forecasts.len());
}

#[test]
fn reruns_and_worker_counts_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    make_data(dir.path());

    let emit_to = |out: &Path, workers: usize| {
        let mut config = small_config(dir.path(), 7, workers);
        config.out_dir = out.to_path_buf();
        metalcast_core::backtest::run_and_emit(&config).unwrap();
    };
    let out1 = dir.path().join("run1");
    let out2 = dir.path().join("run2");
    let out3 = dir.path().join("run3");
    emit_to(&out1, 1);
    emit_to(&out2, 1);
    emit_to(&out3, 4);

    let mut names: Vec<String> = fs::read_dir(&out1)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(!names.is_empty());
    for name in &names {
        if name == "run_manifest.json" {
            continue; // echoes worker count and out_dir by design
        }
        let a = fs::read(out1.join(name)).unwrap();
        let b = fs::read(out2.join(name)).unwrap();
        let c = fs::read(out3.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
        assert_eq!(a, c, "{name} differs across worker counts");
    }
}

#[test]
fn factor_dump_writes_one_csv_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    make_data(dir.path());
    let mut config = small_config(dir.path(), 3, 2);
    config.dump_factors = true;
    config.first_origin = Some(ym(2015, 6));
    config.last_origin = Some(ym(2015, 8));
    let out = dir.path().join("outf");
    config.out_dir = out.clone();
    let report = metalcast_core::backtest::run_and_emit(&config).unwrap();
    // 2 metals x 3 origins
    assert_eq!(report.factor_paths.len(), 6);
    let sample = out.join("factors_copper_2015-06.csv");
    let text = fs::read_to_string(&sample).unwrap();
    assert!(text.starts_with("date,factor_1,factor_2"));
    assert_eq!(text.lines().count(), 61); // header + window rows
}

#[test]
fn empty_report_emits_header_only_files() {
    use metalcast_core::backtest::{emit_report, BacktestReport, RunManifest};
    let dir = tempfile::tempdir().unwrap();
    let report = BacktestReport {
        forecasts: Vec::new(),
        evaluations: Vec::new(),
        pooled: Vec::new(),
        errors: Vec::new(),
        factor_paths: Vec::new(),
        manifest: RunManifest {
            version: "test".into(),
            seed: 0,
            workers: 1,
            config: serde_json::json!({}),
        },
        horse_race: None,
    };
    emit_report(&report, dir.path()).unwrap();
    let table = fs::read_to_string(dir.path().join("forecast_table.csv")).unwrap();
    assert_eq!(table, "metal,model,origin,horizon,growth,level,realized\n");
    let race = fs::read_to_string(dir.path().join("nowcast_horse_race.csv")).unwrap();
    assert_eq!(race, "variable,horizon,n,RW-D\n");
    assert_eq!(fs::read_to_string(dir.path().join("errors.log")).unwrap(), "");
    assert!(dir.path().join("run_manifest.json").exists());
}

#[test]
fn default_window_is_184_months() {
    use metalcast_core::backtest::DEFAULT_WINDOW;
    assert_eq!(DEFAULT_WINDOW, 184);
    let text = "seed = 1\nmanifest = \"m.txt\"\nmetals = [\"copper\"]\n[[models]]\nid = \"RW-D\"\nfamily = \"rwd\"\n";
    let cfg = BacktestConfig::from_toml(text, std::path::Path::new("."), &Overrides::default())
        .unwrap();
    assert_eq!(cfg.window, DEFAULT_WINDOW);
    assert_eq!(cfg.horizons.len(), 24);
}

#[test]
fn degenerate_single_model_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    make_data(dir.path());
    let text = r#"
seed = 5
manifest = "manifest.txt"
metals = ["copper"]
window = 60
horizons = [1, 3]
first_origin = "2015-06"
last_origin = "2017-06"

[[models]]
id = "RW-D"
family = "rwd"
"#;
    let config = BacktestConfig::from_toml(text, dir.path(), &Overrides::default()).unwrap();
    let report = run_backtest(&config).unwrap();
    // ratio tables contain only the benchmark level row
    for ev in &report.evaluations {
        for t in &ev.ratio_tables {
            assert!(t.rows.is_empty());
            assert!(t.benchmark_rmspe > 0.0);
        }
    }
}
