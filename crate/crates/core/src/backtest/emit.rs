//! Report emission: CSV/JSON artifacts of a backtest run. All numeric
//! formatting is fixed-precision so identical runs produce byte-identical
//! files.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::evaluation::RatioTable;
use crate::models::ForecastRecord;
use crate::vintage::Metal;

use super::BacktestReport;

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(String::new, |x| format!("{x:.prec$}"))
}

pub fn write_forecast_csv(records: &[ForecastRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["metal", "model", "origin", "horizon", "growth", "level", "realized"])
        .expect("in-memory write");
    for r in records {
        w.write_record([
            r.metal.to_string(),
            r.model.clone(),
            r.origin.to_string(),
            r.horizon.to_string(),
            fmt_opt(r.growth, 8),
            format!("{:.6}", r.level),
            fmt_opt(r.realized, 6),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8")
}

/// Reads a forecast table written by [`write_forecast_csv`].
pub fn read_forecast_csv(path: &Path) -> Result<Vec<ForecastRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::parse(0, format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::parse(line, e.to_string()))?;
        if rec.len() != 7 {
            return Err(Error::parse(line, format!("expected 7 fields, got {}", rec.len())));
        }
        let opt_f = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse()
                    .map(Some)
                    .map_err(|_| Error::parse(line, format!("bad number '{s}'")))
            }
        };
        let record = ForecastRecord {
            metal: rec[0]
                .parse()
                .map_err(|_| Error::parse(line, format!("bad metal '{}'", &rec[0])))?,
            model: rec[1].to_string(),
            origin: rec[2]
                .parse()
                .map_err(|_| Error::parse(line, format!("bad origin '{}'", &rec[2])))?,
            horizon: rec[3]
                .parse()
                .map_err(|_| Error::parse(line, format!("bad horizon '{}'", &rec[3])))?,
            growth: opt_f(&rec[4])?,
            level: rec[5]
                .parse()
                .map_err(|_| Error::parse(line, format!("bad level '{}'", &rec[5])))?,
            realized: opt_f(&rec[6])?,
        };
        record.validate().map_err(|e| e.context(&format!("line {line}")))?;
        out.push(record);
    }
    Ok(out)
}

fn rows_to_csv(rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8")
}

/// Renders a set of per-horizon ratio tables into the wide table layout:
/// benchmark row in raw RMSPE levels, model rows as star-annotated ratios.
fn ratio_tables_csv(tables: &[RatioTable], annotated: bool) -> String {
    let mut header = vec!["model".to_string()];
    header.extend(tables.iter().map(|t| format!("h{}", t.horizon)));
    let mut rows = vec![header];
    if !tables.is_empty() {
        let mut bench = vec![tables[0].benchmark.clone()];
        bench.extend(tables.iter().map(|t| format!("{:.6}", t.benchmark_rmspe)));
        rows.push(bench);
        // union of model names, in first-appearance order
        let mut models: Vec<&str> = Vec::new();
        for t in tables {
            for row in &t.rows {
                if !models.contains(&row.model.as_str()) {
                    models.push(&row.model);
                }
            }
        }
        for m in models {
            let mut out_row = vec![m.to_string()];
            for t in tables {
                out_row.push(match t.rows.iter().find(|r| r.model == m) {
                    Some(row) => {
                        if annotated {
                            format!("{:.4}{}", row.ratio, row.stars())
                        } else {
                            format!("{:.6}", row.ratio)
                        }
                    }
                    None => if annotated { "-".to_string() } else { String::new() },
                });
            }
            rows.push(out_row);
        }
    }
    rows_to_csv(rows)
}

fn cumpath_csv(paths: &[crate::evaluation::CumulativePath]) -> String {
    let mut header = vec!["date".to_string()];
    header.extend(paths.iter().map(|p| p.model.clone()));
    let mut rows = vec![header];
    if !paths.is_empty() {
        for i in 0..paths[0].points.len() {
            let mut row = vec![paths[0].points[i].0.to_string()];
            row.extend(paths.iter().map(|p| format!("{:.8}", p.points[i].1)));
            rows.push(row);
        }
    }
    rows_to_csv(rows)
}

fn metal_file(stem: &str, metal: Metal, ext: &str) -> String {
    format!("{stem}_{metal}.{ext}")
}

/// Writes the full report file set into `dir`.
pub fn emit_report(report: &BacktestReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;

    fs::write(
        dir.join("forecast_table.csv"),
        write_forecast_csv(&report.forecasts),
    )?;

    for ev in &report.evaluations {
        fs::write(
            dir.join(metal_file("ratio_table", ev.metal, "csv")),
            ratio_tables_csv(&ev.ratio_tables, true),
        )?;
        fs::write(
            dir.join(metal_file("ratio_table_numeric", ev.metal, "csv")),
            ratio_tables_csv(&ev.ratio_tables, false),
        )?;
        fs::write(
            dir.join(metal_file("pooling", ev.metal, "csv")),
            ratio_tables_csv(&ev.pooled_tables, true),
        )?;
        let mcs_json: Vec<serde_json::Value> = ev
            .mcs
            .iter()
            .map(|(h, r)| {
                serde_json::json!({
                    "horizon": h,
                    "models": r.models,
                    "p_values": r.p_values,
                    "elimination_order": r.elimination_order,
                    "ssm": r.ssm.iter().map(|(a, set)| serde_json::json!({
                        "alpha": a,
                        "models": set,
                    })).collect::<Vec<_>>(),
                    "replications": r.replications,
                    "block": r.block,
                    "seed": r.seed,
                })
            })
            .collect();
        fs::write(
            dir.join(metal_file("mcs", ev.metal, "json")),
            serde_json::to_string_pretty(&mcs_json)
                .map_err(|e| Error::Config(format!("mcs json: {e}")))?,
        )?;
        for (h, paths) in &ev.cumulative {
            fs::write(
                dir.join(format!("cumpath_{}_h{h}.csv", ev.metal)),
                cumpath_csv(paths),
            )?;
        }
    }

    for dump in &report.factor_paths {
        let mut rows = vec![{
            let mut h = vec!["date".to_string()];
            h.extend((1..=dump.factors.len()).map(|k| format!("factor_{k}")));
            h
        }];
        for (i, date) in dump.dates.iter().enumerate() {
            let mut row = vec![date.to_string()];
            row.extend(dump.factors.iter().map(|f| format!("{:.8}", f[i])));
            rows.push(row);
        }
        fs::write(
            dir.join(format!("factors_{}_{}.csv", dump.metal, dump.origin)),
            rows_to_csv(rows),
        )?;
    }

    let horse_race_csv = match &report.horse_race {
        Some(r) => r.to_csv(),
        None => "variable,horizon,n,RW-D\n".to_string(),
    };
    fs::write(dir.join("nowcast_horse_race.csv"), horse_race_csv)?;
    if let Some(r) = &report.horse_race {
        fs::write(
            dir.join("nowcast_horse_race.json"),
            serde_json::to_string_pretty(r)
                .map_err(|e| Error::Config(format!("horse race json: {e}")))?,
        )?;
    }

    let mut log = String::new();
    for e in &report.errors {
        log.push_str(&e.log_line());
        log.push('\n');
    }
    fs::write(dir.join("errors.log"), log)?;

    fs::write(
        dir.join("run_manifest.json"),
        serde_json::to_string_pretty(&report.manifest)
            .map_err(|e| Error::Config(format!("run manifest: {e}")))?,
    )?;
    Ok(())
}
