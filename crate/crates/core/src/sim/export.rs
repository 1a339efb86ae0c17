//! Files written by the CLI: the full time series, a metrics report and
//! small plot-data tables.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::experiments::{Ablation, Comparison, NpSweep, RunResult};
use super::log::SimLog;
use super::metrics::Metrics;
use crate::error::Result;

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `t`, then one column per run holding `f(record)`.
fn write_overlay(path: &Path, runs: &[&RunResult], f: impl Fn(&super::SimRecord) -> f64) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut head = vec!["t".to_string()];
    head.extend(runs.iter().map(|r| r.label.clone()));
    w.write_record(&head)?;
    let len = runs.iter().map(|r| r.outcome.log.len()).max().unwrap_or(0);
    for i in 0..len {
        let t = runs.iter().find_map(|r| r.outcome.log.records.get(i)).map(|r| r.t).unwrap_or_default();
        let mut row = vec![t.to_string()];
        row.extend(runs.iter().map(|r| r.outcome.log.records.get(i).map_or(String::new(), |rec| f(rec).to_string())));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct PlateauRow {
    speed: f64,
    start: f64,
    end: f64,
    p_g: f64,
    p_g_command: f64,
    mean_tail_distance: f64,
    max_terminal_gap: f64,
    rms_v_p: String,
    peak_v_p: String,
    rms_tfam_rate: String,
}

fn joined(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

/// Writes `timeseries.csv`, `solve_times.csv`, `metrics.json` and
/// `plateaus.csv` into `dir`, creating it if needed. Returns the paths.
pub fn export_run(log: &SimLog, metrics: &Metrics, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let paths: Vec<PathBuf> =
        ["timeseries.csv", "solve_times.csv", "metrics.json", "plateaus.csv"].iter().map(|n| dir.join(n)).collect();
    log.write_csv(&paths[0])?;
    log.write_solve_times(&paths[1])?;
    write_json(&paths[2], metrics)?;
    let rows: Vec<PlateauRow> = metrics
        .plateaus
        .iter()
        .map(|p| PlateauRow {
            speed: p.speed,
            start: p.start,
            end: p.end,
            p_g: p.p_g,
            p_g_command: p.p_g_command,
            mean_tail_distance: p.mean_tail_distance,
            max_terminal_gap: p.max_terminal_gap,
            rms_v_p: joined(&p.rms_v_p),
            peak_v_p: joined(&p.peak_v_p),
            rms_tfam_rate: joined(&p.rms_tfam_rate),
        })
        .collect();
    write_rows(&paths[3], &rows)?;
    Ok(paths)
}

fn export_runs(runs: &[RunResult], dir: &Path) -> Result<()> {
    for r in runs {
        let name: String =
            r.label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect();
        export_run(&r.outcome.log, &r.metrics, &dir.join(name))?;
    }
    Ok(())
}

/// Per-variant runs plus the overlays of power and location velocities.
pub fn export_comparison(c: &Comparison, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    export_runs(&c.runs, dir)?;
    write_rows(&dir.join("comparison.csv"), &c.rows.iter().map(FlatComparison::from).collect::<Vec<_>>())?;
    let runs: Vec<&RunResult> = c.runs.iter().collect();
    write_overlay(&dir.join("power.csv"), &runs, |r| r.p_elec)?;
    let nl = c.runs.first().map_or(0, |r| r.outcome.log.n_locations);
    for l in 0..nl {
        write_overlay(&dir.join(format!("velocity_z{}.csv", l + 1)), &runs, |r| r.v_p[l])?;
    }
    Ok(())
}

#[derive(Serialize)]
struct FlatComparison {
    speed: f64,
    variant: String,
    p_g: f64,
    p_g_delta: f64,
    rms_v_p: String,
    rms_reduction: String,
}

impl From<&super::experiments::ComparisonRow> for FlatComparison {
    fn from(r: &super::experiments::ComparisonRow) -> Self {
        FlatComparison {
            speed: r.speed,
            variant: r.variant.name().into(),
            p_g: r.p_g,
            p_g_delta: r.p_g_delta,
            rms_v_p: joined(&r.rms_v_p),
            rms_reduction: joined(&r.rms_reduction),
        }
    }
}

#[derive(Serialize)]
struct SolveTimeRow {
    horizon: usize,
    mean_solve_time_s: f64,
    max_solve_time_s: f64,
}

pub fn export_sweep(s: &NpSweep, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    export_runs(&s.runs, dir)?;
    write_rows(&dir.join("sweep.csv"), &s.rows)?;
    let times: Vec<SolveTimeRow> = s
        .runs
        .iter()
        .map(|r| SolveTimeRow {
            horizon: r.scenario.controller.horizon,
            mean_solve_time_s: r.metrics.mean_solve_time_s,
            max_solve_time_s: r.metrics.max_solve_time_s,
        })
        .collect();
    write_rows(&dir.join("solve_times_by_horizon.csv"), &times)?;
    let runs: Vec<&RunResult> = s.runs.iter().collect();
    write_overlay(&dir.join("power.csv"), &runs, |r| r.p_elec)?;
    write_overlay(&dir.join("rotor_speed.csv"), &runs, |r| r.omega_g)
}

pub fn export_ablation(a: &Ablation, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    export_runs(&[a.with.clone(), a.without.clone()], dir)?;
    write_rows(&dir.join("ablation.csv"), &a.rows)?;
    let runs = [&a.with, &a.without];
    write_overlay(&dir.join("tail_distance.csv"), &runs, |r| r.tail_distance)?;
    write_overlay(&dir.join("power.csv"), &runs, |r| r.p_elec)?;
    write_overlay(&dir.join("rotor_energy.csv"), &runs, |r| r.k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_run_exports_headers() {
        let dir = tempfile::tempdir().unwrap();
        let log = SimLog::new(2, 3);
        let m = super::super::compute_metrics(&log, &[], &Default::default(), 0.2, &Default::default());
        let paths = export_run(&log, &m, dir.path()).unwrap();
        assert!(paths.iter().all(|p| p.exists()));
        let ts = fs::read_to_string(&paths[0]).unwrap();
        assert_eq!(ts.lines().count(), 1);
        assert_eq!(ts.trim_end().split(',').count(), log.header().len());
    }
}
