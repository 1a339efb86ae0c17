//! Multi-run experiments: controller comparison, horizon sweep and the
//! terminal-constraint ablation. Runs are independent and execute on a
//! bounded pool of scoped threads.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use log::info;
use serde::Serialize;

use super::metrics::{compute_metrics, Metrics};
use super::runner::{run_simulation, Scenario, SimOutcome};
use crate::empc::Variant;
use crate::error::{Error, Result};

/// Environment variable capping the number of concurrent runs.
pub const THREADS_ENV: &str = "WT_EMPC_THREADS";

pub fn max_threads() -> usize {
    let hw = std::thread::available_parallelism().map_or(1, |n| n.get());
    match std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        Some(n) if n > 0 => n,
        _ => hw,
    }
}

/// One finished run of an experiment.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub label: String,
    pub scenario: Scenario,
    pub outcome: SimOutcome,
    pub metrics: Metrics,
    /// Wall-clock time of the whole closed-loop run.
    pub wall_time: Duration,
}

/// Runs every scenario, at most `threads` at a time, and returns the results
/// in input order.
pub fn run_all(jobs: Vec<(String, Scenario)>, threads: usize) -> Result<Vec<RunResult>> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<RunResult>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let workers = threads.clamp(1, jobs.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((label, sc)) = jobs.get(i) else { break };
                info!("starting run '{label}'");
                let t0 = Instant::now();
                let res = run_simulation(sc).map(|outcome| {
                    let metrics = compute_metrics(
                        &outcome.log,
                        &sc.wind.plateaus(),
                        &sc.settings,
                        sc.controller.sample_time,
                        &sc.turbine.params,
                    );
                    RunResult { label: label.clone(), scenario: sc.clone(), outcome, metrics, wall_time: t0.elapsed() }
                });
                *slots[i].lock().unwrap() = Some(res);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().unwrap().unwrap_or_else(|| Err(Error::Config("run did not execute".into()))))
        .collect()
}

fn relative(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        (a - b) / b
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub speed: f64,
    pub variant: Variant,
    pub p_g: f64,
    /// (P_g − P_g,baseline) / P_g,baseline on the settled window.
    pub p_g_delta: f64,
    pub rms_v_p: Vec<f64>,
    /// 1 − RMS / RMS_baseline per location.
    pub rms_reduction: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub baseline: Variant,
    pub runs: Vec<RunResult>,
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn run(&self, v: Variant) -> Option<&RunResult> {
        self.runs.iter().find(|r| r.scenario.controller.variant == v)
    }

    pub fn row(&self, v: Variant, speed: f64) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.variant == v && (r.speed - speed).abs() < 1e-9)
    }
}

/// Same scenario under each variant. The baseline for the deltas is
/// no-damping when present, otherwise the first variant.
pub fn compare_controllers(base: &Scenario, variants: &[Variant], threads: usize) -> Result<Comparison> {
    if variants.is_empty() {
        return Err(Error::Config("no controller variants to compare".into()));
    }
    let jobs = variants
        .iter()
        .map(|&v| {
            let mut sc = base.clone();
            sc.controller.variant = v;
            (v.name().to_string(), sc)
        })
        .collect();
    let runs = run_all(jobs, threads)?;
    let baseline = if variants.contains(&Variant::NoDamping) { Variant::NoDamping } else { variants[0] };
    let b = &runs[variants.iter().position(|v| *v == baseline).unwrap()].metrics;
    let mut rows = Vec::new();
    for run in &runs {
        for pm in &run.metrics.plateaus {
            let Some(bp) = b.plateaus.iter().find(|p| p.start == pm.start) else { continue };
            rows.push(ComparisonRow {
                speed: pm.speed,
                variant: run.scenario.controller.variant,
                p_g: pm.p_g,
                p_g_delta: relative(pm.p_g, bp.p_g),
                rms_v_p: pm.rms_v_p.clone(),
                rms_reduction: pm
                    .rms_v_p
                    .iter()
                    .zip(&bp.rms_v_p)
                    .map(|(a, b)| if *b > 0.0 { 1.0 - a / b } else { 0.0 })
                    .collect(),
            });
        }
    }
    Ok(Comparison { baseline, runs, rows })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub speed: f64,
    pub horizon: usize,
    pub p_g: f64,
    /// Relative to the longest horizon in the sweep.
    pub p_g_delta: f64,
}

#[derive(Debug, Clone)]
pub struct NpSweep {
    pub horizons: Vec<usize>,
    pub runs: Vec<RunResult>,
    pub rows: Vec<SweepRow>,
}

impl NpSweep {
    pub fn mean_solve_times(&self) -> Vec<(usize, f64)> {
        self.runs.iter().map(|r| (r.scenario.controller.horizon, r.metrics.mean_solve_time_s)).collect()
    }
}

pub fn np_sweep(base: &Scenario, horizons: &[usize], threads: usize) -> Result<NpSweep> {
    if horizons.is_empty() {
        return Err(Error::Config("empty horizon list".into()));
    }
    let jobs = horizons
        .iter()
        .map(|&n| {
            let mut sc = base.clone();
            sc.controller.horizon = n;
            (format!("N_p={n}"), sc)
        })
        .collect();
    let runs = run_all(jobs, threads)?;
    let longest = horizons.iter().enumerate().max_by_key(|(_, n)| **n).unwrap().0;
    let reference = &runs[longest].metrics;
    let mut rows = Vec::new();
    for (run, &n) in runs.iter().zip(horizons) {
        for pm in &run.metrics.plateaus {
            let r = reference.plateaus.iter().find(|p| p.start == pm.start).map_or(f64::NAN, |p| p.p_g);
            rows.push(SweepRow { speed: pm.speed, horizon: n, p_g: pm.p_g, p_g_delta: relative(pm.p_g, r) });
        }
    }
    Ok(NpSweep { horizons: horizons.to_vec(), runs, rows })
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub speed: f64,
    pub tail_with: f64,
    pub tail_without: f64,
    pub p_g_with: f64,
    pub p_g_without: f64,
    pub max_terminal_gap: f64,
}

#[derive(Debug, Clone)]
pub struct Ablation {
    pub with: RunResult,
    pub without: RunResult,
    pub rows: Vec<AblationRow>,
}

/// Two runs that differ only in the terminal equality.
pub fn terminal_ablation(base: &Scenario, threads: usize) -> Result<Ablation> {
    let mut with = base.clone();
    with.controller.terminal_constraint = true;
    let mut without = base.clone();
    without.controller.terminal_constraint = false;
    let mut runs = run_all(vec![("terminal".into(), with), ("free-end".into(), without)], threads)?;
    let without = runs.pop().unwrap();
    let with = runs.pop().unwrap();
    let rows = with
        .metrics
        .plateaus
        .iter()
        .filter_map(|a| {
            let b = without.metrics.plateaus.iter().find(|p| p.start == a.start)?;
            Some(AblationRow {
                speed: a.speed,
                tail_with: a.mean_tail_distance,
                tail_without: b.mean_tail_distance,
                p_g_with: a.p_g,
                p_g_without: b.p_g,
                max_terminal_gap: a.max_terminal_gap,
            })
        })
        .collect();
    Ok(Ablation { with, without, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{SimConfig, WindProfile};

    fn short() -> Scenario {
        let mut cfg = SimConfig::default();
        cfg.controller.horizon = 10;
        cfg.wind = WindProfile::constant(8.0, 4.0).unwrap();
        Scenario::from_config(&cfg).unwrap()
    }

    #[test]
    fn identical_variants_give_zero_deltas() {
        let c = compare_controllers(&short(), &[Variant::MultiMode, Variant::MultiMode], 2).unwrap();
        assert_eq!(c.runs.len(), 2);
        for r in &c.rows {
            assert_eq!(r.p_g_delta, 0.0);
            assert!(r.rms_reduction.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn results_keep_input_order() {
        let s = np_sweep(&short(), &[4, 1, 6], 3).unwrap();
        let order: Vec<usize> = s.runs.iter().map(|r| r.scenario.controller.horizon).collect();
        assert_eq!(order, vec![4, 1, 6]);
        assert!(s.runs.iter().all(|r| r.outcome.aborted.is_none()));
    }
}
