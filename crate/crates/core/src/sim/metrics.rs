//! Summary statistics of a run.

use serde::{Deserialize, Serialize};

use super::config::SimulationSettings;
use super::log::SimLog;
use super::wind::Plateau;
use crate::aero::TurbineParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauMetrics {
    pub speed: f64,
    pub start: f64,
    pub end: f64,
    /// Mean electrical power over the settled window (W).
    pub p_g: f64,
    /// Mean optimizer P_g over the settled window (W).
    pub p_g_command: f64,
    /// RMS of v_p per location over the transient window.
    pub rms_v_p: Vec<f64>,
    pub peak_v_p: Vec<f64>,
    pub rms_tfam_rate: Vec<f64>,
    /// Mean over the plateau of the per-solve tail distance.
    pub mean_tail_distance: f64,
    pub max_terminal_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub steps: usize,
    pub plateaus: Vec<PlateauMetrics>,
    pub energy_j: f64,
    pub mean_solve_time_s: f64,
    pub max_solve_time_s: f64,
    /// Steps solved only after dropping the terminal equality or not at all.
    pub degraded_steps: usize,
    pub held_steps: usize,
    pub rms_thrust_model_error_n: f64,
    pub max_terminal_gap: f64,
    /// max |η T_g ω(K*) − P_g*| / P_g*.
    pub max_torque_roundtrip_error: f64,
    /// max |P_r(Ψ(P_r*)) − P_r*| in W.
    pub max_pitch_roundtrip_error_w: f64,
}

fn rms(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x * x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        (s / n as f64).sqrt()
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Only plateaus the log covers completely are reported.
pub fn compute_metrics(
    log: &SimLog,
    plateaus: &[Plateau],
    settings: &SimulationSettings,
    ts: f64,
    p: &TurbineParams,
) -> Metrics {
    let recs = &log.records;
    let t_end = recs.last().map_or(0.0, |r| r.t + ts);
    let nl = log.n_locations;
    let eps = 1e-9 * ts;
    let mut out = Vec::new();
    for pl in plateaus.iter().filter(|pl| pl.end <= t_end + eps) {
        let inside = |a: f64, b: f64| recs.iter().filter(move |r| r.t >= a - eps && r.t < b - eps);
        let settled = pl.end - settings.steady_fraction * (pl.end - pl.start);
        let transient_end = (pl.start + settings.transient_window).min(pl.end);
        out.push(PlateauMetrics {
            speed: pl.speed,
            start: pl.start,
            end: pl.end,
            p_g: mean(inside(settled, pl.end).map(|r| r.p_elec)),
            p_g_command: mean(inside(settled, pl.end).map(|r| r.p_g)),
            rms_v_p: (0..nl).map(|l| rms(inside(pl.start, transient_end).map(|r| r.v_p[l]))).collect(),
            peak_v_p: (0..nl).map(|l| inside(pl.start, pl.end).map(|r| r.v_p[l].abs()).fold(0.0, f64::max)).collect(),
            rms_tfam_rate: (0..nl).map(|l| rms(inside(pl.start, pl.end).map(|r| r.tfam_rate[l]))).collect(),
            mean_tail_distance: mean(inside(pl.start, pl.end).map(|r| r.tail_distance).filter(|d| d.is_finite())),
            max_terminal_gap: inside(pl.start, pl.end)
                .map(|r| r.terminal_gap)
                .filter(|d| d.is_finite())
                .fold(0.0, f64::max),
        });
    }
    let secs: Vec<f64> = log.solve_times.iter().map(|d| d.as_secs_f64()).collect();
    let torque_err = recs
        .iter()
        .filter(|r| r.p_g > 0.0 && !r.held)
        .map(|r| (p.generator_efficiency * r.torque_g * p.omega_from_energy(r.k_pred) - r.p_g).abs() / r.p_g)
        .fold(0.0, f64::max);
    Metrics {
        steps: recs.len(),
        plateaus: out,
        energy_j: recs.iter().map(|r| r.p_elec * ts).sum(),
        mean_solve_time_s: mean(secs.iter().copied()),
        max_solve_time_s: secs.iter().copied().fold(0.0, f64::max),
        degraded_steps: recs.iter().filter(|r| r.fallback != "none").count(),
        held_steps: recs.iter().filter(|r| r.held).count(),
        rms_thrust_model_error_n: rms(recs.iter().map(|r| r.f_t - r.f_t_model)),
        max_terminal_gap: recs.iter().map(|r| r.terminal_gap).filter(|d| d.is_finite()).fold(0.0, f64::max),
        max_torque_roundtrip_error: torque_err,
        max_pitch_roundtrip_error_w: recs
            .iter()
            .filter(|r| !r.held)
            .map(|r| (r.p_r_model - r.p_r).abs())
            .fold(0.0, f64::max),
    }
}
