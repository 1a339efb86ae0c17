//! Model invariant suite: each check reports a measured value against a
//! bound. The CLI runs it as `validate-model`; the acceptance target reuses
//! the individual checks.

use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::Serialize;

use crate::aero::available_power;
use crate::convex::pwl::default_k_grid;
use crate::convex::{assemble_lti, discretize, fit_thrust_linearization, operating_region, ConvexTurbine, LtiModel};
use crate::empc::{EmpcConfig, EmpcController};
use crate::error::Result;
use crate::qp::{fixed_point_residual, solve_by_enumeration, QpBuilder, QpSettings, QpSolver, QuadraticProgram};
use crate::sim::WindProfile;
use crate::tower::{ModalState, ModalSystem};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub value: f64,
    pub bound: f64,
    #[serde(serialize_with = "secs")]
    pub elapsed: Duration,
    pub detail: String,
}

fn secs<S: serde::Serializer>(d: &Duration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

impl Check {
    fn new(name: &str, value: f64, bound: f64, passed: bool, start: Instant, detail: String) -> Self {
        Check { name: name.into(), passed, value, bound, elapsed: start.elapsed(), detail }
    }
}

/// Largest excess of the available-power envelope over the exact function
/// on its wind grid × `k_points` energies.
pub fn pwl_underestimation(turbine: &ConvexTurbine, k_points: usize) -> Result<Check> {
    let start = Instant::now();
    let env = &turbine.available_power;
    let ks = default_k_grid(&turbine.params, k_points);
    let mut worst = f64::NEG_INFINITY;
    let mut at = (0.0, 0.0);
    for &v in &env.wind_grid {
        for &k in &ks {
            let excess = env.eval(v, k) - available_power(v, k, &turbine.cp, &turbine.params)?;
            if excess > worst {
                worst = excess;
                at = (v, k);
            }
        }
    }
    let detail = format!(
        "{}x{} grid, worst excess {worst:.3e} W at v = {} m/s, K = {:.4e} J",
        env.wind_grid.len(),
        ks.len(),
        at.0,
        at.1
    );
    Ok(Check::new("pwl-underestimation", worst, 0.0, worst <= 0.0, start, detail))
}

fn rk4(model: &LtiModel, x: &DVector<f64>, u: &DVector<f64>, ts: f64, substeps: usize) -> DVector<f64> {
    let h = ts / substeps as f64;
    let mut x = x.clone();
    for _ in 0..substeps {
        let k1 = model.derivative(&x, u);
        let k2 = model.derivative(&(&x + &k1 * (0.5 * h)), u);
        let k3 = model.derivative(&(&x + &k2 * (0.5 * h)), u);
        let k4 = model.derivative(&(&x + &k3 * h), u);
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    x
}

/// Exact sampling against fine RK4 of the continuous model, over unit state
/// and input directions plus the operating point at `v_w`.
pub fn discretization_exactness(
    turbine: &ConvexTurbine,
    system: &ModalSystem,
    config: &EmpcConfig,
    v_w: f64,
) -> Result<Check> {
    let start = Instant::now();
    let p = &turbine.params;
    let region = operating_region(v_w, &turbine.cp, p, config.fit_band)?;
    let lin = fit_thrust_linearization(v_w, &turbine.ct, &turbine.cp, p, &region, config.fit_points)?;
    let lti = assemble_lti(system, &lin, p);
    let dm = discretize(&lti, config.sample_time)?;
    let n = lti.n_states();
    let mut cases: Vec<(DVector<f64>, DVector<f64>)> = Vec::new();
    for i in 0..n {
        let mut x = DVector::zeros(n);
        x[i] = 1.0;
        cases.push((x, DVector::zeros(2)));
    }
    for j in 0..2 {
        let mut u = DVector::zeros(2);
        u[j] = 1.0;
        cases.push((DVector::zeros(n), u));
    }
    let mut x_op = DVector::zeros(n);
    x_op[0] = (region.k_lo + region.k_hi) * 0.5 / crate::convex::ENERGY_UNIT;
    cases.push((x_op, DVector::from_column_slice(&[2.0, 1.9])));
    let mut worst = 0.0_f64;
    for (x, u) in &cases {
        let exact = rk4(&lti, x, u, config.sample_time, 1000);
        let zoh = dm.step(x, u);
        worst = worst.max((&zoh - &exact).amax() / exact.amax().max(1e-300));
    }
    let detail = format!("{} cases, {n} states, T_s = {} s", cases.len(), config.sample_time);
    Ok(Check::new("zoh-vs-rk4", worst, 1e-8, worst <= 1e-8, start, detail))
}

/// Random strictly convex QP with `n` variables and `m` rows, feasible by
/// construction around a random point. Rows mix equalities, one- and
/// two-sided inequalities.
pub fn random_qp<R: Rng>(rng: &mut R, n: usize, m: usize) -> QuadraticProgram {
    let mut b = QpBuilder::new(n);
    let l: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    for i in 0..n {
        for j in i..n {
            let mut v: f64 = (0..n).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                v += 0.1;
            }
            b.add_hessian(i, j, v);
        }
        b.add_linear(i, rng.random_range(-2.0..2.0));
    }
    let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n_eq = if m > 0 { rng.random_range(0..=m.min(n).min(2)) } else { 0 };
    for r in 0..m {
        let terms: Vec<(usize, f64)> = (0..n).map(|i| (i, rng.random_range(-1.0..1.0))).collect();
        let ax: f64 = terms.iter().map(|(i, a)| a * x0[*i]).sum();
        if r < n_eq {
            b.add_equality(&terms, ax);
            continue;
        }
        let lo = ax - rng.random_range(0.0..0.5);
        let hi = ax + rng.random_range(0.0..0.5);
        match rng.random_range(0..3) {
            0 => b.add_inequality(&terms, f64::NEG_INFINITY, hi),
            1 => b.add_inequality(&terms, lo, f64::INFINITY),
            _ => b.add_inequality(&terms, lo, hi),
        };
    }
    b.build().expect("random QP is well formed")
}

/// `count` random QPs with n, m ≤ 8 solved by the production solver and by
/// active-set enumeration; reports the largest difference in x and y.
pub fn qp_oracle(count: usize, seed: u64, tol: f64) -> Result<Check> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let settings = QpSettings { tolerance: 1e-10, max_iter: 50_000, ..QpSettings::default() };
    let mut worst = 0.0_f64;
    let mut failures = 0;
    for _ in 0..count {
        let n = rng.random_range(1..=8);
        let m = rng.random_range(0..=8);
        let qp = random_qp(&mut rng, n, m);
        let Some((xo, yo)) = solve_by_enumeration(&qp, 1e-9) else {
            failures += 1;
            continue;
        };
        let sol = QpSolver::new(settings.clone()).solve(&qp, None)?;
        if !sol.is_optimal() {
            failures += 1;
            continue;
        }
        let dx = sol.x.iter().zip(&xo).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let dy = sol.y.iter().zip(&yo).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(dx).max(dy);
    }
    let passed = failures == 0 && worst <= tol;
    let detail = format!("{count} problems, {failures} without a matching optimum, worst |Δx|,|Δy| = {worst:.3e}");
    Ok(Check::new("qp-oracle", worst, tol, passed, start, detail))
}

/// Fixed-point residual of the optimal steady state at every plateau.
pub fn steady_state_fixed_points(
    turbine: std::sync::Arc<ConvexTurbine>,
    system: &ModalSystem,
    config: &EmpcConfig,
    wind: &WindProfile,
) -> Result<Check> {
    let start = Instant::now();
    let mut ctrl = EmpcController::new(config.clone(), turbine, system)?;
    let mut worst = 0.0_f64;
    let mut missing = Vec::new();
    for pl in wind.plateaus() {
        match ctrl.steady_state(pl.speed)? {
            Some(ss) => {
                let model = ctrl.model().expect("model built with the steady state");
                worst = worst.max(fixed_point_residual(model, &ss.x, ss.u));
            }
            None => missing.push(pl.speed),
        }
    }
    let passed = missing.is_empty() && worst <= 1e-8;
    let detail =
        format!("{} plateaus, worst residual {worst:.3e}, no steady state at {missing:?}", wind.plateaus().len());
    Ok(Check::new("steady-state-fixed-point", worst, 1e-8, passed, start, detail))
}

/// Frequencies (Hz) of the `count` largest peaks of the velocity power
/// spectrum, summed over all locations, after a unit thrust impulse.
/// Ascending.
pub fn impulse_peaks(system: &ModalSystem, count: usize, dt: f64, samples: usize) -> Vec<f64> {
    let n = system.n_modes();
    let mut state = ModalState::zeros(n);
    state.v = system.input.clone();
    // one signal per location: a mode nearly invisible at the tip can
    // dominate further down
    let nl = system.n_locations();
    let mut signals: Vec<Vec<Complex<f64>>> = vec![Vec::with_capacity(samples); nl];
    for _ in 0..samples {
        for (sig, v) in signals.iter_mut().zip(system.project(&state.v)) {
            sig.push(Complex::new(v, 0.0));
        }
        state = system.step(&state, 0.0, dt);
    }
    let fft = FftPlanner::new().plan_fft_forward(samples);
    let mut power = vec![0.0; samples / 2];
    for sig in &mut signals {
        fft.process(sig);
        for (p, c) in power.iter_mut().zip(sig.iter()) {
            *p += c.norm_sqr();
        }
    }
    let mag: Vec<f64> = power.iter().map(|p| p.sqrt()).collect();
    let mut peaks: Vec<(f64, f64)> = (1..mag.len() - 1)
        .filter(|&i| mag[i] > mag[i - 1] && mag[i] >= mag[i + 1])
        .map(|i| {
            // parabolic refinement on the log magnitude
            let (a, b, c) = (mag[i - 1].ln(), mag[i].ln(), mag[i + 1].ln());
            let off = 0.5 * (a - c) / (a - 2.0 * b + c);
            ((i as f64 + off) / (samples as f64 * dt), mag[i])
        })
        .collect();
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut f: Vec<f64> = peaks.iter().take(count).map(|p| p.0).collect();
    f.sort_by(f64::total_cmp);
    f
}

pub fn modal_frequencies(system: &ModalSystem, tol: f64) -> Check {
    let start = Instant::now();
    let expected = &system.frequencies;
    let found = impulse_peaks(system, expected.len(), 0.01, 1 << 16);
    let worst = if found.len() == expected.len() {
        found.iter().zip(expected).map(|(f, e)| ((f - e) / e).abs()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    let detail = format!("peaks {found:.4?} Hz, expected {expected:.4?} Hz");
    Check::new("modal-frequencies", worst, tol, worst <= tol, start, detail)
}

/// Every model check on the given configuration.
pub fn run_suite(cfg: &crate::sim::SimConfig) -> Result<Vec<Check>> {
    let turbine = cfg.build_turbine()?;
    let system = cfg.tower.build()?;
    let v_mid = 10.0;
    Ok(vec![
        pwl_underestimation(&turbine, 200)?,
        discretization_exactness(&turbine, &system, &cfg.controller, v_mid)?,
        qp_oracle(200, 7, 1e-6)?,
        steady_state_fixed_points(turbine.clone(), &system, &cfg.controller, &cfg.wind)?,
        modal_frequencies(&system, 0.02),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_problems_are_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let qp = random_qp(&mut rng, 4, 6);
            assert!(solve_by_enumeration(&qp, 1e-9).is_some());
        }
    }

    #[test]
    fn undamped_peaks_sit_on_the_modes() {
        let sys = crate::tower::TowerParams::default().build().unwrap();
        let c = modal_frequencies(&sys, 0.02);
        assert!(c.passed, "{}", c.detail);
    }
}
