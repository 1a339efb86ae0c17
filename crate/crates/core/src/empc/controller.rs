//! Receding-horizon controller: state reconstruction, model refresh,
//! FHOCP solve with graceful degradation and the actuator mapping.

use std::sync::Arc;
use std::time::Duration;

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::config::{EmpcConfig, Variant};
use super::fhocp::{assemble_fhocp, FhocpData, FhocpLayout, Trajectory};
use super::objective::velocity_weight;
use crate::aero::pitch_inverse_saturated;
use crate::convex::{
    assemble_lti, build_constraints, discretize, fit_thrust_linearization, operating_region, ConvexTurbine,
    DiscreteModel, ThrustLinearization, ENERGY_UNIT, POWER_UNIT,
};
use crate::error::{Error, Result};
use crate::qp::{solve_steady_state, QpSolver, QpStatus, QuadraticProgram, SteadyObjective, SteadyState, WarmStart};
use crate::tower::ModalSystem;

/// Sampled plant outputs. Tower quantities are given at every location of
/// the tower model, base included.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurements {
    pub omega_g: f64,
    pub x_p: Vec<f64>,
    pub v_p: Vec<f64>,
}

/// Actuator command with the optimizer values it came from. SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControlCommand {
    pub torque_g: f64,
    pub pitch: f64,
    /// P_r*(0) in W.
    pub p_r: f64,
    /// P_g*(0) in W.
    pub p_g: f64,
    /// One-step-ahead predicted kinetic energy in J.
    pub k_pred: f64,
    /// True when the previous command was repeated after a failed solve.
    pub held: bool,
}

/// How the last step was solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fallback {
    None,
    /// Solved after dropping the terminal equality.
    NoTerminal,
    /// Previous command repeated.
    Hold,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepInfo {
    pub status: QpStatus,
    pub iterations: usize,
    #[serde(skip)]
    pub solve_time: Duration,
    pub kkt_residual: f64,
    pub eps: f64,
    /// ‖x̄*(N) − x_s‖∞, NaN without a steady state.
    pub terminal_gap: f64,
    /// max over the tail half of ‖x̄*(q) − x_s‖∞.
    pub tail_distance: f64,
    pub terminal_enforced: bool,
    pub fallback: Fallback,
    /// Worst bound violation of the shifted warm start in the new problem.
    pub warm_violation: f64,
    /// Torque had to be clipped to its limits.
    pub torque_clipped: bool,
    pub refit: bool,
}

impl Default for StepInfo {
    fn default() -> Self {
        StepInfo {
            status: QpStatus::MaxIterations,
            iterations: 0,
            solve_time: Duration::ZERO,
            kkt_residual: f64::NAN,
            eps: 0.0,
            terminal_gap: f64::NAN,
            tail_distance: f64::NAN,
            terminal_enforced: false,
            fallback: Fallback::None,
            warm_violation: f64::NAN,
            torque_clipped: false,
            refit: false,
        }
    }
}

struct Warm {
    layout: FhocpLayout,
    x: Vec<f64>,
    y: Vec<f64>,
}

/// One solver and warm start per problem structure so that dropping the
/// terminal equality does not throw away the cached factorization.
#[derive(Default)]
struct Slot {
    solver: QpSolver,
    warm: Option<Warm>,
}

struct ModelCache {
    lin: ThrustLinearization,
    model: DiscreteModel,
    fit_wind: f64,
}

pub struct EmpcController {
    config: EmpcConfig,
    turbine: Arc<ConvexTurbine>,
    system: ModalSystem,
    /// S W Sᵀ.
    velocity_weight: DMatrix<f64>,
    /// Least-squares inverse of Sᵀ, N_m × N_l.
    reconstruction: DMatrix<f64>,
    cache: Option<ModelCache>,
    steady: Option<(f64, Option<SteadyState>)>,
    slots: [Slot; 2],
    u_prev: Option<[f64; 2]>,
    last_command: Option<ControlCommand>,
    last_trajectory: Option<Trajectory>,
    last_info: StepInfo,
}

impl std::fmt::Debug for EmpcController {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EmpcController")
            .field("variant", &self.config.variant)
            .field("horizon", &self.config.horizon)
            .field("n_modes", &self.system.n_modes())
            .finish_non_exhaustive()
    }
}

impl EmpcController {
    /// `tower` is the full plant tower; the single-mode variant keeps only
    /// its first mode.
    pub fn new(config: EmpcConfig, turbine: Arc<ConvexTurbine>, tower: &ModalSystem) -> Result<Self> {
        config.validate()?;
        let n_user = tower.locations.n_user();
        if config.location_weights.len() != n_user {
            return Err(Error::Config(format!(
                "{} location weights for {} measurement locations",
                config.location_weights.len(),
                n_user
            )));
        }
        let system = match config.variant {
            Variant::SingleMode => tower.truncated(1)?,
            _ => tower.clone(),
        };
        let nl = system.n_locations();
        let mut w = vec![0.0; nl];
        match config.variant {
            Variant::NoDamping => {}
            Variant::SingleMode => w[0] = config.location_weights[0],
            Variant::MultiMode => w[..n_user].copy_from_slice(&config.location_weights),
        }
        let velocity_weight = velocity_weight(&system.shape_matrix, &w)?;
        let reconstruction = pseudo_inverse(&system.shape_matrix.transpose())?;
        Ok(EmpcController {
            config,
            turbine,
            system,
            velocity_weight,
            reconstruction,
            cache: None,
            steady: None,
            slots: Default::default(),
            u_prev: None,
            last_command: None,
            last_trajectory: None,
            last_info: StepInfo::default(),
        })
    }

    pub fn config(&self) -> &EmpcConfig {
        &self.config
    }

    pub fn system(&self) -> &ModalSystem {
        &self.system
    }

    pub fn velocity_weight(&self) -> &DMatrix<f64> {
        &self.velocity_weight
    }

    pub fn n_states(&self) -> usize {
        2 * self.system.n_modes() + 1
    }

    pub fn last_info(&self) -> &StepInfo {
        &self.last_info
    }

    pub fn last_trajectory(&self) -> Option<&Trajectory> {
        self.last_trajectory.as_ref()
    }

    pub fn thrust_model(&self) -> Option<&ThrustLinearization> {
        self.cache.as_ref().map(|c| &c.lin)
    }

    pub fn model(&self) -> Option<&DiscreteModel> {
        self.cache.as_ref().map(|c| &c.model)
    }

    /// Controller state [K, x_m, v_m] in controller units from measurements.
    pub fn reconstruct(&self, meas: &Measurements) -> Result<Vec<f64>> {
        let nl = self.system.n_locations();
        if meas.x_p.len() != nl || meas.v_p.len() != nl {
            return Err(Error::Dimension(format!("measurements need {nl} tower locations")));
        }
        if !meas.omega_g.is_finite() || meas.x_p.iter().chain(&meas.v_p).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("measurement".into()));
        }
        let k = self.turbine.params.energy_from_omega(meas.omega_g) / ENERGY_UNIT;
        let xm = &self.reconstruction * DVector::from_column_slice(&meas.x_p);
        let vm = &self.reconstruction * DVector::from_column_slice(&meas.v_p);
        let mut x = vec![k];
        x.extend(xm.iter());
        x.extend(vm.iter());
        Ok(x)
    }

    fn refresh_model(&mut self, v_w: f64) -> Result<bool> {
        if let Some(c) = &self.cache {
            if (v_w - c.fit_wind).abs() <= self.config.refit_threshold {
                return Ok(false);
            }
        }
        let t = &self.turbine;
        let region = operating_region(v_w, &t.cp, &t.params, self.config.fit_band)?;
        let lin = fit_thrust_linearization(v_w, &t.ct, &t.cp, &t.params, &region, self.config.fit_points)?;
        let model = discretize(&assemble_lti(&self.system, &lin, &t.params), self.config.sample_time)?;
        debug!("thrust model refit at {v_w} m/s: {lin:?}");
        self.cache = Some(ModelCache { lin, model, fit_wind: v_w });
        self.steady = None;
        Ok(true)
    }

    fn refresh_steady_state(&mut self, v_w: f64) {
        if let Some((w, _)) = &self.steady {
            if (v_w - w).abs() <= self.config.steady_state_threshold {
                return;
            }
        }
        let cache = self.cache.as_ref().expect("model refreshed first");
        let rows = self.turbine.constraint_model(&cache.lin, self.config.overspeed_slack).stage_rows(v_w);
        let [a1, a2, _, _, a5] = self.config.alpha;
        let objective =
            SteadyObjective { alpha1: a1, alpha2: a2, alpha5: a5, velocity_weight: self.velocity_weight.clone() };
        let eta = self.turbine.params.generator_efficiency;
        let ss = match solve_steady_state(&cache.model, &rows, &objective, eta, &self.config.solver) {
            Ok(s) => Some(s),
            Err(e) => {
                warn!("no optimal steady state at {v_w} m/s, terminal constraint disabled: {e}");
                None
            }
        };
        self.steady = Some((v_w, ss));
    }

    /// Optimal steady state at `v_w`, refreshing the model if needed.
    pub fn steady_state(&mut self, v_w: f64) -> Result<Option<SteadyState>> {
        check_wind(v_w)?;
        self.refresh_model(v_w)?;
        self.refresh_steady_state(v_w);
        Ok(self.steady.as_ref().and_then(|s| s.1.clone()))
    }

    /// Solves the FHOCP from the measured state and maps u*(0) to actuator
    /// commands. A failed solve is retried without the terminal equality and
    /// then falls back to repeating the previous command.
    pub fn control_step(&mut self, meas: &Measurements, v_w: f64) -> Result<ControlCommand> {
        check_wind(v_w)?;
        let x0 = self.reconstruct(meas)?;
        let refit = self.refresh_model(v_w)?;
        self.refresh_steady_state(v_w);
        let steady = self.steady.as_ref().and_then(|s| s.1.clone());
        let u_prev = *self.u_prev.get_or_insert(steady.as_ref().map_or([0.0; 2], |s| s.u));

        let cache = self.cache.as_ref().expect("model refreshed");
        let cmodel = self.turbine.constraint_model(&cache.lin, self.config.overspeed_slack);
        let constraints = build_constraints(&cmodel, &vec![v_w; self.config.horizon])?;
        let mut data = FhocpData {
            model: &cache.model,
            constraints: &constraints,
            alpha: self.config.alpha,
            velocity_weight: &self.velocity_weight,
            x0: &x0,
            u_prev,
            terminal: None,
        };
        let tail = steady.as_ref().map(|s| {
            let mut t = vec![s.u[0], s.u[1], s.available];
            t.extend(&s.x);
            t
        });

        let mut attempts: Vec<bool> = Vec::with_capacity(2);
        if self.config.terminal_constraint && steady.is_some() {
            attempts.push(true);
        }
        attempts.push(false);
        let mut info = StepInfo { refit, ..StepInfo::default() };
        let mut solved = None;
        for (i, &terminal) in attempts.iter().enumerate() {
            data.terminal = if terminal { steady.as_ref().map(|s| s.x.as_slice()) } else { None };
            let (qp, layout) = assemble_fhocp(&data)?;
            let slot = &mut self.slots[terminal as usize];
            let warm = slot.warm.as_ref().map(|w| w.layout.shift(&w.x, &w.y, tail.as_deref(), &layout));
            if let Some((wx, _)) = &warm {
                info.warm_violation = bound_violation(&qp, wx);
            }
            let sol = slot.solver.solve(&qp, warm.as_ref().map(|(x, y)| WarmStart { x, y }))?;
            info.status = sol.status;
            info.iterations += sol.iterations;
            info.solve_time += sol.solve_time;
            info.kkt_residual = sol.kkt.max_residual();
            if sol.is_optimal() {
                info.terminal_enforced = terminal;
                if i > 0 {
                    info.fallback = Fallback::NoTerminal;
                }
                solved = Some((layout.trajectory(&x0, &sol.x), sol.x, sol.y, layout));
                break;
            }
            warn!("FHOCP at {v_w} m/s (terminal {terminal}) ended with {:?}", sol.status);
            slot.warm = None;
        }

        let Some((traj, x, y, layout)) = solved else {
            info.fallback = Fallback::Hold;
            self.last_info = info;
            return match self.last_command {
                Some(c) => {
                    let held = ControlCommand { held: true, ..c };
                    self.last_command = Some(held);
                    Ok(held)
                }
                None => Err(Error::Qp(format!("no feasible first solve at {v_w} m/s"))),
            };
        };
        self.slots[info.terminal_enforced as usize].warm = Some(Warm { layout, x, y });
        info.eps = traj.eps;
        if let Some(s) = &steady {
            info.terminal_gap = traj.terminal_gap(&s.x);
            info.tail_distance = traj.tail_distance(&s.x);
        }
        let [p_r, p_g] = traj.inputs[0];
        let k_pred = traj.states[1][0];
        let (cmd, clipped) = self.actuate(p_r, p_g, k_pred, v_w)?;
        info.torque_clipped = clipped;
        self.u_prev = Some([p_r, p_g]);
        self.last_command = Some(cmd);
        self.last_trajectory = Some(traj);
        self.last_info = info;
        Ok(cmd)
    }

    /// T_g = P_g/(η ω(K*)) and β = Ψ(P_r, v_w, K*) from controller-unit values.
    fn actuate(&self, p_r: f64, p_g: f64, k_pred: f64, v_w: f64) -> Result<(ControlCommand, bool)> {
        let p = &self.turbine.params;
        let k = (k_pred * ENERGY_UNIT).max(0.0);
        let omega = p.omega_from_energy(k);
        if !(omega > 0.0) {
            return Err(Error::Domain(format!("predicted generator speed {omega} rad/s")));
        }
        let p_g_w = p_g * POWER_UNIT;
        let raw = p_g_w / (p.generator_efficiency * omega);
        let torque_g = raw.clamp(0.0, p.torque_g_max);
        let pitch = pitch_inverse_saturated(p_r * POWER_UNIT, v_w, k, &self.turbine.cp, p)?;
        Ok((
            ControlCommand { torque_g, pitch, p_r: p_r * POWER_UNIT, p_g: p_g_w, k_pred: k, held: false },
            (raw - torque_g).abs() > 1e-9 * p.torque_g_max,
        ))
    }
}

fn check_wind(v_w: f64) -> Result<()> {
    if !(v_w > 0.0 && v_w.is_finite()) {
        return Err(Error::Domain(format!("wind speed must be positive, got {v_w}")));
    }
    Ok(())
}

/// Largest violation of l ≤ Ax ≤ u, relative to one plus the bound.
fn bound_violation(qp: &QuadraticProgram, x: &[f64]) -> f64 {
    let mut ax = vec![0.0; qp.m()];
    qp.a.mul_vec(x, &mut ax);
    ax.iter()
        .zip(qp.l.iter().zip(&qp.u))
        .map(|(v, (lo, hi))| (lo - v).max(v - hi).max(0.0) / (1.0 + v.abs()))
        .fold(0.0, f64::max)
}

/// Moore-Penrose inverse through the SVD; warns on poor conditioning.
fn pseudo_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * 1e-12 * m.nrows().max(m.ncols()) as f64;
    let smin = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    if !(smin > tol) {
        return Err(Error::Singularity("more modes than independent measurement locations".into()));
    }
    if smax / smin > 1e6 {
        warn!("shape matrix condition number {:.3e}", smax / smin);
    }
    svd.pseudo_inverse(tol).map_err(|e| Error::Singularity(e.to_string()))
}
