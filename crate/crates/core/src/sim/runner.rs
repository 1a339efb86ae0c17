//! Closed loop: sampled controller against the nonlinear plant.

use std::sync::Arc;
use std::time::Instant;

use log::{info, warn};

use super::config::{SimConfig, SimulationSettings};
use super::log::{SimLog, SimRecord};
use super::plant::Plant;
use super::wind::WindProfile;
use crate::aero::{pitch_inverse_saturated, rotor_power};
use crate::convex::{ConvexTurbine, ENERGY_UNIT, POWER_UNIT};
use crate::empc::{EmpcConfig, EmpcController};
use crate::error::{Error, Result};
use crate::tower::ModalSystem;

/// Everything a single closed-loop run needs.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub turbine: Arc<ConvexTurbine>,
    pub tower: ModalSystem,
    pub controller: EmpcConfig,
    pub wind: WindProfile,
    pub settings: SimulationSettings,
}

impl Scenario {
    pub fn from_config(cfg: &SimConfig) -> Result<Self> {
        Ok(Scenario {
            turbine: cfg.build_turbine()?,
            tower: cfg.tower.build()?,
            controller: cfg.controller.clone(),
            wind: cfg.wind.clone(),
            settings: cfg.simulation.clone(),
        })
    }

    pub fn duration(&self) -> f64 {
        self.settings.duration.unwrap_or_else(|| self.wind.duration())
    }

    pub fn n_steps(&self) -> usize {
        (self.duration() / self.controller.sample_time + 1e-9).floor() as usize
    }
}

/// A run's log, and the reason it stopped early if it did.
#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub log: SimLog,
    pub aborted: Option<String>,
}

/// Runs the closed loop. The plant starts at the controller's optimal
/// steady state for the initial wind, with the tower at its static
/// deflection. A plant or controller failure ends the run and is reported in
/// `aborted` together with the partial log.
pub fn run_simulation(sc: &Scenario) -> Result<SimOutcome> {
    let v0 = sc.wind.speed_at(0.0);
    if v0 < sc.settings.cut_in {
        return Err(Error::InvalidParameter(format!(
            "initial wind {v0} m/s is below cut-in {} m/s",
            sc.settings.cut_in
        )));
    }
    let p = sc.turbine.params.clone();
    let mut ctrl = EmpcController::new(sc.controller.clone(), sc.turbine.clone(), &sc.tower)?;
    let ss = ctrl
        .steady_state(v0)?
        .ok_or_else(|| Error::InfeasibleTarget(format!("no steady state to start from at {v0} m/s")))?;
    let k0 = ss.x[0] * ENERGY_UNIT;
    let pitch0 = pitch_inverse_saturated(ss.u[0] * POWER_UNIT, v0, k0, &sc.turbine.cp, &p)?;
    let mut plant = Plant::at_rest(sc.turbine.clone(), sc.tower.clone(), p.omega_from_energy(k0), pitch0, v0)?;

    let ts = sc.controller.sample_time;
    let n = sc.n_steps();
    let mut log = SimLog::new(sc.tower.n_modes(), sc.tower.n_locations());
    info!(
        "{} run: {n} steps, N_p = {}, terminal {}",
        sc.controller.variant, sc.controller.horizon, sc.controller.terminal_constraint
    );
    for step in 0..n {
        let t = step as f64 * ts;
        let v = sc.wind.speed_at(t + 1e-6 * ts);
        let meas = plant.measure();
        let clock = Instant::now();
        let cmd = match ctrl.control_step(&meas, v) {
            Ok(c) => c,
            Err(e) => {
                warn!("controller failed at t = {t}: {e}");
                return Ok(SimOutcome { log, aborted: Some(format!("controller failed at t = {t}: {e}")) });
            }
        };
        let elapsed = clock.elapsed();
        let info = ctrl.last_info().clone();
        let f_t = plant.thrust(cmd.pitch, v)?;
        let k = p.energy_from_omega(plant.omega_g);
        let f_t_model = ctrl.thrust_model().map_or(f64::NAN, |l| l.eval(cmd.p_r, k));
        let p_r_model = rotor_power(p.omega_from_energy(cmd.k_pred), cmd.pitch, v, &sc.turbine.cp, &p)?;
        log.push(
            SimRecord {
                t,
                v_w: v,
                omega_g: plant.omega_g,
                k,
                x_m: plant.modal.x.clone(),
                v_m: plant.modal.v.clone(),
                x_p: meas.x_p,
                v_p: meas.v_p,
                f_t,
                f_t_model,
                torque_g: cmd.torque_g,
                pitch: cmd.pitch,
                p_r: cmd.p_r,
                p_g: cmd.p_g,
                k_pred: cmd.k_pred,
                p_r_model,
                p_rotor: plant.rotor_power(cmd.pitch, v)?,
                p_elec: p.generator_efficiency * cmd.torque_g * plant.omega_g,
                tfam_rate: plant.tower.tfam_rates(&plant.modal, f_t),
                eps: info.eps,
                status: format!("{:?}", info.status).to_lowercase(),
                iterations: info.iterations,
                terminal_gap: info.terminal_gap,
                tail_distance: info.tail_distance,
                fallback: serde_json::to_value(info.fallback)?.as_str().unwrap_or_default().to_string(),
                held: cmd.held,
            },
            elapsed,
        );
        if let Err(e) = plant.advance(cmd.torque_g, cmd.pitch, v, ts, sc.settings.substeps) {
            warn!("plant failed at t = {t}: {e}");
            return Ok(SimOutcome { log, aborted: Some(format!("plant failed at t = {t}: {e}")) });
        }
    }
    Ok(SimOutcome { log, aborted: None })
}
