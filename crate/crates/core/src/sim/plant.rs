//! Nonlinear plant: rigid drive train and modal tower driven by the true
//! aerodynamic thrust.

use std::sync::Arc;

use crate::aero::{drivetrain_step, rotor_power, DriveTrainState};
use crate::convex::ConvexTurbine;
use crate::empc::Measurements;
use crate::error::{Error, Result};
use crate::tower::{thrust_force, ModalState, ModalSystem};

#[derive(Debug, Clone)]
pub struct Plant {
    turbine: Arc<ConvexTurbine>,
    pub tower: ModalSystem,
    pub omega_g: f64,
    pub modal: ModalState,
}

impl Plant {
    /// Plant at speed `omega_g` with the tower at its static deflection under
    /// the thrust produced by `pitch` at `v_w`.
    pub fn at_rest(
        turbine: Arc<ConvexTurbine>,
        tower: ModalSystem,
        omega_g: f64,
        pitch: f64,
        v_w: f64,
    ) -> Result<Self> {
        let f_t = thrust_force(omega_g, pitch, v_w, &turbine.ct, &turbine.params)?;
        let modal = tower.static_deflection(f_t);
        Ok(Plant { turbine, tower, omega_g, modal })
    }

    pub fn measure(&self) -> Measurements {
        let (x_p, v_p) = self.tower.project_to_physical(&self.modal);
        Measurements { omega_g: self.omega_g, x_p, v_p }
    }

    pub fn thrust(&self, pitch: f64, v_w: f64) -> Result<f64> {
        thrust_force(self.omega_g, pitch, v_w, &self.turbine.ct, &self.turbine.params)
    }

    pub fn rotor_power(&self, pitch: f64, v_w: f64) -> Result<f64> {
        rotor_power(self.omega_g, pitch, v_w, &self.turbine.cp, &self.turbine.params)
    }

    /// Advances by `dt` with inputs held. Each substep re-evaluates the
    /// thrust at the current rotor speed before advancing both subsystems
    /// with RK4.
    pub fn advance(&mut self, torque_g: f64, pitch: f64, v_w: f64, dt: f64, substeps: usize) -> Result<()> {
        let n = substeps.max(1);
        let h = dt / n as f64;
        let p = &self.turbine.params;
        for _ in 0..n {
            let f_t = thrust_force(self.omega_g, pitch, v_w, &self.turbine.ct, p)?;
            self.modal = self.tower.step(&self.modal, f_t, h);
            let s = drivetrain_step(
                DriveTrainState { omega_g: self.omega_g },
                torque_g,
                pitch,
                v_w,
                h,
                1,
                &self.turbine.cp,
                p,
            )?;
            self.omega_g = s.omega_g;
        }
        if !self.omega_g.is_finite() || self.modal.x.iter().chain(&self.modal.v).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("plant state at omega_g = {}", self.omega_g)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aero::pitch_inverse;
    use crate::tower::TowerParams;

    #[test]
    fn equilibrium_is_held() {
        let t = Arc::new(ConvexTurbine::nrel_5mw().unwrap());
        let p = t.params.clone();
        let (v, w) = (14.0, p.omega_g_rated);
        let target = p.power_g_rated / p.generator_efficiency;
        let beta = pitch_inverse(target, v, p.energy_from_omega(w), &t.cp, &p).unwrap();
        let tg = p.power_g_rated / (p.generator_efficiency * w);
        let mut plant = Plant::at_rest(t, TowerParams::default().build().unwrap(), w, beta, v).unwrap();
        let x0 = plant.modal.x.clone();
        for _ in 0..50 {
            plant.advance(tg, beta, v, 0.2, 10).unwrap();
        }
        assert!((plant.omega_g / w - 1.0).abs() < 1e-3, "{}", plant.omega_g);
        for (a, b) in plant.modal.x.iter().zip(&x0) {
            assert!((a - b).abs() < 1e-3 * b.abs().max(1e-3));
        }
    }
}
