//! Convex reformulation of the turbine in energy variables.
//!
//! The controller works in scaled units: power in MW, energy in MJ, force in
//! MN, lengths in m. Conversions happen at the boundary with the SI plant.

pub mod constraints;
pub mod lti;
pub mod pwl;
pub mod thrust;
pub mod turbine;

pub use constraints::{
    build_constraints, with_epigraph, ConstraintKind, ConstraintModel, ConvexConstraintSet, EpigraphRow, SqrtCuts,
    StageRow,
};
pub use lti::{assemble_lti, discretize, DiscreteModel, LtiModel};
pub use pwl::{build_pwl_available_power, build_pwl_max_thrust, PwlEnvelope};
pub use thrust::{fit_affine, fit_thrust_linearization, operating_region, FitRegion, ThrustLinearization};
pub use turbine::{ConvexTurbine, EnvelopeResolution};

use crate::error::{Error, Result};

/// Watts per controller power unit.
pub const POWER_UNIT: f64 = 1e6;
/// Joules per controller energy unit.
pub const ENERGY_UNIT: f64 = 1e6;
/// Newtons per controller force unit.
pub const FORCE_UNIT: f64 = 1e6;

/// K = ½Jω².
pub fn kinetic_energy(omega_g: f64, inertia: f64) -> Result<f64> {
    if !(omega_g >= 0.0) || !(inertia > 0.0) {
        return Err(Error::Domain(format!("kinetic energy needs omega >= 0 and J > 0, got ({omega_g}, {inertia})")));
    }
    Ok(0.5 * inertia * omega_g * omega_g)
}

/// ω = √(2K/J).
pub fn omega_from_energy(k: f64, inertia: f64) -> Result<f64> {
    if !(k >= 0.0) || !(inertia > 0.0) {
        return Err(Error::Domain(format!("speed from energy needs K >= 0 and J > 0, got ({k}, {inertia})")));
    }
    Ok((2.0 * k / inertia).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aero::TurbineParams;

    #[test]
    fn energy_conversions() {
        assert_eq!(kinetic_energy(3.0, 2.0).unwrap(), 9.0);
        for w in [0.0, 1.0, 70.16, 122.9096, 1e3] {
            let back = omega_from_energy(kinetic_energy(w, 4653.0).unwrap(), 4653.0).unwrap();
            assert!((back - w).abs() <= 1e-12 * w.max(1.0));
        }
        assert!(kinetic_energy(-1.0, 2.0).is_err());
        assert!(omega_from_energy(-1.0, 2.0).is_err());
        let p = TurbineParams::nrel_5mw();
        let j = p.equivalent_inertia();
        // ½·(534.116 + 38759236/9409)·122.9096² ≈ 3.51496e7 J
        let k = kinetic_energy(p.omega_g_rated, j).unwrap();
        assert!((k - 0.5 * j * 122.9096f64.powi(2)).abs() < 1e-6);
        assert!((k / 3.51496e7 - 1.0).abs() < 1e-5, "{k}");
    }
}
