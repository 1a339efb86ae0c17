//! Wind-independent pieces of the convex model, built once per turbine and
//! shared between controllers.

use super::constraints::{ConstraintModel, SqrtCuts};
use super::pwl::{build_pwl_available_power, build_pwl_max_thrust, default_k_grid, default_wind_grid, PwlEnvelope};
use super::thrust::ThrustLinearization;
use crate::aero::{CoeffSurface, TurbineParams};
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct ConvexTurbine {
    pub params: TurbineParams,
    pub cp: CoeffSurface,
    pub ct: CoeffSurface,
    pub available_power: PwlEnvelope,
    pub max_thrust: PwlEnvelope,
    pub torque: SqrtCuts,
}

/// Resolution of the tabulated envelopes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeResolution {
    pub segments: usize,
    pub k_points: usize,
    pub torque_cuts: usize,
}

impl Default for EnvelopeResolution {
    fn default() -> Self {
        EnvelopeResolution { segments: 5, k_points: 200, torque_cuts: 8 }
    }
}

impl ConvexTurbine {
    pub fn build(params: TurbineParams, cp: CoeffSurface, ct: CoeffSurface, res: EnvelopeResolution) -> Result<Self> {
        params.validate()?;
        let wind = default_wind_grid();
        let k = default_k_grid(&params, res.k_points);
        let available_power = build_pwl_available_power(&cp, &params, &wind, &k, res.segments)?;
        let max_thrust = build_pwl_max_thrust(&ct, &params, &wind, &k, res.segments)?;
        let torque = SqrtCuts::torque_limit(&params, k[0], k[k.len() - 1], res.torque_cuts)?;
        Ok(ConvexTurbine { params, cp, ct, available_power, max_thrust, torque })
    }

    /// Default analytic surfaces on the NREL-5MW-like turbine.
    pub fn nrel_5mw() -> Result<Self> {
        let cp = CoeffSurface::default_power();
        let ct = CoeffSurface::thrust_from_power(&cp);
        Self::build(TurbineParams::nrel_5mw(), cp, ct, EnvelopeResolution::default())
    }

    pub fn constraint_model<'a>(&'a self, thrust: &'a ThrustLinearization, with_slack: bool) -> ConstraintModel<'a> {
        ConstraintModel {
            params: &self.params,
            available_power: &self.available_power,
            max_thrust: &self.max_thrust,
            thrust,
            torque: &self.torque,
            with_slack,
        }
    }
}
