use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qp::QpSettings;

/// Which tower modes the controller damps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// No velocity term; the model still predicts every mode.
    NoDamping,
    /// First mode only, in both the model and the velocity term.
    SingleMode,
    MultiMode,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::NoDamping, Variant::SingleMode, Variant::MultiMode];

    pub fn name(self) -> &'static str {
        match self {
            Variant::NoDamping => "no-damping",
            Variant::SingleMode => "single-mode",
            Variant::MultiMode => "multi-mode",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown controller variant '{s}'")))
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmpcConfig {
    /// Prediction horizon N_p in samples.
    pub horizon: usize,
    pub sample_time: f64,
    /// Weights of P_g, P̂_av, Ṗ_g², Ṗ_r² and the overspeed slack.
    pub alpha: [f64; 5],
    /// One weight per measurement location, tower base excluded.
    pub location_weights: Vec<f64>,
    pub variant: Variant,
    pub terminal_constraint: bool,
    pub overspeed_slack: bool,
    /// Refit the thrust model when the wind moves this far (m/s).
    pub refit_threshold: f64,
    /// Recompute the optimal steady state when the wind moves this far (m/s).
    pub steady_state_threshold: f64,
    /// Relative half-width of the thrust fit region.
    pub fit_band: f64,
    pub fit_points: usize,
    pub pwl_segments: usize,
    pub k_grid_points: usize,
    pub torque_cuts: usize,
    pub solver: QpSettings,
}

impl Default for EmpcConfig {
    fn default() -> Self {
        EmpcConfig {
            horizon: 100,
            sample_time: 0.2,
            alpha: [1.0, 1.0, 1.0, 0.01, 100.0],
            location_weights: vec![100.0, 20.0],
            variant: Variant::MultiMode,
            terminal_constraint: true,
            overspeed_slack: true,
            refit_threshold: 0.5,
            steady_state_threshold: 0.1,
            fit_band: 0.25,
            fit_points: 9,
            pwl_segments: 5,
            k_grid_points: 200,
            torque_cuts: 8,
            solver: QpSettings::default(),
        }
    }
}

impl EmpcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if !(self.sample_time > 0.0) {
            return Err(Error::Config("sample time must be positive".into()));
        }
        if self.alpha.iter().chain(&self.location_weights).any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::Config("objective weights must be finite and nonnegative".into()));
        }
        if !(self.refit_threshold >= 0.0 && self.steady_state_threshold >= 0.0) {
            return Err(Error::Config("refresh thresholds must be nonnegative".into()));
        }
        if !(self.fit_band > 0.0 && self.fit_band < 1.0) || self.fit_points < 2 {
            return Err(Error::Config("fit band must lie in (0, 1) with at least 2 points".into()));
        }
        if self.pwl_segments == 0 || self.k_grid_points < 2 || self.torque_cuts == 0 {
            return Err(Error::Config("envelope resolution must be positive".into()));
        }
        Ok(())
    }

    /// Copy with every objective weight multiplied by `factor`.
    pub fn scaled_weights(&self, factor: f64) -> Self {
        let mut c = self.clone();
        c.alpha.iter_mut().for_each(|a| *a *= factor);
        c.location_weights.iter_mut().for_each(|w| *w *= factor);
        c
    }
}

impl EmpcConfig {
    pub fn resolution(&self) -> crate::convex::EnvelopeResolution {
        crate::convex::EnvelopeResolution {
            segments: self.pwl_segments,
            k_points: self.k_grid_points,
            torque_cuts: self.torque_cuts,
        }
    }
}
