//! Run configuration: one TOML file with `[turbine]`, `[tower]`,
//! `[controller]`, `[wind]` and `[simulation]` tables, all optional.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::wind::WindProfile;
use crate::aero::{CoeffKind, CoeffSurface, TurbineOverrides, TurbineParams};
use crate::convex::ConvexTurbine;
use crate::empc::EmpcConfig;
use crate::error::{Error, Result};
use crate::tower::TowerParams;

/// `[turbine]`: parameter overrides plus optional coefficient tables in the
/// `lambda,beta,value` CSV format, relative to the config file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TurbineSection {
    pub cp_table: Option<PathBuf>,
    pub ct_table: Option<PathBuf>,
    #[serde(flatten)]
    pub params: TurbineOverrides,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSettings {
    /// RK4 substeps of the plant per control interval.
    pub substeps: usize,
    /// Runs refuse to start below this wind speed (m/s).
    pub cut_in: f64,
    /// Trailing fraction of each plateau treated as settled.
    pub steady_fraction: f64,
    /// Leading part of each plateau treated as the transient (s).
    pub transient_window: f64,
    /// Stop early; the wind profile's own length otherwise.
    pub duration: Option<f64>,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        SimulationSettings { substeps: 10, cut_in: 3.0, steady_fraction: 0.5, transient_window: 30.0, duration: None }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub turbine: TurbineSection,
    pub tower: TowerParams,
    pub controller: EmpcConfig,
    pub wind: WindProfile,
    pub simulation: SimulationSettings,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl SimConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg: SimConfig = toml::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))?;
        // flattened tables cannot reject unknown keys by themselves
        if let Ok(v) = toml::from_str::<toml::Table>(text) {
            if let Some(t) = v.get("turbine").and_then(|t| t.as_table()) {
                let mut rest = t.clone();
                rest.remove("cp_table");
                rest.remove("ct_table");
                rest.try_into::<TurbineOverrides>().map_err(|e| Error::parse(origin, e.to_string()))?;
            }
        }
        cfg.base_dir = origin.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.wind = cfg.wind.resolve(&cfg.base_dir)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.controller.validate()?;
        self.wind.validate()?;
        let s = &self.simulation;
        if s.substeps == 0 || !(s.cut_in >= 0.0) {
            return Err(Error::Config("simulation needs substeps >= 1 and cut_in >= 0".into()));
        }
        if !(s.steady_fraction > 0.0 && s.steady_fraction <= 1.0) || !(s.transient_window > 0.0) {
            return Err(Error::Config(
                "steady fraction must lie in (0, 1] and the transient window be positive".into(),
            ));
        }
        if s.duration.is_some_and(|d| !(d > 0.0)) {
            return Err(Error::Config("duration must be positive".into()));
        }
        if self.controller.location_weights.len() != self.tower.locations.len() {
            return Err(Error::Config(format!(
                "{} location weights for {} tower locations",
                self.controller.location_weights.len(),
                self.tower.locations.len()
            )));
        }
        Ok(())
    }

    pub fn turbine_params(&self) -> Result<TurbineParams> {
        TurbineParams::nrel_5mw().with_overrides(&self.turbine.params)
    }

    /// Turbine with its convex envelopes at the controller's resolution.
    pub fn build_turbine(&self) -> Result<Arc<ConvexTurbine>> {
        let params = self.turbine_params()?;
        let cp = match &self.turbine.cp_table {
            Some(p) => CoeffSurface::read_csv(&self.base_dir.join(p), CoeffKind::Power)?,
            None => CoeffSurface::default_power(),
        };
        let ct = match &self.turbine.ct_table {
            Some(p) => CoeffSurface::read_csv(&self.base_dir.join(p), CoeffKind::Thrust)?,
            None => CoeffSurface::thrust_from_power(&cp),
        };
        Ok(Arc::new(ConvexTurbine::build(params, cp, ct, self.controller.resolution())?))
    }

    pub fn duration(&self) -> f64 {
        self.simulation.duration.unwrap_or_else(|| self.wind.duration())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = SimConfig::parse("", Path::new("x.toml")).unwrap();
        assert_eq!(c.controller.horizon, 100);
        assert_eq!(c.wind.plateaus().len(), 12);
        assert_eq!(c.duration(), 1200.0);
    }

    #[test]
    fn sections_override_defaults() {
        let text = r#"
            [turbine]
            generator_efficiency = 0.95
            [controller]
            horizon = 20
            variant = "single-mode"
            terminal_constraint = false
            [wind]
            kind = "constant"
            speed = 16.0
            duration = 50.0
            [simulation]
            substeps = 4
        "#;
        let c = SimConfig::parse(text, Path::new("x.toml")).unwrap();
        assert_eq!(c.turbine_params().unwrap().generator_efficiency, 0.95);
        assert_eq!(c.controller.horizon, 20);
        assert!(!c.controller.terminal_constraint);
        assert_eq!(c.wind.speed_at(3.0), 16.0);
        assert_eq!(c.simulation.substeps, 4);
        let again = SimConfig::parse(&c.to_toml().unwrap(), Path::new("x.toml")).unwrap();
        assert_eq!(again.controller, c.controller);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(SimConfig::parse("[controller]\nhorizn = 3\n", Path::new("x.toml")).is_err());
        assert!(SimConfig::parse("[turbine]\nair_densty = 1.2\n", Path::new("x.toml")).is_err());
        assert!(SimConfig::parse("[controller]\nlocation_weights = [1.0]\n", Path::new("x.toml")).is_err());
    }
}
