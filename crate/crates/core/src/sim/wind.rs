//! Deterministic hub-height wind profiles.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WindProfile {
    /// Plateaus start, start + step, … capped at `end`, each `dwell` seconds.
    Staircase {
        start: f64,
        end: f64,
        step: f64,
        dwell: f64,
    },
    Constant {
        speed: f64,
        duration: f64,
    },
    /// `time,speed` samples held piecewise constant.
    File {
        path: PathBuf,
        #[serde(skip)]
        samples: Vec<(f64, f64)>,
    },
}

impl Default for WindProfile {
    fn default() -> Self {
        WindProfile::Staircase { start: 6.0, end: 17.0, step: 1.0, dwell: 100.0 }
    }
}

/// A stretch of constant wind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Plateau {
    pub speed: f64,
    pub start: f64,
    pub end: f64,
}

impl WindProfile {
    pub fn staircase(start: f64, end: f64, step: f64, dwell: f64) -> Result<Self> {
        let w = WindProfile::Staircase { start, end, step, dwell };
        w.validate()?;
        Ok(w)
    }

    pub fn constant(speed: f64, duration: f64) -> Result<Self> {
        let w = WindProfile::Constant { speed, duration };
        w.validate()?;
        Ok(w)
    }

    /// Reads a `time,speed` CSV; times must increase strictly from zero.
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let mut samples = Vec::new();
        for rec in rdr.deserialize::<(f64, f64)>() {
            samples.push(rec?);
        }
        let w = WindProfile::File { path: path.to_path_buf(), samples };
        w.validate().map_err(|e| Error::parse(path, e.to_string()))?;
        Ok(w)
    }

    /// Loads the samples of a `File` profile that came from a config file.
    pub fn resolve(self, base: &Path) -> Result<Self> {
        match self {
            WindProfile::File { path, samples } if samples.is_empty() => Self::from_file(&base.join(path)),
            other => {
                other.validate()?;
                Ok(other)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("wind profile: {m}")));
        match self {
            WindProfile::Staircase { start, end, step, dwell } => {
                if !(*start > 0.0 && *end >= *start && *step > 0.0) {
                    return bad("staircase needs 0 < start <= end and step > 0");
                }
                if !(*dwell > 0.0) {
                    return bad("dwell must be positive");
                }
            }
            WindProfile::Constant { speed, duration } => {
                if !(*speed > 0.0 && *duration > 0.0) {
                    return bad("constant wind needs positive speed and duration");
                }
            }
            WindProfile::File { samples, .. } => {
                if samples.is_empty() {
                    return bad("no samples");
                }
                if samples[0].0 != 0.0 {
                    return bad("first sample must be at t = 0");
                }
                if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return bad("times must increase");
                }
                if samples.iter().any(|s| !(s.1 > 0.0)) {
                    return bad("speeds must be positive");
                }
            }
        }
        Ok(())
    }

    /// Segments of constant speed in time order.
    pub fn plateaus(&self) -> Vec<Plateau> {
        match self {
            WindProfile::Staircase { start, end, step, dwell } => {
                let n = ((end - start) / step - 1e-9).ceil().max(0.0) as usize + 1;
                (0..n)
                    .map(|i| Plateau {
                        speed: (start + i as f64 * step).min(*end),
                        start: i as f64 * dwell,
                        end: (i + 1) as f64 * dwell,
                    })
                    .collect()
            }
            WindProfile::Constant { speed, duration } => vec![Plateau { speed: *speed, start: 0.0, end: *duration }],
            WindProfile::File { samples, .. } => {
                let mut out: Vec<Plateau> = Vec::new();
                for (i, &(t, v)) in samples.iter().enumerate() {
                    let next = samples.get(i + 1).map_or(t, |s| s.0);
                    match out.last_mut() {
                        Some(p) if p.speed == v => p.end = next,
                        _ => out.push(Plateau { speed: v, start: t, end: next }),
                    }
                }
                out.retain(|p| p.end > p.start);
                out
            }
        }
    }

    pub fn duration(&self) -> f64 {
        match self {
            WindProfile::File { samples, .. } => samples.last().map_or(0.0, |s| s.0),
            _ => self.plateaus().last().map_or(0.0, |p| p.end),
        }
    }

    /// Speed at time t (zero-order hold; the last value persists).
    pub fn speed_at(&self, t: f64) -> f64 {
        match self {
            WindProfile::Staircase { .. } | WindProfile::Constant { .. } => {
                let ps = self.plateaus();
                ps.iter().find(|p| t < p.end).unwrap_or(&ps[ps.len() - 1]).speed
            }
            WindProfile::File { samples, .. } => {
                let i = samples.partition_point(|s| s.0 <= t);
                samples[i.saturating_sub(1)].1
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_staircase_has_twelve_plateaus() {
        let w = WindProfile::default();
        let p = w.plateaus();
        assert_eq!(p.len(), 12);
        assert_eq!(p[0].speed, 6.0);
        assert_eq!(p[11].speed, 17.0);
        assert_eq!(w.duration(), 1200.0);
        assert_eq!(w.speed_at(99.9), 6.0);
        assert_eq!(w.speed_at(100.0), 7.0);
        assert_eq!(w.speed_at(5000.0), 17.0);
    }

    #[test]
    fn partial_last_step_is_capped() {
        let w = WindProfile::staircase(6.0, 7.5, 1.0, 10.0).unwrap();
        let s: Vec<f64> = w.plateaus().iter().map(|p| p.speed).collect();
        assert_eq!(s, vec![6.0, 7.0, 7.5]);
    }

    #[test]
    fn invalid_profiles_rejected() {
        assert!(WindProfile::staircase(6.0, 17.0, 1.0, 0.0).is_err());
        assert!(WindProfile::staircase(0.0, 17.0, 1.0, 10.0).is_err());
        assert!(WindProfile::constant(-1.0, 10.0).is_err());
    }

    #[test]
    fn file_profile_groups_plateaus() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wind.csv");
        std::fs::write(&path, "time,speed\n0,8\n10,8\n20,9\n30,9\n").unwrap();
        let w = WindProfile::from_file(&path).unwrap();
        let p = w.plateaus();
        assert_eq!(p.len(), 2);
        assert_eq!((p[0].start, p[0].end, p[1].end), (0.0, 20.0, 30.0));
        assert_eq!(w.speed_at(15.0), 8.0);
        assert_eq!(w.speed_at(25.0), 9.0);
    }
}
