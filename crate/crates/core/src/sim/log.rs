//! Per-step simulation records and their CSV form.

use std::path::Path;
use std::time::Duration;

use serde::Serialize;

use crate::error::{Error, Result};

/// One control interval, sampled at its start. Powers in W, energy in J,
/// forces in N, angles in rad.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimRecord {
    pub t: f64,
    pub v_w: f64,
    pub omega_g: f64,
    pub k: f64,
    /// Modal states of the plant tower.
    pub x_m: Vec<f64>,
    pub v_m: Vec<f64>,
    /// Physical tower states per location, base last.
    pub x_p: Vec<f64>,
    pub v_p: Vec<f64>,
    pub f_t: f64,
    /// Affine thrust model at the measured K and commanded P_r.
    pub f_t_model: f64,
    pub torque_g: f64,
    pub pitch: f64,
    /// Optimizer rotor and generator powers.
    pub p_r: f64,
    pub p_g: f64,
    /// One-step-ahead kinetic energy the command was mapped with.
    pub k_pred: f64,
    /// Rotor power that the commanded pitch yields at the predicted speed.
    pub p_r_model: f64,
    /// Plant rotor power and electrical power at the sample instant.
    pub p_rotor: f64,
    pub p_elec: f64,
    pub tfam_rate: Vec<f64>,
    pub eps: f64,
    pub status: String,
    pub iterations: usize,
    pub terminal_gap: f64,
    pub tail_distance: f64,
    pub fallback: String,
    pub held: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimLog {
    pub n_modes: usize,
    pub n_locations: usize,
    pub records: Vec<SimRecord>,
    /// Wall-clock controller time per record; kept out of the CSV so that
    /// repeated runs give identical files.
    pub solve_times: Vec<Duration>,
}

const SCALARS_A: [&str; 4] = ["t", "v_w", "omega_g", "k"];
const SCALARS_B: [&str; 10] =
    ["f_t", "f_t_model", "torque_g", "pitch", "p_r", "p_g", "k_pred", "p_r_model", "p_rotor", "p_elec"];
const SCALARS_C: [&str; 7] = ["eps", "status", "iterations", "terminal_gap", "tail_distance", "fallback", "held"];

impl SimLog {
    pub fn new(n_modes: usize, n_locations: usize) -> Self {
        SimLog { n_modes, n_locations, ..Default::default() }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, r: SimRecord, solve_time: Duration) {
        self.records.push(r);
        self.solve_times.push(solve_time);
    }

    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = SCALARS_A.iter().map(|s| s.to_string()).collect();
        let idx = |h: &mut Vec<String>, name: &str, n: usize| h.extend((1..=n).map(|i| format!("{name}_{i}")));
        idx(&mut h, "x_m", self.n_modes);
        idx(&mut h, "v_m", self.n_modes);
        idx(&mut h, "x_p", self.n_locations);
        idx(&mut h, "v_p", self.n_locations);
        h.extend(SCALARS_B.iter().map(|s| s.to_string()));
        idx(&mut h, "tfam_rate", self.n_locations);
        h.extend(SCALARS_C.iter().map(|s| s.to_string()));
        h
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.header())?;
        for r in &self.records {
            let mut row: Vec<String> = [r.t, r.v_w, r.omega_g, r.k].iter().map(f64::to_string).collect();
            for v in [&r.x_m, &r.v_m, &r.x_p, &r.v_p] {
                row.extend(v.iter().map(f64::to_string));
            }
            row.extend(
                [r.f_t, r.f_t_model, r.torque_g, r.pitch, r.p_r, r.p_g, r.k_pred, r.p_r_model, r.p_rotor, r.p_elec]
                    .iter()
                    .map(f64::to_string),
            );
            row.extend(r.tfam_rate.iter().map(f64::to_string));
            row.push(r.eps.to_string());
            row.push(r.status.clone());
            row.push(r.iterations.to_string());
            row.push(r.terminal_gap.to_string());
            row.push(r.tail_distance.to_string());
            row.push(r.fallback.clone());
            row.push(r.held.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let count =
            |p: &str| header.iter().filter(|h| h.strip_prefix(p).is_some_and(|r| r.parse::<usize>().is_ok())).count();
        let mut log = SimLog::new(count("x_m_"), count("x_p_"));
        if log.header() != header {
            return Err(Error::parse(path, "unexpected column layout"));
        }
        let (nm, nl) = (log.n_modes, log.n_locations);
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = || Error::parse(path, format!("bad value in data row {}", line + 1));
            let mut it = rec.iter();
            let mut num = || -> Result<f64> { it.next().and_then(|s| s.parse().ok()).ok_or_else(bad) };
            let [t, v_w, omega_g, k] = [num()?, num()?, num()?, num()?];
            let mut vec = |n: usize| -> Result<Vec<f64>> { (0..n).map(|_| num()).collect() };
            let (x_m, v_m, x_p, v_p) = (vec(nm)?, vec(nm)?, vec(nl)?, vec(nl)?);
            let b: Vec<f64> = vec(SCALARS_B.len())?;
            let tfam_rate = vec(nl)?;
            let eps = num()?;
            let rest: Vec<&str> = rec.iter().skip(header.len() - SCALARS_C.len() + 1).collect();
            if rest.len() != SCALARS_C.len() - 1 {
                return Err(bad());
            }
            log.records.push(SimRecord {
                t,
                v_w,
                omega_g,
                k,
                x_m,
                v_m,
                x_p,
                v_p,
                f_t: b[0],
                f_t_model: b[1],
                torque_g: b[2],
                pitch: b[3],
                p_r: b[4],
                p_g: b[5],
                k_pred: b[6],
                p_r_model: b[7],
                p_rotor: b[8],
                p_elec: b[9],
                tfam_rate,
                eps,
                status: rest[0].to_string(),
                iterations: rest[1].parse().map_err(|_| bad())?,
                terminal_gap: rest[2].parse().map_err(|_| bad())?,
                tail_distance: rest[3].parse().map_err(|_| bad())?,
                fallback: rest[4].to_string(),
                held: rest[5].parse().map_err(|_| bad())?,
            });
            log.solve_times.push(Duration::ZERO);
        }
        Ok(log)
    }

    pub fn write_solve_times(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "solve_time_s", "iterations"])?;
        for (r, d) in self.records.iter().zip(&self.solve_times) {
            w.write_record([r.t.to_string(), d.as_secs_f64().to_string(), r.iterations.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(t: f64) -> SimRecord {
        SimRecord {
            t,
            v_w: 8.0,
            omega_g: 100.0 + t.sin(),
            k: 2.3e7,
            x_m: vec![0.1 / 3.0, -1e-7],
            v_m: vec![1e-3, 2.5e-4],
            x_p: vec![0.3, 0.2, 0.0],
            v_p: vec![0.01, 1.0 / 7.0, 0.0],
            f_t: 4.1e5,
            f_t_model: 4.0e5,
            torque_g: 3.0e4,
            pitch: 0.01,
            p_r: 3.0e6,
            p_g: 2.8e6,
            k_pred: 2.31e7,
            p_r_model: 3.0e6,
            p_rotor: 3.01e6,
            p_elec: 2.79e6,
            tfam_rate: vec![0.0, 1.5, 2.5],
            eps: 0.0,
            status: "optimal".into(),
            iterations: 42,
            terminal_gap: 1e-9,
            tail_distance: f64::NAN,
            fallback: "none".into(),
            held: false,
        }
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ts.csv");
        let mut log = SimLog::new(2, 3);
        for i in 0..5 {
            log.push(record(0.2 * i as f64), Duration::ZERO);
        }
        log.write_csv(&path).unwrap();
        let back = SimLog::read_csv(&path).unwrap();
        assert_eq!(back.header().len(), 4 + 4 + 6 + 10 + 3 + 7);
        assert_eq!(back.records.len(), 5);
        for (a, b) in back.records.iter().zip(&log.records) {
            assert!(a.tail_distance.is_nan());
            let fix = |r: &SimRecord| SimRecord { tail_distance: 0.0, ..r.clone() };
            assert_eq!(fix(a), fix(b));
        }
    }

    #[test]
    fn empty_log_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ts.csv");
        let log = SimLog::new(2, 3);
        log.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(text.lines().next().unwrap().split(',').count(), log.header().len());
        assert!(SimLog::read_csv(&path).unwrap().is_empty());
    }
}
