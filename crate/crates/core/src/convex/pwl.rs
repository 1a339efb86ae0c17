//! Concave piecewise-linear under-envelopes in K, tabulated over wind speed.
//!
//! At each wind grid point the normalized function f(K) = F(v_w, K)/v_wᵉ is
//! replaced by min_i(a_i K + b_i), which never exceeds f on the K grid.

use std::path::Path;

use log::warn;

use crate::aero::{available_power, max_thrust, CoeffSurface, TurbineParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PwlEnvelope {
    pub wind_grid: Vec<f64>,
    /// Per wind point, lines (a_i, b_i) of the normalized function, SI units.
    pub segments: Vec<Vec<(f64, f64)>>,
    /// e in F = f·v_wᵉ: 3 for power, 2 for thrust.
    pub wind_exponent: i32,
}

/// Upper concave hull of points with increasing x, as indices.
fn upper_hull(x: &[f64], y: &[f64]) -> Vec<usize> {
    let mut hull: Vec<usize> = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            // drop `a` unless it lies strictly above the chord o→i
            let cross = (x[a] - x[o]) * (y[i] - y[o]) - (y[a] - y[o]) * (x[i] - x[o]);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull
}

fn line_through(x: &[f64], y: &[f64], i: usize, j: usize) -> (f64, f64) {
    let a = (y[j] - y[i]) / (x[j] - x[i]);
    (a, y[i] - a * x[i])
}

#[inline]
fn min_lines(lines: &[(f64, f64)], k: f64) -> f64 {
    lines.iter().map(|(a, b)| a * k + b).fold(f64::INFINITY, f64::min)
}

/// Up to `xi` lines whose minimum underestimates `y` at every `x`.
pub fn fit_concave_underestimator(x: &[f64], y: &[f64], xi: usize) -> Result<Vec<(f64, f64)>> {
    if xi == 0 {
        return Err(Error::Envelope("at least one segment is required".into()));
    }
    if x.len() < 2 || x.len() != y.len() || x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Envelope("K grid must have >= 2 strictly increasing points".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Envelope("non-finite sample".into()));
    }
    // fit to slightly lowered data so rescaling by vᵉ cannot round above it
    let scale = y.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let margin = 1e-12 * scale;
    let target: Vec<f64> = y.iter().map(|v| v - margin).collect();
    let y = &target[..];
    let hull = upper_hull(x, y);
    let last = hull.len() - 1;
    // breakpoints are positions into `hull`
    let mut bps: Vec<usize> = vec![0, last];
    if xi > 1 {
        let top = (0..hull.len()).max_by(|&a, &b| y[hull[a]].total_cmp(&y[hull[b]])).unwrap();
        if top != 0 && top != last {
            bps.insert(1, top);
        }
    }
    bps.dedup();
    while bps.len() - 1 < xi {
        let mut best: Option<(f64, usize)> = None;
        for w in bps.windows(2) {
            let (l, r) = (w[0], w[1]);
            let (a, b) = line_through(x, y, hull[l], hull[r]);
            for h in l + 1..r {
                let gap = y[hull[h]] - (a * x[hull[h]] + b);
                if gap > 0.0 && best.is_none_or(|(g, _)| gap > g) {
                    best = Some((gap, h));
                }
            }
        }
        match best {
            Some((_, h)) => {
                let pos = bps.partition_point(|&b| b < h);
                bps.insert(pos, h);
            }
            None => break,
        }
    }
    let mut lines: Vec<(f64, f64)> = if bps.len() == 1 {
        vec![(0.0, y[hull[0]])]
    } else {
        bps.windows(2).map(|w| line_through(x, y, hull[w[0]], hull[w[1]])).collect()
    };

    // lower the active lines wherever the data dips below them
    for _ in 0..200 {
        let mut excess = vec![0.0_f64; lines.len()];
        for (&k, &v) in x.iter().zip(y) {
            let (idx, f) =
                lines.iter().enumerate().map(|(i, (a, b))| (i, a * k + b)).min_by(|p, q| p.1.total_cmp(&q.1)).unwrap();
            if f > v {
                excess[idx] = excess[idx].max(f - v);
            }
        }
        if excess.iter().all(|e| *e == 0.0) {
            break;
        }
        for (line, e) in lines.iter_mut().zip(&excess) {
            if *e > 0.0 {
                line.1 -= e + margin;
            }
        }
    }
    if let Some((k, v)) = x.iter().zip(y).find(|(k, v)| min_lines(&lines, **k) > **v) {
        return Err(Error::Envelope(format!("underestimation violated at K = {k}: {} > {v}", min_lines(&lines, *k))));
    }
    Ok(lines)
}

impl PwlEnvelope {
    /// Tabulates `f(v, K)/vᵉ` on the grids and fits each wind slice.
    pub fn build(
        wind_grid: &[f64],
        k_grid: &[f64],
        xi: usize,
        wind_exponent: i32,
        f: impl Fn(f64, f64) -> Result<f64>,
    ) -> Result<Self> {
        if wind_grid.is_empty() || wind_grid.windows(2).any(|w| !(w[1] > w[0])) || !(wind_grid[0] > 0.0) {
            return Err(Error::Envelope("wind grid must be positive and strictly increasing".into()));
        }
        let mut segments = Vec::with_capacity(wind_grid.len());
        for &v in wind_grid {
            let norm = v.powi(wind_exponent);
            let y: Vec<f64> = k_grid.iter().map(|&k| f(v, k).map(|val| val / norm)).collect::<Result<_>>()?;
            let lines = fit_concave_underestimator(k_grid, &y, xi)
                .map_err(|e| Error::Envelope(format!("wind {v} m/s: {e}")))?;
            segments.push(lines);
        }
        Ok(PwlEnvelope { wind_grid: wind_grid.to_vec(), segments, wind_exponent })
    }

    pub fn n_segments(&self) -> usize {
        self.segments.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Bracketing wind index and blend factor θ, clamped to the grid.
    pub fn bracket(&self, v_w: f64) -> (usize, f64) {
        let g = &self.wind_grid;
        let n = g.len();
        if n == 1 {
            return (0, 0.0);
        }
        if v_w < g[0] || v_w > g[n - 1] {
            warn!("wind speed {v_w} m/s outside the envelope grid [{}, {}], clamped", g[0], g[n - 1]);
        }
        if v_w <= g[0] {
            return (0, 0.0);
        }
        if v_w >= g[n - 1] {
            return (n - 2, 1.0);
        }
        let i = g.partition_point(|&x| x <= v_w) - 1;
        (i, (v_w - g[i]) / (g[i + 1] - g[i]))
    }

    /// Value at one wind grid point.
    pub fn eval_at(&self, idx: usize, k: f64) -> f64 {
        min_lines(&self.segments[idx], k) * self.wind_grid[idx].powi(self.wind_exponent)
    }

    /// θ-blend of the two bracketing grid evaluations.
    pub fn eval(&self, v_w: f64, k: f64) -> f64 {
        let (i, t) = self.bracket(v_w);
        if self.wind_grid.len() == 1 || t == 0.0 {
            return self.eval_at(i, k);
        }
        if t == 1.0 {
            return self.eval_at(i + 1, k);
        }
        (1.0 - t) * self.eval_at(i, k) + t * self.eval_at(i + 1, k)
    }

    /// Affine cuts (slope, intercept) in SI whose minimum equals `eval(v_w, ·)`.
    /// A blend of two minima is the minimum over all pairwise blends.
    pub fn cuts(&self, v_w: f64) -> Vec<(f64, f64)> {
        let (i, t) = self.bracket(v_w);
        let scaled = |idx: usize, w: f64| -> Vec<(f64, f64)> {
            let s = w * self.wind_grid[idx].powi(self.wind_exponent);
            self.segments[idx].iter().map(|(a, b)| (a * s, b * s)).collect()
        };
        let mut out = if self.wind_grid.len() == 1 || t == 0.0 {
            scaled(i, 1.0)
        } else if t == 1.0 {
            scaled(i + 1, 1.0)
        } else {
            let (lo, hi) = (scaled(i, 1.0 - t), scaled(i + 1, t));
            lo.iter().flat_map(|l| hi.iter().map(move |h| (l.0 + h.0, l.1 + h.1))).collect()
        };
        out.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
        out.dedup();
        out
    }

    /// `v_w,i,a_i,b_i` CSV.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["v_w", "i", "a_i", "b_i"])?;
        for (v, lines) in self.wind_grid.iter().zip(&self.segments) {
            for (i, (a, b)) in lines.iter().enumerate() {
                w.write_record([format!("{v:?}"), (i + 1).to_string(), format!("{a:?}"), format!("{b:?}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path, wind_exponent: i32) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let h = rdr.headers()?.clone();
        if h.iter().map(str::trim).ne(["v_w", "i", "a_i", "b_i"]) {
            return Err(Error::parse(path, "header must be `v_w,i,a_i,b_i`"));
        }
        let mut wind_grid: Vec<f64> = Vec::new();
        let mut segments: Vec<Vec<(f64, f64)>> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let num = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::parse(path, format!("bad number in row {rec:?}")))
            };
            let v = num(0)?;
            if wind_grid.last() != Some(&v) {
                if wind_grid.last().is_some_and(|&l| v < l) {
                    return Err(Error::parse(path, "wind speeds must be ascending"));
                }
                wind_grid.push(v);
                segments.push(Vec::new());
            }
            segments.last_mut().unwrap().push((num(2)?, num(3)?));
        }
        if wind_grid.is_empty() {
            return Err(Error::parse(path, "no segments"));
        }
        Ok(PwlEnvelope { wind_grid, segments, wind_exponent })
    }
}

/// Default wind grid: 3 to 25 m/s at 1 m/s.
pub fn default_wind_grid() -> Vec<f64> {
    (3..=25).map(f64::from).collect()
}

/// `n` points between the kinetic energies at ω_g,min and ω_g,max.
pub fn default_k_grid(p: &TurbineParams, n: usize) -> Vec<f64> {
    let j = p.equivalent_inertia();
    let lo = 0.5 * j * p.omega_g_min.powi(2);
    let hi = 0.5 * j * p.omega_g_max.powi(2);
    let n = n.max(2);
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

pub fn build_pwl_available_power(
    cp: &CoeffSurface,
    p: &TurbineParams,
    wind_grid: &[f64],
    k_grid: &[f64],
    xi: usize,
) -> Result<PwlEnvelope> {
    PwlEnvelope::build(wind_grid, k_grid, xi, 3, |v, k| available_power(v, k, cp, p))
}

pub fn build_pwl_max_thrust(
    ct: &CoeffSurface,
    p: &TurbineParams,
    wind_grid: &[f64],
    k_grid: &[f64],
    xi: usize,
) -> Result<PwlEnvelope> {
    PwlEnvelope::build(wind_grid, k_grid, xi, 2, |v, k| max_thrust(v, k, ct, p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_target_single_segment_exact() {
        let x: Vec<f64> = (0..50).map(|i| 1.0 + i as f64).collect();
        let y: Vec<f64> = x.iter().map(|k| 0.3 * k + 2.0).collect();
        let lines = fit_concave_underestimator(&x, &y, 1).unwrap();
        assert_eq!(lines.len(), 1);
        assert!((lines[0].0 - 0.3).abs() < 1e-12 && (lines[0].1 - 2.0).abs() < 1e-9);
        // more segments collapse onto the same line
        let many = fit_concave_underestimator(&x, &y, 5).unwrap();
        for k in &x {
            assert!((min_lines(&many, *k) - (0.3 * k + 2.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn single_chord_underestimates() {
        let x: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
        let y: Vec<f64> = x.iter().map(|k| (6.0 * k).sin() + 0.3 * k).collect();
        let lines = fit_concave_underestimator(&x, &y, 1).unwrap();
        assert_eq!(lines.len(), 1);
        for (k, v) in x.iter().zip(&y) {
            assert!(min_lines(&lines, *k) <= *v);
        }
        let five = fit_concave_underestimator(&x, &y, 5).unwrap();
        assert!(five.len() <= 5);
        for (k, v) in x.iter().zip(&y) {
            assert!(min_lines(&five, *k) <= *v);
        }
    }

    #[test]
    fn available_power_envelope_underestimates() {
        let p = TurbineParams::nrel_5mw();
        let cp = CoeffSurface::default_power();
        let wg = default_wind_grid();
        let kg = default_k_grid(&p, 200);
        let env = build_pwl_available_power(&cp, &p, &wg, &kg, 5).unwrap();
        for &v in &wg {
            for &k in &kg {
                assert!(env.eval(v, k) <= available_power(v, k, &cp, &p).unwrap());
            }
        }
    }

    #[test]
    fn blend_and_cuts_agree() {
        let env = PwlEnvelope {
            wind_grid: vec![4.0, 5.0],
            segments: vec![vec![(1.0, 0.0), (-1.0, 4.0)], vec![(0.5, 1.0), (-2.0, 9.0)]],
            wind_exponent: 3,
        };
        assert_eq!(env.eval(4.0, 1.0), 64.0);
        assert_eq!(env.eval(5.0, 1.0), 1.5 * 125.0);
        let mid = env.eval(4.5, 1.7);
        assert!((mid - 0.5 * (env.eval(4.0, 1.7) + env.eval(5.0, 1.7))).abs() < 1e-12);
        for &v in &[4.0, 4.3, 4.5, 5.0] {
            let cuts = env.cuts(v);
            for k in [0.0, 0.5, 1.7, 2.0, 3.3, 5.0] {
                assert!((min_lines(&cuts, k) - env.eval(v, k)).abs() < 1e-9);
            }
        }
        // two segments meeting at K = 2 take the common value there
        assert_eq!(env.eval(4.0, 2.0), 2.0 * 64.0);
    }

    #[test]
    fn csv_roundtrip() {
        let env = PwlEnvelope {
            wind_grid: vec![4.0, 5.0],
            segments: vec![vec![(1.0e-5, 0.1)], vec![(0.5, 1.0), (-2.0, 9.0 + 1e-13)]],
            wind_exponent: 3,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pwl.csv");
        env.write_csv(&path).unwrap();
        assert_eq!(PwlEnvelope::read_csv(&path, 3).unwrap(), env);
    }
}
