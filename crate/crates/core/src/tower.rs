//! Fore-aft tower vibration in modal coordinates: polynomial mode shapes,
//! modal mass from a density profile, modal dynamics driven by the rotor
//! thrust, projection onto physical locations, and the TFAM-rate metric.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::aero::{tip_speed_ratio, CoeffSurface, TurbineParams};
use crate::error::{Error, Result};

/// Polynomial mode shapes over normalized height. Column `i` of the
/// coefficient matrix holds mode `i`, ascending in degree.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeShapeSet {
    coeffs: DMatrix<f64>,
}

const NORMALIZATION_TOL: f64 = 1e-9;

impl ModeShapeSet {
    /// Tip-normalized, fixed-base shapes; anything else is rejected.
    pub fn new(coeffs: DMatrix<f64>) -> Result<Self> {
        let s = Self::unnormalized(coeffs)?;
        for i in 0..s.n_modes() {
            let tip = s.eval(i, 1.0);
            let base = s.eval(i, 0.0);
            if (tip - 1.0).abs() > NORMALIZATION_TOL || base.abs() > NORMALIZATION_TOL {
                return Err(Error::InvalidParameter(format!(
                    "mode {i} must be 1 at the tip and 0 at the base, got {tip} and {base}"
                )));
            }
        }
        Ok(s)
    }

    /// Shapes without the normalization check, for custom analyses.
    pub fn unnormalized(coeffs: DMatrix<f64>) -> Result<Self> {
        if coeffs.ncols() == 0 || coeffs.nrows() == 0 {
            return Err(Error::InvalidParameter("mode-shape matrix is empty".into()));
        }
        if coeffs.ncols() > coeffs.nrows() {
            return Err(Error::InvalidParameter(format!(
                "{} modes need at least as many polynomial coefficients, got {}",
                coeffs.ncols(),
                coeffs.nrows()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite mode-shape coefficient".into()));
        }
        Ok(ModeShapeSet { coeffs })
    }

    /// Uniform-cantilever bending modes fitted by least squares to
    /// polynomials of degree `n_dof − 1`, with zero value and slope at the
    /// base and unit tip value imposed exactly.
    pub fn cantilever(n_modes: usize, n_dof: usize) -> Result<Self> {
        const BETA_L: [f64; 4] =
            [1.875_104_068_711_961, 4.694_091_132_974_175, 7.854_757_438_237_613, 10.995_540_734_875_467];
        if n_modes == 0 || n_modes > BETA_L.len() {
            return Err(Error::InvalidParameter(format!("cantilever shapes support 1..=4 modes, got {n_modes}")));
        }
        let targets: Vec<Box<dyn Fn(f64) -> f64>> = BETA_L
            .iter()
            .take(n_modes)
            .map(|&bl| {
                let sigma = (bl.cosh() + bl.cos()) / (bl.sinh() + bl.sin());
                let phi = move |x: f64| {
                    let b = bl * x;
                    b.cosh() - b.cos() - sigma * (b.sinh() - b.sin())
                };
                let tip = phi(1.0);
                Box::new(move |x| phi(x) / tip) as Box<dyn Fn(f64) -> f64>
            })
            .collect();
        Self::fit(&targets, n_dof)
    }

    /// Fore-aft modes of the 5 MW reference land-based tower (tip mass
    /// included), refitted to degree `n_dof − 1`. The second mode peaks
    /// near 0.65–0.72 of the height.
    pub fn reference_tower(n_modes: usize, n_dof: usize) -> Result<Self> {
        const FA: [[f64; 5]; 2] =
            [[0.7004, 2.1963, -5.6202, 6.2275, -2.5040], [-70.5319, -63.7623, 289.7369, -176.5134, 22.0706]];
        if n_modes == 0 || n_modes > FA.len() {
            return Err(Error::InvalidParameter(format!("reference tower shapes support 1..=2 modes, got {n_modes}")));
        }
        let targets: Vec<Box<dyn Fn(f64) -> f64>> = FA
            .iter()
            .take(n_modes)
            .map(|c| {
                // the published coefficients sum to 1 only to four digits
                let sum: f64 = c.iter().sum();
                Box::new(move |x: f64| c.iter().enumerate().map(|(k, a)| a * x.powi(k as i32 + 2)).sum::<f64>() / sum)
                    as Box<dyn Fn(f64) -> f64>
            })
            .collect();
        Self::fit(&targets, n_dof)
    }

    /// Least-squares polynomial fit of tip-normalized targets with the base
    /// conditions and the tip value held exactly.
    fn fit(targets: &[Box<dyn Fn(f64) -> f64>], n_dof: usize) -> Result<Self> {
        let n_modes = targets.len();
        if n_dof < 3 || n_dof < n_modes + 2 {
            return Err(Error::InvalidParameter(format!("{n_modes} modes need more than {n_dof} coefficients")));
        }
        let samples: Vec<f64> = (0..=400).map(|k| k as f64 / 400.0).collect();
        let top = n_dof - 1;
        let free: Vec<usize> = (2..top).collect();
        // eliminate the top coefficient through Σc = 1
        let a = DMatrix::from_fn(samples.len(), free.len(), |r, c| {
            samples[r].powi(free[c] as i32) - samples[r].powi(top as i32)
        });
        let svd = a.svd(true, true);
        let mut coeffs = DMatrix::zeros(n_dof, n_modes);
        for (i, phi) in targets.iter().enumerate() {
            let rhs = DVector::from_iterator(samples.len(), samples.iter().map(|&x| phi(x) - x.powi(top as i32)));
            let sol = svd.solve(&rhs, 1e-14).map_err(|e| Error::Fit(format!("mode-shape fit failed: {e}")))?;
            let mut sum = 0.0;
            for (k, &d) in free.iter().enumerate() {
                coeffs[(d, i)] = sol[k];
                sum += sol[k];
            }
            coeffs[(top, i)] = 1.0 - sum;
        }
        Self::new(coeffs)
    }

    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coeffs
    }
    pub fn n_dof(&self) -> usize {
        self.coeffs.nrows()
    }
    pub fn n_modes(&self) -> usize {
        self.coeffs.ncols()
    }

    #[inline]
    fn eval(&self, mode: usize, z: f64) -> f64 {
        self.coeffs.column(mode).iter().rev().fold(0.0, |acc, c| acc * z + c)
    }

    /// Value of mode `mode` at normalized height `z` (Horner evaluation).
    pub fn shape_at(&self, mode: usize, z: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&z) {
            return Err(Error::Domain(format!("normalized height {z} outside [0, 1]")));
        }
        if mode >= self.n_modes() {
            return Err(Error::Dimension(format!("mode {mode} of {}", self.n_modes())));
        }
        Ok(self.eval(mode, z))
    }

    /// First `n` modes only.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.n_modes() {
            return Err(Error::Dimension(format!("cannot keep {n} of {} modes", self.n_modes())));
        }
        Ok(ModeShapeSet { coeffs: self.coeffs.columns(0, n).into_owned() })
    }

    /// Text format: one line per mode, coefficients ascending in degree.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let vals: std::result::Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
            rows.push(vals.map_err(|_| Error::parse(path, format!("line {}: bad coefficient", lineno + 1)))?);
        }
        let n_dof = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != n_dof) {
            return Err(Error::parse(path, "all modes must have the same number of coefficients"));
        }
        let coeffs = DMatrix::from_fn(n_dof, rows.len(), |r, c| rows[c][r]);
        Self::new(coeffs).map_err(|e| Error::parse(path, e.to_string()))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for i in 0..self.n_modes() {
            let line: Vec<String> = self.coeffs.column(i).iter().map(|c| format!("{c:?}")).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }
}

/// Normalized measurement heights, top first. The fixed base is appended
/// automatically so that v_p at the bottom is always part of the projection.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationSet {
    heights: Vec<f64>,
    n_user: usize,
}

impl LocationSet {
    pub fn new(heights: &[f64]) -> Result<Self> {
        if heights.first() != Some(&1.0) {
            return Err(Error::InvalidParameter("the first location must be the tower top z = 1".into()));
        }
        if heights.windows(2).any(|w| !(w[1] < w[0])) || heights.iter().any(|z| !(0.0..=1.0).contains(z)) {
            return Err(Error::InvalidParameter(format!(
                "locations must lie in [0, 1] and strictly decrease, got {heights:?}"
            )));
        }
        let mut all = heights.to_vec();
        if *all.last().unwrap() > 0.0 {
            all.push(0.0);
        }
        Ok(LocationSet { heights: all, n_user: heights.len() })
    }

    /// All heights including the base.
    pub fn heights(&self) -> &[f64] {
        &self.heights
    }
    /// Number of locations the caller supplied (the base excluded unless given).
    pub fn n_user(&self) -> usize {
        self.n_user
    }
    pub fn len(&self) -> usize {
        self.heights.len()
    }
    pub fn is_empty(&self) -> bool {
        self.heights.is_empty()
    }
}

/// Mass per unit length along normalized height, linearly interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProfile {
    z: Vec<f64>,
    rho: Vec<f64>,
}

impl DensityProfile {
    pub fn new(z: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        if z.is_empty() || z.len() != rho.len() {
            return Err(Error::InvalidParameter("density profile needs matching, non-empty columns".into()));
        }
        if z.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter("density heights must strictly increase".into()));
        }
        if rho.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::InvalidParameter("density must be finite and nonnegative".into()));
        }
        Ok(DensityProfile { z, rho })
    }

    pub fn uniform(rho: f64) -> Result<Self> {
        Self::new(vec![0.0, 1.0], vec![rho, rho])
    }

    pub fn at(&self, z: f64) -> f64 {
        let n = self.z.len();
        if n == 1 || z <= self.z[0] {
            return self.rho[0];
        }
        if z >= self.z[n - 1] {
            return self.rho[n - 1];
        }
        let i = self.z.partition_point(|&g| g <= z) - 1;
        let t = (z - self.z[i]) / (self.z[i + 1] - self.z[i]);
        (1.0 - t) * self.rho[i] + t * self.rho[i + 1]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        DensityProfile { z: self.z.clone(), rho: self.rho.iter().map(|r| r * factor).collect() }
    }

    /// `z,rho_per_length` CSV.
    pub fn load(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let h = rdr.headers()?.clone();
        if h.len() != 2 || h.get(0).map(str::trim) != Some("z") || h.get(1).map(str::trim) != Some("rho_per_length") {
            return Err(Error::parse(path, "header must be `z,rho_per_length`"));
        }
        let (mut z, mut rho) = (Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::parse(path, format!("bad number in row {rec:?}")))
            };
            z.push(parse(0)?);
            rho.push(parse(1)?);
        }
        Self::new(z, rho).map_err(|e| Error::parse(path, e.to_string()))
    }
}

/// Discrete modal mass m_i = Σ_l ρ(z_l)·s_il²·Δz_l·H_t over `node_grid`
/// (first node is the lower end of the first interval).
pub fn modal_mass(shapes: &ModeShapeSet, density: &DensityProfile, h_t: f64, node_grid: &[f64]) -> Result<Vec<f64>> {
    if node_grid.len() < 2 {
        return Err(Error::InvalidParameter("node grid needs at least two nodes".into()));
    }
    if node_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("node grid must be strictly increasing".into()));
    }
    if node_grid[0] < 0.0 || node_grid[node_grid.len() - 1] > 1.0 {
        return Err(Error::InvalidParameter("node grid must lie in [0, 1]".into()));
    }
    let mut m = vec![0.0; shapes.n_modes()];
    for w in node_grid.windows(2) {
        let (z0, z) = (w[0], w[1]);
        let weight = density.at(z) * (z - z0) * h_t;
        for (i, mi) in m.iter_mut().enumerate() {
            let s = shapes.eval(i, z);
            *mi += weight * s * s;
        }
    }
    Ok(m)
}

/// Built-in mode-shape families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeFamily {
    /// 5 MW reference tower fore-aft modes.
    #[default]
    Reference,
    /// Uniform Euler-Bernoulli cantilever without tip mass.
    Cantilever,
}

/// Inputs that define a tower model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TowerParams {
    pub height: f64,
    /// Mass per unit length of the default uniform profile (kg/m).
    pub density: f64,
    /// Lumped rotor-nacelle mass at the tip (kg).
    pub top_mass: f64,
    pub frequencies: Vec<f64>,
    pub damping_ratios: Vec<f64>,
    pub locations: Vec<f64>,
    pub shapes: ShapeFamily,
    pub n_dof: usize,
    pub n_nodes: usize,
    pub tfam_damping: Option<Vec<f64>>,
    pub tfam_stiffness: Option<Vec<f64>>,
}

impl Default for TowerParams {
    fn default() -> Self {
        TowerParams {
            height: 87.6,
            density: 347_460.0 / 87.6,
            top_mass: 350_000.0,
            frequencies: vec![0.3240, 2.9003],
            damping_ratios: vec![0.01, 0.01],
            locations: vec![1.0, 0.72],
            shapes: ShapeFamily::Reference,
            n_dof: 6,
            n_nodes: 101,
            tfam_damping: None,
            tfam_stiffness: None,
        }
    }
}

impl TowerParams {
    pub fn node_grid(&self) -> Vec<f64> {
        let n = self.n_nodes.max(2);
        (0..n).map(|k| k as f64 / (n - 1) as f64).collect()
    }

    /// Builds the model with uniform density and the built-in shapes.
    pub fn build(&self) -> Result<ModalSystem> {
        let shapes = match self.shapes {
            ShapeFamily::Reference => ModeShapeSet::reference_tower(self.frequencies.len(), self.n_dof)?,
            ShapeFamily::Cantilever => ModeShapeSet::cantilever(self.frequencies.len(), self.n_dof)?,
        };
        let density = DensityProfile::uniform(self.density)?;
        self.build_with(shapes, density)
    }

    pub fn build_with(&self, shapes: ModeShapeSet, density: DensityProfile) -> Result<ModalSystem> {
        let locations = LocationSet::new(&self.locations)?;
        let mut sys = build_modal_system(
            &shapes,
            &locations,
            &density,
            self.height,
            &self.node_grid(),
            self.top_mass,
            &self.frequencies,
            &self.damping_ratios,
        )?;
        if let Some(d) = &self.tfam_damping {
            sys.set_tfam_coefficients(Some(d.clone()), None)?;
        }
        if let Some(k) = &self.tfam_stiffness {
            sys.set_tfam_coefficients(None, Some(k.clone()))?;
        }
        Ok(sys)
    }
}

/// Diagonal modal model M ẍ + D ẋ + K x = Φᵀ B_o F_T with its projection
/// onto the measurement locations.
#[derive(Debug, Clone)]
pub struct ModalSystem {
    pub shapes: ModeShapeSet,
    pub locations: LocationSet,
    pub mass: Vec<f64>,
    pub stiffness: Vec<f64>,
    pub damping: Vec<f64>,
    pub input: Vec<f64>,
    /// N_m × N_l, S[i][l] = s_i(z_l).
    pub shape_matrix: DMatrix<f64>,
    pub height: f64,
    pub density_at_nodes: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub damping_ratios: Vec<f64>,
    pub tfam_damping: Vec<f64>,
    pub tfam_stiffness: Vec<f64>,
}

/// S[i][l] = s_i(z_l).
pub fn build_shape_matrix(shapes: &ModeShapeSet, locations: &LocationSet) -> DMatrix<f64> {
    let z = locations.heights();
    DMatrix::from_fn(shapes.n_modes(), z.len(), |i, l| shapes.eval(i, z[l]))
}

#[allow(clippy::too_many_arguments)]
pub fn build_modal_system(
    shapes: &ModeShapeSet,
    locations: &LocationSet,
    density: &DensityProfile,
    h_t: f64,
    node_grid: &[f64],
    top_mass: f64,
    frequencies: &[f64],
    damping_ratios: &[f64],
) -> Result<ModalSystem> {
    let nm = shapes.n_modes();
    if frequencies.len() != nm || damping_ratios.len() != nm {
        return Err(Error::Dimension(format!(
            "{nm} modes but {} frequencies and {} damping ratios",
            frequencies.len(),
            damping_ratios.len()
        )));
    }
    if frequencies.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
        return Err(Error::InvalidParameter("natural frequencies must be positive".into()));
    }
    if damping_ratios.iter().any(|z| !(0.0..1.0).contains(z)) {
        return Err(Error::InvalidParameter("damping ratios must lie in [0, 1)".into()));
    }
    if !(h_t > 0.0) || !(top_mass >= 0.0) {
        return Err(Error::InvalidParameter("tower height must be positive and top mass nonnegative".into()));
    }
    let mut mass = modal_mass(shapes, density, h_t, node_grid)?;
    for (i, m) in mass.iter_mut().enumerate() {
        let tip = shapes.eval(i, 1.0);
        *m += top_mass * tip * tip;
    }
    if let Some(i) = mass.iter().position(|m| !(*m > 0.0)) {
        return Err(Error::Singularity(format!("modal mass of mode {i} is zero")));
    }
    let omega: Vec<f64> = frequencies.iter().map(|f| 2.0 * PI * f).collect();
    let stiffness: Vec<f64> = mass.iter().zip(&omega).map(|(m, w)| m * w * w).collect();
    let damping: Vec<f64> = mass.iter().zip(&omega).zip(damping_ratios).map(|((m, w), z)| 2.0 * z * m * w).collect();
    // thrust acts at the tip: Φᵀ B_o picks each mode's tip value
    let input: Vec<f64> = (0..nm).map(|i| shapes.eval(i, 1.0) / mass[i]).collect();
    let shape_matrix = build_shape_matrix(shapes, locations);
    let nl = locations.len();
    let tfam_stiffness = (0..nl).map(|l| (0..nm).map(|i| stiffness[i] * shape_matrix[(i, l)].powi(2)).sum()).collect();
    let tfam_damping = (0..nl).map(|l| (0..nm).map(|i| damping[i] * shape_matrix[(i, l)].powi(2)).sum()).collect();
    Ok(ModalSystem {
        shapes: shapes.clone(),
        locations: locations.clone(),
        mass,
        stiffness,
        damping,
        input,
        shape_matrix,
        height: h_t,
        density_at_nodes: node_grid.iter().map(|&z| density.at(z)).collect(),
        frequencies: frequencies.to_vec(),
        damping_ratios: damping_ratios.to_vec(),
        tfam_damping,
        tfam_stiffness,
    })
}

/// Modal displacement and velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalState {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl ModalState {
    pub fn zeros(n_modes: usize) -> Self {
        ModalState { x: vec![0.0; n_modes], v: vec![0.0; n_modes] }
    }
}

impl ModalSystem {
    pub fn n_modes(&self) -> usize {
        self.mass.len()
    }
    pub fn n_locations(&self) -> usize {
        self.locations.len()
    }

    pub fn set_tfam_coefficients(&mut self, damping: Option<Vec<f64>>, stiffness: Option<Vec<f64>>) -> Result<()> {
        let n = self.n_locations();
        for v in [&damping, &stiffness].into_iter().flatten() {
            if v.len() != n {
                return Err(Error::Dimension(format!(
                    "TFAM coefficients need {n} entries (base included), got {}",
                    v.len()
                )));
            }
        }
        if let Some(d) = damping {
            self.tfam_damping = d;
        }
        if let Some(k) = stiffness {
            self.tfam_stiffness = k;
        }
        Ok(())
    }

    /// Model acceleration ẍ_m = B_m F_T − M⁻¹D v − M⁻¹K x.
    pub fn acceleration(&self, state: &ModalState, f_t: f64) -> Vec<f64> {
        (0..self.n_modes())
            .map(|i| {
                self.input[i] * f_t - (self.damping[i] * state.v[i] + self.stiffness[i] * state.x[i]) / self.mass[i]
            })
            .collect()
    }

    /// One RK4 step of the modal dynamics with constant thrust.
    pub fn step(&self, state: &ModalState, f_t: f64, dt: f64) -> ModalState {
        let n = self.n_modes();
        let deriv = |s: &ModalState| (s.v.clone(), self.acceleration(s, f_t));
        let shift = |s: &ModalState, d: &(Vec<f64>, Vec<f64>), h: f64| ModalState {
            x: (0..n).map(|i| s.x[i] + h * d.0[i]).collect(),
            v: (0..n).map(|i| s.v[i] + h * d.1[i]).collect(),
        };
        let k1 = deriv(state);
        let k2 = deriv(&shift(state, &k1, 0.5 * dt));
        let k3 = deriv(&shift(state, &k2, 0.5 * dt));
        let k4 = deriv(&shift(state, &k3, dt));
        ModalState {
            x: (0..n).map(|i| state.x[i] + dt / 6.0 * (k1.0[i] + 2.0 * k2.0[i] + 2.0 * k3.0[i] + k4.0[i])).collect(),
            v: (0..n).map(|i| state.v[i] + dt / 6.0 * (k1.1[i] + 2.0 * k2.1[i] + 2.0 * k3.1[i] + k4.1[i])).collect(),
        }
    }

    /// Sᵀ·q for a modal vector q.
    pub fn project(&self, modal: &[f64]) -> Vec<f64> {
        (0..self.n_locations())
            .map(|l| (0..self.n_modes()).map(|i| self.shape_matrix[(i, l)] * modal[i]).sum())
            .collect()
    }

    /// Physical displacement and velocity at every location.
    pub fn project_to_physical(&self, state: &ModalState) -> (Vec<f64>, Vec<f64>) {
        (self.project(&state.x), self.project(&state.v))
    }

    /// Static deflection under constant thrust: K_m x = Φᵀ B_o F_T.
    pub fn static_deflection(&self, f_t: f64) -> ModalState {
        ModalState {
            x: (0..self.n_modes()).map(|i| self.input[i] * self.mass[i] * f_t / self.stiffness[i]).collect(),
            v: vec![0.0; self.n_modes()],
        }
    }

    /// ½(vᵀMv + xᵀKx).
    pub fn energy(&self, state: &ModalState) -> f64 {
        (0..self.n_modes())
            .map(|i| 0.5 * (self.mass[i] * state.v[i].powi(2) + self.stiffness[i] * state.x[i].powi(2)))
            .sum()
    }

    /// TFAM rate at every location from the model state and acceleration.
    pub fn tfam_rates(&self, state: &ModalState, f_t: f64) -> Vec<f64> {
        let v = self.project(&state.v);
        let a = self.project(&self.acceleration(state, f_t));
        let z = self.locations.heights();
        (0..self.n_locations())
            .map(|l| tfam_rate(self.height, v[0], a[0], v[l], a[l], z[l], self.tfam_damping[l], self.tfam_stiffness[l]))
            .collect()
    }

    /// Copy restricted to the first `n` modes.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        let shapes = self.shapes.truncated(n)?;
        Ok(ModalSystem {
            shape_matrix: self.shape_matrix.rows(0, n).into_owned(),
            shapes,
            locations: self.locations.clone(),
            mass: self.mass[..n].to_vec(),
            stiffness: self.stiffness[..n].to_vec(),
            damping: self.damping[..n].to_vec(),
            input: self.input[..n].to_vec(),
            height: self.height,
            density_at_nodes: self.density_at_nodes.clone(),
            frequencies: self.frequencies[..n].to_vec(),
            damping_ratios: self.damping_ratios[..n].to_vec(),
            tfam_damping: self.tfam_damping.clone(),
            tfam_stiffness: self.tfam_stiffness.clone(),
        })
    }
}

/// F_T = ½ρA·C_t(λ, β)·v_w².
pub fn thrust_force(omega_g: f64, beta: f64, v_w: f64, ct: &CoeffSurface, p: &TurbineParams) -> Result<f64> {
    if !(omega_g > 0.0) {
        return Err(Error::Domain(format!("thrust needs omega_g > 0, got {omega_g}")));
    }
    let lambda = tip_speed_ratio(omega_g, v_w, p)?;
    Ok(p.thrust_reference(v_w) * ct.lookup(lambda, beta))
}

/// d/dt TFAM(z_l) = H_t(1 − z_l)·(d_l(a_top − a_l) + k_l(v_top − v_l)).
#[allow(clippy::too_many_arguments)]
pub fn tfam_rate(h_t: f64, v_top: f64, a_top: f64, v_l: f64, a_l: f64, z_l: f64, d_l: f64, k_l: f64) -> f64 {
    h_t * (1.0 - z_l) * (d_l * (a_top - a_l) + k_l * (v_top - v_l))
}
