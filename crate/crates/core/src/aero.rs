//! Rigid drive-train plant: aerodynamic coefficient surfaces, rotor and
//! generator powers, available-power and maximum-thrust envelopes, and the
//! pitch inverse map.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Betz limit 16/27, the upper bound of any physical power coefficient.
pub const BETZ_LIMIT: f64 = 16.0 / 27.0;
pub const MAX_THRUST_COEFF: f64 = 2.0;

/// Physical constants and operating limits of the turbine. SI units, angles in rad.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TurbineParams {
    pub air_density: f64,
    pub rotor_area: f64,
    pub rotor_diameter: f64,
    pub gearbox_ratio: f64,
    pub rotor_inertia: f64,
    pub generator_inertia: f64,
    pub generator_efficiency: f64,
    pub omega_g_min: f64,
    pub omega_g_max: f64,
    pub omega_g_rated: f64,
    pub torque_g_max: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    pub power_g_rated: f64,
}

/// Partial parameter set, as read from a key-value file or a `[turbine]`
/// config section. Missing keys fall back to the NREL-5MW-like defaults.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TurbineOverrides {
    pub air_density: Option<f64>,
    pub rotor_area: Option<f64>,
    pub rotor_diameter: Option<f64>,
    pub gearbox_ratio: Option<f64>,
    pub rotor_inertia: Option<f64>,
    pub generator_inertia: Option<f64>,
    pub generator_efficiency: Option<f64>,
    pub omega_g_min: Option<f64>,
    pub omega_g_max: Option<f64>,
    pub omega_g_rated: Option<f64>,
    pub torque_g_max: Option<f64>,
    pub beta_min: Option<f64>,
    pub beta_max: Option<f64>,
    pub power_g_rated: Option<f64>,
}

impl Default for TurbineParams {
    fn default() -> Self {
        Self::nrel_5mw()
    }
}

impl TurbineParams {
    /// NREL 5 MW reference turbine values.
    pub fn nrel_5mw() -> Self {
        let rotor_diameter = 126.0;
        TurbineParams {
            air_density: 1.225,
            rotor_area: PI * rotor_diameter * rotor_diameter / 4.0,
            rotor_diameter,
            gearbox_ratio: 97.0,
            rotor_inertia: 38_759_236.0,
            generator_inertia: 534.116,
            generator_efficiency: 0.944,
            omega_g_min: 70.16,
            omega_g_max: 135.0,
            omega_g_rated: 122.9096,
            torque_g_max: 47_402.91,
            beta_min: 0.0,
            beta_max: PI / 2.0,
            power_g_rated: 5.0e6,
        }
    }

    /// J = J_g + J_r / G², always recomputed from its parts.
    pub fn equivalent_inertia(&self) -> f64 {
        self.generator_inertia + self.rotor_inertia / (self.gearbox_ratio * self.gearbox_ratio)
    }

    /// Reference power ½ρA·v³ that multiplies C_p.
    pub fn power_reference(&self, v_w: f64) -> f64 {
        0.5 * self.air_density * self.rotor_area * v_w * v_w * v_w
    }

    /// Reference force ½ρA·v² that multiplies C_t.
    pub fn thrust_reference(&self, v_w: f64) -> f64 {
        0.5 * self.air_density * self.rotor_area * v_w * v_w
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("air_density", self.air_density),
            ("rotor_area", self.rotor_area),
            ("rotor_diameter", self.rotor_diameter),
            ("rotor_inertia", self.rotor_inertia),
            ("generator_inertia", self.generator_inertia),
            ("generator_efficiency", self.generator_efficiency),
            ("omega_g_min", self.omega_g_min),
            ("torque_g_max", self.torque_g_max),
            ("power_g_rated", self.power_g_rated),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {value}")));
            }
        }
        if !(self.gearbox_ratio >= 1.0) {
            return Err(Error::InvalidParameter(format!("gearbox_ratio must be >= 1, got {}", self.gearbox_ratio)));
        }
        if self.generator_efficiency > 1.0 {
            return Err(Error::InvalidParameter("generator_efficiency must be <= 1".into()));
        }
        if !(self.omega_g_min < self.omega_g_rated && self.omega_g_rated <= self.omega_g_max) {
            return Err(Error::InvalidParameter("require 0 < omega_g_min < omega_g_rated <= omega_g_max".into()));
        }
        if !(self.beta_min < self.beta_max) {
            return Err(Error::InvalidParameter("require beta_min < beta_max".into()));
        }
        Ok(())
    }

    pub fn with_overrides(mut self, o: &TurbineOverrides) -> Result<Self> {
        macro_rules! apply {
            ($($f:ident),*) => { $( if let Some(v) = o.$f { self.$f = v; } )* };
        }
        apply!(
            air_density,
            rotor_diameter,
            gearbox_ratio,
            rotor_inertia,
            generator_inertia,
            generator_efficiency,
            omega_g_min,
            omega_g_max,
            omega_g_rated,
            torque_g_max,
            beta_min,
            beta_max,
            power_g_rated
        );
        self.rotor_area = o.rotor_area.unwrap_or(PI * self.rotor_diameter * self.rotor_diameter / 4.0);
        self.validate()?;
        Ok(self)
    }

    /// Parses the flat `name = value` parameter format. Blank lines and `#`
    /// comments are ignored; unspecified keys keep their defaults.
    pub fn parse_kv(text: &str, origin: &Path) -> Result<Self> {
        let mut o = TurbineOverrides::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, format!("line {}: expected `name = value`", lineno + 1)))?;
            let key = key.trim();
            let value: f64 = value.trim().parse().map_err(|_| {
                Error::parse(origin, format!("line {}: `{}` is not a number", lineno + 1, value.trim()))
            })?;
            let slot = match key {
                "air_density" => &mut o.air_density,
                "rotor_area" => &mut o.rotor_area,
                "rotor_diameter" => &mut o.rotor_diameter,
                "gearbox_ratio" => &mut o.gearbox_ratio,
                "rotor_inertia" => &mut o.rotor_inertia,
                "generator_inertia" => &mut o.generator_inertia,
                "generator_efficiency" => &mut o.generator_efficiency,
                "omega_g_min" => &mut o.omega_g_min,
                "omega_g_max" => &mut o.omega_g_max,
                "omega_g_rated" => &mut o.omega_g_rated,
                "torque_g_max" => &mut o.torque_g_max,
                "beta_min" => &mut o.beta_min,
                "beta_max" => &mut o.beta_max,
                "power_g_rated" => &mut o.power_g_rated,
                other => return Err(Error::parse(origin, format!("line {}: unknown key `{other}`", lineno + 1))),
            };
            *slot = Some(value);
        }
        Self::nrel_5mw().with_overrides(&o)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_kv(&text, path)
    }

    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        let fields = [
            ("air_density", self.air_density),
            ("rotor_area", self.rotor_area),
            ("rotor_diameter", self.rotor_diameter),
            ("gearbox_ratio", self.gearbox_ratio),
            ("rotor_inertia", self.rotor_inertia),
            ("generator_inertia", self.generator_inertia),
            ("generator_efficiency", self.generator_efficiency),
            ("omega_g_min", self.omega_g_min),
            ("omega_g_max", self.omega_g_max),
            ("omega_g_rated", self.omega_g_rated),
            ("torque_g_max", self.torque_g_max),
            ("beta_min", self.beta_min),
            ("beta_max", self.beta_max),
            ("power_g_rated", self.power_g_rated),
        ];
        for (k, v) in fields {
            let _ = writeln!(s, "{k} = {v:?}");
        }
        s
    }

    /// Generator speed from the stored kinetic energy K = ½Jω².
    pub fn omega_from_energy(&self, k: f64) -> f64 {
        (2.0 * k.max(0.0) / self.equivalent_inertia()).sqrt()
    }

    pub fn energy_from_omega(&self, omega_g: f64) -> f64 {
        0.5 * self.equivalent_inertia() * omega_g * omega_g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoeffKind {
    Power,
    Thrust,
}

impl CoeffKind {
    fn upper(self) -> f64 {
        match self {
            CoeffKind::Power => BETZ_LIMIT,
            CoeffKind::Thrust => MAX_THRUST_COEFF,
        }
    }
}

/// Gridded coefficient map over (λ, β), stored row-major with λ outer.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffSurface {
    kind: CoeffKind,
    lambda_grid: Vec<f64>,
    beta_grid: Vec<f64>,
    values: Vec<f64>,
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1]) && v.iter().all(|x| x.is_finite())
}

/// Index `i` of the cell `[grid[i], grid[i+1]]` holding `x` and the local
/// fraction in [0, 1], with `x` clamped to the grid range.
#[inline]
fn locate(grid: &[f64], x: f64) -> (usize, f64) {
    let n = grid.len();
    if n == 1 || x <= grid[0] {
        return (0, 0.0);
    }
    if x >= grid[n - 1] {
        return (n - 2, 1.0);
    }
    let i = grid.partition_point(|&g| g <= x) - 1;
    let t = (x - grid[i]) / (grid[i + 1] - grid[i]);
    (i, t)
}

impl CoeffSurface {
    pub fn new(kind: CoeffKind, lambda_grid: Vec<f64>, beta_grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if lambda_grid.len() < 2 || beta_grid.len() < 2 {
            return Err(Error::InvalidParameter("coefficient grid needs at least 2 points per axis".into()));
        }
        if !strictly_increasing(&lambda_grid) || !strictly_increasing(&beta_grid) {
            return Err(Error::InvalidParameter("coefficient grid axes must be strictly increasing".into()));
        }
        if values.len() != lambda_grid.len() * beta_grid.len() {
            return Err(Error::InvalidParameter(format!(
                "coefficient grid has {} values, expected {}x{}",
                values.len(),
                lambda_grid.len(),
                beta_grid.len()
            )));
        }
        let hi = kind.upper();
        if let Some(bad) = values.iter().find(|v| !(**v >= 0.0 && **v <= hi)) {
            return Err(Error::InvalidParameter(format!("{kind:?} coefficient {bad} outside [0, {hi}]")));
        }
        Ok(CoeffSurface { kind, lambda_grid, beta_grid, values })
    }

    /// Builds a surface by evaluating `f(λ, β)` at every node, clipped to the
    /// physical range of `kind`.
    pub fn from_fn(
        kind: CoeffKind,
        lambda_grid: Vec<f64>,
        beta_grid: Vec<f64>,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let hi = kind.upper();
        let mut values = Vec::with_capacity(lambda_grid.len() * beta_grid.len());
        for &l in &lambda_grid {
            for &b in &beta_grid {
                values.push(f(l, b).clamp(0.0, hi));
            }
        }
        Self::new(kind, lambda_grid, beta_grid, values)
    }

    /// Constant surface, mostly useful in tests.
    pub fn constant(kind: CoeffKind, value: f64) -> Result<Self> {
        Self::from_fn(kind, vec![0.0, 30.0], vec![0.0, PI / 2.0], |_, _| value)
    }

    pub fn kind(&self) -> CoeffKind {
        self.kind
    }
    pub fn lambda_grid(&self) -> &[f64] {
        &self.lambda_grid
    }
    pub fn beta_grid(&self) -> &[f64] {
        &self.beta_grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn node(&self, i_lambda: usize, i_beta: usize) -> f64 {
        self.values[i_lambda * self.beta_grid.len() + i_beta]
    }

    /// Bilinear interpolation, clamped to the grid edges.
    pub fn lookup(&self, lambda: f64, beta: f64) -> f64 {
        let (i, tl) = locate(&self.lambda_grid, lambda);
        let (j, tb) = locate(&self.beta_grid, beta);
        let v00 = self.node(i, j);
        let v01 = self.node(i, j + 1);
        let v10 = self.node(i + 1, j);
        let v11 = self.node(i + 1, j + 1);
        (1.0 - tl) * ((1.0 - tb) * v00 + tb * v01) + tl * ((1.0 - tb) * v10 + tb * v11)
    }

    /// Coefficient values at every β node for a fixed λ (linear in λ between
    /// nodes, so this slice is exact for the bilinear surface).
    pub fn beta_slice(&self, lambda: f64) -> Vec<f64> {
        let (i, tl) = locate(&self.lambda_grid, lambda);
        (0..self.beta_grid.len()).map(|j| (1.0 - tl) * self.node(i, j) + tl * self.node(i + 1, j)).collect()
    }

    /// Default power surface from the exponential C_p(λ, β) form, β in
    /// degrees inside the formula and radians on the grid.
    pub fn default_power() -> Self {
        let lambda: Vec<f64> = (0..=245).map(|i| 0.5 + 0.1 * i as f64).collect();
        let beta: Vec<f64> = (0..=180).map(|i| (0.5 * i as f64).to_radians()).collect();
        Self::from_fn(CoeffKind::Power, lambda, beta, analytic_cp).expect("analytic surface is valid")
    }

    /// Thrust surface consistent with a power surface via actuator-disc
    /// momentum theory: C_p = 4a(1−a)², C_t = 4a(1−a), a ∈ [0, 1/3].
    pub fn thrust_from_power(cp: &CoeffSurface) -> Self {
        let values = cp.values.iter().map(|&c| thrust_from_power_coeff(c)).collect();
        Self::new(CoeffKind::Thrust, cp.lambda_grid.clone(), cp.beta_grid.clone(), values)
            .expect("momentum thrust is within [0, 2]")
    }

    /// Reads the `lambda,beta,value` CSV format (λ outer, β inner).
    pub fn read_csv(path: &Path, kind: CoeffKind) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let headers = rdr.headers()?.clone();
        let expected = ["lambda", "beta", "value"];
        if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h.trim() != e) {
            return Err(Error::parse(path, "header must be `lambda,beta,value`"));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let mut vals = [0.0; 3];
            for (k, slot) in vals.iter_mut().enumerate() {
                *slot = rec
                    .get(k)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::parse(path, format!("bad number in row {rec:?}")))?;
            }
            rows.push(vals);
        }
        Self::from_rows(&rows, kind).map_err(|e| Error::parse(path, e.to_string()))
    }

    fn from_rows(rows: &[[f64; 3]], kind: CoeffKind) -> Result<Self> {
        let mut beta_grid = Vec::new();
        for r in rows {
            if r[0] != rows[0][0] {
                break;
            }
            beta_grid.push(r[1]);
        }
        let nb = beta_grid.len();
        if nb == 0 || !rows.len().is_multiple_of(nb) {
            return Err(Error::InvalidParameter("incomplete coefficient grid".into()));
        }
        let mut lambda_grid = Vec::with_capacity(rows.len() / nb);
        for (k, chunk) in rows.chunks(nb).enumerate() {
            let l = chunk[0][0];
            for (j, r) in chunk.iter().enumerate() {
                if r[0] != l || r[1] != beta_grid[j] {
                    return Err(Error::InvalidParameter(format!(
                        "grid row {} does not match the (lambda, beta) layout",
                        k * nb + j + 2
                    )));
                }
            }
            lambda_grid.push(l);
        }
        let values = rows.iter().map(|r| r[2]).collect();
        Self::new(kind, lambda_grid, beta_grid, values)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["lambda", "beta", "value"])?;
        for (i, l) in self.lambda_grid.iter().enumerate() {
            for (j, b) in self.beta_grid.iter().enumerate() {
                w.write_record([l.to_string(), b.to_string(), self.node(i, j).to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// C_p(λ, β) = c₁(c₂/λᵢ − c₃β − c₄)e^(−c₅/λᵢ) + c₆λ with
/// 1/λᵢ = 1/(λ + 0.08β) − 0.035/(β³ + 1); β in degrees.
pub fn analytic_cp(lambda: f64, beta_rad: f64) -> f64 {
    const C: [f64; 6] = [0.5176, 116.0, 0.4, 5.0, 21.0, 0.0068];
    let beta = beta_rad.to_degrees();
    let inv_li = 1.0 / (lambda + 0.08 * beta) - 0.035 / (beta * beta * beta + 1.0);
    C[0] * (C[1] * inv_li - C[2] * beta - C[3]) * (-C[4] * inv_li).exp() + C[5] * lambda
}

/// Momentum-theory thrust coefficient matching a power coefficient.
pub fn thrust_from_power_coeff(cp: f64) -> f64 {
    let cp = cp.clamp(0.0, BETZ_LIMIT);
    if cp == 0.0 {
        return 0.0;
    }
    // 4a(1-a)^2 is increasing on [0, 1/3]
    let (mut lo, mut hi) = (0.0_f64, 1.0 / 3.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if 4.0 * mid * (1.0 - mid) * (1.0 - mid) < cp {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = 0.5 * (lo + hi);
    (4.0 * a * (1.0 - a)).clamp(0.0, MAX_THRUST_COEFF)
}

/// λ = ω_g·D_r / (2·G·v_w).
pub fn tip_speed_ratio(omega_g: f64, v_w: f64, p: &TurbineParams) -> Result<f64> {
    if !(v_w > 0.0) {
        return Err(Error::Domain(format!("wind speed must be positive, got {v_w}")));
    }
    Ok(omega_g * p.rotor_diameter / (2.0 * p.gearbox_ratio * v_w))
}

fn tsr_from_energy(k: f64, v_w: f64, p: &TurbineParams) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::Domain(format!("kinetic energy must be positive, got {k}")));
    }
    tip_speed_ratio(p.omega_from_energy(k), v_w, p)
}

/// P_r = ½ρA·C_p(λ, β)·v_w³.
pub fn rotor_power(omega_g: f64, beta: f64, v_w: f64, cp: &CoeffSurface, p: &TurbineParams) -> Result<f64> {
    let lambda = tip_speed_ratio(omega_g, v_w, p)?;
    Ok(p.power_reference(v_w) * cp.lookup(lambda, beta))
}

/// T_r = ½ρA·C_p·v_w³ / ω_r with ω_r = ω_g / G.
pub fn rotor_torque(omega_g: f64, beta: f64, v_w: f64, cp: &CoeffSurface, p: &TurbineParams) -> Result<f64> {
    if !(omega_g > 0.0) {
        return Err(Error::Singularity(format!("rotor torque undefined at omega_g = {omega_g}")));
    }
    let omega_r = omega_g / p.gearbox_ratio;
    Ok(rotor_power(omega_g, beta, v_w, cp, p)? / omega_r)
}

/// P_g = η_g·T_g·ω_g.
pub fn generator_power(torque_g: f64, omega_g: f64, p: &TurbineParams) -> Result<f64> {
    if torque_g < 0.0 || !(omega_g > 0.0) {
        return Err(Error::Domain(format!(
            "generator power needs T_g >= 0 and omega_g > 0, got ({torque_g}, {omega_g})"
        )));
    }
    Ok(p.generator_efficiency * torque_g * omega_g)
}

/// Maximum of a coefficient over the β grid at fixed λ, with the largest
/// maximising β.
fn max_over_beta(surface: &CoeffSurface, lambda: f64) -> (f64, f64) {
    let slice = surface.beta_slice(lambda);
    let mut best = (f64::NEG_INFINITY, surface.beta_grid[0]);
    for (v, b) in slice.iter().zip(&surface.beta_grid) {
        if *v >= best.0 {
            best = (*v, *b);
        }
    }
    best
}

/// β grid restricted to the operating range [β_min, β_max].
fn beta_in_range(beta: f64, p: &TurbineParams) -> bool {
    beta >= p.beta_min - 1e-12 && beta <= p.beta_max + 1e-12
}

fn max_in_range(surface: &CoeffSurface, lambda: f64, p: &TurbineParams) -> (f64, f64) {
    let slice = surface.beta_slice(lambda);
    let mut best = (f64::NEG_INFINITY, p.beta_min);
    for (v, b) in slice.iter().zip(&surface.beta_grid) {
        if beta_in_range(*b, p) && *v >= best.0 {
            best = (*v, *b);
        }
    }
    if best.0 == f64::NEG_INFINITY {
        // no grid node inside the pitch range: fall back to the full grid
        return max_over_beta(surface, lambda);
    }
    best
}

/// Available power: the maximum over the β grid of ½ρA·C_p(λ(v_w, K), β)·v_w³.
pub fn available_power(v_w: f64, k: f64, cp: &CoeffSurface, p: &TurbineParams) -> Result<f64> {
    Ok(available_power_and_pitch(v_w, k, cp, p)?.0)
}

/// Available power together with the (largest) maximising pitch angle.
pub fn available_power_and_pitch(v_w: f64, k: f64, cp: &CoeffSurface, p: &TurbineParams) -> Result<(f64, f64)> {
    let lambda = tsr_from_energy(k, v_w, p)?;
    let (c, beta) = max_in_range(cp, lambda, p);
    Ok((p.power_reference(v_w) * c, beta))
}

/// Maximum thrust over the β grid, ½ρA·max_β C_t·v_w².
pub fn max_thrust(v_w: f64, k: f64, ct: &CoeffSurface, p: &TurbineParams) -> Result<f64> {
    let lambda = tsr_from_energy(k, v_w, p)?;
    Ok(p.thrust_reference(v_w) * max_in_range(ct, lambda, p).0)
}

/// Pitch inverse Ψ: the largest β in [β_min, β_max] whose rotor power equals
/// `target`. Exact on the bilinear surface.
pub fn pitch_inverse(target: f64, v_w: f64, k: f64, cp: &CoeffSurface, p: &TurbineParams) -> Result<f64> {
    match pitch_root(target, v_w, k, cp, p)? {
        PitchRoot::Exact(b) => Ok(b),
        PitchRoot::AboveAvailable { available, .. } => {
            Err(Error::InfeasibleTarget(format!("rotor power target {target} W exceeds available {available} W")))
        }
        PitchRoot::BelowMinimum { minimum, .. } => Err(Error::InfeasibleTarget(format!(
            "rotor power target {target} W below the minimum {minimum} W reachable by pitching"
        ))),
    }
}

/// Ψ with saturation: unreachable targets map to the pitch of the nearest
/// reachable power, so the result is always within [β_min, β_max].
pub fn pitch_inverse_saturated(target: f64, v_w: f64, k: f64, cp: &CoeffSurface, p: &TurbineParams) -> Result<f64> {
    Ok(match pitch_root(target, v_w, k, cp, p)? {
        PitchRoot::Exact(b) => b,
        PitchRoot::AboveAvailable { beta, .. } | PitchRoot::BelowMinimum { beta, .. } => beta,
    })
}

enum PitchRoot {
    Exact(f64),
    AboveAvailable { available: f64, beta: f64 },
    BelowMinimum { minimum: f64, beta: f64 },
}

fn pitch_root(target: f64, v_w: f64, k: f64, cp: &CoeffSurface, p: &TurbineParams) -> Result<PitchRoot> {
    let lambda = tsr_from_energy(k, v_w, p)?;
    let pref = p.power_reference(v_w);
    let slice = cp.beta_slice(lambda);
    let grid = &cp.beta_grid;

    // piecewise-linear power over the admissible pitch range, as (β, P) knots
    let mut knots: Vec<(f64, f64)> = Vec::with_capacity(grid.len() + 2);
    let lo = p.beta_min.max(grid[0]);
    let hi = p.beta_max.min(grid[grid.len() - 1]);
    knots.push((lo, pref * cp.lookup(lambda, lo)));
    for (b, c) in grid.iter().zip(&slice) {
        if *b > lo && *b < hi {
            knots.push((*b, pref * c));
        }
    }
    knots.push((hi, pref * cp.lookup(lambda, hi)));

    let (mut pmax, mut bmax) = (f64::NEG_INFINITY, lo);
    let (mut pmin, mut bmin) = (f64::INFINITY, hi);
    for &(b, pw) in &knots {
        if pw >= pmax {
            pmax = pw;
            bmax = b;
        }
        if pw <= pmin {
            pmin = pw;
            bmin = b;
        }
    }
    let tol = 1e-9 * pmax.abs().max(1.0);
    if target > pmax + tol {
        return Ok(PitchRoot::AboveAvailable { available: pmax, beta: bmax });
    }
    if target < pmin - tol {
        return Ok(PitchRoot::BelowMinimum { minimum: pmin, beta: bmin });
    }
    // scan from the feathered end for the first bracketing segment
    for w in knots.windows(2).rev() {
        let (b0, p0) = w[0];
        let (b1, p1) = w[1];
        if (p1 - target).abs() <= tol {
            return Ok(PitchRoot::Exact(b1));
        }
        if (p0 - target) * (p1 - target) < 0.0 {
            let b = b0 + (target - p0) / (p1 - p0) * (b1 - b0);
            return Ok(PitchRoot::Exact(b.clamp(b0, b1)));
        }
        if (p0 - target).abs() <= tol {
            return Ok(PitchRoot::Exact(b0));
        }
    }
    Ok(PitchRoot::Exact(bmax))
}

/// Generator speed of the single-inertia drive train.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveTrainState {
    pub omega_g: f64,
}

/// ω̇_g = (T_r/G − T_g)/J.
pub fn drivetrain_derivative(
    omega_g: f64,
    torque_g: f64,
    beta: f64,
    v_w: f64,
    cp: &CoeffSurface,
    p: &TurbineParams,
) -> Result<f64> {
    if !(omega_g > 0.0) {
        return Err(Error::Stall(format!("generator speed reached {omega_g} rad/s")));
    }
    let tr = rotor_torque(omega_g, beta, v_w, cp, p)?;
    Ok((tr / p.gearbox_ratio - torque_g) / p.equivalent_inertia())
}

/// Advances the drive train over `dt` with `substeps` classical RK4 steps,
/// inputs held constant.
#[allow(clippy::too_many_arguments)]
pub fn drivetrain_step(
    state: DriveTrainState,
    torque_g: f64,
    beta: f64,
    v_w: f64,
    dt: f64,
    substeps: usize,
    cp: &CoeffSurface,
    p: &TurbineParams,
) -> Result<DriveTrainState> {
    if !(dt > 0.0) || substeps == 0 {
        return Err(Error::Domain(format!("time step must be positive, got {dt}")));
    }
    let h = dt / substeps as f64;
    let f = |w: f64| drivetrain_derivative(w, torque_g, beta, v_w, cp, p);
    let mut w = state.omega_g;
    for _ in 0..substeps {
        let k1 = f(w)?;
        let k2 = f(w + 0.5 * h * k1)?;
        let k3 = f(w + 0.5 * h * k2)?;
        let k4 = f(w + h * k3)?;
        w += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !(w > 0.0) {
            return Err(Error::Stall(format!(
                "generator speed fell to {w} rad/s (T_g = {torque_g} N·m, beta = {beta} rad, v_w = {v_w} m/s)"
            )));
        }
    }
    Ok(DriveTrainState { omega_g: w })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx_eq::*;

    mod approx_eq {
        pub fn rel(a: f64, b: f64) -> f64 {
            (a - b).abs() / b.abs().max(1e-300)
        }
    }

    fn unit_params() -> TurbineParams {
        TurbineParams {
            air_density: 2.0,
            rotor_area: 1.0,
            rotor_diameter: 2.0,
            gearbox_ratio: 1.0,
            rotor_inertia: 1.0,
            generator_inertia: 1.0,
            generator_efficiency: 1.0,
            omega_g_min: 0.1,
            omega_g_max: 10.0,
            omega_g_rated: 5.0,
            torque_g_max: 10.0,
            beta_min: 0.0,
            beta_max: 1.0,
            power_g_rated: 100.0,
        }
    }

    #[test]
    fn equivalent_inertia_is_recomputed() {
        let p = TurbineParams::nrel_5mw();
        assert!((p.equivalent_inertia() - (534.116 + 38_759_236.0 / 9409.0)).abs() < 1e-9);
    }

    #[test]
    fn tip_speed_ratio_cases() {
        let p = unit_params();
        assert_eq!(tip_speed_ratio(2.0, 1.0, &p).unwrap(), 2.0);
        let nrel = TurbineParams::nrel_5mw();
        let w = nrel.gearbox_ratio * 11.4 * 2.0 / nrel.rotor_diameter;
        assert!((tip_speed_ratio(w, 11.4, &nrel).unwrap() - 1.0).abs() < 1e-12);
        // 122.9096·126 / (2·97·11.4) by hand = 7.00259...
        let l = tip_speed_ratio(122.9096, 11.4, &nrel).unwrap();
        assert!((l - 7.0026).abs() < 1e-3, "{l}");
        assert!(matches!(tip_speed_ratio(1.0, 0.0, &p), Err(Error::Domain(_))));
    }

    #[test]
    fn lookup_exact_at_nodes_linear_in_cells_and_clamped() {
        let s = CoeffSurface::new(CoeffKind::Power, vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0, 0.0, 0.5, 0.5]).unwrap();
        assert_eq!(s.lookup(1.0, 0.0), 0.5);
        assert_eq!(s.lookup(0.0, 1.0), 0.0);
        assert!((s.lookup(0.5, 0.5) - 0.25).abs() < 1e-15);
        assert_eq!(s.lookup(5.0, -3.0), 0.5);
        let cp = CoeffSurface::default_power();
        let (i, j) = (40, 17);
        assert_eq!(cp.lookup(cp.lambda_grid()[i], cp.beta_grid()[j]), cp.node(i, j));
    }

    #[test]
    fn surface_rejects_out_of_range_and_unsorted() {
        assert!(CoeffSurface::new(CoeffKind::Power, vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0, 0.7, 0.1, 0.1]).is_err());
        assert!(CoeffSurface::new(CoeffKind::Thrust, vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0; 4]).is_err());
        assert!(CoeffSurface::new(CoeffKind::Thrust, vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0; 3]).is_err());
    }

    #[test]
    fn torque_and_power_unit_algebra() {
        let p = unit_params();
        let zero = CoeffSurface::constant(CoeffKind::Power, 0.0).unwrap();
        assert_eq!(rotor_torque(3.0, 0.1, 7.0, &zero, &p).unwrap(), 0.0);
        let one = CoeffSurface::constant(CoeffKind::Power, 0.5).unwrap();
        // ρ=2, A=1, C_p=0.5, v=1, ω_r=0.5 → T_r = 0.5/0.5 = 1
        assert!((rotor_torque(0.5, 0.0, 1.0, &one, &p).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(generator_power(0.0, 3.0, &p).unwrap(), 0.0);
        assert_eq!(generator_power(2.0, 3.0, &p).unwrap(), 6.0);
        assert!(matches!(rotor_torque(0.0, 0.0, 1.0, &one, &p), Err(Error::Singularity(_))));
    }

    #[test]
    fn betz_power_hand_value() {
        let p = TurbineParams::nrel_5mw();
        let betz = CoeffSurface::constant(CoeffKind::Power, 0.593).unwrap();
        let pr = rotor_power(100.0, 0.0, 11.4, &betz, &p).unwrap();
        // ½·1.225·π·63²·0.593·11.4³ = 6.70e6 W (hand evaluation)
        assert!(rel(pr, 6.70e6) < 2e-3, "{pr}");
    }

    #[test]
    fn available_power_and_max_thrust_bound_every_pitch() {
        let p = TurbineParams::nrel_5mw();
        let cp = CoeffSurface::default_power();
        let ct = CoeffSurface::thrust_from_power(&cp);
        for &v in &[4.0, 8.0, 11.0, 17.0, 24.0] {
            for &w in &[75.0, 100.0, 122.0, 134.0] {
                let k = p.energy_from_omega(w);
                let pav = available_power(v, k, &cp, &p).unwrap();
                let fmax = max_thrust(v, k, &ct, &p).unwrap();
                for &b in cp.beta_grid() {
                    assert!(rotor_power(w, b, v, &cp, &p).unwrap() <= pav * (1.0 + 1e-12));
                    assert!(
                        p.thrust_reference(v) * ct.lookup(tip_speed_ratio(w, v, &p).unwrap(), b)
                            <= fmax * (1.0 + 1e-12)
                    );
                }
            }
        }
        let c = CoeffSurface::constant(CoeffKind::Power, 0.3).unwrap();
        let k = p.energy_from_omega(100.0);
        assert!(rel(available_power(9.0, k, &c, &p).unwrap(), p.power_reference(9.0) * 0.3) < 1e-12);
    }

    #[test]
    fn pitch_inverse_roundtrip_and_edges() {
        let p = TurbineParams::nrel_5mw();
        let cp = CoeffSurface::default_power();
        let v = 17.0;
        let k = p.energy_from_omega(p.omega_g_rated);
        let w = p.omega_g_rated;
        // on the feathering branch the slice is monotone decreasing
        let b0 = 18.3_f64.to_radians();
        let target = rotor_power(w, b0, v, &cp, &p).unwrap();
        let b = pitch_inverse(target, v, k, &cp, &p).unwrap();
        assert!((b - b0).abs() < 1e-9, "{b} vs {b0}");

        let (pav, barg) = available_power_and_pitch(v, k, &cp, &p).unwrap();
        assert!((pitch_inverse(pav, v, k, &cp, &p).unwrap() - barg).abs() < 1e-12);
        // C_p vanishes at full feather
        assert_eq!(pitch_inverse(0.0, v, k, &cp, &p).unwrap(), p.beta_max);
        assert!(matches!(pitch_inverse(pav * 1.01, v, k, &cp, &p), Err(Error::InfeasibleTarget(_))));
        assert_eq!(pitch_inverse_saturated(pav * 1.01, v, k, &cp, &p).unwrap(), barg);
    }

    #[test]
    fn drivetrain_equilibrium_and_constant_torque() {
        let p = unit_params();
        let zero = CoeffSurface::constant(CoeffKind::Power, 0.0).unwrap();
        let s = DriveTrainState { omega_g: 4.0 };
        let j = p.equivalent_inertia();
        let tg = 0.3;
        let out = drivetrain_step(s, tg, 0.0, 5.0, 1.5, 4, &zero, &p).unwrap();
        let exact = 4.0 - tg * 1.5 / j;
        assert!(rel(out.omega_g, exact) < 1e-10);

        let cp = CoeffSurface::constant(CoeffKind::Power, 0.4).unwrap();
        let tr = rotor_torque(4.0, 0.0, 5.0, &cp, &p).unwrap();
        let out = drivetrain_step(s, tr / p.gearbox_ratio, 0.0, 5.0, 0.2, 4, &cp, &p).unwrap();
        assert!((out.omega_g - 4.0).abs() < 1e-12);

        let err = drivetrain_step(s, 100.0, 0.0, 5.0, 1.0, 4, &zero, &p).unwrap_err();
        assert!(matches!(err, Error::Stall(_)));
    }

    #[test]
    fn drivetrain_rk4_fourth_order() {
        let p = TurbineParams::nrel_5mw();
        // constant C_p keeps the right-hand side smooth (T_r ∝ 1/ω)
        let cp = CoeffSurface::constant(CoeffKind::Power, 0.45).unwrap();
        let s = DriveTrainState { omega_g: 90.0 };
        let run = |n| drivetrain_step(s, 40_000.0, 0.0, 9.0, 8.0, n, &cp, &p).unwrap().omega_g;
        let reference = run(4096);
        let e1 = (run(2) - reference).abs();
        let e2 = (run(4) - reference).abs();
        let ratio = e1 / e2;
        assert!(ratio > 10.0 && ratio < 22.0, "error ratio {ratio}");
    }

    #[test]
    fn kv_roundtrip() {
        let p = TurbineParams::nrel_5mw();
        let text = p.to_kv_string();
        let q = TurbineParams::parse_kv(&text, Path::new("mem")).unwrap();
        assert_eq!(p, q);
        let r = TurbineParams::parse_kv("# comment\nrotor_diameter = 100\n", Path::new("mem")).unwrap();
        assert!((r.rotor_area - PI * 2500.0).abs() < 1e-9);
        assert!(TurbineParams::parse_kv("bogus = 1", Path::new("mem")).is_err());
    }

    #[test]
    fn momentum_thrust_consistency() {
        assert_eq!(thrust_from_power_coeff(0.0), 0.0);
        // Betz optimum a = 1/3 gives C_t = 8/9
        assert!((thrust_from_power_coeff(BETZ_LIMIT) - 8.0 / 9.0).abs() < 1e-6);
        let cp = CoeffSurface::default_power();
        let peak = cp.values().iter().cloned().fold(0.0, f64::max);
        assert!(peak > 0.45 && peak < 0.5, "{peak}");
    }
}
