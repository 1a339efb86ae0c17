//! Affine thrust model F̂_T = ζ₁P_r + ζ₂K + ζ₃ fitted around an operating point.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::aero::{available_power, pitch_inverse, CoeffSurface, TurbineParams};
use crate::error::{Error, Result};
use crate::tower::thrust_force;

/// SI coefficients: ζ₁ in N/W, ζ₂ in N/J, ζ₃ in N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThrustLinearization {
    pub zeta1: f64,
    pub zeta2: f64,
    pub zeta3: f64,
    pub valid_wind: f64,
    /// RMS fit residual in N.
    pub fit_residual: f64,
}

impl ThrustLinearization {
    pub fn eval(&self, p_r: f64, k: f64) -> f64 {
        self.zeta1 * p_r + self.zeta2 * k + self.zeta3
    }
}

/// Rectangle in (K, P_r) over which thrust samples are drawn. SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitRegion {
    pub k_lo: f64,
    pub k_hi: f64,
    pub p_lo: f64,
    pub p_hi: f64,
    /// Operating point the model is made exact at.
    pub k_op: f64,
    pub p_op: f64,
}

/// Least-squares affine fit f ≈ ζ₁p + ζ₂k + ζ₃ of `(p, k, f)` samples.
/// Returns the coefficients and the RMS residual.
pub fn fit_affine(samples: &[[f64; 3]]) -> Result<([f64; 3], f64)> {
    if samples.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 samples, got {}", samples.len())));
    }
    // center and scale the regressors so the conditioning check is meaningful
    let n = samples.len() as f64;
    let mean = |c: usize| samples.iter().map(|s| s[c]).sum::<f64>() / n;
    let (mp, mk) = (mean(0), mean(1));
    let spread = |c: usize, m: f64| samples.iter().map(|s| (s[c] - m).abs()).fold(0.0, f64::max);
    let (sp, sk) = (spread(0, mp), spread(1, mk));
    if sp == 0.0 || sk == 0.0 {
        return Err(Error::Fit("samples do not span both P_r and K".into()));
    }
    let a = DMatrix::from_fn(samples.len(), 3, |r, c| match c {
        0 => (samples[r][0] - mp) / sp,
        1 => (samples[r][1] - mk) / sk,
        _ => 1.0,
    });
    let y = DVector::from_iterator(samples.len(), samples.iter().map(|s| s[2]));
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::Fit(format!("rank-deficient sample matrix (σ_min/σ_max = {})", smin / smax)));
    }
    let x = svd.solve(&y, 0.0).map_err(|e| Error::Fit(e.to_string()))?;
    let residual = &a * &x - &y;
    let rms = (residual.norm_squared() / n).sqrt();
    let z1 = x[0] / sp;
    let z2 = x[1] / sk;
    let z3 = x[2] - z1 * mp - z2 * mk;
    Ok(([z1, z2, z3], rms))
}

/// Fit region around the economic operating point at `v_w`: K at the peak
/// of the available power below rated speed, P_r at that power capped by the
/// rated input power, both widened by `band` (relative).
pub fn operating_region(v_w: f64, cp: &CoeffSurface, p: &TurbineParams, band: f64) -> Result<FitRegion> {
    let j = p.equivalent_inertia();
    let k_min = 0.5 * j * p.omega_g_min.powi(2);
    let k_rated = 0.5 * j * p.omega_g_rated.powi(2);
    let k_max = 0.5 * j * p.omega_g_max.powi(2);
    let mut best = (f64::NEG_INFINITY, k_min);
    for i in 0..=100 {
        let k = k_min + (k_rated - k_min) * i as f64 / 100.0;
        let pav = available_power(v_w, k, cp, p)?;
        if pav > best.0 {
            best = (pav, k);
        }
    }
    let (pav_op, k_op) = best;
    let p_op = pav_op.min(p.power_g_rated / p.generator_efficiency);
    Ok(FitRegion {
        k_lo: (k_op * (1.0 - band)).max(k_min),
        k_hi: (k_op * (1.0 + band)).min(k_max),
        p_lo: (p_op * (1.0 - band)).max(0.0),
        p_hi: (p_op * (1.0 + band)).min(pav_op),
        k_op,
        p_op,
    })
}

/// Fits the thrust model on an `n × n` grid of (K, P_r) samples inside
/// `region`, recovering β by the pitch inverse for each sample. The slopes
/// come from the least-squares fit; the offset is then moved so the model
/// matches the true thrust at the operating point, which keeps the
/// predicted tower equilibrium on the plant's.
pub fn fit_thrust_linearization(
    v_w: f64,
    ct: &CoeffSurface,
    cp: &CoeffSurface,
    p: &TurbineParams,
    region: &FitRegion,
    n: usize,
) -> Result<ThrustLinearization> {
    if !(region.k_lo > 0.0 && region.k_lo <= region.k_hi && region.p_lo >= 0.0 && region.p_lo <= region.p_hi) {
        return Err(Error::Fit(format!("invalid fit region {region:?}")));
    }
    let n = n.max(2);
    let mut samples = Vec::with_capacity(n * n);
    for i in 0..n {
        let k = region.k_lo + (region.k_hi - region.k_lo) * i as f64 / (n - 1) as f64;
        let p_top = region.p_hi.min(available_power(v_w, k, cp, p)?);
        if p_top < region.p_lo {
            continue;
        }
        let omega = p.omega_from_energy(k);
        for jdx in 0..n {
            let pr = region.p_lo + (p_top - region.p_lo) * jdx as f64 / (n - 1) as f64;
            let beta = pitch_inverse(pr, v_w, k, cp, p)?;
            samples.push([pr, k, thrust_force(omega, beta, v_w, ct, p)?]);
        }
    }
    let ([zeta1, zeta2, _], _) = fit_affine(&samples)?;
    let beta_op = pitch_inverse(region.p_op, v_w, region.k_op, cp, p)?;
    let f_op = thrust_force(p.omega_from_energy(region.k_op), beta_op, v_w, ct, p)?;
    let zeta3 = f_op - zeta1 * region.p_op - zeta2 * region.k_op;
    let fit_residual = (samples.iter().map(|s| (zeta1 * s[0] + zeta2 * s[1] + zeta3 - s[2]).powi(2)).sum::<f64>()
        / samples.len() as f64)
        .sqrt();
    Ok(ThrustLinearization { zeta1, zeta2, zeta3, valid_wind: v_w, fit_residual })
}
