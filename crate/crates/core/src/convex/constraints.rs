//! Convex stage constraints as linear rows over (K, P_r, P_g, ε).

use serde::Serialize;

use super::pwl::PwlEnvelope;
use super::thrust::ThrustLinearization;
use super::{ENERGY_UNIT, FORCE_UNIT, POWER_UNIT};
use crate::aero::TurbineParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintKind {
    EnergyBounds,
    Overspeed,
    Slack,
    RotorPower,
    GeneratorPower,
    AvailablePower,
    TorqueLimit,
    ThrustBounds,
    ThrustMax,
    /// P_r − t ≤ 0 with t the epigraph variable of P̂_av.
    Epigraph,
}

impl ConstraintKind {
    /// Rows that only involve the state (and the slack).
    pub fn is_pure_state(self) -> bool {
        matches!(self, ConstraintKind::EnergyBounds | ConstraintKind::Overspeed)
    }
}

/// lo ≤ k·K + p_r·P_r + p_g·P_g + eps·ε ≤ hi in controller units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageRow {
    pub kind: ConstraintKind,
    pub k: f64,
    pub p_r: f64,
    pub p_g: f64,
    pub eps: f64,
    pub lo: f64,
    pub hi: f64,
}

impl StageRow {
    fn new(kind: ConstraintKind, [k, p_r, p_g, eps]: [f64; 4], lo: f64, hi: f64) -> Self {
        StageRow { kind, k, p_r, p_g, eps, lo, hi }
    }

    pub fn value(&self, k: f64, p_r: f64, p_g: f64, eps: f64) -> f64 {
        self.k * k + self.p_r * p_r + self.p_g * p_g + self.eps * eps
    }

    pub fn violation(&self, k: f64, p_r: f64, p_g: f64, eps: f64) -> f64 {
        let v = self.value(k, p_r, p_g, eps);
        (self.lo - v).max(v - self.hi).max(0.0)
    }
}

/// Upper bound P_g ≤ η T_max √(2K/J) as conservative affine cuts (MW vs MJ).
#[derive(Debug, Clone, PartialEq)]
pub struct SqrtCuts {
    pub lines: Vec<(f64, f64)>,
    /// Amount by which the tangents were lowered.
    pub tightening: f64,
}

impl SqrtCuts {
    /// `n` tangents of the bound at evenly spaced K in [K_lo, K_hi] (SI),
    /// shifted down by their largest overestimate on that interval.
    pub fn torque_limit(p: &TurbineParams, k_lo: f64, k_hi: f64, n: usize) -> Result<Self> {
        if !(k_lo > 0.0 && k_hi > k_lo) || n == 0 {
            return Err(Error::InvalidParameter("torque cuts need 0 < K_lo < K_hi and n >= 1".into()));
        }
        let j = p.equivalent_inertia();
        let c = p.generator_efficiency * p.torque_g_max * (2.0 / j).sqrt() / POWER_UNIT;
        // work in controller energy units
        let (lo, hi) = (k_lo / ENERGY_UNIT, k_hi / ENERGY_UNIT);
        let g = |k: f64| c * (k * ENERGY_UNIT).sqrt();
        let pts: Vec<f64> = if n == 1 {
            vec![0.5 * (lo + hi)]
        } else {
            (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
        };
        let mut lines: Vec<(f64, f64)> = pts
            .iter()
            .map(|&k0| {
                let slope = g(k0) / (2.0 * k0);
                (slope, g(k0) - slope * k0)
            })
            .collect();
        // tangent minus a concave function is convex between breakpoints,
        // so the largest gap sits at a breakpoint or an end of the interval
        let mut cands = vec![lo, hi];
        for w in lines.windows(2) {
            let (a1, b1) = w[0];
            let (a2, b2) = w[1];
            if a1 != a2 {
                let k = (b2 - b1) / (a1 - a2);
                if k > lo && k < hi {
                    cands.push(k);
                }
            }
        }
        let gap = cands
            .iter()
            .map(|&k| lines.iter().map(|(a, b)| a * k + b).fold(f64::INFINITY, f64::min) - g(k))
            .fold(0.0, f64::max);
        let tightening = gap * (1.0 + 1e-9) + 1e-12;
        for l in &mut lines {
            l.1 -= tightening;
        }
        Ok(SqrtCuts { lines, tightening })
    }

    pub fn eval(&self, k: f64) -> f64 {
        self.lines.iter().map(|(a, b)| a * k + b).fold(f64::INFINITY, f64::min)
    }
}

/// Everything that shapes the constraint set apart from the wind speed.
#[derive(Debug, Clone, Copy)]
pub struct ConstraintModel<'a> {
    pub params: &'a TurbineParams,
    pub available_power: &'a PwlEnvelope,
    pub max_thrust: &'a PwlEnvelope,
    pub thrust: &'a ThrustLinearization,
    pub torque: &'a SqrtCuts,
    pub with_slack: bool,
}

impl ConstraintModel<'_> {
    pub fn k_min(&self) -> f64 {
        0.5 * self.params.equivalent_inertia() * self.params.omega_g_min.powi(2) / ENERGY_UNIT
    }
    pub fn k_max(&self) -> f64 {
        0.5 * self.params.equivalent_inertia() * self.params.omega_g_max.powi(2) / ENERGY_UNIT
    }
    pub fn k_rated(&self) -> f64 {
        0.5 * self.params.equivalent_inertia() * self.params.omega_g_rated.powi(2) / ENERGY_UNIT
    }

    /// Rows of one stage at wind speed `v_w`.
    pub fn stage_rows(&self, v_w: f64) -> Vec<StageRow> {
        use ConstraintKind::*;
        let inf = f64::INFINITY;
        let p = self.params;
        let mut rows = vec![
            StageRow::new(EnergyBounds, [1.0, 0.0, 0.0, 0.0], self.k_min(), self.k_max()),
            StageRow::new(Overspeed, [1.0, 0.0, 0.0, if self.with_slack { -1.0 } else { 0.0 }], -inf, self.k_rated()),
            StageRow::new(RotorPower, [0.0, 1.0, 0.0, 0.0], 0.0, inf),
            StageRow::new(GeneratorPower, [0.0, 0.0, 1.0, 0.0], 0.0, p.power_g_rated / POWER_UNIT),
        ];
        if self.with_slack {
            rows.push(StageRow::new(Slack, [0.0, 0.0, 0.0, 1.0], 0.0, inf));
        }
        for (a, b) in self.available_power.cuts(v_w) {
            let a = a * ENERGY_UNIT / POWER_UNIT;
            rows.push(StageRow::new(AvailablePower, [-a, 1.0, 0.0, 0.0], -inf, b / POWER_UNIT));
        }
        for &(a, b) in &self.torque.lines {
            rows.push(StageRow::new(TorqueLimit, [-a, 0.0, 1.0, 0.0], -inf, b));
        }
        let z1 = self.thrust.zeta1 * POWER_UNIT / FORCE_UNIT;
        let z2 = self.thrust.zeta2 * ENERGY_UNIT / FORCE_UNIT;
        let z3 = self.thrust.zeta3 / FORCE_UNIT;
        rows.push(StageRow::new(ThrustBounds, [z2, z1, 0.0, 0.0], -z3, inf));
        for (a, b) in self.max_thrust.cuts(v_w) {
            let a = a * ENERGY_UNIT / FORCE_UNIT;
            rows.push(StageRow::new(ThrustMax, [z2 - a, z1, 0.0, 0.0], -inf, b / FORCE_UNIT - z3));
        }
        rows
    }
}

/// A stage row over (K, P_r, P_g, t, ε), where t is an epigraph variable
/// standing for P̂_av.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpigraphRow {
    pub kind: ConstraintKind,
    pub k: f64,
    pub p_r: f64,
    pub p_g: f64,
    pub t: f64,
    pub eps: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Moves the P̂_av cuts onto t and adds P_r ≤ t. Since t is bounded only by
/// the cuts, the projection onto (K, P_r, P_g, ε) is unchanged.
pub fn with_epigraph(rows: &[StageRow]) -> Vec<EpigraphRow> {
    let mut out = Vec::with_capacity(rows.len() + 1);
    let mut has_cuts = false;
    for r in rows {
        let cut = r.kind == ConstraintKind::AvailablePower;
        has_cuts |= cut;
        out.push(EpigraphRow {
            kind: r.kind,
            k: r.k,
            p_r: if cut { 0.0 } else { r.p_r },
            p_g: r.p_g,
            t: if cut { r.p_r } else { 0.0 },
            eps: r.eps,
            lo: r.lo,
            hi: r.hi,
        });
    }
    if has_cuts {
        out.push(EpigraphRow {
            kind: ConstraintKind::Epigraph,
            k: 0.0,
            p_r: 1.0,
            p_g: 0.0,
            t: -1.0,
            eps: 0.0,
            lo: f64::NEG_INFINITY,
            hi: 0.0,
        });
    }
    out
}

/// Per-step constraint rows over a horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexConstraintSet {
    pub stages: Vec<Vec<StageRow>>,
}

impl ConvexConstraintSet {
    pub fn horizon(&self) -> usize {
        self.stages.len()
    }

    pub fn max_violation(&self, q: usize, k: f64, p_r: f64, p_g: f64, eps: f64) -> f64 {
        self.stages[q].iter().map(|r| r.violation(k, p_r, p_g, eps)).fold(0.0, f64::max)
    }
}

/// One row set per forecast entry.
pub fn build_constraints(model: &ConstraintModel<'_>, forecast: &[f64]) -> Result<ConvexConstraintSet> {
    if forecast.is_empty() {
        return Err(Error::InvalidParameter("wind forecast is empty".into()));
    }
    if let Some(v) = forecast.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::Domain(format!("forecast wind speed must be positive, got {v}")));
    }
    Ok(ConvexConstraintSet { stages: forecast.iter().map(|&v| model.stage_rows(v)).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aero::{available_power, CoeffSurface};
    use crate::convex::pwl::{build_pwl_available_power, build_pwl_max_thrust, default_k_grid, default_wind_grid};

    struct Fixture {
        p: TurbineParams,
        pav: PwlEnvelope,
        ft: PwlEnvelope,
        torque: SqrtCuts,
        cp: CoeffSurface,
    }

    fn fixture() -> Fixture {
        let p = TurbineParams::nrel_5mw();
        let cp = CoeffSurface::default_power();
        let ct = CoeffSurface::thrust_from_power(&cp);
        let (wg, kg) = (default_wind_grid(), default_k_grid(&p, 200));
        Fixture {
            pav: build_pwl_available_power(&cp, &p, &wg, &kg, 5).unwrap(),
            ft: build_pwl_max_thrust(&ct, &p, &wg, &kg, 5).unwrap(),
            torque: SqrtCuts::torque_limit(&p, kg[0], kg[kg.len() - 1], 8).unwrap(),
            p,
            cp,
        }
    }

    // thrust model that is nonnegative at rest
    const LIN: ThrustLinearization =
        ThrustLinearization { zeta1: 0.02, zeta2: 0.004, zeta3: 1e5, valid_wind: 9.0, fit_residual: 0.0 };

    #[test]
    fn rest_is_feasible_and_slack_absorbs_overspeed() {
        let f = fixture();
        let m = ConstraintModel {
            params: &f.p,
            available_power: &f.pav,
            max_thrust: &f.ft,
            thrust: &LIN,
            torque: &f.torque,
            with_slack: true,
        };
        let set = build_constraints(&m, &[9.0; 4]).unwrap();
        assert_eq!(set.horizon(), 4);
        let kmid = 0.5 * (m.k_min() + m.k_max());
        assert_eq!(set.max_violation(0, kmid, 0.0, 0.0, 0.0), 0.0);
        let k_over = m.k_rated() + 0.7;
        assert!(set.max_violation(1, k_over, 0.0, 0.0, 0.0) > 0.69);
        assert!(set.max_violation(1, k_over, 0.0, 0.0, 0.7) < 1e-12);
        assert!(build_constraints(&m, &[]).is_err());
    }

    #[test]
    fn pwl_cut_violation_implies_available_power_violation() {
        let f = fixture();
        let m = ConstraintModel {
            params: &f.p,
            available_power: &f.pav,
            max_thrust: &f.ft,
            thrust: &LIN,
            torque: &f.torque,
            with_slack: true,
        };
        for v in [5.0, 9.0, 13.0] {
            let rows = m.stage_rows(v);
            for i in 0..40 {
                let k = m.k_min() + (m.k_max() - m.k_min()) * i as f64 / 39.0;
                for pr in [0.1, 0.5, 1.0, 2.0, 5.0, 9.0] {
                    let cut_bad = rows
                        .iter()
                        .filter(|r| r.kind == ConstraintKind::AvailablePower)
                        .any(|r| r.violation(k, pr, 0.0, 0.0) > 0.0);
                    let pav = available_power(v, k * ENERGY_UNIT, &f.cp, &f.p).unwrap() / POWER_UNIT;
                    if pr > pav {
                        assert!(cut_bad, "v={v} K={k} P_r={pr} above P_av={pav} but cuts admit it");
                    }
                }
            }
        }
    }

    #[test]
    fn torque_cuts_are_conservative() {
        let p = TurbineParams::nrel_5mw();
        let kg = default_k_grid(&p, 200);
        let cuts = SqrtCuts::torque_limit(&p, kg[0], kg[199], 8).unwrap();
        for i in 0..=5000 {
            let k = kg[0] + (kg[199] - kg[0]) * i as f64 / 5000.0;
            let exact = p.generator_efficiency * p.torque_g_max * p.omega_from_energy(k) / POWER_UNIT;
            let cut = cuts.eval(k / ENERGY_UNIT);
            assert!(cut <= exact && exact - cut < 0.05, "K={k}: {cut} vs {exact}");
        }
    }
}
