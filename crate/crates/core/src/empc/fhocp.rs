//! Finite-horizon problem as a sparse QP with stage-wise variable blocks.
//!
//! Block q holds [P_r(q), P_g(q), t(q), x(q+1)], where t(q) is the epigraph
//! variable of P̂_av at K(q). The overspeed slack ε comes last. Keeping the
//! states as variables gives a banded KKT system whose cost grows linearly
//! with the horizon.

use nalgebra::DMatrix;

use crate::convex::{with_epigraph, ConstraintKind, ConvexConstraintSet, DiscreteModel, EpigraphRow};
use crate::error::{Error, Result};
use crate::qp::{QpBuilder, QuadraticProgram};

/// Everything one solve depends on.
#[derive(Debug, Clone, Copy)]
pub struct FhocpData<'a> {
    pub model: &'a DiscreteModel,
    pub constraints: &'a ConvexConstraintSet,
    /// α₁..α₅.
    pub alpha: [f64; 5],
    /// S W Sᵀ for the modal velocities.
    pub velocity_weight: &'a DMatrix<f64>,
    pub x0: &'a [f64],
    /// Input applied in the previous sample, anchor of the first rate term.
    pub u_prev: [f64; 2],
    /// Terminal state, when the terminal equality is enforced.
    pub terminal: Option<&'a [f64]>,
}

/// Variable and row indexing of an assembled problem.
#[derive(Debug, Clone, PartialEq)]
pub struct FhocpLayout {
    pub horizon: usize,
    pub n_states: usize,
    pub n_modes: usize,
    /// First row of each stage; stage q ends where q + 1 starts.
    pub stage_start: Vec<usize>,
    pub slack_row: usize,
    pub terminal_start: Option<usize>,
    pub n_rows: usize,
}

/// Predicted trajectory recovered from a primal solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// x(0)..x(N).
    pub states: Vec<Vec<f64>>,
    /// u(0)..u(N−1) as [P_r, P_g].
    pub inputs: Vec<[f64; 2]>,
    /// Epigraph values t(0)..t(N−1).
    pub available: Vec<f64>,
    pub eps: f64,
}

impl Trajectory {
    /// ‖x(N) − x_s‖∞.
    pub fn terminal_gap(&self, xs: &[f64]) -> f64 {
        inf_dist(&self.states[self.states.len() - 1], xs)
    }

    /// max over the second half of the horizon of ‖x(q) − x_s‖∞.
    pub fn tail_distance(&self, xs: &[f64]) -> f64 {
        let n = self.states.len() - 1;
        self.states[n / 2..].iter().map(|x| inf_dist(x, xs)).fold(0.0, f64::max)
    }
}

fn inf_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

impl FhocpLayout {
    pub fn block(&self) -> usize {
        3 + self.n_states
    }
    pub fn p_r(&self, q: usize) -> usize {
        q * self.block()
    }
    pub fn p_g(&self, q: usize) -> usize {
        q * self.block() + 1
    }
    pub fn t(&self, q: usize) -> usize {
        q * self.block() + 2
    }
    /// Index of component `i` of x(q + 1).
    pub fn state(&self, q: usize, i: usize) -> usize {
        q * self.block() + 3 + i
    }
    pub fn eps(&self) -> usize {
        self.horizon * self.block()
    }
    pub fn n_vars(&self) -> usize {
        self.eps() + 1
    }

    pub fn trajectory(&self, x0: &[f64], sol: &[f64]) -> Trajectory {
        let mut states = vec![x0.to_vec()];
        let mut inputs = Vec::with_capacity(self.horizon);
        let mut available = Vec::with_capacity(self.horizon);
        for q in 0..self.horizon {
            inputs.push([sol[self.p_r(q)], sol[self.p_g(q)]]);
            available.push(sol[self.t(q)]);
            states.push((0..self.n_states).map(|i| sol[self.state(q, i)]).collect());
        }
        Trajectory { states, inputs, available, eps: sol[self.eps()] }
    }

    /// Warm start for the next sample: every block moves one step forward
    /// and the freed last block is filled with `tail` ([P_r, P_g, t, x..])
    /// or a copy of the old last block. Duals are shifted the same way when
    /// the stage row counts allow it.
    pub fn shift(&self, x: &[f64], y: &[f64], tail: Option<&[f64]>, next: &FhocpLayout) -> (Vec<f64>, Vec<f64>) {
        let nb = self.block();
        let mut xs = vec![0.0; next.n_vars()];
        if next.block() == nb && next.horizon >= 1 {
            let n = next.horizon;
            for q in 0..n {
                let from = (q + 1).min(self.horizon - 1);
                xs[q * nb..(q + 1) * nb].copy_from_slice(&x[from * nb..(from + 1) * nb]);
            }
            if let Some(t) = tail.filter(|t| t.len() == nb) {
                xs[(n - 1) * nb..n * nb].copy_from_slice(t);
            }
            xs[next.eps()] = x[self.eps()];
        }
        let mut ys = vec![0.0; next.n_rows];
        let same_rows = self.horizon == next.horizon
            && self.stage_start == next.stage_start
            && self.terminal_start.is_some() == next.terminal_start.is_some();
        if same_rows {
            ys[self.slack_row] = y[self.slack_row];
            for q in 0..self.horizon {
                let (a, b) = self.stage_range(q);
                let src = if q + 1 < self.horizon { self.stage_range(q + 1) } else { (a, b) };
                ys[a..b].copy_from_slice(&y[src.0..src.1]);
            }
            if let Some(t) = self.terminal_start {
                ys[t..].copy_from_slice(&y[t..]);
            }
        }
        (xs, ys)
    }

    fn stage_range(&self, q: usize) -> (usize, usize) {
        let end = self.stage_start.get(q + 1).copied().or(self.terminal_start).unwrap_or(self.n_rows);
        (self.stage_start[q], end)
    }
}

/// Assembles the maximization of Σ O(x̄(q), u(q)) as a minimization.
pub fn assemble_fhocp(data: &FhocpData<'_>) -> Result<(QuadraticProgram, FhocpLayout)> {
    let model = data.model;
    let nx = model.n_states();
    let nm = model.n_modes;
    let n = data.constraints.horizon();
    if n == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    if data.x0.len() != nx || data.terminal.is_some_and(|t| t.len() != nx) {
        return Err(Error::Dimension(format!("states must have {nx} entries")));
    }
    if data.velocity_weight.nrows() != nm || data.velocity_weight.ncols() != nm {
        return Err(Error::Dimension(format!("velocity weight must be {nm}x{nm}")));
    }
    let mut lay = FhocpLayout {
        horizon: n,
        n_states: nx,
        n_modes: nm,
        stage_start: Vec::with_capacity(n),
        slack_row: 0,
        terminal_start: None,
        n_rows: 0,
    };
    let mut b = QpBuilder::new(lay.n_vars());
    let ts = model.ts;
    let [a1, a2, a3, a4, a5] = data.alpha;

    // objective
    let (w3, w4) = (2.0 * a3 / (ts * ts), 2.0 * a4 / (ts * ts));
    for q in 0..n {
        b.add_linear(lay.p_g(q), -a1);
        b.add_linear(lay.t(q), -a2);
        if q == 0 {
            b.add_square(&[(lay.p_g(0), 1.0)], w3);
            b.add_linear(lay.p_g(0), -w3 * data.u_prev[1]);
            b.add_square(&[(lay.p_r(0), 1.0)], w4);
            b.add_linear(lay.p_r(0), -w4 * data.u_prev[0]);
        } else {
            b.add_square(&[(lay.p_g(q), 1.0), (lay.p_g(q - 1), -1.0)], w3);
            b.add_square(&[(lay.p_r(q), 1.0), (lay.p_r(q - 1), -1.0)], w4);
            // O_v on x̄(q), whose velocities sit in block q − 1
            for i in 0..nm {
                for j in i..nm {
                    let w = data.velocity_weight[(i, j)] + data.velocity_weight[(j, i)];
                    b.add_hessian(lay.state(q - 1, 1 + nm + i), lay.state(q - 1, 1 + nm + j), w);
                }
            }
        }
    }
    b.add_linear(lay.eps(), a5 * n as f64);

    // the slack is one scalar over the whole horizon
    let has_slack = data.constraints.stages[0].iter().any(|r| r.kind == ConstraintKind::Slack);
    lay.slack_row =
        if has_slack { b.add_bounds(lay.eps(), 0.0, f64::INFINITY) } else { b.add_bounds(lay.eps(), 0.0, 0.0) };

    for q in 0..n {
        lay.stage_start.push(b.n_rows());
        // x(q+1) = A_d x(q) + B_d u(q) + c_d
        for r in 0..nx {
            let mut terms = Vec::with_capacity(2 * nx + 2);
            terms.push((lay.state(q, r), 1.0));
            terms.push((lay.p_r(q), -model.bd[(r, 0)]));
            terms.push((lay.p_g(q), -model.bd[(r, 1)]));
            let mut rhs = model.cd[r];
            for c in 0..nx {
                let a = model.ad[(r, c)];
                if q == 0 {
                    rhs += a * data.x0[c];
                } else {
                    terms.push((lay.state(q - 1, c), -a));
                }
            }
            b.add_equality(&terms, rhs);
        }
        let rows = with_epigraph(&data.constraints.stages[q]);
        let mixed: Vec<EpigraphRow> =
            rows.iter().filter(|r| !r.kind.is_pure_state() && r.kind != ConstraintKind::Slack).copied().collect();
        let mixed = if q == 0 { fold_initial(&mixed, data.x0[0]) } else { mixed };
        for r in &mixed {
            let mut terms = vec![(lay.p_r(q), r.p_r), (lay.p_g(q), r.p_g), (lay.t(q), r.t), (lay.eps(), r.eps)];
            if q > 0 {
                terms.push((lay.state(q - 1, 0), r.k));
            }
            b.add_inequality(&terms, r.lo, r.hi);
        }
        // state-only rows act on x(q+1)
        for r in rows.iter().filter(|r| r.kind.is_pure_state()) {
            b.add_inequality(&[(lay.state(q, 0), r.k), (lay.eps(), r.eps)], r.lo, r.hi);
        }
    }
    if let Some(xs) = data.terminal {
        lay.terminal_start = Some(b.n_rows());
        for (i, v) in xs.iter().enumerate() {
            b.add_equality(&[(lay.state(n - 1, i), 1.0)], *v);
        }
    }
    lay.n_rows = b.n_rows();
    Ok((b.build()?, lay))
}

/// Substitutes the measured K(0) into first-stage rows. When the resulting
/// bounds on P_r(0) or P_g(0) contradict each other, lower bounds give way
/// to upper bounds (power and thrust caps win over the thrust floor).
fn fold_initial(rows: &[EpigraphRow], k0: f64) -> Vec<EpigraphRow> {
    let mut out: Vec<EpigraphRow> = rows
        .iter()
        .map(|r| {
            let s = r.k * k0;
            EpigraphRow { k: 0.0, lo: r.lo - s, hi: r.hi - s, ..*r }
        })
        .collect();
    let single = |r: &EpigraphRow| {
        let nz = [r.p_r, r.p_g, r.t, r.eps].iter().filter(|c| **c != 0.0).count();
        nz == 1
    };
    let bound = |r: &EpigraphRow, c: f64, lower: bool| -> f64 {
        let (lo, hi) = if c > 0.0 { (r.lo / c, r.hi / c) } else { (r.hi / c, r.lo / c) };
        if lower {
            lo
        } else {
            hi
        }
    };
    let t_hi =
        out.iter().filter(|r| single(r) && r.t != 0.0).map(|r| bound(r, r.t, false)).fold(f64::INFINITY, f64::min);
    for var in 0..2 {
        let coef = |r: &EpigraphRow| if var == 0 { r.p_r } else { r.p_g };
        let mut hi = out
            .iter()
            .filter(|r| single(r) && coef(r) != 0.0)
            .map(|r| bound(r, coef(r), false))
            .fold(f64::INFINITY, f64::min);
        if var == 0 {
            hi = hi.min(t_hi);
        }
        for r in out.iter_mut().filter(|r| single(r) && coef(r) != 0.0) {
            let c = coef(r);
            if bound(r, c, true) > hi {
                if c > 0.0 {
                    r.lo = hi * c;
                } else {
                    r.hi = hi * c;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::StageRow;
    use crate::qp::solve_qp;

    /// Integrator K⁺ = K + T_s(P_r − P_g/η) with no tower.
    fn integrator(ts: f64, eta: f64) -> DiscreteModel {
        DiscreteModel {
            ad: DMatrix::identity(1, 1),
            bd: DMatrix::from_row_slice(1, 2, &[ts, -ts / eta]),
            cd: nalgebra::DVector::zeros(1),
            ts,
            n_modes: 0,
        }
    }

    fn row(kind: ConstraintKind, c: [f64; 4], lo: f64, hi: f64) -> StageRow {
        StageRow { kind, k: c[0], p_r: c[1], p_g: c[2], eps: c[3], lo, hi }
    }

    fn box_rows() -> Vec<StageRow> {
        use ConstraintKind::*;
        vec![
            row(EnergyBounds, [1.0, 0.0, 0.0, 0.0], 0.0, 100.0),
            row(RotorPower, [0.0, 1.0, 0.0, 0.0], 0.0, 3.0),
            row(GeneratorPower, [0.0, 0.0, 1.0, 0.0], 0.0, 2.0),
            row(AvailablePower, [0.0, 1.0, 0.0, 0.0], f64::NEG_INFINITY, 3.0),
        ]
    }

    #[test]
    fn single_step_matches_closed_form() {
        // max a1 P_g − a3 ((P_g − g0)/T_s)² − a4 ((P_r − r0)/T_s)², interior optimum
        let ts = 0.5;
        let model = integrator(ts, 1.0);
        let set = ConvexConstraintSet { stages: vec![box_rows()] };
        let w = DMatrix::zeros(0, 0);
        let data = FhocpData {
            model: &model,
            constraints: &set,
            alpha: [1.0, 0.0, 1.0, 1.0, 0.0],
            velocity_weight: &w,
            x0: &[50.0],
            u_prev: [1.0, 1.0],
            terminal: None,
        };
        let (qp, lay) = assemble_fhocp(&data).unwrap();
        let sol = solve_qp(&qp, 1e-9, 20_000).unwrap();
        assert!(sol.is_optimal());
        let tr = lay.trajectory(data.x0, &sol.x);
        // d/dP_g: a1 − 2 a3 (P_g − g0)/T_s² = 0
        let pg = 1.0 + ts * ts / 2.0;
        assert!((tr.inputs[0][1] - pg).abs() < 1e-7, "{:?}", tr.inputs[0]);
        assert!((tr.inputs[0][0] - 1.0).abs() < 1e-7);
        assert!((tr.states[1][0] - (50.0 + ts * (1.0 - pg))).abs() < 1e-7);
    }

    #[test]
    fn terminal_relaxation_cannot_lower_the_optimum() {
        let model = integrator(0.2, 0.9);
        let set = ConvexConstraintSet { stages: vec![box_rows(); 6] };
        let w = DMatrix::zeros(0, 0);
        let mut data = FhocpData {
            model: &model,
            constraints: &set,
            alpha: [1.0, 1.0, 1.0, 0.01, 100.0],
            velocity_weight: &w,
            x0: &[40.0],
            u_prev: [2.0, 1.8],
            terminal: Some(&[40.0]),
        };
        let (qp, _) = assemble_fhocp(&data).unwrap();
        let with = solve_qp(&qp, 1e-8, 20_000).unwrap();
        data.terminal = None;
        let (qp, _) = assemble_fhocp(&data).unwrap();
        let without = solve_qp(&qp, 1e-8, 20_000).unwrap();
        assert!(with.is_optimal() && without.is_optimal());
        assert!(without.objective() <= with.objective() + 1e-7);
    }

    #[test]
    fn contradictory_first_stage_bounds_are_relaxed() {
        use ConstraintKind::*;
        // thrust floor asks for P_r ≥ 4 but the cap is 3
        let rows = with_epigraph(&[
            row(ThrustBounds, [0.0, 1.0, 0.0, 0.0], 4.0, f64::INFINITY),
            row(AvailablePower, [-0.1, 1.0, 0.0, 0.0], f64::NEG_INFINITY, 1.0),
        ]);
        let folded = fold_initial(&rows, 20.0);
        let floor = folded.iter().find(|r| r.kind == ThrustBounds).unwrap();
        assert!((floor.lo - 3.0).abs() < 1e-12);
        let cut = folded.iter().find(|r| r.kind == AvailablePower).unwrap();
        assert!((cut.hi - 3.0).abs() < 1e-12 && cut.k == 0.0);
    }

    #[test]
    fn shift_moves_blocks_forward() {
        let model = integrator(0.2, 1.0);
        let set = ConvexConstraintSet { stages: vec![box_rows(); 3] };
        let w = DMatrix::zeros(0, 0);
        let data = FhocpData {
            model: &model,
            constraints: &set,
            alpha: [1.0; 5],
            velocity_weight: &w,
            x0: &[1.0],
            u_prev: [0.0; 2],
            terminal: None,
        };
        let (qp, lay) = assemble_fhocp(&data).unwrap();
        let x: Vec<f64> = (0..lay.n_vars()).map(|i| i as f64).collect();
        let y: Vec<f64> = (0..qp.m()).map(|i| i as f64).collect();
        let (xs, ys) = lay.shift(&x, &y, Some(&[9.0, 9.0, 9.0, 9.0]), &lay);
        assert_eq!(&xs[..4], &x[4..8]);
        assert_eq!(&xs[8..12], &[9.0; 4]);
        assert_eq!(xs[12], x[12]);
        let (a, b) = lay.stage_range(0);
        let (c, _) = lay.stage_range(1);
        assert_eq!(&ys[a..b], &y[c..c + (b - a)]);
    }
}
