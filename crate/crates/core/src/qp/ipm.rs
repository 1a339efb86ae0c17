//! Primal-dual interior-point method (Mehrotra predictor-corrector) on the
//! equilibrated problem. It shares the banded reduced-KKT factorization of
//! the splitting solver and takes over when that one stalls on strongly
//! degenerate problems.

use super::admm::fill_reduced;
use super::band::{BandBorder, BandFactor};
use super::sparse::CsrMatrix;

/// Scaled problem data borrowed from the solver workspace.
pub(super) struct Scaled<'a> {
    pub p: &'a CsrMatrix,
    pub a: &'a CsrMatrix,
    pub q: &'a [f64],
    pub l: &'a [f64],
    pub u: &'a [f64],
    pub eq: &'a [bool],
    pub bw: usize,
    pub border: usize,
}

pub(super) struct IpmResult {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub infeasible: bool,
}

/// Regularization of the equality rows; iterative refinement removes its
/// effect on the step.
const EQ_REG: f64 = 1e-8;
const PRIMAL_REG: f64 = 1e-11;
const REFINE_STEPS: usize = 4;
const STEP_FRACTION: f64 = 0.995;

struct Sides {
    /// Finite upper / lower bound per row (inequality rows only).
    up: Vec<bool>,
    lo: Vec<bool>,
}

struct Newton<'a> {
    sc: &'a Scaled<'a>,
    factor: BandFactor,
    w: Vec<f64>,
}

impl<'a> Newton<'a> {
    fn new(sc: &'a Scaled<'a>, w: Vec<f64>) -> Option<Self> {
        let n = sc.q.len();
        let mut weights = w.clone();
        for (r, e) in sc.eq.iter().enumerate() {
            if *e {
                weights[r] = 1.0 / EQ_REG;
            }
        }
        let mut reg = PRIMAL_REG;
        for _ in 0..6 {
            let mut m = BandBorder::new(n, sc.bw, sc.border);
            fill_reduced(&mut m, sc.p, sc.a, reg, &weights, None);
            if let Ok(factor) = m.factor() {
                return Some(Newton { sc, factor, w });
            }
            reg *= 100.0;
        }
        None
    }

    /// Solves [H, A_Eᵀ; A_E, 0] [dx; dy_E] = [r1; r2] where H = P + A_Iᵀ W A_I.
    /// `r2` is indexed by row and read only on equality rows.
    fn solve(&self, r1: &[f64], r2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let sc = self.sc;
        let (n, m) = (r1.len(), r2.len());
        let mut dx = vec![0.0; n];
        let mut dy = vec![0.0; m];
        let mut res1 = r1.to_vec();
        let mut res2 = r2.to_vec();
        let mut tmp_m = vec![0.0; m];
        let mut tmp_n = vec![0.0; n];
        for _ in 0..REFINE_STEPS {
            // correction from the regularized system
            for r in 0..m {
                tmp_m[r] = if sc.eq[r] { res2[r] / EQ_REG } else { 0.0 };
            }
            sc.a.tr_mul_vec(&tmp_m, &mut tmp_n);
            let mut cx: Vec<f64> = (0..n).map(|i| res1[i] + tmp_n[i]).collect();
            self.factor.solve(&mut cx);
            sc.a.mul_vec(&cx, &mut tmp_m);
            for r in 0..m {
                if sc.eq[r] {
                    dy[r] += (tmp_m[r] - res2[r]) / EQ_REG;
                }
            }
            for i in 0..n {
                dx[i] += cx[i];
            }
            // residual of the unregularized system
            self.apply(&dx, &dy, &mut res1, &mut res2);
            for i in 0..n {
                res1[i] = r1[i] - res1[i];
            }
            for r in 0..m {
                res2[r] = r2[r] - res2[r];
            }
            let big = r1.iter().chain(r2.iter()).fold(1.0_f64, |a, v| a.max(v.abs()));
            let small = res1.iter().chain(res2.iter()).fold(0.0_f64, |a, v| a.max(v.abs()));
            if small <= 1e-11 * big {
                break;
            }
        }
        (dx, dy)
    }

    fn apply(&self, dx: &[f64], dy: &[f64], o1: &mut [f64], o2: &mut [f64]) {
        let sc = self.sc;
        let m = dy.len();
        let mut ax = vec![0.0; m];
        sc.a.mul_vec(dx, &mut ax);
        sc.p.mul_vec(dx, o1);
        let mut t = vec![0.0; m];
        for r in 0..m {
            t[r] = if sc.eq[r] { dy[r] } else { self.w[r] * ax[r] };
            o2[r] = if sc.eq[r] { ax[r] } else { 0.0 };
        }
        let mut at = vec![0.0; dx.len()];
        sc.a.tr_mul_vec(&t, &mut at);
        for i in 0..dx.len() {
            o1[i] += at[i] + PRIMAL_REG * dx[i];
        }
    }
}

/// Largest step in (0, 1] keeping v + t·dv ≥ 0.
fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    v.iter().zip(dv).filter(|(_, d)| **d < 0.0).fold(1.0_f64, |a, (v, d)| a.min(-v / d))
}

/// Runs the method from `x0` (scaled units). `done` receives scaled (x, y)
/// and decides convergence on the caller's criteria.
pub(super) fn solve(
    sc: &Scaled<'_>,
    x0: &[f64],
    max_iter: usize,
    mut done: impl FnMut(&[f64], &[f64]) -> bool,
) -> IpmResult {
    let (n, m) = (sc.q.len(), sc.l.len());
    let sides = Sides {
        up: (0..m).map(|r| !sc.eq[r] && sc.u[r].is_finite()).collect(),
        lo: (0..m).map(|r| !sc.eq[r] && sc.l[r].is_finite()).collect(),
    };
    let n_c = sides.up.iter().chain(&sides.lo).filter(|b| **b).count().max(1) as f64;

    let mut x = x0.to_vec();
    let mut ax = vec![0.0; m];
    sc.a.mul_vec(&x, &mut ax);
    // slacks and multipliers of the upper (u) and lower (l) sides
    let mut su = vec![0.0; m];
    let mut sl = vec![0.0; m];
    let mut lu = vec![0.0; m];
    let mut ll = vec![0.0; m];
    let mut ye = vec![0.0; m];
    for r in 0..m {
        if sides.up[r] {
            su[r] = (sc.u[r] - ax[r]).max(1.0);
            lu[r] = 1.0;
        }
        if sides.lo[r] {
            sl[r] = (ax[r] - sc.l[r]).max(1.0);
            ll[r] = 1.0;
        }
    }
    let y_of = |lu: &[f64], ll: &[f64], ye: &[f64]| -> Vec<f64> {
        (0..m).map(|r| if sc.eq[r] { ye[r] } else { lu[r] - ll[r] }).collect()
    };

    let mut px = vec![0.0; n];
    let mut aty = vec![0.0; n];
    let mut prev_primal = f64::INFINITY;
    let mut stalls = 0;
    for iter in 1..=max_iter {
        sc.a.mul_vec(&x, &mut ax);
        sc.p.mul_vec(&x, &mut px);
        let y = y_of(&lu, &ll, &ye);
        if done(&x, &y) {
            return IpmResult { x, y, iterations: iter - 1, converged: true, infeasible: false };
        }
        sc.a.tr_mul_vec(&y, &mut aty);
        let rd: Vec<f64> = (0..n).map(|i| px[i] + sc.q[i] + aty[i]).collect();
        let mut re = vec![0.0; m];
        let mut rpu = vec![0.0; m];
        let mut rpl = vec![0.0; m];
        let mut mu = 0.0;
        let mut primal = 0.0_f64;
        for r in 0..m {
            if sc.eq[r] {
                re[r] = ax[r] - sc.l[r];
                primal = primal.max(re[r].abs());
            }
            if sides.up[r] {
                rpu[r] = ax[r] + su[r] - sc.u[r];
                mu += su[r] * lu[r];
                primal = primal.max(rpu[r].abs());
            }
            if sides.lo[r] {
                rpl[r] = ax[r] - sl[r] - sc.l[r];
                mu += sl[r] * ll[r];
                primal = primal.max(rpl[r].abs());
            }
        }
        mu /= n_c;
        // multipliers growing without bound while the primal residual
        // stops improving indicate an empty feasible set
        let lam = lu.iter().chain(&ll).chain(&ye).fold(0.0_f64, |a, v| a.max(v.abs()));
        if primal > 0.5 * prev_primal || primal > 1e-6 {
            stalls += (lam > 1e10 && primal > 1e-6) as usize;
        }
        prev_primal = primal;
        if stalls > 5 {
            return IpmResult { x, y, iterations: iter, converged: false, infeasible: true };
        }

        let w: Vec<f64> = (0..m)
            .map(|r| {
                let mut w = 0.0;
                if sides.up[r] {
                    w += lu[r] / su[r];
                }
                if sides.lo[r] {
                    w += ll[r] / sl[r];
                }
                w
            })
            .collect();
        let Some(newton) = Newton::new(sc, w) else {
            return IpmResult { x, y, iterations: iter, converged: false, infeasible: false };
        };

        // direction for complementarity targets rcu = s∘λ − target
        let direction = |rcu: &[f64], rcl: &[f64]| {
            let mut g = vec![0.0; m];
            for r in 0..m {
                if sides.up[r] {
                    g[r] += (lu[r] * rpu[r] - rcu[r]) / su[r];
                }
                if sides.lo[r] {
                    g[r] += (rcl[r] + ll[r] * rpl[r]) / sl[r];
                }
            }
            let mut atg = vec![0.0; n];
            sc.a.tr_mul_vec(&g, &mut atg);
            let r1: Vec<f64> = (0..n).map(|i| -rd[i] - atg[i]).collect();
            let r2: Vec<f64> = re.iter().map(|v| -v).collect();
            let (dx, dye) = newton.solve(&r1, &r2);
            let mut adx = vec![0.0; m];
            sc.a.mul_vec(&dx, &mut adx);
            let mut dsu = vec![0.0; m];
            let mut dsl = vec![0.0; m];
            let mut dlu = vec![0.0; m];
            let mut dll = vec![0.0; m];
            for r in 0..m {
                if sides.up[r] {
                    dsu[r] = -rpu[r] - adx[r];
                    dlu[r] = (-rcu[r] - lu[r] * dsu[r]) / su[r];
                }
                if sides.lo[r] {
                    dsl[r] = adx[r] + rpl[r];
                    dll[r] = (-rcl[r] - ll[r] * dsl[r]) / sl[r];
                }
            }
            (dx, dye, dsu, dsl, dlu, dll)
        };
        let step_of = |dsu: &[f64], dsl: &[f64], dlu: &[f64], dll: &[f64]| {
            max_step(&su, dsu).min(max_step(&sl, dsl)).min(max_step(&lu, dlu)).min(max_step(&ll, dll))
        };

        // predictor
        let rcu: Vec<f64> = (0..m).map(|r| su[r] * lu[r]).collect();
        let rcl: Vec<f64> = (0..m).map(|r| sl[r] * ll[r]).collect();
        let (_, _, dsu, dsl, dlu, dll) = direction(&rcu, &rcl);
        let a_aff = step_of(&dsu, &dsl, &dlu, &dll);
        let mut mu_aff = 0.0;
        for r in 0..m {
            if sides.up[r] {
                mu_aff += (su[r] + a_aff * dsu[r]) * (lu[r] + a_aff * dlu[r]);
            }
            if sides.lo[r] {
                mu_aff += (sl[r] + a_aff * dsl[r]) * (ll[r] + a_aff * dll[r]);
            }
        }
        mu_aff /= n_c;
        let sigma = if mu > 0.0 { (mu_aff / mu).clamp(0.0, 1.0).powi(3) } else { 0.0 };

        // corrector
        let rcu2: Vec<f64> = (0..m).map(|r| rcu[r] + dsu[r] * dlu[r] - sigma * mu * sides.up[r] as u8 as f64).collect();
        let rcl2: Vec<f64> = (0..m).map(|r| rcl[r] + dsl[r] * dll[r] - sigma * mu * sides.lo[r] as u8 as f64).collect();
        let (dx, dye, dsu, dsl, dlu, dll) = direction(&rcu2, &rcl2);
        let alpha = (STEP_FRACTION * step_of(&dsu, &dsl, &dlu, &dll)).min(1.0);
        for i in 0..n {
            x[i] += alpha * dx[i];
        }
        for r in 0..m {
            if sc.eq[r] {
                ye[r] += alpha * dye[r];
            }
            if sides.up[r] {
                su[r] += alpha * dsu[r];
                lu[r] += alpha * dlu[r];
            }
            if sides.lo[r] {
                sl[r] += alpha * dsl[r];
                ll[r] += alpha * dll[r];
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            break;
        }
    }
    let y = y_of(&lu, &ll, &ye);
    IpmResult { x, y, iterations: max_iter, converged: false, infeasible: false }
}

/// Convenience for tests: solves an unscaled problem directly.
#[cfg(test)]
pub(super) fn solve_plain(qp: &super::problem::QuadraticProgram, tol: f64) -> (Vec<f64>, Vec<f64>, bool) {
    use super::band::plan;
    let eq: Vec<bool> = (0..qp.m()).map(|r| qp.l[r] == qp.u[r]).collect();
    let mut pat: Vec<(usize, usize)> = (0..qp.n).map(|i| (i, i)).collect();
    for r in 0..qp.n {
        pat.extend(qp.p.row(r).0.iter().filter(|c| **c <= r).map(|c| (r, *c)));
    }
    for r in 0..qp.m() {
        let idx = qp.a.row(r).0;
        for &i in idx {
            pat.extend(idx.iter().filter(|j| **j <= i).map(|j| (i, *j)));
        }
    }
    let (bw, border) = plan(qp.n, &pat);
    let sc = Scaled { p: &qp.p, a: &qp.a, q: &qp.q, l: &qp.l, u: &qp.u, eq: &eq, bw, border };
    let r = solve(&sc, &vec![0.0; qp.n], 200, |x, y| qp.kkt(x, y).max_residual() <= tol);
    (r.x, r.y, r.converged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qp::QpBuilder;

    #[test]
    fn box_constrained_scalar() {
        // min (x-1)² s.t. x ≤ 0
        let mut b = QpBuilder::new(1);
        b.add_hessian(0, 0, 2.0);
        b.add_linear(0, -2.0);
        b.add_inequality(&[(0, 1.0)], f64::NEG_INFINITY, 0.0);
        let (x, y, ok) = solve_plain(&b.build().unwrap(), 1e-9);
        assert!(ok);
        assert!(x[0].abs() < 1e-8 && (y[0] - 2.0).abs() < 1e-7, "{x:?} {y:?}");
    }

    #[test]
    fn equality_and_ranges() {
        // min ½|x|² s.t. x0 + x1 + x2 = 1, 0.5 ≤ x0 ≤ 2, x1 free
        let mut b = QpBuilder::new(3);
        for i in 0..3 {
            b.add_hessian(i, i, 1.0);
        }
        b.add_equality(&[(0, 1.0), (1, 1.0), (2, 1.0)], 1.0);
        b.add_bounds(0, 0.5, 2.0);
        b.add_inequality(&[(1, 1.0)], f64::NEG_INFINITY, f64::INFINITY);
        let (x, _, ok) = solve_plain(&b.build().unwrap(), 1e-9);
        assert!(ok);
        assert!((x[0] - 0.5).abs() < 1e-7 && (x[1] - 0.25).abs() < 1e-7 && (x[2] - 0.25).abs() < 1e-7, "{x:?}");
    }

    #[test]
    fn degenerate_lp() {
        // max x0 + x1 on the simplex with a redundant cut through the optimum
        let mut b = QpBuilder::new(2);
        b.add_linear(0, -1.0);
        b.add_linear(1, -1.0);
        b.add_inequality(&[(0, 1.0), (1, 1.0)], f64::NEG_INFINITY, 1.0);
        b.add_inequality(&[(0, 2.0), (1, 2.0)], f64::NEG_INFINITY, 2.0);
        b.add_bounds(0, 0.0, f64::INFINITY);
        b.add_bounds(1, 0.0, 0.25);
        let qp = b.build().unwrap();
        let (x, y, ok) = solve_plain(&qp, 1e-9);
        assert!(ok);
        assert!((x[0] + x[1] - 1.0).abs() < 1e-8);
        assert!(qp.kkt(&x, &y).duality_gap < 1e-8);
    }
}
