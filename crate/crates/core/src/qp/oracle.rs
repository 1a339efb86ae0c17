//! Reference solver for tiny strictly convex QPs: enumerates every active
//! set, solves the equality-constrained KKT system of each, and keeps the
//! candidates that satisfy all optimality conditions.

use nalgebra::{DMatrix, DVector};

use super::problem::QuadraticProgram;

/// Largest problem the enumeration accepts (3^m active-set guesses).
pub const ORACLE_MAX_ROWS: usize = 12;

/// Optimal (x, y) with the solver's sign convention, or `None` when no
/// active set yields a KKT point (infeasible or too large).
pub fn solve_by_enumeration(qp: &QuadraticProgram, tol: f64) -> Option<(Vec<f64>, Vec<f64>)> {
    let (n, m) = (qp.n, qp.m());
    if m > ORACLE_MAX_ROWS {
        return None;
    }
    let (pd, ad) = (qp.p.to_dense(), qp.a.to_dense());
    let p = DMatrix::from_fn(n, n, |i, j| pd[i][j]);
    let a = DMatrix::from_fn(m, n, |i, j| ad[i][j]);
    let eq: Vec<bool> = (0..m).map(|r| qp.l[r] == qp.u[r]).collect();
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    // side per row: 0 inactive, 1 lower, 2 upper
    let total = 3usize.pow(m as u32);
    'outer: for code in 0..total {
        let mut side = vec![0u8; m];
        let mut c = code;
        for s in side.iter_mut() {
            *s = (c % 3) as u8;
            c /= 3;
        }
        for r in 0..m {
            let s = side[r];
            let bad = (eq[r] && s != 1) || (s == 1 && !qp.l[r].is_finite()) || (s == 2 && !qp.u[r].is_finite());
            if bad {
                continue 'outer;
            }
        }
        let act: Vec<usize> = (0..m).filter(|&r| side[r] != 0).collect();
        let k = act.len();
        if k > n {
            continue;
        }
        let mut kkt = DMatrix::zeros(n + k, n + k);
        let mut rhs = DVector::zeros(n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&p);
        for i in 0..n {
            rhs[i] = -qp.q[i];
        }
        for (j, &r) in act.iter().enumerate() {
            for i in 0..n {
                kkt[(i, n + j)] = a[(r, i)];
                kkt[(n + j, i)] = a[(r, i)];
            }
            rhs[n + j] = if side[r] == 2 { qp.u[r] } else { qp.l[r] };
        }
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        if sol.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let x: Vec<f64> = sol.rows(0, n).iter().copied().collect();
        let mut y = vec![0.0; m];
        for (j, &r) in act.iter().enumerate() {
            y[r] = sol[n + j];
        }
        // dual sign: positive on an upper bound, negative on a lower bound
        let dual_ok = act.iter().all(|&r| match side[r] {
            _ if eq[r] => true,
            1 => y[r] <= tol,
            _ => y[r] >= -tol,
        });
        if !dual_ok {
            continue;
        }
        let ax = &a * DVector::from_column_slice(&x);
        let primal_ok = (0..m).all(|r| {
            let s = 1.0 + ax[r].abs();
            ax[r] >= qp.l[r] - tol * s && ax[r] <= qp.u[r] + tol * s
        });
        if !primal_ok {
            continue;
        }
        let f = qp.objective(&x);
        if best.as_ref().is_none_or(|b| f < b.0) {
            best = Some((f, x, y));
        }
    }
    best.map(|(_, x, y)| (x, y))
}
