//! Optimal steady state of the prediction model under the stage constraints.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::admm::{QpSettings, QpSolver};
use super::problem::QpBuilder;
use crate::convex::{with_epigraph, DiscreteModel, StageRow};
use crate::error::{Error, Result};

/// Steady-state part of the economic objective; the rate terms vanish at a
/// fixed point.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyObjective {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha5: f64,
    /// N_m × N_m weight of the modal velocities.
    pub velocity_weight: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyState {
    pub x: Vec<f64>,
    /// [P_r, P_g].
    pub u: [f64; 2],
    pub eps: f64,
    /// Value of the P̂_av epigraph variable.
    pub available: f64,
    pub objective: f64,
    /// ‖x − A_d x − B_d u − c_d‖∞ after refinement.
    pub residual: f64,
}

/// ‖x − A_d x − B_d u − c_d‖∞.
pub fn fixed_point_residual(model: &DiscreteModel, x: &[f64], u: [f64; 2]) -> f64 {
    let xv = DVector::from_column_slice(x);
    let uv = DVector::from_column_slice(&u);
    (model.step(&xv, &uv) - xv).amax()
}

/// Maximizes α₁P_g + α₂P̂_av − α₅ε − O_v over fixed points of the model that
/// satisfy `rows`. The QP solution is then refined: P_r is set to P_g/η
/// (zero net power into the rotor) and the tower state is solved exactly,
/// which brings the fixed-point residual to rounding level.
pub fn solve_steady_state(
    model: &DiscreteModel,
    rows: &[StageRow],
    objective: &SteadyObjective,
    efficiency: f64,
    settings: &QpSettings,
) -> Result<SteadyState> {
    let nx = model.n_states();
    let nm = model.n_modes;
    if objective.velocity_weight.nrows() != nm || objective.velocity_weight.ncols() != nm {
        return Err(Error::Dimension(format!("velocity weight must be {nm}x{nm}")));
    }
    // [P_r, P_g, t, x.., ε]
    let (ipr, ipg, it, ix) = (0, 1, 2, 3);
    let ie = ix + nx;
    let mut b = QpBuilder::new(ie + 1);
    b.add_linear(ipg, -objective.alpha1);
    b.add_linear(it, -objective.alpha2);
    b.add_linear(ie, objective.alpha5);
    for i in 0..nm {
        for j in i..nm {
            let w = objective.velocity_weight[(i, j)] + objective.velocity_weight[(j, i)];
            b.add_hessian(ix + 1 + nm + i, ix + 1 + nm + j, w);
        }
    }
    for r in 0..nx {
        let mut terms: Vec<(usize, f64)> =
            (0..nx).map(|c| (ix + c, if r == c { 1.0 } else { 0.0 } - model.ad[(r, c)])).collect();
        terms.push((ipr, -model.bd[(r, 0)]));
        terms.push((ipg, -model.bd[(r, 1)]));
        b.add_equality(&terms, model.cd[r]);
    }
    for row in with_epigraph(rows) {
        b.add_inequality(&[(ix, row.k), (ipr, row.p_r), (ipg, row.p_g), (it, row.t), (ie, row.eps)], row.lo, row.hi);
    }
    let qp = b.build()?;
    let sol = QpSolver::new(settings.clone()).solve(&qp, None)?;
    if !sol.is_optimal() {
        return Err(Error::Qp(format!("steady-state problem ended with status {:?}", sol.status)));
    }

    let k = sol.x[ix];
    let p_g = sol.x[ipg];
    let u = [p_g / efficiency, p_g];
    // tower block: (I − A_tt) x_t = A_tK K + B_t u + c_t
    let nt = nx - 1;
    let mut x = vec![k; 1];
    if nt > 0 {
        let lhs = DMatrix::identity(nt, nt) - model.ad.view((1, 1), (nt, nt));
        let rhs = model.ad.view((1, 0), (nt, 1)).column(0) * k
            + model.bd.view((1, 0), (nt, 2)) * DVector::from_column_slice(&u)
            + model.cd.rows(1, nt);
        let xt = lhs.lu().solve(&rhs).ok_or_else(|| Error::Singularity("tower block has a unit eigenvalue".into()))?;
        x.extend(xt.iter());
    }
    let residual = fixed_point_residual(model, &x, u);
    let vm = DVector::from_column_slice(&x[1 + nm..]);
    let ov = (vm.transpose() * &objective.velocity_weight * &vm)[(0, 0)];
    let eps = sol.x[ie].max(0.0);
    let available = sol.x[it];
    Ok(SteadyState {
        objective: objective.alpha1 * p_g + objective.alpha2 * available - objective.alpha5 * eps - ov,
        x,
        u,
        eps,
        available,
        residual,
    })
}
