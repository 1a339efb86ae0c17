//! Operator-splitting QP solver (ADMM on the OSQP splitting) with Ruiz
//! equilibration, adaptive step size, infeasibility certificates and
//! active-set polishing.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::band::{plan, BandBorder, BandFactor};
use super::ipm;
use super::problem::{KktReport, QuadraticProgram};
use super::sparse::CsrMatrix;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QpSettings {
    /// Bound on the normalized KKT residuals for an optimal status.
    pub tolerance: f64,
    pub max_iter: usize,
    pub rho: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub scaling_iters: usize,
    pub adaptive_rho: bool,
    pub adaptive_rho_interval: usize,
    pub check_interval: usize,
    pub polish: bool,
    pub polish_delta: f64,
    pub polish_refine_iters: usize,
    pub infeasibility_tol: f64,
    /// Hand over to the interior-point method when splitting iterations
    /// exceed `fallback_iter`.
    pub ipm_fallback: bool,
    pub fallback_iter: usize,
    pub ipm_max_iter: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        QpSettings {
            tolerance: 1e-6,
            max_iter: 20_000,
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            scaling_iters: 10,
            adaptive_rho: true,
            adaptive_rho_interval: 25,
            check_interval: 5,
            polish: true,
            polish_delta: 1e-6,
            polish_refine_iters: 25,
            infeasibility_tol: 1e-6,
            ipm_fallback: true,
            fallback_iter: 200,
            ipm_max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QpStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIterations,
    NonConvex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpSolution {
    pub x: Vec<f64>,
    /// One multiplier per constraint row; positive when the upper bound is active.
    pub y: Vec<f64>,
    pub status: QpStatus,
    pub kkt: KktReport,
    pub iterations: usize,
    #[serde(skip)]
    pub solve_time: Duration,
    pub polished: bool,
}

impl QpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == QpStatus::Optimal
    }

    pub fn objective(&self) -> f64 {
        self.kkt.primal_objective
    }
}

/// Everything that depends only on P and A (and the equality pattern).
#[derive(Debug, Clone)]
struct Workspace {
    p: CsrMatrix,
    a: CsrMatrix,
    eq: Vec<bool>,
    d: Vec<f64>,
    e: Vec<f64>,
    c: f64,
    ps: CsrMatrix,
    as_: CsrMatrix,
    bw: usize,
    border: usize,
    rho: f64,
    rho_vec: Vec<f64>,
    factor: BandFactor,
}

/// Reusable solver. Keeps the scaling and factorization while successive
/// problems share P and A, which is the common case in receding horizon.
#[derive(Debug, Clone, Default)]
pub struct QpSolver {
    pub settings: QpSettings,
    ws: Option<Workspace>,
    /// The last solve needed the interior-point method.
    degenerate: bool,
}

const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const RHO_EQ_FACTOR: f64 = 1e3;
const POLISH_INTERVAL: usize = 100;

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |a, b| a.max(b.abs()))
}

fn lower_pattern(p: &CsrMatrix, a: &CsrMatrix) -> Vec<(usize, usize)> {
    let mut pat: Vec<(usize, usize)> = (0..p.nrows).map(|i| (i, i)).collect();
    for r in 0..p.nrows {
        for &c in p.row(r).0 {
            if c <= r {
                pat.push((r, c));
            }
        }
    }
    for r in 0..a.nrows {
        let idx = a.row(r).0;
        for &i in idx {
            for &j in idx {
                if j <= i {
                    pat.push((i, j));
                }
            }
        }
    }
    pat.sort_unstable();
    pat.dedup();
    pat
}

pub(super) fn fill_reduced(
    m: &mut BandBorder,
    p: &CsrMatrix,
    a: &CsrMatrix,
    diag: f64,
    weights: &[f64],
    rows: Option<&[usize]>,
) {
    m.clear();
    for r in 0..p.nrows {
        let (idx, val) = p.row(r);
        for (&c, &v) in idx.iter().zip(val) {
            if c <= r {
                m.add(r, c, v);
            }
        }
        m.add(r, r, diag);
    }
    let mut visit = |r: usize, w: f64| {
        let (idx, val) = a.row(r);
        for (ii, (&i, &vi)) in idx.iter().zip(val).enumerate() {
            for (&j, &vj) in idx[..=ii].iter().zip(&val[..=ii]) {
                m.add(i, j, w * vi * vj);
            }
        }
    };
    match rows {
        Some(rs) => rs.iter().for_each(|&r| visit(r, weights[r])),
        None => (0..a.nrows).for_each(|r| visit(r, weights[r])),
    }
}

impl Workspace {
    fn build(qp: &QuadraticProgram, s: &QpSettings) -> std::result::Result<Self, QpStatus> {
        let (n, m) = (qp.n, qp.m());
        let pattern = lower_pattern(&qp.p, &qp.a);
        let (bw, border) = plan(n, &pattern);

        // convexity check on P itself
        let pscale = inf_norm(&qp.p.data).max(1.0);
        let mut chk = BandBorder::new(n, bw, border);
        fill_reduced(&mut chk, &qp.p, &qp.a, 1e-10 * pscale, &vec![0.0; m], Some(&[]));
        if chk.factor().is_err() {
            return Err(QpStatus::NonConvex);
        }

        // Ruiz equilibration of [[P, Aᵀ], [A, 0]]
        let mut d = vec![1.0; n];
        let mut e = vec![1.0; m];
        let mut ps = qp.p.clone();
        let mut as_ = qp.a.clone();
        for _ in 0..s.scaling_iters {
            let pc = ps.col_norms_inf();
            let ac = as_.col_norms_inf();
            let dd: Vec<f64> = (0..n)
                .map(|j| {
                    let v = pc[j].max(ac[j]);
                    if v < 1e-4 {
                        1.0
                    } else {
                        1.0 / v.sqrt()
                    }
                })
                .collect();
            let ee: Vec<f64> =
                as_.row_norms_inf().iter().map(|&v| if v < 1e-4 { 1.0 } else { 1.0 / v.sqrt() }).collect();
            ps.scale(&dd, &dd);
            as_.scale(&ee, &dd);
            for j in 0..n {
                d[j] *= dd[j];
            }
            for r in 0..m {
                e[r] *= ee[r];
            }
        }
        let pc = ps.col_norms_inf();
        let mean_p = if n > 0 { pc.iter().sum::<f64>() / n as f64 } else { 0.0 };
        let qs = inf_norm(&qp.q.iter().zip(&d).map(|(q, d)| q * d).collect::<Vec<_>>());
        let denom = mean_p.max(qs);
        let c = if denom < 1e-4 { 1.0 } else { (1.0 / denom).min(1e4) };
        for v in &mut ps.data {
            *v *= c;
        }
        let eq: Vec<bool> = (0..m).map(|r| qp.l[r] == qp.u[r]).collect();
        let rho = s.rho;
        let rho_vec = rho_vector(qp, &eq, rho);
        let mut kkt = BandBorder::new(n, bw, border);
        fill_reduced(&mut kkt, &ps, &as_, s.sigma, &rho_vec, None);
        let factor = kkt.factor().map_err(|_| QpStatus::NonConvex)?;
        Ok(Workspace { p: qp.p.clone(), a: qp.a.clone(), eq, d, e, c, ps, as_, bw, border, rho, rho_vec, factor })
    }

    fn matches(&self, qp: &QuadraticProgram) -> bool {
        self.p == qp.p && self.a == qp.a && self.eq.iter().enumerate().all(|(r, &e)| e == (qp.l[r] == qp.u[r]))
    }

    fn refactor(&mut self, qp: &QuadraticProgram, s: &QpSettings, rho: f64) -> bool {
        let rho_vec = rho_vector(qp, &self.eq, rho);
        let mut kkt = BandBorder::new(qp.n, self.bw, self.border);
        fill_reduced(&mut kkt, &self.ps, &self.as_, s.sigma, &rho_vec, None);
        match kkt.factor() {
            Ok(f) => {
                self.factor = f;
                self.rho = rho;
                self.rho_vec = rho_vec;
                true
            }
            Err(_) => false,
        }
    }
}

fn rho_vector(qp: &QuadraticProgram, eq: &[bool], rho: f64) -> Vec<f64> {
    (0..qp.m())
        .map(|r| {
            if eq[r] {
                RHO_EQ_FACTOR * rho
            } else if qp.l[r] == f64::NEG_INFINITY && qp.u[r] == f64::INFINITY {
                RHO_MIN
            } else {
                rho
            }
        })
        .collect()
}

/// Primal-dual starting point in original units.
#[derive(Debug, Clone, Copy)]
pub struct WarmStart<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
}

/// Convenience wrapper: one-off solve with default settings.
pub fn solve_qp(qp: &QuadraticProgram, tolerance: f64, max_iter: usize) -> Result<QpSolution> {
    let mut s = QpSolver::new(QpSettings { tolerance, max_iter, ..QpSettings::default() });
    s.solve(qp, None)
}

impl QpSolver {
    pub fn new(settings: QpSettings) -> Self {
        QpSolver { settings, ws: None, degenerate: false }
    }

    /// Drops cached scaling and factorization.
    pub fn reset(&mut self) {
        self.ws = None;
        self.degenerate = false;
    }

    pub fn solve(&mut self, qp: &QuadraticProgram, warm: Option<WarmStart<'_>>) -> Result<QpSolution> {
        let start = Instant::now();
        let s = self.settings.clone();
        let (n, m) = (qp.n, qp.m());
        let fail = |status: QpStatus, iterations: usize| QpSolution {
            x: vec![0.0; n],
            y: vec![0.0; m],
            status,
            kkt: KktReport::default(),
            iterations,
            solve_time: start.elapsed(),
            polished: false,
        };
        if !self.ws.as_ref().is_some_and(|w| w.matches(qp)) {
            match Workspace::build(qp, &s) {
                Ok(w) => {
                    self.ws = Some(w);
                    self.degenerate = false;
                }
                Err(status) => {
                    self.ws = None;
                    return Ok(fail(status, 0));
                }
            }
        }
        let ws = self.ws.as_mut().unwrap();
        let (d, e, c) = (ws.d.clone(), ws.e.clone(), ws.c);
        let qs: Vec<f64> = (0..n).map(|i| c * d[i] * qp.q[i]).collect();
        let ls: Vec<f64> = (0..m).map(|r| qp.l[r] * e[r]).collect();
        let us: Vec<f64> = (0..m).map(|r| qp.u[r] * e[r]).collect();

        let mut x = vec![0.0; n];
        let mut y = vec![0.0; m];
        let mut z = vec![0.0; m];
        if let Some(w) = warm {
            if w.x.len() == n && w.y.len() == m {
                for i in 0..n {
                    x[i] = w.x[i] / d[i];
                }
                for r in 0..m {
                    y[r] = c * w.y[r] / e[r];
                }
            }
        }
        ws.as_.mul_vec(&x, &mut z);
        for r in 0..m {
            z[r] = z[r].clamp(ls[r], us[r]);
        }

        let mut xt = vec![0.0; n];
        let mut zt = vec![0.0; m];
        let mut tmp_m = vec![0.0; m];
        let mut tmp_n = vec![0.0; n];
        let mut ax = vec![0.0; m];
        let mut px = vec![0.0; n];
        let mut aty = vec![0.0; n];
        let mut x_prev = x.clone();
        let mut y_prev = y.clone();

        let mut next_polish = 1e-3_f64;
        let mut best: Option<(QpSolution, f64)> = None;

        // a warm start close to optimal may already identify the active set
        let skip = s.ipm_fallback && self.degenerate;
        if s.polish && warm.is_some() {
            let rounds = if skip { 1 } else { POLISH_ROUNDS };
            if let Some(sol) = polish(qp, ws, &s, &qs, &ls, &us, &x, &z, &y, rounds) {
                if sol.kkt.max_residual() <= s.tolerance {
                    return Ok(QpSolution { solve_time: start.elapsed(), ..sol });
                }
            }
        }

        let budget = match (s.ipm_fallback, skip) {
            (true, true) => 0,
            (true, false) => s.max_iter.min(s.fallback_iter),
            _ => s.max_iter,
        };
        for iter in 1..=budget {
            x_prev.copy_from_slice(&x);
            y_prev.copy_from_slice(&y);
            // x̃ = K⁻¹(σx − q + Aᵀ(ρz − y))
            for r in 0..m {
                tmp_m[r] = ws.rho_vec[r] * z[r] - y[r];
            }
            ws.as_.tr_mul_vec(&tmp_m, &mut tmp_n);
            for i in 0..n {
                xt[i] = s.sigma * x[i] - qs[i] + tmp_n[i];
            }
            ws.factor.solve(&mut xt);
            ws.as_.mul_vec(&xt, &mut zt);
            for i in 0..n {
                x[i] = s.alpha * xt[i] + (1.0 - s.alpha) * x[i];
            }
            for r in 0..m {
                let zr = s.alpha * zt[r] + (1.0 - s.alpha) * z[r];
                let znew = (zr + y[r] / ws.rho_vec[r]).clamp(ls[r], us[r]);
                y[r] += ws.rho_vec[r] * (zr - znew);
                z[r] = znew;
            }

            if iter % s.check_interval != 0 && iter != 1 && iter != budget {
                continue;
            }
            // residuals in original units
            ws.as_.mul_vec(&x, &mut ax);
            ws.ps.mul_vec(&x, &mut px);
            ws.as_.tr_mul_vec(&y, &mut aty);
            let mut rp = 0.0_f64;
            let (mut nax, mut nz) = (0.0_f64, 0.0_f64);
            for r in 0..m {
                rp = rp.max(((ax[r] - z[r]) / e[r]).abs());
                nax = nax.max((ax[r] / e[r]).abs());
                nz = nz.max((z[r] / e[r]).abs());
            }
            let mut rd = 0.0_f64;
            let (mut npx, mut naty, mut nq) = (0.0_f64, 0.0_f64, 0.0_f64);
            for i in 0..n {
                let k = 1.0 / (c * d[i]);
                rd = rd.max(((px[i] + qs[i] + aty[i]) * k).abs());
                npx = npx.max((px[i] * k).abs());
                naty = naty.max((aty[i] * k).abs());
                nq = nq.max((qs[i] * k).abs());
            }
            let prim_rel = rp / (1.0 + nax.max(nz));
            let dual_rel = rd / (1.0 + npx.max(naty).max(nq));
            let level = prim_rel.max(dual_rel);
            log::trace!("iter {iter}: primal {prim_rel:.3e} dual {dual_rel:.3e} rho {:.3e}", ws.rho);

            if !level.is_finite() {
                return Ok(fail(QpStatus::MaxIterations, iter));
            }

            if level <= s.tolerance {
                let sol = unscaled(qp, &x, &y, &d, &e, c, iter, false);
                let res = sol.kkt.max_residual();
                if res <= s.tolerance {
                    return Ok(QpSolution { solve_time: start.elapsed(), status: QpStatus::Optimal, ..sol });
                }
                if best.as_ref().is_none_or(|b| res < b.1) {
                    best = Some((sol, res));
                }
            }
            if s.polish && (level <= next_polish || (iter % POLISH_INTERVAL == 0 && level < 1e-2)) {
                next_polish = next_polish.min(level * 0.1);
                if let Some(sol) = polish(qp, ws, &s, &qs, &ls, &us, &x, &z, &y, POLISH_ROUNDS) {
                    let res = sol.kkt.max_residual();
                    if res <= s.tolerance {
                        return Ok(QpSolution { iterations: iter, solve_time: start.elapsed(), ..sol });
                    }
                }
            }

            // infeasibility certificates from the last iterate difference
            if let Some(status) = certificates(qp, ws, &s, &x, &x_prev, &y, &y_prev, &d, &e, c, &qs) {
                let mut sol = unscaled(qp, &x, &y, &d, &e, c, iter, false);
                sol.status = status;
                sol.solve_time = start.elapsed();
                return Ok(sol);
            }

            if s.adaptive_rho && iter % s.adaptive_rho_interval == 0 {
                let pn = prim_rel.max(1e-30);
                let dn = dual_rel.max(1e-30);
                let new_rho = (ws.rho * (pn / dn).sqrt()).clamp(RHO_MIN, RHO_MAX);
                if new_rho > 5.0 * ws.rho || new_rho < 0.2 * ws.rho {
                    ws.refactor(qp, &s, new_rho);
                }
            }
        }
        if s.ipm_fallback {
            let sc =
                ipm::Scaled { p: &ws.ps, a: &ws.as_, q: &qs, l: &ls, u: &us, eq: &ws.eq, bw: ws.bw, border: ws.border };
            let r = ipm::solve(&sc, &x, s.ipm_max_iter, |xs, ys| {
                let k = unscaled(qp, xs, ys, &d, &e, c, 0, false).kkt;
                k.max_residual() <= s.tolerance && k.duality_gap <= s.tolerance
            });
            let total = budget + r.iterations;
            self.degenerate = r.converged;
            let mut sol = unscaled(qp, &r.x, &r.y, &d, &e, c, total, false);
            if r.converged {
                sol.solve_time = start.elapsed();
                return Ok(sol);
            }
            let res = sol.kkt.max_residual();
            if r.infeasible {
                sol.status = QpStatus::PrimalInfeasible;
                sol.solve_time = start.elapsed();
                return Ok(sol);
            }
            if res.is_finite() && best.as_ref().is_none_or(|b| res < b.1) {
                best = Some((sol, res));
            }
        }
        let mut sol = match best {
            Some((b, _)) => b,
            None => unscaled(qp, &x, &y, &d, &e, c, budget, false),
        };
        sol.status = QpStatus::MaxIterations;
        sol.iterations = budget;
        sol.solve_time = start.elapsed();
        Ok(sol)
    }
}

#[allow(clippy::too_many_arguments)]
fn unscaled(
    qp: &QuadraticProgram,
    xs: &[f64],
    ys: &[f64],
    d: &[f64],
    e: &[f64],
    c: f64,
    iterations: usize,
    polished: bool,
) -> QpSolution {
    let x: Vec<f64> = xs.iter().zip(d).map(|(v, d)| v * d).collect();
    let y: Vec<f64> = ys.iter().zip(e).map(|(v, e)| v * e / c).collect();
    let kkt = qp.kkt(&x, &y);
    QpSolution { x, y, status: QpStatus::Optimal, kkt, iterations, solve_time: Duration::ZERO, polished }
}

/// Solves the equality-constrained QP on the guessed active set by proximal
/// method-of-multiplier refinement, then corrects the guess a few times:
/// rows with a multiplier of the wrong sign are released and violated rows
/// are added.
#[allow(clippy::too_many_arguments)]
fn polish(
    qp: &QuadraticProgram,
    ws: &Workspace,
    s: &QpSettings,
    qs: &[f64],
    ls: &[f64],
    us: &[f64],
    x: &[f64],
    z: &[f64],
    y: &[f64],
    rounds: usize,
) -> Option<QpSolution> {
    let m = qp.m();
    // -1 lower bound active, +1 upper, 0 inactive
    let mut side = vec![0i8; m];
    for r in 0..m {
        if ws.eq[r] || z[r] - ls[r] < -y[r] {
            side[r] = -1;
        } else if us[r] - z[r] < y[r] {
            side[r] = 1;
        }
    }
    let mut xp = x.to_vec();
    let mut yp = y.to_vec();
    let mut ax = vec![0.0; m];
    for round in 0..rounds {
        refine(ws, s, qs, ls, us, &side, &mut xp, &mut yp)?;
        // degenerate active sets can leave tiny wrong-sign multipliers that
        // do not matter at the requested accuracy
        let sol = unscaled(qp, &xp, &yp, &ws.d, &ws.e, ws.c, 0, true);
        if sol.kkt.max_residual() <= s.tolerance {
            return Some(sol);
        }
        ws.as_.mul_vec(&xp, &mut ax);
        let ytol = 1e-9 * (1.0 + inf_norm(&yp));
        let mut changed = 0;
        for r in 0..m {
            if ws.eq[r] {
                continue;
            }
            let scale = 1.0 + ax[r].abs();
            match side[r] {
                -1 if yp[r] > ytol => side[r] = 0,
                1 if yp[r] < -ytol => side[r] = 0,
                0 if ax[r] < ls[r] - 1e-9 * scale => side[r] = -1,
                0 if ax[r] > us[r] + 1e-9 * scale => side[r] = 1,
                _ => continue,
            }
            changed += 1;
        }
        log::trace!("polish round {round}: {changed} active-set changes");
        if changed == 0 {
            return Some(sol);
        }
    }
    None
}

const POLISH_ROUNDS: usize = 8;

/// PMM iterations for min ½xᵀPx + qᵀx s.t. the rows in `side` at their bounds.
#[allow(clippy::too_many_arguments)]
fn refine(
    ws: &Workspace,
    s: &QpSettings,
    qs: &[f64],
    ls: &[f64],
    us: &[f64],
    side: &[i8],
    xp: &mut [f64],
    yp: &mut [f64],
) -> Option<()> {
    let (n, m) = (xp.len(), yp.len());
    let rows: Vec<usize> = (0..m).filter(|&r| side[r] != 0).collect();
    let target: Vec<f64> = (0..m).map(|r| if side[r] > 0 { us[r] } else { ls[r] }).collect();
    let delta = s.polish_delta;
    let mut weights = vec![0.0; m];
    for r in 0..m {
        if side[r] != 0 {
            weights[r] = 1.0 / delta;
        } else {
            yp[r] = 0.0;
        }
    }
    let mut mat = BandBorder::new(n, ws.bw, ws.border);
    fill_reduced(&mut mat, &ws.ps, &ws.as_, delta, &weights, Some(&rows));
    let f = mat.factor().ok()?;
    let mut rhs_m = vec![0.0; m];
    let mut rhs_n = vec![0.0; n];
    let mut ax = vec![0.0; m];
    for _ in 0..s.polish_refine_iters {
        for &r in &rows {
            rhs_m[r] = target[r] / delta - yp[r];
        }
        ws.as_.tr_mul_vec(&rhs_m, &mut rhs_n);
        for i in 0..n {
            rhs_n[i] += delta * xp[i] - qs[i];
        }
        f.solve(&mut rhs_n);
        let step = xp.iter().zip(&rhs_n).fold(0.0_f64, |a, (p, q)| a.max((p - q).abs()));
        xp.copy_from_slice(&rhs_n);
        ws.as_.mul_vec(xp, &mut ax);
        let mut viol = 0.0_f64;
        for &r in &rows {
            let g = ax[r] - target[r];
            yp[r] += g / delta;
            viol = viol.max(g.abs());
        }
        if step <= 1e-13 * (1.0 + inf_norm(xp)) && viol <= 1e-13 * (1.0 + inf_norm(&target)) {
            break;
        }
    }
    if xp.iter().chain(yp.iter()).any(|v| !v.is_finite()) {
        return None;
    }
    Some(())
}

#[allow(clippy::too_many_arguments)]
fn certificates(
    qp: &QuadraticProgram,
    ws: &Workspace,
    s: &QpSettings,
    x: &[f64],
    x_prev: &[f64],
    y: &[f64],
    y_prev: &[f64],
    d: &[f64],
    e: &[f64],
    c: f64,
    qs: &[f64],
) -> Option<QpStatus> {
    let (n, m) = (qp.n, qp.m());
    let eps = s.infeasibility_tol;
    // primal: δy with Aᵀδy ≈ 0 and uᵀδy₊ + lᵀδy₋ < 0
    let dy: Vec<f64> = (0..m).map(|r| (y[r] - y_prev[r]) * e[r] / c).collect();
    let ndy = inf_norm(&dy);
    if ndy > 1e-12 {
        let mut atdy = vec![0.0; n];
        qp.a.tr_mul_vec(&dy, &mut atdy);
        if inf_norm(&atdy) <= eps * ndy {
            let mut support = 0.0;
            let mut valid = true;
            for r in 0..m {
                if dy[r] > 0.0 {
                    if qp.u[r].is_finite() {
                        support += qp.u[r] * dy[r];
                    } else if dy[r] > eps * ndy {
                        valid = false;
                    }
                } else if dy[r] < 0.0 {
                    if qp.l[r].is_finite() {
                        support += qp.l[r] * dy[r];
                    } else if -dy[r] > eps * ndy {
                        valid = false;
                    }
                }
            }
            if valid && support < -eps * ndy {
                return Some(QpStatus::PrimalInfeasible);
            }
        }
    }
    // dual: δx with Pδx ≈ 0, qᵀδx < 0 and Aδx in the recession cone
    let dx: Vec<f64> = (0..n).map(|i| (x[i] - x_prev[i]) * d[i]).collect();
    let ndx = inf_norm(&dx);
    if ndx > 1e-12 {
        let qdx: f64 = (0..n).map(|i| qs[i] / (c * d[i]) * dx[i]).sum();
        if qdx < -eps * ndx {
            let mut pdx = vec![0.0; n];
            qp.p.mul_vec(&dx, &mut pdx);
            if inf_norm(&pdx) <= eps * ndx {
                let mut adx = vec![0.0; m];
                qp.a.mul_vec(&dx, &mut adx);
                let ok = (0..m).all(|r| {
                    (qp.u[r].is_infinite() || adx[r] <= eps * ndx) && (qp.l[r].is_infinite() || adx[r] >= -eps * ndx)
                });
                if ok {
                    return Some(QpStatus::DualInfeasible);
                }
            }
        }
    }
    let _ = ws;
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qp::QpBuilder;

    #[test]
    fn scalar_with_active_bound() {
        let mut b = QpBuilder::new(1);
        b.add_hessian(0, 0, 2.0);
        b.add_linear(0, -2.0);
        b.add_inequality(&[(0, 1.0)], f64::NEG_INFINITY, 0.0);
        let sol = solve_qp(&b.build().unwrap(), 1e-8, 5000).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!(sol.x[0].abs() < 1e-8 && (sol.y[0] - 2.0).abs() < 1e-6, "{sol:?}");
    }

    #[test]
    fn simplex_projection() {
        // min ½|x|² s.t. Σx = 1, x ≥ 0  →  x = 1/n
        let n = 7;
        let mut b = QpBuilder::new(n);
        for i in 0..n {
            b.add_hessian(i, i, 1.0);
            b.add_bounds(i, 0.0, f64::INFINITY);
        }
        b.add_equality(&(0..n).map(|i| (i, 1.0)).collect::<Vec<_>>(), 1.0);
        let sol = solve_qp(&b.build().unwrap(), 1e-9, 5000).unwrap();
        assert!(sol.is_optimal());
        for v in &sol.x {
            assert!((v - 1.0 / n as f64).abs() < 1e-8);
        }
        assert!((sol.objective() - 0.5 / n as f64).abs() < 1e-9);
    }

    #[test]
    fn infeasibility_detected() {
        let mut b = QpBuilder::new(2);
        b.add_hessian(0, 0, 1.0);
        b.add_hessian(1, 1, 1.0);
        b.add_inequality(&[(0, 1.0), (1, 1.0)], 2.0, f64::INFINITY);
        b.add_inequality(&[(0, 1.0), (1, 1.0)], f64::NEG_INFINITY, 1.0);
        let sol = solve_qp(&b.build().unwrap(), 1e-6, 5000).unwrap();
        assert_eq!(sol.status, QpStatus::PrimalInfeasible);

        let mut b = QpBuilder::new(2);
        b.add_hessian(0, 0, 1.0);
        b.add_linear(1, -1.0);
        b.add_bounds(0, -1.0, 1.0);
        let sol = solve_qp(&b.build().unwrap(), 1e-6, 5000).unwrap();
        assert_eq!(sol.status, QpStatus::DualInfeasible);
    }

    #[test]
    fn indefinite_rejected() {
        let mut b = QpBuilder::new(2);
        b.add_hessian(0, 0, 1.0);
        b.add_hessian(1, 1, -1.0);
        b.add_bounds(0, -1.0, 1.0);
        b.add_bounds(1, -1.0, 1.0);
        let sol = solve_qp(&b.build().unwrap(), 1e-6, 100).unwrap();
        assert_eq!(sol.status, QpStatus::NonConvex);
    }

    #[test]
    fn cache_reused_across_rhs_changes() {
        let mut solver = QpSolver::default();
        let mut last: Option<(Vec<f64>, Vec<f64>)> = None;
        for k in 0..4 {
            let mut b = QpBuilder::new(3);
            for i in 0..3 {
                b.add_hessian(i, i, 1.0 + i as f64);
                b.add_linear(i, -(k as f64) - i as f64);
            }
            b.add_inequality(&[(0, 1.0), (1, 1.0), (2, 1.0)], f64::NEG_INFINITY, 1.5);
            let qp = b.build().unwrap();
            let sol = match &last {
                Some((x, y)) => solver.solve(&qp, Some(WarmStart { x: x.as_slice(), y: y.as_slice() })).unwrap(),
                None => solver.solve(&qp, None).unwrap(),
            };
            assert!(sol.is_optimal(), "{k}: {sol:?}");
            last = Some((sol.x.clone(), sol.y.clone()));
        }
        assert!(solver.ws.is_some());
    }
}
