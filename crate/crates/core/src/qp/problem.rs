//! Convex QP data: min ½xᵀPx + qᵀx subject to l ≤ Ax ≤ u.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowKind {
    Equality,
    Inequality,
    Bound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProgram {
    pub n: usize,
    /// Full symmetric storage.
    pub p: CsrMatrix,
    pub q: Vec<f64>,
    pub a: CsrMatrix,
    pub l: Vec<f64>,
    pub u: Vec<f64>,
    pub kinds: Vec<RowKind>,
}

/// Incremental assembly of a QP.
#[derive(Debug, Clone, Default)]
pub struct QpBuilder {
    n: usize,
    p: Vec<(usize, usize, f64)>,
    q: Vec<f64>,
    a: Vec<(usize, usize, f64)>,
    l: Vec<f64>,
    u: Vec<f64>,
    kinds: Vec<RowKind>,
}

impl QpBuilder {
    pub fn new(n: usize) -> Self {
        QpBuilder { n, q: vec![0.0; n], ..Default::default() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_rows(&self) -> usize {
        self.l.len()
    }

    /// Adds `v` to H[i][j] and H[j][i] (once on the diagonal).
    pub fn add_hessian(&mut self, i: usize, j: usize, v: f64) {
        if v == 0.0 {
            return;
        }
        self.p.push((i, j, v));
        if i != j {
            self.p.push((j, i, v));
        }
    }

    /// Adds w·(cᵀx)² / 2 to the objective.
    pub fn add_square(&mut self, terms: &[(usize, f64)], w: f64) {
        for &(i, a) in terms {
            for &(j, b) in terms {
                if i <= j {
                    self.add_hessian(i, j, w * a * b);
                }
            }
        }
    }

    pub fn add_linear(&mut self, i: usize, v: f64) {
        self.q[i] += v;
    }

    pub fn add_row(&mut self, terms: &[(usize, f64)], lo: f64, hi: f64, kind: RowKind) -> usize {
        let r = self.l.len();
        for &(c, v) in terms {
            debug_assert!(c < self.n);
            if v != 0.0 {
                self.a.push((r, c, v));
            }
        }
        self.l.push(lo);
        self.u.push(hi);
        self.kinds.push(kind);
        r
    }

    pub fn add_equality(&mut self, terms: &[(usize, f64)], rhs: f64) -> usize {
        self.add_row(terms, rhs, rhs, RowKind::Equality)
    }

    pub fn add_inequality(&mut self, terms: &[(usize, f64)], lo: f64, hi: f64) -> usize {
        self.add_row(terms, lo, hi, RowKind::Inequality)
    }

    pub fn add_bounds(&mut self, i: usize, lo: f64, hi: f64) -> usize {
        self.add_row(&[(i, 1.0)], lo, hi, RowKind::Bound)
    }

    pub fn build(self) -> Result<QuadraticProgram> {
        let m = self.l.len();
        for r in 0..m {
            if !(self.l[r] <= self.u[r]) || self.l[r].is_nan() || self.u[r].is_nan() {
                return Err(Error::Qp(format!("row {r}: lower bound {} above upper {}", self.l[r], self.u[r])));
            }
        }
        if self.q.iter().chain(self.p.iter().map(|t| &t.2)).chain(self.a.iter().map(|t| &t.2)).any(|v| !v.is_finite()) {
            return Err(Error::Qp("non-finite problem data".into()));
        }
        Ok(QuadraticProgram {
            n: self.n,
            p: CsrMatrix::from_triplets(self.n, self.n, self.p),
            q: self.q,
            a: CsrMatrix::from_triplets(m, self.n, self.a),
            l: self.l,
            u: self.u,
            kinds: self.kinds,
        })
    }
}

impl QuadraticProgram {
    pub fn m(&self) -> usize {
        self.l.len()
    }

    /// Dense constructor: H, g, equality rows, inequality rows A_in x ≤ b_in
    /// and optional variable bounds.
    #[allow(clippy::too_many_arguments)]
    pub fn from_dense(
        h: &DMatrix<f64>,
        g: &DVector<f64>,
        a_eq: &DMatrix<f64>,
        b_eq: &DVector<f64>,
        a_in: &DMatrix<f64>,
        b_in: &DVector<f64>,
        bounds: Option<(&[f64], &[f64])>,
    ) -> Result<Self> {
        let n = g.len();
        if h.nrows() != n || h.ncols() != n {
            return Err(Error::Dimension(format!("H is {}x{}, expected {n}x{n}", h.nrows(), h.ncols())));
        }
        if (h - h.transpose()).amax() > 1e-12 * h.amax().max(1.0) {
            return Err(Error::Qp("H is not symmetric".into()));
        }
        if (a_eq.nrows() > 0 && a_eq.ncols() != n) || (a_in.nrows() > 0 && a_in.ncols() != n) {
            return Err(Error::Dimension("constraint matrices need n columns".into()));
        }
        if a_eq.nrows() != b_eq.len() || a_in.nrows() != b_in.len() {
            return Err(Error::Dimension("constraint rows and right-hand sides differ in length".into()));
        }
        let mut b = QpBuilder::new(n);
        for i in 0..n {
            for j in i..n {
                b.add_hessian(i, j, h[(i, j)]);
            }
            b.add_linear(i, g[i]);
        }
        let row = |m: &DMatrix<f64>, r: usize| -> Vec<(usize, f64)> { (0..n).map(|c| (c, m[(r, c)])).collect() };
        for r in 0..a_eq.nrows() {
            b.add_equality(&row(a_eq, r), b_eq[r]);
        }
        for r in 0..a_in.nrows() {
            b.add_inequality(&row(a_in, r), f64::NEG_INFINITY, b_in[r]);
        }
        if let Some((lo, hi)) = bounds {
            if lo.len() != n || hi.len() != n {
                return Err(Error::Dimension("bounds need n entries".into()));
            }
            for i in 0..n {
                if lo[i].is_finite() || hi[i].is_finite() {
                    b.add_bounds(i, lo[i], hi[i]);
                }
            }
        }
        b.build()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let mut px = vec![0.0; self.n];
        self.p.mul_vec(x, &mut px);
        px.iter().zip(x).map(|(a, b)| 0.5 * a * b).sum::<f64>() + self.q.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }

    /// KKT residuals of a primal-dual pair (y > 0 on active upper bounds).
    pub fn kkt(&self, x: &[f64], y: &[f64]) -> KktReport {
        let (n, m) = (self.n, self.m());
        let mut px = vec![0.0; n];
        self.p.mul_vec(x, &mut px);
        let mut aty = vec![0.0; n];
        self.a.tr_mul_vec(y, &mut aty);
        let mut ax = vec![0.0; m];
        self.a.mul_vec(x, &mut ax);
        let inf = |v: &[f64]| v.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        let stat: Vec<f64> = (0..n).map(|i| px[i] + self.q[i] + aty[i]).collect();
        let stat_scale = 1.0 + inf(&px).max(inf(&self.q)).max(inf(&aty));
        let mut primal = 0.0_f64;
        let mut dual = 0.0_f64;
        let mut comp = 0.0_f64;
        let mut dual_obj = 0.0;
        for r in 0..m {
            let (lo, hi, v) = (self.l[r], self.u[r], ax[r]);
            let scale = 1.0
                + v.abs().max(if lo.is_finite() { lo.abs() } else { 0.0 }).max(if hi.is_finite() {
                    hi.abs()
                } else {
                    0.0
                });
            primal = primal.max((lo - v).max(v - hi).max(0.0) / scale);
            let yr = y[r];
            if yr > 0.0 {
                if hi.is_finite() {
                    comp = comp.max(yr * (hi - v).abs() / scale);
                    dual_obj -= hi * yr;
                } else {
                    dual = dual.max(yr);
                }
            } else if yr < 0.0 {
                if lo.is_finite() {
                    comp = comp.max(-yr * (v - lo).abs() / scale);
                    dual_obj -= lo * yr;
                } else {
                    dual = dual.max(-yr);
                }
            }
        }
        let xpx: f64 = px.iter().zip(x).map(|(a, b)| a * b).sum();
        let primal_obj = 0.5 * xpx + self.q.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        dual_obj -= 0.5 * xpx;
        KktReport {
            stationarity: inf(&stat) / stat_scale,
            primal,
            dual: dual / (1.0 + inf(y)),
            complementarity: comp / (1.0 + inf(y)),
            duality_gap: (primal_obj - dual_obj).abs() / (1.0 + primal_obj.abs()),
            primal_objective: primal_obj,
        }
    }
}

/// Normalized KKT residuals: each is divided by one plus the magnitude of
/// the terms it balances.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KktReport {
    pub stationarity: f64,
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
    pub duality_gap: f64,
    pub primal_objective: f64,
}

impl KktReport {
    pub fn max_residual(&self) -> f64 {
        self.stationarity.max(self.primal).max(self.dual).max(self.complementarity)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_and_kkt_by_hand() {
        // min (x-1)² = x² - 2x + 1  s.t. x ≤ 0  →  x = 0, y = 2
        let mut b = QpBuilder::new(1);
        b.add_hessian(0, 0, 2.0);
        b.add_linear(0, -2.0);
        b.add_inequality(&[(0, 1.0)], f64::NEG_INFINITY, 0.0);
        let qp = b.build().unwrap();
        let k = qp.kkt(&[0.0], &[2.0]);
        assert!(k.max_residual() < 1e-15 && k.duality_gap < 1e-15);
        let bad = qp.kkt(&[0.0], &[-2.0]);
        assert!(bad.dual > 0.5);
    }

    #[test]
    fn inconsistent_bounds_rejected() {
        let mut b = QpBuilder::new(1);
        b.add_inequality(&[(0, 1.0)], 1.0, 0.0);
        assert!(b.build().is_err());
    }
}
