//! Symmetric positive definite matrices that are banded apart from a few
//! dense trailing rows and columns, with a Cholesky factorization that
//! exploits that shape.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandBorder {
    n: usize,
    nb: usize,
    bw: usize,
    /// Lower band of the leading `nb` rows: entry (i, j) at `i*(bw+1) + j + bw - i`.
    band: Vec<f64>,
    /// Trailing rows, stored in full length `n`.
    border: Vec<f64>,
}

/// Chooses the band width and border size minimizing factorization work for
/// a lower-triangle sparsity pattern.
pub fn plan(n: usize, pattern: &[(usize, usize)]) -> (usize, usize) {
    let max_border = n.min(16);
    let mut best = (usize::MAX, 0, 0);
    for k in 0..=max_border {
        let nb = n - k;
        let bw = pattern.iter().filter(|(i, _)| *i < nb).map(|(i, j)| i - j).max().unwrap_or(0);
        let cost = nb * (bw + 1) * (bw + 1) + k * nb * (bw + 1) + k * k * k;
        if cost < best.0 {
            best = (cost, bw, k);
        }
    }
    (best.1, best.2)
}

impl BandBorder {
    pub fn new(n: usize, bw: usize, border: usize) -> Self {
        let border = border.min(n);
        let nb = n - border;
        let bw = bw.min(nb.saturating_sub(1));
        BandBorder { n, nb, bw, band: vec![0.0; nb * (bw + 1)], border: vec![0.0; border * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn clear(&mut self) {
        self.band.fill(0.0);
        self.border.fill(0.0);
    }

    /// Adds `v` at (i, j) and, implicitly, at (j, i).
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i >= self.nb {
            self.border[(i - self.nb) * self.n + j] += v;
        } else {
            debug_assert!(i - j <= self.bw, "entry ({i}, {j}) outside band {}", self.bw);
            self.band[i * (self.bw + 1) + j + self.bw - i] += v;
        }
    }

    pub fn factor(&self) -> Result<BandFactor> {
        let (nb, bw, n) = (self.nb, self.bw, self.n);
        let w = bw + 1;
        let mut l = self.band.clone();
        for i in 0..nb {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let t0 = j0.max(j.saturating_sub(bw));
                let mut s = l[i * w + j + bw - i];
                for t in t0..j {
                    s -= l[i * w + t + bw - i] * l[j * w + t + bw - j];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::Qp(format!("matrix not positive definite at pivot {i} ({s})")));
                    }
                    l[i * w + bw] = s.sqrt();
                } else {
                    l[i * w + j + bw - i] = s / l[j * w + bw];
                }
            }
        }
        let k = n - nb;
        let mut f = BandFactor { n, nb, bw, l, wcols: vec![0.0; k * nb], schur: vec![0.0; k * k] };
        for r in 0..k {
            let mut col = self.border[r * n..r * n + nb].to_vec();
            f.forward(&mut col);
            f.wcols[r * nb..(r + 1) * nb].copy_from_slice(&col);
        }
        // S = D − WᵀW, then dense Cholesky in place (lower)
        for r in 0..k {
            for c in 0..=r {
                let d = self.border[r * n + nb + c];
                let dot: f64 = (0..nb).map(|t| f.wcols[r * nb + t] * f.wcols[c * nb + t]).sum();
                f.schur[r * k + c] = d - dot;
            }
        }
        for r in 0..k {
            for c in 0..=r {
                let mut s = f.schur[r * k + c];
                for t in 0..c {
                    s -= f.schur[r * k + t] * f.schur[c * k + t];
                }
                if r == c {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::Qp(format!("matrix not positive definite at border pivot {r} ({s})")));
                    }
                    f.schur[r * k + r] = s.sqrt();
                } else {
                    f.schur[r * k + c] = s / f.schur[c * k + c];
                }
            }
        }
        Ok(f)
    }
}

#[derive(Debug, Clone)]
pub struct BandFactor {
    n: usize,
    nb: usize,
    bw: usize,
    l: Vec<f64>,
    wcols: Vec<f64>,
    schur: Vec<f64>,
}

impl BandFactor {
    #[inline]
    fn forward(&self, b: &mut [f64]) {
        let (bw, w) = (self.bw, self.bw + 1);
        for i in 0..self.nb {
            let row = &self.l[i * w..(i + 1) * w];
            let t0 = i.saturating_sub(bw);
            let mut s = b[i];
            for t in t0..i {
                s -= row[t + bw - i] * b[t];
            }
            b[i] = s / row[bw];
        }
    }

    #[inline]
    fn backward(&self, b: &mut [f64]) {
        let (bw, w) = (self.bw, self.bw + 1);
        for i in (0..self.nb).rev() {
            let xi = b[i] / self.l[i * w + bw];
            b[i] = xi;
            let t0 = i.saturating_sub(bw);
            for t in t0..i {
                b[t] -= self.l[i * w + t + bw - i] * xi;
            }
        }
    }

    /// Solves M x = b in place.
    pub fn solve(&self, b: &mut [f64]) {
        let (nb, k) = (self.nb, self.n - self.nb);
        let (b1, b2) = b.split_at_mut(nb);
        self.forward(b1);
        if k == 0 {
            self.backward(b1);
            return;
        }
        for r in 0..k {
            let w = &self.wcols[r * nb..(r + 1) * nb];
            b2[r] -= w.iter().zip(b1.iter()).map(|(a, c)| a * c).sum::<f64>();
        }
        for r in 0..k {
            let mut s = b2[r];
            for t in 0..r {
                s -= self.schur[r * k + t] * b2[t];
            }
            b2[r] = s / self.schur[r * k + r];
        }
        for r in (0..k).rev() {
            let mut s = b2[r];
            for t in r + 1..k {
                s -= self.schur[t * k + r] * b2[t];
            }
            b2[r] = s / self.schur[r * k + r];
        }
        for r in 0..k {
            let w = &self.wcols[r * nb..(r + 1) * nb];
            let xr = b2[r];
            for (bi, wi) in b1.iter_mut().zip(w) {
                *bi -= wi * xr;
            }
        }
        // the forward solve of b1 − W x2 is what we need to back-substitute
        self.backward(b1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn check(n: usize, bw: usize, k: usize, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dense = DMatrix::<f64>::zeros(n, n);
        let nb = n - k;
        for i in 0..n {
            for j in 0..=i {
                let inside = i >= nb || i - j <= bw;
                if inside {
                    let v: f64 = rng.random_range(-1.0..1.0);
                    dense[(i, j)] = v;
                    dense[(j, i)] = v;
                }
            }
        }
        for i in 0..n {
            dense[(i, i)] += 2.0 * n as f64;
        }
        let mut m = BandBorder::new(n, bw, k);
        for i in 0..n {
            for j in 0..=i {
                if dense[(i, j)] != 0.0 {
                    m.add(i, j, dense[(i, j)]);
                }
            }
        }
        let f = m.factor().unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = b.clone();
        f.solve(&mut x);
        let r = &dense * DVector::from_vec(x) - DVector::from_vec(b);
        assert!(r.amax() < 1e-10, "n={n} bw={bw} k={k}: {}", r.amax());
    }

    #[test]
    fn solves_match_dense() {
        check(1, 0, 0, 1);
        check(8, 7, 0, 2);
        check(8, 0, 8, 3);
        check(30, 3, 2, 4);
        check(50, 6, 1, 5);
        check(12, 2, 0, 6);
    }

    #[test]
    fn indefinite_rejected() {
        let mut m = BandBorder::new(2, 1, 0);
        m.add(0, 0, 1.0);
        m.add(1, 1, 1.0);
        m.add(1, 0, 2.0);
        assert!(m.factor().is_err());
    }

    #[test]
    fn planner_picks_border_for_arrow() {
        let n = 100;
        let mut pat: Vec<(usize, usize)> = (0..n - 1).flat_map(|i| [(i, i), (i + 1, i)]).collect();
        pat.extend((0..n).map(|j| (n - 1, j)));
        let (bw, k) = plan(n, &pat);
        assert_eq!((bw, k), (1, 1));
    }
}
