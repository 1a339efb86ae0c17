//! Compressed sparse row storage, just enough for the QP solver.

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), data: Vec::new() }
    }

    /// Builds from (row, col, value) triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, mut trip: Vec<(usize, usize, f64)>) -> Self {
        trip.sort_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0; nrows + 1];
        let mut indices = Vec::with_capacity(trip.len());
        let mut data: Vec<f64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        let mut rows = Vec::with_capacity(trip.len());
        for (r, c, v) in trip {
            debug_assert!(r < nrows && c < ncols);
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
                rows.push(r);
                last = Some((r, c));
            }
        }
        let keep: Vec<bool> = data.iter().map(|v| *v != 0.0).collect();
        let mut k = 0;
        let (mut ni, mut nd) = (Vec::with_capacity(data.len()), Vec::with_capacity(data.len()));
        for (idx, &r) in rows.iter().enumerate() {
            if keep[idx] {
                indptr[r + 1] += 1;
                ni.push(indices[idx]);
                nd.push(data[idx]);
                k += 1;
            }
        }
        debug_assert_eq!(k, ni.len());
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix { nrows, ncols, indptr, indices: ni, data: nd }
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.indptr[r], self.indptr[r + 1]);
        (&self.indices[s..e], &self.data[s..e])
    }

    /// y = M x
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.nrows) {
            let (idx, val) = self.row(r);
            *yr = idx.iter().zip(val).map(|(&c, &v)| v * x[c]).sum();
        }
    }

    /// y = Mᵀ x
    pub fn tr_mul_vec(&self, x: &[f64], y: &mut [f64]) {
        y[..self.ncols].fill(0.0);
        for (r, &xr) in x.iter().enumerate().take(self.nrows) {
            if xr == 0.0 {
                continue;
            }
            let (idx, val) = self.row(r);
            for (&c, &v) in idx.iter().zip(val) {
                y[c] += v * xr;
            }
        }
    }

    /// Row-wise ∞-norms.
    pub fn row_norms_inf(&self) -> Vec<f64> {
        (0..self.nrows).map(|r| self.row(r).1.iter().fold(0.0_f64, |m, v| m.max(v.abs()))).collect()
    }

    /// Column-wise ∞-norms.
    pub fn col_norms_inf(&self) -> Vec<f64> {
        let mut n = vec![0.0_f64; self.ncols];
        for (c, v) in self.indices.iter().zip(&self.data) {
            n[*c] = n[*c].max(v.abs());
        }
        n
    }

    /// diag(left) · M · diag(right)
    pub fn scale(&mut self, left: &[f64], right: &[f64]) {
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                self.data[k] *= left[r] * right[self.indices[k]];
            }
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, row) in d.iter_mut().enumerate() {
            let (idx, val) = self.row(r);
            for (&c, &v) in idx.iter().zip(val) {
                row[c] = v;
            }
        }
        d
    }
}
