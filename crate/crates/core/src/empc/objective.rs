//! Velocity penalty and objective weights of the economic cost.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// S W Sᵀ, symmetrized. `s` is N_m × N_l, `w` holds one weight per column.
pub fn velocity_weight(s: &DMatrix<f64>, w: &[f64]) -> Result<DMatrix<f64>> {
    if w.len() != s.ncols() {
        return Err(Error::Dimension(format!("{} location weights for {} locations", w.len(), s.ncols())));
    }
    if w.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidParameter("location weights must be nonnegative".into()));
    }
    let q = s * DMatrix::from_diagonal(&DVector::from_column_slice(w)) * s.transpose();
    Ok((&q + q.transpose()) * 0.5)
}

/// O_v = v_mᵀ S W Sᵀ v_m.
pub fn velocity_objective(v_m: &[f64], s: &DMatrix<f64>, w: &[f64]) -> Result<f64> {
    let q = velocity_weight(s, w)?;
    if v_m.len() != q.nrows() {
        return Err(Error::Dimension(format!("{} modal velocities for {} modes", v_m.len(), q.nrows())));
    }
    let v = DVector::from_column_slice(v_m);
    Ok((v.transpose() * q * v)[(0, 0)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_expansion() {
        let s = DMatrix::from_row_slice(1, 2, &[1.0, 0.7]);
        let w = [100.0, 20.0];
        assert_eq!(velocity_objective(&[0.0], &s, &w).unwrap(), 0.0);
        let v: f64 = 0.3;
        let o = velocity_objective(&[v], &s, &w).unwrap();
        assert!((o - 109.8 * v * v).abs() < 1e-12);
        assert_eq!(velocity_objective(&[v], &s, &[0.0, 0.0]).unwrap(), 0.0);
        assert!(velocity_objective(&[v], &s, &[1.0]).is_err());
    }

    #[test]
    fn weight_is_symmetric_psd() {
        let s = DMatrix::from_row_slice(2, 3, &[1.0, 0.6, 0.0, 1.0, -0.3, 0.0]);
        let q = velocity_weight(&s, &[100.0, 20.0, 0.0]).unwrap();
        assert_eq!(q, q.transpose());
        assert!(q.symmetric_eigenvalues().iter().all(|e| *e >= -1e-12));
    }
}
