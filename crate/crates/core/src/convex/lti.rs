//! Affine LTI prediction model in energy coordinates and its exact
//! zero-order-hold discretization.

use nalgebra::{DMatrix, DVector};

use super::thrust::ThrustLinearization;
use super::{ENERGY_UNIT, FORCE_UNIT, POWER_UNIT};
use crate::aero::TurbineParams;
use crate::error::{Error, Result};
use crate::tower::ModalSystem;

/// ẋ = A x + B u + c with x = [K, x_m, v_m] and u = [P_r, P_g], controller units.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DVector<f64>,
    pub n_modes: usize,
}

/// x⁺ = A_d x + B_d u + c_d over one sampling period.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModel {
    pub ad: DMatrix<f64>,
    pub bd: DMatrix<f64>,
    pub cd: DVector<f64>,
    pub ts: f64,
    pub n_modes: usize,
}

impl LtiModel {
    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn derivative(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u + &self.c
    }
}

impl DiscreteModel {
    pub fn n_states(&self) -> usize {
        self.ad.nrows()
    }

    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.ad * x + &self.bd * u + &self.cd
    }
}

/// Builds the model: K̇ = P_r − P_g/η and
/// v̇_m = M⁻¹[ΦᵀB_o(ζ₁P_r + ζ₂K + ζ₃) − D v_m − K_m x_m].
pub fn assemble_lti(system: &ModalSystem, lin: &ThrustLinearization, p: &TurbineParams) -> LtiModel {
    let nm = system.n_modes();
    let n = 2 * nm + 1;
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, 2);
    let mut c = DVector::zeros(n);
    b[(0, 0)] = 1.0;
    b[(0, 1)] = -1.0 / p.generator_efficiency;
    // thrust in force units from scaled power / energy
    let z1 = lin.zeta1 * POWER_UNIT / FORCE_UNIT;
    let z2 = lin.zeta2 * ENERGY_UNIT / FORCE_UNIT;
    let z3 = lin.zeta3 / FORCE_UNIT;
    for i in 0..nm {
        let (xi, vi) = (1 + i, 1 + nm + i);
        let gain = system.input[i] * FORCE_UNIT;
        a[(xi, vi)] = 1.0;
        a[(vi, xi)] = -system.stiffness[i] / system.mass[i];
        a[(vi, vi)] = -system.damping[i] / system.mass[i];
        a[(vi, 0)] = gain * z2;
        b[(vi, 0)] = gain * z1;
        c[vi] = gain * z3;
    }
    LtiModel { a, b, c, n_modes: nm }
}

/// Exact ZOH via the exponential of the augmented matrix [[A, B, c], [0, 0, 0]].
pub fn discretize(model: &LtiModel, ts: f64) -> Result<DiscreteModel> {
    if !(ts > 0.0) {
        return Err(Error::Domain(format!("sampling time must be positive, got {ts}")));
    }
    let n = model.n_states();
    let m = model.b.ncols();
    let mut aug = DMatrix::zeros(n + m + 1, n + m + 1);
    aug.view_mut((0, 0), (n, n)).copy_from(&(&model.a * ts));
    aug.view_mut((0, n), (n, m)).copy_from(&(&model.b * ts));
    aug.view_mut((0, n + m), (n, 1)).copy_from(&(&model.c * ts));
    let e = aug.exp();
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix exponential overflowed".into()));
    }
    Ok(DiscreteModel {
        ad: e.view((0, 0), (n, n)).into_owned(),
        bd: e.view((0, n), (n, m)).into_owned(),
        cd: e.view((0, n + m), (n, 1)).column(0).into_owned(),
        ts,
        n_modes: model.n_modes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tower::TowerParams;

    fn lin(z1: f64, z2: f64, z3: f64) -> ThrustLinearization {
        ThrustLinearization { zeta1: z1, zeta2: z2, zeta3: z3, valid_wind: 10.0, fit_residual: 0.0 }
    }

    #[test]
    fn energy_row_structure() {
        let sys = TowerParams::default().build().unwrap();
        let p = TurbineParams::nrel_5mw();
        let m = assemble_lti(&sys, &lin(0.05, -0.01, 2e5), &p);
        assert_eq!(m.n_states(), 5);
        assert!(m.a.row(0).iter().all(|v| *v == 0.0));
        assert_eq!(m.b[(0, 0)], 1.0);
        assert_eq!(m.b[(0, 1)], -1.0 / 0.944);

        let free = assemble_lti(&sys, &lin(0.0, 0.0, 0.0), &p);
        assert!(free.a.column(0).iter().all(|v| *v == 0.0));
        assert!(free.b.view((1, 0), (4, 2)).iter().all(|v| *v == 0.0));
        assert!(free.c.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn tower_block_eigenvalues() {
        let sys = TowerParams::default().build().unwrap();
        let m = assemble_lti(&sys, &lin(0.0, 0.0, 0.0), &TurbineParams::nrel_5mw());
        let block = m.a.view((1, 1), (4, 4)).into_owned();
        let eig = block.complex_eigenvalues();
        for i in 0..2 {
            let w = 2.0 * std::f64::consts::PI * sys.frequencies[i];
            let z = sys.damping_ratios[i];
            let (re, im) = (-z * w, w * (1.0 - z * z).sqrt());
            let hit = eig.iter().any(|e| (e.re - re).abs() < 1e-9 * w && (e.im.abs() - im).abs() < 1e-9 * w);
            assert!(hit, "mode {i}: {eig:?}");
        }
    }

    #[test]
    fn discretization_closed_forms() {
        let zero = LtiModel {
            a: DMatrix::zeros(2, 2),
            b: DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]),
            c: DVector::from_vec(vec![0.5, -1.0]),
            n_modes: 0,
        };
        let d = discretize(&zero, 0.2).unwrap();
        assert!((d.ad.clone() - DMatrix::identity(2, 2)).abs().max() < 1e-15);
        assert!((d.bd.clone() - &zero.b * 0.2).abs().max() < 1e-15);
        assert!((d.cd.clone() - &zero.c * 0.2).abs().max() < 1e-15);

        let scalar = LtiModel {
            a: DMatrix::from_element(1, 1, -0.7),
            b: DMatrix::from_element(1, 1, 2.0),
            c: DVector::from_element(1, 0.0),
            n_modes: 0,
        };
        let d = discretize(&scalar, 0.3).unwrap();
        assert!((d.ad[(0, 0)] - (-0.21f64).exp()).abs() < 1e-14);
        assert!((d.bd[(0, 0)] - 2.0 * (1.0 - (-0.21f64).exp()) / 0.7).abs() < 1e-14);
    }

    #[test]
    fn semigroup_property() {
        let sys = TowerParams::default().build().unwrap();
        let m = assemble_lti(&sys, &lin(0.03, -0.004, 1e5), &TurbineParams::nrel_5mw());
        let full = discretize(&m, 0.2).unwrap();
        let half = discretize(&m, 0.1).unwrap();
        let sq = &half.ad * &half.ad;
        assert!((sq - &full.ad).abs().max() < 1e-10);
        // two half steps equal one full step for the input and offset too
        let bd2 = &half.ad * &half.bd + &half.bd;
        assert!((bd2 - &full.bd).abs().max() < 1e-10 * full.bd.abs().max());
        assert!(discretize(&m, 0.0).is_err());
    }
}
