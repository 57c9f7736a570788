//! Reference plants used by the examples, the CLI configs and the tests.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::linalg::rotation;
use crate::lqg::PlantModel;

fn stack_h(left: &DMatrix<f64>, right: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(left.nrows(), left.ncols() + right.ncols());
    out.view_mut((0, 0), left.shape()).copy_from(left);
    out.view_mut((0, left.ncols()), right.shape()).copy_from(right);
    out
}

fn diag_sqrt(d: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(d.len(), d.iter().map(|v| v.sqrt())))
}

/// Second-order integrator (A = 0) with rotated cost and noise:
/// the reset system has `Q = N_{π/4}ᵀ diag(1,5) N_{π/4}` and
/// `R = N_{π/8}ᵀ diag(1,5) N_{π/8}`.
pub fn integrator_example() -> PlantModel {
    let zero = DMatrix::zeros(2, 2);
    let eye = DMatrix::identity(2, 2);
    let half = diag_sqrt(&[1.0, 5.0]);
    let b_w = stack_h(&(&half * rotation(PI / 8.0)).transpose(), &zero);
    let c_z = stack_h(&(&half * rotation(PI / 4.0)).transpose(), &zero).transpose();
    let d_yw = stack_h(&zero, &eye);
    PlantModel { a: zero.clone(), b_w, b_u: eye.clone(), c_z, d_zu: d_yw.transpose(), c_y: eye, d_yw }
}

/// Unstable saddle `A = [[0, 5], [5, 0]]` whose LQG design gives Q ≈ R ≈ I.
pub fn unstable_example() -> PlantModel {
    let b_w = DMatrix::from_row_slice(2, 4, &[2.84, 0.0, 0.0, 0.0, -2.77, 0.65, 0.0, 0.0]);
    let b_u = DMatrix::from_row_slice(2, 2, &[9.0, 0.0, 8.95, 0.95]);
    let d_zu = stack_h(&DMatrix::zeros(2, 2), &DMatrix::identity(2, 2)).transpose();
    PlantModel {
        a: DMatrix::from_row_slice(2, 2, &[0.0, 5.0, 5.0, 0.0]),
        c_z: b_w.transpose(),
        b_w,
        c_y: b_u.transpose(),
        b_u,
        d_yw: d_zu.transpose(),
        d_zu,
    }
}

/// Double (chain) integrator drift.
pub fn double_integrator_drift() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0])
}

/// Strongly cross-coupled drift `[[−1, 20], [20, −1]]`.
pub fn cross_coupled_drift() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[-1.0, 20.0, 20.0, -1.0])
}
