//! Continuous-time LQG design and the reset-system reduction.
//!
//! With the LQG-optimal sampled-data structure, the closed-loop cost for any
//! sampling sequence splits into the continuous-time optimum γ₀ plus the
//! stationary cost of a linear reset system driven by the Kalman–Bucy
//! innovations. This module computes both halves of that identity.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::matrix_rows;
use crate::linalg::{
    complex_full_rank, eigenvalues, is_hurwitz, lyapunov, sym_eig_range, symmetrize, to_complex,
};
use crate::riccati::solve_care;

/// Continuous-time LTI plant
///
/// ```text
/// ẋ = A x + B_w w + B_u u
/// z = C_z x + D_zu u
/// y = C_y x + D_yw w
/// ```
/// with `w` unit-intensity white noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantModel {
    #[serde(rename = "A", with = "matrix_rows")]
    pub a: DMatrix<f64>,
    #[serde(rename = "B_w", with = "matrix_rows")]
    pub b_w: DMatrix<f64>,
    #[serde(rename = "B_u", with = "matrix_rows")]
    pub b_u: DMatrix<f64>,
    #[serde(rename = "C_z", with = "matrix_rows")]
    pub c_z: DMatrix<f64>,
    #[serde(rename = "D_zu", with = "matrix_rows")]
    pub d_zu: DMatrix<f64>,
    #[serde(rename = "C_y", with = "matrix_rows")]
    pub c_y: DMatrix<f64>,
    #[serde(rename = "D_yw", with = "matrix_rows")]
    pub d_yw: DMatrix<f64>,
}

/// Dimensions `(n, m_w, m_u, p_z, p_y)` of a plant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantDims {
    pub n: usize,
    pub m_w: usize,
    pub m_u: usize,
    pub p_z: usize,
    pub p_y: usize,
}

impl PlantModel {
    pub fn dims(&self) -> PlantDims {
        PlantDims {
            n: self.a.nrows(),
            m_w: self.b_w.ncols(),
            m_u: self.b_u.ncols(),
            p_z: self.c_z.nrows(),
            p_y: self.c_y.nrows(),
        }
    }

    /// `D_zuᵀ D_zu`
    pub fn control_weight(&self) -> DMatrix<f64> {
        symmetrize(&(self.d_zu.transpose() * &self.d_zu))
    }

    /// `D_yw D_ywᵀ`
    pub fn measurement_weight(&self) -> DMatrix<f64> {
        symmetrize(&(&self.d_yw * self.d_yw.transpose()))
    }

    fn dimension_violations(&self) -> Vec<String> {
        let d = self.dims();
        let mut v = Vec::new();
        let mut check = |name: &str, m: &DMatrix<f64>, r: usize, c: usize| {
            if m.shape() != (r, c) {
                v.push(format!("{name} has shape {}×{}, expected {r}×{c}", m.nrows(), m.ncols()));
            }
        };
        check("A", &self.a, d.n, d.n);
        check("B_w", &self.b_w, d.n, d.m_w);
        check("B_u", &self.b_u, d.n, d.m_u);
        check("C_z", &self.c_z, d.p_z, d.n);
        check("D_zu", &self.d_zu, d.p_z, d.m_u);
        check("C_y", &self.c_y, d.p_y, d.n);
        check("D_yw", &self.d_yw, d.p_y, d.m_w);
        if d.n == 0 {
            v.push("state dimension is zero".into());
        }
        v
    }
}

/// Checks the standard output-feedback H2 assumptions. An empty list means
/// the plant is valid.
pub fn validate_plant(plant: &PlantModel) -> Vec<String> {
    let dims = plant.dimension_violations();
    if !dims.is_empty() {
        return dims;
    }
    let mut out = Vec::new();
    let n = plant.a.nrows();

    if !weight_invertible(&plant.control_weight()) {
        out.push("D_zuᵀD_zu singular".to_string());
    }
    if !weight_invertible(&plant.measurement_weight()) {
        out.push("D_ywD_ywᵀ singular".to_string());
    }

    // Hautus tests at eigenvalues with Re λ ≥ 0
    let scale = plant.a.norm() + plant.b_u.norm() + plant.c_y.norm();
    let ac = to_complex(&plant.a);
    let unstable: Vec<Complex<f64>> =
        eigenvalues(&plant.a).into_iter().filter(|l| l.re >= -1e-12 * (1.0 + plant.a.norm())).collect();
    let bu = to_complex(&plant.b_u);
    let cy = to_complex(&plant.c_y);
    let mut stabilizable = true;
    let mut detectable = true;
    for l in &unstable {
        let shifted = &ac - DMatrix::<Complex<f64>>::identity(n, n) * *l;
        let mut ctrl = DMatrix::<Complex<f64>>::zeros(n, n + bu.ncols());
        ctrl.view_mut((0, 0), (n, n)).copy_from(&shifted);
        ctrl.view_mut((0, n), (n, bu.ncols())).copy_from(&bu);
        if !complex_full_rank(&ctrl, scale) {
            stabilizable = false;
        }
        let mut obs = DMatrix::<Complex<f64>>::zeros(n + cy.nrows(), n);
        obs.view_mut((0, 0), (n, n)).copy_from(&shifted);
        obs.view_mut((n, 0), (cy.nrows(), n)).copy_from(&cy);
        if !complex_full_rank(&obs, scale) {
            detectable = false;
        }
    }
    if !stabilizable {
        out.push("(A,B_u) not stabilizable".to_string());
    }
    if !detectable {
        out.push("(C_y,A) not detectable".to_string());
    }
    out
}

fn weight_invertible(w: &DMatrix<f64>) -> bool {
    if w.is_empty() {
        return false;
    }
    let (lo, hi) = sym_eig_range(w);
    lo > 1e-12 * hi.max(1.0)
}

/// Riccati solutions, gains and minimum cost of the continuous-time LQG
/// controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LqgDesign {
    #[serde(rename = "X", with = "matrix_rows")]
    pub x: DMatrix<f64>,
    #[serde(rename = "Y", with = "matrix_rows")]
    pub y: DMatrix<f64>,
    #[serde(rename = "F", with = "matrix_rows")]
    pub f: DMatrix<f64>,
    #[serde(rename = "L", with = "matrix_rows")]
    pub l: DMatrix<f64>,
    pub gamma0: f64,
}

/// Solves the control and filter Riccati equations (cross terms handled by
/// completing the square) and evaluates γ₀.
pub fn design_lqg(plant: &PlantModel) -> Result<LqgDesign> {
    let violations = validate_plant(plant);
    if !violations.is_empty() {
        return Err(Error::InvalidPlant(violations));
    }
    let a = &plant.a;
    let ru = plant.control_weight();
    let rw = plant.measurement_weight();
    let ru_inv =
        ru.clone().try_inverse().ok_or_else(|| Error::InvalidPlant(vec!["D_zuᵀD_zu singular".into()]))?;
    let rw_inv =
        rw.clone().try_inverse().ok_or_else(|| Error::InvalidPlant(vec!["D_ywD_ywᵀ singular".into()]))?;

    // control: Ā = A − B_u Ru⁻¹ D_zuᵀ C_z, S = B_u Ru⁻¹ B_uᵀ, Qc = C_zᵀ(I − D Ru⁻¹ Dᵀ)C_z
    let p_z = plant.c_z.nrows();
    let a_c = a - &plant.b_u * &ru_inv * plant.d_zu.transpose() * &plant.c_z;
    let s_c = symmetrize(&(&plant.b_u * &ru_inv * plant.b_u.transpose()));
    let proj_z = DMatrix::identity(p_z, p_z) - &plant.d_zu * &ru_inv * plant.d_zu.transpose();
    let q_c = symmetrize(&(plant.c_z.transpose() * proj_z * &plant.c_z));
    let x = symmetrize(&solve_care(&a_c, &s_c, &q_c)?);

    // filter (dual): Â = A − B_w D_ywᵀ Rw⁻¹ C_y, solved as a CARE in Âᵀ
    let m_w = plant.b_w.ncols();
    let a_f = a - &plant.b_w * plant.d_yw.transpose() * &rw_inv * &plant.c_y;
    let s_f = symmetrize(&(plant.c_y.transpose() * &rw_inv * &plant.c_y));
    let proj_w = DMatrix::identity(m_w, m_w) - plant.d_yw.transpose() * &rw_inv * &plant.d_yw;
    let q_f = symmetrize(&(&plant.b_w * proj_w * plant.b_w.transpose()));
    let y = symmetrize(&solve_care(&a_f.transpose(), &s_f, &q_f)?);

    let f = -&ru_inv * (plant.b_u.transpose() * &x + plant.d_zu.transpose() * &plant.c_z);
    let l = -(&y * plant.c_y.transpose() + &plant.b_w * plant.d_yw.transpose()) * &rw_inv;

    if !is_hurwitz(&(a + &plant.b_u * &f)) {
        return Err(Error::NoStabilizingSolution("A + B_uF is not Hurwitz".into()));
    }
    if !is_hurwitz(&(a + &l * &plant.c_y)) {
        return Err(Error::NoStabilizingSolution("A + LC_y is not Hurwitz".into()));
    }

    let gamma0 = (plant.b_w.transpose() * &x * &plant.b_w).trace()
        + (&plant.c_z * &y * plant.c_z.transpose()).trace()
        + (&x * a * &y + &y * a.transpose() * &x).trace();

    Ok(LqgDesign { x, y, f, l, gamma0 })
}

/// The performance-degradation system `ẋ = A x + ε`, reset to zero at every
/// sample, with stage cost `xᵀQx` and innovation intensity `R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResetSystem {
    #[serde(rename = "A", with = "matrix_rows")]
    pub a: DMatrix<f64>,
    #[serde(rename = "Q", with = "matrix_rows")]
    pub q: DMatrix<f64>,
    #[serde(rename = "R", with = "matrix_rows")]
    pub r: DMatrix<f64>,
}

impl ResetSystem {
    pub fn new(a: DMatrix<f64>, q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || q.shape() != (n, n) || r.shape() != (n, n) {
            return Err(Error::Dimension("reset system: A, Q, R must be n×n".into()));
        }
        Ok(Self { a, q: symmetrize(&q), r: symmetrize(&r) })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Whether the drift is numerically zero, i.e. the integrator case:
    /// ‖A‖ ≤ 1e-12·(1 + ‖Q‖ + ‖R‖).
    pub fn is_integrator(&self) -> bool {
        self.a.norm() <= 1e-12 * (1.0 + self.q.norm() + self.r.norm())
    }
}

/// `Q = Fᵀ(D_zuᵀD_zu)F`, `R = L(D_ywD_ywᵀ)Lᵀ`, drift copied from the plant.
pub fn build_reset_system(plant: &PlantModel, design: &LqgDesign) -> ResetSystem {
    let q = symmetrize(&(design.f.transpose() * plant.control_weight() * &design.f));
    let r = symmetrize(&(&design.l * plant.measurement_weight() * design.l.transpose()));
    ResetSystem { a: plant.a.clone(), q, r }
}

/// Stationary cost `Tr(QΣ)` of the reset system when it is never reset,
/// with `AΣ + ΣAᵀ + R = 0`. Only defined for Hurwitz `A`.
pub fn h2_cost_lyapunov(sys: &ResetSystem) -> Result<f64> {
    if !is_hurwitz(&sys.a) {
        return Err(Error::NotHurwitz { max_real: crate::linalg::max_real_eigenvalue(&sys.a) });
    }
    let sigma = lyapunov(&sys.a, &sys.r)?;
    Ok((&sys.q * sigma).trace())
}

/// Squared H2 norm of the LQG closed loop from `w` to `z`, computed from the
/// closed-loop Lyapunov equation. Independent of the γ₀ trace formula.
pub fn closed_loop_h2_squared(plant: &PlantModel, design: &LqgDesign) -> Result<f64> {
    let n = plant.a.nrows();
    let (f, l) = (&design.f, &design.l);
    let mut acl = DMatrix::zeros(2 * n, 2 * n);
    acl.view_mut((0, 0), (n, n)).copy_from(&plant.a);
    acl.view_mut((0, n), (n, n)).copy_from(&(&plant.b_u * f));
    acl.view_mut((n, 0), (n, n)).copy_from(&(-(l * &plant.c_y)));
    acl.view_mut((n, n), (n, n)).copy_from(&(&plant.a + &plant.b_u * f + l * &plant.c_y));
    let m_w = plant.b_w.ncols();
    let mut bcl = DMatrix::zeros(2 * n, m_w);
    bcl.view_mut((0, 0), (n, m_w)).copy_from(&plant.b_w);
    bcl.view_mut((n, 0), (n, m_w)).copy_from(&(-(l * &plant.d_yw)));
    let p_z = plant.c_z.nrows();
    let mut ccl = DMatrix::zeros(p_z, 2 * n);
    ccl.view_mut((0, 0), (p_z, n)).copy_from(&plant.c_z);
    ccl.view_mut((0, n), (p_z, n)).copy_from(&(&plant.d_zu * f));
    if !is_hurwitz(&acl) {
        return Err(Error::NotHurwitz { max_real: crate::linalg::max_real_eigenvalue(&acl) });
    }
    let p = lyapunov(&acl, &(&bcl * bcl.transpose()))?;
    Ok((&ccl * p * ccl.transpose()).trace())
}
