//! Closed-form optimal sampling for integrator reset systems (A = 0).
//!
//! The optimal trigger is the ellipsoid `xᵀPx = 2√ρ` where `P ≻ 0` solves
//! `PRP + ½Tr(RP)P = Q`. After the congruence `x̄ = Uᵀ Q^{1/2} x` the equation
//! becomes diagonal and the whole problem reduces to finding the unique
//! positive root of `h(s) = (n+4)s − Σ√(s² + 16 r_j)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::matrix_rows;
use crate::linalg::{psd_sqrt, require_pd, sym_eigen, symmetrize};

/// Ellipsoidal trigger bound `{x : xᵀPx = 2√ρ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidBound {
    #[serde(rename = "P", with = "matrix_rows")]
    pub p: DMatrix<f64>,
    pub rho: f64,
}

impl EllipsoidBound {
    pub fn new(p: DMatrix<f64>, rho: f64) -> Result<Self> {
        require_pd(&p, "P")?;
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::Domain(format!("per-sample cost must be positive, got {rho}")));
        }
        Ok(Self { p, rho })
    }

    /// Optimal bound for the reset system `(A = 0, Q, R)` at per-sample cost ρ.
    pub fn optimal(q: &DMatrix<f64>, r: &DMatrix<f64>, rho: f64) -> Result<Self> {
        let sol = solve_riccati_like(q, r)?;
        Self::new(sol.p, rho)
    }

    /// The level `2√ρ` of the quadratic form on the boundary.
    pub fn level(&self) -> f64 {
        2.0 * self.rho.sqrt()
    }

    /// Boundary points of a planar ellipse, sampled uniformly in angle.
    /// The returned polyline is closed (last point repeats the first).
    pub fn boundary_points(&self, n_points: usize) -> Result<Vec<[f64; 2]>> {
        if self.p.nrows() != 2 {
            return Err(Error::Dimension("boundary polyline is only defined for n = 2".into()));
        }
        let n_points = n_points.max(3);
        let mut pts: Vec<[f64; 2]> = (0..n_points)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / n_points as f64;
                let u = DVector::from_vec(vec![th.cos(), th.sin()]);
                let quad = (u.transpose() * &self.p * &u)[(0, 0)];
                let radius = (self.level() / quad).sqrt();
                [radius * u[0], radius * u[1]]
            })
            .collect();
        pts.push(pts[0]);
        Ok(pts)
    }
}

/// Result of the scalar-reduced Riccati-like solve.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiLikeSolution {
    pub p: DMatrix<f64>,
    /// Root of `h`, equal to `Σ p_j r_j = Tr(RP)`.
    pub s: f64,
    /// Eigenvalues of `Q^{1/2} R Q^{1/2}`.
    pub r: DVector<f64>,
}

/// `h(s) = (n+4)s − Σ_j √(s² + 16 r_j)`.
pub fn scalar_h(s: f64, r: &[f64]) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("h(s) requires s > 0, got {s}")));
    }
    if r.is_empty() || r.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Domain("h(s) requires positive eigenvalues r_j".into()));
    }
    Ok(h_unchecked(s, r))
}

fn h_unchecked(s: f64, r: &[f64]) -> f64 {
    let n = r.len() as f64;
    (n + 4.0) * s - r.iter().map(|&rj| (s * s + 16.0 * rj).sqrt()).sum::<f64>()
}

fn dh_unchecked(s: f64, r: &[f64]) -> f64 {
    let n = r.len() as f64;
    (n + 4.0) - r.iter().map(|&rj| s / (s * s + 16.0 * rj).sqrt()).sum::<f64>()
}

/// Unique positive root of `h`. Bisection on a bracket `[tiny, Σ√r_j]`
/// (`h(Σ√r_j) ≥ 0` always), then safeguarded Newton.
pub fn root_of_h(r: &[f64]) -> Result<f64> {
    if r.is_empty() || r.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain("h(s) requires positive eigenvalues r_j".into()));
    }
    let mut hi: f64 = r.iter().map(|v| v.sqrt()).sum();
    while h_unchecked(hi, r) < 0.0 {
        hi *= 2.0;
    }
    let mut lo = f64::MIN_POSITIVE;
    debug_assert!(h_unchecked(lo, r) < 0.0);

    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if h_unchecked(mid, r) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-6 * hi {
            break;
        }
    }

    let mut s = 0.5 * (lo + hi);
    for _ in 0..50 {
        let hv = h_unchecked(s, r);
        if hv.abs() <= 1e-14 * (1.0 + s) {
            break;
        }
        if hv < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let step = s - hv / dh_unchecked(s, r);
        s = if step > lo && step < hi { step } else { 0.5 * (lo + hi) };
    }
    Ok(s)
}

/// Solves `PRP + ½Tr(RP)P = Q` for `P ≻ 0`.
pub fn solve_riccati_like(q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<RiccatiLikeSolution> {
    require_pd(q, "Q")?;
    require_pd(r, "R")?;
    if q.shape() != r.shape() {
        return Err(Error::Dimension("Q and R must have the same shape".into()));
    }
    let q_half = psd_sqrt(q);
    let r_tilde = symmetrize(&(&q_half * r * &q_half));
    let eig = sym_eigen(&r_tilde);
    let rv: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let s = root_of_h(&rv)?;
    // p_i = −s/(4r_i) + √(s²/(16r_i²) + 1/r_i), written without cancellation
    let p_bar =
        DVector::from_iterator(rv.len(), rv.iter().map(|&ri| 1.0 / (0.25 * s + (s * s / 16.0 + ri).sqrt())));
    let u = &eig.eigenvectors;
    let p = symmetrize(&(&q_half * u * DMatrix::from_diagonal(&p_bar) * u.transpose() * &q_half));
    Ok(RiccatiLikeSolution { p, s, r: DVector::from_vec(rv) })
}

/// `PRP + ½Tr(RP)P − Q`.
pub fn riccati_like_residual(p: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> DMatrix<f64> {
    let rp = r * p;
    p * r * p + p * (0.5 * rp.trace()) - q
}

fn quad_form(p: &DMatrix<f64>, x: &[f64]) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += x[i] * p[(i, j)] * x[j];
        }
    }
    acc
}

/// `V(x) = −¼(2√ρ − xᵀPx)²` inside the ellipsoid and 0 outside.
pub fn value_function_integrator(x: &[f64], p: &DMatrix<f64>, rho: f64) -> f64 {
    let g = 2.0 * rho.sqrt() - quad_form(p, x);
    if g >= 0.0 {
        -0.25 * g * g
    } else {
        0.0
    }
}

/// Gradient `g(x)·Px` inside, 0 outside.
pub fn value_gradient_integrator(x: &[f64], p: &DMatrix<f64>, rho: f64) -> DVector<f64> {
    let g = 2.0 * rho.sqrt() - quad_form(p, x);
    if g < 0.0 {
        return DVector::zeros(x.len());
    }
    p * DVector::from_column_slice(x) * g
}

/// Hessian `g(x)P − 2Pxxᵀ P` inside, 0 outside.
pub fn value_hessian_integrator(x: &[f64], p: &DMatrix<f64>, rho: f64) -> DMatrix<f64> {
    let n = x.len();
    let g = 2.0 * rho.sqrt() - quad_form(p, x);
    if g < 0.0 {
        return DMatrix::zeros(n, n);
    }
    let px = p * DVector::from_column_slice(x);
    p * g - (&px * px.transpose()) * 2.0
}

/// Fires when `xᵀPx ≥ 2√ρ`. The inequality (rather than equality) catches
/// discrete-time overshoot in simulation.
pub fn ellipsoid_trigger(x: &[f64], bound: &EllipsoidBound) -> bool {
    quad_form(&bound.p, x) >= bound.level()
}

/// Costs of the optimal ellipsoidal scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorCosts {
    /// `J = J_H + ρf = √ρ Tr(RP)`
    pub total: f64,
    /// `J_H = ½√ρ Tr(RP)`
    pub j_h: f64,
    /// Average sampling rate `f = J_H/ρ` (infinite when ρ = 0).
    pub rate: f64,
}

pub fn integrator_costs(p: &DMatrix<f64>, r: &DMatrix<f64>, rho: f64) -> Result<IntegratorCosts> {
    if !(rho >= 0.0) {
        return Err(Error::Domain(format!("per-sample cost must be nonnegative, got {rho}")));
    }
    let tr = (r * p).trace();
    let total = rho.sqrt() * tr;
    let j_h = 0.5 * total;
    let rate = if rho > 0.0 { j_h / rho } else { f64::INFINITY };
    Ok(IntegratorCosts { total, j_h, rate })
}

/// Cost slopes `J_H = slope · h_avg` for optimal event-based and periodic
/// sampling of an integrator reset system, and their ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopePair {
    pub j_e: f64,
    pub j_p: f64,
    pub j_ratio: f64,
}

/// `J_e = [Tr(RP)]²/4`, `J_p = Tr(RQ)/2`.
pub fn slopes_and_ratio(q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<SlopePair> {
    let sol = solve_riccati_like(q, r)?;
    let tr_rp = (r * &sol.p).trace();
    let j_e = tr_rp * tr_rp / 4.0;
    let j_p = (r * q).trace() / 2.0;
    Ok(SlopePair { j_e, j_p, j_ratio: j_p / j_e })
}

/// `1 + 2‖λ‖₂²/‖λ‖₁²` from the eigenvalues of `RP`, computed on the
/// similar symmetric matrix `R^{1/2} P R^{1/2}`.
pub fn ratio_from_eigenvalues(p: &DMatrix<f64>, r: &DMatrix<f64>) -> f64 {
    let rh = psd_sqrt(r);
    let lam = sym_eigen(&(&rh * p * &rh)).eigenvalues;
    let l1: f64 = lam.iter().map(|v| v.abs()).sum();
    let l2: f64 = lam.iter().map(|v| v * v).sum();
    1.0 + 2.0 * l2 / (l1 * l1)
}

/// Lower bound `1 + 2/n` of the periodic/event ratio (`3` for n = 1).
pub fn ratio_lower_bound(n: usize) -> f64 {
    if n == 1 {
        3.0
    } else {
        1.0 + 2.0 / n as f64
    }
}
