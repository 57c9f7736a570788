//! Continuous algebraic Riccati equation
//!
//! ```text
//! AᵀX + XA − XSX + Qc = 0
//! ```
//!
//! solved through the stable invariant subspace of the Hamiltonian
//! `[[A, −S], [−Qc, −Aᵀ]]`. The real Schur form from nalgebra is converted to a
//! complex triangular form and reordered with unitary swaps so that the stable
//! eigenvalues lead; a few Newton (Kleinman) steps polish the result.
//! When the QR iteration stalls, the matrix sign function is used instead.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::linalg::{is_hurwitz, lyapunov, symmetrize};

type C64 = Complex<f64>;

/// Residual `AᵀX + XA − XSX + Qc`.
pub fn care_residual(
    a: &DMatrix<f64>,
    s: &DMatrix<f64>,
    qc: &DMatrix<f64>,
    x: &DMatrix<f64>,
) -> DMatrix<f64> {
    a.transpose() * x + x * a - x * s * x + qc
}

/// Relative residual used for acceptance: ‖res‖_F / (1 + ‖X‖_F²).
pub fn care_relative_residual(
    a: &DMatrix<f64>,
    s: &DMatrix<f64>,
    qc: &DMatrix<f64>,
    x: &DMatrix<f64>,
) -> f64 {
    care_residual(a, s, qc, x).norm() / (1.0 + x.norm_squared())
}

/// Stabilizing solution of `AᵀX + XA − XSX + Qc = 0`.
pub fn solve_care(a: &DMatrix<f64>, s: &DMatrix<f64>, qc: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || s.shape() != (n, n) || qc.shape() != (n, n) {
        return Err(Error::Dimension("solve_care: A, S, Qc must all be n×n".into()));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }

    let mut h = DMatrix::<f64>::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-s));
    h.view_mut((n, 0), (n, n)).copy_from(&(-qc));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let (mut q, mut t) = match complex_schur(&h) {
        Ok(qt) => qt,
        Err(_) => return solve_care_sign(a, s, qc, &h),
    };
    let scale = 1.0 + h.norm();
    let imag_tol = 1e-10 * scale;

    let diag: Vec<C64> = (0..2 * n).map(|i| t[(i, i)]).collect();
    if let Some(l) = diag.iter().find(|l| l.re.abs() <= imag_tol) {
        return Err(Error::NoStabilizingSolution(format!(
            "Hamiltonian has an eigenvalue on the imaginary axis ({:.3e}{:+.3e}i)",
            l.re, l.im
        )));
    }
    let stable = diag.iter().filter(|l| l.re < 0.0).count();
    if stable != n {
        return Err(Error::NoStabilizingSolution(format!(
            "expected {n} stable Hamiltonian eigenvalues, found {stable}"
        )));
    }

    reorder_stable_first(&mut t, &mut q);

    let u1 = q.view((0, 0), (n, n)).clone_owned();
    let u2 = q.view((n, 0), (n, n)).clone_owned();
    let u1_inv = u1
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NoStabilizingSolution("invariant subspace basis is singular".into()))?;
    let cond = u1.norm() * u1_inv.norm();
    if !cond.is_finite() || cond > 1e14 {
        return Err(Error::NoStabilizingSolution(format!(
            "invariant subspace basis is ill-conditioned (cond ≈ {cond:.2e})"
        )));
    }
    let xc = &u2 * &u1_inv;
    let x = symmetrize(&xc.map(|z| z.re));

    let x = newton_polish(a, s, qc, x);

    if !is_hurwitz(&(a - s * &x)) {
        return Err(Error::NoStabilizingSolution("closed-loop matrix A − SX is not Hurwitz".into()));
    }
    Ok(x)
}

/// Fallback through the matrix sign function `W = sign(H)`: the stabilizing
/// solution satisfies `[W₁₂; W₂₂ + I] X = −[W₁₁ + I; W₂₁]`.
fn solve_care_sign(
    a: &DMatrix<f64>,
    s: &DMatrix<f64>,
    qc: &DMatrix<f64>,
    h: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let m = 2 * n;
    let mut z = h.clone();
    let mut converged = false;
    for _ in 0..100 {
        let lu = z.clone().lu();
        let det = lu.determinant();
        let zi =
            lu.try_inverse().ok_or_else(|| Error::NoStabilizingSolution("Hamiltonian is singular".into()))?;
        let c = det.abs().powf(-1.0 / m as f64);
        let c = if c.is_finite() && c > 0.0 { c } else { 1.0 };
        let next = (&z * c + zi / c) * 0.5;
        let change = (&next - &z).norm();
        z = next;
        if change <= 1e-13 * z.norm() {
            converged = true;
            break;
        }
    }
    if !converged || z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NoStabilizingSolution(
            "sign iteration did not converge (eigenvalue near the imaginary axis?)".into(),
        ));
    }
    if z.trace().abs() > 0.5 {
        return Err(Error::NoStabilizingSolution(format!(
            "Hamiltonian spectrum is not split evenly (trace of sign = {:.3})",
            z.trace()
        )));
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let mut lhs = DMatrix::zeros(m, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&z.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n)).copy_from(&(z.view((n, n), (n, n)) + &eye));
    let mut rhs = DMatrix::zeros(m, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&-(z.view((0, 0), (n, n)) + &eye));
    rhs.view_mut((n, 0), (n, n)).copy_from(&-z.view((n, 0), (n, n)));
    let x =
        lhs.svd(true, true).solve(&rhs, 1e-14).map_err(|e| Error::NoStabilizingSolution(e.to_string()))?;
    let x = newton_polish(a, s, qc, symmetrize(&x));
    if !is_hurwitz(&(a - s * &x)) {
        return Err(Error::NoStabilizingSolution("closed-loop matrix A − SX is not Hurwitz".into()));
    }
    Ok(x)
}

/// Kleinman/Newton refinement; stops when the residual stops improving.
fn newton_polish(a: &DMatrix<f64>, s: &DMatrix<f64>, qc: &DMatrix<f64>, mut x: DMatrix<f64>) -> DMatrix<f64> {
    let mut res = care_residual(a, s, qc, &x).norm();
    for _ in 0..8 {
        if res <= 1e-15 * (1.0 + x.norm_squared()) {
            break;
        }
        let acl = a - s * &x;
        let rhs = care_residual(a, s, qc, &x);
        // (A − SX)ᵀΔ + Δ(A − SX) = −Res
        let Ok(delta) = lyapunov(&acl.transpose(), &rhs) else {
            break;
        };
        let cand = symmetrize(&(&x + delta));
        let cand_res = care_residual(a, s, qc, &cand).norm();
        if !(cand_res < res) {
            break;
        }
        x = cand;
        res = cand_res;
    }
    x
}

/// Complex upper-triangular Schur form `H = Q T Qᴴ`.
fn complex_schur(h: &DMatrix<f64>) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
    let m = h.nrows();
    let schur = nalgebra::Schur::try_new(h.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::NoStabilizingSolution("Schur iteration did not converge".into()))?;
    let (qr, tr) = schur.unpack();
    let mut q = qr.map(|v| C64::new(v, 0.0));
    let mut t = tr.map(|v| C64::new(v, 0.0));

    // split the 2×2 blocks of the quasi-triangular form
    let mut k = 0;
    while k + 1 < m {
        if t[(k + 1, k)].norm() == 0.0 {
            k += 1;
            continue;
        }
        let (a, b, c, d) = (t[(k, k)], t[(k, k + 1)], t[(k + 1, k)], t[(k + 1, k + 1)]);
        let tr2 = (a + d) * 0.5;
        let disc = ((a - d) * 0.5 * ((a - d) * 0.5) + b * c).sqrt();
        let lambda = tr2 + disc;
        // eigenvector of [[a, b], [c, d]] for λ
        let v1 = [b, lambda - a];
        let v2 = [lambda - d, c];
        let v = if norm2(v1) >= norm2(v2) { v1 } else { v2 };
        apply_rotation(&mut t, &mut q, k, v);
        t[(k + 1, k)] = C64::new(0.0, 0.0);
        k += 2;
    }
    Ok((q, t))
}

fn norm2(v: [C64; 2]) -> f64 {
    (v[0].norm_sqr() + v[1].norm_sqr()).sqrt()
}

/// Applies the unitary `G = [v, v⊥]` (first column ∝ `v`) at rows/cols `k, k+1`:
/// `T ← Gᴴ T G`, `Q ← Q G`.
fn apply_rotation(t: &mut DMatrix<C64>, q: &mut DMatrix<C64>, k: usize, v: [C64; 2]) {
    let nv = norm2(v);
    if nv == 0.0 {
        return;
    }
    let g11 = v[0] / nv;
    let g21 = v[1] / nv;
    let g12 = -g21.conj();
    let g22 = g11.conj();
    let m = t.nrows();
    for j in 0..m {
        let x = t[(k, j)];
        let y = t[(k + 1, j)];
        t[(k, j)] = g11.conj() * x + g21.conj() * y;
        t[(k + 1, j)] = g12.conj() * x + g22.conj() * y;
    }
    for i in 0..m {
        let x = t[(i, k)];
        let y = t[(i, k + 1)];
        t[(i, k)] = x * g11 + y * g21;
        t[(i, k + 1)] = x * g12 + y * g22;
    }
    for i in 0..q.nrows() {
        let x = q[(i, k)];
        let y = q[(i, k + 1)];
        q[(i, k)] = x * g11 + y * g21;
        q[(i, k + 1)] = x * g12 + y * g22;
    }
}

/// Bubbles every eigenvalue with negative real part to the leading block.
fn reorder_stable_first(t: &mut DMatrix<C64>, q: &mut DMatrix<C64>) {
    let m = t.nrows();
    loop {
        let mut swapped = false;
        for k in 0..m - 1 {
            let a = t[(k, k)];
            let b = t[(k + 1, k + 1)];
            if a.re >= 0.0 && b.re < 0.0 {
                // eigenvector of [[a, t12], [0, b]] for b
                let v = [t[(k, k + 1)], b - a];
                apply_rotation(t, q, k, v);
                t[(k + 1, k)] = C64::new(0.0, 0.0);
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }
}
