//! Small dense helpers shared by the design and simulation code.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn is_square(m: &DMatrix<f64>) -> bool {
    m.nrows() == m.ncols()
}

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    if m.is_empty() {
        return Vec::new();
    }
    m.complex_eigenvalues().iter().copied().collect()
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    eigenvalues(m).iter().map(|l| l.norm()).fold(0.0, f64::max)
}

pub fn max_real_eigenvalue(m: &DMatrix<f64>) -> f64 {
    eigenvalues(m).iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Hurwitz test with a margin proportional to the spectral scale:
/// max Re λ < −1e-9·(1 + ρ(M)).
pub fn is_hurwitz(m: &DMatrix<f64>) -> bool {
    let eigs = eigenvalues(m);
    let radius = eigs.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let max_re = eigs.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    max_re < -1e-9 * (1.0 + radius)
}

/// Symmetric eigendecomposition of the symmetric part of `m`.
pub fn sym_eigen(m: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    SymmetricEigen::new(symmetrize(m))
}

/// Smallest and largest eigenvalue of the symmetric part of `m`.
pub fn sym_eig_range(m: &DMatrix<f64>) -> (f64, f64) {
    let e = sym_eigen(m);
    let lo = e.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = e.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Symmetric square root with negative eigenvalues clipped at zero.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = sym_eigen(m);
    let d = DVector::from_iterator(e.eigenvalues.len(), e.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()));
    symmetrize(&(&e.eigenvectors * DMatrix::from_diagonal(&d) * e.eigenvectors.transpose()))
}

/// Positive-definiteness check: Cholesky must succeed and the spectrum must
/// not be near-degenerate (λ_min ≥ 1e-12·λ_max).
pub fn require_pd(m: &DMatrix<f64>, which: &'static str) -> Result<()> {
    if !is_square(m) || m.is_empty() {
        return Err(Error::Dimension(format!("{which} must be square and non-empty")));
    }
    let asym = (m - m.transpose()).norm();
    if !(asym <= 1e-10 * (1.0 + m.norm())) {
        return Err(Error::NotPositiveDefinite { which });
    }
    let s = symmetrize(m);
    if s.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite { which });
    }
    let (lo, hi) = sym_eig_range(&s);
    if !(lo > 1e-12 * hi) {
        return Err(Error::NotPositiveDefinite { which });
    }
    Ok(())
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = DMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij != 0.0 {
                out.view_mut((i * br, j * bc), (br, bc)).copy_from(&(b * aij));
            }
        }
    }
    out
}

/// Solves the Lyapunov equation `A X + X Aᵀ + W = 0` for X.
///
/// Uses the vectorized Kronecker form, adequate for the small state
/// dimensions this crate works with.
pub fn lyapunov(a: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if !is_square(a) || w.shape() != (n, n) {
        return Err(Error::Dimension("lyapunov: A and W must be n×n".into()));
    }
    let eye = DMatrix::<f64>::identity(n, n);
    // vec(A X) = (I ⊗ A) vec X, vec(X Aᵀ) = (A ⊗ I) vec X
    let k = kron(&eye, a) + kron(a, &eye);
    let rhs = -DVector::from_column_slice(w.as_slice());
    let sol = k.lu().solve(&rhs).ok_or_else(|| Error::Domain("lyapunov operator is singular".into()))?;
    Ok(DMatrix::from_column_slice(n, n, sol.as_slice()))
}

/// Whether a complex matrix has full rank (row or column, whichever is
/// smaller), judged by its smallest singular value relative to `scale`.
pub fn complex_full_rank(m: &DMatrix<Complex<f64>>, scale: f64) -> bool {
    let smin = m.clone().svd(false, false).singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    smin > 1e-9 * (1.0 + scale)
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex<f64>> {
    m.map(|v| Complex::new(v, 0.0))
}

/// 2-D rotation matrix by angle θ (counterclockwise).
pub fn rotation(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}
