//! Dense complex-matrix primitives shared by the operator-level modules.
//!
//! Everything here works on `nalgebra::DMatrix<Complex64>`. Hermitian
//! decompositions symmetrize their input as `(A + A†)/2` first, so callers
//! only need entrywise-Hermitian inputs within validation tolerance.
//! Singular values go through the Hermitian dilation `[[0, B], [B†, 0]]`,
//! whose eigenvalues are `±σᵢ(B)`: this keeps their absolute error at the
//! scale of `ε‖B‖` instead of `ε‖B‖²/σ`, which the fidelity symmetry
//! guarantees rely on.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

/// Dense complex matrix used throughout the crate.
pub type CMat = DMatrix<Complex64>;
/// Dense complex vector.
pub type CVec = DVector<Complex64>;

/// `n × n` identity.
pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// `n × n` zero matrix.
pub fn zeros(n: usize) -> CMat {
    CMat::zeros(n, n)
}

/// Conjugate transpose.
pub fn dagger(a: &CMat) -> CMat {
    a.adjoint()
}

/// Largest `|entry|` of `A`.
pub fn max_abs_entry(a: &CMat) -> f64 {
    a.iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

/// Largest `|entry|` of `A - A†`.
pub fn hermiticity_deviation(a: &CMat) -> f64 {
    max_abs_entry(&(a - a.adjoint()))
}

/// `(A + A†)/2`.
pub fn hermitize(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// Errors unless every entry is finite.
pub fn check_finite(a: &CMat) -> Result<()> {
    for col in 0..a.ncols() {
        for row in 0..a.nrows() {
            let z = a[(row, col)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::NonFiniteEntry { row, col });
            }
        }
    }
    Ok(())
}

/// `Tr A` (complex).
pub fn trace(a: &CMat) -> Complex64 {
    let mut t = Complex64::new(0.0, 0.0);
    for i in 0..a.nrows().min(a.ncols()) {
        t += a[(i, i)];
    }
    t
}

/// Real part of the trace — the physically meaningful value for Hermitian
/// expressions such as `Tr(ρ E)`.
pub fn trace_re(a: &CMat) -> f64 {
    trace(a).re
}

/// Eigendecomposition of a (numerically) Hermitian matrix.
///
/// Returns eigenvalues in ascending order with matching eigenvector columns.
/// The input is symmetrized before decomposing.
pub fn eigh(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "eigh requires a square matrix");
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let se = nalgebra::SymmetricEigen::new(hermitize(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        se.eigenvalues[i]
            .partial_cmp(&se.eigenvalues[j])
            .expect("eigenvalues are finite")
    });
    let values: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &se.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(a: &CMat) -> f64 {
    let (vals, _) = eigh(a);
    vals.first().copied().unwrap_or(0.0)
}

/// Apply `f` to the eigenvalues of a Hermitian matrix: `V f(Λ) V†`.
pub fn hermitian_function(a: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = eigh(a);
    let n = vals.len();
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        let fv = Complex64::new(f(v), 0.0);
        for i in 0..n {
            scaled[(i, j)] *= fv;
        }
    }
    scaled * vecs.adjoint()
}

/// Principal square root of a PSD Hermitian matrix.
///
/// Eigenvalues in `[-psd_tol, 0)` are clamped to zero; anything below
/// `-psd_tol` is rejected.
pub fn sqrt_psd(a: &CMat, psd_tol: f64) -> Result<CMat> {
    let (vals, vecs) = eigh(a);
    if let Some(&min) = vals.first() {
        if min < -psd_tol {
            return Err(Error::NotPositiveSemidefinite {
                min_eigenvalue: min,
            });
        }
    }
    let n = vals.len();
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        let s = Complex64::new(v.max(0.0).sqrt(), 0.0);
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    Ok(scaled * vecs.adjoint())
}

/// Support-restricted inverse square root of a PSD Hermitian matrix.
///
/// Returns `(W, basis, dropped, max_dropped)` where `basis` holds an
/// orthonormal basis of the support (eigenvalues > `support_tol`) as columns,
/// `W = basis · diag(λ^{-1/2})` maps support coordinates to the full space
/// scaled by the inverse root, `dropped` counts discarded eigenvalues and
/// `max_dropped` is the largest of them (0 if none).
pub struct SupportInvSqrt {
    /// `d × k`: support basis columns scaled by `λ^{-1/2}`.
    pub scaled_basis: CMat,
    /// `d × k`: orthonormal support basis columns.
    pub basis: CMat,
    /// Number of eigenvalues at or below the support cutoff.
    pub dropped: usize,
    /// Largest dropped eigenvalue (0 when nothing was dropped).
    pub max_dropped: f64,
}

pub fn support_inv_sqrt(a: &CMat, support_tol: f64) -> SupportInvSqrt {
    let (vals, vecs) = eigh(a);
    let n = vals.len();
    let kept: Vec<usize> = (0..n).filter(|&i| vals[i] > support_tol).collect();
    let dropped = n - kept.len();
    let max_dropped = (0..n)
        .filter(|&i| vals[i] <= support_tol)
        .fold(0.0f64, |m, i| m.max(vals[i]));
    let mut basis = CMat::zeros(n, kept.len());
    let mut scaled = CMat::zeros(n, kept.len());
    for (dst, &src) in kept.iter().enumerate() {
        basis.set_column(dst, &vecs.column(src));
        let inv_root = Complex64::new(1.0 / vals[src].sqrt(), 0.0);
        for row in 0..n {
            scaled[(row, dst)] = vecs[(row, src)] * inv_root;
        }
    }
    SupportInvSqrt {
        scaled_basis: scaled,
        basis,
        dropped,
        max_dropped,
    }
}

/// Singular values of `B` in descending order, via the Hermitian dilation.
pub fn singular_values(b: &CMat) -> Vec<f64> {
    let n = b.nrows();
    assert_eq!(n, b.ncols(), "singular_values requires a square matrix");
    if n == 0 {
        return Vec::new();
    }
    let mut dilation = CMat::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            dilation[(i, n + j)] = b[(i, j)];
            dilation[(n + i, j)] = b[(j, i)].conj();
        }
    }
    let (vals, _) = eigh(&dilation);
    // Eigenvalues come in ±σ pairs; the top n are the singular values.
    let mut sv: Vec<f64> = vals[n..].iter().rev().map(|&v| v.max(0.0)).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
    sv
}

/// Largest singular value (operator norm).
pub fn max_singular_value(b: &CMat) -> f64 {
    singular_values(b).first().copied().unwrap_or(0.0)
}

/// Trace norm `‖B‖₁ = Σ σᵢ`.
pub fn trace_norm(b: &CMat) -> f64 {
    singular_values(b).iter().sum()
}

/// Kronecker product `A ⊗ B`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// `⟨u, A u⟩ / ⟨u, u⟩` for Hermitian `A` (real by construction).
pub fn rayleigh_quotient(a: &CMat, u: &CVec) -> f64 {
    let au = a * u;
    let num: Complex64 = u.dotc(&au);
    let den: Complex64 = u.dotc(u);
    num.re / den.re
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eigh_sorts_and_reconstructs() {
        let a = CMat::from_row_slice(
            2,
            2,
            &[c(2.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(3.0, 0.0)],
        );
        let (vals, vecs) = eigh(&a);
        assert!(vals[0] <= vals[1]);
        // Pauli-like matrix [[2, -i], [i, 3]] has eigenvalues (5 ± √5)/2.
        let expected_lo = (5.0 - 5.0f64.sqrt()) / 2.0;
        let expected_hi = (5.0 + 5.0f64.sqrt()) / 2.0;
        assert_abs_diff_eq!(vals[0], expected_lo, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[1], expected_hi, epsilon = 1e-12);
        let mut recon = zeros(2);
        for j in 0..2 {
            let v = vecs.column(j);
            let outer = v * v.adjoint();
            recon += outer.scale(vals[j]);
        }
        assert!(max_abs_entry(&(recon - a)) < 1e-12);
    }

    #[test]
    fn sqrt_psd_squares_back() {
        let b = CMat::from_row_slice(
            2,
            2,
            &[c(1.0, 0.0), c(0.5, 0.2), c(0.3, -0.1), c(0.8, 0.0)],
        );
        let a = &b * b.adjoint();
        let r = sqrt_psd(&a, 1e-9).unwrap();
        assert!(max_abs_entry(&(&r * &r - a)) < 1e-12);
    }

    #[test]
    fn sqrt_psd_rejects_negative() {
        let a = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.1, 0.0)]);
        let err = sqrt_psd(&a, 1e-9).unwrap_err();
        match err {
            Error::NotPositiveSemidefinite { min_eigenvalue } => {
                assert_abs_diff_eq!(min_eigenvalue, -0.1, epsilon = 1e-12);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn singular_values_match_known_case() {
        // B = [[0, 2], [0, 0]] has singular values {2, 0}.
        let b = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let sv = singular_values(&b);
        assert_abs_diff_eq!(sv[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sv[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(trace_norm(&b), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(max_singular_value(&b), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn trace_norm_of_difference_of_projectors() {
        // |0⟩⟨0| - |1⟩⟨1| has trace norm 2.
        let d = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
        assert_abs_diff_eq!(trace_norm(&d), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn support_inv_sqrt_restricts_to_support() {
        // diag(4, 0): support is the first axis only.
        let a = CMat::from_row_slice(2, 2, &[c(4.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let s = support_inv_sqrt(&a, 1e-10);
        assert_eq!(s.dropped, 1);
        assert_eq!(s.basis.ncols(), 1);
        assert_abs_diff_eq!(s.max_dropped, 0.0, epsilon = 1e-15);
        // W† A W should be the identity on the support.
        let compressed = s.scaled_basis.adjoint() * &a * &s.scaled_basis;
        assert_abs_diff_eq!(compressed[(0, 0)].re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn hermiticity_deviation_detects_asymmetry() {
        let a = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.5, 0.0), c(0.2, 0.0), c(1.0, 0.0)]);
        assert_abs_diff_eq!(hermiticity_deviation(&a), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn check_finite_flags_nan() {
        let mut a = identity(2);
        a[(0, 1)] = c(f64::NAN, 0.0);
        assert!(check_finite(&a).is_err());
    }
}
