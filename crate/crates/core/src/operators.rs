//! POVMs and density operators on finite dimensions.
//!
//! The overlap constants quantify how distinguishable two measurements are in
//! the worst case: `max_overlap_c` takes the squared largest singular value of
//! `√X √Z` over all element pairs, `overlap_cprime` is the (never larger)
//! min-of-max-norms refinement, and `restricted_overlap` excludes the
//! designated null elements of both measurements. `effective_povm` and
//! `filtered_state` implement the conditioning-on-detection construction: the
//! measurement and the state are compressed onto the support of the
//! non-blocked operator `M` (the sum of the informative elements), which
//! preserves all outcome probabilities up to the overall pass probability.

use num_complex::Complex64;
use serde::Serialize;

use crate::linalg::{
    self, check_finite, eigh, hermiticity_deviation, max_abs_entry, sqrt_psd, support_inv_sqrt,
    trace_re, CMat,
};
use crate::{Error, Result, Tolerances};

/// A finite-dimensional operator: square complex matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Op {
    mat: CMat,
}

impl Op {
    /// Wraps a square matrix, rejecting non-square shapes and NaN/Inf entries.
    pub fn new(mat: CMat) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch {
                left: mat.nrows(),
                right: mat.ncols(),
                context: "operator must be square",
            });
        }
        check_finite(&mat)?;
        Ok(Self { mat })
    }

    /// The identity operator on `dim` dimensions.
    pub fn identity(dim: usize) -> Self {
        Self {
            mat: linalg::identity(dim),
        }
    }

    /// The zero operator on `dim` dimensions.
    pub fn zero(dim: usize) -> Self {
        Self {
            mat: linalg::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn into_matrix(self) -> CMat {
        self.mat
    }
}

/// A density operator: Hermitian, PSD within tolerance, unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOp {
    op: Op,
}

impl DensityOp {
    /// Validates Hermiticity, positivity, and unit trace at the given tolerances.
    pub fn new(op: Op, tol: &Tolerances) -> Result<Self> {
        let dev = hermiticity_deviation(op.matrix());
        if dev > tol.hermiticity {
            return Err(Error::NotHermitian { deviation: dev });
        }
        let min_eig = linalg::min_eigenvalue(op.matrix());
        if min_eig < -tol.psd {
            return Err(Error::NotPositiveSemidefinite {
                min_eigenvalue: min_eig,
            });
        }
        let tr = trace_re(op.matrix());
        if (tr - 1.0).abs() > tol.trace {
            return Err(Error::NotUnitTrace { trace: tr });
        }
        Ok(Self { op })
    }

    /// Validates with the default tolerances.
    pub fn from_matrix(mat: CMat) -> Result<Self> {
        Self::new(Op::new(mat)?, &Tolerances::default())
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn matrix(&self) -> &CMat {
        self.op.matrix()
    }

    pub fn as_op(&self) -> &Op {
        &self.op
    }
}

/// A POVM given as an explicit list of matrix elements, with an optional
/// designated null (no-detection) element.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPovm {
    elements: Vec<Op>,
    null_index: Option<usize>,
}

impl MatrixPovm {
    /// Structural construction: nonempty, consistent dimensions, null index in
    /// range. Numerical invariants are checked by [`validate_povm`].
    pub fn new(elements: Vec<Op>, null_index: Option<usize>) -> Result<Self> {
        let first_dim = elements
            .first()
            .map(Op::dim)
            .ok_or_else(|| Error::InvalidParameter("POVM needs at least one element".into()))?;
        for e in &elements {
            if e.dim() != first_dim {
                return Err(Error::DimensionMismatch {
                    left: first_dim,
                    right: e.dim(),
                    context: "POVM elements must share one dimension",
                });
            }
        }
        if let Some(k) = null_index {
            if k >= elements.len() {
                return Err(Error::NullIndexOutOfRange {
                    index: k,
                    count: elements.len(),
                });
            }
        }
        Ok(Self {
            elements,
            null_index,
        })
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[Op] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &Op {
        &self.elements[i]
    }

    pub fn null_index(&self) -> Option<usize> {
        self.null_index
    }

    /// Indices of the informative (non-null) elements.
    pub fn informative_indices(&self) -> Vec<usize> {
        (0..self.elements.len())
            .filter(|&i| Some(i) != self.null_index)
            .collect()
    }

    /// Sum of the informative elements (the non-blocked operator `M`).
    /// Equals the identity when no null element is designated.
    pub fn non_null_sum(&self) -> CMat {
        let mut m = linalg::zeros(self.dim());
        for i in self.informative_indices() {
            m += self.elements[i].matrix();
        }
        m
    }
}

/// Outcome of a single POVM invariant check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CheckOutcome {
    pub pass: bool,
    /// Worst observed deviation for this invariant (sign and meaning depend
    /// on the check; see the field docs on [`PovmValidationReport`]).
    pub worst: f64,
}

/// Per-invariant validation report for a POVM.
#[derive(Debug, Clone, Serialize)]
pub struct PovmValidationReport {
    pub dim: usize,
    pub n_elements: usize,
    /// Worst entrywise `|E - E†|` over elements.
    pub hermiticity: CheckOutcome,
    /// Smallest eigenvalue over all elements (pass iff ≥ -τ_psd).
    pub positivity: CheckOutcome,
    /// Worst entrywise deviation of `Σ E` from the identity.
    pub completeness: CheckOutcome,
}

impl PovmValidationReport {
    pub fn pass(&self) -> bool {
        self.hermiticity.pass && self.positivity.pass && self.completeness.pass
    }
}

/// Checks the POVM invariants and reports the worst deviation per invariant.
pub fn validate_povm(povm: &MatrixPovm, tol: &Tolerances) -> PovmValidationReport {
    let dim = povm.dim();
    let mut herm_worst = 0.0f64;
    let mut min_eig = f64::INFINITY;
    let mut sum = linalg::zeros(dim);
    for e in povm.elements() {
        herm_worst = herm_worst.max(hermiticity_deviation(e.matrix()));
        min_eig = min_eig.min(linalg::min_eigenvalue(e.matrix()));
        sum += e.matrix();
    }
    let completeness_dev = max_abs_entry(&(sum - linalg::identity(dim)));
    PovmValidationReport {
        dim,
        n_elements: povm.len(),
        hermiticity: CheckOutcome {
            pass: herm_worst <= tol.hermiticity,
            worst: herm_worst,
        },
        positivity: CheckOutcome {
            pass: min_eig >= -tol.psd,
            worst: min_eig,
        },
        completeness: CheckOutcome {
            pass: completeness_dev <= tol.completeness,
            worst: completeness_dev,
        },
    }
}

/// Fidelity `Tr√(√σ ρ √σ)`, computed as the trace norm `‖√ρ √σ‖₁`.
///
/// Arguments must be Hermitian PSD (within default tolerances) but need not
/// be normalized; subnormalized operators are accepted.
pub fn fidelity(rho: &Op, sigma: &Op) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            left: rho.dim(),
            right: sigma.dim(),
            context: "fidelity arguments",
        });
    }
    let tol = Tolerances::default();
    let herm = hermiticity_deviation(rho.matrix()).max(hermiticity_deviation(sigma.matrix()));
    if herm > tol.hermiticity {
        return Err(Error::NotHermitian { deviation: herm });
    }
    let sr = sqrt_psd(rho.matrix(), tol.psd)?;
    let ss = sqrt_psd(sigma.matrix(), tol.psd)?;
    Ok(linalg::trace_norm(&(sr * ss)))
}

fn check_same_dim(x: &MatrixPovm, z: &MatrixPovm, context: &'static str) -> Result<()> {
    if x.dim() != z.dim() {
        return Err(Error::DimensionMismatch {
            left: x.dim(),
            right: z.dim(),
            context,
        });
    }
    Ok(())
}

fn pairwise_overlap(x_roots: &[CMat], z_roots: &[CMat]) -> f64 {
    let mut worst = 0.0f64;
    for xr in x_roots {
        for zr in z_roots {
            let s = linalg::max_singular_value(&(xr * zr));
            worst = worst.max(s * s);
        }
    }
    worst
}

fn element_roots(p: &MatrixPovm, indices: &[usize]) -> Result<Vec<CMat>> {
    let tol = Tolerances::default();
    indices
        .iter()
        .map(|&i| sqrt_psd(p.element(i).matrix(), tol.psd))
        .collect()
}

/// Worst-case measurement overlap: `max_{x,z} ‖√X^x √Z^z‖²_∞` over all
/// element pairs (null elements included).
pub fn max_overlap_c(x: &MatrixPovm, z: &MatrixPovm) -> Result<f64> {
    check_same_dim(x, z, "overlap POVM pair")?;
    let all_x: Vec<usize> = (0..x.len()).collect();
    let all_z: Vec<usize> = (0..z.len()).collect();
    let xr = element_roots(x, &all_x)?;
    let zr = element_roots(z, &all_z)?;
    Ok(pairwise_overlap(&xr, &zr).min(1.0))
}

/// Overlap restricted to informative elements: the maximum of
/// `‖√X^x √Z^z‖²_∞` over pairs where neither index is a designated null.
pub fn restricted_overlap(x: &MatrixPovm, z: &MatrixPovm) -> Result<f64> {
    check_same_dim(x, z, "overlap POVM pair")?;
    let xr = element_roots(x, &x.informative_indices())?;
    let zr = element_roots(z, &z.informative_indices())?;
    Ok(pairwise_overlap(&xr, &zr).min(1.0))
}

/// Refined overlap: `min{ max_x ‖Σ_z Z^z X^x Z^z‖_∞ , max_z ‖Σ_x X^x Z^z X^x‖_∞ }`.
/// Never exceeds [`max_overlap_c`] (up to numerical tolerance).
pub fn overlap_cprime(x: &MatrixPovm, z: &MatrixPovm) -> Result<f64> {
    check_same_dim(x, z, "overlap POVM pair")?;
    let dim = x.dim();
    let max_norm_sandwich = |outer: &MatrixPovm, inner: &MatrixPovm| -> f64 {
        let mut worst = 0.0f64;
        for b in inner.elements() {
            let mut sum = linalg::zeros(dim);
            for a in outer.elements() {
                sum += a.matrix() * b.matrix() * a.matrix();
            }
            worst = worst.max(linalg::max_singular_value(&sum));
        }
        worst
    };
    let zxz = max_norm_sandwich(z, x);
    let xzx = max_norm_sandwich(x, z);
    Ok(zxz.min(xzx).min(1.0))
}

/// Result of compressing a POVM onto the support of its non-blocked operator.
#[derive(Debug, Clone)]
pub struct EffectivePovm {
    /// The compressed measurement on the reduced dimension (informative
    /// elements only; no null element remains after conditioning).
    pub povm: MatrixPovm,
    /// Reduced (support) dimension.
    pub support_dim: usize,
    /// `dim × support_dim` orthonormal support basis columns.
    pub basis: CMat,
    /// Eigenvalues of the non-blocked operator at or below the support cutoff.
    pub dropped: usize,
    /// Largest dropped eigenvalue; nonzero values mean the cutoff genuinely
    /// truncated weight and deserve a validation flag upstream.
    pub max_dropped: f64,
}

impl EffectivePovm {
    /// Compress a full-space operator to the support coordinates: `B† A B`.
    pub fn compress(&self, a: &CMat) -> CMat {
        self.basis.adjoint() * a * &self.basis
    }
}

/// Builds the conditioned-on-detection measurement
/// `{M_supp^{-1/2} (P_n)_supp M_supp^{-1/2}}` on the support of
/// `M = Σ_{n ≠ null} P_n`. Requires a designated null element.
pub fn effective_povm(p: &MatrixPovm) -> Result<EffectivePovm> {
    if p.null_index().is_none() {
        return Err(Error::NullIndexMissing);
    }
    let tol = Tolerances::default();
    let m = p.non_null_sum();
    let s = support_inv_sqrt(&m, tol.support);
    let support_dim = s.basis.ncols();
    if support_dim == 0 {
        return Err(Error::FullyBlocked { trace: 0.0 });
    }
    let mut elements = Vec::with_capacity(p.len().saturating_sub(1));
    for i in p.informative_indices() {
        let compressed = s.scaled_basis.adjoint() * p.element(i).matrix() * &s.scaled_basis;
        // Compression of a PSD operator stays PSD; symmetrize round-off only.
        elements.push(Op::new(linalg::hermitize(&compressed))?);
    }
    Ok(EffectivePovm {
        povm: MatrixPovm::new(elements, None)?,
        support_dim,
        basis: s.basis,
        dropped: s.dropped,
        max_dropped: s.max_dropped,
    })
}

/// The state conditioned on not hitting the null outcome:
/// `ρ' = √M ρ √M / Tr(ρM)` with `M` the sum of informative elements of `p`.
pub fn filtered_state(rho: &DensityOp, p: &MatrixPovm) -> Result<DensityOp> {
    if rho.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            left: rho.dim(),
            right: p.dim(),
            context: "state vs POVM dimension",
        });
    }
    let tol = Tolerances::default();
    let m = p.non_null_sum();
    let pass = trace_re(&(rho.matrix() * &m));
    if pass <= tol.probability {
        return Err(Error::FullyBlocked { trace: pass });
    }
    let root = sqrt_psd(&m, tol.psd)?;
    let filtered = (&root * rho.matrix() * &root).unscale(pass);
    DensityOp::new(Op::new(linalg::hermitize(&filtered))?, &tol)
}

/// Outcome probability `Tr(ρ E)` clamped to `[0, 1]` against round-off.
pub fn outcome_probability(rho: &DensityOp, element: &Op) -> Result<f64> {
    if rho.dim() != element.dim() {
        return Err(Error::DimensionMismatch {
            left: rho.dim(),
            right: element.dim(),
            context: "state vs element dimension",
        });
    }
    Ok(trace_re(&(rho.matrix() * element.matrix())).clamp(0.0, 1.0))
}

/// Convenience: computational-basis projective POVM on `dim` dimensions.
pub fn projective_computational(dim: usize) -> MatrixPovm {
    let elements = (0..dim)
        .map(|k| {
            let mut m = linalg::zeros(dim);
            m[(k, k)] = Complex64::new(1.0, 0.0);
            Op::new(m).expect("projector entries are finite")
        })
        .collect();
    MatrixPovm::new(elements, None).expect("projective POVM is structurally valid")
}

/// Convenience: qubit Hadamard-basis (|±⟩) projective POVM.
pub fn projective_hadamard_qubit() -> MatrixPovm {
    let h = 0.5;
    let plus = CMat::from_row_slice(
        2,
        2,
        &[
            Complex64::new(h, 0.0),
            Complex64::new(h, 0.0),
            Complex64::new(h, 0.0),
            Complex64::new(h, 0.0),
        ],
    );
    let minus = CMat::from_row_slice(
        2,
        2,
        &[
            Complex64::new(h, 0.0),
            Complex64::new(-h, 0.0),
            Complex64::new(-h, 0.0),
            Complex64::new(h, 0.0),
        ],
    );
    MatrixPovm::new(
        vec![Op::new(plus).unwrap(), Op::new(minus).unwrap()],
        None,
    )
    .expect("Hadamard POVM is structurally valid")
}

/// Spectral decomposition check used by callers that need eigenvalues of an
/// element (e.g. reporting): ascending eigenvalues of a Hermitian operator.
pub fn eigenvalues(op: &Op) -> Vec<f64> {
    eigh(op.matrix()).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn op(rows: usize, entries: &[Complex64]) -> Op {
        Op::new(CMat::from_row_slice(rows, rows, entries)).unwrap()
    }

    #[test]
    fn computational_projectors_validate() {
        let p = projective_computational(2);
        let report = validate_povm(&p, &Tolerances::default());
        assert!(report.pass(), "report: {report:?}");
    }

    #[test]
    fn half_identity_pair_validates() {
        let half = op(2, &[c(0.5, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.5, 0.0)]);
        let p = MatrixPovm::new(vec![half.clone(), half], None).unwrap();
        assert!(validate_povm(&p, &Tolerances::default()).pass());
    }

    #[test]
    fn double_identity_fails_completeness() {
        let id = Op::identity(2);
        let p = MatrixPovm::new(vec![id.clone(), id], None).unwrap();
        let report = validate_povm(&p, &Tolerances::default());
        assert!(!report.pass());
        assert!(!report.completeness.pass);
        assert_abs_diff_eq!(report.completeness.worst, 1.0, epsilon = 1e-12);
        assert!(report.hermiticity.pass);
        assert!(report.positivity.pass);
    }

    #[test]
    fn povm_dimension_mismatch_rejected() {
        let a = Op::identity(2);
        let b = Op::identity(3);
        assert!(matches!(
            MatrixPovm::new(vec![a, b], None),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn null_index_out_of_range_rejected() {
        let p = MatrixPovm::new(vec![Op::identity(2)], Some(3));
        assert!(matches!(p, Err(Error::NullIndexOutOfRange { .. })));
    }

    #[test]
    fn fidelity_identical_state_is_one() {
        let rho = op(2, &[c(0.7, 0.0), c(0.1, 0.05), c(0.1, -0.05), c(0.3, 0.0)]);
        let f = fidelity(&rho, &rho).unwrap();
        assert_abs_diff_eq!(f, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fidelity_orthogonal_pure_states_is_zero() {
        let zero = op(2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let one = op(2, &[c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let f = fidelity(&zero, &one).unwrap();
        assert!(f.abs() < 1e-10, "expected ~0, got {f}");
    }

    #[test]
    fn fidelity_zero_vs_plus_is_inv_sqrt2() {
        let zero = op(2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let plus = op(2, &[c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0)]);
        let f = fidelity(&zero, &plus).unwrap();
        assert_abs_diff_eq!(f, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-10);
    }

    #[test]
    fn fidelity_rejects_indefinite_input() {
        let bad = op(2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.5, 0.0)]);
        let rho = op(2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(
            fidelity(&bad, &rho),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
    }

    #[test]
    fn overlap_identical_projectors_is_one() {
        let p = projective_computational(2);
        assert_abs_diff_eq!(max_overlap_c(&p, &p).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(overlap_cprime(&p, &p).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn overlap_mub_qubit_is_half() {
        let z = projective_computational(2);
        let x = projective_hadamard_qubit();
        assert_abs_diff_eq!(max_overlap_c(&x, &z).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(overlap_cprime(&x, &z).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn overlap_dimension_mismatch_rejected() {
        let a = projective_computational(2);
        let b = projective_computational(3);
        assert!(max_overlap_c(&a, &b).is_err());
        assert!(overlap_cprime(&a, &b).is_err());
        assert!(restricted_overlap(&a, &b).is_err());
    }

    #[test]
    fn restricted_overlap_orthogonal_informative_parts() {
        // X: informative |0⟩⟨0|, null |1⟩⟨1|; Z: informative |1⟩⟨1|, null |0⟩⟨0|.
        let p0 = op(2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let p1 = op(2, &[c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let x = MatrixPovm::new(vec![p0.clone(), p1.clone()], Some(1)).unwrap();
        let z = MatrixPovm::new(vec![p1, p0], Some(1)).unwrap();
        assert_abs_diff_eq!(restricted_overlap(&x, &z).unwrap(), 0.0, epsilon = 1e-12);
        // Including nulls, the overlap is maximal.
        assert_abs_diff_eq!(max_overlap_c(&x, &z).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn restricted_overlap_without_nulls_matches_full() {
        let z = projective_computational(2);
        let x = projective_hadamard_qubit();
        assert_abs_diff_eq!(
            restricted_overlap(&x, &z).unwrap(),
            max_overlap_c(&x, &z).unwrap(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn effective_povm_identity_filter_returns_inputs() {
        // Null element is zero: M = I, compression is a no-op.
        let z = projective_computational(2);
        let mut elements: Vec<Op> = z.elements().to_vec();
        elements.push(Op::zero(2));
        let p = MatrixPovm::new(elements, Some(2)).unwrap();
        let eff = effective_povm(&p).unwrap();
        assert_eq!(eff.support_dim, 2);
        assert_eq!(eff.dropped, 0);
        assert_eq!(eff.povm.len(), 2);
        for (orig, compressed) in z.elements().iter().zip(eff.povm.elements()) {
            // The support basis may permute/rephase axes; compare via the basis map.
            let mapped = eff.basis.adjoint() * orig.matrix() * &eff.basis;
            assert!(max_abs_entry(&(mapped - compressed.matrix())) < 1e-10);
        }
    }

    #[test]
    fn effective_povm_requires_null() {
        let z = projective_computational(2);
        assert!(matches!(effective_povm(&z), Err(Error::NullIndexMissing)));
    }

    #[test]
    fn effective_povm_projector_m_compresses() {
        // Qutrit: informative elements supported on span{|0⟩,|1⟩}, null = |2⟩⟨2|.
        let mut e0 = linalg::zeros(3);
        e0[(0, 0)] = c(1.0, 0.0);
        let mut e1 = linalg::zeros(3);
        e1[(1, 1)] = c(1.0, 0.0);
        let mut n = linalg::zeros(3);
        n[(2, 2)] = c(1.0, 0.0);
        let p = MatrixPovm::new(
            vec![Op::new(e0).unwrap(), Op::new(e1).unwrap(), Op::new(n).unwrap()],
            Some(2),
        )
        .unwrap();
        let eff = effective_povm(&p).unwrap();
        assert_eq!(eff.support_dim, 2);
        assert_eq!(eff.dropped, 1);
        let report = validate_povm(&eff.povm, &Tolerances::default());
        assert!(report.pass(), "effective POVM must validate: {report:?}");
    }

    #[test]
    fn effective_povm_rejects_full_null() {
        let p = MatrixPovm::new(vec![Op::zero(2), Op::identity(2)], Some(1)).unwrap();
        assert!(matches!(effective_povm(&p), Err(Error::FullyBlocked { .. })));
    }

    #[test]
    fn filtered_state_identity_m_is_identity_map() {
        let rho = DensityOp::from_matrix(CMat::from_row_slice(
            2,
            2,
            &[c(0.6, 0.0), c(0.2, 0.1), c(0.2, -0.1), c(0.4, 0.0)],
        ))
        .unwrap();
        let z = projective_computational(2);
        let mut elements: Vec<Op> = z.elements().to_vec();
        elements.push(Op::zero(2));
        let p = MatrixPovm::new(elements, Some(2)).unwrap();
        let filtered = filtered_state(&rho, &p).unwrap();
        assert!(max_abs_entry(&(filtered.matrix() - rho.matrix())) < 1e-10);
    }

    #[test]
    fn filtered_state_projector_m_is_projection() {
        // Qutrit state, M = projector onto span{|0⟩,|1⟩}.
        let mut raw = linalg::zeros(3);
        raw[(0, 0)] = c(0.5, 0.0);
        raw[(1, 1)] = c(0.25, 0.0);
        raw[(2, 2)] = c(0.25, 0.0);
        raw[(0, 1)] = c(0.1, 0.05);
        raw[(1, 0)] = c(0.1, -0.05);
        let rho = DensityOp::from_matrix(raw.clone()).unwrap();
        let mut e0 = linalg::zeros(3);
        e0[(0, 0)] = c(1.0, 0.0);
        let mut e1 = linalg::zeros(3);
        e1[(1, 1)] = c(1.0, 0.0);
        let mut n = linalg::zeros(3);
        n[(2, 2)] = c(1.0, 0.0);
        let p = MatrixPovm::new(
            vec![Op::new(e0).unwrap(), Op::new(e1).unwrap(), Op::new(n).unwrap()],
            Some(2),
        )
        .unwrap();
        let filtered = filtered_state(&rho, &p).unwrap();
        // PρP / Tr(ρP): diagonal block renormalized by 0.75.
        assert_abs_diff_eq!(filtered.matrix()[(0, 0)].re, 0.5 / 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(filtered.matrix()[(1, 1)].re, 0.25 / 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(filtered.matrix()[(2, 2)].re, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(filtered.matrix()[(0, 1)].re, 0.1 / 0.75, epsilon = 1e-12);
    }

    #[test]
    fn filtered_state_fully_blocked_errors() {
        // State lives entirely in the null support.
        let mut raw = linalg::zeros(2);
        raw[(1, 1)] = c(1.0, 0.0);
        let rho = DensityOp::from_matrix(raw).unwrap();
        let mut e0 = linalg::zeros(2);
        e0[(0, 0)] = c(1.0, 0.0);
        let mut n = linalg::zeros(2);
        n[(1, 1)] = c(1.0, 0.0);
        let p = MatrixPovm::new(vec![Op::new(e0).unwrap(), Op::new(n).unwrap()], Some(1)).unwrap();
        assert!(matches!(
            filtered_state(&rho, &p),
            Err(Error::FullyBlocked { .. })
        ));
    }

    #[test]
    fn density_op_rejects_bad_trace() {
        let m = CMat::from_row_slice(2, 2, &[c(0.9, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(
            DensityOp::from_matrix(m),
            Err(Error::NotUnitTrace { .. })
        ));
    }
}
