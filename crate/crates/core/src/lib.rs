//! Entropic security bounds for measurements with finite detection windows.
//!
//! The crate is organized around the pipeline used by the scenario drivers:
//!
//! * [`linalg`] — dense complex-matrix primitives (Hermitian eigendecomposition,
//!   PSD square roots, singular values, trace norms).
//! * [`operators`] — POVMs and density operators on finite dimensions: validation,
//!   fidelity, worst-case overlaps, effective POVMs on the non-blocked subspace,
//!   filtered states.
//! * [`continuous`] — interval-binned time/frequency and quadrature measurement
//!   descriptors, and the band-limiting (Slepian) eigenvalue that gives the
//!   overlap of conjugate interval measurements.
//! * [`states`] — Gaussian photon-pair and two-mode-squeezed sources: marginal
//!   widths, null (outside-window) probabilities, binned joint distributions,
//!   channel loss.
//! * [`bounds`] — min-entropy bounds with and without null-outcome corrections,
//!   smoothing adjustments, classical conditional entropies, key rates.
//! * [`scenarios`] — end-to-end drivers: bound contours, key rate vs distance,
//!   quadrature saturation reports, the narrow-bin eavesdropping simulation, and
//!   the randomized bound falsifier.

#![forbid(unsafe_code)]

pub mod bounds;
pub mod continuous;
pub mod linalg;
pub mod operators;
pub mod povm_io;
pub mod scenarios;
pub mod states;

mod error;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Numerical tolerances used by validation routines.
///
/// The defaults are the contract values used throughout the test suite; every
/// field can be overridden for exploratory use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Max entrywise deviation from `A = A†` accepted as Hermitian.
    pub hermiticity: f64,
    /// Eigenvalues below `-psd` fail positive-semidefiniteness.
    pub psd: f64,
    /// Max entrywise deviation of a POVM element sum from the identity.
    pub completeness: f64,
    /// Eigenvalues of the non-blocked operator at or below this value are
    /// treated as outside the support when compressing.
    pub support: f64,
    /// Smallest probability treated as nonzero by conditioning operations.
    pub probability: f64,
    /// Max deviation of a density-operator trace from 1.
    pub trace: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hermiticity: 1e-9,
            psd: 1e-9,
            completeness: 1e-9,
            support: 1e-10,
            probability: 1e-12,
            trace: 1e-9,
        }
    }
}

/// Probabilities this small are reported as zero by the scenario drivers:
/// below the double-precision resolution of `1 - p`, a tail mass is
/// indistinguishable from zero in every downstream formula.
pub const MACHINE_ZERO_PROB: f64 = 2.220446049250313e-16; // 2^-52

/// Snap a probability below [`MACHINE_ZERO_PROB`] to exactly zero.
pub fn snap_machine_zero(p: f64) -> f64 {
    if p < MACHINE_ZERO_PROB {
        0.0
    } else {
        p
    }
}
