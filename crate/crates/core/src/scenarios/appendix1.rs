//! Randomized check that conditioning on surviving the shared blocking
//! element commutes with compressing the measurement: the filtered state
//! measured with the effective POVM reproduces the renormalized informative
//! outcome probabilities of the original POVM, for two measurements sharing
//! one blocking element.

use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::linalg::{hermitian_function, hermitize, identity, CMat};
use crate::operators::{
    effective_povm, filtered_state, outcome_probability, validate_povm, DensityOp, MatrixPovm, Op,
};
use crate::{Error, Result, Tolerances};

use super::{random_matrix, trial_rng};

const EQUALITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Appendix1Report {
    pub n_trials: usize,
    pub dim: usize,
    pub seed: u64,
    pub equality_tolerance: f64,
    /// Largest probability deviation seen across both measurements of every
    /// trial.
    pub max_deviation: f64,
    /// Trials with any outcome deviating beyond tolerance.
    pub n_equality_failures: usize,
    /// Trials whose effective measurement failed structural validation.
    pub n_validation_failures: usize,
}

impl Appendix1Report {
    pub fn pass(&self) -> bool {
        self.n_equality_failures == 0 && self.n_validation_failures == 0
    }
}

/// Random PSD contraction `0 ≤ N ≤ w·I` used as the shared blocking element.
/// Trial variety: exactly zero, rank one, and generic full rank.
fn random_blocking_element(dim: usize, kind: usize, rng: &mut ChaCha20Rng) -> CMat {
    match kind {
        0 => CMat::zeros(dim, dim),
        1 => {
            let g = random_matrix(dim, rng).column(0).into_owned();
            let p = &g * g.adjoint();
            let top = p.diagonal().iter().map(|z| z.re).sum::<f64>();
            p.unscale(top / 0.6)
        }
        _ => {
            let g = random_matrix(dim, rng);
            let p = &g * g.adjoint();
            let top = crate::linalg::eigh(&p).0.last().copied().unwrap_or(1.0);
            p.unscale(top / 0.6)
        }
    }
}

/// POVM whose informative part tiles `I − N` and whose last element is `N`.
fn povm_sharing_null(
    dim: usize,
    n_informative: usize,
    blocking: &CMat,
    rng: &mut ChaCha20Rng,
) -> Result<MatrixPovm> {
    let remainder = identity(dim) - blocking;
    let root = hermitian_function(&remainder, |l| l.max(0.0).sqrt());
    let raw: Vec<CMat> = (0..n_informative)
        .map(|_| {
            let g = random_matrix(dim, rng);
            &g * g.adjoint()
        })
        .collect();
    let mut total = CMat::zeros(dim, dim);
    for m in &raw {
        total += m;
    }
    let inv_sqrt = hermitian_function(&total, |l| 1.0 / l.max(1e-300).sqrt());
    let mut elements: Vec<Op> = raw
        .iter()
        .map(|m| {
            let tiled = &root * &inv_sqrt * m * &inv_sqrt * &root;
            Op::new(hermitize(&tiled))
        })
        .collect::<Result<_>>()?;
    elements.push(Op::new(blocking.clone())?);
    MatrixPovm::new(elements, Some(n_informative))
}

struct TrialOutcome {
    max_deviation: f64,
    validation_ok: bool,
}

fn check_one_povm(rho: &DensityOp, povm: &MatrixPovm) -> Result<TrialOutcome> {
    let tol = Tolerances::default();
    let eff = effective_povm(povm)?;
    let validation_ok = validate_povm(&eff.povm, &tol).pass();
    let conditioned = filtered_state(rho, povm)?;
    let pass_prob = crate::linalg::trace_re(&(rho.matrix() * povm.non_null_sum()));
    let compressed = eff.compress(conditioned.matrix());
    let mut max_deviation = 0.0_f64;
    for (k, i) in povm.informative_indices().into_iter().enumerate() {
        let direct = outcome_probability(rho, povm.element(i))? / pass_prob;
        let effective = crate::linalg::trace_re(&(&compressed * eff.povm.element(k).matrix()));
        max_deviation = max_deviation.max((effective - direct).abs());
    }
    Ok(TrialOutcome {
        max_deviation,
        validation_ok,
    })
}

/// Runs `n_trials` random instances at Hilbert space dimension `dim ≤ 6`.
/// Each instance draws one state, one blocking element, and two measurements
/// sharing it, then verifies the conditioned-probability equality for every
/// informative outcome of both measurements.
pub fn appendix1_equivalence_check(
    n_trials: usize,
    dim: usize,
    seed: u64,
) -> Result<Appendix1Report> {
    if dim < 2 || dim > 6 {
        return Err(Error::InvalidConfig(format!(
            "dimension must be in 2..=6, got {dim}"
        )));
    }
    if n_trials == 0 {
        return Err(Error::InvalidConfig("need at least one trial".into()));
    }
    let mut max_deviation = 0.0_f64;
    let mut n_equality_failures = 0usize;
    let mut n_validation_failures = 0usize;
    for k in 0..n_trials {
        let mut rng = trial_rng(seed, k as u64);
        let rho = DensityOp::from_matrix(super::random_density(dim, &mut rng))?;
        let blocking = random_blocking_element(dim, k % 3, &mut rng);
        let n_x = 2 + k % 2;
        let n_z = 2 + (k / 2) % 3;
        let x = povm_sharing_null(dim, n_x, &blocking, &mut rng)?;
        let z = povm_sharing_null(dim, n_z, &blocking, &mut rng)?;
        let mut trial_dev = 0.0_f64;
        let mut trial_valid = true;
        for povm in [&x, &z] {
            let out = check_one_povm(&rho, povm)?;
            trial_dev = trial_dev.max(out.max_deviation);
            trial_valid &= out.validation_ok;
        }
        max_deviation = max_deviation.max(trial_dev);
        if trial_dev > EQUALITY_TOL {
            n_equality_failures += 1;
        }
        if !trial_valid {
            n_validation_failures += 1;
        }
    }
    Ok(Appendix1Report {
        n_trials,
        dim,
        seed,
        equality_tolerance: EQUALITY_TOL,
        max_deviation,
        n_equality_failures,
        n_validation_failures,
    })
}
