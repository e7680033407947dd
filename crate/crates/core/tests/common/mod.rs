//! Helpers shared by the integration test binaries: deterministic random
//! draws, independently written quadrature oracles, and POVM constructors
//! that go through the public API only.

#![allow(dead_code)]

use eurlab::linalg::{hermitian_function, CMat};
use eurlab::operators::{MatrixPovm, Op};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erfc;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn gaussian_pdf(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    (-0.5 * z * z).exp() / (std * (2.0 * std::f64::consts::PI).sqrt())
}

/// Composite trapezoid rule with `n` intervals.
pub fn trapezoid(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    assert!(hi > lo && n >= 2);
    let h = (hi - lo) / n as f64;
    let mut acc = 0.5 * (f(lo) + f(hi));
    for i in 1..n {
        acc += f(lo + h * i as f64);
    }
    acc * h
}

/// Probability mass of `N(mean, std)` inside `[lo, hi]`, integrated with the
/// trapezoid rule. The quadrature interval is clipped to `mean ± 12 std`,
/// which discards less than 1e-32 of mass.
pub fn trapezoid_gaussian_mass(mean: f64, std: f64, lo: f64, hi: f64, n: usize) -> f64 {
    let lo = lo.max(mean - 12.0 * std);
    let hi = hi.min(mean + 12.0 * std);
    if hi <= lo {
        return 0.0;
    }
    trapezoid(|x| gaussian_pdf(x, mean, std), lo, hi, n)
}

pub fn random_complex_matrix(dim: usize, rng: &mut ChaCha20Rng) -> CMat {
    CMat::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

pub fn random_density(dim: usize, rng: &mut ChaCha20Rng) -> CMat {
    let g = random_complex_matrix(dim, rng);
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    m.unscale(tr)
}

/// Random POVM from normalized Gram matrices, with an optional weighted
/// null element appended last.
pub fn random_povm(
    dim: usize,
    n_informative: usize,
    null_weight: Option<f64>,
    rng: &mut ChaCha20Rng,
) -> MatrixPovm {
    let mut raw: Vec<CMat> = (0..n_informative)
        .map(|_| {
            let g = random_complex_matrix(dim, rng);
            &g * g.adjoint()
        })
        .collect();
    if let Some(w) = null_weight {
        let g = random_complex_matrix(dim, rng);
        raw.push((&g * g.adjoint()).scale(w));
    }
    let mut total = CMat::zeros(dim, dim);
    for m in &raw {
        total += m;
    }
    let inv_sqrt = hermitian_function(&total, |l| 1.0 / l.max(1e-300).sqrt());
    let elements: Vec<Op> = raw
        .iter()
        .map(|m| Op::new(&inv_sqrt * m * &inv_sqrt).expect("square matrix"))
        .collect();
    MatrixPovm::new(elements, null_weight.map(|_| n_informative)).expect("normalized POVM")
}

/// Haar-ish random unitary from the QR factor of a Gaussian matrix.
pub fn random_unitary(dim: usize, rng: &mut ChaCha20Rng) -> CMat {
    let g = random_complex_matrix(dim, rng);
    let qr = g.qr();
    qr.q()
}
