//! End-to-end drivers: contour data, key-rate scans, saturation reports,
//! attack simulation, and numerical falsification runs.
//!
//! Every driver is a pure function from a config to a report struct; reports
//! serialize to JSON and render their data tables as CSV, so the frontend
//! only does file plumbing. All randomness flows through a seeded, streamed
//! generator: trial `k` draws from stream `k` of the run seed, which keeps
//! reports bit-stable for a fixed seed no matter how trials are scheduled.

mod appendix1;
mod attack;
mod cv;
mod falsifier;
mod fig2;
mod keyrate;

pub use appendix1::{appendix1_equivalence_check, Appendix1Report};
pub use attack::{nunn_attack_sim, NunnAttackReport};
pub use cv::{cv_saturation_report, CvSaturationReport};
pub use falsifier::{bound_falsifier, FalsifierDims, FalsifierReport};
pub use fig2::{equal_null_crossing, fig2_contour, positive_frontier, Fig2Report};
pub use keyrate::{tf_keyrate_scan, KeyRateRow, KeyRateScanReport};

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::bounds::SmoothParams;
use crate::continuous::IntervalBinSpec;
use crate::linalg::{hermitian_function, CMat, CVec};
use crate::operators::{MatrixPovm, Op};
use crate::states::{
    wavelength_to_angular_frequency, ChannelModel, GaussianBiphoton, TmsvSpec,
};
use crate::{Error, Result};

/// Source model of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceSpec {
    Biphoton(GaussianBiphoton),
    Tmsv(TmsvSpec),
}

/// Everything a scenario driver needs: source, binnings, channel, distance
/// grid, smoothing, an optional overlap override, and the run seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub source: SourceSpec,
    pub time_bins: IntervalBinSpec,
    pub frequency_bins: IntervalBinSpec,
    pub channel: ChannelModel,
    pub distances_km: Vec<f64>,
    pub smoothing: SmoothParams,
    pub c_less_override: Option<f64>,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.distances_km.is_empty() {
            return Err(Error::InvalidConfig(
                "distance list must be non-empty".into(),
            ));
        }
        for w in self.distances_km.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidConfig(format!(
                    "distances must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if let Some(c) = self.c_less_override {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::InvalidConfig(format!(
                    "overlap override must be in [0,1], got {c}"
                )));
            }
        }
        Ok(())
    }

    /// Published telecom operating point: 20 ps time bins over half the
    /// 55.6 MHz period, frequency bins sized so the bin-pair overlap is
    /// 10⁻³, a 9-sigma frequency window, 0.2 dB/km fiber.
    pub fn telecom_default() -> Self {
        let src = GaussianBiphoton::telecom_default();
        let t_c = 0.5 / 55.6e6;
        let delta_t = 20e-12;
        let time_bins = IntervalBinSpec::tile(delta_t, -t_c, t_c)
            .expect("default time binning is valid");
        let delta_omega = 2.0 * std::f64::consts::PI * 1e-3 / delta_t;
        let (freq_std, _) = src.marginal_stds();
        let omega_o = src.omega_o();
        let half_window = 9.0 * freq_std;
        let frequency_bins =
            IntervalBinSpec::tile(delta_omega, omega_o - half_window, omega_o + half_window)
                .expect("default frequency binning is valid");
        Self {
            source: SourceSpec::Biphoton(src),
            time_bins,
            frequency_bins,
            channel: ChannelModel::new(0.2, 0.0).expect("default channel is valid"),
            distances_km: (0..=20).map(|k| 0.25 * k as f64).collect(),
            smoothing: SmoothParams { epsilon: 0.0 },
            c_less_override: None,
            seed: 0x5eed_1234_abcd_0001,
        }
    }

    /// The full frequency filter window of the published setup, in absolute
    /// rad/s (wavelength band 1520 to 1610 nm).
    pub fn telecom_filter_window() -> (f64, f64) {
        (
            wavelength_to_angular_frequency(1610e-9),
            wavelength_to_angular_frequency(1520e-9),
        )
    }
}

/// Deterministic per-trial generator: stream `index` of the run seed.
pub(crate) fn trial_rng(seed: u64, index: u64) -> ChaCha20Rng {
    use rand::SeedableRng;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    rng
}

pub(crate) fn random_complex_gaussian(rng: &mut ChaCha20Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

pub(crate) fn random_matrix(dim: usize, rng: &mut ChaCha20Rng) -> CMat {
    CMat::from_fn(dim, dim, |_, _| random_complex_gaussian(rng))
}

/// Random full-rank density matrix `GG†/tr`.
pub(crate) fn random_density(dim: usize, rng: &mut ChaCha20Rng) -> CMat {
    let g = random_matrix(dim, rng);
    let m = &g * g.adjoint();
    let tr: f64 = (0..dim).map(|i| m[(i, i)].re).sum();
    m.unscale(tr)
}

/// Random POVM with `n_informative` elements plus, when a weight is given, a
/// trailing designated null whose raw mass is scaled by that weight before
/// the completeness normalization (weight 0 gives an exactly zero null
/// element). Weight `None` gives a POVM without a designated null.
pub(crate) fn random_povm(
    dim: usize,
    n_informative: usize,
    null_weight: Option<f64>,
    rng: &mut ChaCha20Rng,
) -> MatrixPovm {
    let mut raw: Vec<CMat> = (0..n_informative)
        .map(|_| {
            let g = random_matrix(dim, rng);
            &g * g.adjoint()
        })
        .collect();
    if let Some(w) = null_weight {
        let g = random_matrix(dim, rng);
        raw.push((&g * g.adjoint()).scale(w));
    }
    let mut total = CMat::zeros(dim, dim);
    for m in &raw {
        total += m;
    }
    let inv_sqrt = hermitian_function(&total, |l| 1.0 / l.max(1e-300).sqrt());
    let elements: Vec<Op> = raw
        .iter()
        .map(|m| Op::new(&inv_sqrt * m * &inv_sqrt).expect("conjugation keeps squareness"))
        .collect();
    let null_index = null_weight.map(|_| n_informative);
    MatrixPovm::new(elements, null_index).expect("normalized family is a POVM")
}

/// Pure three-party test state with small local dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct TripartiteTestState {
    dims: (usize, usize, usize),
    amps: CVec,
}

impl TripartiteTestState {
    /// Amplitudes indexed as `a·(d_B·d_E) + b·d_E + e`; must be normalized
    /// to 1 within 1e-12.
    pub fn new(dims: (usize, usize, usize), amps: CVec) -> Result<Self> {
        let (da, db, de) = dims;
        if da == 0 || db == 0 || de == 0 || da > 4 || db > 4 || de > 4 {
            return Err(Error::InvalidParameter(format!(
                "local dimensions must be in 1..=4, got {dims:?}"
            )));
        }
        if amps.len() != da * db * de {
            return Err(Error::DimensionMismatch {
                left: amps.len(),
                right: da * db * de,
                context: "tripartite amplitude vector",
            });
        }
        let norm = amps.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "state norm is {norm}, expected 1"
            )));
        }
        Ok(Self { dims, amps })
    }

    pub fn random(dims: (usize, usize, usize), rng: &mut ChaCha20Rng) -> Self {
        let n = dims.0 * dims.1 * dims.2;
        let mut amps = CVec::from_fn(n, |_, _| random_complex_gaussian(rng));
        let norm = amps.norm();
        amps /= Complex64::new(norm, 0.0);
        // Renormalize once more against accumulated rounding.
        let norm2 = amps.norm();
        amps /= Complex64::new(norm2, 0.0);
        Self::new(dims, amps).expect("normalized random state is valid")
    }

    /// Product state `|a⟩ ⊗ |be⟩`: the first party is uncorrelated with the
    /// rest.
    pub fn product(a: &CVec, be: &CVec, dims: (usize, usize, usize)) -> Result<Self> {
        let (da, db, de) = dims;
        if a.len() != da || be.len() != db * de {
            return Err(Error::DimensionMismatch {
                left: a.len() * be.len(),
                right: da * db * de,
                context: "product state factors",
            });
        }
        let mut amps = CVec::zeros(da * db * de);
        for ia in 0..da {
            for ibe in 0..db * de {
                amps[ia * db * de + ibe] = a[ia] * be[ibe];
            }
        }
        let norm = amps.norm();
        amps /= Complex64::new(norm, 0.0);
        Self::new(dims, amps)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    fn index(&self, a: usize, b: usize, e: usize) -> usize {
        (a * self.dims.1 + b) * self.dims.2 + e
    }

    /// `Tr[(op_A ⊗ 1 ⊗ 1) ρ]`.
    pub fn first_party_prob(&self, op_a: &CMat) -> f64 {
        let (da, db, de) = self.dims;
        let mut total = Complex64::new(0.0, 0.0);
        for a in 0..da {
            for a2 in 0..da {
                let mut inner = Complex64::new(0.0, 0.0);
                for b in 0..db {
                    for e in 0..de {
                        inner += self.amps[self.index(a2, b, e)]
                            * self.amps[self.index(a, b, e)].conj();
                    }
                }
                total += op_a[(a, a2)] * inner;
            }
        }
        total.re
    }

    /// Third-party operator `Tr_{AB}[(op_A ⊗ 1 ⊗ 1) ρ]`, subnormalized to the
    /// outcome probability.
    pub fn third_party_operator(&self, op_a: &CMat) -> CMat {
        let (da, db, de) = self.dims;
        let mut out = CMat::zeros(de, de);
        for e in 0..de {
            for e2 in 0..de {
                let mut total = Complex64::new(0.0, 0.0);
                for a in 0..da {
                    for a2 in 0..da {
                        let mut inner = Complex64::new(0.0, 0.0);
                        for b in 0..db {
                            inner += self.amps[self.index(a2, b, e)]
                                * self.amps[self.index(a, b, e2)].conj();
                        }
                        total += op_a[(a, a2)] * inner;
                    }
                }
                out[(e, e2)] = total;
            }
        }
        out
    }

    /// Second-party operator `Tr_{AE}[(op_A ⊗ 1 ⊗ 1) ρ]`, subnormalized to
    /// the outcome probability.
    pub fn second_party_operator(&self, op_a: &CMat) -> CMat {
        let (da, db, de) = self.dims;
        let mut out = CMat::zeros(db, db);
        for b in 0..db {
            for b2 in 0..db {
                let mut total = Complex64::new(0.0, 0.0);
                for a in 0..da {
                    for a2 in 0..da {
                        let mut inner = Complex64::new(0.0, 0.0);
                        for e in 0..de {
                            inner += self.amps[self.index(a2, b, e)]
                                * self.amps[self.index(a, b2, e)].conj();
                        }
                        total += op_a[(a, a2)] * inner;
                    }
                }
                out[(b, b2)] = total;
            }
        }
        out
    }
}

/// Formats a float for CSV/report output: 17 significant digits, which
/// round-trips every double exactly.
pub(crate) fn fmt_g17(x: f64) -> String {
    format!("{x:.16e}")
}
