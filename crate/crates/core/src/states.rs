//! Source models and outcome statistics.
//!
//! The photon-pair source is a two-party Gaussian wavefunction, tight in the
//! sum of detunings (scale `1/σ_coh`) and broad in their difference (scale
//! `1/σ_cor`); its arrival-time transform is tight in the time difference and
//! broad in the sum. Everything downstream needs only three kinds of numbers:
//! single-party marginal widths, tail (null-outcome) masses outside a
//! detection window, and binned two-party joint distributions. Joints are
//! built by a banded integrator: the conditional spread of one party given
//! the other covers only a few bins, so cells far from the correlation ridge
//! are exactly zero and the lossy mixture stays in a band-plus-rank-one form
//! that large grids can afford.

use nalgebra::DMatrix;
use serde::Serialize;
use statrs::function::erf::erfc;

use crate::continuous::{gauss_legendre, IntervalBinSpec};
use crate::{Error, Result};

/// Exact speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// `ω = 2πc/λ` with exact `c`.
pub fn wavelength_to_angular_frequency(lambda_m: f64) -> f64 {
    2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / lambda_m
}

/// `P(Z > z)` for a standard normal.
fn std_normal_upper_tail(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// `Φ(z)` for a standard normal.
fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Mass of `N(mu, sigma)` outside `[lo, hi]`.
fn gaussian_outside_mass(mu: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    std_normal_upper_tail((hi - mu) / sigma) + std_normal_upper_tail((mu - lo) / sigma)
}

/// Mass of `N(mu, sigma)` inside `[lo, hi]`.
fn gaussian_inside_mass(mu: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    (std_normal_cdf((hi - mu) / sigma) - std_normal_cdf((lo - mu) / sigma)).max(0.0)
}

/// Which single-party arrival-time width the source reports.
///
/// The literal transform of the two-party wavefunction gives a width close to
/// `σ_coh`; the calibrated convention halves the collective (sum) timescale,
/// which reproduces the published null probability for the 55.6 MHz window.
/// Both are kept because the discrepancy is documented, not hidden.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeStdConvention {
    DirectEq11,
    PaperCalibrated,
}

/// Gaussian photon-pair source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianBiphoton {
    sigma_coh: f64,
    sigma_cor: f64,
    omega_o: f64,
    time_std_convention: TimeStdConvention,
}

/// Std of the single-party detuning marginal: `(1/4)·√(4/σ_cor² + 1/σ_coh²)`.
/// Free function so the `σ_cor → ∞` limit can be probed outside the type's
/// `σ_coh > σ_cor` invariant.
pub fn frequency_marginal_std(sigma_coh: f64, sigma_cor: f64) -> f64 {
    0.25 * (4.0 / (sigma_cor * sigma_cor) + 1.0 / (sigma_coh * sigma_coh)).sqrt()
}

/// Std of the single-party arrival-time marginal under the given convention.
pub fn time_marginal_std(sigma_coh: f64, sigma_cor: f64, conv: TimeStdConvention) -> f64 {
    let s_plus = match conv {
        TimeStdConvention::DirectEq11 => sigma_coh,
        TimeStdConvention::PaperCalibrated => sigma_coh / 2.0,
    };
    let s_minus = sigma_cor / 2.0;
    (s_plus * s_plus + s_minus * s_minus).sqrt()
}

impl GaussianBiphoton {
    pub fn new(
        sigma_coh: f64,
        sigma_cor: f64,
        omega_o: f64,
        time_std_convention: TimeStdConvention,
    ) -> Result<Self> {
        if !(sigma_cor > 0.0) || !(sigma_coh > sigma_cor) {
            return Err(Error::InvalidParameter(format!(
                "source needs sigma_coh > sigma_cor > 0, got {sigma_coh} and {sigma_cor}"
            )));
        }
        if !omega_o.is_finite() || omega_o < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "central frequency must be finite and non-negative, got {omega_o}"
            )));
        }
        Ok(Self {
            sigma_coh,
            sigma_cor,
            omega_o,
            time_std_convention,
        })
    }

    /// Published operating point: 6 ns / 2 ps at the 1550 nm telecom center,
    /// calibrated time convention.
    pub fn telecom_default() -> Self {
        Self::new(
            6e-9,
            2e-12,
            wavelength_to_angular_frequency(1550e-9),
            TimeStdConvention::PaperCalibrated,
        )
        .expect("default parameters satisfy the invariants")
    }

    pub fn sigma_coh(&self) -> f64 {
        self.sigma_coh
    }

    pub fn sigma_cor(&self) -> f64 {
        self.sigma_cor
    }

    pub fn omega_o(&self) -> f64 {
        self.omega_o
    }

    pub fn time_std_convention(&self) -> TimeStdConvention {
        self.time_std_convention
    }

    /// Single-party `(frequency std rad/s, time std s)`; both parties share
    /// the same marginals by symmetry.
    pub fn marginal_stds(&self) -> (f64, f64) {
        (
            frequency_marginal_std(self.sigma_coh, self.sigma_cor),
            time_marginal_std(self.sigma_coh, self.sigma_cor, self.time_std_convention),
        )
    }

    /// Arrival-time pair statistics in `u± = (t_A ± t_B)/2` coordinates.
    pub fn time_pair(&self) -> CorrelatedPair {
        let s_plus = match self.time_std_convention {
            TimeStdConvention::DirectEq11 => self.sigma_coh,
            TimeStdConvention::PaperCalibrated => self.sigma_coh / 2.0,
        };
        CorrelatedPair {
            sigma_plus: s_plus,
            sigma_minus: self.sigma_cor / 2.0,
            mean: 0.0,
        }
    }

    /// Frequency pair statistics in `u± = ((ω_A ± ω_B)/2 − offsets)` form;
    /// both marginals are centered on the carrier `omega_o`.
    pub fn frequency_pair(&self) -> CorrelatedPair {
        CorrelatedPair {
            sigma_plus: 1.0 / (4.0 * self.sigma_coh),
            sigma_minus: 1.0 / (2.0 * self.sigma_cor),
            mean: self.omega_o,
        }
    }
}

/// Probability that a single-party frequency outcome falls outside
/// `[range_lo, range_hi]` (absolute rad/s; the window must contain the
/// carrier).
pub fn null_prob_frequency(src: &GaussianBiphoton, range_lo: f64, range_hi: f64) -> Result<f64> {
    if !(range_lo < range_hi) {
        return Err(Error::InvalidParameter(format!(
            "degenerate frequency range [{range_lo}, {range_hi}]"
        )));
    }
    if src.omega_o < range_lo || src.omega_o > range_hi {
        return Err(Error::InvalidParameter(format!(
            "frequency range [{range_lo}, {range_hi}] does not contain the carrier {}",
            src.omega_o
        )));
    }
    let (freq_std, _) = src.marginal_stds();
    Ok(gaussian_outside_mass(src.omega_o, freq_std, range_lo, range_hi).clamp(0.0, 1.0))
}

/// Probability that a single-party arrival time falls outside `[-t_c, t_c]`.
pub fn null_prob_time(src: &GaussianBiphoton, t_c: f64) -> Result<f64> {
    if !(t_c > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "time window half-width must be positive, got {t_c}"
        )));
    }
    let (_, time_std) = src.marginal_stds();
    Ok(gaussian_outside_mass(0.0, time_std, -t_c, t_c).clamp(0.0, 1.0))
}

/// Variance assigned to the vacuum state in quadrature units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VacuumVarianceConvention {
    UnitVariance,
    HalfVariance,
}

/// Two-mode-squeezed source described by its anti-squeezing level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TmsvSpec {
    antisqueezing_db: f64,
    vacuum_variance_convention: VacuumVarianceConvention,
}

impl TmsvSpec {
    pub fn new(antisqueezing_db: f64, convention: VacuumVarianceConvention) -> Result<Self> {
        if !(antisqueezing_db >= 0.0) || !antisqueezing_db.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "anti-squeezing must be a non-negative dB value, got {antisqueezing_db}"
            )));
        }
        Ok(Self {
            antisqueezing_db,
            vacuum_variance_convention: convention,
        })
    }

    pub fn antisqueezing_db(&self) -> f64 {
        self.antisqueezing_db
    }

    pub fn convention(&self) -> VacuumVarianceConvention {
        self.vacuum_variance_convention
    }

    /// Single-quadrature variance: `10^(dB/10) ×` vacuum variance.
    pub fn quadrature_variance(&self) -> f64 {
        let vac = match self.vacuum_variance_convention {
            VacuumVarianceConvention::UnitVariance => 1.0,
            VacuumVarianceConvention::HalfVariance => 0.5,
        };
        10f64.powf(self.antisqueezing_db / 10.0) * vac
    }
}

/// Probability that a centered quadrature outcome lands outside the detector
/// range (saturation). The range must contain 0.
pub fn tmsv_saturation_prob(spec: &TmsvSpec, range_lo: f64, range_hi: f64) -> Result<f64> {
    if !(range_lo < 0.0 && range_hi > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "quadrature range [{range_lo}, {range_hi}] must contain 0"
        )));
    }
    let std = spec.quadrature_variance().sqrt();
    Ok(gaussian_outside_mass(0.0, std, range_lo, range_hi).clamp(0.0, 1.0))
}

/// Constant-dB/km fiber loss over a fixed distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelModel {
    loss_db_per_km: f64,
    distance_km: f64,
}

impl ChannelModel {
    pub fn new(loss_db_per_km: f64, distance_km: f64) -> Result<Self> {
        if !(loss_db_per_km >= 0.0) || !loss_db_per_km.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "loss must be non-negative dB/km, got {loss_db_per_km}"
            )));
        }
        if !(distance_km >= 0.0) || !distance_km.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "distance must be non-negative km, got {distance_km}"
            )));
        }
        Ok(Self {
            loss_db_per_km,
            distance_km,
        })
    }

    /// Lossless channel.
    pub fn identity() -> Self {
        Self {
            loss_db_per_km: 0.0,
            distance_km: 0.0,
        }
    }

    pub fn loss_db_per_km(&self) -> f64 {
        self.loss_db_per_km
    }

    pub fn distance_km(&self) -> f64 {
        self.distance_km
    }

    /// `η = 10^(−dB·km/10)`, in `(0, 1]`.
    pub fn transmission(&self) -> f64 {
        10f64.powf(-self.loss_db_per_km * self.distance_km / 10.0)
    }

    pub fn at_distance(&self, distance_km: f64) -> Result<Self> {
        Self::new(self.loss_db_per_km, distance_km)
    }
}

/// Null probability seen behind a lossy channel: `1 − η(1 − p_null)`.
pub fn apply_loss_to_null_prob(p_null: f64, channel: &ChannelModel) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_null) {
        return Err(Error::InvalidParameter(format!(
            "null probability must be in [0,1], got {p_null}"
        )));
    }
    let eta = channel.transmission();
    Ok((1.0 - eta * (1.0 - p_null)).clamp(0.0, 1.0))
}

/// Outcome label of one side of a binned joint distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeLabel {
    Bin(usize),
    Null,
}

impl std::fmt::Display for OutcomeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OutcomeLabel::Bin(i) => write!(f, "bin{i}"),
            OutcomeLabel::Null => write!(f, "null"),
        }
    }
}

/// Dense two-party outcome distribution; rows are the first party.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    row_labels: Vec<OutcomeLabel>,
    col_labels: Vec<OutcomeLabel>,
    probs: DMatrix<f64>,
}

impl JointDistribution {
    /// Validates label/shape agreement, non-negativity, and unit total mass
    /// (within 1e-12).
    pub fn new(
        row_labels: Vec<OutcomeLabel>,
        col_labels: Vec<OutcomeLabel>,
        probs: DMatrix<f64>,
    ) -> Result<Self> {
        if row_labels.len() != probs.nrows() || col_labels.len() != probs.ncols() {
            return Err(Error::DimensionMismatch {
                left: row_labels.len(),
                right: probs.nrows(),
                context: "joint distribution labels vs matrix shape",
            });
        }
        let mut total = 0.0;
        for &p in probs.iter() {
            if !p.is_finite() || p < -1e-15 {
                return Err(Error::InvalidParameter(format!(
                    "joint distribution entries must be non-negative, got {p}"
                )));
            }
            total += p.max(0.0);
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "joint distribution mass is {total}, expected 1"
            )));
        }
        let probs = probs.map(|p| p.max(0.0));
        Ok(Self {
            row_labels,
            col_labels,
            probs,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.probs.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.probs.ncols()
    }

    pub fn row_labels(&self) -> &[OutcomeLabel] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[OutcomeLabel] {
        &self.col_labels
    }

    pub fn probs(&self) -> &DMatrix<f64> {
        &self.probs
    }

    pub fn row_marginal(&self) -> Vec<f64> {
        (0..self.probs.nrows())
            .map(|i| self.probs.row(i).sum())
            .collect()
    }

    pub fn col_marginal(&self) -> Vec<f64> {
        (0..self.probs.ncols())
            .map(|j| self.probs.column(j).sum())
            .collect()
    }

    pub fn null_row_index(&self) -> Option<usize> {
        self.row_labels.iter().position(|l| *l == OutcomeLabel::Null)
    }

    pub fn null_col_index(&self) -> Option<usize> {
        self.col_labels.iter().position(|l| *l == OutcomeLabel::Null)
    }

    /// Drops the first party's null row and renormalizes: the distribution
    /// conditioned on an informative first-party outcome. Returns the
    /// conditioned distribution and the dropped mass.
    pub fn condition_on_informative_rows(&self) -> Result<(JointDistribution, f64)> {
        let Some(null_row) = self.null_row_index() else {
            return Ok((self.clone(), 0.0));
        };
        let dropped: f64 = self.probs.row(null_row).sum();
        let kept = 1.0 - dropped;
        if keep_mass_too_small(kept) {
            return Err(Error::FullyBlocked { trace: kept });
        }
        let rows: Vec<usize> = (0..self.probs.nrows()).filter(|&r| r != null_row).collect();
        let mut m = DMatrix::zeros(rows.len(), self.probs.ncols());
        for (ri, &r) in rows.iter().enumerate() {
            for c in 0..self.probs.ncols() {
                m[(ri, c)] = self.probs[(r, c)];
            }
        }
        let total: f64 = m.iter().sum();
        m /= total;
        let labels = rows.iter().map(|&r| self.row_labels[r]).collect();
        Ok((
            JointDistribution::new(labels, self.col_labels.clone(), m)?,
            dropped,
        ))
    }

    /// CSV rows `row_label,col_label,probability` with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row_label,col_label,probability\n");
        for (i, rl) in self.row_labels.iter().enumerate() {
            for (j, cl) in self.col_labels.iter().enumerate() {
                out.push_str(&format!("{rl},{cl},{:.16e}\n", self.probs[(i, j)]));
            }
        }
        out
    }
}

fn keep_mass_too_small(mass: f64) -> bool {
    mass <= crate::Tolerances::default().probability
}

/// Two-party Gaussian in `u± = ((a ± b)/2 − shifts)` coordinates: `u+` and
/// `u−` are independent and centered, `a` and `b` share the mean `mean`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelatedPair {
    pub sigma_plus: f64,
    pub sigma_minus: f64,
    pub mean: f64,
}

impl CorrelatedPair {
    pub fn marginal_std(&self) -> f64 {
        (self.sigma_plus * self.sigma_plus + self.sigma_minus * self.sigma_minus).sqrt()
    }

    /// Pearson correlation of `(a, b)`: positive when the collective scale
    /// dominates, negative when the difference scale does.
    pub fn correlation(&self) -> f64 {
        let vp = self.sigma_plus * self.sigma_plus;
        let vm = self.sigma_minus * self.sigma_minus;
        (vp - vm) / (vp + vm)
    }

    /// Std of `b` given `a` (equal to the std of `a` given `b`).
    pub fn conditional_std(&self) -> f64 {
        2.0 * self.sigma_plus * self.sigma_minus / self.marginal_std()
    }
}

/// Truth-level banded joint: probabilities of both parties' bins before any
/// loss, with window-complement (and inter-bin gap) mass accounted to nulls.
struct BandedTruth {
    n_a: usize,
    n_b: usize,
    /// Per Alice bin: first Bob index of the band and the band cell masses.
    rows: Vec<(usize, Vec<f64>)>,
    /// `T(i, ∅_B)` per Alice bin.
    bob_null: Vec<f64>,
    /// `T(∅_A, j)` per Bob bin.
    alice_null: Vec<f64>,
    /// `T(∅_A, ∅_B)`.
    both_null: f64,
}

const BAND_SIGMAS: f64 = 9.0;
const CELL_QUAD_POINTS: usize = 24;

fn banded_truth(
    pair: &CorrelatedPair,
    bins_a: &IntervalBinSpec,
    bins_b: &IntervalBinSpec,
) -> BandedTruth {
    let n_a = bins_a.n_bins();
    let n_b = bins_b.n_bins();
    let sigma = pair.marginal_std();
    let rho = pair.correlation();
    let s_c = pair.conditional_std();
    let mu = pair.mean;

    // Bob bins sorted by center for band lookup.
    let mut b_order: Vec<usize> = (0..n_b).collect();
    b_order.sort_by(|&i, &j| {
        bins_b.centers()[i]
            .partial_cmp(&bins_b.centers()[j])
            .unwrap()
    });
    let b_centers_sorted: Vec<f64> = b_order.iter().map(|&j| bins_b.centers()[j]).collect();

    let (gl_nodes, gl_weights) = gauss_legendre(CELL_QUAD_POINTS);

    let p_b_exact: Vec<f64> = (0..n_b)
        .map(|j| {
            let (lo, hi) = bins_b.bin_edges(j);
            gaussian_inside_mass(mu, sigma, lo, hi)
        })
        .collect();

    // Conditional mean of b given a.
    let cond_mean = |a: f64| mu + rho * (a - mu);

    // Mass of `a ∈ [a1,a2], b ∈ [b1,b2]`, integrating the a-subinterval where
    // the conditional density can reach `[b1,b2]`. The conditional cell mass
    // switches on and off over the scale `s_c`, which can be orders of
    // magnitude below the bin width, so the integral is split at those
    // transition points and each smooth segment gets its own rule.
    let cell_mass = |a1: f64, a2: f64, b1: f64, b2: f64| -> f64 {
        let (mut lo, mut hi) = (a1, a2);
        let mut cuts: Vec<f64> = Vec::new();
        if rho.abs() > 1e-14 {
            let r1 = mu + (b1 - BAND_SIGMAS * s_c - mu) / rho;
            let r2 = mu + (b2 + BAND_SIGMAS * s_c - mu) / rho;
            let (rlo, rhi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
            lo = lo.max(rlo);
            hi = hi.min(rhi);
            if lo >= hi {
                return 0.0;
            }
            const EDGE_SIGMAS: f64 = 12.0;
            for beta in [b1, b2] {
                for side in [-EDGE_SIGMAS, EDGE_SIGMAS] {
                    let a_pt = mu + (beta + side * s_c - mu) / rho;
                    if a_pt > lo && a_pt < hi {
                        cuts.push(a_pt);
                    }
                }
            }
            cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        }
        let mut segment_starts = vec![lo];
        segment_starts.extend(cuts);
        let mut total = 0.0;
        for (s, seg_lo) in segment_starts.iter().enumerate() {
            let seg_hi = *segment_starts.get(s + 1).unwrap_or(&hi);
            if seg_hi <= *seg_lo {
                continue;
            }
            let half = (seg_hi - seg_lo) / 2.0;
            let mid = (seg_lo + seg_hi) / 2.0;
            for (x, w) in gl_nodes.iter().zip(&gl_weights) {
                let a = mid + half * x;
                let z = (a - mu) / sigma;
                let density =
                    (-0.5 * z * z).exp() / ((2.0 * std::f64::consts::PI).sqrt() * sigma);
                let m = cond_mean(a);
                let cond = std_normal_cdf((b2 - m) / s_c) - std_normal_cdf((b1 - m) / s_c);
                total += w * half * density * cond.max(0.0);
            }
        }
        total
    };

    // Band of Bob bins reachable from an a-interval.
    let band_of = |a1: f64, a2: f64| -> (usize, usize) {
        let m1 = cond_mean(a1);
        let m2 = cond_mean(a2);
        let (mlo, mhi) = if m1 <= m2 { (m1, m2) } else { (m2, m1) };
        let reach_lo = mlo - BAND_SIGMAS * s_c - bins_b.width();
        let reach_hi = mhi + BAND_SIGMAS * s_c + bins_b.width();
        let start = b_centers_sorted.partition_point(|&c| c < reach_lo);
        let end = b_centers_sorted.partition_point(|&c| c <= reach_hi);
        (start, end)
    };

    // One integration region on Alice's axis: its masses across Bob's bins
    // (band only) and the remainder going to Bob's null.
    let region_row = |a1: f64, a2: f64| -> (usize, Vec<f64>, f64) {
        let p_region = gaussian_inside_mass(mu, sigma, a1, a2);
        let (start, end) = band_of(a1, a2);
        let mut masses = vec![0.0; end.saturating_sub(start)];
        let mut assigned = 0.0;
        for (k, mass) in masses.iter_mut().enumerate() {
            let j = b_order[start + k];
            let (b1, b2) = bins_b.bin_edges(j);
            let m = cell_mass(a1, a2, b1, b2);
            *mass = m;
            assigned += m;
        }
        (start, masses, (p_region - assigned).max(0.0))
    };

    let mut rows = Vec::with_capacity(n_a);
    let mut bob_null = vec![0.0; n_a];
    let mut col_assigned = vec![0.0; n_b];
    for i in 0..n_a {
        let (a1, a2) = bins_a.bin_edges(i);
        // Rows with no representable mass are skipped wholesale.
        if gaussian_inside_mass(mu, sigma, a1, a2) == 0.0 {
            rows.push((0, Vec::new()));
            continue;
        }
        let (start, masses, to_null) = region_row(a1, a2);
        for (k, &m) in masses.iter().enumerate() {
            col_assigned[b_order[start + k]] += m;
        }
        bob_null[i] = to_null;
        rows.push((start, masses));
    }

    // Gaps inside Alice's window that belong to no bin: their mass is null on
    // Alice's side but still splits across Bob's outcomes.
    let mut alice_null = vec![0.0; n_b];
    let (win_lo, win_hi) = bins_a.range();
    let mut a_order: Vec<usize> = (0..n_a).collect();
    a_order.sort_by(|&i, &j| {
        bins_a.centers()[i]
            .partial_cmp(&bins_a.centers()[j])
            .unwrap()
    });
    let mut cursor = win_lo;
    let mut gaps: Vec<(f64, f64)> = Vec::new();
    for &i in &a_order {
        let (lo, hi) = bins_a.bin_edges(i);
        if lo > cursor + bins_a.width() * 1e-9 {
            gaps.push((cursor, lo));
        }
        cursor = cursor.max(hi);
    }
    if win_hi > cursor + bins_a.width() * 1e-9 {
        gaps.push((cursor, win_hi));
    }
    for (g1, g2) in gaps {
        if gaussian_inside_mass(mu, sigma, g1, g2) == 0.0 {
            continue;
        }
        let (start, masses, _to_bob_null) = region_row(g1, g2);
        for (k, &m) in masses.iter().enumerate() {
            let j = b_order[start + k];
            alice_null[j] += m;
            col_assigned[j] += m;
        }
    }

    // Alice outside her window: per-column complement against Bob's exact
    // marginal keeps Bob's marginal consistent without semi-infinite grids.
    for j in 0..n_b {
        alice_null[j] += (p_b_exact[j] - col_assigned[j]).max(0.0);
    }

    // Everything not yet assigned is null on both sides: Alice's gap and
    // out-of-window mass paired with Bob's own out-of-window tail.
    let assigned: f64 = rows.iter().map(|(_, m)| m.iter().sum::<f64>()).sum::<f64>()
        + bob_null.iter().sum::<f64>()
        + alice_null.iter().sum::<f64>();
    let both_null = (1.0 - assigned).max(0.0);

    // Remap band rows from sorted-Bob to original-Bob indexing when Bob bins
    // are not center-sorted.
    let sorted_identity = b_order.iter().enumerate().all(|(k, &j)| k == j);
    let rows = if sorted_identity {
        rows
    } else {
        rows.into_iter()
            .map(|(start, masses)| {
                // Scatter into a dense row, then re-extract a contiguous band
                // over original indices. Only hit on tiny unsorted inputs.
                let mut dense = vec![0.0; n_b];
                for (k, m) in masses.into_iter().enumerate() {
                    dense[b_order[start + k]] = m;
                }
                compress_dense_row(&dense)
            })
            .collect()
    };

    BandedTruth {
        n_a,
        n_b,
        rows,
        bob_null,
        alice_null,
        both_null,
    }
}

fn compress_dense_row(dense: &[f64]) -> (usize, Vec<f64>) {
    let first = dense.iter().position(|&m| m != 0.0);
    let last = dense.iter().rposition(|&m| m != 0.0);
    match (first, last) {
        (Some(f), Some(l)) => (f, dense[f..=l].to_vec()),
        _ => (0, Vec::new()),
    }
}

/// Lossy binned joint in band-plus-rank-one form.
///
/// Final cell values over informative labels are
/// `η·T(i,j) + r_i·q_j`, with `r_i` the per-row replacement weight (loss
/// always; Bob's surviving null mass too when `bob_null_replacement` is set)
/// and `q` the public first-party bin distribution.
pub struct LossyBinnedJoint {
    truth: BandedTruth,
    eta: f64,
    bob_null_replacement: bool,
    /// Alice informative marginal (truth level).
    p_a: Vec<f64>,
    /// Alice null mass (truth level).
    p_a_null: f64,
    /// Replacement distribution over Bob's informative labels.
    q: Vec<f64>,
    /// Per-row rank-one weights `r_i` over Alice's informative labels.
    r: Vec<f64>,
    /// Rank-one weight on Alice's null row.
    r_null: f64,
}

impl LossyBinnedJoint {
    fn assemble(truth: BandedTruth, eta: f64, bob_null_replacement: bool) -> Result<Self> {
        let p_a: Vec<f64> = truth
            .rows
            .iter()
            .zip(&truth.bob_null)
            .map(|((_, m), bn)| m.iter().sum::<f64>() + bn)
            .collect();
        let p_a_null =
            truth.alice_null.iter().sum::<f64>() + truth.both_null;
        let replacement_active = eta < 1.0 || bob_null_replacement;
        if replacement_active && truth.n_a != truth.n_b {
            return Err(Error::InvalidParameter(format!(
                "null replacement draws from the public first-party bin distribution, \
                 which needs matching bin counts; got {} and {}",
                truth.n_a, truth.n_b
            )));
        }
        let informative: f64 = p_a.iter().sum();
        if informative <= crate::Tolerances::default().probability {
            return Err(Error::FullyBlocked { trace: informative });
        }
        let q: Vec<f64> = p_a.iter().map(|p| p / informative).collect();
        let r: Vec<f64> = p_a
            .iter()
            .zip(&truth.bob_null)
            .map(|(&pa, &bn)| {
                (1.0 - eta) * pa + if bob_null_replacement { eta * bn } else { 0.0 }
            })
            .collect();
        let r_null = (1.0 - eta) * p_a_null
            + if bob_null_replacement {
                eta * truth.both_null
            } else {
                0.0
            };
        Ok(Self {
            truth,
            eta,
            bob_null_replacement,
            p_a,
            p_a_null,
            q,
            r,
            r_null,
        })
    }

    pub fn n_a(&self) -> usize {
        self.truth.n_a
    }

    pub fn n_b(&self) -> usize {
        self.truth.n_b
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Alice-side marginal over informative bins plus null, at truth level
    /// (loss does not touch Alice's outcomes).
    pub fn alice_marginal(&self) -> (Vec<f64>, f64) {
        (self.p_a.clone(), self.p_a_null)
    }

    /// Final cell value over informative labels.
    fn cell(&self, i: usize, j: usize) -> f64 {
        let (start, masses) = &self.truth.rows[i];
        let t = if j >= *start && j < start + masses.len() {
            masses[j - start]
        } else {
            0.0
        };
        self.eta * t + self.r[i] * self.q[j]
    }

    fn bob_null_cell(&self, i: usize) -> f64 {
        if self.bob_null_replacement {
            0.0
        } else {
            self.eta * self.truth.bob_null[i]
        }
    }

    fn alice_null_cell(&self, j: usize) -> f64 {
        self.eta * self.truth.alice_null[j] + self.r_null * self.q[j]
    }

    fn both_null_cell(&self) -> f64 {
        if self.bob_null_replacement {
            0.0
        } else {
            self.eta * self.truth.both_null
        }
    }

    /// Bob-side final marginal over informative labels plus his null mass.
    pub fn bob_marginal(&self) -> (Vec<f64>, f64) {
        let r_total: f64 = self.r.iter().sum::<f64>() + self.r_null;
        let mut cols = vec![0.0; self.truth.n_b];
        for (start, masses) in &self.truth.rows {
            for (k, &m) in masses.iter().enumerate() {
                cols[start + k] += self.eta * m;
            }
        }
        for (j, c) in cols.iter_mut().enumerate() {
            *c += self.eta * self.truth.alice_null[j] + r_total * self.q[j];
        }
        let null_mass = if self.bob_null_replacement {
            0.0
        } else {
            self.eta * (self.truth.bob_null.iter().sum::<f64>() + self.truth.both_null)
        };
        (cols, null_mass)
    }

    /// `H(A|B)` in bits of the final distribution, using the band-plus-
    /// rank-one structure so the full grid is never materialized.
    pub fn cond_shannon_bits(&self) -> f64 {
        fn h(x: f64) -> f64 {
            if x > 0.0 {
                -x * x.log2()
            } else {
                0.0
            }
        }
        // H(AB): rank-one closed form over the informative grid, corrected on
        // band cells, plus the null row/column/corner.
        let r_total: f64 = self.r.iter().sum();
        let h_q: f64 = self.q.iter().map(|&q| h(q)).sum();
        let h_r: f64 = self.r.iter().map(|&r| h(r)).sum();
        // −Σ_ij r_i q_j log(r_i q_j) = Σ_i h(r_i)·Σq + Σr·Σ_j h(q_j).
        let mut h_ab = h_r + r_total * h_q;
        for (i, (start, masses)) in self.truth.rows.iter().enumerate() {
            for (k, &t) in masses.iter().enumerate() {
                if t == 0.0 {
                    continue;
                }
                let j = start + k;
                let rank_one = self.r[i] * self.q[j];
                h_ab += h(self.eta * t + rank_one) - h(rank_one);
            }
            h_ab += h(self.bob_null_cell(i));
        }
        for j in 0..self.truth.n_b {
            let rank_one = self.r_null * self.q[j];
            let full = self.eta * self.truth.alice_null[j] + rank_one;
            h_ab += h(full) - h(rank_one);
        }
        h_ab += h(self.r_null) + self.r_null * h_q;
        h_ab += h(self.both_null_cell());

        let (cols, bob_null_mass) = self.bob_marginal();
        let h_b: f64 = cols.iter().map(|&c| h(c)).sum::<f64>() + h(bob_null_mass);
        h_ab - h_b
    }

    /// Materializes the dense `(n_a+1) × (n_b+1)` distribution. Guarded
    /// against grids too large to hold densely.
    pub fn to_dense(&self) -> Result<JointDistribution> {
        let (n_a, n_b) = (self.truth.n_a, self.truth.n_b);
        if (n_a + 1) * (n_b + 1) > 4_000_000 {
            return Err(Error::InvalidParameter(format!(
                "dense joint of {}x{} outcomes is too large; use the banded form",
                n_a + 1,
                n_b + 1
            )));
        }
        let mut m = DMatrix::zeros(n_a + 1, n_b + 1);
        for i in 0..n_a {
            for j in 0..n_b {
                m[(i, j)] = self.cell(i, j);
            }
            m[(i, n_b)] = self.bob_null_cell(i);
        }
        for j in 0..n_b {
            m[(n_a, j)] = self.alice_null_cell(j);
        }
        m[(n_a, n_b)] = self.both_null_cell();
        let total: f64 = m.iter().sum();
        m /= total;
        let mut row_labels: Vec<OutcomeLabel> = (0..n_a).map(OutcomeLabel::Bin).collect();
        row_labels.push(OutcomeLabel::Null);
        let mut col_labels: Vec<OutcomeLabel> = (0..n_b).map(OutcomeLabel::Bin).collect();
        col_labels.push(OutcomeLabel::Null);
        JointDistribution::new(row_labels, col_labels, m)
    }
}

/// Binned two-party arrival-time distribution behind a lossy channel,
/// materialized densely. Loss replaces Bob's outcome with a draw from the
/// public first-party bin distribution; `bob_null_replacement` extends the
/// same draw to his surviving out-of-window outcomes.
pub fn joint_time_distribution(
    src: &GaussianBiphoton,
    bins_a: &IntervalBinSpec,
    bins_b: &IntervalBinSpec,
    channel: &ChannelModel,
    bob_null_replacement: bool,
) -> Result<JointDistribution> {
    joint_time_banded(src, bins_a, bins_b, channel, bob_null_replacement)?.to_dense()
}

/// Band-plus-rank-one form of [`joint_time_distribution`].
pub fn joint_time_banded(
    src: &GaussianBiphoton,
    bins_a: &IntervalBinSpec,
    bins_b: &IntervalBinSpec,
    channel: &ChannelModel,
    bob_null_replacement: bool,
) -> Result<LossyBinnedJoint> {
    bins_a.validate()?;
    bins_b.validate()?;
    let truth = banded_truth(&src.time_pair(), bins_a, bins_b);
    LossyBinnedJoint::assemble(truth, channel.transmission(), bob_null_replacement)
}

/// Binned two-party frequency distribution (anti-correlated axis) in
/// band-plus-rank-one form; bins are absolute rad/s around the carrier.
pub fn joint_frequency_banded(
    src: &GaussianBiphoton,
    bins_a: &IntervalBinSpec,
    bins_b: &IntervalBinSpec,
    channel: &ChannelModel,
    bob_null_replacement: bool,
) -> Result<LossyBinnedJoint> {
    bins_a.validate()?;
    bins_b.validate()?;
    let truth = banded_truth(&src.frequency_pair(), bins_a, bins_b);
    LossyBinnedJoint::assemble(truth, channel.transmission(), bob_null_replacement)
}
