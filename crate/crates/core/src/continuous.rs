//! Binned continuous observables and their worst-case overlap.
//!
//! Time/frequency (and x/p quadrature) measurements are described symbolically
//! as disjoint equal-width intervals inside a finite detection window, plus a
//! null outcome covering the window complement. The overlap between conjugate
//! interval measurements reduces to the largest eigenvalue of the
//! band-limiting integral operator with kernel `sin(a(u-v))/(π(u-v))` on
//! `[-1, 1]`, `a = δω·δt/4`: [`analytic_overlap`] computes it with a fixed
//! Gauss-Legendre Nyström scheme, [`slepian_overlap_oracle`] with a
//! caller-chosen grid, so the two can cross-check each other. For small
//! `δω·δt` the eigenvalue approaches `δω·δt/2π`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::{Error, Result};

/// Relative tolerance for grid-doubling convergence of the overlap eigenvalue.
pub const GRID_RTOL: f64 = 1e-6;

const MAX_DOUBLINGS: usize = 6;

/// Disjoint equal-width bins inside a detection window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalBinSpec {
    centers: Vec<f64>,
    width: f64,
    range_lo: f64,
    range_hi: f64,
}

impl IntervalBinSpec {
    /// Validating constructor. Bins must be pairwise disjoint
    /// (`|cᵢ - cⱼ| ≥ width` up to round-off) and lie inside the window.
    pub fn new(centers: Vec<f64>, width: f64, range_lo: f64, range_hi: f64) -> Result<Self> {
        let spec = Self {
            centers,
            width,
            range_lo,
            range_hi,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Tiles the window with as many width-`width` bins as fit, centered so
    /// that any leftover margin splits evenly between the two window edges.
    pub fn tile(width: f64, range_lo: f64, range_hi: f64) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::InvalidBins(format!("bin width must be positive, got {width}")));
        }
        if !(range_lo < range_hi) {
            return Err(Error::InvalidBins(format!(
                "window must satisfy range_lo < range_hi, got [{range_lo}, {range_hi}]"
            )));
        }
        let span = range_hi - range_lo;
        let n = (span / width + 1e-9).floor() as usize;
        if n == 0 {
            return Err(Error::InvalidBins(format!(
                "window of extent {span} does not fit a single bin of width {width}"
            )));
        }
        let leftover = (span - n as f64 * width).max(0.0);
        let first = range_lo + leftover / 2.0 + width / 2.0;
        let centers = (0..n).map(|k| first + k as f64 * width).collect();
        Self::new(centers, width, range_lo, range_hi)
    }

    /// Re-checks the invariants (disjointness, containment, finiteness).
    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0) || !self.width.is_finite() {
            return Err(Error::InvalidBins(format!(
                "bin width must be positive, got {}",
                self.width
            )));
        }
        if !(self.range_lo < self.range_hi)
            || !self.range_lo.is_finite()
            || !self.range_hi.is_finite()
        {
            return Err(Error::InvalidBins(format!(
                "window must satisfy range_lo < range_hi, got [{}, {}]",
                self.range_lo, self.range_hi
            )));
        }
        if self.centers.is_empty() {
            return Err(Error::InvalidBins("at least one bin is required".into()));
        }
        let scale = self
            .centers
            .iter()
            .fold(self.range_lo.abs().max(self.range_hi.abs()), |m, c| {
                m.max(c.abs())
            });
        let slack = self.width * 1e-8 + scale * 1e-12;
        for (i, &c) in self.centers.iter().enumerate() {
            if !c.is_finite() {
                return Err(Error::InvalidBins(format!("bin center {i} is not finite")));
            }
            if c - self.width / 2.0 < self.range_lo - slack
                || c + self.width / 2.0 > self.range_hi + slack
            {
                return Err(Error::InvalidBins(format!(
                    "bin {i} centered at {c} exceeds the window [{}, {}]",
                    self.range_lo, self.range_hi
                )));
            }
        }
        // Equal widths mean disjointness is a nearest-neighbor condition, so
        // sorting reduces the pairwise check to adjacent centers.
        let mut order: Vec<usize> = (0..self.centers.len()).collect();
        order.sort_by(|&a, &b| self.centers[a].total_cmp(&self.centers[b]));
        for w in order.windows(2) {
            let (i, j) = (w[0], w[1]);
            if (self.centers[i] - self.centers[j]).abs() < self.width - slack {
                return Err(Error::InvalidBins(format!(
                    "bins {i} and {j} overlap: centers {} and {} closer than width {}",
                    self.centers[i], self.centers[j], self.width
                )));
            }
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.centers.len()
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn range(&self) -> (f64, f64) {
        (self.range_lo, self.range_hi)
    }

    /// Edges `(center - width/2, center + width/2)` of bin `i`.
    pub fn bin_edges(&self, i: usize) -> (f64, f64) {
        let c = self.centers[i];
        (c - self.width / 2.0, c + self.width / 2.0)
    }

    /// Index of the bin containing `v`, or `None` when `v` falls in a gap or
    /// outside every bin. Edge ties go to the nearer center.
    pub fn bin_index_of(&self, v: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &c) in self.centers.iter().enumerate() {
            let d = (v - c).abs();
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        let (i, d) = best?;
        (d <= self.width / 2.0 * (1.0 + 1e-12)).then_some(i)
    }
}

/// Physical axis a binned measurement acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AxisKind {
    Frequency,
    Time,
    QuadratureX,
    QuadratureP,
}

/// Symbolic interval POVM: the bins plus the null outcome on the window
/// complement. Never materialized as matrices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinnedPovm {
    pub kind: AxisKind,
    pub bins: IntervalBinSpec,
}

impl BinnedPovm {
    /// The null region `(-∞, range_lo) ∪ (range_hi, ∞)` as two intervals.
    pub fn null_intervals(&self) -> [(f64, f64); 2] {
        let (lo, hi) = self.bins.range();
        [(f64::NEG_INFINITY, lo), (hi, f64::INFINITY)]
    }

    /// Outcome count including the null outcome.
    pub fn n_outcomes(&self) -> usize {
        self.bins.n_bins() + 1
    }
}

/// Builds the frequency/time descriptor pair, each with its out-of-window
/// null outcome.
pub fn build_time_frequency_povms(
    freq: IntervalBinSpec,
    time: IntervalBinSpec,
) -> Result<(BinnedPovm, BinnedPovm)> {
    freq.validate()?;
    time.validate()?;
    Ok((
        BinnedPovm {
            kind: AxisKind::Frequency,
            bins: freq,
        },
        BinnedPovm {
            kind: AxisKind::Time,
            bins: time,
        },
    ))
}

/// Builds the x/p quadrature descriptor pair. Both axes must use the same
/// bin width; the nulls model detector saturation beyond the window.
pub fn build_quadrature_povms(
    x: IntervalBinSpec,
    p: IntervalBinSpec,
) -> Result<(BinnedPovm, BinnedPovm)> {
    x.validate()?;
    p.validate()?;
    let rel = (x.width() - p.width()).abs() / x.width().max(p.width());
    if rel > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "quadrature bin widths must match, got {} and {}",
            x.width(),
            p.width()
        )));
    }
    Ok((
        BinnedPovm {
            kind: AxisKind::QuadratureX,
            bins: x,
        },
        BinnedPovm {
            kind: AxisKind::QuadratureP,
            bins: p,
        },
    ))
}

/// Quadrature rule used by the overlap oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum QuadratureRule {
    CompositeMidpoint,
    GaussLegendre,
}

/// Discretization control for [`slepian_overlap_oracle`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SlepianGrid {
    n_points: usize,
    rule: QuadratureRule,
}

impl SlepianGrid {
    /// At least 64 initial points.
    pub fn new(n_points: usize, rule: QuadratureRule) -> Result<Self> {
        if n_points < 64 {
            return Err(Error::InvalidParameter(format!(
                "oracle grid needs at least 64 points, got {n_points}"
            )));
        }
        Ok(Self { n_points, rule })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn rule(&self) -> QuadratureRule {
        self.rule
    }
}

impl Default for SlepianGrid {
    fn default() -> Self {
        Self {
            n_points: 128,
            rule: QuadratureRule::GaussLegendre,
        }
    }
}

/// `sin(z)/z`, series-stable near zero.
fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        let z2 = z * z;
        1.0 - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on the
/// Legendre polynomial.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Three-term recurrence for P_n(x) and P'_n(x).
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

fn midpoint(n: usize) -> (Vec<f64>, Vec<f64>) {
    let h = 2.0 / n as f64;
    let nodes = (0..n).map(|i| -1.0 + (i as f64 + 0.5) * h).collect();
    let weights = vec![h; n];
    (nodes, weights)
}

/// Largest eigenvalue of the symmetric Nyström matrix
/// `A_ij = √(w_i w_j) · sin(a(x_i-x_j))/(π(x_i-x_j))` by power iteration.
/// The start vector `√w` approximates the nodeless top eigenfunction.
fn band_limit_lambda_max(a: f64, nodes: &[f64], weights: &[f64]) -> f64 {
    let n = nodes.len();
    let sw: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let mat = DMatrix::from_fn(n, n, |i, j| {
        sw[i] * sw[j] * (a / PI) * sinc(a * (nodes[i] - nodes[j]))
    });
    let mut v = DVector::from_column_slice(&sw);
    v /= v.norm();
    let mut lambda = 0.0f64;
    for _ in 0..10_000 {
        let u = &mat * &v;
        let next = v.dot(&u);
        let un = u.norm();
        if un == 0.0 {
            return 0.0;
        }
        v = u / un;
        if (next - lambda).abs() <= 1e-13 * next.abs().max(f64::MIN_POSITIVE) {
            return next;
        }
        lambda = next;
    }
    lambda
}

fn eigenvalue_at(a: f64, n: usize, rule: QuadratureRule) -> f64 {
    let (nodes, weights) = match rule {
        QuadratureRule::CompositeMidpoint => midpoint(n),
        QuadratureRule::GaussLegendre => gauss_legendre(n),
    };
    band_limit_lambda_max(a, &nodes, &weights)
}

/// Doubles the grid until successive eigenvalues agree to [`GRID_RTOL`].
fn converged_eigenvalue(a: f64, n0: usize, rule: QuadratureRule) -> Result<f64> {
    let mut n = n0;
    let mut prev = eigenvalue_at(a, n, rule);
    let mut last_change = f64::INFINITY;
    for doubling in 1..=MAX_DOUBLINGS {
        n *= 2;
        let next = eigenvalue_at(a, n, rule);
        last_change = (next - prev).abs() / next.abs().max(f64::MIN_POSITIVE);
        if last_change < GRID_RTOL {
            return Ok(next);
        }
        prev = next;
        let _ = doubling;
    }
    Err(Error::GridNotConverged {
        last_change,
        doublings: MAX_DOUBLINGS,
        n_points: n,
    })
}

/// Clamp an eigenvalue estimate into the open interval `(0, 1)`.
fn clamp_open_unit(lambda: f64) -> f64 {
    lambda.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Worst-case overlap of conjugate interval measurements with bin widths
/// `delta_omega` (rad/s) and `delta_t` (s): the top eigenvalue of the
/// band-limiting operator for the product `delta_omega·delta_t`. Approaches
/// `delta_omega·delta_t/2π` for small products and 1 for large ones.
pub fn analytic_overlap(delta_omega: f64, delta_t: f64) -> Result<f64> {
    if !(delta_omega > 0.0) || !(delta_t > 0.0) || !delta_omega.is_finite() || !delta_t.is_finite()
    {
        return Err(Error::InvalidParameter(format!(
            "bin widths must be positive and finite, got {delta_omega} and {delta_t}"
        )));
    }
    let a = delta_omega * delta_t / 4.0;
    Ok(clamp_open_unit(converged_eigenvalue(
        a,
        128,
        QuadratureRule::GaussLegendre,
    )?))
}

/// Grid-controlled discretization of the same band-limiting eigenproblem,
/// for cross-checking [`analytic_overlap`] with an independently chosen
/// quadrature. Errors if doubling the grid six times never reaches
/// [`GRID_RTOL`] agreement.
pub fn slepian_overlap_oracle(delta_omega: f64, delta_t: f64, grid: SlepianGrid) -> Result<f64> {
    if !(delta_omega > 0.0) || !(delta_t > 0.0) || !delta_omega.is_finite() || !delta_t.is_finite()
    {
        return Err(Error::InvalidParameter(format!(
            "bin widths must be positive and finite, got {delta_omega} and {delta_t}"
        )));
    }
    let a = delta_omega * delta_t / 4.0;
    Ok(clamp_open_unit(converged_eigenvalue(
        a,
        grid.n_points,
        grid.rule,
    )?))
}
