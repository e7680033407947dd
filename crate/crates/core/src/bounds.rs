//! Entropy bounds and classical conditional entropies.
//!
//! Two bounds on the conditional min-entropy are provided: the unmodified
//! overlap relation, and its null-outcome-aware refinement whose right side
//! is `−2·log₂` of a three-term bracket. The refinement degrades toward the
//! trivial bound as null probabilities grow; the clamp to zero is explicit in
//! the result, never silent. Smoothed variants substitute envelope functions
//! for the null probabilities. All entropies are in bits.

use serde::Serialize;

use crate::states::JointDistribution;
use crate::{Error, Result};

/// Inputs of the null-aware bound: null probabilities of the key and check
/// measurements, the restricted overlap, and the check-side max-entropy term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundInput {
    pub p_z_null: f64,
    pub p_x_null: f64,
    pub c_less: f64,
    pub h_max_term: f64,
}

impl BoundInput {
    pub fn new(p_z_null: f64, p_x_null: f64, c_less: f64, h_max_term: f64) -> Result<Self> {
        let input = Self {
            p_z_null,
            p_x_null,
            c_less,
            h_max_term,
        };
        input.validate()?;
        Ok(input)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_z_null", self.p_z_null), ("p_x_null", self.p_x_null)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be a probability, got {p}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.c_less) {
            return Err(Error::InvalidParameter(format!(
                "overlap must be in [0,1], got {}",
                self.c_less
            )));
        }
        if !self.h_max_term.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "max-entropy term must be finite, got {}",
                self.h_max_term
            )));
        }
        Ok(())
    }
}

/// Which bracket term is largest: the key-side null, the check-side null, or
/// the overlap term carrying the max-entropy factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DominantTerm {
    ZNull,
    XNull,
    Overlap,
}

/// A min-entropy lower bound, before and after clamping to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundResult {
    #[serde(rename = "raw_bound_bits")]
    pub raw_bound: f64,
    #[serde(rename = "clamped_bound_bits")]
    pub clamped_bound: f64,
    pub clamped: bool,
    pub dominant_term: DominantTerm,
}

impl BoundResult {
    fn from_bracket(terms: [f64; 3]) -> Self {
        let bracket: f64 = terms.iter().sum();
        let dominant_term = if terms[0] >= terms[1] && terms[0] >= terms[2] && terms[0] > 0.0 {
            DominantTerm::ZNull
        } else if terms[1] >= terms[2] && terms[1] > 0.0 {
            DominantTerm::XNull
        } else {
            DominantTerm::Overlap
        };
        let raw_bound = if bracket == 0.0 {
            f64::INFINITY
        } else {
            -2.0 * bracket.log2()
        };
        Self {
            raw_bound,
            clamped_bound: raw_bound.max(0.0),
            clamped: raw_bound < 0.0,
            dominant_term,
        }
    }
}

/// Smoothing parameter of the envelope functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothParams {
    pub epsilon: f64,
}

impl SmoothParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::InvalidParameter(format!(
                "smoothing parameter must be in [0,1), got {epsilon}"
            )));
        }
        Ok(Self { epsilon })
    }
}

/// Overlap relation: `−log₂ c − h_max`. The bound is `+∞` for a vanishing
/// overlap; the value may be negative and is not clamped here.
pub fn eur_unmodified(c: f64, h_max: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::InvalidParameter(format!(
            "overlap must be in [0,1], got {c}"
        )));
    }
    if !h_max.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "max-entropy term must be finite, got {h_max}"
        )));
    }
    if c == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-c.log2() - h_max)
}

/// Null-aware min-entropy bound:
/// `−2·log₂[√p_Z^∅ + √p_X^∅ + √(1−p_X^∅)·√c^<·(√2)^{h_max}]`.
///
/// A bracket at or above 1 gives a non-positive raw value and a clamped
/// result; a vanishing bracket (all terms zero) reports `+∞`.
pub fn eur_modified(input: &BoundInput) -> Result<BoundResult> {
    input.validate()?;
    Ok(BoundResult::from_bracket(bracket_terms(
        input.p_z_null,
        input.p_x_null,
        input.p_x_null,
        input.c_less,
        input.h_max_term,
    )))
}

fn bracket_terms(p_z: f64, p_x: f64, p_x_lower: f64, c: f64, h_max: f64) -> [f64; 3] {
    [
        p_z.sqrt(),
        p_x.sqrt(),
        (1.0 - p_x_lower).max(0.0).sqrt() * c.sqrt() * (0.5 * h_max).exp2(),
    ]
}

/// Branch of the smoothing envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothSign {
    Plus,
    Minus,
}

/// Envelope functions bracketing a null probability across the smoothing
/// ball.
///
/// The literal closed form `2ε + p + 2pε² − 4pε − ε² ± 2(1−ε)√(pε(1−p)(2−ε))`
/// is one branch pair of a quadratic and leaves its validity region at the
/// ends of `[0,1]`: the lower branch crosses to a spurious positive value for
/// `p < 2ε − ε²`, where the true infimum is 0, and by the complement symmetry
/// `f₊(p) = 1 − f₋(1−p)` the upper branch turns spurious for `p > (1−ε)²`,
/// where the true supremum is 1. Both branches are continuous at those
/// thresholds, so the envelope extension is exact, not a heuristic clip.
pub fn smoothing_f(p: f64, eps: f64, sign: SmoothSign) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "null probability must be in [0,1], got {p}"
        )));
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::InvalidParameter(format!(
            "smoothing parameter must be in [0,1), got {eps}"
        )));
    }
    let boundary = 2.0 * eps - eps * eps;
    match sign {
        SmoothSign::Minus if p < boundary => return Ok(0.0),
        SmoothSign::Plus if p > 1.0 - boundary => return Ok(1.0),
        _ => {}
    }
    let root = 2.0 * (1.0 - eps) * (p * eps * (1.0 - p) * (2.0 - eps)).max(0.0).sqrt();
    let base = 2.0 * eps + p + 2.0 * p * eps * eps - 4.0 * p * eps - eps * eps;
    let value = match sign {
        SmoothSign::Plus => base + root,
        SmoothSign::Minus => base - root,
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Null-aware bound with smoothed null probabilities: both nulls enter via
/// the upper envelope and the `(1 − p_X^∅)` factor via the lower envelope.
/// When both upper envelopes reach 1 the bracket is at least 2 and the
/// result is clamped with the larger null marked dominant.
pub fn eur_modified_smooth(input: &BoundInput, sp: &SmoothParams) -> Result<BoundResult> {
    input.validate()?;
    SmoothParams::new(sp.epsilon)?;
    let p_z = smoothing_f(input.p_z_null, sp.epsilon, SmoothSign::Plus)?;
    let p_x = smoothing_f(input.p_x_null, sp.epsilon, SmoothSign::Plus)?;
    let p_x_lower = smoothing_f(input.p_x_null, sp.epsilon, SmoothSign::Minus)?;
    Ok(BoundResult::from_bracket(bracket_terms(
        p_z,
        p_x,
        p_x_lower,
        input.c_less,
        input.h_max_term,
    )))
}

fn neg_p_log2_p(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// `H(A|B) = H(AB) − H(B)` in bits; rows are the conditioned-on party's
/// partner (A), columns the condition (B).
pub fn cond_shannon(j: &JointDistribution) -> f64 {
    let h_ab: f64 = j.probs().iter().map(|&p| neg_p_log2_p(p)).sum();
    let h_b: f64 = j.col_marginal().iter().map(|&p| neg_p_log2_p(p)).sum();
    h_ab - h_b
}

/// Conditional Rényi-1/2 max-entropy of a classical joint distribution:
/// `log₂ Σ_y (Σ_x √p(x,y))²`.
pub fn cond_max_entropy_classical(j: &JointDistribution) -> f64 {
    let m = j.probs();
    let mut total = 0.0;
    for c in 0..m.ncols() {
        let s: f64 = m.column(c).iter().map(|&p| p.max(0.0).sqrt()).sum();
        total += s * s;
    }
    total.log2()
}

/// Asymptotic key rate: `max(0, clamped bound − leak)` bits per signal, with
/// no sifting factor.
pub fn key_rate(bound: &BoundResult, leak: f64) -> Result<f64> {
    if !(leak >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "leak must be non-negative bits, got {leak}"
        )));
    }
    Ok((bound.clamped_bound - leak).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use nalgebra::DMatrix;

    use crate::states::OutcomeLabel;

    #[test]
    fn unmodified_bound_examples() {
        assert_eq!(eur_unmodified(1.0, 0.7).unwrap(), -0.7);
        assert_abs_diff_eq!(eur_unmodified(0.5, 0.0).unwrap(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(
            eur_unmodified(1e-3, 1.0).unwrap(),
            8.965784,
            max_relative = 1e-6
        );
        assert_eq!(eur_unmodified(0.0, 1.0).unwrap(), f64::INFINITY);
        assert!(eur_unmodified(-0.1, 0.0).is_err());
        assert!(eur_unmodified(1.1, 0.0).is_err());
    }

    #[test]
    fn modified_reduces_to_unmodified_without_nulls() {
        for (c, h) in [(1e-3, 1.0), (0.5, 0.0), (0.1, 2.3), (1.0, 0.0)] {
            let r = eur_modified(&BoundInput::new(0.0, 0.0, c, h).unwrap()).unwrap();
            assert_abs_diff_eq!(r.raw_bound, eur_unmodified(c, h).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn modified_zero_crossing_near_published_equal_null_level() {
        let r = eur_modified(&BoundInput::new(0.232, 0.232, 1e-3, 1.0).unwrap()).unwrap();
        assert!(r.raw_bound.abs() < 0.01, "raw {}", r.raw_bound);
        // Tighter: the crossing sits near 23.08%.
        let lo = eur_modified(&BoundInput::new(0.2303, 0.2303, 1e-3, 1.0).unwrap()).unwrap();
        let hi = eur_modified(&BoundInput::new(0.2313, 0.2313, 1e-3, 1.0).unwrap()).unwrap();
        assert!(lo.raw_bound > 0.0 && hi.raw_bound < 0.0);
    }

    #[test]
    fn modified_zero_crossing_at_quarter_for_vanishing_overlap() {
        let r = eur_modified(&BoundInput::new(0.25, 0.25, 0.0, 1.0).unwrap()).unwrap();
        assert_eq!(r.raw_bound, 0.0);
        assert!(!r.clamped);
        let above = eur_modified(&BoundInput::new(0.250001, 0.250001, 0.0, 1.0).unwrap()).unwrap();
        assert!(above.raw_bound < 0.0 && above.clamped);
        let below = eur_modified(&BoundInput::new(0.249999, 0.249999, 0.0, 1.0).unwrap()).unwrap();
        assert!(below.raw_bound > 0.0);
    }

    #[test]
    fn modified_tolerates_large_check_null_when_key_null_small() {
        let at = |p_x: f64| {
            eur_modified(&BoundInput::new(1e-3, p_x, 1e-3, 1.0).unwrap())
                .unwrap()
                .raw_bound
        };
        assert!(at(0.90) > 0.0);
        assert!(at(0.93) < 0.0);
    }

    #[test]
    fn modified_bracket_zero_reports_infinity() {
        let r = eur_modified(&BoundInput::new(0.0, 0.0, 0.0, 5.0).unwrap()).unwrap();
        assert_eq!(r.raw_bound, f64::INFINITY);
        assert_eq!(r.clamped_bound, f64::INFINITY);
        assert!(!r.clamped);
    }

    #[test]
    fn dominant_term_tracks_largest_bracket_entry() {
        let z = eur_modified(&BoundInput::new(0.5, 1e-4, 1e-3, 1.0).unwrap()).unwrap();
        assert_eq!(z.dominant_term, DominantTerm::ZNull);
        let x = eur_modified(&BoundInput::new(1e-4, 0.5, 1e-3, 1.0).unwrap()).unwrap();
        assert_eq!(x.dominant_term, DominantTerm::XNull);
        let c = eur_modified(&BoundInput::new(1e-6, 1e-6, 0.9, 2.0).unwrap()).unwrap();
        assert_eq!(c.dominant_term, DominantTerm::Overlap);
    }

    #[test]
    fn modified_clamps_exactly_when_raw_negative() {
        for p in [0.0, 0.1, 0.232, 0.3, 0.8] {
            let r = eur_modified(&BoundInput::new(p, p, 1e-3, 1.0).unwrap()).unwrap();
            assert_eq!(r.clamped, r.raw_bound < 0.0);
            assert_eq!(r.clamped_bound, r.raw_bound.max(0.0));
        }
    }

    #[test]
    fn modified_monotone_on_unclamped_grid() {
        // Raw bound non-increasing along each input on a deterministic grid,
        // comparing only pairs that are both unclamped (the spurious
        // direction of p_X inside the clamped region is documented).
        let ps = [0.0, 0.01, 0.05, 0.1, 0.2];
        let cs = [1e-4, 1e-3, 1e-2, 0.1];
        let hs = [0.0, 0.5, 1.0, 2.0];
        let eval = |pz: f64, px: f64, c: f64, h: f64| {
            eur_modified(&BoundInput::new(pz, px, c, h).unwrap()).unwrap()
        };
        for &pz in &ps {
            for &px in &ps {
                for &c in &cs {
                    for &h in &hs {
                        let base = eval(pz, px, c, h);
                        let bumped = [
                            eval(pz + 0.05, px, c, h),
                            eval(pz, px + 0.05, c, h),
                            eval(pz, px, (c * 2.0).min(1.0), h),
                            eval(pz, px, c, h + 0.5),
                        ];
                        for b in bumped {
                            if !base.clamped && !b.clamped {
                                assert!(b.raw_bound <= base.raw_bound + 1e-12);
                            }
                            assert!(b.clamped_bound <= base.clamped_bound + 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn smoothing_collapses_at_zero_epsilon() {
        for p in [0.0, 0.1, 0.5, 0.9, 1.0] {
            assert_eq!(smoothing_f(p, 0.0, SmoothSign::Plus).unwrap(), p);
            assert_eq!(smoothing_f(p, 0.0, SmoothSign::Minus).unwrap(), p);
        }
    }

    #[test]
    fn smoothing_envelopes_at_domain_ends() {
        let eps = 0.01;
        let expect = 2.0 * eps - eps * eps;
        assert_abs_diff_eq!(
            smoothing_f(0.0, eps, SmoothSign::Plus).unwrap(),
            expect,
            epsilon = 1e-15
        );
        // The literal lower branch is spurious below 2ε − ε²; the envelope
        // is 0 there.
        assert_eq!(smoothing_f(0.0, eps, SmoothSign::Minus).unwrap(), 0.0);
        // Mirror image at p = 1.
        assert_eq!(smoothing_f(1.0, eps, SmoothSign::Plus).unwrap(), 1.0);
        assert_abs_diff_eq!(
            smoothing_f(1.0, eps, SmoothSign::Minus).unwrap(),
            1.0 - expect,
            epsilon = 1e-15
        );
    }

    #[test]
    fn smoothing_branches_continuous_at_validity_thresholds() {
        for eps in [0.01, 0.1, 0.3] {
            let b = 2.0 * eps - eps * eps;
            for d in [1e-7, 1e-9] {
                let below = smoothing_f(b - d, eps, SmoothSign::Minus).unwrap();
                let above = smoothing_f(b + d, eps, SmoothSign::Minus).unwrap();
                assert!(below == 0.0 && above < 1e-3, "minus jump at {b}: {above}");
                let p_hi = 1.0 - b;
                let under = smoothing_f(p_hi - d, eps, SmoothSign::Plus).unwrap();
                let over = smoothing_f(p_hi + d, eps, SmoothSign::Plus).unwrap();
                assert!(over == 1.0 && (1.0 - under) < 1e-3, "plus jump at {p_hi}: {under}");
            }
        }
    }

    #[test]
    fn smoothing_sandwich_holds_on_dense_grid() {
        for i in 0..=100 {
            let p = i as f64 / 100.0;
            for j in 0..=50 {
                let eps = j as f64 / 100.0;
                let lo = smoothing_f(p, eps, SmoothSign::Minus).unwrap();
                let hi = smoothing_f(p, eps, SmoothSign::Plus).unwrap();
                assert!(
                    lo <= p + 1e-12 && p <= hi + 1e-12,
                    "sandwich broken at p={p}, eps={eps}: {lo} {hi}"
                );
            }
        }
    }

    #[test]
    fn smooth_bound_equals_plain_bound_at_zero_epsilon() {
        let sp = SmoothParams::new(0.0).unwrap();
        for (pz, px, c, h) in [(0.0, 0.0, 1e-3, 1.0), (0.1, 0.2, 0.01, 0.5)] {
            let input = BoundInput::new(pz, px, c, h).unwrap();
            let a = eur_modified(&input).unwrap();
            let b = eur_modified_smooth(&input, &sp).unwrap();
            assert_abs_diff_eq!(a.raw_bound, b.raw_bound, epsilon = 1e-12);
        }
    }

    #[test]
    fn smoothing_strictly_weakens_the_bound() {
        let input = BoundInput::new(0.0, 0.0, 1e-3, 1.0).unwrap();
        let plain = eur_modified(&input).unwrap();
        let smooth =
            eur_modified_smooth(&input, &SmoothParams::new(0.01).unwrap()).unwrap();
        assert!(smooth.raw_bound < plain.raw_bound);
        assert!(smooth.raw_bound > 0.0);
    }

    #[test]
    fn smooth_bound_clamps_under_heavy_smoothing() {
        let input = BoundInput::new(0.2, 0.2, 1e-6, 1.0).unwrap();
        let r = eur_modified_smooth(&input, &SmoothParams::new(0.3).unwrap()).unwrap();
        assert!(r.clamped);
        assert_eq!(r.clamped_bound, 0.0);
    }

    fn joint_2x2(m: [[f64; 2]; 2]) -> JointDistribution {
        let probs = DMatrix::from_row_slice(2, 2, &[m[0][0], m[0][1], m[1][0], m[1][1]]);
        JointDistribution::new(
            vec![OutcomeLabel::Bin(0), OutcomeLabel::Bin(1)],
            vec![OutcomeLabel::Bin(0), OutcomeLabel::Bin(1)],
            probs,
        )
        .unwrap()
    }

    #[test]
    fn cond_shannon_reference_values() {
        let perfect = joint_2x2([[0.5, 0.0], [0.0, 0.5]]);
        assert_abs_diff_eq!(cond_shannon(&perfect), 0.0, epsilon = 1e-12);
        let independent = joint_2x2([[0.25, 0.25], [0.25, 0.25]]);
        assert_abs_diff_eq!(cond_shannon(&independent), 1.0, epsilon = 1e-12);
        let skewed = joint_2x2([[0.4, 0.1], [0.1, 0.4]]);
        assert_abs_diff_eq!(cond_shannon(&skewed), 0.721928, epsilon = 1e-5);
    }

    #[test]
    fn cond_max_entropy_reference_values() {
        let perfect = joint_2x2([[0.5, 0.0], [0.0, 0.5]]);
        assert_abs_diff_eq!(cond_max_entropy_classical(&perfect), 0.0, epsilon = 1e-12);
        let independent = joint_2x2([[0.25, 0.25], [0.25, 0.25]]);
        assert_abs_diff_eq!(cond_max_entropy_classical(&independent), 1.0, epsilon = 1e-12);
        let skewed = joint_2x2([[0.4, 0.1], [0.1, 0.4]]);
        assert_abs_diff_eq!(cond_max_entropy_classical(&skewed), 0.848, epsilon = 1e-3);
    }

    #[test]
    fn max_entropy_dominates_shannon_on_grid() {
        // Entropy ordering on a deterministic family of 2x2 distributions.
        for i in 1..20 {
            for k in 0..10 {
                let a = i as f64 / 40.0;
                let b = k as f64 / 40.0;
                let rest = (1.0 - 2.0 * a - b).max(0.0);
                let total = 2.0 * a + b + rest;
                let j = joint_2x2([
                    [a / total, b / total],
                    [rest / total, a / total],
                ]);
                assert!(
                    cond_max_entropy_classical(&j) >= cond_shannon(&j) - 1e-10,
                    "ordering broken at a={a} b={b}"
                );
            }
        }
    }

    #[test]
    fn key_rate_clamps_at_zero() {
        let bound = eur_modified(&BoundInput::new(0.0, 0.0, 0.25, 0.0).unwrap()).unwrap();
        assert_abs_diff_eq!(key_rate(&bound, 0.5).unwrap(), 1.5, epsilon = 1e-12);
        assert_eq!(key_rate(&bound, 5.0).unwrap(), 0.0);
        let clamped = eur_modified(&BoundInput::new(0.3, 0.3, 1e-3, 1.0).unwrap()).unwrap();
        assert_eq!(key_rate(&clamped, 0.1).unwrap(), 0.0);
        assert!(key_rate(&bound, -0.1).is_err());
    }

    #[test]
    fn bound_result_serializes_with_stable_field_names() {
        let r = eur_modified(&BoundInput::new(0.01, 0.02, 1e-3, 1.0).unwrap()).unwrap();
        let v = serde_json::to_value(r).unwrap();
        assert!(v.get("raw_bound_bits").is_some());
        assert!(v.get("clamped_bound_bits").is_some());
        assert!(v.get("clamped").is_some());
        assert_eq!(v["dominant_term"], "x_null");
    }
}
