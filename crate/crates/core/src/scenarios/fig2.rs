//! Contour data for the clamped bound over the two null fractions, plus the
//! two headline scalars: the equal-null zero crossing and the largest
//! tolerable second-basis null fraction at a fixed first-basis null.

use serde::Serialize;

use crate::bounds::{eur_modified, BoundInput};
use crate::{Error, Result};

use super::fmt_g17;

/// One grid sample of the clamped bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fig2Row {
    pub p_z_null: f64,
    pub p_x_null: f64,
    pub clamped_bound_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig2Report {
    pub c_less: f64,
    pub h_max_bits: f64,
    pub grid_n: usize,
    /// Null fraction at which the bound reaches zero along the diagonal
    /// `p_z = p_x`; absent when the bound is non-positive already at zero
    /// nulls.
    pub equal_null_crossing: Option<f64>,
    /// First-basis null fraction of the reference cut.
    pub reference_p_z_null: f64,
    /// Largest second-basis null fraction with a positive bound along the
    /// reference cut.
    pub reference_frontier: Option<f64>,
    #[serde(skip)]
    pub rows: Vec<Fig2Row>,
}

impl Fig2Report {
    /// Grid samples as CSV, row-major with the first-basis null outermost.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.rows.len() * 72 + 48);
        out.push_str("p_z_null,p_x_null,clamped_bound_bits\n");
        for r in &self.rows {
            out.push_str(&fmt_g17(r.p_z_null));
            out.push(',');
            out.push_str(&fmt_g17(r.p_x_null));
            out.push(',');
            out.push_str(&fmt_g17(r.clamped_bound_bits));
            out.push('\n');
        }
        out
    }
}

fn raw_bound(p_z: f64, p_x: f64, c_less: f64, h_max: f64) -> Result<f64> {
    let input = BoundInput::new(p_z, p_x, c_less, h_max)?;
    Ok(eur_modified(&input)?.raw_bound)
}

/// Zero of the unclamped bound along the equal-null diagonal, found by
/// bisection. The bound is positive at the left end of any returned bracket
/// and negative at the right end; `None` means the bound is already
/// non-positive with no nulls at all.
pub fn equal_null_crossing(c_less: f64, h_max: f64) -> Result<Option<f64>> {
    let at = |p: f64| raw_bound(p, p, c_less, h_max);
    if !(at(0.0)? > 0.0) {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    debug_assert!(at(hi)? < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if at(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// Largest second-basis null fraction with a positive unclamped bound at a
/// fixed first-basis null fraction. `None` when the bound is non-positive
/// already at zero; `1` when it stays positive over the whole open interval.
pub fn positive_frontier(c_less: f64, h_max: f64, p_z_null: f64) -> Result<Option<f64>> {
    let at = |p_x: f64| raw_bound(p_z_null, p_x, c_less, h_max);
    if !(at(0.0)? > 0.0) {
        return Ok(None);
    }
    if at(1.0)? >= 0.0 {
        return Ok(Some(1.0));
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if at(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// Clamped bound sampled on a `grid_n × grid_n` grid over the unit square of
/// null fractions, with the two headline scalars at the published reference
/// cut `p_z = 10⁻³`.
pub fn fig2_contour(c_less: f64, h_max: f64, grid_n: usize) -> Result<Fig2Report> {
    if grid_n < 2 {
        return Err(Error::InvalidConfig(format!(
            "grid must have at least 2 points per axis, got {grid_n}"
        )));
    }
    let step = 1.0 / (grid_n - 1) as f64;
    let mut rows = Vec::with_capacity(grid_n * grid_n);
    for i in 0..grid_n {
        let p_z = (i as f64 * step).min(1.0);
        for j in 0..grid_n {
            let p_x = (j as f64 * step).min(1.0);
            let input = BoundInput::new(p_z, p_x, c_less, h_max)?;
            rows.push(Fig2Row {
                p_z_null: p_z,
                p_x_null: p_x,
                clamped_bound_bits: eur_modified(&input)?.clamped_bound,
            });
        }
    }
    let reference_p_z_null = 1e-3;
    Ok(Fig2Report {
        c_less,
        h_max_bits: h_max,
        grid_n,
        equal_null_crossing: equal_null_crossing(c_less, h_max)?,
        reference_p_z_null,
        reference_frontier: positive_frontier(c_less, h_max, reference_p_z_null)?,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn published_crossing_near_232_permille() {
        let x = equal_null_crossing(1e-3, 1.0).unwrap().unwrap();
        assert!((x - 0.232).abs() < 0.005, "crossing {x}");
    }

    #[test]
    fn vanishing_overlap_crossing_is_exactly_one_quarter() {
        let x = equal_null_crossing(0.0, 1.0).unwrap().unwrap();
        assert_abs_diff_eq!(x, 0.25, epsilon = 1e-6);
    }

    #[test]
    fn crossing_absent_when_bound_starts_negative() {
        // Overlap term already exceeds 1 with no nulls: sqrt(c)*2^(h/2) >= 1.
        assert!(equal_null_crossing(0.5, 4.0).unwrap().is_none());
    }

    #[test]
    fn frontier_matches_published_reference_cut() {
        let f = positive_frontier(1e-3, 1.0, 1e-3).unwrap().unwrap();
        assert!((f - 0.92).abs() < 0.02, "frontier {f}");
    }

    #[test]
    fn grid_report_has_expected_shape_and_monotone_axes() {
        let rep = fig2_contour(1e-3, 1.0, 21).unwrap();
        assert_eq!(rep.rows.len(), 21 * 21);
        let b = |i: usize, j: usize| rep.rows[i * 21 + j].clamped_bound_bits;
        for i in 0..21 {
            for j in 1..21 {
                assert!(b(i, j) <= b(i, j - 1) + 1e-12, "not monotone in p_x");
                assert!(b(j, i) <= b(j - 1, i) + 1e-12, "not monotone in p_z");
            }
        }
        // Corner values: full nulls kill the bound.
        assert_eq!(b(20, 20), 0.0);
        let csv = rep.to_csv();
        assert!(csv.starts_with("p_z_null,p_x_null,clamped_bound_bits\n"));
        assert_eq!(csv.lines().count(), 1 + 21 * 21);
    }

    #[test]
    fn rejects_degenerate_grid() {
        assert!(fig2_contour(1e-3, 1.0, 1).is_err());
    }
}
