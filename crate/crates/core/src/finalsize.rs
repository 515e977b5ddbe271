//! Final size of an SIR epidemic: the fraction `R_f` ever infected solves
//! `R_f + exp(-R0 R_f) = 1`.
//!
//! For `R0 <= 1` the only root in `[0, 1]` is zero. Above threshold there is
//! a second, positive root, found here by bisection on `[1e-9, 1]`. The
//! function is monotone on that bracket, so the search never drifts to the
//! trivial root.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const BRACKET_LO: f64 = 1e-9;
const BRACKET_HI: f64 = 1.0;
const INTERVAL_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalSizeResult {
    pub r0: f64,
    pub r_f: f64,
    /// `r_f + exp(-r0 r_f) - 1`.
    pub residual: f64,
}

/// `r + exp(-r0 r) - 1`, with `expm1` to keep precision near `r = 0`.
fn final_size_fn(r0: f64, r: f64) -> f64 {
    r + (-r0 * r).exp_m1()
}

pub fn solve_final_size(r0: f64) -> Result<FinalSizeResult> {
    if !r0.is_finite() || r0 < 0.0 {
        return Err(Error::InvalidR0(r0));
    }
    let r_f = if r0 <= 1.0 { 0.0 } else { bisect(r0) };
    Ok(FinalSizeResult {
        r0,
        r_f,
        residual: final_size_fn(r0, r_f),
    })
}

fn bisect(r0: f64) -> f64 {
    let (mut lo, mut hi) = (BRACKET_LO, BRACKET_HI);
    // f < 0 below the root, f > 0 above it.
    if final_size_fn(r0, hi) <= 0.0 {
        return hi;
    }
    if final_size_fn(r0, lo) >= 0.0 {
        return lo;
    }
    while hi - lo >= INTERVAL_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if final_size_fn(r0, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves the final-size relation on `points` evenly spaced `r0` values.
pub fn final_size_curve(r0_min: f64, r0_max: f64, points: usize) -> Result<Vec<FinalSizeResult>> {
    if !(r0_min >= 0.0 && r0_min < r0_max && r0_max.is_finite()) {
        return Err(Error::invalid(format!("need 0 <= r0_min < r0_max, got [{r0_min}, {r0_max}]")));
    }
    if points < 2 {
        return Err(Error::invalid("final-size curve needs at least 2 points"));
    }
    let span = r0_max - r0_min;
    (0..points)
        .map(|k| {
            let r0 = if k + 1 == points {
                r0_max
            } else {
                r0_min + span * k as f64 / (points - 1) as f64
            };
            solve_final_size(r0)
        })
        .collect()
}

/// `r0,r_f` CSV for plotting the final-size curve.
pub fn write_curve_csv<W: Write>(curve: &[FinalSizeResult], mut out: W) -> std::io::Result<()> {
    writeln!(out, "r0,r_f")?;
    for row in curve {
        writeln!(out, "{},{}", row.r0, row.r_f)?;
    }
    out.flush()
}

/// Herd-immunity table: one row per labelled `R0`, with `R_f` as a fraction
/// and as a percentage rounded to one decimal.
pub fn write_table_csv<W: Write>(rows: &[(String, f64)], mut out: W) -> Result<()> {
    let io = |e: std::io::Error| Error::Io {
        path: "<table>".into(),
        source: e,
    };
    writeln!(out, "wave,r0,r_f,r_f_percent").map_err(io)?;
    for (label, r0) in rows {
        let res = solve_final_size(*r0)?;
        writeln!(out, "{},{},{},{:.1}", csv_field(label), r0, res.r_f, 100.0 * res.r_f).map_err(io)?;
    }
    out.flush().map_err(io)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn below_threshold_is_zero() {
        for r0 in [0.0, 0.5, 0.999, 1.0] {
            let res = solve_final_size(r0).unwrap();
            assert_eq!(res.r_f, 0.0);
            assert_eq!(res.residual, 0.0);
        }
    }

    #[test]
    fn rejects_invalid_r0() {
        assert!(solve_final_size(-0.1).is_err());
        assert!(solve_final_size(f64::NAN).is_err());
        assert!(solve_final_size(f64::INFINITY).is_err());
    }

    #[test]
    fn herd_immunity_values() {
        for (r0, expected) in [(2.5, 0.893), (4.5, 0.989), (1.6, 0.642), (1.65, 0.668), (1.63, 0.658)] {
            let res = solve_final_size(r0).unwrap();
            assert!((res.r_f - expected).abs() < 0.005, "r0={r0}: {}", res.r_f);
            assert!(res.residual.abs() < 1e-10);
        }
    }

    #[test]
    fn just_above_threshold() {
        let res = solve_final_size(1.0 + 1e-6).unwrap();
        // r_f ~ 2 (r0 - 1) near threshold.
        assert!(res.r_f > 1e-6 && res.r_f < 3e-6, "{}", res.r_f);
        assert!(res.residual.abs() < 1e-10);
    }

    #[test]
    fn large_r0_saturates() {
        assert!(solve_final_size(50.0).unwrap().r_f > 0.9999);
        let huge = solve_final_size(1e4).unwrap();
        assert!(huge.r_f > 0.9999 && huge.residual.abs() < 1e-10);
    }

    #[test]
    fn curve_is_flat_below_one_and_increasing_above() {
        let flat = final_size_curve(0.0, 1.0, 11).unwrap();
        assert!(flat.iter().all(|r| r.r_f == 0.0));

        let curve = final_size_curve(1.0, 7.0, 121).unwrap();
        assert_eq!(curve.len(), 121);
        assert_eq!(curve[0].r_f, 0.0);
        assert_eq!(curve[120].r0, 7.0);
        for pair in curve.windows(2) {
            assert!(pair[1].r_f > pair[0].r_f);
        }
        assert!(final_size_curve(2.0, 1.0, 5).is_err());
        assert!(final_size_curve(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn table_export() {
        let mut buf = Vec::new();
        write_table_csv(&[("First wave of 2020".into(), 2.5), ("a,b".into(), 0.5)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "wave,r0,r_f,r_f_percent");
        assert!(lines[1].starts_with("First wave of 2020,2.5,0.89"));
        assert!(lines[1].ends_with(",89.3"));
        assert_eq!(lines[2], "\"a,b\",0.5,0,0.0");
    }
}
