//! One-dimensional sup/inf by grid scan followed by golden-section refinement.
//!
//! The grid scan locates the best bracket even when the objective is not
//! unimodal; golden section then polishes inside that bracket.

use crate::losses::{T_MAX, T_MIN};
use crate::{Error, Result};

/// Absolute tolerance of the golden-section refinement (in the search coordinate).
pub const GOLDEN_TOL: f64 = 1e-10;

/// Inner scan range and resolution for suprema over `t > 0`.
pub const SCAN_LO: f64 = 1e-6;
pub const SCAN_HI: f64 = 1e6;
pub const SCAN_POINTS: usize = 2001;

/// Resolution of scans over the unit interval.
pub const UNIT_POINTS: usize = 1001;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extremum {
    pub arg: f64,
    pub value: f64,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximizes `f` on `[a, b]` assuming unimodality, stopping once the bracket
/// is narrower than `tol`.
pub fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> Extremum {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        Extremum { arg: c, value: fc }
    } else {
        Extremum { arg: d, value: fd }
    }
}

fn nan_to_neg_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Scans `points` log-spaced values of `t` in `[lo, hi]` and refines around the
/// best one. Returns `Err(t)` when the best grid point is an endpoint.
pub fn log_grid_max(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    points: usize,
    tol: f64,
) -> std::result::Result<Extremum, f64> {
    assert!(points >= 3 && lo > 0.0 && hi > lo);
    let (slo, shi) = (lo.ln(), hi.ln());
    let step = (shi - slo) / (points - 1) as f64;
    let s_at = |i: usize| if i + 1 == points { shi } else { slo + step * i as f64 };
    let g = |s: f64| nan_to_neg_inf(f(s.exp()));

    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for i in 0..points {
        let v = g(s_at(i));
        if v > best_val {
            best_val = v;
            best = i;
        }
    }
    if best == 0 || best + 1 == points {
        return Err(s_at(best).exp());
    }
    let refined = golden_section_max(g, s_at(best - 1), s_at(best + 1), tol);
    Ok(if refined.value >= best_val {
        Extremum {
            arg: refined.arg.exp(),
            value: refined.value,
        }
    } else {
        Extremum {
            arg: s_at(best).exp(),
            value: best_val,
        }
    })
}

/// `sup_{t > 0} f(t)`.
///
/// Scans `[1e-6, 1e6]` (2001 points). When the best point sits on an edge the
/// scan widens to the loss clamp range `[1e-12, 1e12]` at the same density;
/// losses are constant beyond it, so an edge maximum there means the
/// objective is still increasing and the supremum is reported as unbounded.
pub fn sup_positive(f: impl Fn(f64) -> f64) -> Result<Extremum> {
    match log_grid_max(&f, SCAN_LO, SCAN_HI, SCAN_POINTS, GOLDEN_TOL) {
        Ok(e) => Ok(e),
        Err(_) => log_grid_max(&f, T_MIN, T_MAX, 2 * SCAN_POINTS - 1, GOLDEN_TOL)
            .map_err(|at| Error::Unbounded { at }),
    }
}

/// `min_{p ∈ [0, 1]} f(p)` by a uniform scan plus golden section. Endpoints
/// are admissible minimizers.
pub fn unit_interval_min(f: impl Fn(f64) -> f64, points: usize, tol: f64) -> Extremum {
    assert!(points >= 3);
    let step = 1.0 / (points - 1) as f64;
    let p_at = |i: usize| if i + 1 == points { 1.0 } else { step * i as f64 };
    let neg = |p: f64| {
        let v = f(p);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            -v
        }
    };
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for i in 0..points {
        let v = neg(p_at(i));
        if v > best_val {
            best_val = v;
            best = i;
        }
    }
    let lo = p_at(best.saturating_sub(1));
    let hi = p_at((best + 1).min(points - 1));
    let refined = golden_section_max(neg, lo, hi, tol);
    let e = if refined.value >= best_val {
        refined
    } else {
        Extremum {
            arg: p_at(best),
            value: best_val,
        }
    };
    Extremum {
        arg: e.arg,
        value: -e.value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_parabola_peak() {
        let e = golden_section_max(|x| -(x - 0.3).powi(2) + 2.0, -1.0, 2.0, 1e-12);
        assert!((e.arg - 0.3).abs() < 1e-6);
        assert!((e.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sup_positive_interior() {
        // log t - t/3 peaks at t = 3.
        let e = sup_positive(|t| t.ln() - t / 3.0).unwrap();
        assert!((e.arg - 3.0).abs() < 1e-6);
        assert!((e.value - (3f64.ln() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn sup_positive_widens_before_giving_up() {
        // Peak at t = 1e8, outside the inner scan.
        let e = sup_positive(|t| t.ln() - t / 1e8).unwrap();
        assert!((e.arg / 1e8 - 1.0).abs() < 1e-5);
        assert!(matches!(sup_positive(|t| t.sqrt()), Err(Error::Unbounded { .. })));
        assert!(matches!(sup_positive(|t| -t), Err(Error::Unbounded { .. })));
    }

    #[test]
    fn multimodal_objective_picks_global_bracket() {
        // Two bumps in log t; the taller one is at t = 100.
        let f = |t: f64| {
            let s = t.ln();
            (-(s + 2.0).powi(2)).exp() + 2.0 * (-(s - 100f64.ln()).powi(2)).exp()
        };
        let e = sup_positive(f).unwrap();
        assert!((e.arg / 100.0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn unit_interval_allows_endpoints() {
        let e = unit_interval_min(|p| p, UNIT_POINTS, GOLDEN_TOL);
        assert_eq!(e.value, 0.0);
        let e = unit_interval_min(|p| (p - 0.25).powi(2), UNIT_POINTS, GOLDEN_TOL);
        assert!((e.arg - 0.25).abs() < 1e-6);
    }
}
