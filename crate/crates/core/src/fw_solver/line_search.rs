//! Exact minimization of `ζ(α) = −Σ y_i ln(b_i + α s_i) + α·ξᵀd`.
//!
//! Both barrier families restrict to this separable form along a line, so
//! one procedure serves the weighted-log and the log-det objectives.

use crate::barrier::SeparableLogLine;
use crate::error::{Error, Result};

/// Which branch of the procedure produced the step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineSearchBranch {
    /// No term decreases along the direction and the linear part does not
    /// increase, so `ζ` decreases all the way to the upper limit.
    Unbounded,
    /// `ζ' ≤ 0` at the right end of the bracket; the minimizer is clipped.
    Clipped,
    /// Interior root of `ζ'`.
    Root,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchOutcome {
    pub alpha: f64,
    pub branch: LineSearchBranch,
    pub iterations: usize,
}

const MAX_ITERS: usize = 200;

/// Minimizer of `ζ` over `[0, 1]`.
pub fn exact_line_search(line: &SeparableLogLine, xi_d: f64) -> Result<LineSearchOutcome> {
    exact_line_search_on(line, xi_d, 1.0)
}

/// Minimizer of `ζ` over `[0, upper]` intersected with the domain of `ζ`.
///
/// Fails if some `b_i ≤ 0` (the base point is not interior) or if
/// `ζ'(0) ≥ 0`.
pub fn exact_line_search_on(
    line: &SeparableLogLine,
    xi_d: f64,
    upper: f64,
) -> Result<LineSearchOutcome> {
    if !(upper > 0.0) || !upper.is_finite() {
        return Err(Error::InvalidInput(format!(
            "line-search upper limit {upper} must be positive"
        )));
    }
    if let Some(b) = line.base.iter().find(|b| !(**b > 0.0)) {
        return Err(Error::Domain(format!(
            "line-search base point not interior (term {b})"
        )));
    }
    let dzeta = |a: f64| line.derivative(a) + xi_d;
    let d0 = dzeta(0.0);
    if !(d0 < 0.0) {
        return Err(Error::InvalidInput(format!(
            "not a descent direction: derivative {d0} at 0"
        )));
    }

    // domain ends at the first term whose argument reaches zero
    let gamma_plus = line
        .base
        .iter()
        .zip(&line.slope)
        .filter(|(_, s)| **s < 0.0)
        .map(|(b, s)| -b / s)
        .fold(f64::INFINITY, f64::min);
    if gamma_plus.is_infinite() && xi_d <= 0.0 {
        return Ok(LineSearchOutcome {
            alpha: upper,
            branch: LineSearchBranch::Unbounded,
            iterations: 0,
        });
    }

    let mut hi = if gamma_plus.is_finite() {
        upper.min(gamma_plus - 1e-12 * gamma_plus.max(1.0))
    } else {
        upper
    };
    if dzeta(hi) <= 0.0 {
        return Ok(LineSearchOutcome {
            alpha: hi,
            branch: LineSearchBranch::Clipped,
            iterations: 0,
        });
    }

    // ζ is strictly convex on the bracket and ζ'(lo) < 0 < ζ'(hi)
    let mut lo = 0.0;
    let mut a = newton_or_bisect(0.0, d0, line.second_derivative(0.0), lo, hi);
    for it in 1..=MAX_ITERS {
        let d = dzeta(a);
        let scale = 1.0
            + xi_d.abs()
            + line
                .weights
                .iter()
                .zip(&line.base)
                .zip(&line.slope)
                .map(|((w, b), s)| (w * s / (b + a * s)).abs())
                .sum::<f64>();
        if d.abs() <= 1e-12 * scale {
            return Ok(LineSearchOutcome {
                alpha: a,
                branch: LineSearchBranch::Root,
                iterations: it,
            });
        }
        if d < 0.0 {
            lo = a;
        } else {
            hi = a;
        }
        if hi - lo <= 1e-14 {
            return Ok(LineSearchOutcome {
                alpha: 0.5 * (lo + hi),
                branch: LineSearchBranch::Root,
                iterations: it,
            });
        }
        a = newton_or_bisect(a, d, line.second_derivative(a), lo, hi);
    }
    Err(Error::Numerical(
        "exact line search did not converge".into(),
    ))
}

fn newton_or_bisect(a: f64, d: f64, dd: f64, lo: f64, hi: f64) -> f64 {
    let next = a - d / dd;
    if dd > 0.0 && next > lo && next < hi {
        next
    } else {
        0.5 * (lo + hi)
    }
}
