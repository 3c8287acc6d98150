//! Iteration bounds of the adaptive Frank-Wolfe method and the elementary
//! sequence check behind the sublinear phase.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where the initial optimality gap `δ₀` came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Delta0Source {
    /// `F(x⁰) − F_ref` against a certified reference solve.
    Measured,
    /// The initial FW gap `G₀`, which bounds `δ₀` from above.
    GapSurrogate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// Iterations with `G_k > θ + R_h`.
    pub k_lin: u64,
    /// Iterations until `F(x^k) − F* ≤ ε`.
    pub k_eps: u64,
    /// Iterations until `G_k ≤ ε`.
    pub fwgap_eps: u64,
    pub delta0: f64,
    pub delta0_source: Delta0Source,
    pub theta: f64,
    pub r_h: f64,
    pub eps: f64,
}

fn ceil_count(x: f64) -> u64 {
    if x <= 0.0 {
        0
    } else {
        x.ceil() as u64
    }
}

/// Evaluates the three ceiling formulas.
///
/// ```
/// use barrierfw::fw_solver::iteration_bounds;
/// let r = iteration_bounds(1.0, 1.0, 0.0, 0.1).unwrap();
/// assert_eq!((r.k_lin, r.k_eps), (26, 134));
/// ```
pub fn iteration_bounds(delta0: f64, theta: f64, r_h: f64, eps: f64) -> Result<BoundReport> {
    iteration_bounds_from(delta0, Delta0Source::Measured, theta, r_h, eps)
}

pub fn iteration_bounds_from(
    delta0: f64,
    source: Delta0Source,
    theta: f64,
    r_h: f64,
    eps: f64,
) -> Result<BoundReport> {
    if !(delta0 > 0.0) || !delta0.is_finite() {
        return Err(Error::InvalidInput(format!(
            "delta0 = {delta0} must be positive"
        )));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidInput(format!("eps = {eps} must be positive")));
    }
    if !(theta >= 1.0) || !theta.is_finite() {
        return Err(Error::InvalidInput(format!(
            "theta = {theta} must be at least 1"
        )));
    }
    if !(r_h >= 0.0) || !r_h.is_finite() {
        return Err(Error::InvalidInput(format!(
            "R_h = {r_h} must be nonnegative"
        )));
    }
    let s = theta + r_h;
    let k_lin = ceil_count(5.3 * (delta0 + s) * (10.6 * delta0).ln());
    let k_eps = k_lin + ceil_count(12.0 * s * s * (1.0 / eps - 1.0 / delta0).max(0.0));
    let fwgap_eps = k_lin + ceil_count(24.0 * s * s / eps);
    Ok(BoundReport {
        k_lin,
        k_eps,
        fwgap_eps,
        delta0,
        delta0_source: source,
        theta,
        r_h,
        eps,
    })
}

/// Contraction factor `1 − 1/(5.3(δ₀ + θ + R_h))` of the linear phase.
pub fn linear_phase_factor(delta0: f64, theta: f64, r_h: f64) -> f64 {
    1.0 - 1.0 / (5.3 * (delta0 + theta + r_h))
}

/// Per-iteration growth `1/(12(θ + R_h)²)` of `1/δ_k` in the sublinear phase.
pub fn sublinear_increment(theta: f64, r_h: f64) -> f64 {
    1.0 / (12.0 * (theta + r_h).powi(2))
}

/// [`check_sequence_lemma_with_slack`] with no slack.
pub fn check_sequence_lemma(d: &[f64], g: &[f64], m: f64) -> Result<bool> {
    check_sequence_lemma_with_slack(d, g, m, 0.0)
}

/// Checks the conclusions `d_j ≤ M/(j + M/d₀)` and `min_{i≤j} g_i < 2M/j`
/// for sequences satisfying `d_{j+1} ≤ d_j − g_j²/M` and `g_j ≥ d_j ≥ 0`.
///
/// A failed hypothesis is reported as [`Error::Hypothesis`], so callers can
/// tell it apart from a failed conclusion (`Ok(false)`). `slack` is an
/// absolute allowance for rounding applied to every inequality.
pub fn check_sequence_lemma_with_slack(d: &[f64], g: &[f64], m: f64, slack: f64) -> Result<bool> {
    if d.len() != g.len() {
        return Err(Error::InvalidInput(
            "d and g must have the same length".into(),
        ));
    }
    if !(m > 0.0) {
        return Err(Error::InvalidInput(format!("M = {m} must be positive")));
    }
    for j in 0..d.len() {
        if d[j] < -slack || g[j] < -slack {
            return Err(Error::Hypothesis {
                index: j,
                detail: "negative entry".into(),
            });
        }
        if g[j] < d[j] - slack {
            return Err(Error::Hypothesis {
                index: j,
                detail: format!("g = {} < d = {}", g[j], d[j]),
            });
        }
        if j + 1 < d.len() && d[j + 1] > d[j] - g[j] * g[j] / m + slack {
            return Err(Error::Hypothesis {
                index: j,
                detail: format!(
                    "d_(j+1) = {} exceeds d_j - g_j^2/M = {}",
                    d[j + 1],
                    d[j] - g[j] * g[j] / m
                ),
            });
        }
    }
    let Some(&d0) = d.first() else {
        return Ok(true);
    };
    let mut min_g = f64::INFINITY;
    for j in 0..d.len() {
        let bound = if d0 > 0.0 {
            m / (j as f64 + m / d0)
        } else {
            0.0
        };
        if d[j] > bound + slack {
            return Ok(false);
        }
        min_g = min_g.min(g[j]);
        if j >= 1 && !(min_g < 2.0 * m / j as f64 + slack) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_examples() {
        let r = iteration_bounds(1.0, 1.0, 0.0, 0.1).unwrap();
        assert_eq!(r.k_lin, 26);
        assert_eq!(r.k_eps, 134);
        let r = iteration_bounds(1.0, 1.0, 0.0, 2.0).unwrap();
        assert_eq!(r.k_eps, r.k_lin);
        let r = iteration_bounds(1.0, 1.0, 0.0, 0.5).unwrap();
        assert_eq!(r.fwgap_eps - r.k_lin, 48);
    }

    #[test]
    fn small_delta0_has_no_linear_phase() {
        assert_eq!(iteration_bounds(0.05, 1.0, 0.0, 0.01).unwrap().k_lin, 0);
    }

    #[test]
    fn invalid_inputs() {
        assert!(iteration_bounds(0.0, 1.0, 0.0, 0.1).is_err());
        assert!(iteration_bounds(1.0, 1.0, 0.0, 0.0).is_err());
        assert!(iteration_bounds(1.0, 0.5, 0.0, 0.1).is_err());
    }

    #[test]
    fn sequence_lemma_examples() {
        let s = [1.0, 0.5, 0.1];
        assert!(check_sequence_lemma(&s, &s, 12.0).unwrap());
        assert!(check_sequence_lemma(&[0.0; 3], &[0.0; 3], 12.0).unwrap());
    }

    #[test]
    fn sequence_lemma_hypothesis_failures_are_distinct() {
        // no progress while the gap is positive
        let r = check_sequence_lemma(&[1.0, 1.0], &[1.0, 1.0], 12.0);
        assert!(matches!(r, Err(Error::Hypothesis { index: 0, .. })));
        // gap below the optimality gap
        let r = check_sequence_lemma(&[1.0, 0.5], &[0.5, 0.5], 12.0);
        assert!(matches!(r, Err(Error::Hypothesis { index: 0, .. })));
    }
}
