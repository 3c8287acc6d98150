//! The generalized Frank-Wolfe method with the adaptive step-size, its
//! exact line-search variant, and an away-step variant used for
//! high-accuracy reference solves.

mod bounds;
mod line_search;
mod trace;

use std::time::{Duration, Instant};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::barrier::{Barrier, ConePoint};
use crate::composite::{CompositeProblem, NonsmoothTerm};
use crate::error::{Error, Result};
use crate::linmap::LinearMap;

pub use bounds::{
    check_sequence_lemma, check_sequence_lemma_with_slack, iteration_bounds, iteration_bounds_from,
    linear_phase_factor, sublinear_increment, BoundReport, Delta0Source,
};
pub use line_search::{
    exact_line_search, exact_line_search_on, LineSearchBranch, LineSearchOutcome,
};
pub use trace::{
    fmt_float, trace_csv_string, write_dual_trace_csv, write_trace_csv, Branch, DualTraceRecord,
    TraceRecord, DUAL_TRACE_HEADER, TRACE_HEADER,
};

/// `α = min{G/(D(G + D)), 1}`, and `1` when `D = 0`.
pub fn step_size_adaptive(gap: f64, dist: f64) -> Result<f64> {
    if !(gap >= 0.0) || !(dist >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "step size needs G, D >= 0 (got {gap}, {dist})"
        )));
    }
    if dist == 0.0 {
        return Ok(1.0);
    }
    Ok((gap / (dist * (gap + dist))).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    Adaptive,
    ExactLineSearch,
    /// Exact line search along the better of the Frank-Wolfe and away
    /// directions. Falls back to plain exact steps when the nonsmooth term
    /// offers no away vertex.
    AwayExact,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StopRule {
    /// Stop once `G_k ≤ gap_tol`.
    pub gap_tol: Option<f64>,
    /// Stop once `G_k ≤ rel·(1 + |F(x^k)|)`.
    pub relative_gap_tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub time_budget: Option<Duration>,
    /// Stop once `F(x^k) ≤ value_target`.
    pub value_target: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub step: StepRule,
    pub stop: StopRule,
    /// Record wall time per row; when off the column is zero, which makes
    /// traces reproducible byte for byte.
    pub record_timing: bool,
    /// Keep every iterate `x^k` in the output.
    pub keep_iterates: bool,
}

impl SolverConfig {
    pub fn new(step: StepRule) -> Self {
        Self {
            step,
            stop: StopRule::default(),
            record_timing: true,
            keep_iterates: false,
        }
    }

    pub fn gap_tol(mut self, eps: f64) -> Self {
        self.stop.gap_tol = Some(eps);
        self
    }

    pub fn relative_gap_tol(mut self, rel: f64) -> Self {
        self.stop.relative_gap_tol = Some(rel);
        self
    }

    pub fn max_iters(mut self, n: usize) -> Self {
        self.stop.max_iters = Some(n);
        self
    }

    pub fn value_target(mut self, target: f64) -> Self {
        self.stop.value_target = Some(target);
        self
    }

    pub fn time_budget(mut self, budget: Duration) -> Self {
        self.stop.time_budget = Some(budget);
        self
    }

    pub fn keep_iterates(mut self, keep: bool) -> Self {
        self.keep_iterates = keep;
        self
    }

    pub fn record_timing(mut self, on: bool) -> Self {
        self.record_timing = on;
        self
    }

    fn validate(&self) -> Result<()> {
        for eps in [self.stop.gap_tol, self.stop.relative_gap_tol]
            .into_iter()
            .flatten()
        {
            if !(eps > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "gap tolerance {eps} must be positive"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GapTolerance,
    /// `G_k = 0`: the iterate is optimal.
    Optimal,
    ValueTarget,
    MaxIterations,
    TimeBudget,
    /// The computed directional derivative is no longer negative, so no
    /// step can make progress in floating point.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub x: DVector<f64>,
    pub trace: Vec<TraceRecord>,
    pub stop: StopReason,
    /// `x^k` for every trace row, when requested.
    pub iterates: Vec<DVector<f64>>,
    /// Branches of the exact line search, one per step taken with it.
    pub line_search_branches: Vec<LineSearchBranch>,
}

impl SolveOutput {
    pub fn final_record(&self) -> &TraceRecord {
        self.trace.last().expect("a run has at least one row")
    }

    /// Number of steps taken.
    pub fn iterations(&self) -> usize {
        self.trace.len() - 1
    }
}

/// Gaps more negative than this (relative) are reported as a numerical
/// breakdown rather than clamped to zero.
const NEGATIVE_GAP_TOL: f64 = 1e-12;

/// Runs the method from `x0` until a stopping rule fires.
pub fn solve_fw<B, M, H>(
    p: &CompositeProblem<B, M, H>,
    x0: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<SolveOutput>
where
    B: Barrier,
    M: LinearMap<Output = B::Point>,
    H: NonsmoothTerm,
{
    cfg.validate()?;
    p.check_start(x0)?;
    let start = Instant::now();
    let elapsed = || {
        if cfg.record_timing {
            start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        }
    };

    let mut x = x0.clone();
    let mut trace = Vec::new();
    let mut iterates = Vec::new();
    let mut branches = Vec::new();

    for k in 0.. {
        let fo = p.first_order(&x)?;
        let hx = p.h_value(&x)?;
        let objective = p.barrier.value(&fo.image)? + hx;
        let fw = p.term.lmo(&fo.coef)?;
        let cx = fo.coef.dot(&x);
        let mut gap = cx - fw.linear_value + hx - fw.h_value;
        if gap < 0.0 {
            let scale = 1.0 + cx.abs() + fw.linear_value.abs() + hx.abs() + fw.h_value.abs();
            if gap < -NEGATIVE_GAP_TOL * scale {
                return Err(Error::Numerical(format!(
                    "negative Frank-Wolfe gap {gap} at iteration {k}"
                )));
            }
            gap = 0.0;
        }
        let du = p.map.apply(&fw.point)?.lincomb(1.0, &fo.image, -1.0);
        let dist = p.barrier.local_norm_sq(&fo.image, &du)?.sqrt();

        let mut row = TraceRecord {
            k,
            objective,
            gap,
            dist,
            alpha: 0.0,
            branch: Branch::Final,
            elapsed_ms: 0.0,
        };
        if cfg.keep_iterates {
            iterates.push(x.clone());
        }
        let stop = if gap == 0.0 {
            Some(StopReason::Optimal)
        } else if cfg.stop.gap_tol.is_some_and(|eps| gap <= eps)
            || cfg
                .stop
                .relative_gap_tol
                .is_some_and(|rel| gap <= rel * (1.0 + objective.abs()))
        {
            Some(StopReason::GapTolerance)
        } else if cfg.stop.value_target.is_some_and(|t| objective <= t) {
            Some(StopReason::ValueTarget)
        } else if cfg.stop.max_iters.is_some_and(|n| k >= n) {
            Some(StopReason::MaxIterations)
        } else if cfg.stop.time_budget.is_some_and(|b| start.elapsed() >= b) {
            Some(StopReason::TimeBudget)
        } else {
            None
        };
        if let Some(reason) = stop {
            row.elapsed_ms = elapsed();
            trace.push(row);
            return Ok(SolveOutput {
                x,
                trace,
                stop: reason,
                iterates,
                line_search_branches: branches,
            });
        }

        let step = match cfg.step {
            StepRule::Adaptive => {
                let alpha = step_size_adaptive(gap, dist)?;
                Some((alpha, fw.point.lincomb(1.0, &x, -1.0), None))
            }
            StepRule::ExactLineSearch => {
                let d = fw.point.lincomb(1.0, &x, -1.0);
                let line = p.barrier.line_restriction(&fo.image, &du)?;
                exact_step(&line, fw.h_value - hx, 1.0)?.map(|(alpha, b)| {
                    branches.push(b);
                    (alpha, d, None)
                })
            }
            StepRule::AwayExact => {
                let away = p.term.away_vertex(&x, &fo.coef);
                let away_gap = away
                    .as_ref()
                    .map(|a| fo.coef.dot(&a.point) - cx + a.h_value - hx)
                    .unwrap_or(f64::NEG_INFINITY);
                match away {
                    Some(a) if away_gap > gap && a.max_step > 0.0 => {
                        let d = x.lincomb(1.0, &a.point, -1.0);
                        let du_away = p.map.apply(&d)?;
                        let line = p.barrier.line_restriction(&fo.image, &du_away)?;
                        exact_step(&line, hx - a.h_value, a.max_step)?.map(|(alpha, b)| {
                            branches.push(b);
                            let dropped = alpha >= a.max_step;
                            (alpha, d, Some((dropped, a.drop_coordinate)))
                        })
                    }
                    _ => {
                        let d = fw.point.lincomb(1.0, &x, -1.0);
                        let line = p.barrier.line_restriction(&fo.image, &du)?;
                        exact_step(&line, fw.h_value - hx, 1.0)?.map(|(alpha, b)| {
                            branches.push(b);
                            (alpha, d, None)
                        })
                    }
                }
            }
        };

        let Some((alpha, d, away)) = step else {
            row.elapsed_ms = elapsed();
            trace.push(row);
            return Ok(SolveOutput {
                x,
                trace,
                stop: StopReason::Stalled,
                iterates,
                line_search_branches: branches,
            });
        };
        x = x.lincomb(1.0, &d, alpha);
        row.alpha = alpha;
        row.branch = match away {
            Some((true, coord)) => {
                if let Some(i) = coord {
                    x[i] = 0.0;
                }
                Branch::Drop
            }
            Some((false, _)) => Branch::Away,
            None if alpha >= 1.0 => Branch::Full,
            None => Branch::Interior,
        };
        row.elapsed_ms = elapsed();
        trace.push(row);
    }
    unreachable!("the iteration loop only exits by returning")
}

/// Exact step on `[0, upper]`, or `None` when rounding has made the
/// direction non-descent.
fn exact_step(
    line: &crate::barrier::SeparableLogLine,
    xi_d: f64,
    upper: f64,
) -> Result<Option<(f64, LineSearchBranch)>> {
    if !(line.derivative(0.0) + xi_d < 0.0) {
        return Ok(None);
    }
    let out = exact_line_search_on(line, xi_d, upper)?;
    Ok(Some((out.alpha, out.branch)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrier::{LogDetBarrier, WeightedLogBarrier};
    use crate::composite::SimplexIndicator;
    use crate::linmap::{IdentityMap, RankOneSumMap};

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn adaptive_step_examples() {
        assert_eq!(step_size_adaptive(1.0, 1.0).unwrap(), 0.5);
        assert_eq!(step_size_adaptive(3.0, 1.0).unwrap(), 0.75);
        assert!((step_size_adaptive(0.1, 2.0).unwrap() - 0.1 / 4.2).abs() < 1e-16);
        assert_eq!(step_size_adaptive(0.3, 0.0).unwrap(), 1.0);
        assert!(step_size_adaptive(-1.0, 1.0).is_err());
    }

    fn two_bin() -> CompositeProblem<WeightedLogBarrier, IdentityMap, SimplexIndicator> {
        CompositeProblem::new(
            WeightedLogBarrier::unit(2).unwrap(),
            IdentityMap::new(2),
            SimplexIndicator::new(2).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn two_bin_toy_converges() {
        let p = two_bin();
        for rule in [
            StepRule::Adaptive,
            StepRule::ExactLineSearch,
            StepRule::AwayExact,
        ] {
            let out =
                solve_fw(&p, &v(&[0.9, 0.1]), &SolverConfig::new(rule).gap_tol(1e-10)).unwrap();
            let last = out.final_record();
            assert!(last.gap <= 1e-10);
            assert!((last.objective - 2f64.ln() * 2.0).abs() < 1e-9);
            assert!(out
                .trace
                .windows(2)
                .all(|w| w[1].objective <= w[0].objective));
        }
    }

    #[test]
    fn optimal_start_returns_one_row() {
        let out = solve_fw(
            &two_bin(),
            &v(&[0.5, 0.5]),
            &SolverConfig::new(StepRule::Adaptive).gap_tol(1e-6),
        )
        .unwrap();
        assert_eq!(out.trace.len(), 1);
        assert_eq!(out.stop, StopReason::Optimal);
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let r = solve_fw(
            &two_bin(),
            &v(&[1.0, 0.0]),
            &SolverConfig::new(StepRule::Adaptive),
        );
        assert!(matches!(r, Err(Error::Infeasible(_))));
        let r = solve_fw(
            &two_bin(),
            &v(&[0.7, 0.7]),
            &SolverConfig::new(StepRule::Adaptive),
        );
        assert!(matches!(r, Err(Error::Infeasible(_))));
    }

    #[test]
    fn small_design_respects_its_bound() {
        let s = 0.5f64.sqrt();
        let map =
            RankOneSumMap::from_points(&[v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[s, s])]).unwrap();
        let p = CompositeProblem::new(
            LogDetBarrier::new(2).unwrap(),
            map,
            SimplexIndicator::new(3).unwrap(),
        )
        .unwrap();
        let x0 = p.term.barycenter();
        let reference = solve_fw(
            &p,
            &x0,
            &SolverConfig::new(StepRule::AwayExact).gap_tol(1e-12),
        )
        .unwrap();
        let f_ref = reference.final_record().objective;
        let f0 = p.value(&x0).unwrap();
        let eps = 1e-3;
        let bound = iteration_bounds(f0 - f_ref, 2.0, 0.0, eps).unwrap();
        let run = solve_fw(
            &p,
            &x0,
            &SolverConfig::new(StepRule::Adaptive).value_target(f_ref + eps),
        )
        .unwrap();
        assert!(run.iterations() as u64 <= bound.k_eps);
    }
}
