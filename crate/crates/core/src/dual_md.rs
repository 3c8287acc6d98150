//! Mirror descent on the Fenchel dual `min_y d(y) = f*(y) + h*(−A*y)`,
//! using `f*` itself as the prox function.
//!
//! The Bregman step has the closed form `∇f*(y⁺) = ∇f*(y) − γ g`, and the
//! resulting iterates coincide with `∇f(Ax^k)` for the Frank-Wolfe iterates
//! started at `x⁰ = z⁰`.

use std::time::Instant;

use nalgebra::DVector;

use crate::barrier::{Barrier, WeightedLogBarrier};
use crate::composite::{CompositeProblem, NonsmoothTerm};
use crate::error::{Error, Result};
use crate::fw_solver::{step_size_adaptive, DualTraceRecord};
use crate::linmap::LinearMap;

/// `y = ∇f(Ax)`, the dual point paired with a primal iterate.
pub fn dual_iterate_from_primal<B, M, H>(
    p: &CompositeProblem<B, M, H>,
    x: &DVector<f64>,
) -> Result<B::Point>
where
    B: Barrier,
    M: LinearMap<Output = B::Point>,
    H: NonsmoothTerm,
{
    p.dual_point(x)
}

/// `d(y) = f*(y) + h*(−A*y)`.
pub fn dual_objective<B, M, H>(p: &CompositeProblem<B, M, H>, y: &B::Point) -> Result<f64>
where
    B: Barrier,
    M: LinearMap<Output = B::Point>,
    H: NonsmoothTerm,
{
    p.dual_objective(y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdConfig {
    /// Stop once `Ḡ_k ≤ gap_tol`.
    pub gap_tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub record_timing: bool,
    pub keep_iterates: bool,
}

impl Default for MdConfig {
    fn default() -> Self {
        Self {
            gap_tol: None,
            max_iters: None,
            record_timing: true,
            keep_iterates: false,
        }
    }
}

/// State of the method at iteration `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub y: DVector<f64>,
    pub z: DVector<f64>,
    pub g: DVector<f64>,
    pub gamma: f64,
    pub gap: f64,
    pub dist: f64,
}

#[derive(Debug, Clone)]
pub struct MdOutput {
    pub y: DVector<f64>,
    pub z: DVector<f64>,
    pub trace: Vec<DualTraceRecord>,
    /// Every state, when requested.
    pub states: Vec<DualState>,
}

/// Runs the method from a consistent pair `(y⁰, z⁰)` with `Az⁰ = ∇f*(y⁰)`.
pub fn solve_md_standalone<M, H>(
    p: &CompositeProblem<WeightedLogBarrier, M, H>,
    y0: &DVector<f64>,
    z0: &DVector<f64>,
    cfg: &MdConfig,
) -> Result<MdOutput>
where
    M: LinearMap<Output = DVector<f64>>,
    H: NonsmoothTerm,
{
    if cfg.gap_tol.is_none() && cfg.max_iters.is_none() {
        return Err(Error::InvalidInput(
            "mirror descent needs a gap tolerance or an iteration cap".into(),
        ));
    }
    let f = &p.barrier;
    let u0 = f.conjugate_gradient(y0)?;
    p.h_value(z0)?;
    let az0 = p.map.apply(z0)?;
    let mismatch = (&az0 - &u0).amax();
    if mismatch > 1e-9 * (1.0 + u0.amax()) {
        return Err(Error::InvalidInput(format!(
            "A z0 differs from grad f*(y0) by {mismatch}"
        )));
    }

    let start = Instant::now();
    let elapsed = || {
        if cfg.record_timing {
            start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        }
    };
    let mut y = y0.clone();
    let mut z = z0.clone();
    let mut trace = Vec::new();
    let mut states = Vec::new();

    for k in 0.. {
        let c = p.map.apply_adjoint(&y)?;
        let s = p.term.lmo(&c)?;
        let u = f.conjugate_gradient(&y)?;
        let g = &u - p.map.apply(&s.point)?;
        let hz = p.h_value(&z)?;
        let gy = g.dot(&y);
        let mut gap = gy + hz - s.h_value;
        if gap < 0.0 {
            if gap < -1e-12 * (1.0 + gy.abs() + hz.abs() + s.h_value.abs()) {
                return Err(Error::Numerical(format!(
                    "negative dual gap {gap} at iteration {k}"
                )));
            }
            gap = 0.0;
        }
        let dist = f.local_norm_sq(&u, &g)?.sqrt();
        let dual_value = p.dual_objective(&y)?;
        let done = gap == 0.0
            || cfg.gap_tol.is_some_and(|eps| gap <= eps)
            || cfg.max_iters.is_some_and(|n| k >= n);
        let gamma = if done {
            0.0
        } else {
            step_size_adaptive(gap, dist)?
        };
        trace.push(DualTraceRecord {
            k,
            dual_value,
            gap,
            gamma,
            elapsed_ms: elapsed(),
        });
        if cfg.keep_iterates {
            states.push(DualState {
                y: y.clone(),
                z: z.clone(),
                g: g.clone(),
                gamma,
                gap,
                dist,
            });
        }
        if done {
            return Ok(MdOutput {
                y,
                z,
                trace,
                states,
            });
        }
        let next = u.zip_map(&g, |ui, gi| ui - gamma * gi);
        if let Some(j) = next.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::Domain(format!(
                "mirror step left the cone at coordinate {j}"
            )));
        }
        y = f.gradient(&next)?;
        z = z.zip_map(&s.point, |zi, si| (1.0 - gamma) * zi + gamma * si);
    }
    unreachable!("the iteration loop only exits by returning")
}
