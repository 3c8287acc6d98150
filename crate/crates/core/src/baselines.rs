//! Comparison methods for the simplex-constrained Poisson likelihood
//! `L(z) = −Σ_j Y_j ln⟨p_j, z⟩`: the relatively smooth gradient method with
//! a fixed step or backtracking, and the multiplicative EM update.
//!
//! Traces use the Frank-Wolfe schema; `G` and `D` are the Frank-Wolfe gap
//! and local distance at each iterate so runs are directly comparable.

use std::time::Instant;

use nalgebra::DVector;

use crate::barrier::{omega_star, Barrier, ConePoint, WeightedLogBarrier};
use crate::composite::{CompositeProblem, NonsmoothTerm, SimplexIndicator};
use crate::error::{check_dim, Error, Result};
use crate::fw_solver::{Branch, TraceRecord};
use crate::instances::{PetInstance, PetProblem};
use crate::linmap::{CsrMatrix, LinearMap, SparseMatrixMap};

/// `L(z)` with its problem form and `Ȳ = Σ_j Y_j`.
#[derive(Debug, Clone)]
pub struct PetObjective {
    problem: PetProblem,
    total: f64,
}

impl PetObjective {
    /// `p` is `n × m` (row `i` is voxel `i`); `counts` has one entry per bin.
    pub fn new(p: &CsrMatrix, counts: &[u64]) -> Result<Self> {
        check_dim(p.cols, counts.len())?;
        if counts.contains(&0) {
            return Err(Error::InvalidInput("counts must be at least 1".into()));
        }
        if p.values.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidInput("negative detection probability".into()));
        }
        let weights = DVector::from_iterator(counts.len(), counts.iter().map(|&y| y as f64));
        let problem = CompositeProblem::new(
            WeightedLogBarrier::new(weights)?,
            SparseMatrixMap::new(p.transpose())?,
            SimplexIndicator::new(p.rows)?,
        )?;
        Ok(Self {
            problem,
            total: counts.iter().map(|&y| y as f64).sum(),
        })
    }

    pub fn from_instance(inst: &PetInstance) -> Result<Self> {
        Self::new(&inst.probabilities, &inst.counts)
    }

    pub fn problem(&self) -> &PetProblem {
        &self.problem
    }

    /// `Ȳ`, the global relative-smoothness constant.
    pub fn total_counts(&self) -> f64 {
        self.total
    }

    pub fn dim(&self) -> usize {
        self.problem.dim()
    }

    pub fn value(&self, z: &DVector<f64>) -> Result<f64> {
        self.problem.barrier.value(&self.problem.map.apply(z)?)
    }

    /// `∇L(z) = −Σ_j Y_j p_j / ⟨p_j, z⟩`.
    pub fn gradient(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.problem.first_order(z)?.coef)
    }

    fn check_interior(&self, z: &DVector<f64>) -> Result<()> {
        check_dim(self.dim(), z.len())?;
        if let Some(i) = z.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::Domain(format!("component {i} of z is not positive")));
        }
        Ok(())
    }

    fn row(
        &self,
        k: usize,
        z: &DVector<f64>,
        alpha: f64,
        branch: Branch,
        elapsed_ms: f64,
    ) -> Result<TraceRecord> {
        let fo = self.problem.first_order(z)?;
        let objective = self.problem.barrier.value(&fo.image)?;
        let v = self.problem.term.lmo(&fo.coef)?;
        let gap = (fo.coef.dot(z) - v.linear_value).max(0.0);
        let du = self
            .problem
            .map
            .apply(&v.point)?
            .lincomb(1.0, &fo.image, -1.0);
        let dist = self.problem.barrier.local_norm_sq(&fo.image, &du)?.sqrt();
        Ok(TraceRecord {
            k,
            objective,
            gap,
            dist,
            alpha,
            branch,
            elapsed_ms,
        })
    }
}

/// `D_r(x, z)` for `r(z) = −Σ ln z_i`.
pub fn burg_divergence(x: &DVector<f64>, z: &DVector<f64>) -> Result<f64> {
    check_dim(z.len(), x.len())?;
    let mut acc = 0.0;
    for (xi, zi) in x.iter().zip(z.iter()) {
        acc += omega_star(xi / zi - 1.0)?;
    }
    Ok(acc)
}

const ROOT_MAX_ITERS: usize = 200;

/// `argmin_x ⟨∇L(z), x⟩ + α⁻¹D_r(x, z)` over the simplex.
///
/// Stationarity gives `x_i(μ) = 1/(1/z_i + α(∇_i L + μ))`; the multiplier
/// `μ` is the root of `Σ x_i(μ) = 1`, found by bisection.
pub fn rsgm_step(obj: &PetObjective, z: &DVector<f64>, alpha: f64) -> Result<DVector<f64>> {
    obj.check_interior(z)?;
    let g = obj.gradient(z)?;
    rsgm_subproblem(z, &g, alpha)
}

/// The simplex subproblem for a given gradient `g`.
pub fn rsgm_subproblem(z: &DVector<f64>, g: &DVector<f64>, alpha: f64) -> Result<DVector<f64>> {
    check_dim(z.len(), g.len())?;
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidInput(format!(
            "step size {alpha} must be positive"
        )));
    }
    if let Some(i) = z.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Domain(format!("component {i} of z is not positive")));
    }
    let inv: Vec<f64> = z.iter().map(|v| 1.0 / v).collect();
    let point = |mu: f64| -> DVector<f64> {
        DVector::from_fn(z.len(), |i, _| 1.0 / (inv[i] + alpha * (g[i] + mu)))
    };
    let excess = |mu: f64| -> f64 { point(mu).sum() - 1.0 };
    // x(μ) > 0 exactly when μ > μ_lo
    let mu_lo = (0..z.len())
        .map(|i| -inv[i] / alpha - g[i])
        .fold(f64::NEG_INFINITY, f64::max);

    let mut iters = 0;
    let mut hi = if 0.0 > mu_lo {
        0.0
    } else {
        mu_lo + mu_lo.abs().max(1.0)
    };
    let mut step = hi.abs().max(1.0);
    while excess(hi) > 0.0 {
        hi += step;
        step *= 2.0;
        iters += 1;
        if iters > ROOT_MAX_ITERS {
            return Err(Error::Numerical(
                "could not bracket the simplex multiplier".into(),
            ));
        }
    }
    let mut lo = mu_lo + 0.5 * (hi - mu_lo);
    while !(excess(lo) > 0.0) {
        hi = lo;
        lo = mu_lo + 0.5 * (lo - mu_lo);
        iters += 1;
        if iters > ROOT_MAX_ITERS || lo <= mu_lo {
            return Err(Error::Numerical(
                "could not bracket the simplex multiplier".into(),
            ));
        }
    }
    while iters < ROOT_MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let e = excess(mid);
        if e.abs() <= 1e-15 {
            lo = mid;
            hi = mid;
            break;
        }
        if e > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iters += 1;
    }
    let mut x = point(0.5 * (lo + hi));
    let residual = x.sum() - 1.0;
    if !(residual.abs() <= 1e-12) || x.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Numerical(format!(
            "simplex multiplier residual {residual}"
        )));
    }
    x /= x.sum();
    Ok(x)
}

/// Multiplicative update `z⁺_i = Σ_j Ȳ_j p_ij z_i / ⟨p_j, z⟩` with
/// normalized counts `Ȳ_j = Y_j / Σ Y`.
pub fn em_step(obj: &PetObjective, z: &DVector<f64>) -> Result<DVector<f64>> {
    obj.check_interior(z)?;
    let u = obj.problem.map.apply(z)?;
    if let Some(j) = u.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Domain(format!("bin {j} has zero expected count")));
    }
    let w = obj.problem.barrier.weights();
    let ratio = DVector::from_fn(u.len(), |j, _| w[j] / obj.total / u[j]);
    let back = obj.problem.map.apply_adjoint(&ratio)?;
    Ok(z.component_mul(&back))
}

#[derive(Debug, Clone)]
pub struct BaselineOutput {
    pub z: DVector<f64>,
    pub trace: Vec<TraceRecord>,
}

fn timer(record: bool) -> impl Fn() -> f64 {
    let start = Instant::now();
    move || {
        if record {
            start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        }
    }
}

/// Fixed step `1/Ȳ` for `iters` iterations.
pub fn rsgm_fixed_solve(
    obj: &PetObjective,
    z0: &DVector<f64>,
    iters: usize,
    record_timing: bool,
) -> Result<BaselineOutput> {
    obj.check_interior(z0)?;
    let elapsed = timer(record_timing);
    let l = obj.total;
    let mut z = z0.clone();
    let mut trace = Vec::with_capacity(iters + 1);
    for k in 0..iters {
        let next = rsgm_step(obj, &z, 1.0 / l)?;
        trace.push(obj.row(k, &z, 1.0 / l, Branch::Smoothness(l), elapsed())?);
        z = next;
    }
    trace.push(obj.row(iters, &z, 0.0, Branch::Final, elapsed())?);
    Ok(BaselineOutput { z, trace })
}

const MAX_DOUBLINGS: usize = 60;

/// Backtracking on the local smoothness parameter: start at
/// `max(L_{k−1}/2, 1)` (with `L_{−1} = Ȳ`) and double, never beyond `Ȳ`,
/// until the relative-smoothness inequality holds at the candidate.
pub fn rsgm_backtracking_solve(
    obj: &PetObjective,
    z0: &DVector<f64>,
    iters: usize,
    record_timing: bool,
) -> Result<BaselineOutput> {
    obj.check_interior(z0)?;
    let elapsed = timer(record_timing);
    let cap = obj.total;
    let mut prev = cap;
    let mut z = z0.clone();
    let mut trace = Vec::with_capacity(iters + 1);
    for k in 0..iters {
        let lz = obj.value(&z)?;
        let g = obj.gradient(&z)?;
        let mut l = (prev / 2.0).max(1.0).min(cap);
        let mut accepted = None;
        for _ in 0..=MAX_DOUBLINGS {
            let cand = rsgm_subproblem(&z, &g, 1.0 / l)?;
            let model = lz + g.dot(&(&cand - &z)) + l * burg_divergence(&cand, &z)?;
            let lc = obj.value(&cand)?;
            // rounding allowance on values of size |L(z)|
            if lc <= model + 1e-11 * (1.0 + lz.abs()) {
                accepted = Some(cand);
                break;
            }
            if l >= cap {
                break;
            }
            l = (2.0 * l).min(cap);
        }
        let Some(next) = accepted else {
            return Err(Error::Numerical(format!(
                "backtracking failed to accept at iteration {k}"
            )));
        };
        trace.push(obj.row(k, &z, 1.0 / l, Branch::Smoothness(l), elapsed())?);
        prev = l;
        z = next;
    }
    trace.push(obj.row(iters, &z, 0.0, Branch::Final, elapsed())?);
    Ok(BaselineOutput { z, trace })
}

/// EM iterations; the trace reports the unnormalized `L = Ȳ·L̄`.
pub fn em_solve(
    obj: &PetObjective,
    z0: &DVector<f64>,
    iters: usize,
    record_timing: bool,
) -> Result<BaselineOutput> {
    obj.check_interior(z0)?;
    let elapsed = timer(record_timing);
    let mut z = z0.clone();
    let mut trace = Vec::with_capacity(iters + 1);
    for k in 0..iters {
        let next = em_step(obj, &z)?;
        trace.push(obj.row(k, &z, 1.0, Branch::Em, elapsed())?);
        z = next;
    }
    trace.push(obj.row(iters, &z, 0.0, Branch::Final, elapsed())?);
    Ok(BaselineOutput { z, trace })
}
