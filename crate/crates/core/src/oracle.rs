//! Independent reference computations used by the tests: finite
//! differences, brute-force linear minimization, a golden-section line
//! search, and high-accuracy reference solves.

use nalgebra::{DMatrix, DVector};

use crate::barrier::{Barrier, ConePoint};
use crate::composite::{
    BoxLinearTerm, CompositeProblem, KnapsackBoxIndicator, NonsmoothTerm, SimplexIndicator,
};
use crate::error::{Error, Result};
use crate::fw_solver::{solve_fw, SolverConfig, StepRule, StopReason};
use crate::linmap::LinearMap;

fn coordinate_step(h: f64, xi: f64) -> f64 {
    h * xi.abs().max(1.0)
}

/// Central-difference derivative along a single perturbation. `eval` gets
/// the signed step; a step that leaves the domain is retried once at a
/// tenth of the size.
fn central<F>(mut eval: F, h: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    for step in [h, h / 10.0] {
        if let (Ok(plus), Ok(minus)) = (eval(step), eval(-step)) {
            return Ok((plus - minus) / (2.0 * step));
        }
    }
    Err(Error::Domain(format!(
        "finite-difference stencil of size {} leaves the domain",
        h / 10.0
    )))
}

/// Central-difference gradient with per-coordinate step `h·max(1, |x_i|)`.
pub fn fd_gradient<F>(fun: F, x: &DVector<f64>, h: f64) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<f64>,
{
    let mut g = DVector::zeros(x.len());
    for i in 0..x.len() {
        let step = coordinate_step(h, x[i]);
        g[i] = central(
            |t| {
                let mut y = x.clone();
                y[i] += t;
                fun(&y)
            },
            step,
        )?;
    }
    Ok(g)
}

/// Gradient of a function of symmetric matrices with respect to the trace
/// inner product. Off-diagonal entries are perturbed in symmetric pairs.
pub fn fd_gradient_sym<F>(fun: F, u: &DMatrix<f64>, h: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&DMatrix<f64>) -> Result<f64>,
{
    let n = u.nrows();
    if u.ncols() != n {
        return Err(Error::Dimension {
            expected: n,
            got: u.ncols(),
        });
    }
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let step = coordinate_step(h, u[(i, j)]);
            let d = central(
                |t| {
                    let mut v = u.clone();
                    v[(i, j)] += t;
                    if i != j {
                        v[(j, i)] += t;
                    }
                    fun(&v)
                },
                step,
            )?;
            if i == j {
                g[(i, i)] = d;
            } else {
                g[(i, j)] = d / 2.0;
                g[(j, i)] = d / 2.0;
            }
        }
    }
    Ok(g)
}

/// Second difference `(φ(h) − 2φ(0) + φ(−h))/h²` of `t ↦ fun(u + t w)`,
/// an estimate of `⟨∇²fun(u) w, w⟩`.
pub fn fd_second_directional<P, F>(fun: F, u: &P, w: &P, h: f64) -> Result<f64>
where
    P: ConePoint,
    F: Fn(&P) -> Result<f64>,
{
    for step in [h, h / 10.0] {
        let plus = fun(&u.lincomb(1.0, w, step));
        let minus = fun(&u.lincomb(1.0, w, -step));
        if let (Ok(a), Ok(b)) = (plus, minus) {
            return Ok((a - 2.0 * fun(u)? + b) / (step * step));
        }
    }
    Err(Error::Domain(
        "second-difference stencil leaves the domain".into(),
    ))
}

/// Terms whose minimizers of `⟨c, x⟩ + h(x)` can be found by listing a
/// finite candidate set.
pub trait VertexEnumerable: NonsmoothTerm {
    fn candidates(&self) -> Result<Vec<DVector<f64>>>;
}

impl VertexEnumerable for SimplexIndicator {
    fn candidates(&self) -> Result<Vec<DVector<f64>>> {
        let n = self.dim();
        Ok((0..n)
            .map(|i| DVector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 }))
            .collect())
    }
}

impl VertexEnumerable for BoxLinearTerm {
    fn candidates(&self) -> Result<Vec<DVector<f64>>> {
        let n = self.dim();
        if n > 12 {
            return Err(Error::InvalidInput(format!(
                "box enumeration is limited to 12 coordinates (got {n})"
            )));
        }
        let upper = self.upper();
        Ok((0..1usize << n)
            .map(|mask| DVector::from_fn(n, |i, _| if mask >> i & 1 == 1 { upper[i] } else { 0.0 }))
            .collect())
    }
}

impl VertexEnumerable for KnapsackBoxIndicator {
    /// Every vertex of `{0 ≤ x ≤ 1, ⟨t, x⟩ ≤ τ}`: feasible 0/1 points and
    /// points with one fractional coordinate on the budget face.
    fn candidates(&self) -> Result<Vec<DVector<f64>>> {
        let m = self.dim();
        if m > 8 {
            return Err(Error::InvalidInput(format!(
                "knapsack enumeration is limited to 8 coordinates (got {m})"
            )));
        }
        let t = self.weights();
        let tau = self.budget();
        let mut out = Vec::new();
        for mask in 0..1usize << m {
            let ones = |i: usize| mask >> i & 1 == 1;
            let used: f64 = (0..m).filter(|&i| ones(i)).map(|i| t[i]).sum();
            if used <= tau * (1.0 + 1e-12) {
                out.push(DVector::from_fn(m, |i, _| if ones(i) { 1.0 } else { 0.0 }));
            }
            for f in (0..m).filter(|&i| !ones(i)) {
                let frac = (tau - used) / t[f];
                if frac > 0.0 && frac < 1.0 {
                    out.push(DVector::from_fn(m, |i, _| {
                        if ones(i) {
                            1.0
                        } else if i == f {
                            frac
                        } else {
                            0.0
                        }
                    }));
                }
            }
        }
        Ok(out)
    }
}

/// Minimizes `⟨c, x⟩ + h(x)` over the candidate set; returns the point and
/// the optimal value.
pub fn brute_lmo<H: VertexEnumerable>(term: &H, c: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let mut best: Option<(DVector<f64>, f64)> = None;
    for x in term.candidates()? {
        let Some(hx) = term.value(&x) else { continue };
        let val = c.dot(&x) + hx;
        if best.as_ref().is_none_or(|(_, b)| val < *b) {
            best = Some((x, val));
        }
    }
    best.ok_or_else(|| Error::Infeasible("no feasible candidate".into()))
}

/// Golden-section minimization of a unimodal `phi` on `[lo, hi]`, down to a
/// bracket of width `tol`. `phi` may return `+∞` outside its domain.
pub fn golden_line_search<F>(phi: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(lo <= hi) || !(tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "bad golden-section bracket [{lo}, {hi}] with tol {tol}"
        )));
    }
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (phi(x1), phi(x2));
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = phi(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = phi(x2);
        }
    }
    // the endpoints are candidates too, since the minimum may sit on one
    let mid = 0.5 * (a + b);
    let best = [(lo, phi(lo)), (hi, phi(hi)), (mid, phi(mid))]
        .into_iter()
        .filter(|(_, v)| v.is_finite())
        .min_by(|x, y| x.1.total_cmp(&y.1));
    best.map(|(t, _)| t)
        .ok_or_else(|| Error::Domain("phi is infinite on the whole bracket".into()))
}

#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub x: DVector<f64>,
    /// `F(x)`, an upper bound on `F*`.
    pub value: f64,
    /// Final Frank-Wolfe gap, so `value − gap ≤ F*`.
    pub gap: f64,
    pub iterations: usize,
    /// Whether the relative gap target was reached.
    pub converged: bool,
}

impl ReferenceSolution {
    /// Certified lower bound on `F*`.
    pub fn lower_bound(&self) -> f64 {
        self.value - self.gap
    }
}

/// Default relative accuracy of reference solves.
pub const REFERENCE_REL_GAP: f64 = 1e-9;

/// High-accuracy solve with away steps and exact line search, stopped at
/// `G ≤ rel·(1 + |F|)` or after `max_iters` steps.
pub fn reference_solve<B, M, H>(
    p: &CompositeProblem<B, M, H>,
    x0: &DVector<f64>,
    rel: f64,
    max_iters: usize,
) -> Result<ReferenceSolution>
where
    B: Barrier,
    M: LinearMap<Output = B::Point>,
    H: NonsmoothTerm,
{
    let cfg = SolverConfig::new(StepRule::AwayExact)
        .relative_gap_tol(rel)
        .max_iters(max_iters)
        .record_timing(false);
    let out = solve_fw(p, x0, &cfg)?;
    let last = out.final_record();
    let converged = matches!(out.stop, StopReason::GapTolerance | StopReason::Optimal);
    Ok(ReferenceSolution {
        value: last.objective,
        gap: last.gap,
        iterations: out.iterations(),
        converged,
        x: out.x,
    })
}
