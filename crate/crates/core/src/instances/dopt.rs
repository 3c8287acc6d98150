//! D-optimal design instances and the O(n²) rank-one update path.

use nalgebra::{DMatrix, DVector};

use super::rng::InstanceRng;
use crate::barrier::LogDetBarrier;
use crate::composite::{CompositeProblem, KnapsackBoxIndicator, SimplexIndicator};
use crate::error::{Error, Result};
use crate::fw_solver::step_size_adaptive;
use crate::linmap::RankOneSumMap;

pub type DoptProblem = CompositeProblem<LogDetBarrier, RankOneSumMap, SimplexIndicator>;
pub type DoptKnapsackProblem = CompositeProblem<LogDetBarrier, RankOneSumMap, KnapsackBoxIndicator>;

/// Budget constraint `Σ t̄_i x_i ≤ τ` on top of `x ∈ [0,1]ᵐ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Knapsack {
    pub weights: Vec<f64>,
    pub budget: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoptInstance {
    pub seed: u64,
    pub stream: u64,
    /// `n × m`, one design point per column.
    pub points: DMatrix<f64>,
    pub knapsack: Option<Knapsack>,
}

/// Standard normal points; with `knapsack`, weights `U[0.5, 1.5]` and
/// budget `m/4`.
pub fn gen_dopt(n: usize, m: usize, seed: u64, knapsack: bool) -> Result<DoptInstance> {
    if n == 0 || m <= n {
        return Err(Error::InvalidInput(format!(
            "D-opt generator needs m > n >= 1 (got n={n}, m={m})"
        )));
    }
    for stream in 0..16 {
        let mut rng = InstanceRng::new(seed, stream);
        let mut points = DMatrix::zeros(n, m);
        for i in 0..m {
            for r in 0..n {
                points[(r, i)] = rng.normal();
            }
        }
        if !has_full_rank(&points) {
            continue;
        }
        let knapsack = knapsack.then(|| Knapsack {
            weights: (0..m).map(|_| rng.uniform_in(0.5, 1.5)).collect(),
            budget: m as f64 / 4.0,
        });
        return Ok(DoptInstance {
            seed,
            stream,
            points,
            knapsack,
        });
    }
    Err(Error::Numerical(
        "every D-opt draw was rank deficient".into(),
    ))
}

fn has_full_rank(points: &DMatrix<f64>) -> bool {
    let sv = points.clone().singular_values();
    let top = sv.max();
    top > 0.0 && sv.iter().filter(|s| **s > 1e-10 * top).count() == points.nrows()
}

impl DoptInstance {
    pub fn from_points(points: DMatrix<f64>, knapsack: Option<Knapsack>) -> Result<Self> {
        if !has_full_rank(&points) {
            return Err(Error::InvalidInput(
                "design points do not span the space".into(),
            ));
        }
        if let Some(k) = &knapsack {
            if k.weights.len() != points.ncols() {
                return Err(Error::Dimension {
                    expected: points.ncols(),
                    got: k.weights.len(),
                });
            }
        }
        Ok(Self {
            seed: 0,
            stream: 0,
            points,
            knapsack,
        })
    }

    pub fn dim(&self) -> usize {
        self.points.nrows()
    }

    pub fn num_points(&self) -> usize {
        self.points.ncols()
    }

    pub fn problem(&self) -> Result<DoptProblem> {
        CompositeProblem::new(
            LogDetBarrier::new(self.dim())?,
            RankOneSumMap::new(self.points.clone())?,
            SimplexIndicator::new(self.num_points())?,
        )
    }

    pub fn knapsack_problem(&self) -> Result<DoptKnapsackProblem> {
        let k = self
            .knapsack
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("instance has no knapsack data".into()))?;
        CompositeProblem::new(
            LogDetBarrier::new(self.dim())?,
            RankOneSumMap::new(self.points.clone())?,
            KnapsackBoxIndicator::new(DVector::from_column_slice(&k.weights), k.budget)?,
        )
    }

    pub fn start_center(&self) -> DVector<f64> {
        DVector::from_element(self.num_points(), 1.0 / self.num_points() as f64)
    }

    /// Uniform start `c·e` with the largest `c ≤ 1` meeting the budget.
    pub fn start_knapsack(&self) -> Result<DVector<f64>> {
        let k = self
            .knapsack
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("instance has no knapsack data".into()))?;
        let total: f64 = k.weights.iter().sum();
        Ok(DVector::from_element(
            self.num_points(),
            (k.budget / total).min(1.0),
        ))
    }

    /// `n ln(m/n)`, an upper bound on the initial gap at the barycenter.
    pub fn barycenter_gap_bound(&self) -> f64 {
        let (n, m) = (self.dim() as f64, self.num_points() as f64);
        n * (m / n).ln()
    }
}

/// One step of the rank-one update path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FastStep {
    pub index: usize,
    /// `Q_ii` at the iterate before the step.
    pub q_ii: f64,
    pub gap: f64,
    pub dist: f64,
    pub alpha: f64,
}

/// Adaptive Frank-Wolfe on the simplex-constrained D-opt problem, keeping
/// `B = (C X Cᵀ)⁻¹` and every `Q_ii = a_iᵀ B a_i` current through
/// Sherman–Morrison updates.
#[derive(Debug, Clone)]
pub struct DoptFastState {
    points: DMatrix<f64>,
    x: DVector<f64>,
    b: DMatrix<f64>,
    q: DVector<f64>,
    scratch_w: DVector<f64>,
    scratch_t: DVector<f64>,
    refactor_every: usize,
    since_refactor: usize,
    refactorizations: usize,
}

impl DoptFastState {
    pub const DEFAULT_REFACTOR_EVERY: usize = 50;

    pub fn new(points: DMatrix<f64>, x: DVector<f64>) -> Result<Self> {
        if x.len() != points.ncols() {
            return Err(Error::Dimension {
                expected: points.ncols(),
                got: x.len(),
            });
        }
        let (n, m) = points.shape();
        let mut s = Self {
            points,
            x,
            b: DMatrix::zeros(n, n),
            q: DVector::zeros(m),
            scratch_w: DVector::zeros(n),
            scratch_t: DVector::zeros(m),
            refactor_every: Self::DEFAULT_REFACTOR_EVERY,
            since_refactor: 0,
            refactorizations: 0,
        };
        s.refactor()?;
        s.refactorizations = 0;
        Ok(s)
    }

    pub fn with_refactor_every(mut self, every: usize) -> Self {
        self.refactor_every = every.max(1);
        self
    }

    pub fn x(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// `Q_ii` for every point.
    pub fn q_diag(&self) -> &DVector<f64> {
        &self.q
    }

    /// `∇f(x)_i = −Q_ii`.
    pub fn gradient(&self) -> DVector<f64> {
        -&self.q
    }

    /// `H(x)_ii = Q_ii²`.
    pub fn hessian_diag(&self) -> DVector<f64> {
        self.q.map(|v| v * v)
    }

    pub fn refactorizations(&self) -> usize {
        self.refactorizations
    }

    /// Recomputes `B` and `Q` from scratch.
    pub fn refactor(&mut self) -> Result<()> {
        let q = dense_q(&self.points, &self.x)?;
        let mut scaled = self.points.clone();
        for (i, mut col) in scaled.column_iter_mut().enumerate() {
            col *= self.x[i];
        }
        let gram = &scaled * self.points.transpose();
        let gram = (&gram + gram.transpose()) * 0.5;
        self.b = gram
            .cholesky()
            .ok_or_else(|| Error::Domain("design matrix is not positive definite".into()))?
            .inverse();
        self.q = q;
        self.since_refactor = 0;
        self.refactorizations += 1;
        Ok(())
    }

    /// Index of the Frank-Wolfe vertex: the largest `Q_ii`, smallest index
    /// on ties.
    pub fn fw_vertex(&self) -> usize {
        let mut best = 0;
        for i in 1..self.q.len() {
            if self.q[i] > self.q[best] {
                best = i;
            }
        }
        best
    }

    /// `G = Q_ii − n` and `D = sqrt(n − 2Q_ii + Q_ii²)` for vertex `e^i`.
    pub fn gap_and_dist(&self, i: usize) -> (f64, f64) {
        let n = self.points.nrows() as f64;
        let qi = self.q[i];
        ((qi - n).max(0.0), (n - 2.0 * qi + qi * qi).max(0.0).sqrt())
    }

    /// Takes the adaptive step toward the Frank-Wolfe vertex.
    pub fn iterate(&mut self) -> Result<FastStep> {
        let i = self.fw_vertex();
        self.iterate_with(i)
    }

    /// Takes the adaptive step toward `e^i`.
    pub fn iterate_with(&mut self, i: usize) -> Result<FastStep> {
        let (gap, dist) = self.gap_and_dist(i);
        let alpha = step_size_adaptive(gap, dist)?;
        let q_ii = self.q[i];
        self.step(i, alpha)?;
        Ok(FastStep {
            index: i,
            q_ii,
            gap,
            dist,
            alpha,
        })
    }

    /// `x ← (1−α)x + αe^i`, with `B` and `Q` updated in `O(n² + mn)`.
    pub fn step(&mut self, i: usize, alpha: f64) -> Result<()> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::InvalidInput(format!(
                "fast path needs 0 <= alpha < 1 (got {alpha})"
            )));
        }
        if alpha == 0.0 {
            return Ok(());
        }
        let beta = alpha / (1.0 - alpha);
        let scale = 1.0 / (1.0 - alpha);
        let qi = self.q[i];
        // w = B a_i, t_j = a_jᵀ w
        self.scratch_w
            .gemv(1.0, &self.b, &self.points.column(i), 0.0);
        self.scratch_t
            .gemv_tr(1.0, &self.points, &self.scratch_w, 0.0);
        let denom_q = 1.0 / beta + qi;
        for (qj, tj) in self.q.iter_mut().zip(self.scratch_t.iter()) {
            *qj = scale * (*qj - tj * tj / denom_q);
        }
        self.b.ger(
            -beta / (1.0 + beta * qi),
            &self.scratch_w,
            &self.scratch_w,
            1.0,
        );
        self.b *= scale;
        self.x *= 1.0 - alpha;
        self.x[i] += alpha;
        self.since_refactor += 1;
        if self.since_refactor >= self.refactor_every || self.q.iter().any(|v| *v < 0.0) {
            self.refactor()?;
        }
        Ok(())
    }
}

/// Dense `Q_ii = a_iᵀ (C X Cᵀ)⁻¹ a_i` via a fresh Cholesky factorization.
pub fn dense_q(points: &DMatrix<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
    let mut scaled = points.clone();
    for (i, mut col) in scaled.column_iter_mut().enumerate() {
        col *= x[i];
    }
    let gram = &scaled * points.transpose();
    let gram = (&gram + gram.transpose()) * 0.5;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Domain("design matrix is not positive definite".into()))?;
    let solved = chol.solve(points);
    Ok(DVector::from_fn(points.ncols(), |i, _| {
        points.column(i).dot(&solved.column(i))
    }))
}
