//! Optimal log investment: `max Σ_j p_j ln(r_jᵀw)` over portfolios `w ∈ Δ_n`.
//!
//! The objective is rescaled by `1/p_min` so that every barrier weight is at
//! least one, giving `θ = 1/p_min`.

use nalgebra::{DMatrix, DVector};

use super::rng::InstanceRng;
use crate::barrier::WeightedLogBarrier;
use crate::composite::{CompositeProblem, SimplexIndicator};
use crate::error::{Error, Result};
use crate::linmap::DenseMatrixMap;

pub type LogInvestProblem = CompositeProblem<WeightedLogBarrier, DenseMatrixMap, SimplexIndicator>;

#[derive(Debug, Clone, PartialEq)]
pub struct LogInvestInstance {
    pub seed: u64,
    /// `m × n`; row `j` holds the gross returns `r_j` of outcome `j`.
    pub returns: DMatrix<f64>,
    /// Outcome probabilities, all positive, summing to one.
    pub probs: Vec<f64>,
}

/// Returns i.i.d. `U[0.5, 1.5]`; probabilities a Dirichlet(1) draw.
pub fn gen_log_invest(n: usize, m: usize, seed: u64) -> Result<LogInvestInstance> {
    if n < 2 || m < 2 {
        return Err(Error::InvalidInput(format!(
            "log-investment generator needs n, m >= 2 (got {n}, {m})"
        )));
    }
    let mut rng = InstanceRng::new(seed, 0);
    let mut returns = DMatrix::zeros(m, n);
    for j in 0..m {
        for i in 0..n {
            returns[(j, i)] = rng.uniform_in(0.5, 1.5);
        }
    }
    // normalized exponentials are Dirichlet(1, …, 1)
    let raw: Vec<f64> = (0..m)
        .map(|_| rng.exponential().max(f64::MIN_POSITIVE))
        .collect();
    let total: f64 = raw.iter().sum();
    let probs = raw.iter().map(|e| e / total).collect();
    LogInvestInstance::new(seed, returns, probs)
}

impl LogInvestInstance {
    pub fn new(seed: u64, returns: DMatrix<f64>, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != returns.nrows() {
            return Err(Error::Dimension {
                expected: returns.nrows(),
                got: probs.len(),
            });
        }
        if probs.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::InvalidInput(
                "outcome probabilities must be positive".into(),
            ));
        }
        if returns.iter().any(|r| !(*r >= 0.0)) {
            return Err(Error::InvalidInput("returns must be nonnegative".into()));
        }
        Ok(Self {
            seed,
            returns,
            probs,
        })
    }

    pub fn p_min(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Barrier weights `p_j / p_min`.
    pub fn weights(&self) -> DVector<f64> {
        let pmin = self.p_min();
        // the minimizer gets exactly 1 so rounding cannot push it below
        DVector::from_iterator(
            self.probs.len(),
            self.probs
                .iter()
                .map(|p| if *p == pmin { 1.0 } else { p / pmin }),
        )
    }

    pub fn problem(&self) -> Result<LogInvestProblem> {
        CompositeProblem::new(
            WeightedLogBarrier::new(self.weights())?,
            DenseMatrixMap::new(self.returns.clone()),
            SimplexIndicator::new(self.returns.ncols())?,
        )
    }

    pub fn start_center(&self) -> DVector<f64> {
        let n = self.returns.ncols();
        DVector::from_element(n, 1.0 / n as f64)
    }
}
