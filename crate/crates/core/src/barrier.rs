//! Logarithmically-homogeneous self-concordant barriers.
//!
//! A barrier `f` on the interior of a regular cone `K` with complexity
//! parameter `θ ≥ 1` satisfies `f(t·u) = f(u) − θ ln t`. Two families are
//! shipped: the weighted logarithm on the nonnegative orthant and the
//! log-determinant on the positive semidefinite cone. Both expose their
//! Fenchel conjugates in closed form.
//!
//! The scalar functions [`omega`] and [`omega_star`] drive the step-size model
//! and the descent bounds of the Frank-Wolfe method.

use std::fmt::Debug;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{check_dim, Error, Result};

/// Elements of the space a barrier lives on: vectors for the orthant,
/// symmetric matrices for the PSD cone.
pub trait ConePoint: Clone + Debug + PartialEq + Send + Sync {
    /// Euclidean (Frobenius for matrices) inner product.
    fn inner(&self, other: &Self) -> f64;
    /// `a·self + b·other`.
    fn lincomb(&self, a: f64, other: &Self, b: f64) -> Self;
    fn max_abs(&self) -> f64;
}

impl ConePoint for DVector<f64> {
    fn inner(&self, other: &Self) -> f64 {
        self.dot(other)
    }

    fn lincomb(&self, a: f64, other: &Self, b: f64) -> Self {
        self.zip_map(other, |s, o| a * s + b * o)
    }

    fn max_abs(&self) -> f64 {
        self.amax()
    }
}

impl ConePoint for DMatrix<f64> {
    fn inner(&self, other: &Self) -> f64 {
        self.dot(other)
    }

    fn lincomb(&self, a: f64, other: &Self, b: f64) -> Self {
        self.zip_map(other, |s, o| a * s + b * o)
    }

    fn max_abs(&self) -> f64 {
        self.amax()
    }
}

/// Restriction of a barrier to a line, written in separable form:
/// `f(u + α·du) = const − Σ_i weight_i · ln(base_i + α·slope_i)`.
///
/// The weighted-log barrier restricts to this form directly; the log-det
/// barrier does after a congruence that diagonalizes the direction.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableLogLine {
    pub weights: Vec<f64>,
    pub base: Vec<f64>,
    pub slope: Vec<f64>,
}

impl SeparableLogLine {
    pub fn new(weights: Vec<f64>, base: Vec<f64>, slope: Vec<f64>) -> Result<Self> {
        check_dim(weights.len(), base.len())?;
        check_dim(weights.len(), slope.len())?;
        Ok(Self {
            weights,
            base,
            slope,
        })
    }

    /// `−Σ weight_i ln(base_i + α slope_i)`, or `None` outside the domain.
    pub fn value(&self, alpha: f64) -> Option<f64> {
        let mut acc = 0.0;
        for ((w, b), s) in self.weights.iter().zip(&self.base).zip(&self.slope) {
            let arg = b + alpha * s;
            if !(arg > 0.0) {
                return None;
            }
            acc -= w * arg.ln();
        }
        Some(acc)
    }

    /// First derivative in `α`.
    pub fn derivative(&self, alpha: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.base)
            .zip(&self.slope)
            .map(|((w, b), s)| -w * s / (b + alpha * s))
            .sum()
    }

    pub fn second_derivative(&self, alpha: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.base)
            .zip(&self.slope)
            .map(|((w, b), s)| {
                let r = s / (b + alpha * s);
                w * r * r
            })
            .sum()
    }
}

/// A θ-logarithmically-homogeneous self-concordant barrier.
///
/// Every evaluation checks that the argument lies strictly inside the cone
/// and returns [`Error::Domain`] otherwise; no method ever returns `±∞`.
pub trait Barrier: Send + Sync {
    type Point: ConePoint;

    /// Complexity parameter `θ`.
    fn theta(&self) -> f64;

    /// Whether `u` has the shape of a point of the cone, interior or not.
    fn fits(&self, u: &Self::Point) -> bool;

    fn is_interior(&self, u: &Self::Point) -> bool;

    fn value(&self, u: &Self::Point) -> Result<f64>;

    fn gradient(&self, u: &Self::Point) -> Result<Self::Point>;

    /// `H(u)·w`.
    fn hessian_apply(&self, u: &Self::Point, w: &Self::Point) -> Result<Self::Point>;

    /// `‖w‖_u² = ⟨H(u)w, w⟩`.
    fn local_norm_sq(&self, u: &Self::Point, w: &Self::Point) -> Result<f64> {
        Ok(self.hessian_apply(u, w)?.inner(w).max(0.0))
    }

    /// `f*(y)` on the interior of the polar cone.
    fn conjugate_value(&self, y: &Self::Point) -> Result<f64>;

    /// `∇f*(y)`, the inverse map of [`Barrier::gradient`].
    fn conjugate_gradient(&self, y: &Self::Point) -> Result<Self::Point>;

    /// Separable form of `α ↦ f(u + α·du)` used by the exact line search.
    fn line_restriction(&self, u: &Self::Point, du: &Self::Point) -> Result<SeparableLogLine>;
}

/// Local (Hessian) norm anchored at an interior point.
pub struct LocalNorm<'a, B: Barrier> {
    barrier: &'a B,
    anchor: B::Point,
}

impl<'a, B: Barrier> LocalNorm<'a, B> {
    pub fn new(barrier: &'a B, anchor: B::Point) -> Result<Self> {
        if !barrier.is_interior(&anchor) {
            return Err(Error::Domain("local norm anchor is not interior".into()));
        }
        Ok(Self { barrier, anchor })
    }

    pub fn norm(&self, w: &B::Point) -> Result<f64> {
        Ok(self.barrier.local_norm_sq(&self.anchor, w)?.sqrt())
    }
}

/// `ω(a) = −a − ln(1 − a)` for `a < 1`.
pub fn omega(a: f64) -> Result<f64> {
    if !(a < 1.0) {
        return Err(Error::Domain(format!("omega undefined at {a}")));
    }
    if a.abs() < 1e-4 {
        // series avoids the cancellation between −a and −ln(1−a)
        let a2 = a * a;
        return Ok(a2 * (0.5 + a * (1.0 / 3.0 + a * (0.25 + a * 0.2))));
    }
    Ok(-a - (-a).ln_1p())
}

/// `ω*(s) = s − ln(1 + s)` for `s > −1`.
pub fn omega_star(s: f64) -> Result<f64> {
    if !(s > -1.0) {
        return Err(Error::Domain(format!("omega_star undefined at {s}")));
    }
    if s.abs() < 1e-4 {
        let s2 = s * s;
        return Ok(s2 * (0.5 - s * (1.0 / 3.0 - s * (0.25 - s * 0.2))));
    }
    Ok(s - s.ln_1p())
}

/// `f(u) = −Σ_j w_j ln u_j` on the open orthant, with `θ = Σ_j w_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedLogBarrier {
    weights: DVector<f64>,
    theta: f64,
}

impl WeightedLogBarrier {
    /// Weights must be at least 1 so that the barrier is self-concordant
    /// with the stated `θ`.
    pub fn new(weights: DVector<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidInput("empty weight vector".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 1.0) || !w.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "barrier weight {w} is below 1"
            )));
        }
        let theta = weights.sum();
        Ok(Self { weights, theta })
    }

    /// All weights equal to one.
    pub fn unit(m: usize) -> Result<Self> {
        Self::new(DVector::from_element(m, 1.0))
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    fn check(&self, u: &DVector<f64>) -> Result<()> {
        check_dim(self.dim(), u.len())?;
        if let Some((j, uj)) = u.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::Domain(format!(
                "coordinate {j} is {uj}, not positive"
            )));
        }
        Ok(())
    }

    fn check_polar(&self, y: &DVector<f64>) -> Result<()> {
        check_dim(self.dim(), y.len())?;
        if let Some((j, yj)) = y.iter().enumerate().find(|(_, v)| !(**v < 0.0)) {
            return Err(Error::Domain(format!(
                "dual coordinate {j} is {yj}, not negative"
            )));
        }
        Ok(())
    }
}

impl Barrier for WeightedLogBarrier {
    type Point = DVector<f64>;

    fn theta(&self) -> f64 {
        self.theta
    }

    fn fits(&self, u: &DVector<f64>) -> bool {
        u.len() == self.dim()
    }

    fn is_interior(&self, u: &DVector<f64>) -> bool {
        u.len() == self.dim() && u.iter().all(|v| *v > 0.0)
    }

    fn value(&self, u: &DVector<f64>) -> Result<f64> {
        self.check(u)?;
        Ok(-self
            .weights
            .iter()
            .zip(u.iter())
            .map(|(w, v)| w * v.ln())
            .sum::<f64>())
    }

    fn gradient(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(u)?;
        Ok(self.weights.zip_map(u, |w, v| -w / v))
    }

    fn hessian_apply(&self, u: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(u)?;
        check_dim(self.dim(), w.len())?;
        let mut out = w.clone();
        for j in 0..out.len() {
            out[j] *= self.weights[j] / (u[j] * u[j]);
        }
        Ok(out)
    }

    fn local_norm_sq(&self, u: &DVector<f64>, w: &DVector<f64>) -> Result<f64> {
        self.check(u)?;
        check_dim(self.dim(), w.len())?;
        Ok((0..u.len())
            .map(|j| {
                let r = w[j] / u[j];
                self.weights[j] * r * r
            })
            .sum())
    }

    fn conjugate_value(&self, y: &DVector<f64>) -> Result<f64> {
        self.check_polar(y)?;
        Ok(self
            .weights
            .iter()
            .zip(y.iter())
            .map(|(w, yj)| w * ((w / -yj).ln() - 1.0))
            .sum())
    }

    fn conjugate_gradient(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_polar(y)?;
        Ok(self.weights.zip_map(y, |w, yj| -w / yj))
    }

    fn line_restriction(&self, u: &DVector<f64>, du: &DVector<f64>) -> Result<SeparableLogLine> {
        self.check(u)?;
        check_dim(self.dim(), du.len())?;
        SeparableLogLine::new(
            self.weights.iter().copied().collect(),
            u.iter().copied().collect(),
            du.iter().copied().collect(),
        )
    }
}

/// `f(U) = −ln det U` on symmetric positive definite matrices of order `n`,
/// with `θ = n`.
///
/// Each evaluation factors `U` from scratch.
#[derive(Debug, Clone, PartialEq)]
pub struct LogDetBarrier {
    order: usize,
}

impl LogDetBarrier {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidInput("log-det barrier of order 0".into()));
        }
        Ok(Self { order })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    fn factor(&self, u: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
        check_dim(self.order, u.nrows())?;
        check_dim(self.order, u.ncols())?;
        Cholesky::new(u.clone())
            .ok_or_else(|| Error::Domain("matrix is not positive definite".into()))
    }

    /// `L⁻¹ W L⁻ᵀ` for the Cholesky factor `L` of `U`.
    fn congruence(chol: &Cholesky<f64, Dyn>, w: &DMatrix<f64>) -> DMatrix<f64> {
        let l = chol.l_dirty();
        let left = l
            .solve_lower_triangular(w)
            .expect("Cholesky factor has a positive diagonal");
        let right = l
            .solve_lower_triangular(&left.transpose())
            .expect("Cholesky factor has a positive diagonal");
        // symmetric up to rounding
        (&right + right.transpose()) * 0.5
    }
}

impl Barrier for LogDetBarrier {
    type Point = DMatrix<f64>;

    fn theta(&self) -> f64 {
        self.order as f64
    }

    fn fits(&self, u: &DMatrix<f64>) -> bool {
        u.nrows() == self.order && u.ncols() == self.order
    }

    fn is_interior(&self, u: &DMatrix<f64>) -> bool {
        u.nrows() == self.order && u.ncols() == self.order && Cholesky::new(u.clone()).is_some()
    }

    fn value(&self, u: &DMatrix<f64>) -> Result<f64> {
        let chol = self.factor(u)?;
        let l = chol.l_dirty();
        Ok(-2.0 * (0..self.order).map(|i| l[(i, i)].ln()).sum::<f64>())
    }

    fn gradient(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(-self.factor(u)?.inverse())
    }

    fn hessian_apply(&self, u: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.order, w.nrows())?;
        let inv = self.factor(u)?.inverse();
        Ok(&inv * w * &inv)
    }

    fn local_norm_sq(&self, u: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<f64> {
        check_dim(self.order, w.nrows())?;
        check_dim(self.order, w.ncols())?;
        let chol = self.factor(u)?;
        Ok(Self::congruence(&chol, w).norm_squared())
    }

    fn conjugate_value(&self, y: &DMatrix<f64>) -> Result<f64> {
        let neg = -y;
        let chol = self
            .factor(&neg)
            .map_err(|_| Error::Domain("dual matrix is not negative definite".into()))?;
        let l = chol.l_dirty();
        let logdet: f64 = 2.0 * (0..self.order).map(|i| l[(i, i)].ln()).sum::<f64>();
        Ok(-logdet - self.order as f64)
    }

    fn conjugate_gradient(&self, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let neg = -y;
        let chol = self
            .factor(&neg)
            .map_err(|_| Error::Domain("dual matrix is not negative definite".into()))?;
        Ok(chol.inverse())
    }

    fn line_restriction(&self, u: &DMatrix<f64>, du: &DMatrix<f64>) -> Result<SeparableLogLine> {
        check_dim(self.order, du.nrows())?;
        check_dim(self.order, du.ncols())?;
        let chol = self.factor(u)?;
        // −ln det(U + αW) = −ln det U − Σ ln(1 + α λ_i), λ = eig(L⁻¹ W L⁻ᵀ)
        let eig = SymmetricEigen::new(Self::congruence(&chol, du));
        let n = self.order;
        SeparableLogLine::new(
            vec![1.0; n],
            vec![1.0; n],
            eig.eigenvalues.iter().copied().collect(),
        )
    }
}
