//! Composite problems `min F(x) = f(Ax) + h(x)`.
//!
//! `f` is a barrier, `A` a linear map and `h` a nonsmooth term whose domain
//! `X` is compact and which comes with an exact linear-minimization oracle.

use nalgebra::DVector;

use crate::barrier::{Barrier, ConePoint};
use crate::error::{check_dim, Error, Result};
use crate::linmap::LinearMap;

/// Residual allowed on constraints when evaluating indicator terms.
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// Output of a linear-minimization oracle call for `min ⟨c, x⟩ + h(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LmoOutput {
    pub point: DVector<f64>,
    /// `h(point)`.
    pub h_value: f64,
    /// `⟨c, point⟩`.
    pub linear_value: f64,
}

/// An away vertex for `x`: a point `s` of the active set such that the step
/// `x + γ(x − s)` stays in `X` for `γ ≤ max_step`.
#[derive(Debug, Clone, PartialEq)]
pub struct AwayVertex {
    pub point: DVector<f64>,
    pub h_value: f64,
    pub max_step: f64,
    /// Coordinate of `x` that is exactly zero after a step of `max_step`.
    pub drop_coordinate: Option<usize>,
}

pub trait NonsmoothTerm: Send + Sync {
    fn dim(&self) -> usize;

    /// `h(x)`, or `None` when `x ∉ X`.
    fn value(&self, x: &DVector<f64>) -> Option<f64>;

    /// Exact minimizer of `⟨c, x⟩ + h(x)` over `X`.
    fn lmo(&self, c: &DVector<f64>) -> Result<LmoOutput>;

    /// Upper bound on `max |h(x) − h(y)|` over `X`.
    fn variation_bound(&self) -> f64;

    /// Vertex to step away from, for terms whose domain is a polytope with a
    /// cheap active-set description. The default offers none.
    fn away_vertex(&self, _x: &DVector<f64>, _c: &DVector<f64>) -> Option<AwayVertex> {
        None
    }
}

/// Indicator of the unit simplex `Δ_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexIndicator {
    dim: usize,
}

impl SimplexIndicator {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("simplex of dimension 0".into()));
        }
        Ok(Self { dim })
    }

    pub fn barycenter(&self) -> DVector<f64> {
        DVector::from_element(self.dim, 1.0 / self.dim as f64)
    }
}

fn unit_vector(n: usize, i: usize) -> DVector<f64> {
    let mut e = DVector::zeros(n);
    e[i] = 1.0;
    e
}

impl NonsmoothTerm for SimplexIndicator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &DVector<f64>) -> Option<f64> {
        let ok = x.len() == self.dim
            && x.iter().all(|v| *v >= -FEASIBILITY_TOL)
            && (x.sum() - 1.0).abs() <= FEASIBILITY_TOL * x.len().max(1) as f64;
        ok.then_some(0.0)
    }

    fn lmo(&self, c: &DVector<f64>) -> Result<LmoOutput> {
        check_dim(self.dim, c.len())?;
        // smallest index among minimizers
        let mut best = 0;
        for i in 1..c.len() {
            if c[i] < c[best] {
                best = i;
            }
        }
        Ok(LmoOutput {
            point: unit_vector(self.dim, best),
            h_value: 0.0,
            linear_value: c[best],
        })
    }

    fn variation_bound(&self) -> f64 {
        0.0
    }

    fn away_vertex(&self, x: &DVector<f64>, c: &DVector<f64>) -> Option<AwayVertex> {
        let mut away: Option<usize> = None;
        for i in 0..x.len() {
            if x[i] > 0.0 && away.is_none_or(|a| c[i] > c[a]) {
                away = Some(i);
            }
        }
        let a = away?;
        if x[a] >= 1.0 {
            return None;
        }
        Some(AwayVertex {
            point: unit_vector(self.dim, a),
            h_value: 0.0,
            max_step: x[a] / (1.0 - x[a]),
            drop_coordinate: Some(a),
        })
    }
}

/// `h(x) = ξᵀx` on the box `[0, M]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxLinearTerm {
    upper: DVector<f64>,
    xi: DVector<f64>,
}

impl BoxLinearTerm {
    pub fn new(upper: DVector<f64>, xi: DVector<f64>) -> Result<Self> {
        check_dim(upper.len(), xi.len())?;
        if upper.iter().any(|m| !(*m > 0.0) || !m.is_finite()) {
            return Err(Error::InvalidInput(
                "box upper bounds must be positive and finite".into(),
            ));
        }
        Ok(Self { upper, xi })
    }

    /// Same bound `m` on every coordinate.
    pub fn uniform(m: f64, xi: DVector<f64>) -> Result<Self> {
        Self::new(DVector::from_element(xi.len(), m), xi)
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn xi(&self) -> &DVector<f64> {
        &self.xi
    }
}

impl NonsmoothTerm for BoxLinearTerm {
    fn dim(&self) -> usize {
        self.xi.len()
    }

    fn value(&self, x: &DVector<f64>) -> Option<f64> {
        let ok = x.len() == self.dim()
            && x.iter()
                .zip(self.upper.iter())
                .all(|(v, m)| *v >= -FEASIBILITY_TOL && *v <= m + FEASIBILITY_TOL * m.max(1.0));
        ok.then(|| self.xi.dot(x))
    }

    fn lmo(&self, c: &DVector<f64>) -> Result<LmoOutput> {
        check_dim(self.dim(), c.len())?;
        let point = DVector::from_fn(self.dim(), |i, _| {
            if c[i] + self.xi[i] < 0.0 {
                self.upper[i]
            } else {
                0.0
            }
        });
        Ok(LmoOutput {
            h_value: self.xi.dot(&point),
            linear_value: c.dot(&point),
            point,
        })
    }

    fn variation_bound(&self) -> f64 {
        self.upper
            .iter()
            .zip(self.xi.iter())
            .map(|(m, x)| m * x.abs())
            .sum()
    }
}

/// Indicator of `{x ∈ [0,1]ᵐ : Σ t̄_i x_i ≤ τ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnapsackBoxIndicator {
    weights: DVector<f64>,
    budget: f64,
}

impl KnapsackBoxIndicator {
    pub fn new(weights: DVector<f64>, budget: f64) -> Result<Self> {
        if !(budget > 0.0) || !budget.is_finite() {
            return Err(Error::InvalidInput(format!(
                "knapsack budget {budget} must be positive"
            )));
        }
        if weights.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(Error::InvalidInput(
                "knapsack weights must be nonnegative".into(),
            ));
        }
        Ok(Self { weights, budget })
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }
}

impl NonsmoothTerm for KnapsackBoxIndicator {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn value(&self, x: &DVector<f64>) -> Option<f64> {
        let ok = x.len() == self.dim()
            && x.iter()
                .all(|v| *v >= -FEASIBILITY_TOL && *v <= 1.0 + FEASIBILITY_TOL)
            && self.weights.dot(x) <= self.budget * (1.0 + FEASIBILITY_TOL);
        ok.then_some(0.0)
    }

    /// Greedy fill by increasing `c_i / t̄_i` over the negative costs; the
    /// last item taken may be fractional.
    fn lmo(&self, c: &DVector<f64>) -> Result<LmoOutput> {
        check_dim(self.dim(), c.len())?;
        let mut order: Vec<usize> = (0..c.len()).filter(|&i| c[i] < 0.0).collect();
        let ratio = |i: usize| {
            if self.weights[i] > 0.0 {
                c[i] / self.weights[i]
            } else {
                f64::NEG_INFINITY
            }
        };
        order.sort_by(|&a, &b| ratio(a).partial_cmp(&ratio(b)).expect("finite costs"));
        let mut point = DVector::zeros(self.dim());
        let mut left = self.budget;
        for i in order {
            let t = self.weights[i];
            if t <= left {
                point[i] = 1.0;
                left -= t;
            } else {
                point[i] = left / t;
                break;
            }
        }
        Ok(LmoOutput {
            h_value: 0.0,
            linear_value: c.dot(&point),
            point,
        })
    }

    fn variation_bound(&self) -> f64 {
        0.0
    }
}

/// Objective value that is either finite or marks an infeasible point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObjectiveValue {
    Finite(f64),
    Infeasible,
}

impl ObjectiveValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            ObjectiveValue::Finite(v) => Some(v),
            ObjectiveValue::Infeasible => None,
        }
    }
}

/// First-order data at an iterate: `u = Ax`, `∇f(u)` and `c = A*∇f(u)`.
#[derive(Debug, Clone)]
pub struct FirstOrder<P> {
    pub image: P,
    pub grad: P,
    pub coef: DVector<f64>,
}

/// `F(x) = f(Ax) + h(x)`.
#[derive(Debug, Clone)]
pub struct CompositeProblem<B, M, H> {
    pub barrier: B,
    pub map: M,
    pub term: H,
}

impl<B, M, H> CompositeProblem<B, M, H>
where
    B: Barrier,
    M: LinearMap<Output = B::Point>,
    H: NonsmoothTerm,
{
    pub fn new(barrier: B, map: M, term: H) -> Result<Self> {
        check_dim(term.dim(), map.input_dim())?;
        let probe = map.apply(&DVector::zeros(map.input_dim()))?;
        if !barrier.fits(&probe) {
            return Err(Error::InvalidInput(
                "linear map output does not match the barrier's space".into(),
            ));
        }
        Ok(Self { barrier, map, term })
    }

    pub fn dim(&self) -> usize {
        self.map.input_dim()
    }

    pub fn theta(&self) -> f64 {
        self.barrier.theta()
    }

    pub fn variation_bound(&self) -> f64 {
        self.term.variation_bound()
    }

    /// `θ + R_h`.
    pub fn scale(&self) -> f64 {
        self.theta() + self.variation_bound()
    }

    pub fn objective(&self, x: &DVector<f64>) -> ObjectiveValue {
        let Some(h) = self.term.value(x) else {
            return ObjectiveValue::Infeasible;
        };
        let Ok(u) = self.map.apply(x) else {
            return ObjectiveValue::Infeasible;
        };
        match self.barrier.value(&u) {
            Ok(f) => ObjectiveValue::Finite(f + h),
            Err(_) => ObjectiveValue::Infeasible,
        }
    }

    /// `F(x)`, with infeasibility reported as an error.
    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        let h = self.h_value(x)?;
        Ok(self.barrier.value(&self.map.apply(x)?)? + h)
    }

    pub fn h_value(&self, x: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        self.term
            .value(x)
            .ok_or_else(|| Error::Infeasible("point is outside the domain of h".into()))
    }

    /// Checks `x ∈ X` and `Ax ∈ int K`.
    pub fn check_start(&self, x: &DVector<f64>) -> Result<()> {
        self.h_value(x)?;
        let u = self.map.apply(x)?;
        if !self.barrier.is_interior(&u) {
            return Err(Error::Infeasible(
                "image of the start point is not interior".into(),
            ));
        }
        Ok(())
    }

    pub fn first_order(&self, x: &DVector<f64>) -> Result<FirstOrder<B::Point>> {
        let image = self.map.apply(x)?;
        let grad = self.barrier.gradient(&image)?;
        let coef = self.map.apply_adjoint(&grad)?;
        Ok(FirstOrder { image, grad, coef })
    }

    /// Oracle call of the Frank-Wolfe step at `x`.
    pub fn lmo_at(&self, x: &DVector<f64>) -> Result<LmoOutput> {
        self.term.lmo(&self.first_order(x)?.coef)
    }

    /// `G = ⟨∇f(Ax), A(x − v)⟩ + h(x) − h(v)`.
    pub fn fw_gap(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim(), v.len())?;
        let fo = self.first_order(x)?;
        let hx = self.h_value(x)?;
        let hv = self.h_value(v)?;
        Ok(fo.coef.dot(x) - fo.coef.dot(v) + hx - hv)
    }

    /// `D = ‖A(v − x)‖_{Ax}`.
    pub fn local_distance(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim(), v.len())?;
        let u = self.map.apply(x)?;
        let du = self.map.apply(v)?.lincomb(1.0, &u, -1.0);
        Ok(self.barrier.local_norm_sq(&u, &du)?.sqrt())
    }

    /// Dual point `∇f(Ax)` associated with a primal iterate.
    pub fn dual_point(&self, x: &DVector<f64>) -> Result<B::Point> {
        self.barrier.gradient(&self.map.apply(x)?)
    }

    /// `d(y) = f*(y) + h*(−A*y)`, with `h*` evaluated through one oracle call.
    pub fn dual_objective(&self, y: &B::Point) -> Result<f64> {
        let fstar = self.barrier.conjugate_value(y)?;
        let c = self.map.apply_adjoint(y)?;
        let out = self.term.lmo(&c)?;
        // h*(−c) = max_x ⟨−c, x⟩ − h(x) = −min_x (⟨c, x⟩ + h(x))
        Ok(fstar - (out.linear_value + out.h_value))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrier::{LogDetBarrier, WeightedLogBarrier};
    use crate::linmap::{DenseMatrixMap, IdentityMap, RankOneSumMap};
    use nalgebra::DMatrix;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
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
    fn objective_examples() {
        let toy = CompositeProblem::new(
            WeightedLogBarrier::unit(1).unwrap(),
            DenseMatrixMap::new(DMatrix::from_element(1, 1, 1.0)),
            SimplexIndicator::new(1).unwrap(),
        )
        .unwrap();
        assert_eq!(toy.objective(&v(&[1.0])), ObjectiveValue::Finite(0.0));
        assert_eq!(toy.objective(&v(&[2.0])), ObjectiveValue::Infeasible);
        let f = two_bin().objective(&v(&[0.5, 0.5])).finite().unwrap();
        assert!((f - 1.3862943611198906).abs() < 1e-15);
    }

    #[test]
    fn lmo_examples() {
        let s = SimplexIndicator::new(3).unwrap();
        assert_eq!(
            s.lmo(&v(&[3.0, 1.0, 2.0])).unwrap().point,
            v(&[0.0, 1.0, 0.0])
        );
        let b = BoxLinearTerm::uniform(1.0, v(&[0.0, 0.0])).unwrap();
        assert_eq!(b.lmo(&v(&[-1.0, 2.0])).unwrap().point, v(&[1.0, 0.0]));
        let k = KnapsackBoxIndicator::new(v(&[1.0, 1.0, 1.0]), 1.5).unwrap();
        assert_eq!(
            k.lmo(&v(&[-3.0, -2.0, -1.0])).unwrap().point,
            v(&[1.0, 0.5, 0.0])
        );
        assert!(KnapsackBoxIndicator::new(v(&[1.0]), 0.0).is_err());
    }

    #[test]
    fn simplex_ties_pick_smallest_index() {
        let s = SimplexIndicator::new(3).unwrap();
        assert_eq!(
            s.lmo(&v(&[1.0, 0.0, 0.0])).unwrap().point,
            v(&[0.0, 1.0, 0.0])
        );
    }

    #[test]
    fn variation_bounds() {
        assert_eq!(SimplexIndicator::new(4).unwrap().variation_bound(), 0.0);
        assert_eq!(
            BoxLinearTerm::uniform(2.0, v(&[1.0, -3.0]))
                .unwrap()
                .variation_bound(),
            8.0
        );
        assert_eq!(
            KnapsackBoxIndicator::new(v(&[1.0]), 1.0)
                .unwrap()
                .variation_bound(),
            0.0
        );
    }

    #[test]
    fn fw_gap_on_two_bin_toy() {
        let p = two_bin();
        let x = v(&[0.9, 0.1]);
        let out = p.lmo_at(&x).unwrap();
        assert_eq!(out.point, v(&[0.0, 1.0]));
        let g = p.fw_gap(&x, &out.point).unwrap();
        // (−1/0.9)(0.9) + (−10)(0.1 − 1) = −1 + 9
        assert!((g - 8.0).abs() < 1e-12);
        assert_eq!(p.fw_gap(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn local_distance_example() {
        let p = CompositeProblem::new(
            WeightedLogBarrier::unit(2).unwrap(),
            IdentityMap::new(2),
            BoxLinearTerm::uniform(2.0, v(&[0.0, 0.0])).unwrap(),
        )
        .unwrap();
        let d = p.local_distance(&v(&[1.0, 1.0]), &v(&[2.0, 0.0])).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(
            p.local_distance(&v(&[1.0, 1.0]), &v(&[1.0, 1.0])).unwrap(),
            0.0
        );
    }

    #[test]
    fn orthonormal_design_is_optimal_at_barycenter() {
        let pts: Vec<_> = (0..3).map(|i| unit_vector(3, i)).collect();
        let p = CompositeProblem::new(
            LogDetBarrier::new(3).unwrap(),
            RankOneSumMap::from_points(&pts).unwrap(),
            SimplexIndicator::new(3).unwrap(),
        )
        .unwrap();
        let x = p.term.barycenter();
        let out = p.lmo_at(&x).unwrap();
        assert!(p.fw_gap(&x, &out.point).unwrap().abs() < 1e-14);
    }

    #[test]
    fn dual_objective_example() {
        let d = two_bin().dual_objective(&v(&[-1.0, -1.0])).unwrap();
        assert!((d + 1.0).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let r = CompositeProblem::new(
            WeightedLogBarrier::unit(3).unwrap(),
            IdentityMap::new(2),
            SimplexIndicator::new(2).unwrap(),
        );
        assert!(r.is_err());
    }
}
