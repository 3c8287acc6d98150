mod common;

use barrierfw::composite::{BoxLinearTerm, KnapsackBoxIndicator, NonsmoothTerm, SimplexIndicator};
use barrierfw::instances::rng::InstanceRng;
use barrierfw::oracle::{brute_lmo, VertexEnumerable};
use common::random_vec;
use nalgebra::DVector;
use proptest::prelude::*;

/// The oracle's value matches enumeration and its point is feasible and
/// attains that value.
fn agrees<H: VertexEnumerable>(term: &H, c: &DVector<f64>) -> Result<(), TestCaseError> {
    let out = term.lmo(c).unwrap();
    let (_, best) = brute_lmo(term, c).unwrap();
    let got = out.linear_value + out.h_value;
    let tol = 1e-10 * (1.0 + best.abs() + c.amax());
    prop_assert!(
        (got - best).abs() <= tol,
        "lmo {} vs enumeration {}",
        got,
        best
    );
    let h = term.value(&out.point);
    prop_assert!(h.is_some(), "lmo point is infeasible");
    prop_assert!((h.unwrap() - out.h_value).abs() <= tol);
    prop_assert!((c.dot(&out.point) - out.linear_value).abs() <= tol);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn simplex_lmo(seed in any::<u64>(), n in 1usize..30) {
        let mut rng = InstanceRng::new(seed, 0);
        let c = random_vec(&mut rng, n);
        agrees(&SimplexIndicator::new(n).unwrap(), &c)?;
    }

    #[test]
    fn box_linear_lmo(seed in any::<u64>(), n in 1usize..9) {
        let mut rng = InstanceRng::new(seed, 0);
        let upper = DVector::from_fn(n, |_, _| rng.uniform_in(0.1, 5.0));
        let xi = random_vec(&mut rng, n);
        let term = BoxLinearTerm::new(upper, xi).unwrap();
        let c = random_vec(&mut rng, n);
        agrees(&term, &c)?;
    }

    #[test]
    fn knapsack_lmo(seed in any::<u64>(), m in 1usize..8) {
        let mut rng = InstanceRng::new(seed, 0);
        let t = DVector::from_fn(m, |_, _| rng.uniform_in(0.1, 3.0));
        let budget = rng.uniform_in(0.05, 1.0) * t.sum();
        let term = KnapsackBoxIndicator::new(t, budget).unwrap();
        let c = random_vec(&mut rng, m);
        agrees(&term, &c)?;
    }
}

#[test]
fn simplex_ties_pick_smallest_index() {
    let term = SimplexIndicator::new(3).unwrap();
    let out = term.lmo(&DVector::from_vec(vec![1.0, -2.0, -2.0])).unwrap();
    assert_eq!(out.point, DVector::from_vec(vec![0.0, 1.0, 0.0]));
}
