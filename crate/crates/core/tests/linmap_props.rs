mod common;

use barrierfw::barrier::ConePoint;
use barrierfw::instances::rng::InstanceRng;
use barrierfw::linmap::{
    CsrMatrix, DenseMatrixMap, IdentityMap, LinearMap, RankOneSumMap, SparseMatrixMap,
};
use common::{random_sym, random_vec};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// `⟨Ax, y⟩ = ⟨x, A*y⟩` and linearity in `x`.
fn check_map<M: LinearMap>(
    map: &M,
    rng: &mut InstanceRng,
    y: &M::Output,
) -> Result<(), TestCaseError> {
    let n = map.input_dim();
    let (x, z) = (random_vec(rng, n), random_vec(rng, n));
    let (a, b) = (rng.normal(), rng.normal());
    let ax = map.apply(&x).unwrap();
    let lhs = ax.inner(y);
    let rhs = x.dot(&map.apply_adjoint(y).unwrap());
    let scale = 1.0 + ax.max_abs() * y.max_abs() * n as f64;
    prop_assert!(
        (lhs - rhs).abs() <= 1e-12 * scale,
        "adjoint: {} vs {}",
        lhs,
        rhs
    );

    let combo = map.apply(&(&x * a + &z * b)).unwrap();
    let parts = ax.lincomb(a, &map.apply(&z).unwrap(), b);
    let err = combo.lincomb(1.0, &parts, -1.0).max_abs();
    prop_assert!(
        err <= 1e-12 * (1.0 + parts.max_abs()),
        "linearity error {}",
        err
    );
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn identity_map(seed in any::<u64>(), n in 1usize..20) {
        let mut rng = InstanceRng::new(seed, 0);
        let y = random_vec(&mut rng, n);
        check_map(&IdentityMap::new(n), &mut rng, &y)?;
    }

    #[test]
    fn dense_map(seed in any::<u64>(), m in 1usize..12, n in 1usize..12) {
        let mut rng = InstanceRng::new(seed, 0);
        let a = DMatrix::from_fn(m, n, |_, _| rng.normal());
        let y = random_vec(&mut rng, m);
        check_map(&DenseMatrixMap::new(a), &mut rng, &y)?;
    }

    #[test]
    fn sparse_map_matches_dense(seed in any::<u64>(), m in 1usize..15, n in 1usize..15) {
        let mut rng = InstanceRng::new(seed, 0);
        let mut triplets = Vec::new();
        for r in 0..m {
            for c in 0..n {
                if rng.uniform() < 0.3 {
                    triplets.push((r, c, rng.normal()));
                }
            }
        }
        let csr = CsrMatrix::from_triplets(m, n, &triplets).unwrap();
        let dense = csr.to_dense();
        let map = SparseMatrixMap::new(csr).unwrap();
        let y = random_vec(&mut rng, m);
        check_map(&map, &mut rng, &y)?;
        let x = random_vec(&mut rng, n);
        prop_assert!((map.apply(&x).unwrap() - &dense * &x).amax() <= 1e-12 * (1.0 + x.amax() * n as f64));
        prop_assert!((map.apply_adjoint(&y).unwrap() - dense.transpose() * &y).amax() <= 1e-12 * (1.0 + y.amax() * m as f64));
    }

    #[test]
    fn rank_one_sum_map(seed in any::<u64>(), order in 1usize..6, m in 1usize..15) {
        let mut rng = InstanceRng::new(seed, 0);
        let points = DMatrix::from_fn(order, m, |_, _| rng.normal());
        let map = RankOneSumMap::new(points.clone()).unwrap();
        let y = random_sym(&mut rng, order);
        check_map(&map, &mut rng, &y)?;
        // adjoint entries are the quadratic forms a_iᵀ Y a_i
        let adj = map.apply_adjoint(&y).unwrap();
        for i in 0..m {
            let a = points.column(i);
            let q = (a.transpose() * &y * a)[(0, 0)];
            prop_assert!((adj[i] - q).abs() <= 1e-12 * (1.0 + q.abs()));
        }
    }
}

#[test]
fn csr_rejects_out_of_range_entries() {
    assert!(CsrMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
}
