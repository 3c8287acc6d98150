//! Synthetic PET instances: sparse detection probabilities, Poisson event
//! counts, and the two starting points used in the benchmark.

use nalgebra::DVector;

use super::rng::InstanceRng;
use crate::barrier::WeightedLogBarrier;
use crate::composite::{CompositeProblem, SimplexIndicator};
use crate::error::{Error, Result};
use crate::linmap::{CsrMatrix, SparseMatrixMap};

pub type PetProblem = CompositeProblem<WeightedLogBarrier, SparseMatrixMap, SimplexIndicator>;

/// Poisson maximum-likelihood instance `min −Σ_j Y_j ln⟨p_j, z⟩` over `Δ_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PetInstance {
    pub seed: u64,
    /// Random stream the instance was drawn from (nonzero after redraws).
    pub stream: u64,
    /// Number of bins requested before pruning.
    pub bins_generated: usize,
    /// `n × m` detection probabilities after pruning; row `i` is voxel `i`.
    pub probabilities: CsrMatrix,
    /// Counts `Y_j ≥ 1`, one per kept bin.
    pub counts: Vec<u64>,
    /// Mean emission `x_i` of each voxel.
    pub x_true: Vec<f64>,
}

/// Bins per voxel: `⌊m/20⌋`.
pub fn bins_per_voxel(m: usize) -> usize {
    m / 20
}

/// Draws the `n × m` probability matrix before pruning: each voxel picks
/// `⌊m/20⌋` distinct bins, draws `U[0,1]` weights, and normalizes them.
pub fn draw_pet_probabilities(rng: &mut InstanceRng, n: usize, m: usize) -> Result<CsrMatrix> {
    let k = bins_per_voxel(m);
    let mut triplets = Vec::with_capacity(n * k);
    for i in 0..n {
        let bins = rng.sample_without_replacement(m, k);
        let raw: Vec<f64> = bins.iter().map(|_| rng.uniform()).collect();
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Numerical(format!(
                "voxel {i} drew all-zero probabilities"
            )));
        }
        for (j, p) in bins.into_iter().zip(raw) {
            triplets.push((i, j, p / total));
        }
    }
    CsrMatrix::from_triplets(n, m, &triplets)
}

pub fn gen_pet(n: usize, m: usize, seed: u64) -> Result<PetInstance> {
    if n < 20 || m < 20 {
        return Err(Error::InvalidInput(format!(
            "PET generator needs n, m >= 20 (got {n}, {m})"
        )));
    }
    for stream in 0..16 {
        if let Some(inst) = draw_pet(n, m, seed, stream)? {
            return Ok(inst);
        }
    }
    Err(Error::Numerical(
        "every PET draw had zero total counts".into(),
    ))
}

fn draw_pet(n: usize, m: usize, seed: u64, stream: u64) -> Result<Option<PetInstance>> {
    let mut rng = InstanceRng::new(seed, stream);
    let p = draw_pet_probabilities(&mut rng, n, m)?;
    let x_true: Vec<f64> = (0..n).map(|_| (100.0 + 3.0 * rng.normal()).abs()).collect();
    let emitted: Vec<u64> = x_true.iter().map(|&x| rng.poisson(x)).collect();
    let mut means = vec![0.0; m];
    for (i, &xi) in emitted.iter().enumerate() {
        for (j, pij) in p.row(i) {
            means[j] += pij * xi as f64;
        }
    }
    let counts_all: Vec<u64> = means.iter().map(|&y| rng.poisson(y)).collect();
    let kept: Vec<usize> = (0..m).filter(|&j| counts_all[j] > 0).collect();
    if kept.is_empty() {
        return Ok(None);
    }
    let mut new_col = vec![usize::MAX; m];
    for (c, &j) in kept.iter().enumerate() {
        new_col[j] = c;
    }
    let mut triplets = Vec::with_capacity(p.nnz());
    for i in 0..n {
        for (j, v) in p.row(i) {
            if new_col[j] != usize::MAX {
                triplets.push((i, new_col[j], v));
            }
        }
    }
    let probabilities = CsrMatrix::from_triplets(n, kept.len(), &triplets)?;
    let counts = kept.iter().map(|&j| counts_all[j]).collect();
    Ok(Some(PetInstance {
        seed,
        stream,
        bins_generated: m,
        probabilities,
        counts,
        x_true,
    }))
}

impl PetInstance {
    /// Builds an instance from its parts, checking the invariants.
    pub fn from_parts(
        seed: u64,
        stream: u64,
        bins_generated: usize,
        probabilities: CsrMatrix,
        counts: Vec<u64>,
        x_true: Vec<f64>,
    ) -> Result<Self> {
        probabilities.validate()?;
        if counts.len() != probabilities.cols {
            return Err(Error::Dimension {
                expected: probabilities.cols,
                got: counts.len(),
            });
        }
        if counts.contains(&0) {
            return Err(Error::InvalidInput("PET counts must be at least 1".into()));
        }
        if probabilities.values.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidInput("negative detection probability".into()));
        }
        Ok(Self {
            seed,
            stream,
            bins_generated,
            probabilities,
            counts,
            x_true,
        })
    }

    pub fn voxels(&self) -> usize {
        self.probabilities.rows
    }

    pub fn bins(&self) -> usize {
        self.probabilities.cols
    }

    /// `Ȳ = Σ_j Y_j`, which is also `θ` of the barrier.
    pub fn total_counts(&self) -> f64 {
        self.counts.iter().map(|&y| y as f64).sum()
    }

    /// The map `z ↦ (⟨p_j, z⟩)_j`, i.e. `Pᵀ`.
    pub fn map(&self) -> Result<SparseMatrixMap> {
        SparseMatrixMap::new(self.probabilities.transpose())
    }

    pub fn problem(&self) -> Result<PetProblem> {
        let weights = DVector::from_iterator(self.bins(), self.counts.iter().map(|&y| y as f64));
        CompositeProblem::new(
            WeightedLogBarrier::new(weights)?,
            self.map()?,
            SimplexIndicator::new(self.voxels())?,
        )
    }

    /// Greedy cover: repeatedly take the voxel that sees the most bins not
    /// yet seen, smallest index on ties, until every bin is seen.
    pub fn cover_set(&self) -> Result<Vec<usize>> {
        let n = self.voxels();
        let mut covered = vec![false; self.bins()];
        let mut left = self.bins();
        let mut chosen = Vec::new();
        let mut used = vec![false; n];
        while left > 0 {
            let mut best = None;
            let mut best_gain = 0;
            for i in (0..n).filter(|&i| !used[i]) {
                let gain = self
                    .probabilities
                    .row(i)
                    .filter(|&(j, v)| v > 0.0 && !covered[j])
                    .count();
                if gain > best_gain {
                    best_gain = gain;
                    best = Some(i);
                }
            }
            let Some(i) = best else {
                return Err(Error::InvalidInput(
                    "some bin is not seen by any voxel".into(),
                ));
            };
            used[i] = true;
            chosen.push(i);
            for (j, v) in self.probabilities.row(i) {
                if v > 0.0 && !covered[j] {
                    covered[j] = true;
                    left -= 1;
                }
            }
        }
        chosen.sort_unstable();
        Ok(chosen)
    }

    /// Start near the boundary: `δ̄ = 10⁻⁶/n` off the cover set and the
    /// remaining mass spread evenly over it.
    pub fn start_boundary(&self) -> Result<DVector<f64>> {
        let n = self.voxels();
        let cover = self.cover_set()?;
        let small = 1e-6 / n as f64;
        let big = (1.0 - (n - cover.len()) as f64 * small) / cover.len() as f64;
        let mut z = DVector::from_element(n, small);
        for i in cover {
            z[i] = big;
        }
        Ok(z)
    }

    /// Barycenter `e/n`.
    pub fn start_center(&self) -> DVector<f64> {
        DVector::from_element(self.voxels(), 1.0 / self.voxels() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linmap::LinearMap;

    #[test]
    fn rows_are_normalized_before_pruning() {
        let mut rng = InstanceRng::new(5, 0);
        let p = draw_pet_probabilities(&mut rng, 30, 100).unwrap();
        for i in 0..30 {
            assert_eq!(p.row(i).count(), 5);
            let s: f64 = p.row(i).map(|(_, v)| v).sum();
            assert!((s - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn generated_instance_is_valid_and_reproducible() {
        let a = gen_pet(50, 60, 11).unwrap();
        let b = gen_pet(50, 60, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.counts.iter().all(|&y| y >= 1));
        assert!(a.bins() <= 60);
        assert_ne!(gen_pet(50, 60, 12).unwrap(), a);
    }

    #[test]
    fn starts_are_interior() {
        let inst = gen_pet(40, 40, 3).unwrap();
        let map = inst.map().unwrap();
        for z in [inst.start_boundary().unwrap(), inst.start_center()] {
            assert!((z.sum() - 1.0).abs() < 1e-12);
            assert!(map.apply(&z).unwrap().iter().all(|u| *u > 0.0));
        }
        let zb = inst.start_boundary().unwrap();
        assert_eq!(zb.min(), 1e-6 / 40.0);
    }

    #[test]
    fn small_sizes_are_rejected() {
        assert!(gen_pet(19, 100, 0).is_err());
        assert!(gen_pet(100, 19, 0).is_err());
    }

    #[test]
    fn center_start_of_four_voxels() {
        let p =
            CsrMatrix::from_triplets(4, 1, &[(0, 0, 1.0), (1, 0, 1.0), (2, 0, 1.0), (3, 0, 1.0)])
                .unwrap();
        let inst = PetInstance::from_parts(0, 0, 1, p, vec![3], vec![]).unwrap();
        assert_eq!(inst.start_center(), DVector::from_element(4, 0.25));
        assert_eq!(inst.cover_set().unwrap(), vec![0]);
    }
}
