//! Linear operators `A: ℝⁿ → E` with their adjoints.
//!
//! `E` is either `ℝᵐ` (identity, dense, and compressed-sparse-row maps) or
//! the symmetric matrices of order `n` ([`RankOneSumMap`]). All maps check
//! their shape once at construction and check argument dimensions per call.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::barrier::ConePoint;
use crate::error::{check_dim, Error, Result};

pub trait LinearMap: Send + Sync {
    type Output: ConePoint;

    fn input_dim(&self) -> usize;

    fn apply(&self, x: &DVector<f64>) -> Result<Self::Output>;

    /// `A*y`, defined by `⟨Ax, y⟩ = ⟨x, A*y⟩`.
    fn apply_adjoint(&self, y: &Self::Output) -> Result<DVector<f64>>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityMap {
    dim: usize,
}

impl IdentityMap {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl LinearMap for IdentityMap {
    type Output = DVector<f64>;

    fn input_dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim, x.len())?;
        Ok(x.clone())
    }

    fn apply_adjoint(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim, y.len())?;
        Ok(y.clone())
    }
}

/// A dense `m × n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrixMap {
    matrix: DMatrix<f64>,
}

impl DenseMatrixMap {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

impl LinearMap for DenseMatrixMap {
    type Output = DVector<f64>;

    fn input_dim(&self) -> usize {
        self.matrix.ncols()
    }

    fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.matrix.ncols(), x.len())?;
        Ok(&self.matrix * x)
    }

    fn apply_adjoint(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.matrix.nrows(), y.len())?;
        Ok(self.matrix.tr_mul(y))
    }
}

/// Compressed sparse rows, in the layout used by the instance files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    pub rows: usize,
    pub cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` entries. Duplicates are
    /// summed and zeros are dropped.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        for &(r, c, _) in &sorted {
            if r >= rows || c >= cols {
                return Err(Error::InvalidInput(format!(
                    "entry ({r}, {c}) outside {rows}x{cols}"
                )));
            }
        }
        sorted.sort_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        let mut row_of = Vec::with_capacity(sorted.len());
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().expect("entry pushed for this key") += v;
            } else {
                indices.push(c);
                values.push(v);
                row_of.push(r);
                last = Some((r, c));
            }
        }
        let mut kept_idx = Vec::with_capacity(indices.len());
        let mut kept_val = Vec::with_capacity(values.len());
        for ((c, v), r) in indices.into_iter().zip(values).zip(row_of) {
            if v != 0.0 {
                kept_idx.push(c);
                kept_val.push(v);
                indptr[r + 1] += 1;
            }
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Ok(Self {
            rows,
            cols,
            indptr,
            indices: kept_idx,
            values: kept_val,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.indptr.len() != self.rows + 1 {
            return Err(Error::InvalidInput("indptr length must be rows + 1".into()));
        }
        if self.indptr[0] != 0 || self.indptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidInput(
                "indptr must start at 0 and be nondecreasing".into(),
            ));
        }
        let nnz = *self.indptr.last().expect("indptr is nonempty");
        if self.indices.len() != nnz || self.values.len() != nnz {
            return Err(Error::InvalidInput(
                "indices/values length must equal nnz".into(),
            ));
        }
        if let Some(c) = self.indices.iter().find(|c| **c >= self.cols) {
            return Err(Error::InvalidInput(format!(
                "column index {c} out of range"
            )));
        }
        if self.values.iter().any(|v| *v == 0.0 || !v.is_finite()) {
            return Err(Error::InvalidInput(
                "explicit zero or non-finite stored value".into(),
            ));
        }
        Ok(())
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entries of row `r` as `(column, value)` pairs.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.cols {
            counts[c + 1] += counts[c];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                let slot = next[c];
                indices[slot] = r;
                values[slot] = v;
                next[c] += 1;
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            indptr,
            indices,
            values,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                out[(r, c)] += v;
            }
        }
        out
    }
}

/// A sparse `m × n` matrix acting on `ℝⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrixMap {
    csr: CsrMatrix,
}

impl SparseMatrixMap {
    pub fn new(csr: CsrMatrix) -> Result<Self> {
        csr.validate()?;
        Ok(Self { csr })
    }

    pub fn csr(&self) -> &CsrMatrix {
        &self.csr
    }

    pub fn output_dim(&self) -> usize {
        self.csr.rows
    }
}

impl LinearMap for SparseMatrixMap {
    type Output = DVector<f64>;

    fn input_dim(&self) -> usize {
        self.csr.cols
    }

    fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.csr.cols, x.len())?;
        Ok(DVector::from_fn(self.csr.rows, |r, _| {
            self.csr.row(r).map(|(c, v)| v * x[c]).sum()
        }))
    }

    fn apply_adjoint(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.csr.rows, y.len())?;
        let mut out = DVector::zeros(self.csr.cols);
        for r in 0..self.csr.rows {
            let yr = y[r];
            for (c, v) in self.csr.row(r) {
                out[c] += v * yr;
            }
        }
        Ok(out)
    }
}

/// `x ↦ Σ_i x_i a_i a_iᵀ`, mapping weights on `m` points of `ℝⁿ` to a
/// symmetric `n × n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneSumMap {
    /// Column `i` is the point `a_i`.
    points: DMatrix<f64>,
}

impl RankOneSumMap {
    /// `points` is `n × m` with one point per column.
    pub fn new(points: DMatrix<f64>) -> Result<Self> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(Error::InvalidInput(
                "rank-one sum map needs at least one point".into(),
            ));
        }
        Ok(Self { points })
    }

    pub fn from_points(points: &[DVector<f64>]) -> Result<Self> {
        let n = points.first().map(|p| p.len()).unwrap_or(0);
        if let Some(p) = points.iter().find(|p| p.len() != n) {
            return Err(Error::Dimension {
                expected: n,
                got: p.len(),
            });
        }
        Self::new(DMatrix::from_columns(points))
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    /// Dimension `n` of the points (order of the output matrix).
    pub fn order(&self) -> usize {
        self.points.nrows()
    }
}

impl LinearMap for RankOneSumMap {
    type Output = DMatrix<f64>;

    fn input_dim(&self) -> usize {
        self.points.ncols()
    }

    fn apply(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.points.ncols(), x.len())?;
        let mut scaled = self.points.clone();
        for (i, mut col) in scaled.column_iter_mut().enumerate() {
            col *= x[i];
        }
        let out = &scaled * self.points.transpose();
        Ok((&out + out.transpose()) * 0.5)
    }

    fn apply_adjoint(&self, y: &DMatrix<f64>) -> Result<DVector<f64>> {
        check_dim(self.order(), y.nrows())?;
        check_dim(self.order(), y.ncols())?;
        let ya = y * &self.points;
        Ok(DVector::from_fn(self.points.ncols(), |i, _| {
            self.points.column(i).dot(&ya.column(i))
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_map() {
        let a = IdentityMap::new(2);
        let x = DVector::from_vec(vec![1.0, 2.0]);
        assert_eq!(a.apply(&x).unwrap(), x);
        assert!(a.apply(&DVector::zeros(3)).is_err());
    }

    #[test]
    fn sparse_scalar_columns() {
        let csr = CsrMatrix::from_triplets(2, 1, &[(0, 0, 1.0), (1, 0, 2.0)]).unwrap();
        let a = SparseMatrixMap::new(csr).unwrap();
        let out = a.apply(&DVector::from_vec(vec![3.0])).unwrap();
        assert_eq!(out, DVector::from_vec(vec![3.0, 6.0]));
        assert!(matches!(
            a.apply(&DVector::zeros(2)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn rank_one_sum_of_basis_points() {
        let a = RankOneSumMap::from_points(&[
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0]),
        ])
        .unwrap();
        let out = a.apply(&DVector::from_vec(vec![2.0, 5.0])).unwrap();
        assert_eq!(out, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 5.0]));
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let csr =
            CsrMatrix::from_triplets(2, 3, &[(1, 2, 1.0), (0, 1, 2.0), (1, 2, 0.5), (0, 0, 0.0)])
                .unwrap();
        assert_eq!(csr.indptr, vec![0, 1, 2]);
        assert_eq!(csr.indices, vec![1, 2]);
        assert_eq!(csr.values, vec![2.0, 1.5]);
        csr.validate().unwrap();
        assert_eq!(csr.transpose().transpose(), csr);
        assert_eq!(csr.transpose().to_dense(), csr.to_dense().transpose());
    }

    #[test]
    fn explicit_zeros_are_rejected() {
        let csr = CsrMatrix {
            rows: 1,
            cols: 1,
            indptr: vec![0, 1],
            indices: vec![0],
            values: vec![0.0],
        };
        assert!(SparseMatrixMap::new(csr).is_err());
    }
}
