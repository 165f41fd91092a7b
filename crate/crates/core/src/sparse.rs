//! Compressed sparse row matrices for graph operators.
//!
//! Adjacency, degree and Laplacian matrices are all square and sparse; this
//! module stores them in CSR form, built from duplicate-free `(row, col,
//! value)` triplets. All operators on a graph with `m` vertices are `m x m`.

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum SparseError {
    #[error("entry ({row}, {col}) is out of bounds for dimension {dim}")]
    OutOfBounds { row: usize, col: usize, dim: usize },
    #[error("duplicate entry at ({row}, {col})")]
    Duplicate { row: usize, col: usize },
}

/// Square sparse matrix in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<S> {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<S>,
}

impl<S: Scalar> SparseMatrix<S> {
    /// Build from `(row, col, value)` triplets. Triplets may arrive in any
    /// order; duplicates are rejected.
    pub fn from_triplets(
        dim: usize,
        mut triplets: Vec<(usize, usize, S)>,
    ) -> Result<Self, SparseError> {
        for &(r, c, _) in &triplets {
            if r >= dim || c >= dim {
                return Err(SparseError::OutOfBounds { row: r, col: c, dim });
            }
        }
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        for w in triplets.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(SparseError::Duplicate { row: w[0].0, col: w[0].1 });
            }
        }
        let mut row_ptr = vec![0usize; dim + 1];
        for &(r, _, _) in &triplets {
            row_ptr[r + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        let cols = triplets.iter().map(|&(_, c, _)| c as u32).collect();
        let vals = triplets.into_iter().map(|(_, _, v)| v).collect();
        Ok(Self { dim, row_ptr, cols, vals })
    }

    /// Diagonal matrix from a dense diagonal.
    pub fn from_diagonal(diag: &[S]) -> Self {
        let dim = diag.len();
        let triplets = diag
            .iter()
            .enumerate()
            .map(|(i, &v)| (i, i, v))
            .collect();
        Self::from_triplets(dim, triplets).expect("diagonal triplets are valid")
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diagonal(&vec![S::one(); dim])
    }

    pub fn zeros(dim: usize) -> Self {
        Self { dim, row_ptr: vec![0; dim + 1], cols: Vec::new(), vals: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Iterate stored entries as `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, S)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1])
                .map(move |k| (r, self.cols[k] as usize, self.vals[k]))
        })
    }

    /// Value at `(row, col)`, zero when not stored.
    pub fn get(&self, row: usize, col: usize) -> S {
        let lo = self.row_ptr[row];
        let hi = self.row_ptr[row + 1];
        match self.cols[lo..hi].binary_search(&(col as u32)) {
            Ok(k) => self.vals[lo + k],
            Err(_) => S::zero(),
        }
    }

    pub fn diagonal(&self) -> Vec<S> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<S> {
        let mut sums = vec![S::zero(); self.dim];
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                sums[r] += self.vals[k];
            }
        }
        sums
    }

    pub fn is_symmetric(&self, tol: S) -> bool {
        self.triplets()
            .all(|(r, c, v)| (self.get(c, r) - v).abs() <= tol)
    }

    /// y = A x.
    pub fn matvec(&self, x: &[S], y: &mut [S]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for r in 0..self.dim {
            let mut acc = S::zero();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            y[r] = acc;
        }
    }

    /// Y = A X for row-major X with `ncols` columns.
    pub fn matmat(&self, x: &[S], ncols: usize, y: &mut [S]) {
        assert_eq!(x.len(), self.dim * ncols);
        assert_eq!(y.len(), self.dim * ncols);
        y.fill(S::zero());
        for r in 0..self.dim {
            let out = r * ncols;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let v = self.vals[k];
                let src = self.cols[k] as usize * ncols;
                for j in 0..ncols {
                    y[out + j] += v * x[src + j];
                }
            }
        }
    }

    /// Y = A^T X for row-major X with `ncols` columns.
    pub fn matmat_transpose(&self, x: &[S], ncols: usize, y: &mut [S]) {
        assert_eq!(x.len(), self.dim * ncols);
        assert_eq!(y.len(), self.dim * ncols);
        y.fill(S::zero());
        for r in 0..self.dim {
            let src = r * ncols;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let v = self.vals[k];
                let out = self.cols[k] as usize * ncols;
                for j in 0..ncols {
                    y[out + j] += v * x[src + j];
                }
            }
        }
    }

    /// Dense row-major copy, for small-graph oracles.
    pub fn to_dense(&self) -> Vec<S> {
        let mut dense = vec![S::zero(); self.dim * self.dim];
        for (r, c, v) in self.triplets() {
            dense[r * self.dim + c] = v;
        }
        dense
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> SparseMatrix<f64> {
        // 0 - 1 - 2
        SparseMatrix::from_triplets(
            3,
            vec![(0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0), (2, 1, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn matvec_matches_dense() {
        let a = path3();
        let x = [1.0, 2.0, 3.0];
        let mut y = [0.0; 3];
        a.matvec(&x, &mut y);
        assert_eq!(y, [2.0, 4.0, 2.0]);
    }

    #[test]
    fn duplicate_entries_rejected() {
        let err = SparseMatrix::from_triplets(2, vec![(0, 1, 1.0), (0, 1, 2.0)]).unwrap_err();
        assert!(matches!(err, SparseError::Duplicate { row: 0, col: 1 }));
    }

    #[test]
    fn out_of_bounds_rejected() {
        let err = SparseMatrix::<f64>::from_triplets(2, vec![(0, 5, 1.0)]).unwrap_err();
        assert!(matches!(err, SparseError::OutOfBounds { .. }));
    }

    #[test]
    fn transpose_apply_agrees_with_explicit_transpose() {
        let a = SparseMatrix::from_triplets(
            3,
            vec![(0, 1, 2.0), (1, 2, -1.0), (2, 0, 0.5), (2, 2, 3.0)],
        )
        .unwrap();
        let x = [1.0, -2.0, 4.0];
        let mut y = [0.0; 3];
        a.matmat_transpose(&x, 1, &mut y);
        let dense = a.to_dense();
        for c in 0..3 {
            let want: f64 = (0..3).map(|r| dense[r * 3 + c] * x[r]).sum();
            assert!((y[c] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetry_check() {
        assert!(path3().is_symmetric(0.0));
        let asym = SparseMatrix::from_triplets(2, vec![(0, 1, 1.0)]).unwrap();
        assert!(!asym.is_symmetric(1e-12));
    }
}
