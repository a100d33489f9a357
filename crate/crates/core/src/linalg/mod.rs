//! Sparse matrices, constrained solves and dense generalized eigenproblems.

mod constrained;
mod dense;

pub use constrained::{solve_constrained, solve_constrained_with, ConstraintSet, Method, Solution, SolveOptions};
pub use dense::{cholesky_lower, eig_dense_generalized, symmetric_eigen, DenseEigen};

use faer::Mat;

use crate::error::{check_len, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` entries; duplicates are summed.
    /// Entries that sum to exactly zero are kept as stored zeros.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut entries: Vec<(usize, usize, f64)>) -> CsrMatrix {
        entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut offsets = vec![0; n_rows + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last = None;
        for (i, j, v) in entries {
            assert!(i < n_rows && j < n_cols, "entry ({i}, {j}) outside {n_rows}x{n_cols}");
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                offsets[i + 1] += 1;
                cols.push(j);
                vals.push(v);
                last = Some((i, j));
            }
        }
        for i in 0..n_rows {
            offsets[i + 1] += offsets[i];
        }
        CsrMatrix {
            n_rows,
            n_cols,
            offsets,
            cols,
            vals,
        }
    }

    pub fn identity(n: usize) -> CsrMatrix {
        CsrMatrix::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> CsrMatrix {
        CsrMatrix::from_triplets(n_rows, n_cols, Vec::new())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.offsets[i]..self.offsets[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n_cols, x.len())?;
        let mut y = vec![0.0; self.n_rows];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    pub(crate) fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_len(self.n_rows, x.len())?;
        let ay = self.apply(y)?;
        Ok(dot(x, &ay))
    }

    pub fn transpose(&self) -> CsrMatrix {
        CsrMatrix::from_triplets(self.n_cols, self.n_rows, self.triplets().map(|(i, j, v)| (j, i, v)).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Structural and value symmetry with `|a_ij - a_ji| <= tol * max|a|`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.n_rows != self.n_cols {
            return false;
        }
        let scale = tol * self.max_abs();
        self.triplets().all(|(i, j, v)| (v - self.get(j, i)).abs() <= scale)
            && self.transpose().triplets().all(|(i, j, _)| {
                let r = self.offsets[i]..self.offsets[i + 1];
                self.cols[r].binary_search(&j).is_ok()
            })
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.n_rows, self.n_cols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v;
        }
        m
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apply_small() {
        let i3 = CsrMatrix::identity(3);
        assert_eq!(i3.apply(&[1.0, -2.0, 3.5]).unwrap(), vec![1.0, -2.0, 3.5]);
        let d = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 2.0), (1, 1, 3.0)]);
        assert_eq!(d.apply(&[1.0, 1.0]).unwrap(), vec![2.0, 3.0]);
        assert_eq!(d.apply(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(d.apply(&[1.0]).unwrap_err().kind(), "dimension-mismatch");
    }

    #[test]
    fn duplicates_are_summed_and_rows_sorted() {
        let a = CsrMatrix::from_triplets(2, 3, vec![(1, 2, 1.0), (0, 1, 2.0), (1, 0, 4.0), (0, 1, 0.5)]);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(0, 1), 2.5);
        assert_eq!(a.row(1).collect::<Vec<_>>(), vec![(0, 4.0), (2, 1.0)]);
        assert_eq!(a.transpose().get(2, 1), 1.0);
        assert_eq!(a.get(0, 0), 0.0);
    }

    #[test]
    fn symmetry_check() {
        let s = CsrMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (1, 0, 1.0), (0, 0, 2.0)]);
        assert!(s.is_symmetric(1e-14));
        let n = CsrMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (0, 0, 2.0)]);
        assert!(!n.is_symmetric(1e-14));
        let d = s.to_dense();
        assert_eq!(d[(0, 1)], 1.0);
        assert_eq!(s.bilinear(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), 4.0);
    }
}
