//! Compressed sparse matrices with both row and column access.
//!
//! The coordinate-update kernels need rows (dual updates, `A_{j,:}`) and
//! columns (primal updates, `A_{:,i}`) in O(nnz of that slice), so both the
//! CSR and the CSC arrays are kept.

use crate::error::{check_len, config_err, Result};
use crate::linalg::DenseMatrix;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
struct Compressed<T> {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> Compressed<T> {
    /// Compresses triplets along the `major` coordinate; duplicates are summed.
    fn build(major_len: usize, triplets: &[(usize, usize, T)], row_major: bool) -> Self {
        let key = |t: &(usize, usize, T)| if row_major { (t.0, t.1) } else { (t.1, t.0) };
        let mut sorted: Vec<(usize, usize, T)> =
            triplets.iter().map(|t| (key(t).0, key(t).1, t.2)).collect();
        sorted.sort_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0usize; major_len + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<T> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (maj, min, v) in sorted {
            if last == Some((maj, min)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((maj, min));
            indptr[maj + 1] += 1;
            indices.push(min);
            values.push(v);
        }
        for i in 0..major_len {
            indptr[i + 1] += indptr[i];
        }
        Self { indptr, indices, values }
    }

    #[inline]
    fn slice(&self, i: usize) -> (&[usize], &[T]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.values[r])
    }
}

/// Sparse matrix stored in CSR and CSC form simultaneously.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    nrows: usize,
    ncols: usize,
    csr: Compressed<T>,
    csc: Compressed<T>,
}

impl<T: Scalar> SparseMatrix<T> {
    /// Builds from `(row, col, value)` triplets; duplicate entries are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Result<Self> {
        if let Some(t) = triplets.iter().find(|t| t.0 >= nrows || t.1 >= ncols) {
            return Err(config_err(format!(
                "entry ({}, {}) outside a {nrows}x{ncols} matrix",
                t.0, t.1
            )));
        }
        Ok(Self {
            nrows,
            ncols,
            csr: Compressed::build(nrows, triplets, true),
            csc: Compressed::build(ncols, triplets, false),
        })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self::from_triplets(nrows, ncols, &[]).unwrap()
    }

    /// Keeps the nonzero entries of `dense`.
    pub fn from_dense(dense: &DenseMatrix<T>) -> Self {
        let mut trip = Vec::new();
        for i in 0..dense.rows() {
            for (j, &v) in dense.row(i).iter().enumerate() {
                if v != T::zero() {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(dense.rows(), dense.cols(), &trip).unwrap()
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut d = DenseMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (idx, val) = self.row(i);
            for (&j, &v) in idx.iter().zip(val) {
                d[(i, j)] = v;
            }
        }
        d
    }

    /// Stacks `self` on top of `other` (same column count).
    pub fn vstack(&self, other: &Self) -> Result<Self> {
        check_len(self.ncols, other.ncols)?;
        let mut trip = self.triplets();
        trip.extend(other.triplets().into_iter().map(|(i, j, v)| (i + self.nrows, j, v)));
        Self::from_triplets(self.nrows + other.nrows, self.ncols, &trip)
    }

    pub fn transpose(&self) -> Self {
        Self { nrows: self.ncols, ncols: self.nrows, csr: self.csc.clone(), csc: self.csr.clone() }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, T)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let (idx, val) = self.row(i);
            out.extend(idx.iter().zip(val).map(|(&j, &v)| (i, j, v)));
        }
        out
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.csr.values.len()
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        self.csr.slice(i)
    }

    /// Row indices and values of column `j`.
    #[inline]
    pub fn col(&self, j: usize) -> (&[usize], &[T]) {
        self.csc.slice(j)
    }

    #[inline]
    pub fn row_dot(&self, i: usize, x: &[T]) -> T {
        let (idx, val) = self.row(i);
        idx.iter().zip(val).fold(T::zero(), |acc, (&j, &v)| acc + v * x[j])
    }

    #[inline]
    pub fn col_dot(&self, j: usize, y: &[T]) -> T {
        let (idx, val) = self.col(j);
        idx.iter().zip(val).fold(T::zero(), |acc, (&i, &v)| acc + v * y[i])
    }

    /// `y = A x`
    pub fn matvec_into(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row_dot(i, x);
        }
    }

    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        check_len(self.ncols, x.len())?;
        let mut y = vec![T::zero(); self.nrows];
        self.matvec_into(x, &mut y);
        Ok(y)
    }

    /// `y = A^T s`
    pub fn matvec_t_into(&self, s: &[T], y: &mut [T]) {
        for (j, yj) in y.iter_mut().enumerate() {
            *yj = self.col_dot(j, s);
        }
    }

    pub fn matvec_t(&self, s: &[T]) -> Result<Vec<T>> {
        check_len(self.nrows, s.len())?;
        let mut y = vec![T::zero(); self.ncols];
        self.matvec_t_into(s, &mut y);
        Ok(y)
    }

    pub fn row_abs_sums(&self) -> Vec<T> {
        (0..self.nrows).map(|i| self.row(i).1.iter().map(|v| v.abs()).sum()).collect()
    }

    pub fn col_abs_sums(&self) -> Vec<T> {
        (0..self.ncols).map(|j| self.col(j).1.iter().map(|v| v.abs()).sum()).collect()
    }

    /// Multiplies every entry by `c`.
    pub fn scaled(&self, c: T) -> Self {
        let mut out = self.clone();
        out.csr.values.iter_mut().for_each(|v| *v *= c);
        out.csc.values.iter_mut().for_each(|v| *v *= c);
        out
    }
}
