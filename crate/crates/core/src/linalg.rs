//! Small dense linear algebra: vectors as slices, a row-major matrix, a
//! cyclic Jacobi eigensolver for symmetric matrices and power iteration.

use std::ops::{Index, IndexMut};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_len, config_err, Result};
use crate::Scalar;

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm2_sq<T: Scalar>(a: &[T]) -> T {
    dot(a, a)
}

#[inline]
pub fn norm2<T: Scalar>(a: &[T]) -> T {
    norm2_sq(a).sqrt()
}

pub fn norm1<T: Scalar>(a: &[T]) -> T {
    a.iter().map(|v| v.abs()).sum()
}

/// `y += alpha * x`
#[inline]
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>().sqrt()
}

/// `||a - b|| / max(||b||, tiny)`
pub fn rel_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    let d = dist(a, b);
    let nb = norm2(b);
    if nb > T::zero() {
        d / nb
    } else {
        d
    }
}

/// Standard normal draw converted to `T`.
pub fn standard_normal<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

pub fn random_normal_vec<T: Scalar, R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<T> {
    (0..n).map(|_| standard_normal(rng)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diag(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Row-major data.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        check_len(rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_len(cols, r.len())?;
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn random_normal<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: random_normal_vec(rng, rows * cols) }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_col(&mut self, j: usize, v: &[T]) {
        for (i, &x) in v.iter().enumerate() {
            self[(i, j)] = x;
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `self^T x`
    pub fn matvec_t(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            axpy(xi, self.row(i), &mut y);
        }
        y
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        check_len(self.cols, other.rows)?;
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let orow = other.row(k);
                for (o, &b) in out.row_mut(i).iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * other^T`
    pub fn matmul_t(&self, other: &Self) -> Result<Self> {
        check_len(self.cols, other.cols)?;
        Ok(Self::from_fn(self.rows, other.rows, |i, j| dot(self.row(i), other.row(j))))
    }

    /// `self^T * self`
    pub fn gram(&self) -> Self {
        let mut g = Self::zeros(self.cols, self.cols);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..self.cols {
                let a = row[i];
                if a == T::zero() {
                    continue;
                }
                for j in i..self.cols {
                    g.data[i * self.cols + j] += a * row[j];
                }
            }
        }
        for i in 0..self.cols {
            for j in 0..i {
                g.data[i * self.cols + j] = g.data[j * self.cols + i];
            }
        }
        g
    }

    pub fn frobenius(&self) -> T {
        norm2(&self.data)
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    /// Quadratic form `x^T self x`.
    pub fn quad_form(&self, x: &[T]) -> T {
        dot(x, &self.matvec(x))
    }

    /// Rows `range` as a new matrix.
    pub fn row_block(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            rows: range.len(),
            cols: self.cols,
            data: self.data[range.start * self.cols..range.end * self.cols].to_vec(),
        }
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    /// Ascending.
    pub values: Vec<T>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: DenseMatrix<T>,
}

/// Cyclic Jacobi rotations; intended for the small matrices used by the
/// diagnostics (dimension up to a few dozen).
pub fn symmetric_eigen<T: Scalar>(a: &DenseMatrix<T>) -> Result<SymmetricEigen<T>> {
    let n = a.rows();
    if n != a.cols() {
        return Err(config_err("eigen-decomposition needs a square matrix"));
    }
    let scale = a.frobenius().max(T::min_positive_value());
    if !a.is_symmetric(T::lit(1e-10) * scale) {
        return Err(config_err("eigen-decomposition needs a symmetric matrix"));
    }
    let mut m = a.clone();
    let mut v = DenseMatrix::identity(n);
    let eps = T::epsilon();
    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if off.sqrt() <= eps * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= T::min_positive_value() {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].partial_cmp(&m[(j, j)]).unwrap());
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymmetricEigen { values, vectors })
}

/// Largest singular value of `a`, via the eigenvalues of the smaller Gram matrix.
pub fn spectral_norm<T: Scalar>(a: &DenseMatrix<T>) -> Result<T> {
    let g = if a.rows() <= a.cols() { a.matmul_t(a)? } else { a.gram() };
    if g.rows() == 0 {
        return Ok(T::zero());
    }
    let e = symmetric_eigen(&g)?;
    Ok(e.values.last().copied().unwrap_or(T::zero()).max(T::zero()).sqrt())
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration from the all-ones vector. Stops after `max_iter` iterations or
/// once the Rayleigh quotient changes by less than `rel_tol` relative.
pub fn power_iteration_psd<T: Scalar>(a: &DenseMatrix<T>, max_iter: usize, rel_tol: T) -> T {
    let n = a.rows();
    if n == 0 {
        return T::zero();
    }
    let mut v = vec![T::one() / T::lit(n as f64).sqrt(); n];
    let mut lambda = T::zero();
    for _ in 0..max_iter {
        let w = a.matvec(&v);
        let nw = norm2(&w);
        if nw == T::zero() {
            return T::zero();
        }
        let next = dot(&v, &w);
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = *wi / nw;
        }
        let converged = (next - lambda).abs() <= rel_tol * next.abs();
        lambda = next;
        if converged {
            break;
        }
    }
    // The Rayleigh quotient of the final normalized vector is the tighter estimate.
    lambda.max(dot(&v, &a.matvec(&v)))
}

/// Random orthogonal matrix: QR (modified Gram-Schmidt, two passes) of a Gaussian matrix.
pub fn random_orthogonal<T: Scalar, R: Rng + ?Sized>(rng: &mut R, n: usize) -> DenseMatrix<T> {
    loop {
        let g = DenseMatrix::<T>::random_normal(rng, n, n);
        let mut cols: Vec<Vec<T>> = (0..n).map(|j| g.col(j)).collect();
        let mut ok = true;
        for j in 0..n {
            for _pass in 0..2 {
                for k in 0..j {
                    let (done, rest) = cols.split_at_mut(j);
                    let proj = dot(&done[k], &rest[0]);
                    axpy(-proj, &done[k], &mut rest[0]);
                }
            }
            let nrm = norm2(&cols[j]);
            if nrm <= T::lit(1e-8) {
                ok = false;
                break;
            }
            for v in cols[j].iter_mut() {
                *v /= nrm;
            }
        }
        if ok {
            return DenseMatrix::from_fn(n, n, |i, j| cols[j][i]);
        }
    }
}

/// Solves the square system `a x = rhs` by LU with partial pivoting.
pub fn lu_solve<T: Scalar>(a: &DenseMatrix<T>, rhs: &[T]) -> Result<Vec<T>> {
    let n = a.rows();
    if n != a.cols() {
        return Err(config_err("linear solve needs a square matrix"));
    }
    check_len(n, rhs.len())?;
    let mut m = a.clone();
    let mut x = rhs.to_vec();
    let scale = m.as_slice().iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| m[(i, k)].abs().partial_cmp(&m[(j, k)].abs()).unwrap())
            .unwrap();
        if m[(p, k)].abs() <= T::epsilon() * scale * T::lit(n as f64) {
            return Err(config_err("matrix is singular to working precision"));
        }
        if p != k {
            for j in 0..n {
                let t = m[(k, j)];
                m[(k, j)] = m[(p, j)];
                m[(p, j)] = t;
            }
            x.swap(k, p);
        }
        for i in (k + 1)..n {
            let f = m[(i, k)] / m[(k, k)];
            if f == T::zero() {
                continue;
            }
            for j in k..n {
                let v = m[(k, j)];
                m[(i, j)] -= f * v;
            }
            let xk = x[k];
            x[i] -= f * xk;
        }
    }
    for k in (0..n).rev() {
        let mut v = x[k];
        for j in (k + 1)..n {
            v -= m[(k, j)] * x[j];
        }
        x[k] = v / m[(k, k)];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn jacobi_recovers_constructed_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = random_orthogonal::<f64, _>(&mut rng, 7);
        let lam = [0.0, 0.1, 0.3, 0.5, 1.0, 1.5, 1.9];
        let a = q.matmul(&DenseMatrix::from_diag(&lam)).unwrap().matmul_t(&q).unwrap();
        let e = symmetric_eigen(&a).unwrap();
        for (got, want) in e.values.iter().zip(lam) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        // A v = lambda v
        for k in 0..7 {
            let v = e.vectors.col(k);
            let av = a.matvec(&v);
            for (x, y) in av.iter().zip(&v) {
                assert!((x - e.values[k] * y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn orthogonal_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let q = random_orthogonal::<f64, _>(&mut rng, 10);
        let g = q.gram();
        for i in 0..10 {
            for j in 0..10 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn power_iteration_matches_jacobi() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = DenseMatrix::<f64>::from_fn(30, 5, |_, _| rng.random::<f64>());
        let g = y.gram();
        let exact = *symmetric_eigen(&g).unwrap().values.last().unwrap();
        let approx = power_iteration_psd(&g, 100, 1e-8);
        assert!((approx - exact).abs() <= 1e-6 * exact);
    }

    #[test]
    fn spectral_norm_of_row() {
        let a = DenseMatrix::from_rows(&[vec![3.0f64, 4.0]]).unwrap();
        assert!((spectral_norm(&a).unwrap() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn matmul_and_transpose_agree() {
        let a = DenseMatrix::from_rows(&[vec![1.0f64, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let x = [1.0, -1.0];
        assert_eq!(a.matvec_t(&x), a.transpose().matvec(&x));
        assert_eq!(a.gram(), a.transpose().matmul(&a).unwrap());
    }

    #[test]
    fn lu_solves_permuted_system() {
        let a = DenseMatrix::from_rows(&[vec![0.0, 2.0, 1.0], vec![1.0, 1.0, 0.0], vec![3.0, 0.0, 1.0]]).unwrap();
        let x: Vec<f64> = lu_solve(&a, &[5.0, 3.0, 4.0]).unwrap();
        for (got, want) in x.iter().zip([1.0, 2.0, 1.0]) {
            assert!((got - want).abs() < 1e-14);
        }
        let sing = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(lu_solve(&sing, &[1.0, 1.0]).is_err());
    }
}
