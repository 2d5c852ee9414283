//! Robust linear regression `min_x ||A x - b||_1` by the diagonally scaled
//! primal-dual iteration
//!
//! ```text
//! x+ = x - H A^T s
//! s+ = clamp(s - Gamma b + Gamma A (x - 2 H A^T s), [-1, 1])
//! ```
//!
//! with `H_ii = nu / ||A_{:,i}||_1` and `Gamma_ii = nu / ||A_{i,:}||_1`.
//! Every entry of `z = (x, s)` is its own block.

use crate::error::{check_len, config_err, Result};
use crate::linalg::{lu_solve, standard_normal, DenseMatrix};
use crate::primal_dual::{build_simplified, ShiftedLinfProx, SimplifiedPd, StackedLayout, Steps};
use crate::selection::stream_rng;
use crate::sparse::SparseMatrix;
use crate::Scalar;

/// Unscaled diagonal preconditioners `(H, Gamma)`: reciprocal absolute
/// column sums and reciprocal absolute row sums.
pub fn diag_scaling<T: Scalar>(a: &SparseMatrix<T>) -> Result<(Vec<T>, Vec<T>)> {
    let recip = |sums: Vec<T>, what: &str| -> Result<Vec<T>> {
        sums.into_iter()
            .enumerate()
            .map(|(i, v)| {
                if v > T::zero() {
                    Ok(T::one() / v)
                } else {
                    Err(config_err(format!("{what} {i} of A is zero")))
                }
            })
            .collect()
    };
    Ok((recip(a.col_abs_sums(), "column")?, recip(a.row_abs_sums(), "row")?))
}

#[derive(Debug, Clone)]
pub struct RobustL1Instance<T> {
    /// `n x m`.
    pub a: SparseMatrix<T>,
    pub b: Vec<T>,
    pub nu: T,
    /// Unscaled `H`, length `m`.
    pub h: Vec<T>,
    /// Unscaled `Gamma`, length `n`.
    pub gamma: Vec<T>,
}

impl<T: Scalar> RobustL1Instance<T> {
    pub fn new(a: SparseMatrix<T>, b: Vec<T>, nu: T) -> Result<Self> {
        check_len(a.nrows(), b.len())?;
        if !(nu > T::zero()) {
            return Err(config_err(format!("nu must be positive, got {nu}")));
        }
        let (h, gamma) = diag_scaling(&a)?;
        Ok(Self { a, b, nu, h, gamma })
    }

    pub fn with_nu(&self, nu: T) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), nu)
    }

    /// Number of unknowns `m`.
    pub fn primal_dim(&self) -> usize {
        self.a.ncols()
    }

    /// Number of residuals `n`.
    pub fn dual_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn objective(&self, x: &[T]) -> T {
        objective_l1(&self.a, &self.b, x)
    }
}

/// The fixed-point operator over `z = (x, s)` with `m + n` singleton blocks.
pub fn build_robust_l1<T: Scalar>(inst: &RobustL1Instance<T>) -> Result<SimplifiedPd<T>> {
    let eta: Vec<T> = inst.h.iter().map(|&v| inst.nu * v).collect();
    let gamma: Vec<T> = inst.gamma.iter().map(|&v| inst.nu * v).collect();
    let shift = gamma.iter().zip(&inst.b).map(|(&g, &b)| g * b).collect();
    let layout = StackedLayout::singletons(inst.primal_dim(), inst.dual_dim())?;
    build_simplified(
        inst.a.clone(),
        Box::new(ShiftedLinfProx::new(shift)),
        Steps::Diagonal(eta),
        Steps::Diagonal(gamma),
        layout,
    )
}

/// `||A x - b||_1`.
pub fn objective_l1<T: Scalar>(a: &SparseMatrix<T>, b: &[T], x: &[T]) -> T {
    (0..a.nrows()).map(|i| (a.row_dot(i, x) - b[i]).abs()).sum()
}

/// Rounds an approximate minimizer to a vertex of the underlying linear
/// program: solves `A_I x = b_I` on the `m` rows with the smallest absolute
/// residual at `x`. The objective at the returned point upper-bounds the
/// optimum and equals it once `x` is close enough to a vertex solution.
pub fn polish_vertex<T: Scalar>(a: &SparseMatrix<T>, b: &[T], x: &[T]) -> Result<(Vec<T>, T)> {
    let (n, m) = (a.nrows(), a.ncols());
    check_len(m, x.len())?;
    check_len(n, b.len())?;
    if n < m {
        return Err(config_err("vertex polishing needs at least as many rows as unknowns"));
    }
    let mut rows: Vec<(T, usize)> = (0..n).map(|i| ((a.row_dot(i, x) - b[i]).abs(), i)).collect();
    rows.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    let mut sys = DenseMatrix::zeros(m, m);
    let mut rhs = Vec::with_capacity(m);
    for (r, &(_, i)) in rows.iter().take(m).enumerate() {
        let (idx, val) = a.row(i);
        for (&j, &v) in idx.iter().zip(val) {
            sys[(r, j)] = v;
        }
        rhs.push(b[i]);
    }
    let xv = lu_solve(&sys, &rhs)?;
    let f = objective_l1(a, b, &xv);
    Ok((xv, f))
}

/// `A` (`n x m`) and `b` with i.i.d. standard normal entries.
pub fn gen_gaussian_instance<T: Scalar>(n: usize, m: usize, seed: u64) -> Result<(SparseMatrix<T>, Vec<T>)> {
    if n == 0 || m == 0 {
        return Err(config_err("instance dimensions must be positive"));
    }
    let mut rng = stream_rng(seed, 0);
    let mut trip = Vec::with_capacity(n * m);
    for i in 0..n {
        for j in 0..m {
            trip.push((i, j, standard_normal(&mut rng)));
        }
    }
    let b = (0..n).map(|_| standard_normal(&mut rng)).collect();
    Ok((SparseMatrix::from_triplets(n, m, &trip)?, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ResidualOperator;

    #[test]
    fn scaling_examples() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, -2.0), (1, 0, 3.0), (1, 1, 4.0)]).unwrap();
        let (h, g) = diag_scaling(&a).unwrap();
        assert_eq!(h, vec![0.25, 1.0 / 6.0]);
        assert_eq!(g, vec![1.0 / 3.0, 1.0 / 7.0]);
        let z = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0)]).unwrap();
        assert!(diag_scaling(&z).is_err());
    }

    #[test]
    fn scalar_iteration() {
        let a = SparseMatrix::from_triplets(1, 1, &[(0, 0, 1.0)]).unwrap();
        let inst = RobustL1Instance::new(a, vec![1.0], 1.0).unwrap();
        let op = build_robust_l1(&inst).unwrap();
        let mut s = [0.0; 2];
        op.eval_full(&[0.0, 0.0], &mut s);
        // z+ = (0, -1)
        assert_eq!(s, [0.0, 1.0]);
    }

    #[test]
    fn objective_examples() {
        let id = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        assert_eq!(objective_l1(&id, &[1.0, -1.0], &[0.0, 0.0]), 2.0);
        let col = SparseMatrix::from_triplets(2, 1, &[(0, 0, 1.0), (1, 0, 2.0)]).unwrap();
        assert_eq!(objective_l1(&col, &[0.0, 0.0], &[1.0]), 3.0);
    }

    #[test]
    fn generator_is_deterministic() {
        let (a1, b1) = gen_gaussian_instance::<f64>(20, 5, 9).unwrap();
        let (a2, b2) = gen_gaussian_instance::<f64>(20, 5, 9).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
        assert!(gen_gaussian_instance::<f64>(0, 5, 9).is_err());
    }
}
