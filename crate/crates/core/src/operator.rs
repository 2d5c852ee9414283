//! The residual-operator contract `S = I - T` and a few concrete operators.
//!
//! An operator evaluates `S x` in full and `(S x)_i` for a single block. A
//! coordinate-friendly operator additionally hands out a
//! [`CoordinateSession`] that keeps auxiliary state (cached products) in
//! sync with the iterate, so one block update costs a fraction of a full
//! evaluation.

use crate::block::{BlockPartition, BlockVector};
use crate::error::{check_len, config_err, Result};
use crate::linalg::{spectral_norm, DenseMatrix};
use crate::Scalar;

/// Performs the in-place coordinate steps of one run.
pub trait CoordinateSession<T: Scalar> {
    /// Replaces block `block` of `x` with `x_block - alpha * (S x)_block`.
    fn step(&mut self, x: &mut [T], block: usize, alpha: T);

    /// Hook invoked once at the end of every epoch.
    fn end_epoch(&mut self, _x: &[T]) {}
}

pub trait ResidualOperator<T: Scalar>: Send + Sync {
    fn partition(&self) -> &BlockPartition;

    fn dim(&self) -> usize {
        self.partition().dim()
    }

    /// Writes `S x` into `out`.
    fn eval_full(&self, x: &[T], out: &mut [T]);

    /// Writes `(S x)_block` into `out` (length = block size).
    ///
    /// The default evaluates the full residual and extracts the block.
    fn eval_block(&self, x: &[T], block: usize, out: &mut [T]) {
        let mut full = vec![T::zero(); self.dim()];
        self.eval_full(x, &mut full);
        out.copy_from_slice(&full[self.partition().range(block)]);
    }

    /// Coordinate Lipschitz constants `L_i` of `S_i`, when known exactly.
    fn coord_lipschitz(&self) -> Option<Vec<T>> {
        None
    }

    /// Session used by the epoch driver. The default performs every step
    /// through [`ResidualOperator::eval_block`] without auxiliary state.
    fn session(&self, _x: &[T]) -> Box<dyn CoordinateSession<T> + '_> {
        Box::new(UncachedSession::new(self))
    }
}

/// Coordinate steps evaluated from scratch with `eval_block`.
pub struct UncachedSession<'a, T, O: ?Sized> {
    op: &'a O,
    buf: Vec<T>,
}

impl<'a, T: Scalar, O: ResidualOperator<T> + ?Sized> UncachedSession<'a, T, O> {
    pub fn new(op: &'a O) -> Self {
        Self { op, buf: vec![T::zero(); op.partition().max_block_len()] }
    }
}

impl<T: Scalar, O: ResidualOperator<T> + ?Sized> CoordinateSession<T> for UncachedSession<'_, T, O> {
    fn step(&mut self, x: &mut [T], block: usize, alpha: T) {
        let r = self.op.partition().range(block);
        let buf = &mut self.buf[..r.len()];
        self.op.eval_block(x, block, buf);
        for (xi, &si) in x[r].iter_mut().zip(buf.iter()) {
            *xi -= alpha * si;
        }
    }
}

/// Borrows an operator and hides its specialized session, so every
/// coordinate step goes through `eval_block`. Serves as the reference for
/// cached implementations.
pub struct Uncached<'a, O: ?Sized>(pub &'a O);

impl<T: Scalar, O: ResidualOperator<T> + ?Sized> ResidualOperator<T> for Uncached<'_, O> {
    fn partition(&self) -> &BlockPartition {
        self.0.partition()
    }

    fn eval_full(&self, x: &[T], out: &mut [T]) {
        self.0.eval_full(x, out)
    }

    fn eval_block(&self, x: &[T], block: usize, out: &mut [T]) {
        self.0.eval_block(x, block, out)
    }

    fn coord_lipschitz(&self) -> Option<Vec<T>> {
        self.0.coord_lipschitz()
    }
}

/// `L = max_i L_i`.
pub fn max_lipschitz<T: Scalar>(li: &[T]) -> T {
    li.iter().copied().fold(T::zero(), T::max)
}

fn check_operand<T: Scalar, O: ResidualOperator<T> + ?Sized>(op: &O, x: &BlockVector<T>) -> Result<()> {
    check_len(op.dim(), x.dim())?;
    if x.partition().as_ref() != op.partition() {
        return Err(config_err("iterate partition differs from the operator partition"));
    }
    Ok(())
}

/// Returns `S x`.
pub fn apply_full<T: Scalar, O: ResidualOperator<T> + ?Sized>(op: &O, x: &BlockVector<T>) -> Result<BlockVector<T>> {
    check_operand(op, x)?;
    let mut out = vec![T::zero(); op.dim()];
    op.eval_full(x.as_slice(), &mut out);
    x.with_data(out)
}

/// Returns `(S x)_block`.
pub fn apply_coord<T: Scalar, O: ResidualOperator<T> + ?Sized>(
    op: &O,
    x: &BlockVector<T>,
    block: usize,
) -> Result<Vec<T>> {
    check_operand(op, x)?;
    op.partition().check_block(block)?;
    let mut out = vec![T::zero(); op.partition().block_len(block)];
    op.eval_block(x.as_slice(), block, &mut out);
    Ok(out)
}

/// One Krasnosel'skii-Mann step `x - eta * S x`.
pub fn km_step<T: Scalar, O: ResidualOperator<T> + ?Sized>(op: &O, x: &BlockVector<T>, eta: T) -> Result<BlockVector<T>> {
    check_operand(op, x)?;
    if eta < T::zero() {
        return Err(config_err("KM step size must be nonnegative"));
    }
    let mut next = x.clone();
    let mut s = vec![T::zero(); op.dim()];
    km_step_in_place(op, next.as_mut_slice(), eta, &mut s);
    Ok(next)
}

pub(crate) fn km_step_in_place<T: Scalar, O: ResidualOperator<T> + ?Sized>(op: &O, x: &mut [T], eta: T, scratch: &mut [T]) {
    op.eval_full(x, scratch);
    for (xi, &si) in x.iter_mut().zip(scratch.iter()) {
        *xi -= eta * si;
    }
}

/// `S = 0`: every point is a fixed point.
#[derive(Debug, Clone)]
pub struct ZeroOperator {
    partition: BlockPartition,
}

impl ZeroOperator {
    pub fn new(partition: BlockPartition) -> Self {
        Self { partition }
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }
}

impl<T: Scalar> ResidualOperator<T> for ZeroOperator {
    fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    fn eval_full(&self, _x: &[T], out: &mut [T]) {
        out.fill(T::zero());
    }

    fn eval_block(&self, _x: &[T], _block: usize, out: &mut [T]) {
        out.fill(T::zero());
    }

    fn coord_lipschitz(&self) -> Option<Vec<T>> {
        Some(vec![T::zero(); self.partition.num_blocks()])
    }
}

/// Residual `S x = x - T x` of a user-supplied map `T`.
pub struct MapResidual<F> {
    partition: BlockPartition,
    map: F,
}

impl<F> MapResidual<F> {
    /// `map(x, out)` must write `T x` into `out`.
    pub fn new(partition: BlockPartition, map: F) -> Self {
        Self { partition, map }
    }
}

impl<T, F> ResidualOperator<T> for MapResidual<F>
where
    T: Scalar,
    F: Fn(&[T], &mut [T]) + Send + Sync,
{
    fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    fn eval_full(&self, x: &[T], out: &mut [T]) {
        (self.map)(x, out);
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = xi - *o;
        }
    }
}

/// Affine residual `S x = A x - b` with a dense matrix.
#[derive(Debug, Clone)]
pub struct AffineOperator<T> {
    a: DenseMatrix<T>,
    b: Vec<T>,
    partition: BlockPartition,
}

impl<T: Scalar> AffineOperator<T> {
    pub fn new(a: DenseMatrix<T>, b: Vec<T>, partition: BlockPartition) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(config_err("affine operator needs a square matrix"));
        }
        check_len(a.rows(), b.len())?;
        check_len(a.rows(), partition.dim())?;
        Ok(Self { a, b, partition })
    }

    /// `S x = A x` (no shift).
    pub fn linear(a: DenseMatrix<T>, partition: BlockPartition) -> Result<Self> {
        let n = a.rows();
        Self::new(a, vec![T::zero(); n], partition)
    }

    pub fn matrix(&self) -> &DenseMatrix<T> {
        &self.a
    }

    pub fn shift(&self) -> &[T] {
        &self.b
    }

    #[inline]
    fn row_residual(&self, x: &[T], i: usize) -> T {
        crate::linalg::dot(self.a.row(i), x) - self.b[i]
    }
}

impl<T: Scalar> ResidualOperator<T> for AffineOperator<T> {
    fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    fn eval_full(&self, x: &[T], out: &mut [T]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row_residual(x, i);
        }
    }

    fn eval_block(&self, x: &[T], block: usize, out: &mut [T]) {
        for (o, i) in out.iter_mut().zip(self.partition.range(block)) {
            *o = self.row_residual(x, i);
        }
    }

    /// `L_i` is the spectral norm of the row block `A_{i,:}`.
    fn coord_lipschitz(&self) -> Option<Vec<T>> {
        (0..self.partition.num_blocks())
            .map(|i| spectral_norm(&self.a.row_block(self.partition.range(i))).ok())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn affine_2x2() -> AffineOperator<f64> {
        let a = DenseMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        AffineOperator::linear(a, BlockPartition::singletons(2).unwrap()).unwrap()
    }

    fn vec2(op: &AffineOperator<f64>, v: [f64; 2]) -> BlockVector<f64> {
        BlockVector::new(v.to_vec(), Arc::new(op.partition().clone())).unwrap()
    }

    #[test]
    fn zero_operator_full_and_block() {
        let op = ZeroOperator::new(BlockPartition::singletons(2).unwrap());
        let x = BlockVector::new(vec![1.0, 2.0], Arc::new(op.partition.clone())).unwrap();
        assert_eq!(apply_full(&op, &x).unwrap().as_slice(), &[0.0, 0.0]);
        assert_eq!(apply_coord(&op, &x, 1).unwrap(), vec![0.0]);
    }

    #[test]
    fn affine_products() {
        let op = affine_2x2();
        let x = vec2(&op, [1.0, 1.0]);
        assert_eq!(apply_full(&op, &x).unwrap().as_slice(), &[1.5, 1.5]);
        // block index 1 is the second row
        assert_eq!(apply_coord(&op, &x, 1).unwrap(), vec![1.5]);
        assert!(matches!(
            apply_coord(&op, &x, 2),
            Err(crate::Error::BlockOutOfRange { index: 2, blocks: 2 })
        ));
        let li = ResidualOperator::<f64>::coord_lipschitz(&op).unwrap();
        assert!((li[0] - 1.25f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn identity_map_has_zero_residual() {
        let op = MapResidual::new(BlockPartition::singletons(3).unwrap(), |x: &[f64], out: &mut [f64]| {
            out.copy_from_slice(x)
        });
        let x = BlockVector::new(vec![3.0, -1.0, 2.0], Arc::new(op.partition.clone())).unwrap();
        assert_eq!(apply_full(&op, &x).unwrap().as_slice(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let op = affine_2x2();
        let x = BlockVector::single_block(vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(apply_full(&op, &x), Err(crate::Error::DimensionMismatch { .. })));
    }

    #[test]
    fn km_step_examples() {
        let a = DenseMatrix::from_diag(&[0.5, 1.5]);
        let op = AffineOperator::linear(a, BlockPartition::singletons(2).unwrap()).unwrap();
        let x = vec2(&op, [1.0, 1.0]);
        assert_eq!(km_step(&op, &x, 0.5).unwrap().as_slice(), &[0.75, 0.25]);
        assert_eq!(km_step(&op, &x, 0.0).unwrap().as_slice(), x.as_slice());
        // the origin is a fixed point
        let origin = vec2(&op, [0.0, 0.0]);
        assert_eq!(km_step(&op, &origin, 0.7).unwrap().as_slice(), &[0.0, 0.0]);
    }
}
