//! The epoch driver: sequential block sweeps and the full KM iteration.

use std::time::Instant;

use crate::block::BlockVector;
use crate::error::{check_len, config_err, Error, Result};
use crate::operator::{km_step_in_place, ResidualOperator};
use crate::schedule::StepSchedule;
use crate::selection::{make_order, SelectionRule};
use crate::Scalar;

/// Metrics logged after one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub epoch: usize,
    pub alpha: f64,
    pub objective: Option<f64>,
    pub residual_norm: f64,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopCriteria {
    pub max_epochs: usize,
    /// Stop once `||S x|| <= residual_tol`. Use a negative value to disable.
    pub residual_tol: f64,
    /// Stop once the observed objective is `<=` this value.
    pub objective_target: Option<f64>,
}

impl StopCriteria {
    pub fn epochs(max_epochs: usize) -> Self {
        Self { max_epochs, residual_tol: -1.0, objective_target: None }
    }

    pub fn residual(max_epochs: usize, residual_tol: f64) -> Self {
        Self { max_epochs, residual_tol, objective_target: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub stop: StopCriteria,
    /// Seed of the block-order generator.
    pub seed: u64,
    /// Diagonal weights `w` for reporting `||S x||_w = sqrt(sum w_i (S x)_i^2)`.
    pub metric: Option<Vec<f64>>,
}

impl RunOptions {
    pub fn new(stop: StopCriteria, seed: u64) -> Self {
        Self { stop, seed, metric: None }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput<T> {
    pub x: BlockVector<T>,
    pub records: Vec<RunRecord>,
}

fn check_iterate<T: Scalar, O: ResidualOperator<T> + ?Sized>(op: &O, x: &BlockVector<T>) -> Result<()> {
    check_len(op.dim(), x.dim())?;
    if x.partition().as_ref() != op.partition() {
        return Err(config_err("iterate partition differs from the operator partition"));
    }
    Ok(())
}

fn check_order(order: &[usize], m: usize) -> Result<()> {
    match order.iter().find(|&&i| i >= m) {
        Some(&index) => Err(Error::BlockOutOfRange { index, blocks: m }),
        None => Ok(()),
    }
}

/// One sweep of coordinate updates in the given block order.
///
/// Each step reads the iterate as left by the previous step, so with the
/// natural order the result is `(I - alpha S_m) ... (I - alpha S_1) x`.
pub fn epoch<T: Scalar, O: ResidualOperator<T> + ?Sized>(
    op: &O,
    x: &BlockVector<T>,
    alpha: T,
    order: &[usize],
) -> Result<BlockVector<T>> {
    check_iterate(op, x)?;
    if !(alpha > T::zero()) {
        return Err(config_err("epoch step size must be positive"));
    }
    check_order(order, op.partition().num_blocks())?;
    let mut y = x.clone();
    let mut session = op.session(y.as_slice());
    for &i in order {
        session.step(y.as_mut_slice(), i, alpha);
    }
    session.end_epoch(y.as_slice());
    Ok(y)
}

fn residual_norm<T: Scalar>(s: &[T], metric: Option<&[f64]>) -> f64 {
    match metric {
        None => crate::linalg::norm2(s).as_f64(),
        Some(w) => s.iter().zip(w).map(|(&si, &wi)| wi * si.as_f64().powi(2)).sum::<f64>().sqrt(),
    }
}

/// Runs Algorithm-1 style epochs (or full KM steps for [`SelectionRule::Full`]).
pub fn run<T: Scalar, O: ResidualOperator<T> + ?Sized>(
    op: &O,
    x0: &BlockVector<T>,
    schedule: &StepSchedule<T>,
    rule: &SelectionRule,
    options: &RunOptions,
) -> Result<RunOutput<T>> {
    run_observed(op, x0, schedule, rule, options, |_, _| None)
}

/// Like [`run`], with `observe(epoch, x)` supplying the logged objective.
pub fn run_observed<T, O, F>(
    op: &O,
    x0: &BlockVector<T>,
    schedule: &StepSchedule<T>,
    rule: &SelectionRule,
    options: &RunOptions,
    mut observe: F,
) -> Result<RunOutput<T>>
where
    T: Scalar,
    O: ResidualOperator<T> + ?Sized,
    F: FnMut(usize, &[T]) -> Option<f64>,
{
    check_iterate(op, x0)?;
    if let Some(w) = &options.metric {
        check_len(op.dim(), w.len())?;
        if w.iter().any(|&wi| !(wi > 0.0)) {
            return Err(config_err("metric weights must be positive"));
        }
    }
    let m = op.partition().num_blocks();
    let metric = options.metric.as_deref();
    let mut x = x0.clone();
    let mut s = vec![T::zero(); op.dim()];
    let mut records = Vec::with_capacity(options.stop.max_epochs.min(1 << 16));
    let start = Instant::now();
    let mut session = match rule {
        SelectionRule::Full => None,
        _ => Some(op.session(x.as_slice())),
    };

    for k in 1..=options.stop.max_epochs {
        let alpha = schedule.step_size(k)?;
        match session.as_mut() {
            None => km_step_in_place(op, x.as_mut_slice(), alpha, &mut s),
            Some(sess) => {
                let order = make_order(rule, m, k, options.seed)?;
                for &i in &order {
                    sess.step(x.as_mut_slice(), i, alpha);
                }
                sess.end_epoch(x.as_slice());
            }
        }
        if !x.is_finite() {
            return Err(Error::Diverged { epoch: k, records });
        }
        op.eval_full(x.as_slice(), &mut s);
        let residual = residual_norm(&s, metric);
        if !residual.is_finite() {
            return Err(Error::Diverged { epoch: k, records });
        }
        let objective = observe(k, x.as_slice());
        records.push(RunRecord {
            epoch: k,
            alpha: alpha.as_f64(),
            objective,
            residual_norm: residual,
            elapsed_seconds: start.elapsed().as_secs_f64(),
        });
        if residual <= options.stop.residual_tol {
            break;
        }
        if let (Some(f), Some(target)) = (objective, options.stop.objective_target) {
            if f <= target {
                break;
            }
        }
    }
    drop(session);
    Ok(RunOutput { x, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::BlockPartition;
    use crate::linalg::DenseMatrix;
    use crate::operator::{km_step, AffineOperator, ZeroOperator};
    use std::sync::Arc;

    fn affine(rows: &[Vec<f64>], blocks: BlockPartition) -> AffineOperator<f64> {
        AffineOperator::linear(DenseMatrix::from_rows(rows).unwrap(), blocks).unwrap()
    }

    #[test]
    fn sequential_epoch_example() {
        let op = affine(&[vec![1.0, 0.5], vec![0.5, 1.0]], BlockPartition::singletons(2).unwrap());
        let x = BlockVector::new(vec![1.0, 1.0], Arc::new(op.partition().clone())).unwrap();
        let y = epoch(&op, &x, 1.0, &[0, 1]).unwrap();
        assert_eq!(y.as_slice(), &[-0.5, 0.25]);
    }

    #[test]
    fn single_block_epoch_is_km_step() {
        let op = affine(&[vec![1.0, 0.5], vec![0.5, 1.0]], BlockPartition::uniform(2, 1).unwrap());
        let x = BlockVector::new(vec![0.3, -2.0], Arc::new(op.partition().clone())).unwrap();
        assert_eq!(epoch(&op, &x, 0.7, &[0]).unwrap(), km_step(&op, &x, 0.7).unwrap());
    }

    #[test]
    fn zero_operator_stops_immediately() {
        let op = ZeroOperator::new(BlockPartition::singletons(3).unwrap());
        let x0 = BlockVector::new(vec![1.0, 2.0, 3.0], Arc::new(op.partition().clone())).unwrap();
        let opts = RunOptions::new(StopCriteria::residual(50, 0.0), 0);
        let out = run(&op, &x0, &StepSchedule::Constant(1.0), &SelectionRule::Cyclic, &opts).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].residual_norm, 0.0);
        assert_eq!(out.x, x0);
    }

    #[test]
    fn objective_target_stops_run() {
        let op = affine(&[vec![1.0]], BlockPartition::singletons(1).unwrap());
        let x0 = BlockVector::new(vec![1.0], Arc::new(op.partition().clone())).unwrap();
        let mut opts = RunOptions::new(StopCriteria::epochs(50), 0);
        opts.stop.objective_target = Some(0.2);
        let out = run_observed(&op, &x0, &StepSchedule::Constant(0.5), &SelectionRule::Cyclic, &opts, |_, x| Some(x[0])).unwrap();
        assert_eq!(out.records.len(), 3);
        assert_eq!(out.x.as_slice(), &[0.125]);
    }

    #[test]
    fn divergence_names_the_epoch() {
        // S = -I pushes the iterate away from the origin by a factor 1 + alpha per step
        let op = affine(&[vec![-1.0]], BlockPartition::singletons(1).unwrap());
        let x0 = BlockVector::new(vec![1.0], Arc::new(op.partition().clone())).unwrap();
        let opts = RunOptions::new(StopCriteria::epochs(10_000), 0);
        let err = run(&op, &x0, &StepSchedule::Constant(1e3), &SelectionRule::Full, &opts).unwrap_err();
        match err {
            Error::Diverged { epoch, records } => {
                assert!(epoch > 1);
                assert_eq!(records.len(), epoch - 1);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn out_of_range_order_rejected() {
        let op = ZeroOperator::new(BlockPartition::singletons(2).unwrap());
        let x = BlockVector::<f64>::zeros(Arc::new(op.partition().clone()));
        assert!(epoch(&op, &x, 1.0, &[0, 2]).is_err());
    }
}
