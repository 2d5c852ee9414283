//! Coordinate-update fixed-point solvers.
//!
//! The library finds zeros of `S = I - T` for a nonexpansive `T` by sweeping
//! over blocks of the iterate, one block at a time, in cyclic, shuffled,
//! random or fixed order, or by the full Krasnosel'skii-Mann update. Beside
//! the generic driver it ships numerical checks of the operator inequalities
//! behind the method and three application solvers: robust l1 regression,
//! total-variation CT reconstruction, and nonnegative matrix factorization.

// `!(x > 0)` is the NaN-rejecting form of the parameter checks.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod block;
pub mod ct;
pub mod diagnostics;
pub mod driver;
pub mod error;
pub mod io;
pub mod linalg;
pub mod nmf;
pub mod operator;
pub mod primal_dual;
pub mod robust_l1;
pub mod scalar;
pub mod schedule;
pub mod selection;
pub mod sparse;

pub use block::{BlockPartition, BlockVector};
pub use driver::{epoch, run, run_observed, RunOptions, RunOutput, RunRecord, StopCriteria};
pub use error::{Error, Result};
pub use linalg::DenseMatrix;
pub use operator::{apply_coord, apply_full, km_step, CoordinateSession, ResidualOperator};
pub use scalar::Scalar;
pub use schedule::StepSchedule;
pub use selection::{make_order, SelectionRule};
pub use sparse::SparseMatrix;

pub type BlockVectorF64 = BlockVector<f64>;
pub type DenseMatrixF64 = DenseMatrix<f64>;
pub type SparseMatrixF64 = SparseMatrix<f64>;
pub type StepScheduleF64 = StepSchedule<f64>;
pub type BlockVectorF32 = BlockVector<f32>;
pub type DenseMatrixF32 = DenseMatrix<f32>;
pub type SparseMatrixF32 = SparseMatrix<f32>;
