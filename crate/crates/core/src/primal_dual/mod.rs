//! Primal-dual splitting for `min_x g(x) + h(x) + f(A x)` written as a
//! fixed-point problem over the stacked variable `z = (x, s)`.
//!
//! [`SimplifiedPd`] covers `g = h = 0` and supports cached coordinate
//! updates that keep `A x` and `A^T s` in sync with single-block changes.
//! [`CondatVu`] is the general full update.

mod condat_vu;
mod layout;
mod prox;
mod simplified;

pub use condat_vu::{build_condat_vu, CondatVu, GradientFn, PdProblem};
pub use layout::StackedLayout;
pub use prox::{
    prox_l1_dual_shifted, prox_linf_ball, prox_quadratic_conjugate, IdentityProx, LinfBallProx, QuadraticConjugateProx,
    SeparableProx, ShiftedLinfProx, StackedProx,
};
pub use simplified::{build_simplified, CacheRefresh, PdCache, PdState, SimplifiedPd};

use crate::error::{config_err, Result};
use crate::Scalar;

/// A positive step, either shared by all entries or one per entry.
#[derive(Debug, Clone, PartialEq)]
pub enum Steps<T> {
    Uniform(T),
    Diagonal(Vec<T>),
}

impl<T: Scalar> Steps<T> {
    /// Checks positivity and, for diagonal steps, the length.
    pub fn validate(&self, len: usize) -> Result<()> {
        let ok = |v: T| v > T::zero() && v.is_finite();
        match self {
            Self::Uniform(v) if ok(*v) => Ok(()),
            Self::Diagonal(d) if d.len() != len => {
                Err(config_err(format!("diagonal step has {} entries, expected {len}", d.len())))
            }
            Self::Diagonal(d) if d.iter().all(|&v| ok(v)) => Ok(()),
            _ => Err(config_err("step sizes must be positive and finite")),
        }
    }

    #[inline]
    pub fn get(&self, i: usize) -> T {
        match self {
            Self::Uniform(v) => *v,
            Self::Diagonal(d) => d[i],
        }
    }

    pub fn scaled(&self, c: T) -> Self {
        match self {
            Self::Uniform(v) => Self::Uniform(*v * c),
            Self::Diagonal(d) => Self::Diagonal(d.iter().map(|&v| v * c).collect()),
        }
    }
}
