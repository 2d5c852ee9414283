//! Separable proximal maps used by the dual updates.

use crate::error::{check_len, config_err, Result};
use crate::Scalar;

/// A proximal map that acts entry by entry.
pub trait SeparableProx<T: Scalar>: Send + Sync {
    /// Value of the map at entry `index`, given the pre-prox value.
    fn prox_entry(&self, index: usize, value: T) -> T;

    fn apply(&self, y: &[T], out: &mut [T]) {
        for (i, (o, &v)) in out.iter_mut().zip(y).enumerate() {
            *o = self.prox_entry(i, v);
        }
    }
}

#[inline]
fn clamp<T: Scalar>(v: T, r: T) -> T {
    v.max(-r).min(r)
}

/// Projection onto `[-radius, radius]`.
#[derive(Debug, Clone, Copy)]
pub struct LinfBallProx<T> {
    radius: T,
}

impl<T: Scalar> LinfBallProx<T> {
    pub fn new(radius: T) -> Result<Self> {
        if !(radius >= T::zero()) {
            return Err(config_err(format!("ball radius must be nonnegative, got {radius}")));
        }
        Ok(Self { radius })
    }
}

impl<T: Scalar> SeparableProx<T> for LinfBallProx<T> {
    #[inline]
    fn prox_entry(&self, _index: usize, value: T) -> T {
        clamp(value, self.radius)
    }
}

/// `clamp(v - shift_i, [-1, 1])`: the prox of the conjugate of `||. - b||_1`
/// scaled by a diagonal step, with `shift = Gamma b`.
#[derive(Debug, Clone)]
pub struct ShiftedLinfProx<T> {
    shift: Vec<T>,
}

impl<T: Scalar> ShiftedLinfProx<T> {
    pub fn new(shift: Vec<T>) -> Self {
        Self { shift }
    }
}

impl<T: Scalar> SeparableProx<T> for ShiftedLinfProx<T> {
    #[inline]
    fn prox_entry(&self, index: usize, value: T) -> T {
        clamp(value - self.shift[index], T::one())
    }
}

/// `(v - gamma b_i) / (1 + gamma)`: the prox of `gamma f*` for `f = 1/2 ||. - b||^2`.
#[derive(Debug, Clone)]
pub struct QuadraticConjugateProx<T> {
    gamma: T,
    b: Vec<T>,
}

impl<T: Scalar> QuadraticConjugateProx<T> {
    pub fn new(gamma: T, b: Vec<T>) -> Result<Self> {
        if !(gamma > -T::one()) {
            return Err(config_err(format!("gamma must exceed -1, got {gamma}")));
        }
        Ok(Self { gamma, b })
    }
}

impl<T: Scalar> SeparableProx<T> for QuadraticConjugateProx<T> {
    #[inline]
    fn prox_entry(&self, index: usize, value: T) -> T {
        (value - self.gamma * self.b[index]) / (T::one() + self.gamma)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityProx;

impl<T: Scalar> SeparableProx<T> for IdentityProx {
    #[inline]
    fn prox_entry(&self, _index: usize, value: T) -> T {
        value
    }
}

/// `head` on entries `< split`, `tail` (re-indexed from 0) on the rest.
pub struct StackedProx<T> {
    split: usize,
    head: Box<dyn SeparableProx<T>>,
    tail: Box<dyn SeparableProx<T>>,
}

impl<T: Scalar> StackedProx<T> {
    pub fn new(split: usize, head: Box<dyn SeparableProx<T>>, tail: Box<dyn SeparableProx<T>>) -> Self {
        Self { split, head, tail }
    }
}

impl<T: Scalar> SeparableProx<T> for StackedProx<T> {
    #[inline]
    fn prox_entry(&self, index: usize, value: T) -> T {
        if index < self.split {
            self.head.prox_entry(index, value)
        } else {
            self.tail.prox_entry(index - self.split, value)
        }
    }
}

/// Componentwise clamp of `y` to `[-radius, radius]`.
pub fn prox_linf_ball<T: Scalar>(y: &[T], radius: T) -> Result<Vec<T>> {
    let p = LinfBallProx::new(radius)?;
    Ok(y.iter().map(|&v| p.prox_entry(0, v)).collect())
}

/// `clamp(y - Gamma b, [-1, 1])` with `Gamma = diag(gamma)`.
pub fn prox_l1_dual_shifted<T: Scalar>(y: &[T], gamma: &[T], b: &[T]) -> Result<Vec<T>> {
    check_len(y.len(), gamma.len())?;
    check_len(y.len(), b.len())?;
    Ok(y.iter().zip(gamma).zip(b).map(|((&v, &g), &bi)| clamp(v - g * bi, T::one())).collect())
}

/// `(y - gamma b) / (1 + gamma)`.
pub fn prox_quadratic_conjugate<T: Scalar>(y: &[T], gamma: T, b: &[T]) -> Result<Vec<T>> {
    check_len(y.len(), b.len())?;
    let p = QuadraticConjugateProx::new(gamma, b.to_vec())?;
    let mut out = vec![T::zero(); y.len()];
    p.apply(y, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linf_ball() {
        assert_eq!(prox_linf_ball(&[0.5, -3.0, 2.0], 1.0).unwrap(), vec![0.5, -1.0, 1.0]);
        assert_eq!(prox_linf_ball(&[0.5, -3.0], 0.0).unwrap(), vec![0.0, 0.0]);
        assert!(prox_linf_ball(&[1.0], -1.0).is_err());
    }

    #[test]
    fn shifted_clamp() {
        assert_eq!(prox_l1_dual_shifted(&[2.0, -0.3], &[1.0, 1.0], &[0.0, 0.0]).unwrap(), vec![1.0, -0.3]);
        assert_eq!(prox_l1_dual_shifted(&[2.0], &[0.5], &[2.0]).unwrap(), vec![1.0]);
        assert_eq!(prox_l1_dual_shifted(&[1.0], &[0.5], &[2.0]).unwrap(), vec![0.0]);
        assert!(prox_l1_dual_shifted(&[1.0], &[0.5, 1.0], &[2.0]).is_err());
    }

    #[test]
    fn quadratic_conjugate() {
        assert_eq!(prox_quadratic_conjugate(&[2.0], 1.0, &[0.0]).unwrap(), vec![1.0]);
        assert_eq!(prox_quadratic_conjugate(&[3.0], 1.0, &[1.0]).unwrap(), vec![1.0]);
        assert_eq!(prox_quadratic_conjugate(&[3.0, -1.0], 0.0, &[1.0, 5.0]).unwrap(), vec![3.0, -1.0]);
        assert!(prox_quadratic_conjugate(&[3.0], -1.0, &[1.0]).is_err());
    }

    #[test]
    fn stacked_reindexes_tail() {
        let p = StackedProx::new(
            2,
            Box::new(LinfBallProx::new(0.5).unwrap()),
            Box::new(QuadraticConjugateProx::new(1.0, vec![1.0, 2.0]).unwrap()),
        );
        let mut out = [0.0; 4];
        p.apply(&[1.0, -1.0, 3.0, 4.0], &mut out);
        assert_eq!(out, [0.5, -0.5, 1.0, 1.0]);
    }
}
