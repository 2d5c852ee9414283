use crate::error::{config_err, Result};
use crate::Scalar;

/// Step-size sequence `alpha_k`, `k >= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule<T> {
    Constant(T),
    /// `alpha_k = 1 / sqrt(k)`.
    InverseSqrt,
    /// The fixed step that certifies linear convergence under quasi-strong
    /// monotonicity with modulus `mu`:
    /// `min{1/(4mL), mu/(4 sqrt(2) mL), 2mL/(17mL + 2 mu^2)}`.
    TheoreticalFixed { blocks: usize, lipschitz: T, mu: T },
}

impl<T: Scalar> StepSchedule<T> {
    pub fn constant(alpha: T) -> Result<Self> {
        if !(alpha > T::zero()) || !alpha.is_finite() {
            return Err(config_err(format!("constant step must be positive, got {alpha}")));
        }
        Ok(Self::Constant(alpha))
    }

    pub fn theoretical_fixed(blocks: usize, lipschitz: T, mu: T) -> Result<Self> {
        if blocks == 0 {
            return Err(config_err("theoretical step needs at least one block"));
        }
        if !(lipschitz > T::zero()) {
            return Err(config_err(format!("theoretical step needs L > 0, got {lipschitz}")));
        }
        if !(mu > T::zero()) {
            return Err(config_err(format!("theoretical step needs mu > 0, got {mu}")));
        }
        Ok(Self::TheoreticalFixed { blocks, lipschitz, mu })
    }

    /// Step for epoch `k` (1-based).
    pub fn step_size(&self, k: usize) -> Result<T> {
        if k == 0 {
            return Err(config_err("epochs are numbered from 1"));
        }
        Ok(match *self {
            Self::Constant(a) => a,
            Self::InverseSqrt => T::one() / T::lit(k as f64).sqrt(),
            Self::TheoreticalFixed { blocks, lipschitz, mu } => theoretical_step(blocks, lipschitz, mu),
        })
    }
}

fn theoretical_step<T: Scalar>(m: usize, l: T, mu: T) -> T {
    let ml = T::lit(m as f64) * l;
    let a = T::one() / (T::lit(4.0) * ml);
    let b = mu / (T::lit(4.0 * std::f64::consts::SQRT_2) * ml);
    let c = T::lit(2.0) * ml / (T::lit(17.0) * ml + T::lit(2.0) * mu * mu);
    a.min(b).min(c)
}

/// Per-epoch contraction factor `1 - alpha mu^2 / 2` of the squared error.
pub fn linear_rate<T: Scalar>(alpha: T, mu: T) -> T {
    T::one() - alpha * mu * mu / T::lit(2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_sqrt_values() {
        let s = StepSchedule::<f64>::InverseSqrt;
        assert_eq!(s.step_size(4).unwrap(), 0.5);
        assert_eq!(s.step_size(1).unwrap(), 1.0);
        assert!(s.step_size(0).is_err());
    }

    #[test]
    fn theoretical_fixed_example() {
        let s = StepSchedule::theoretical_fixed(1, 2.0f64, 1.0).unwrap();
        let want = 1.0 / (8.0 * 2f64.sqrt());
        assert!((s.step_size(1).unwrap() - want).abs() < 1e-15);
        assert_eq!(s.step_size(1).unwrap(), s.step_size(50).unwrap());
        assert!(StepSchedule::theoretical_fixed(2, 1.0f64, 0.0).is_err());
        assert!(StepSchedule::theoretical_fixed(2, -1.0f64, 0.5).is_err());
    }

    #[test]
    fn constant_step() {
        let s = StepSchedule::constant(1.0f64).unwrap();
        assert_eq!(s.step_size(123).unwrap(), 1.0);
        assert!(StepSchedule::constant(0.0f64).is_err());
    }
}
