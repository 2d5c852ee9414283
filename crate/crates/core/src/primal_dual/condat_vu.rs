use super::{SeparableProx, StackedLayout, Steps};
use crate::block::BlockPartition;
use crate::error::{check_len, config_err, Result};
use crate::operator::ResidualOperator;
use crate::sparse::SparseMatrix;
use crate::Scalar;

/// `grad(x, out)` writes the gradient of the smooth term into `out`.
pub type GradientFn<T> = Box<dyn Fn(&[T], &mut [T]) + Send + Sync>;

/// Data of `min_x g(x) + h(x) + f(A x)`.
///
/// The prox oracles are entrywise and already include their step:
/// `prox_h` is the prox of `eta h`, `prox_fstar` that of `gamma f*`.
pub struct PdProblem<T> {
    pub a: SparseMatrix<T>,
    pub grad_g: Option<GradientFn<T>>,
    pub prox_h: Option<Box<dyn SeparableProx<T>>>,
    pub prox_fstar: Option<Box<dyn SeparableProx<T>>>,
    pub eta: Steps<T>,
    pub gamma: Steps<T>,
    /// Defaults to singleton blocks over `(x, s)`.
    pub layout: Option<StackedLayout>,
}

/// Full primal-dual update
///
/// ```text
/// x+ = prox_h(x - eta (grad g(x) + A^T s))
/// s+ = prox_fstar(s + gamma A (2 x+ - x))
/// ```
///
/// as the residual `S z = z - z+`. Coordinate steps use the default
/// full-evaluation path.
pub struct CondatVu<T> {
    a: SparseMatrix<T>,
    grad_g: Option<GradientFn<T>>,
    prox_h: Option<Box<dyn SeparableProx<T>>>,
    prox_fstar: Box<dyn SeparableProx<T>>,
    eta: Steps<T>,
    gamma: Steps<T>,
    layout: StackedLayout,
}

pub fn build_condat_vu<T: Scalar>(problem: PdProblem<T>) -> Result<CondatVu<T>> {
    let PdProblem { a, grad_g, prox_h, prox_fstar, eta, gamma, layout } = problem;
    let prox_fstar = prox_fstar.ok_or_else(|| config_err("the prox of f* is required"))?;
    let layout = match layout {
        Some(l) => l,
        None => StackedLayout::singletons(a.ncols(), a.nrows())?,
    };
    check_len(a.ncols(), layout.primal())?;
    check_len(a.nrows(), layout.dual())?;
    eta.validate(a.ncols())?;
    gamma.validate(a.nrows())?;
    Ok(CondatVu { a, grad_g, prox_h, prox_fstar, eta, gamma, layout })
}

impl<T: Scalar> CondatVu<T> {
    pub fn layout(&self) -> &StackedLayout {
        &self.layout
    }

    /// The full update in canonical `(x, s)` form.
    pub fn full_update(&self, x: &[T], s: &[T]) -> (Vec<T>, Vec<T>) {
        let np = self.a.ncols();
        let mut g = vec![T::zero(); np];
        if let Some(grad) = &self.grad_g {
            grad(x, &mut g);
        }
        let mut ats = vec![T::zero(); np];
        self.a.matvec_t_into(s, &mut ats);
        let x_next: Vec<T> = (0..np)
            .map(|i| {
                let v = x[i] - self.eta.get(i) * (g[i] + ats[i]);
                match &self.prox_h {
                    Some(p) => p.prox_entry(i, v),
                    None => v,
                }
            })
            .collect();
        let two = T::lit(2.0);
        let extrap: Vec<T> = x_next.iter().zip(x).map(|(&xn, &xi)| two * xn - xi).collect();
        let mut ae = vec![T::zero(); self.a.nrows()];
        self.a.matvec_into(&extrap, &mut ae);
        let s_next = (0..s.len())
            .map(|j| self.prox_fstar.prox_entry(j, s[j] + self.gamma.get(j) * ae[j]))
            .collect();
        (x_next, s_next)
    }
}

impl<T: Scalar> ResidualOperator<T> for CondatVu<T> {
    fn partition(&self) -> &BlockPartition {
        self.layout.partition()
    }

    fn eval_full(&self, z: &[T], out: &mut [T]) {
        let (x, s) = self.layout.split(z);
        let (xn, sn) = self.full_update(&x, &s);
        let np = self.layout.primal();
        for c in 0..np {
            out[self.layout.position(c)] = x[c] - xn[c];
        }
        for j in 0..s.len() {
            out[self.layout.position(np + j)] = s[j] - sn[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::LinfBallProx;
    use super::*;

    #[test]
    fn missing_dual_prox_rejected() {
        let a = SparseMatrix::<f64>::zeros(1, 1);
        let problem = PdProblem {
            a,
            grad_g: None,
            prox_h: None,
            prox_fstar: None,
            eta: Steps::Uniform(1.0),
            gamma: Steps::Uniform(1.0),
            layout: None,
        };
        assert!(build_condat_vu(problem).is_err());
    }

    #[test]
    fn zero_matrix_leaves_primal() {
        let a = SparseMatrix::<f64>::zeros(2, 2);
        let op = build_condat_vu(PdProblem {
            a,
            grad_g: None,
            prox_h: None,
            prox_fstar: Some(Box::new(LinfBallProx::new(0.5).unwrap())),
            eta: Steps::Uniform(1.0),
            gamma: Steps::Uniform(1.0),
            layout: None,
        })
        .unwrap();
        let (xn, sn) = op.full_update(&[1.0, 2.0], &[3.0, -0.25]);
        assert_eq!(xn, vec![1.0, 2.0]);
        assert_eq!(sn, vec![0.5, -0.25]);
    }
}
