//! Nonnegative matrix factorization `min_{X, Y >= 0} 1/2 ||X Y^T - M||_F^2`.
//!
//! The full update is alternating projected gradient with steps
//! `1/||Y^T Y||_2` and `1/||X+^T X+||_2`. The coordinate update treats the
//! column pair `(X_i, Y_i)` as block `i`: `X_i` takes a projected gradient
//! step with step `1 / max(L_min, ||Y_i||^2)` onto the nonnegative part of the
//! unit sphere, then `Y_i` takes a unit projected gradient step (its
//! Lipschitz constant is `||X_i||^2 = 1`).

use std::time::Instant;

use rand::Rng;

use crate::driver::RunRecord;
use crate::error::{check_len, config_err, Error, Result};
use crate::linalg::{dot, norm2, power_iteration_psd, standard_normal, DenseMatrix};
use crate::selection::{make_order, stream_rng, SelectionRule};
use crate::Scalar;

/// Power iteration budget for the step sizes of the full update.
const POWER_ITERS: usize = 100;
const POWER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct NmfState<T> {
    /// `n x r`.
    pub x: DenseMatrix<T>,
    /// `m x r`.
    pub y: DenseMatrix<T>,
    pub l_min: T,
}

impl<T: Scalar> NmfState<T> {
    pub fn new(x: DenseMatrix<T>, y: DenseMatrix<T>, l_min: T) -> Result<Self> {
        check_len(x.cols(), y.cols())?;
        if !(l_min > T::zero()) {
            return Err(config_err("L_min must be positive"));
        }
        Ok(Self { x, y, l_min })
    }

    pub fn rank(&self) -> usize {
        self.x.cols()
    }

    fn check(&self, m: &DenseMatrix<T>) -> Result<()> {
        check_len(self.x.rows(), m.rows())?;
        check_len(self.y.rows(), m.cols())
    }

    pub fn is_nonnegative(&self) -> bool {
        self.x.as_slice().iter().chain(self.y.as_slice()).all(|&v| v >= T::zero())
    }
}

/// `X Y^T - M`.
pub fn residual_matrix<T: Scalar>(x: &DenseMatrix<T>, y: &DenseMatrix<T>, m: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    let mut r = x.matmul_t(y)?;
    check_len(m.rows(), r.rows())?;
    check_len(m.cols(), r.cols())?;
    for (ri, &mi) in r.as_mut_slice().iter_mut().zip(m.as_slice()) {
        *ri -= mi;
    }
    Ok(r)
}

/// `(X Y^T - M) Y`.
pub fn grad_x<T: Scalar>(x: &DenseMatrix<T>, y: &DenseMatrix<T>, m: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    residual_matrix(x, y, m)?.matmul(y)
}

/// `(Y X^T - M^T) X`.
pub fn grad_y<T: Scalar>(x: &DenseMatrix<T>, y: &DenseMatrix<T>, m: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    residual_matrix(x, y, m)?.transpose().matmul(x)
}

/// `1/2 ||X Y^T - M||_F^2`.
pub fn objective<T: Scalar>(x: &DenseMatrix<T>, y: &DenseMatrix<T>, m: &DenseMatrix<T>) -> Result<T> {
    let f = residual_matrix(x, y, m)?.frobenius();
    Ok(f * f / T::lit(2.0))
}

/// `||X Y^T - M||_F / ||M||_F`.
pub fn relative_residue<T: Scalar>(x: &DenseMatrix<T>, y: &DenseMatrix<T>, m: &DenseMatrix<T>) -> Result<T> {
    let nm = m.frobenius();
    if nm == T::zero() {
        return Err(config_err("relative residue is undefined for M = 0"));
    }
    Ok(residual_matrix(x, y, m)?.frobenius() / nm)
}

fn project_nonneg<T: Scalar>(a: &mut DenseMatrix<T>) {
    a.as_mut_slice().iter_mut().for_each(|v| *v = v.max(T::zero()));
}

fn lipschitz_step<T: Scalar>(a: &DenseMatrix<T>, what: &str) -> Result<T> {
    let l = power_iteration_psd(&a.gram(), POWER_ITERS, T::lit(POWER_TOL));
    if !(l > T::zero()) {
        return Err(config_err(format!("{what} is zero; the gradient step is undefined")));
    }
    Ok(T::one() / l)
}

/// One alternating projected gradient step. Returns the new state and the
/// two step sizes `(alpha, beta)`.
pub fn apg_step<T: Scalar>(state: &NmfState<T>, m: &DenseMatrix<T>) -> Result<(NmfState<T>, T, T)> {
    state.check(m)?;
    let alpha = lipschitz_step(&state.y, "Y")?;
    let gx = grad_x(&state.x, &state.y, m)?;
    let mut x = state.x.clone();
    for (xi, &g) in x.as_mut_slice().iter_mut().zip(gx.as_slice()) {
        *xi -= alpha * g;
    }
    project_nonneg(&mut x);
    let beta = lipschitz_step(&x, "X")?;
    let gy = grad_y(&x, &state.y, m)?;
    let mut y = state.y.clone();
    for (yi, &g) in y.as_mut_slice().iter_mut().zip(gy.as_slice()) {
        *yi -= beta * g;
    }
    project_nonneg(&mut y);
    Ok((NmfState { x, y, l_min: state.l_min }, alpha, beta))
}

/// Projection onto the nonnegative part of the unit sphere. A vector with no
/// positive entry maps to the first basis vector.
pub fn proj_nonneg_sphere<T: Scalar>(v: &[T]) -> Result<Vec<T>> {
    if v.is_empty() {
        return Err(config_err("cannot project an empty vector"));
    }
    let mut p: Vec<T> = v.iter().map(|&e| e.max(T::zero())).collect();
    let n = norm2(&p);
    if n > T::zero() {
        p.iter_mut().for_each(|e| *e /= n);
    } else {
        p.fill(T::zero());
        p[0] = T::one();
    }
    Ok(p)
}

/// Column update of block `i`, recomputing `X Y^T - M` from scratch.
pub fn modrri_column_update<T: Scalar>(state: &NmfState<T>, m: &DenseMatrix<T>, i: usize) -> Result<NmfState<T>> {
    state.check(m)?;
    if i >= state.rank() {
        return Err(Error::BlockOutOfRange { index: i, blocks: state.rank() });
    }
    let mut next = state.clone();
    let r = residual_matrix(&next.x, &next.y, m)?;
    let yi = next.y.col(i);
    let gx = r.matvec(&yi);
    let l = next.l_min.max(dot(&yi, &yi));
    let xi: Vec<T> = next.x.col(i).iter().zip(&gx).map(|(&a, &g)| a - g / l).collect();
    next.x.set_col(i, &proj_nonneg_sphere(&xi)?);

    let r = residual_matrix(&next.x, &next.y, m)?;
    let gy = r.matvec_t(&next.x.col(i));
    let yi_new: Vec<T> = yi.iter().zip(&gy).map(|(&a, &g)| (a - g).max(T::zero())).collect();
    next.y.set_col(i, &yi_new);
    Ok(next)
}

/// Column updates with the residual `X Y^T - M` maintained by rank-one
/// corrections.
#[derive(Debug, Clone)]
pub struct NmfWorkspace<'a, T> {
    state: NmfState<T>,
    m: &'a DenseMatrix<T>,
    residual: DenseMatrix<T>,
    m_norm: T,
}

impl<'a, T: Scalar> NmfWorkspace<'a, T> {
    pub fn new(state: NmfState<T>, m: &'a DenseMatrix<T>) -> Result<Self> {
        state.check(m)?;
        let residual = residual_matrix(&state.x, &state.y, m)?;
        Ok(Self { state, m, residual, m_norm: m.frobenius() })
    }

    pub fn state(&self) -> &NmfState<T> {
        &self.state
    }

    pub fn into_state(self) -> NmfState<T> {
        self.state
    }

    pub fn residual(&self) -> &DenseMatrix<T> {
        &self.residual
    }

    pub fn objective(&self) -> T {
        let f = self.residual.frobenius();
        f * f / T::lit(2.0)
    }

    pub fn relative_residue(&self) -> T {
        self.residual.frobenius() / self.m_norm
    }

    /// Recomputes the residual from the factors.
    pub fn refresh(&mut self) {
        self.residual = residual_matrix(&self.state.x, &self.state.y, self.m).expect("shapes checked on construction");
    }

    /// `R += u v^T`.
    fn rank_one(&mut self, u: &[T], v: &[T]) {
        for (k, &uk) in u.iter().enumerate() {
            if uk == T::zero() {
                continue;
            }
            for (r, &vj) in self.residual.row_mut(k).iter_mut().zip(v) {
                *r += uk * vj;
            }
        }
    }

    pub fn column_update(&mut self, i: usize) -> Result<()> {
        if i >= self.state.rank() {
            return Err(Error::BlockOutOfRange { index: i, blocks: self.state.rank() });
        }
        let yi = self.state.y.col(i);
        let xi = self.state.x.col(i);
        let gx = self.residual.matvec(&yi);
        let l = self.state.l_min.max(dot(&yi, &yi));
        let stepped: Vec<T> = xi.iter().zip(&gx).map(|(&a, &g)| a - g / l).collect();
        let xi_new = proj_nonneg_sphere(&stepped)?;
        let dx: Vec<T> = xi_new.iter().zip(&xi).map(|(&a, &b)| a - b).collect();
        self.rank_one(&dx, &yi);
        self.state.x.set_col(i, &xi_new);

        let gy = self.residual.matvec_t(&xi_new);
        let yi_new: Vec<T> = yi.iter().zip(&gy).map(|(&a, &g)| (a - g).max(T::zero())).collect();
        let dy: Vec<T> = yi_new.iter().zip(&yi).map(|(&a, &b)| a - b).collect();
        self.rank_one(&xi_new, &dy);
        self.state.y.set_col(i, &yi_new);
        Ok(())
    }
}

/// `M = L R + N` with `L` (`n x r`), `R` (`r x m`) and `N` entrywise
/// `max(0, standard normal)`, the noise rescaled to
/// `||N||_F = noise_rel ||L R||_F`.
pub fn gen_nmf_instance<T: Scalar>(n: usize, m: usize, r: usize, noise_rel: f64, seed: u64) -> Result<DenseMatrix<T>> {
    if r == 0 || r > n.min(m) {
        return Err(config_err(format!("rank {r} must lie in 1..={}", n.min(m))));
    }
    if noise_rel < 0.0 {
        return Err(config_err("noise level must be nonnegative"));
    }
    let mut rng = stream_rng(seed, 0);
    let mut draw = |rows, cols| DenseMatrix::from_fn(rows, cols, |_, _| standard_normal::<T, _>(&mut rng).max(T::zero()));
    let l = draw(n, r);
    let rt = draw(m, r);
    let noise = draw(n, m);
    let mut out = l.matmul_t(&rt)?;
    if noise_rel > 0.0 {
        let nn = noise.frobenius();
        if nn > T::zero() {
            let scale = T::lit(noise_rel) * out.frobenius() / nn;
            for (o, &e) in out.as_mut_slice().iter_mut().zip(noise.as_slice()) {
                *o += scale * e;
            }
        }
    }
    Ok(out)
}

/// Starting point: `X` uniform on `[0, 1)` with unit columns, `Y` uniform on `[0, 1)`.
pub fn init_state<T: Scalar>(n: usize, m: usize, r: usize, l_min: T, seed: u64) -> Result<NmfState<T>> {
    let mut rng = stream_rng(seed, 1);
    let mut x = DenseMatrix::from_fn(n, r, |_, _| T::lit(rng.random::<f64>()));
    for i in 0..r {
        x.set_col(i, &proj_nonneg_sphere(&x.col(i))?);
    }
    let y = DenseMatrix::from_fn(m, r, |_, _| T::lit(rng.random::<f64>()));
    NmfState::new(x, y, l_min)
}

/// Runs `epochs` epochs of the full update ([`SelectionRule::Full`]) or of
/// column updates in the order given by `rule`. Records carry the objective
/// and, in `residual_norm`, the relative residue.
pub fn run_nmf<T: Scalar>(
    m: &DenseMatrix<T>,
    state: NmfState<T>,
    rule: &SelectionRule,
    epochs: usize,
    seed: u64,
) -> Result<(NmfState<T>, Vec<RunRecord>)> {
    state.check(m)?;
    let start = Instant::now();
    let mut records = Vec::with_capacity(epochs);
    let r = state.rank();
    let record = |k: usize, alpha: f64, f: T, res: T, records: &mut Vec<RunRecord>| -> Result<()> {
        if !f.is_finite() {
            return Err(Error::Diverged { epoch: k, records: std::mem::take(records) });
        }
        records.push(RunRecord {
            epoch: k,
            alpha,
            objective: Some(f.as_f64()),
            residual_norm: res.as_f64(),
            elapsed_seconds: start.elapsed().as_secs_f64(),
        });
        Ok(())
    };
    if *rule == SelectionRule::Full {
        let mut st = state;
        let nm = m.frobenius();
        for k in 1..=epochs {
            let (next, alpha, _) = apg_step(&st, m)?;
            st = next;
            let res = residual_matrix(&st.x, &st.y, m)?.frobenius();
            record(k, alpha.as_f64(), res * res / T::lit(2.0), res / nm, &mut records)?;
        }
        return Ok((st, records));
    }
    let mut ws = NmfWorkspace::new(state, m)?;
    for k in 1..=epochs {
        for i in make_order(rule, r, k, seed)? {
            ws.column_update(i)?;
        }
        record(k, 1.0, ws.objective(), ws.relative_residue(), &mut records)?;
    }
    Ok((ws.into_state(), records))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_projection_examples() {
        assert_eq!(proj_nonneg_sphere(&[3.0, 4.0, -1.0]).unwrap(), vec![0.6, 0.8, 0.0]);
        assert_eq!(proj_nonneg_sphere(&[-1.0, -2.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(proj_nonneg_sphere(&[0.6, 0.8]).unwrap(), vec![0.6, 0.8]);
        assert!(proj_nonneg_sphere::<f64>(&[]).is_err());
    }

    #[test]
    fn scalar_apg_step() {
        let m = DenseMatrix::from_vec(1, 1, vec![4.0]).unwrap();
        let st = NmfState::new(DenseMatrix::from_vec(1, 1, vec![1.0]).unwrap(), DenseMatrix::from_vec(1, 1, vec![1.0]).unwrap(), 1e-3).unwrap();
        let (next, alpha, _) = apg_step(&st, &m).unwrap();
        assert_eq!(alpha, 1.0);
        assert_eq!(next.x[(0, 0)], 4.0);
        // Y = 0 has no step size
        let zero = NmfState::new(st.x.clone(), DenseMatrix::zeros(1, 1), 1e-3).unwrap();
        assert!(apg_step(&zero, &m).is_err());
    }

    #[test]
    fn exact_factorization_is_stationary() {
        let x = DenseMatrix::from_rows(&[vec![0.6, 0.0], vec![0.8, 1.0]]).unwrap();
        let y = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![0.5, 3.0], vec![1.0, 0.0]]).unwrap();
        let m = x.matmul_t(&y).unwrap();
        let st = NmfState::new(x, y, 1e-3).unwrap();
        assert_eq!(grad_x(&st.x, &st.y, &m).unwrap().frobenius(), 0.0);
        for i in 0..2 {
            let next = modrri_column_update(&st, &m, i).unwrap();
            assert!(next.x.as_slice().iter().zip(st.x.as_slice()).all(|(a, b): (&f64, &f64)| (a - b).abs() < 1e-15));
            assert!(next.y.as_slice().iter().zip(st.y.as_slice()).all(|(a, b): (&f64, &f64)| (a - b).abs() < 1e-15));
        }
        assert_eq!(relative_residue(&st.x, &st.y, &m).unwrap(), 0.0);
    }

    #[test]
    fn metrics_at_zero() {
        let m = gen_nmf_instance::<f64>(6, 5, 2, 0.0, 3).unwrap();
        let x = DenseMatrix::zeros(6, 2);
        let y = DenseMatrix::zeros(5, 2);
        assert_eq!(relative_residue(&x, &y, &m).unwrap(), 1.0);
        let f = objective(&x, &y, &m).unwrap();
        assert!((f - 0.5 * m.frobenius().powi(2)).abs() < 1e-12);
        assert!(gen_nmf_instance::<f64>(6, 5, 7, 0.0, 3).is_err());
    }
}
