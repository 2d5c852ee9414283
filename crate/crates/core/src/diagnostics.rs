//! Numerical checks of the inequalities behind the coordinate-update method.
//!
//! The test instances are affine, `S x = A x - b` with symmetric `A`
//! assembled as `Q diag(lambda) Q^T`, so the zero `x*`, the monotonicity
//! modulus and nonexpansiveness of `I - S` are known by construction.

use std::sync::Arc;

use rand::Rng;

use crate::block::{BlockPartition, BlockVector};
use crate::driver::{epoch, RunRecord};
use crate::error::{check_len, config_err, Error, Result};
use crate::linalg::{dist, norm2, random_normal_vec, random_orthogonal, symmetric_eigen, DenseMatrix};
use crate::operator::{AffineOperator, CoordinateSession, ResidualOperator};
use crate::selection::stream_rng;
use crate::Scalar;

/// Affine operator with a prescribed spectrum and a known zero.
#[derive(Debug, Clone)]
pub struct AffineTestOperator<T> {
    op: AffineOperator<T>,
    x_star: Vec<T>,
    eigenvalues: Vec<T>,
    lipschitz: Vec<T>,
}

impl<T: Scalar> AffineTestOperator<T> {
    /// `A = Q diag(eigenvalues) Q^T`, `b = A x_star`. `q` must be orthogonal.
    pub fn from_eigen(q: &DenseMatrix<T>, eigenvalues: &[T], x_star: Vec<T>, partition: BlockPartition) -> Result<Self> {
        let n = eigenvalues.len();
        check_len(n, q.rows())?;
        check_len(n, x_star.len())?;
        if let Some(l) = eigenvalues.iter().find(|&&l| !(l >= T::zero() && l <= T::lit(2.0))) {
            return Err(config_err(format!("eigenvalue {l} outside [0, 2]; I - S would not be nonexpansive")));
        }
        let mut a = q.matmul(&DenseMatrix::from_diag(eigenvalues))?.matmul_t(q)?;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = (a[(i, j)] + a[(j, i)]) / T::lit(2.0);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        let b = a.matvec(&x_star);
        let op = AffineOperator::new(a, b, partition)?;
        let lipschitz = op
            .coord_lipschitz()
            .ok_or_else(|| config_err("spectral norm of a row block failed"))?;
        let mut eigenvalues = eigenvalues.to_vec();
        eigenvalues.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Self { op, x_star, eigenvalues, lipschitz })
    }

    /// Spectrum with smallest eigenvalue exactly `mu`, the rest uniform in `[mu, hi]`.
    pub fn random_strongly_monotone<R: Rng + ?Sized>(
        rng: &mut R,
        partition: BlockPartition,
        mu: T,
        hi: T,
    ) -> Result<Self> {
        if !(mu > T::zero() && mu <= hi) {
            return Err(config_err(format!("need 0 < mu <= hi, got mu = {mu}, hi = {hi}")));
        }
        let n = partition.dim();
        let mut lam: Vec<T> = (0..n).map(|_| mu + (hi - mu) * T::lit(rng.random::<f64>())).collect();
        lam[0] = mu;
        Self::random_with_spectrum(rng, partition, &lam)
    }

    /// `zeros` zero eigenvalues, the rest uniform in `(0, hi]`; `mu = 0`.
    pub fn random_nonexpansive<R: Rng + ?Sized>(
        rng: &mut R,
        partition: BlockPartition,
        zeros: usize,
        hi: T,
    ) -> Result<Self> {
        let n = partition.dim();
        if zeros > n {
            return Err(config_err("more zero eigenvalues than dimensions"));
        }
        let lam: Vec<T> = (0..n)
            .map(|i| if i < zeros { T::zero() } else { hi * T::lit(1.0 - rng.random::<f64>()) })
            .collect();
        Self::random_with_spectrum(rng, partition, &lam)
    }

    pub fn random_with_spectrum<R: Rng + ?Sized>(rng: &mut R, partition: BlockPartition, eigenvalues: &[T]) -> Result<Self> {
        let n = partition.dim();
        let q = random_orthogonal(rng, n);
        let x_star = random_normal_vec(rng, n);
        Self::from_eigen(&q, eigenvalues, x_star, partition)
    }

    pub fn operator(&self) -> &AffineOperator<T> {
        &self.op
    }

    /// A zero of `S` (the unique one when `mu > 0`).
    pub fn x_star(&self) -> &[T] {
        &self.x_star
    }

    /// Smallest eigenvalue, the quasi-strong monotonicity modulus.
    pub fn mu(&self) -> T {
        self.eigenvalues[0]
    }

    /// Ascending.
    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    pub fn lipschitz(&self) -> &[T] {
        &self.lipschitz
    }

    pub fn max_lipschitz(&self) -> T {
        crate::operator::max_lipschitz(&self.lipschitz)
    }

    pub fn block_vector(&self, data: Vec<T>) -> Result<BlockVector<T>> {
        BlockVector::new(data, Arc::new(self.op.partition().clone()))
    }
}

impl<T: Scalar> ResidualOperator<T> for AffineTestOperator<T> {
    fn partition(&self) -> &BlockPartition {
        self.op.partition()
    }

    fn eval_full(&self, x: &[T], out: &mut [T]) {
        self.op.eval_full(x, out)
    }

    fn eval_block(&self, x: &[T], block: usize, out: &mut [T]) {
        self.op.eval_block(x, block, out)
    }

    fn coord_lipschitz(&self) -> Option<Vec<T>> {
        Some(self.lipschitz.clone())
    }

    fn session(&self, x: &[T]) -> Box<dyn CoordinateSession<T> + '_> {
        self.op.session(x)
    }
}

/// Symmetric positive definite metric `M` with its extreme eigenvalues.
#[derive(Debug, Clone)]
pub struct MetricMatrix<T> {
    m: DenseMatrix<T>,
    lambda_min: T,
    lambda_max: T,
}

impl<T: Scalar> MetricMatrix<T> {
    pub fn new(m: DenseMatrix<T>) -> Result<Self> {
        let e = symmetric_eigen(&m)?;
        let lambda_min = e.values[0];
        let lambda_max = *e.values.last().unwrap();
        if !(lambda_min > T::zero()) {
            return Err(Error::NotPositiveDefinite(lambda_min.as_f64()));
        }
        Ok(Self { m, lambda_min, lambda_max })
    }

    /// `Q diag(lambda) Q^T` with eigenvalues log-uniform in `[1, cond]`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, n: usize, cond: T) -> Result<Self> {
        if !(cond >= T::one()) {
            return Err(config_err("condition number must be at least 1"));
        }
        let q = random_orthogonal(rng, n);
        let lam: Vec<T> = (0..n).map(|_| cond.powf(T::lit(rng.random::<f64>()))).collect();
        let mut m = q.matmul(&DenseMatrix::from_diag(&lam))?.matmul_t(&q)?;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = (m[(i, j)] + m[(j, i)]) / T::lit(2.0);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self::new(m)
    }

    pub fn matrix(&self) -> &DenseMatrix<T> {
        &self.m
    }

    pub fn lambda_min(&self) -> T {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> T {
        self.lambda_max
    }

    pub fn kappa(&self) -> T {
        self.lambda_max / self.lambda_min
    }

    /// `||z||_M^2 = z^T M z`.
    pub fn norm_sq(&self, z: &[T]) -> T {
        self.m.quad_form(z)
    }
}

/// `T^alpha x = x - alpha S x`.
fn averaged<T: Scalar, O: ResidualOperator<T> + ?Sized>(op: &O, x: &[T], alpha: T) -> Vec<T> {
    let mut s = vec![T::zero(); x.len()];
    op.eval_full(x, &mut s);
    x.iter().zip(&s).map(|(&xi, &si)| xi - alpha * si).collect()
}

fn residual<T: Scalar, O: ResidualOperator<T> + ?Sized>(op: &O, x: &[T]) -> Vec<T> {
    let mut s = vec![T::zero(); x.len()];
    op.eval_full(x, &mut s);
    s
}

fn natural_order(m: usize) -> Vec<usize> {
    (0..m).collect()
}

/// `R x = (T^alpha x - E^alpha x) / alpha`, with `E^alpha` one epoch in `order`.
pub fn r_operator<T: Scalar, O: ResidualOperator<T> + ?Sized>(
    op: &O,
    x: &BlockVector<T>,
    alpha: T,
    order: &[usize],
) -> Result<BlockVector<T>> {
    let e = epoch(op, x, alpha, order)?;
    let t = averaged(op, x.as_slice(), alpha);
    x.with_data(t.iter().zip(e.as_slice()).map(|(&ti, &ei)| (ti - ei) / alpha).collect())
}

fn r_bound_factor<T: Scalar>(alpha: T, lipschitz: T, m: usize) -> T {
    let mf = T::lit(m as f64);
    alpha * lipschitz * mf / T::lit(std::f64::consts::SQRT_2) * (T::one() + alpha * lipschitz).powi(m as i32)
}

/// `||R x|| / [(alpha L m / sqrt 2)(1 + alpha L)^m ||S x||]` for the natural
/// block order; 0 when `S x = 0`. At most 1 when `I - S` is nonexpansive.
pub fn check_r_bound<T: Scalar, O: ResidualOperator<T> + ?Sized>(
    op: &O,
    x: &BlockVector<T>,
    alpha: T,
    lipschitz: T,
) -> Result<T> {
    let m = op.partition().num_blocks();
    let sx = norm2(&residual(op, x.as_slice()));
    if sx == T::zero() {
        return Ok(T::zero());
    }
    let r = r_operator(op, x, alpha, &natural_order(m))?;
    Ok(r.norm() / (r_bound_factor(alpha, lipschitz, m) * sx))
}

/// As [`check_r_bound`] with both norms taken in `M` and the bound
/// multiplied by `kappa^2`.
pub fn check_r_bound_metric<T: Scalar, O: ResidualOperator<T> + ?Sized>(
    op: &O,
    x: &BlockVector<T>,
    alpha: T,
    lipschitz: T,
    metric: &MetricMatrix<T>,
) -> Result<T> {
    check_len(op.dim(), metric.matrix().rows())?;
    let m = op.partition().num_blocks();
    let sx = metric.norm_sq(&residual(op, x.as_slice())).sqrt();
    if sx == T::zero() {
        return Ok(T::zero());
    }
    let r = r_operator(op, x, alpha, &natural_order(m))?;
    let k2 = metric.kappa() * metric.kappa();
    Ok(metric.norm_sq(r.as_slice()).sqrt() / (k2 * r_bound_factor(alpha, lipschitz, m) * sx))
}

/// `||x - x*||^2 - alpha (1 - alpha) ||S x||^2 - ||T^alpha x - x*||^2`;
/// nonnegative when `I - S` is nonexpansive and `S x* = 0`.
pub fn check_quasi_contraction<T: Scalar, O: ResidualOperator<T> + ?Sized>(
    op: &O,
    x: &BlockVector<T>,
    x_star: &[T],
    alpha: T,
) -> Result<T> {
    check_len(op.dim(), x.dim())?;
    check_len(op.dim(), x_star.len())?;
    if !(alpha >= T::zero() && alpha <= T::one()) {
        return Err(config_err(format!("quasi-contraction needs alpha in [0, 1], got {alpha}")));
    }
    let s = residual(op, x.as_slice());
    let t = averaged(op, x.as_slice(), alpha);
    let d0 = dist(x.as_slice(), x_star);
    let d1 = dist(&t, x_star);
    Ok(d0 * d0 - alpha * (T::one() - alpha) * crate::linalg::norm2_sq(&s) - d1 * d1)
}

/// Largest sampled `||E^alpha x - E^alpha y|| / ||x - y||` over `trials`
/// Gaussian pairs. Bounded by `(1 + alpha L)^m`.
pub fn check_epoch_lipschitz<T: Scalar, O: ResidualOperator<T> + ?Sized>(
    op: &O,
    alpha: T,
    trials: usize,
    seed: u64,
) -> Result<T> {
    let n = op.dim();
    let part = Arc::new(op.partition().clone());
    let order = natural_order(part.num_blocks());
    let mut rng = stream_rng(seed, 0);
    let mut worst = T::zero();
    for _ in 0..trials {
        let x = BlockVector::new(random_normal_vec(&mut rng, n), part.clone())?;
        let y = BlockVector::new(random_normal_vec(&mut rng, n), part.clone())?;
        let d = dist(x.as_slice(), y.as_slice());
        if d == T::zero() {
            continue;
        }
        let ex = epoch(op, &x, alpha, &order)?;
        let ey = epoch(op, &y, alpha, &order)?;
        worst = worst.max(dist(ex.as_slice(), ey.as_slice()) / d);
    }
    Ok(worst)
}

/// True iff `errors[k+1] <= rho * errors[k] + 1e-12` for every `k`.
pub fn check_linear_rate<T: Scalar>(errors: &[T], rho: T) -> Result<bool> {
    if errors.is_empty() {
        return Err(config_err("empty error sequence"));
    }
    if !(rho > T::zero() && rho < T::one()) {
        return Err(config_err(format!("rate must lie in (0, 1), got {rho}")));
    }
    let slack = T::lit(1e-12);
    Ok(errors.windows(2).all(|w| w[1] <= rho * w[0] + slack))
}

/// Both sides of `(1/kappa^2)||z||_M^2 <= sum_i ||z_i||_M^2 <= kappa^2 ||z||_M^2`
/// with `1e-10` slack, where `z_i` is `z` zeroed outside block `i`.
pub fn check_block_norm_kappa<T: Scalar>(metric: &MetricMatrix<T>, z: &BlockVector<T>) -> Result<bool> {
    check_len(metric.matrix().rows(), z.dim())?;
    let part = z.partition();
    let mut zi = vec![T::zero(); z.dim()];
    let mut sum = T::zero();
    for i in 0..part.num_blocks() {
        let r = part.range(i);
        zi[r.clone()].copy_from_slice(&z.as_slice()[r.clone()]);
        sum += metric.norm_sq(&zi);
        zi[r].fill(T::zero());
    }
    let full = metric.norm_sq(z.as_slice());
    let k2 = metric.kappa() * metric.kappa();
    let slack = T::lit(1e-10);
    Ok(full / k2 <= sum + slack && sum <= k2 * full + slack)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendRow {
    pub epoch: usize,
    /// `min_{j <= k} ||S x^j||^2`.
    pub running_min_sq: f64,
    /// `sqrt(k) * running_min_sq`.
    pub scaled: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendReport {
    pub rows: Vec<TrendRow>,
    /// Whether the running minimum never increased.
    pub monotone: bool,
}

/// Running minimum of the squared residual and its `sqrt(k)`-scaled version.
pub fn residual_trend(records: &[RunRecord]) -> TrendReport {
    let mut best = f64::INFINITY;
    let mut monotone = true;
    let mut rows = Vec::with_capacity(records.len());
    for r in records {
        let sq = r.residual_norm * r.residual_norm;
        let next = best.min(sq);
        if next > best {
            monotone = false;
        }
        best = next;
        rows.push(TrendRow { epoch: r.epoch, running_min_sq: best, scaled: (r.epoch as f64).sqrt() * best });
    }
    TrendReport { rows, monotone }
}

/// Sampled lower bounds on the coordinate Lipschitz constants `L_i`:
/// the largest `||S_i x - S_i y|| / ||x - y||` over `trials` Gaussian pairs
/// with entries of standard deviation `scale`.
pub fn probe_coord_lipschitz<T: Scalar, O: ResidualOperator<T> + ?Sized>(
    op: &O,
    trials: usize,
    scale: T,
    seed: u64,
) -> Vec<T> {
    let n = op.dim();
    let part = op.partition();
    let mut rng = stream_rng(seed, 0);
    let mut best = vec![T::zero(); part.num_blocks()];
    let mut sx = vec![T::zero(); n];
    let mut sy = vec![T::zero(); n];
    for _ in 0..trials {
        let x: Vec<T> = random_normal_vec(&mut rng, n).into_iter().map(|v: T| v * scale).collect();
        let y: Vec<T> = random_normal_vec(&mut rng, n).into_iter().map(|v: T| v * scale).collect();
        let d = dist(&x, &y);
        if d == T::zero() {
            continue;
        }
        op.eval_full(&x, &mut sx);
        op.eval_full(&y, &mut sy);
        for (i, b) in best.iter_mut().enumerate() {
            let r = part.range(i);
            *b = b.max(dist(&sx[r.clone()], &sy[r]) / d);
        }
    }
    best
}
