//! Diagnostic checks of the convergence theory on random affine instances,
//! plus cache and reduction identities of the primal-dual operators.

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use cyclic_fp::ct::{build_ct_operator, bundle_blocks, gen_ct_instance, CtInstance, ImageGrid};
use cyclic_fp::diagnostics::{
    check_block_norm_kappa, check_epoch_lipschitz, check_linear_rate, check_quasi_contraction, r_operator,
    residual_trend, AffineTestOperator, MetricMatrix,
};
use cyclic_fp::linalg::{dist, norm2, random_normal_vec, rel_dist};
use cyclic_fp::operator::Uncached;
use cyclic_fp::primal_dual::{
    build_condat_vu, CacheRefresh, LinfBallProx, PdProblem, QuadraticConjugateProx, ShiftedLinfProx, StackedProx,
    Steps,
};
use cyclic_fp::robust_l1::{build_robust_l1, gen_gaussian_instance, RobustL1Instance};
use cyclic_fp::schedule::linear_rate;
use cyclic_fp::selection::stream_rng;
use cyclic_fp::{
    epoch, make_order, run, BlockPartition, BlockVector, ResidualOperator, RunOptions, SelectionRule, StepSchedule,
    StopCriteria,
};
use rand::Rng;

use crate::Result;

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}: {} ({:.1} s)", self.name, self.detail, self.seconds)
    }
}

fn outcome(name: &'static str, start: Instant, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail, seconds: start.elapsed().as_secs_f64() }
}

fn gaussian_point(op: &AffineTestOperator<f64>, rng: &mut impl Rng) -> Result<BlockVector<f64>> {
    Ok(op.block_vector(random_normal_vec(rng, op.partition().dim()))?)
}

/// Random block count in `1..=max_blocks` and dimension in
/// `blocks.max(min_dim)..=max_dim`.
fn random_shape(rng: &mut impl Rng, max_blocks: usize, min_dim: usize, max_dim: usize) -> Result<BlockPartition> {
    let m = rng.random_range(1..=max_blocks);
    let n = rng.random_range(m.max(min_dim)..=max_dim);
    Ok(BlockPartition::uniform(n, m)?)
}

fn random_spectrum_instance(rng: &mut impl Rng, max_blocks: usize, max_dim: usize) -> Result<AffineTestOperator<f64>> {
    let part = random_shape(rng, max_blocks, 1, max_dim)?;
    let lam: Vec<f64> = (0..part.dim()).map(|_| 2.0 * rng.random::<f64>()).collect();
    Ok(AffineTestOperator::random_with_spectrum(rng, part, &lam)?)
}

/// Squared distance to `x*` contracts by `1 - alpha mu^2 / 2` per epoch under
/// the theoretical fixed step, for cyclic and reshuffled orders.
pub fn rate_certificate(instances: usize, epochs: usize, seed: u64) -> Result<CheckOutcome> {
    let start = Instant::now();
    let mut failures = 0;
    let mut worst_ratio = 0.0f64;
    for t in 0..instances {
        let mut rng = stream_rng(seed, t as u64);
        let part = random_shape(&mut rng, 5, 1, 20)?;
        let mu = rng.random_range(0.2..=1.0);
        let op = AffineTestOperator::random_strongly_monotone(&mut rng, part, mu, 1.9)?;
        let m = op.partition().num_blocks();
        let alpha = StepSchedule::theoretical_fixed(m, op.max_lipschitz(), op.mu())?.step_size(1)?;
        let rho = linear_rate(alpha, op.mu());
        let x0 = gaussian_point(&op, &mut rng)?;
        for rule in [SelectionRule::Cyclic, SelectionRule::Shuffled] {
            let mut x = x0.clone();
            let mut errors = vec![dist(x.as_slice(), op.x_star()).powi(2)];
            for k in 1..=epochs {
                x = epoch(&op, &x, alpha, &make_order(&rule, m, k, seed ^ t as u64)?)?;
                errors.push(dist(x.as_slice(), op.x_star()).powi(2));
            }
            for w in errors.windows(2).filter(|w| w[0] > 0.0) {
                worst_ratio = worst_ratio.max(w[1] / w[0] / rho);
            }
            if !check_linear_rate(&errors, rho)? {
                failures += 1;
            }
        }
    }
    Ok(outcome(
        "linear rate certificate",
        start,
        failures == 0,
        format!("{instances} instances x 2 orders x {epochs} epochs, {failures} violations, max ratio/rho {worst_ratio:.6}"),
    ))
}

/// `||R x|| <= (alpha L m / sqrt 2)(1 + alpha L)^m ||S x||` with additive
/// slack 1e-10, and `R = 0` exactly for a single block.
pub fn r_bound(draws: usize, seed: u64) -> Result<CheckOutcome> {
    let start = Instant::now();
    let mut violations = 0;
    let mut nonzero_single = 0;
    let mut worst = 0.0f64;
    for t in 0..draws {
        let mut rng = stream_rng(seed, t as u64);
        let op = random_spectrum_instance(&mut rng, 5, 12)?;
        let x = gaussian_point(&op, &mut rng)?;
        let alpha = 1.0 - rng.random::<f64>();
        let m = op.partition().num_blocks();
        let l = op.max_lipschitz();
        let r = r_operator(&op, &x, alpha, &(0..m).collect::<Vec<_>>())?;
        let mut s = vec![0.0; x.dim()];
        op.eval_full(x.as_slice(), &mut s);
        let bound = alpha * l * m as f64 / std::f64::consts::SQRT_2 * (1.0 + alpha * l).powi(m as i32) * norm2(&s);
        if r.norm() > bound + 1e-10 {
            violations += 1;
        }
        if bound > 0.0 {
            worst = worst.max(r.norm() / bound);
        }
        if m == 1 && r.as_slice().iter().any(|&v| v != 0.0) {
            nonzero_single += 1;
        }
    }
    Ok(outcome(
        "epoch deviation bound",
        start,
        violations == 0 && nonzero_single == 0,
        format!("{draws} draws, {violations} violations, max ||Rx||/bound {worst:.4}, {nonzero_single} nonzero single-block R"),
    ))
}

/// Sampled Lipschitz ratio of one epoch against `(1 + alpha L)^m`, and the
/// quasi-contraction slack of the averaged map.
pub fn epoch_lipschitz_and_quasi_contraction(trials: usize, seed: u64) -> Result<CheckOutcome> {
    let start = Instant::now();
    let mut lip_violations = 0;
    let mut worst_lip = 0.0f64;
    let mut worst_slack = f64::INFINITY;
    for t in 0..trials {
        let mut rng = stream_rng(seed, t as u64);
        let op = random_spectrum_instance(&mut rng, 5, 12)?;
        let alpha = 1.0 - rng.random::<f64>();
        let m = op.partition().num_blocks();
        let bound = (1.0 + alpha * op.max_lipschitz()).powi(m as i32);
        let ratio = check_epoch_lipschitz(&op, alpha, 1, seed.wrapping_add(t as u64))?;
        if ratio > bound * (1.0 + 1e-12) {
            lip_violations += 1;
        }
        worst_lip = worst_lip.max(ratio / bound);
        let x = gaussian_point(&op, &mut rng)?;
        let a2 = rng.random::<f64>();
        worst_slack = worst_slack.min(check_quasi_contraction(&op, &x, op.x_star(), a2)?);
    }
    Ok(outcome(
        "epoch Lipschitz and quasi-contraction",
        start,
        lip_violations == 0 && worst_slack >= -1e-10,
        format!(
            "{trials} trials each, {lip_violations} Lipschitz violations, max ratio/bound {worst_lip:.4}, min slack {worst_slack:.3e}"
        ),
    ))
}

/// Merely nonexpansive instances with `alpha_k = 1/sqrt(k)`: the running
/// minimum of `||S x^j||^2` is nonincreasing and reaches `tol_sq`.
pub fn sublinear_regime(instances: usize, max_epochs: usize, tol_sq: f64, seed: u64) -> Result<CheckOutcome> {
    let start = Instant::now();
    let mut failures = 0;
    let mut slowest = 0;
    for t in 0..instances {
        let mut rng = stream_rng(seed, t as u64);
        let part = random_shape(&mut rng, 5, 8, 20)?;
        let zeros = rng.random_range(1..=3);
        let op = AffineTestOperator::random_nonexpansive(&mut rng, part, zeros, 1.9)?;
        let x0 = gaussian_point(&op, &mut rng)?;
        let opts = RunOptions::new(StopCriteria::residual(max_epochs, tol_sq.sqrt()), seed);
        let out = run(&op, &x0, &StepSchedule::InverseSqrt, &SelectionRule::Cyclic, &opts)?;
        let trend = residual_trend(&out.records);
        let reached = trend.rows.last().is_some_and(|r| r.running_min_sq <= tol_sq);
        if !(reached && trend.monotone) {
            failures += 1;
        }
        slowest = slowest.max(out.records.len());
    }
    Ok(outcome(
        "diminishing-step regime",
        start,
        failures == 0,
        format!("{instances} instances, {failures} failures, slowest {slowest} epochs (budget {max_epochs})"),
    ))
}

fn max_rel_diff_after<O: ResidualOperator<f64>>(op: &O, plain: &O, epochs: usize, seed: u64) -> Result<f64> {
    let mut worst = 0.0f64;
    for rule in [SelectionRule::Cyclic, SelectionRule::Random] {
        let x0 = BlockVector::zeros(Arc::new(op.partition().clone()));
        let opts = RunOptions::new(StopCriteria::epochs(epochs), seed);
        let sched = StepSchedule::Constant(1.0);
        let a = run(op, &x0, &sched, &rule, &opts)?;
        let b = run(&Uncached(plain), &x0, &sched, &rule, &opts)?;
        worst = worst.max(rel_dist(a.x.as_slice(), b.x.as_slice()));
    }
    Ok(worst)
}

/// Cached coordinate trajectories of the robust-l1 and CT operators against
/// the uncached evaluation, with and without periodic refresh.
pub fn caching_equivalence(l1_shape: (usize, usize), ct_size: usize, epochs: usize, seed: u64) -> Result<CheckOutcome> {
    let start = Instant::now();
    let (a, b) = gen_gaussian_instance::<f64>(l1_shape.0, l1_shape.1, seed)?;
    let inst = RobustL1Instance::new(a, b, 12.0)?;
    let l1_default = build_robust_l1(&inst)?;
    let l1_never = build_robust_l1(&inst)?.with_refresh(CacheRefresh::NEVER);
    let l1_d = max_rel_diff_after(&l1_default, &l1_default, epochs, seed)?;
    let l1_n = max_rel_diff_after(&l1_never, &l1_default, epochs, seed)?;

    let grid = ImageGrid::new(ct_size, ct_size)?;
    let (ct, _) = gen_ct_instance::<f64>(grid, 30, 48, 0.01, 0.1, 0.006, 0.6, seed)?;
    let ct_default = build_ct_operator(&ct)?;
    let ct_never = build_ct_operator(&ct)?.with_refresh(CacheRefresh::NEVER);
    let ct_d = max_rel_diff_after(&ct_default, &ct_default, epochs, seed)?;
    let ct_n = max_rel_diff_after(&ct_never, &ct_default, epochs, seed)?;

    let passed = l1_d <= 1e-10 && ct_d <= 1e-10 && l1_n <= 1e-8 && ct_n <= 1e-8;
    Ok(outcome(
        "cached vs uncached trajectories",
        start,
        passed,
        format!(
            "{epochs} epochs: robust-l1 {l1_d:.1e} (default refresh) / {l1_n:.1e} (never); CT {ct_d:.1e} / {ct_n:.1e}"
        ),
    ))
}

fn condat_vu_gap_l1(seed: u64) -> Result<f64> {
    let (a, b) = gen_gaussian_instance::<f64>(40, 9, seed)?;
    let inst = RobustL1Instance::new(a.clone(), b.clone(), 12.0)?;
    let simple = build_robust_l1(&inst)?;
    let eta: Vec<f64> = inst.h.iter().map(|h| inst.nu * h).collect();
    let gamma: Vec<f64> = inst.gamma.iter().map(|g| inst.nu * g).collect();
    let shift = gamma.iter().zip(&b).map(|(g, b)| g * b).collect();
    let cv = build_condat_vu(PdProblem {
        a,
        grad_g: None,
        prox_h: None,
        prox_fstar: Some(Box::new(ShiftedLinfProx::new(shift))),
        eta: Steps::Diagonal(eta),
        gamma: Steps::Diagonal(gamma),
        layout: Some(simple.layout().clone()),
    })?;
    compare_full(&simple, &cv, seed)
}

fn condat_vu_gap_ct(seed: u64) -> Result<f64> {
    let grid = ImageGrid::new(8, 6)?;
    let (ct, _): (CtInstance<f64>, _) = gen_ct_instance(grid, 5, 9, 0.01, 0.2, 0.01, 0.5, seed)?;
    let simple = build_ct_operator(&ct)?;
    let prox = StackedProx::new(
        ct.grad.nrows(),
        Box::new(LinfBallProx::new(ct.lambda)?),
        Box::new(QuadraticConjugateProx::new(ct.gamma, ct.b.clone())?),
    );
    let cv = build_condat_vu(PdProblem {
        a: ct.stacked_matrix(),
        grad_g: None,
        prox_h: None,
        prox_fstar: Some(Box::new(prox)),
        eta: Steps::Uniform(ct.eta),
        gamma: Steps::Uniform(ct.gamma),
        layout: Some(bundle_blocks(&ct.grid, ct.radon.nrows())?),
    })?;
    compare_full(&simple, &cv, seed)
}

fn compare_full(a: &impl ResidualOperator<f64>, b: &impl ResidualOperator<f64>, seed: u64) -> Result<f64> {
    let mut rng = stream_rng(seed, 7);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let z: Vec<f64> = random_normal_vec(&mut rng, a.dim());
        let mut sa = vec![0.0; z.len()];
        let mut sb = vec![0.0; z.len()];
        a.eval_full(&z, &mut sa);
        b.eval_full(&z, &mut sb);
        worst = worst.max(rel_dist(&sa, &sb));
    }
    Ok(worst)
}

/// Single-block cyclic runs equal the full iteration bit for bit; the
/// general primal-dual operator with no smooth or primal prox terms equals
/// the simplified one; the block-norm equivalence holds for random metrics.
pub fn structural_identities(metrics: usize, seed: u64) -> Result<CheckOutcome> {
    let start = Instant::now();
    let mut km_mismatch = 0;
    for t in 0..20u64 {
        let mut rng = stream_rng(seed, t);
        let n = rng.random_range(1..=15);
        let lam: Vec<f64> = (0..n).map(|_| 2.0 * rng.random::<f64>()).collect();
        let op = AffineTestOperator::random_with_spectrum(&mut rng, BlockPartition::uniform(n, 1)?, &lam)?;
        let x0 = gaussian_point(&op, &mut rng)?;
        let alpha = 1.0 - rng.random::<f64>();
        let opts = RunOptions::new(StopCriteria::epochs(50), seed);
        let cyc = run(&op, &x0, &StepSchedule::Constant(alpha), &SelectionRule::Cyclic, &opts)?;
        let km = run(&op, &x0, &StepSchedule::Constant(alpha), &SelectionRule::Full, &opts)?;
        let same_logs = cyc.records.iter().zip(&km.records).all(|(a, b)| a.residual_norm == b.residual_norm);
        if cyc.x.as_slice() != km.x.as_slice() || !same_logs {
            km_mismatch += 1;
        }
    }
    let cv_gap = condat_vu_gap_l1(seed)?.max(condat_vu_gap_ct(seed)?);
    let mut kappa_failures = 0;
    for t in 0..metrics {
        let mut rng = stream_rng(seed ^ 0x5eed, t as u64);
        let n = rng.random_range(2..=12);
        let cond = 1.0 + 99.0 * rng.random::<f64>();
        let metric = MetricMatrix::random(&mut rng, n, cond)?;
        let m = rng.random_range(1..=n);
        let z = BlockVector::new(random_normal_vec(&mut rng, n), Arc::new(BlockPartition::uniform(n, m)?))?;
        if !check_block_norm_kappa(&metric, &z)? {
            kappa_failures += 1;
        }
    }
    Ok(outcome(
        "structural identities",
        start,
        km_mismatch == 0 && cv_gap <= 1e-12 && kappa_failures == 0,
        format!(
            "single-block vs full mismatches {km_mismatch}/20, primal-dual reduction gap {cv_gap:.1e}, block-norm failures {kappa_failures}/{metrics}"
        ),
    ))
}

/// Sizes of the diagnostic suite.
#[derive(Debug, Clone, Copy)]
pub struct SuiteScale {
    pub rate_instances: usize,
    pub rate_epochs: usize,
    pub r_draws: usize,
    pub lipschitz_trials: usize,
    pub sublinear_instances: usize,
    pub sublinear_epochs: usize,
    pub cache_l1: (usize, usize),
    pub cache_ct: usize,
    pub cache_epochs: usize,
    pub metrics: usize,
}

impl SuiteScale {
    pub const FULL: Self = Self {
        rate_instances: 100,
        rate_epochs: 200,
        r_draws: 1000,
        lipschitz_trials: 500,
        sublinear_instances: 10,
        sublinear_epochs: 100_000,
        cache_l1: (500, 100),
        cache_ct: 32,
        cache_epochs: 100,
        metrics: 200,
    };

    pub const QUICK: Self = Self {
        rate_instances: 10,
        rate_epochs: 50,
        r_draws: 100,
        lipschitz_trials: 50,
        sublinear_instances: 2,
        sublinear_epochs: 100_000,
        cache_l1: (500, 100),
        cache_ct: 16,
        cache_epochs: 10,
        metrics: 20,
    };
}

pub fn run_suite(scale: SuiteScale, seed: u64) -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        rate_certificate(scale.rate_instances, scale.rate_epochs, seed)?,
        r_bound(scale.r_draws, seed)?,
        epoch_lipschitz_and_quasi_contraction(scale.lipschitz_trials, seed)?,
        sublinear_regime(scale.sublinear_instances, scale.sublinear_epochs, 1e-6, seed)?,
        caching_equivalence(scale.cache_l1, scale.cache_ct, scale.cache_epochs, seed)?,
        structural_identities(scale.metrics, seed)?,
    ])
}
