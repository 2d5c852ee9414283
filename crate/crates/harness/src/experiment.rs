//! Instance construction, single-rule runs, multi-rule studies and CSV logs.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use cyclic_fp::ct::{build_ct_operator, noisy_projections, phantom, siddon_matrix, CtInstance, ImageGrid};
use cyclic_fp::diagnostics::AffineTestOperator;
use cyclic_fp::io::{read_matrix_market, read_pgm, read_vector, write_dense_matrix_market, write_pgm};
use cyclic_fp::linalg::dot;
use cyclic_fp::nmf::{gen_nmf_instance, init_state, run_nmf, NmfState};
use cyclic_fp::robust_l1::{build_robust_l1, gen_gaussian_instance, RobustL1Instance};
use cyclic_fp::selection::{stream_rng, sub_seed};
use cyclic_fp::{
    run_observed, BlockPartition, BlockVector, DenseMatrixF64, Error as CoreError, ResidualOperator, RunOptions,
    RunRecord, SelectionRule, SparseMatrixF64, StepSchedule, StopCriteria,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{AffineParams, CtParams, Problem, RunConfig, ScheduleSpec};
use crate::reference::{reference_for_instance, ReferenceValue};
use crate::{HarnessError, Result};

/// Version of the CSV column set and of the study manifest.
pub const SCHEMA_VERSION: u32 = 1;
pub const CSV_COLUMNS: [&str; 8] = ["epoch", "rule", "seed", "alpha", "objective", "residual", "rel_gap", "seconds"];

/// Environment variable bounding the number of concurrent runs.
pub const WORKERS_ENV: &str = "CYCLICFP_WORKERS";

/// Problem data shared by every rule of a study.
#[allow(clippy::large_enum_variant)]
pub enum Instance {
    RobustL1 { a: SparseMatrixF64, b: Vec<f64> },
    Ct { inst: CtInstance<f64>, truth: Vec<f64> },
    Nmf { m: DenseMatrixF64, init: NmfState<f64> },
    Affine(AffineTestOperator<f64>),
}

pub fn build_instance(config: &RunConfig) -> Result<Instance> {
    let seed = config.seed;
    Ok(match &config.problem {
        Problem::RobustL1(p) => match (&p.matrix, &p.rhs) {
            (Some(mp), Some(bp)) => {
                let a = read_matrix_market(mp)?;
                let b = read_vector(bp)?;
                if a.nrows() != b.len() {
                    return Err(HarnessError::Config(format!(
                        "rhs has {} entries but the matrix has {} rows",
                        b.len(),
                        a.nrows()
                    )));
                }
                Instance::RobustL1 { a, b }
            }
            _ => {
                let (a, b) = gen_gaussian_instance(p.n, p.m, seed)?;
                Instance::RobustL1 { a, b }
            }
        },
        Problem::Ct(p) => {
            let (grid, truth) = match &p.image {
                Some(path) => ImageGrid::from_gray(&read_pgm(path)?)?,
                None => {
                    let grid = ImageGrid::new(p.width.unwrap_or(32), p.height.unwrap_or(32))?;
                    (grid, phantom(&grid))
                }
            };
            let radon = siddon_matrix(&grid, p.angles, p.detectors)?;
            let b = noisy_projections(&radon, &truth, p.noise, seed)?;
            let (eta, gamma) = p.steps_for(&SelectionRule::Cyclic);
            let inst = CtInstance::new(grid, radon, b, p.lambda, eta, gamma)?;
            Instance::Ct { inst, truth }
        }
        Problem::Nmf(p) => {
            let m = gen_nmf_instance(p.n, p.m, p.r, p.noise, seed)?;
            let init = init_state(p.n, p.m, p.r, p.l_min, seed)?;
            Instance::Nmf { m, init }
        }
        Problem::AffineDiag(p) => Instance::Affine(affine_instance(p, seed)?),
    })
}

pub fn affine_instance(p: &AffineParams, seed: u64) -> Result<AffineTestOperator<f64>> {
    let mut rng = stream_rng(seed, 0);
    let part = BlockPartition::uniform(p.dim, p.blocks)?;
    Ok(AffineTestOperator::random_strongly_monotone(&mut rng, part, p.mu, p.hi)?)
}

/// `1/2 x^T A x - b^T x`, whose gradient is `S x`.
pub fn affine_objective(op: &AffineTestOperator<f64>, x: &[f64]) -> f64 {
    let inner = op.operator();
    0.5 * inner.matrix().quad_form(x) - dot(inner.shift(), x)
}

/// `(f - reference) / |reference|`, or the plain difference when the
/// reference is zero.
pub fn rel_gap(objective: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        objective - reference
    } else {
        (objective - reference) / reference.abs()
    }
}

/// Log of one rule on one instance.
#[derive(Debug, Clone)]
pub struct RuleRun {
    pub rule: SelectionRule,
    pub records: Vec<RunRecord>,
    /// Epoch at which the iterate stopped being finite.
    pub diverged_at: Option<usize>,
}

impl RuleRun {
    pub fn min_objective(&self) -> Option<f64> {
        self.records.iter().filter_map(|r| r.objective).reduce(f64::min)
    }

    /// First epoch whose relative gap to `reference` is at most `tol`.
    pub fn epochs_to_gap(&self, reference: f64, tol: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.objective.is_some_and(|f| rel_gap(f, reference) <= tol))
            .map(|r| r.epoch)
    }

    /// First epoch whose `residual` column is at most `tol`.
    pub fn epochs_to_residual(&self, tol: f64) -> Option<usize> {
        self.records.iter().find(|r| r.residual_norm <= tol).map(|r| r.epoch)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunSettings {
    /// Stop once the objective reaches this value (ignored for nmf).
    pub target_objective: Option<f64>,
    /// Directory for snapshots and exported factors; nothing is written
    /// when `None`.
    pub artifacts: Option<PathBuf>,
}

fn step_schedule(config: &RunConfig, instance: &Instance, blocks: usize) -> Result<StepSchedule<f64>> {
    Ok(match config.schedule {
        ScheduleSpec::Constant { alpha } => StepSchedule::constant(alpha)?,
        ScheduleSpec::InverseSqrt => StepSchedule::InverseSqrt,
        ScheduleSpec::Theoretical { lipschitz, mu } => {
            let (l0, mu0) = match instance {
                Instance::Affine(op) => (Some(op.max_lipschitz()), Some(op.mu())),
                _ => (None, None),
            };
            let l = lipschitz.or(l0).ok_or_else(|| HarnessError::Config("theoretical step needs lipschitz".into()))?;
            let mu = mu.or(mu0).ok_or_else(|| HarnessError::Config("theoretical step needs mu".into()))?;
            StepSchedule::theoretical_fixed(blocks, l, mu)?
        }
    })
}

/// Seed of the block-order generator, distinct from the data seed.
pub fn order_seed(seed: u64) -> u64 {
    sub_seed(seed, 1)
}

fn drive<O: ResidualOperator<f64> + ?Sized>(
    op: &O,
    config: &RunConfig,
    instance: &Instance,
    rule: &SelectionRule,
    target: Option<f64>,
    observe: impl FnMut(usize, &[f64]) -> Option<f64>,
) -> Result<RuleRun> {
    let schedule = step_schedule(config, instance, op.partition().num_blocks())?;
    let x0 = BlockVector::zeros(Arc::new(op.partition().clone()));
    let mut options = RunOptions::new(StopCriteria::residual(config.epochs, config.residual_tol), order_seed(config.seed));
    options.stop.objective_target = target;
    match run_observed(op, &x0, &schedule, rule, &options, observe) {
        Ok(out) => Ok(RuleRun { rule: rule.clone(), records: out.records, diverged_at: None }),
        Err(CoreError::Diverged { epoch, records }) => Ok(RuleRun { rule: rule.clone(), records, diverged_at: Some(epoch) }),
        Err(e) => Err(e.into()),
    }
}

fn artifact_name(config: &RunConfig, rule: &SelectionRule, suffix: &str) -> String {
    format!("{}_{}_seed{}{suffix}", config.problem.name(), rule.name(), config.seed)
}

/// Runs `rule` on a prebuilt instance of `config`.
pub fn run_rule(config: &RunConfig, instance: &Instance, rule: &SelectionRule, settings: &RunSettings) -> Result<RuleRun> {
    let target = settings.target_objective;
    match (&config.problem, instance) {
        (Problem::RobustL1(p), Instance::RobustL1 { a, b }) => {
            let inst = RobustL1Instance::new(a.clone(), b.clone(), p.nu_for(rule))?;
            let op = build_robust_l1(&inst)?;
            let layout = op.layout().clone();
            let mut x = vec![0.0; inst.primal_dim()];
            drive(&op, config, instance, rule, target, |_, z| {
                for (c, xc) in x.iter_mut().enumerate() {
                    *xc = z[layout.position(c)];
                }
                Some(inst.objective(&x))
            })
        }
        (Problem::Ct(p), Instance::Ct { inst, .. }) => run_ct(config, p, inst, instance, rule, settings),
        (Problem::Nmf(p), Instance::Nmf { m, init }) => {
            let (state, records) = match run_nmf(m, init.clone(), rule, config.epochs, order_seed(config.seed)) {
                Ok(out) => out,
                Err(CoreError::Diverged { epoch, records }) => {
                    return Ok(RuleRun { rule: rule.clone(), records, diverged_at: Some(epoch) })
                }
                Err(e) => return Err(e.into()),
            };
            if let (true, Some(dir)) = (p.export_factors, &settings.artifacts) {
                create_dir(dir)?;
                write_dense_matrix_market(dir.join(artifact_name(config, rule, "_X.mtx")), &state.x)?;
                write_dense_matrix_market(dir.join(artifact_name(config, rule, "_Y.mtx")), &state.y)?;
            }
            Ok(RuleRun { rule: rule.clone(), records, diverged_at: None })
        }
        (Problem::AffineDiag(_), Instance::Affine(op)) => {
            drive(op, config, instance, rule, target, |_, x| Some(affine_objective(op, x)))
        }
        _ => Err(HarnessError::Config("instance does not match the configured problem".into())),
    }
}

fn run_ct(
    config: &RunConfig,
    p: &CtParams,
    base: &CtInstance<f64>,
    instance: &Instance,
    rule: &SelectionRule,
    settings: &RunSettings,
) -> Result<RuleRun> {
    let (eta, gamma) = p.steps_for(rule);
    let inst = base.with_steps(eta, gamma)?;
    let op = build_ct_operator(&inst)?;
    let layout = op.layout().clone();
    let snapshots = match (p.snapshot_every, &settings.artifacts) {
        (Some(every), Some(dir)) => {
            create_dir(dir)?;
            Some((every, dir.clone()))
        }
        _ => None,
    };
    let mut x = vec![0.0; inst.grid.pixels()];
    let mut write_error = None;
    let run = drive(&op, config, instance, rule, settings.target_objective, |k, z| {
        for (c, xc) in x.iter_mut().enumerate() {
            *xc = z[layout.position(c)];
        }
        if let Some((every, dir)) = &snapshots {
            if k % every == 0 && write_error.is_none() {
                let name = artifact_name(config, rule, &format!("_epoch{k}.pgm"));
                let res = inst.grid.to_gray(&x).and_then(|img| write_pgm(dir.join(name), &img, true));
                write_error = res.err();
            }
        }
        Some(inst.objective(&x))
    })?;
    match write_error {
        Some(e) => Err(e.into()),
        None => Ok(run),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io { path: dir.to_path_buf(), source })
}

#[derive(Serialize)]
struct CsvRow<'a> {
    epoch: usize,
    rule: &'a str,
    seed: u64,
    alpha: f64,
    objective: Option<f64>,
    residual: f64,
    rel_gap: Option<f64>,
    seconds: f64,
}

/// One row per epoch. `rel_gap` is left empty without a reference.
pub fn write_csv(path: &Path, run: &RuleRun, seed: u64, reference: Option<f64>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(CSV_COLUMNS)?;
    for r in &run.records {
        w.serialize(CsvRow {
            epoch: r.epoch,
            rule: run.rule.name(),
            seed,
            alpha: r.alpha,
            objective: r.objective,
            residual: r.residual_norm,
            rel_gap: reference.zip(r.objective).map(|(fr, f)| rel_gap(f, fr)),
            seconds: r.elapsed_seconds,
        })?;
    }
    w.flush().map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
    Ok(())
}

pub fn csv_path(config: &RunConfig, rule: &SelectionRule) -> PathBuf {
    config.output.join(artifact_name(config, rule, ".csv"))
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub csv: PathBuf,
    pub run: RuleRun,
    /// Reference used for `rel_gap`: the supplied value lowered to the
    /// best objective of this run.
    pub reference: Option<f64>,
}

/// Runs `config.rule` and writes its CSV. A diverged run still writes the
/// partial log and then reports [`HarnessError::Diverged`].
pub fn run_experiment(config: &RunConfig, reference: Option<f64>) -> Result<ExperimentOutput> {
    let instance = build_instance(config)?;
    let settings = RunSettings { target_objective: None, artifacts: Some(config.output.clone()) };
    let run = run_rule(config, &instance, &config.rule, &settings)?;
    let reference = reference.map(|r| run.min_objective().map_or(r, |f| f.min(r)));
    let csv = csv_path(config, &config.rule);
    write_csv(&csv, &run, config.seed, reference)?;
    if let Some(epoch) = run.diverged_at {
        return Err(HarnessError::Diverged { epoch, path: csv });
    }
    Ok(ExperimentOutput { csv, run, reference })
}

/// Worker count from [`WORKERS_ENV`], falling back to the number of CPUs.
pub fn workers() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(HarnessError::Config(format!("{WORKERS_ENV} must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

#[derive(Debug, Clone, Default)]
pub struct StudyOptions {
    /// Stop each run once its gap to the oracle reference is below half of
    /// this value.
    pub gap_target: Option<f64>,
    /// Skip the oracle and use this value instead.
    pub reference: Option<ReferenceValue>,
    /// Write CSVs and a manifest to `config.output`.
    pub write: bool,
}

#[derive(Debug)]
pub struct Study {
    pub oracle: ReferenceValue,
    /// The oracle value lowered to the best objective of any run.
    pub reference: f64,
    pub runs: Vec<RuleRun>,
}

#[derive(Serialize)]
struct ManifestRun {
    rule: String,
    csv: String,
    epochs: usize,
    diverged_at: Option<usize>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    problem: &'a str,
    seed: u64,
    oracle: &'a ReferenceValue,
    reference: f64,
    f_best: Option<f64>,
    runs: Vec<ManifestRun>,
}

/// Runs every rule on one instance, concurrently.
pub fn run_study(config: &RunConfig, rules: &[SelectionRule], options: &StudyOptions) -> Result<Study> {
    let instance = build_instance(config)?;
    let oracle = match &options.reference {
        Some(r) => r.clone(),
        None => reference_for_instance(config, &instance)?,
    };
    let target = options.gap_target.map(|g| oracle.value + 0.5 * g * oracle.value.abs());
    let settings = RunSettings {
        target_objective: target,
        artifacts: options.write.then(|| config.output.clone()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers()?)
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start worker pool: {e}")))?;
    let runs: Vec<RuleRun> = pool.install(|| {
        rules
            .par_iter()
            .map(|rule| run_rule(config, &instance, rule, &settings))
            .collect::<Result<_>>()
    })?;
    let f_best = runs.iter().filter_map(RuleRun::min_objective).reduce(f64::min);
    let reference = f_best.map_or(oracle.value, |f| f.min(oracle.value));
    if options.write {
        let mut entries = Vec::with_capacity(runs.len());
        for run in &runs {
            let path = csv_path(config, &run.rule);
            write_csv(&path, run, config.seed, Some(reference))?;
            entries.push(ManifestRun {
                rule: run.rule.name().to_string(),
                csv: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
                epochs: run.records.len(),
                diverged_at: run.diverged_at,
            });
        }
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            problem: config.problem.name(),
            seed: config.seed,
            oracle: &oracle,
            reference,
            f_best,
            runs: entries,
        };
        let path = config.output.join(format!("{}_seed{}_manifest.json", config.problem.name(), config.seed));
        let text = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(&path, text).map_err(|source| HarnessError::Io { path, source })?;
    }
    Ok(Study { oracle, reference, runs })
}

/// The four rules of the comparison studies.
pub fn standard_rules() -> [SelectionRule; 4] {
    [SelectionRule::Full, SelectionRule::Cyclic, SelectionRule::Shuffled, SelectionRule::Random]
}
