//! Reference objective values for `rel_gap`.
//!
//! * robust_l1: long cyclic solve, periodically rounded to a vertex of the
//!   underlying linear program; the rounded value is exact once the active
//!   rows are identified.
//! * ct: long cyclic solve with the coordinate step sizes.
//! * nmf: best objective of all four rules after the reference budget.
//! * affine_diag: closed form `x* = A^{-1} b`.
//!
//! Values are cached as JSON files named by a SHA-256 of the instance
//! description and the reference settings.

use std::path::Path;
use std::sync::Arc;

use cyclic_fp::linalg::{dot, lu_solve};
use cyclic_fp::robust_l1::{build_robust_l1, polish_vertex, RobustL1Instance};
use cyclic_fp::{run_observed, BlockVector, Error as CoreError, ResidualOperator, RunOptions, StepSchedule, StopCriteria};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Problem, RunConfig};
use crate::experiment::{build_instance, run_rule, standard_rules, Instance, RunSettings};
use crate::{HarnessError, Result};

/// Epochs between vertex roundings of the robust-l1 reference solve.
const POLISH_EVERY: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceValue {
    pub value: f64,
    pub method: String,
    /// Whether the stopping test of the method was met within its budget.
    pub converged: bool,
    pub epochs: usize,
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    problem: String,
    reference: ReferenceValue,
}

fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// SHA-256 over the problem description, seed and reference settings, plus
/// the contents of any input files.
pub fn instance_key(config: &RunConfig) -> Result<String> {
    let mut files = Vec::new();
    match &config.problem {
        Problem::RobustL1(p) => {
            for path in [&p.matrix, &p.rhs].into_iter().flatten() {
                files.push(file_digest(path)?);
            }
        }
        Problem::Ct(p) => {
            if let Some(path) = &p.image {
                files.push(file_digest(path)?);
            }
        }
        _ => {}
    }
    let description = serde_json::json!({
        "schema": crate::experiment::SCHEMA_VERSION,
        "problem": config.problem,
        "seed": config.seed,
        "reference_epochs": config.reference.epochs_for(&config.problem),
        "reference_tol": config.reference.tol,
        "files": files,
    });
    Ok(hex::encode(Sha256::digest(description.to_string().as_bytes())))
}

fn long_run_config(config: &RunConfig) -> RunConfig {
    let mut c = config.clone();
    c.epochs = config.reference.epochs_for(&config.problem);
    c.residual_tol = config.reference.tol;
    c.schedule = Default::default();
    c
}

fn robust_l1_reference(config: &RunConfig, instance: &Instance) -> Result<ReferenceValue> {
    let (Problem::RobustL1(p), Instance::RobustL1 { a, b }) = (&config.problem, instance) else {
        unreachable!("checked by the caller")
    };
    let budget = config.reference.epochs_for(&config.problem);
    let inst = RobustL1Instance::new(a.clone(), b.clone(), p.nu.unwrap_or(12.0))?;
    let op = build_robust_l1(&inst)?;
    let layout = op.layout().clone();
    let primal = |z: &[f64]| (0..inst.primal_dim()).map(|c| z[layout.position(c)]).collect::<Vec<_>>();
    let mut z = BlockVector::zeros(Arc::new(op.partition().clone()));
    let mut best = f64::INFINITY;
    let mut last_polish: Option<f64> = None;
    let mut done = 0;
    let mut converged = false;
    while done < budget && !converged {
        let chunk = POLISH_EVERY.min(budget - done);
        let opts = RunOptions::new(StopCriteria::residual(chunk, config.reference.tol), 0);
        let schedule = StepSchedule::Constant(1.0);
        let out = match run_observed(&op, &z, &schedule, &cyclic_fp::SelectionRule::Cyclic, &opts, |_, z| {
            Some(inst.objective(&primal(z)))
        }) {
            Ok(out) => out,
            Err(CoreError::Diverged { epoch, records }) => {
                best = records.iter().filter_map(|r| r.objective).fold(best, f64::min);
                done += epoch;
                break;
            }
            Err(e) => return Err(e.into()),
        };
        done += out.records.len();
        best = out.records.iter().filter_map(|r| r.objective).fold(best, f64::min);
        let residual = out.records.last().map_or(f64::INFINITY, |r| r.residual_norm);
        z = out.x;
        if let Ok((_, fv)) = polish_vertex(a, b, &primal(z.as_slice())) {
            best = best.min(fv);
            if last_polish.is_some_and(|prev| (prev - fv).abs() <= 1e-13 * fv.abs()) {
                converged = true;
            }
            last_polish = Some(fv);
        }
        converged |= residual <= config.reference.tol;
    }
    Ok(ReferenceValue {
        value: best,
        method: format!("cyclic nu={} with vertex rounding every {POLISH_EVERY} epochs", inst.nu),
        converged,
        epochs: done,
    })
}

/// Computes the reference without consulting the cache.
pub fn compute_reference(config: &RunConfig, instance: &Instance) -> Result<ReferenceValue> {
    let long = long_run_config(config);
    match (&config.problem, instance) {
        (Problem::RobustL1(_), Instance::RobustL1 { .. }) => robust_l1_reference(config, instance),
        (Problem::Ct(_), Instance::Ct { .. }) => {
            let run = run_rule(&long, instance, &cyclic_fp::SelectionRule::Cyclic, &RunSettings::default())?;
            let value = run.min_objective().ok_or_else(|| HarnessError::Config("reference run logged no objective".into()))?;
            let last = run.records.last().map_or(f64::INFINITY, |r| r.residual_norm);
            Ok(ReferenceValue {
                value,
                method: "long cyclic run".into(),
                converged: run.diverged_at.is_none() && last <= long.residual_tol,
                epochs: run.records.len(),
            })
        }
        (Problem::Nmf(_), Instance::Nmf { .. }) => {
            let mut best = f64::INFINITY;
            for rule in standard_rules() {
                let run = run_rule(&long, instance, &rule, &RunSettings::default())?;
                best = run.min_objective().map_or(best, |f| best.min(f));
            }
            Ok(ReferenceValue {
                value: best,
                method: "best of four rules".into(),
                converged: best.is_finite(),
                epochs: long.epochs,
            })
        }
        (Problem::AffineDiag(_), Instance::Affine(op)) => {
            let a = op.operator().matrix();
            let b = op.operator().shift();
            let x = lu_solve(a, b)?;
            Ok(ReferenceValue { value: -0.5 * dot(b, &x), method: "closed form".into(), converged: true, epochs: 0 })
        }
        _ => Err(HarnessError::Config("instance does not match the configured problem".into())),
    }
    .and_then(|r| {
        if r.value.is_finite() {
            Ok(r)
        } else {
            Err(HarnessError::Config(format!("reference for {} is not finite", config.problem.name())))
        }
    })
}

/// Cached reference for a prebuilt instance of `config`.
pub fn reference_for_instance(config: &RunConfig, instance: &Instance) -> Result<ReferenceValue> {
    let key = instance_key(config)?;
    let dir = config.cache_dir();
    let path = dir.join(format!("{key}.json"));
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(entry) = serde_json::from_str::<CacheEntry>(&text) {
            if entry.key == key {
                return Ok(entry.reference);
            }
        }
    }
    let reference = compute_reference(config, instance)?;
    std::fs::create_dir_all(&dir).map_err(|source| HarnessError::Io { path: dir.clone(), source })?;
    let entry = CacheEntry { key, problem: config.problem.name().into(), reference: reference.clone() };
    std::fs::write(&path, serde_json::to_string_pretty(&entry)?).map_err(|source| HarnessError::Io { path, source })?;
    Ok(reference)
}

/// Cached reference objective for `config`.
pub fn reference_objective(config: &RunConfig) -> Result<ReferenceValue> {
    let instance = build_instance(config)?;
    reference_for_instance(config, &instance)
}
