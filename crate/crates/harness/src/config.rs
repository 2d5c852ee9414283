//! TOML run configuration.
//!
//! ```toml
//! problem = "robust_l1"
//! seed = 0
//! rule = "cyclic"
//! epochs = 20000
//!
//! [robust_l1]
//! n = 500
//! m = 100
//! nu = 12.0
//! ```
//!
//! Unknown keys are rejected everywhere. Each problem reads only its own
//! section; a section for a different problem is an error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};

use cyclic_fp::SelectionRule;
use serde::{Deserialize, Serialize};

use crate::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustL1Params {
    #[serde(default = "RobustL1Params::default_n")]
    pub n: usize,
    #[serde(default = "RobustL1Params::default_m")]
    pub m: usize,
    /// Step multiplier; defaults to 6 for the full rule and 12 otherwise.
    pub nu: Option<f64>,
    /// Matrix Market file for `A`; replaces the Gaussian instance.
    pub matrix: Option<PathBuf>,
    /// Vector file for `b`, required with `matrix`.
    pub rhs: Option<PathBuf>,
}

impl RobustL1Params {
    fn default_n() -> usize {
        500
    }
    fn default_m() -> usize {
        100
    }

    pub fn nu_for(&self, rule: &SelectionRule) -> f64 {
        self.nu.unwrap_or(if *rule == SelectionRule::Full { 6.0 } else { 12.0 })
    }
}

impl Default for RobustL1Params {
    fn default() -> Self {
        Self { n: 500, m: 100, nu: None, matrix: None, rhs: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CtParams {
    pub width: Option<usize>,
    pub height: Option<usize>,
    #[serde(default = "CtParams::default_angles")]
    pub angles: usize,
    #[serde(default = "CtParams::default_detectors")]
    pub detectors: usize,
    /// Relative Gaussian noise on the projections.
    #[serde(default = "CtParams::default_noise")]
    pub noise: f64,
    #[serde(default = "CtParams::default_lambda")]
    pub lambda: f64,
    /// Primal step; defaults to 0.003 (full) or 0.006 (coordinate rules).
    pub eta: Option<f64>,
    /// Dual step; defaults to 0.3 (full) or 0.6 (coordinate rules).
    pub gamma: Option<f64>,
    /// PGM image used as ground truth instead of the phantom.
    pub image: Option<PathBuf>,
    /// Write a PGM of the reconstruction every this many epochs.
    pub snapshot_every: Option<usize>,
}

impl CtParams {
    fn default_angles() -> usize {
        30
    }
    fn default_detectors() -> usize {
        48
    }
    fn default_noise() -> f64 {
        0.01
    }
    fn default_lambda() -> f64 {
        0.1
    }

    pub fn steps_for(&self, rule: &SelectionRule) -> (f64, f64) {
        let full = *rule == SelectionRule::Full;
        (
            self.eta.unwrap_or(if full { 0.003 } else { 0.006 }),
            self.gamma.unwrap_or(if full { 0.3 } else { 0.6 }),
        )
    }
}

impl Default for CtParams {
    fn default() -> Self {
        Self {
            width: None,
            height: None,
            angles: 30,
            detectors: 48,
            noise: 0.01,
            lambda: 0.1,
            eta: None,
            gamma: None,
            image: None,
            snapshot_every: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NmfParams {
    #[serde(default = "NmfParams::default_dim")]
    pub n: usize,
    #[serde(default = "NmfParams::default_dim")]
    pub m: usize,
    #[serde(default = "NmfParams::default_r")]
    pub r: usize,
    #[serde(default = "NmfParams::default_small")]
    pub noise: f64,
    #[serde(default = "NmfParams::default_small")]
    pub l_min: f64,
    /// Write the final factors as Matrix Market files.
    #[serde(default)]
    pub export_factors: bool,
}

impl NmfParams {
    fn default_dim() -> usize {
        100
    }
    fn default_r() -> usize {
        10
    }
    fn default_small() -> f64 {
        1e-3
    }
}

impl Default for NmfParams {
    fn default() -> Self {
        Self { n: 100, m: 100, r: 10, noise: 1e-3, l_min: 1e-3, export_factors: false }
    }
}

/// Random symmetric affine operator `S x = A x - b` with spectrum in
/// `[mu, hi]`, smallest eigenvalue exactly `mu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineParams {
    #[serde(default = "AffineParams::default_dim")]
    pub dim: usize,
    #[serde(default = "AffineParams::default_blocks")]
    pub blocks: usize,
    #[serde(default = "AffineParams::default_mu")]
    pub mu: f64,
    #[serde(default = "AffineParams::default_hi")]
    pub hi: f64,
}

impl AffineParams {
    fn default_dim() -> usize {
        20
    }
    fn default_blocks() -> usize {
        5
    }
    fn default_mu() -> f64 {
        0.5
    }
    fn default_hi() -> f64 {
        1.9
    }
}

impl Default for AffineParams {
    fn default() -> Self {
        Self { dim: 20, blocks: 5, mu: 0.5, hi: 1.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Problem {
    RobustL1(RobustL1Params),
    Ct(CtParams),
    Nmf(NmfParams),
    AffineDiag(AffineParams),
}

impl Problem {
    pub fn name(&self) -> &'static str {
        match self {
            Problem::RobustL1(_) => "robust_l1",
            Problem::Ct(_) => "ct",
            Problem::Nmf(_) => "nmf",
            Problem::AffineDiag(_) => "affine_diag",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Constant { alpha: f64 },
    InverseSqrt,
    /// The linear-rate step; `lipschitz` and `mu` default to the exact
    /// values of an `affine_diag` instance.
    Theoretical { lipschitz: Option<f64>, mu: Option<f64> },
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        ScheduleSpec::Constant { alpha: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSettings {
    /// Epoch budget of the long solve; defaults to 4000 for nmf and 50000
    /// otherwise.
    pub epochs: Option<usize>,
    #[serde(default = "ReferenceSettings::default_tol")]
    pub tol: f64,
    /// Directory of cached reference values; defaults to
    /// `<output>/reference-cache`.
    pub cache_dir: Option<PathBuf>,
}

impl ReferenceSettings {
    fn default_tol() -> f64 {
        1e-12
    }

    pub fn epochs_for(&self, problem: &Problem) -> usize {
        self.epochs.unwrap_or(match problem {
            Problem::Nmf(_) => 4000,
            _ => 50_000,
        })
    }
}

impl Default for ReferenceSettings {
    fn default() -> Self {
        Self { epochs: None, tol: 1e-12, cache_dir: None }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: String,
    seed: u64,
    #[serde(default = "default_rule")]
    rule: String,
    epochs: usize,
    output: Option<PathBuf>,
    residual_tol: Option<f64>,
    schedule: Option<ScheduleSpec>,
    #[serde(default)]
    reference: ReferenceSettings,
    robust_l1: Option<RobustL1Params>,
    ct: Option<CtParams>,
    nmf: Option<NmfParams>,
    affine_diag: Option<AffineParams>,
}

fn default_rule() -> String {
    "cyclic".into()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: Problem,
    pub seed: u64,
    pub rule: SelectionRule,
    pub epochs: usize,
    pub output: PathBuf,
    /// Stop once `||S x||` falls to this value; negative disables.
    pub residual_tol: f64,
    pub schedule: ScheduleSpec,
    pub reference: ReferenceSettings,
}

fn bad(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl RunConfig {
    pub fn new(problem: Problem, seed: u64, rule: SelectionRule, epochs: usize) -> Self {
        Self {
            problem,
            seed,
            rule,
            epochs,
            output: PathBuf::from("out"),
            residual_tol: -1.0,
            schedule: ScheduleSpec::default(),
            reference: ReferenceSettings::default(),
        }
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.reference.cache_dir.clone().unwrap_or_else(|| self.output.join("reference-cache"))
    }

    /// Checks every parameter the chosen problem reads.
    pub fn validate(&self) -> Result<()> {
        match &self.problem {
            Problem::RobustL1(p) => {
                if p.matrix.is_some() != p.rhs.is_some() {
                    return Err(bad("robust_l1: matrix and rhs must be given together"));
                }
                if p.matrix.is_none() && (p.n == 0 || p.m == 0) {
                    return Err(bad("robust_l1: n and m must be positive"));
                }
                if p.matrix.is_none() && p.n < p.m {
                    return Err(bad("robust_l1: need n >= m"));
                }
                if let Some(nu) = p.nu {
                    if !(nu > 0.0) {
                        return Err(bad(format!("robust_l1: nu must be positive, got {nu}")));
                    }
                }
            }
            Problem::Ct(p) => {
                if p.image.is_some() && (p.width.is_some() || p.height.is_some()) {
                    return Err(bad("ct: width/height come from the image when one is given"));
                }
                if p.width.unwrap_or(32) < 2 || p.height.unwrap_or(32) < 2 {
                    return Err(bad("ct: the grid must be at least 2 x 2"));
                }
                if p.angles == 0 || p.detectors == 0 {
                    return Err(bad("ct: angles and detectors must be positive"));
                }
                if !(p.noise >= 0.0) || !(p.lambda >= 0.0) {
                    return Err(bad("ct: noise and lambda must be nonnegative"));
                }
                for (name, v) in [("eta", p.eta), ("gamma", p.gamma)] {
                    if let Some(v) = v {
                        if !(v > 0.0) {
                            return Err(bad(format!("ct: {name} must be positive, got {v}")));
                        }
                    }
                }
                if p.snapshot_every == Some(0) {
                    return Err(bad("ct: snapshot_every must be positive"));
                }
            }
            Problem::Nmf(p) => {
                if p.r == 0 || p.r > p.n.min(p.m) {
                    return Err(bad(format!("nmf: r must lie in 1..={}", p.n.min(p.m))));
                }
                if !(p.noise >= 0.0) {
                    return Err(bad("nmf: noise must be nonnegative"));
                }
                if !(p.l_min > 0.0) {
                    return Err(bad("nmf: l_min must be positive"));
                }
                if self.schedule != ScheduleSpec::default() {
                    return Err(bad("nmf: step sizes are fixed by the method; remove [schedule]"));
                }
            }
            Problem::AffineDiag(p) => {
                if p.dim == 0 || p.blocks == 0 || p.blocks > p.dim {
                    return Err(bad("affine_diag: need 1 <= blocks <= dim"));
                }
                if !(p.mu > 0.0 && p.mu <= p.hi && p.hi <= 2.0) {
                    return Err(bad("affine_diag: need 0 < mu <= hi <= 2"));
                }
            }
        }
        match self.schedule {
            ScheduleSpec::Constant { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                Err(bad(format!("schedule: alpha must be positive, got {alpha}")))
            }
            ScheduleSpec::Theoretical { lipschitz, mu } => {
                let affine = matches!(self.problem, Problem::AffineDiag(_));
                if !affine && (lipschitz.is_none() || mu.is_none()) {
                    return Err(bad("schedule: theoretical steps need lipschitz and mu for this problem"));
                }
                if lipschitz.is_some_and(|l| !(l > 0.0)) || mu.is_some_and(|m| !(m > 0.0)) {
                    return Err(bad("schedule: lipschitz and mu must be positive"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
    let sections = [
        ("robust_l1", raw.robust_l1.is_some()),
        ("ct", raw.ct.is_some()),
        ("nmf", raw.nmf.is_some()),
        ("affine_diag", raw.affine_diag.is_some()),
    ];
    if let Some((name, _)) = sections.iter().find(|(name, present)| *present && *name != raw.problem) {
        return Err(bad(format!("section [{name}] does not apply to problem '{}'", raw.problem)));
    }
    let problem = match raw.problem.as_str() {
        "robust_l1" => Problem::RobustL1(raw.robust_l1.unwrap_or_default()),
        "ct" => Problem::Ct(raw.ct.unwrap_or_default()),
        "nmf" => Problem::Nmf(raw.nmf.unwrap_or_default()),
        "affine_diag" => Problem::AffineDiag(raw.affine_diag.unwrap_or_default()),
        other => {
            return Err(bad(format!(
                "unknown problem '{other}' (expected robust_l1, ct, nmf or affine_diag)"
            )))
        }
    };
    let rule: SelectionRule = raw.rule.parse()?;
    let config = RunConfig {
        problem,
        seed: raw.seed,
        rule,
        epochs: raw.epochs,
        output: raw.output.unwrap_or_else(|| PathBuf::from("out")),
        residual_tol: raw.residual_tol.unwrap_or(-1.0),
        schedule: raw.schedule.unwrap_or_default(),
        reference: raw.reference,
    };
    config.validate()?;
    Ok(config)
}

/// Reads and validates a config file. Relative input paths inside the file
/// are resolved against the file's directory.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
    let mut config = parse_config_str(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    };
    match &mut config.problem {
        Problem::RobustL1(p) => {
            p.matrix.as_mut().map(resolve);
            p.rhs.as_mut().map(resolve);
        }
        Problem::Ct(p) => {
            p.image.as_mut().map(resolve);
        }
        _ => {}
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_size_robust_l1() {
        let c = parse_config_str(
            "problem = \"robust_l1\"\nseed = 3\nrule = \"cyclic\"\nepochs = 100\n[robust_l1]\nn = 500\nm = 100\nnu = 12.0\n",
        )
        .unwrap();
        assert_eq!(c.rule, SelectionRule::Cyclic);
        match c.problem {
            Problem::RobustL1(p) => assert_eq!((p.n, p.m, p.nu), (500, 100, Some(12.0))),
            _ => panic!(),
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let no_seed = "problem = \"nmf\"\nepochs = 10\n";
        assert!(parse_config_str(no_seed).unwrap_err().to_string().contains("seed"));
        let sorted = "problem = \"nmf\"\nseed = 0\nrule = \"sorted\"\nepochs = 10\n";
        assert!(parse_config_str(sorted).unwrap_err().to_string().contains("sorted"));
        let unknown_key = "problem = \"nmf\"\nseed = 0\nepochs = 10\n[nmf]\nrank = 3\n";
        assert!(parse_config_str(unknown_key).is_err());
        let wrong_section = "problem = \"nmf\"\nseed = 0\nepochs = 10\n[ct]\nlambda = 1.0\n";
        assert!(parse_config_str(wrong_section).is_err());
        let bad_type = "problem = \"nmf\"\nseed = \"zero\"\nepochs = 10\n";
        assert!(parse_config_str(bad_type).is_err());
        let bad_problem = "problem = \"lasso\"\nseed = 0\nepochs = 10\n";
        assert!(parse_config_str(bad_problem).unwrap_err().to_string().contains("lasso"));
        let big_rank = "problem = \"nmf\"\nseed = 0\nepochs = 10\n[nmf]\nn = 5\nm = 5\nr = 6\n";
        assert!(parse_config_str(big_rank).is_err());
    }

    #[test]
    fn schedules_parse() {
        let c = parse_config_str(
            "problem = \"affine_diag\"\nseed = 0\nepochs = 5\n[schedule]\nkind = \"theoretical\"\n",
        )
        .unwrap();
        assert_eq!(c.schedule, ScheduleSpec::Theoretical { lipschitz: None, mu: None });
        let c = parse_config_str("problem = \"ct\"\nseed = 0\nepochs = 5\n[schedule]\nkind = \"inverse_sqrt\"\n").unwrap();
        assert_eq!(c.schedule, ScheduleSpec::InverseSqrt);
        assert!(parse_config_str("problem = \"ct\"\nseed = 0\nepochs = 5\n[schedule]\nkind = \"theoretical\"\n").is_err());
        assert!(parse_config_str("problem = \"ct\"\nseed = 0\nepochs = 5\n[schedule]\nkind = \"constant\"\nalpha = -1.0\n").is_err());
    }

    #[test]
    fn rule_dependent_defaults() {
        let p = RobustL1Params::default();
        assert_eq!(p.nu_for(&SelectionRule::Full), 6.0);
        assert_eq!(p.nu_for(&SelectionRule::Random), 12.0);
        let c = CtParams::default();
        assert_eq!(c.steps_for(&SelectionRule::Full), (0.003, 0.3));
        assert_eq!(c.steps_for(&SelectionRule::Shuffled), (0.006, 0.6));
    }
}
