//! Config-driven experiment runner for the `cyclic-fp` solvers: instance
//! construction, per-epoch CSV logs, cached reference objectives and the
//! diagnostic suite behind `cyclic-fp verify`.

pub mod config;
pub mod experiment;
pub mod reference;
pub mod verify;

use std::path::PathBuf;

pub use config::{parse_config, parse_config_str, Problem, RunConfig};
pub use experiment::{run_experiment, run_study, RuleRun, Study, StudyOptions};
pub use reference::{reference_objective, ReferenceValue};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] cyclic_fp::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("run diverged at epoch {epoch}; partial log in {path}")]
    Diverged { epoch: usize, path: PathBuf },
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
