use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use cyclic_fp::SelectionRule;
use cyclic_fp_harness::experiment::standard_rules;
use cyclic_fp_harness::verify::{run_suite, SuiteScale};
use cyclic_fp_harness::{parse_config, reference_objective, run_experiment, run_study, StudyOptions};

#[derive(Parser)]
#[command(name = "cyclic-fp", version, about = "Block-coordinate fixed-point solvers and experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one rule and write its per-epoch CSV.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        rule: Option<SelectionRule>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Skip the reference solve; the rel_gap column stays empty.
        #[arg(long)]
        no_reference: bool,
    },
    /// Run full, cyclic, shuffled and random on one instance.
    Study {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute (or read from the cache) the reference objective.
    Reference {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the diagnostic suite and exit nonzero on any failure.
    Verify {
        /// Smaller trial counts.
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load(config: &Path, seed: Option<u64>, epochs: Option<usize>, out: Option<PathBuf>) -> anyhow::Result<cyclic_fp_harness::RunConfig> {
    let mut c = parse_config(config).with_context(|| format!("loading {}", config.display()))?;
    if let Some(s) = seed {
        c.seed = s;
    }
    if let Some(e) = epochs {
        c.epochs = e;
    }
    if let Some(o) = out {
        c.output = o;
    }
    Ok(c)
}

fn main() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Solve { config, rule, seed, epochs, out, no_reference } => {
            let mut c = load(&config, seed, epochs, out)?;
            if let Some(r) = rule {
                c.rule = r;
            }
            let reference = if no_reference { None } else { Some(reference_objective(&c)?.value) };
            let res = run_experiment(&c, reference)?;
            println!("{} epochs of {} written to {}", res.run.records.len(), c.rule, res.csv.display());
        }
        Command::Study { config, seed, epochs, out } => {
            let c = load(&config, seed, epochs, out)?;
            let study = run_study(&c, &standard_rules(), &StudyOptions { write: true, ..Default::default() })?;
            println!("reference {:.12e} ({})", study.reference, study.oracle.method);
            for run in &study.runs {
                let last = run.records.last();
                println!(
                    "{:>9}: {} epochs, final objective {:?}, residual {:?}{}",
                    run.rule.name(),
                    run.records.len(),
                    last.and_then(|r| r.objective),
                    last.map(|r| r.residual_norm),
                    run.diverged_at.map_or(String::new(), |k| format!(", diverged at epoch {k}")),
                );
            }
            if study.runs.iter().any(|r| r.diverged_at.is_some()) {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Reference { config } => {
            let c = load(&config, None, None, None)?;
            let r = reference_objective(&c)?;
            println!("{:.15e}\t{}\tconverged={}\tepochs={}", r.value, r.method, r.converged, r.epochs);
        }
        Command::Verify { quick, seed } => {
            let scale = if quick { SuiteScale::QUICK } else { SuiteScale::FULL };
            let outcomes = run_suite(scale, seed)?;
            for o in &outcomes {
                println!("{o}");
            }
            if outcomes.iter().any(|o| !o.passed) {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
