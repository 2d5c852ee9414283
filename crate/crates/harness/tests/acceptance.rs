//! End-to-end acceptance checks. Each check prints one PASS/FAIL line; the
//! test fails if any check fails.

use std::io::Write;
use std::time::Instant;

use cyclic_fp::SelectionRule;
use cyclic_fp_harness::config::{CtParams, NmfParams, Problem, RobustL1Params};
use cyclic_fp_harness::experiment::{build_instance, run_rule, run_study, standard_rules, RunSettings, StudyOptions};
use cyclic_fp_harness::verify::{
    caching_equivalence, epoch_lipschitz_and_quasi_contraction, r_bound, rate_certificate, structural_identities,
    sublinear_regime, CheckOutcome, SuiteScale,
};
use cyclic_fp_harness::RunConfig;

const SEEDS: u64 = 5;

fn fmt_epochs(e: Option<usize>) -> String {
    e.map_or("-".into(), |k| k.to_string())
}

fn with_time_limit(mut o: CheckOutcome, limit: f64) -> CheckOutcome {
    if o.seconds > limit {
        o.passed = false;
        o.detail += &format!("; exceeded {limit:.0} s");
    }
    o
}

fn study_config(problem: Problem, seed: u64, epochs: usize, reference_epochs: usize, cache: &std::path::Path) -> RunConfig {
    let mut c = RunConfig::new(problem, seed, SelectionRule::Cyclic, epochs);
    c.reference.epochs = Some(reference_epochs);
    c.reference.cache_dir = Some(cache.to_path_buf());
    c
}

/// Epochs to a 1e-6 relative gap on the 500 x 100 Gaussian problem, with the
/// step multiplier 6 for the full rule and 12 for the coordinate rules.
fn robust_l1_ordering(cache: &std::path::Path) -> CheckOutcome {
    let start = Instant::now();
    let mut good = 0;
    let mut rows = Vec::new();
    for seed in 0..SEEDS {
        let config = study_config(Problem::RobustL1(RobustL1Params::default()), seed, 60_000, 50_000, cache);
        let opts = StudyOptions { gap_target: Some(1e-6), ..Default::default() };
        let study = run_study(&config, &standard_rules(), &opts).expect("robust-l1 study");
        let hit = |rule: SelectionRule| {
            study.runs.iter().find(|r| r.rule == rule).and_then(|r| r.epochs_to_gap(study.reference, 1e-6))
        };
        let (f, c, s, r) = (
            hit(SelectionRule::Full),
            hit(SelectionRule::Cyclic),
            hit(SelectionRule::Shuffled),
            hit(SelectionRule::Random),
        );
        let ordered = match (c, s, r) {
            (Some(c), Some(s), Some(r)) => c <= s && s <= r && f.is_none_or(|f| r < f),
            _ => false,
        };
        good += ordered as usize;
        rows.push(format!(
            "seed {seed}: full {} cyclic {} shuffled {} random {}{}",
            fmt_epochs(f),
            fmt_epochs(c),
            fmt_epochs(s),
            fmt_epochs(r),
            if ordered { "" } else { " (out of order)" }
        ));
    }
    let o = CheckOutcome {
        name: "robust-l1 rule ordering",
        passed: good >= 4,
        detail: format!("{good}/{SEEDS} seeds ordered; {}", rows.join("; ")),
        seconds: start.elapsed().as_secs_f64(),
    };
    with_time_limit(o, 300.0)
}

/// Epochs to a 1e-3 relative gap for TV-regularized reconstruction of a
/// 32 x 32 phantom from 30 angles x 48 detectors.
fn ct_ordering(cache: &std::path::Path) -> CheckOutcome {
    let start = Instant::now();
    let mut good = 0;
    let mut rows = Vec::new();
    for seed in 0..SEEDS {
        let config = study_config(Problem::Ct(CtParams::default()), seed, 3000, 10_000, cache);
        let opts = StudyOptions { gap_target: Some(1e-3), ..Default::default() };
        let study = run_study(&config, &standard_rules(), &opts).expect("ct study");
        let hits: Vec<Option<usize>> =
            study.runs.iter().map(|r| r.epochs_to_gap(study.reference, 1e-3)).collect();
        let full = hits[0];
        let ok = hits[1..].iter().all(|h| match (h, full) {
            (Some(k), Some(f)) => *k < f,
            (Some(_), None) => true,
            _ => false,
        });
        good += ok as usize;
        rows.push(format!(
            "seed {seed}: full {} cyclic {} shuffled {} random {}",
            fmt_epochs(hits[0]),
            fmt_epochs(hits[1]),
            fmt_epochs(hits[2]),
            fmt_epochs(hits[3])
        ));
    }
    let o = CheckOutcome {
        name: "CT coordinate rules beat full",
        passed: good >= 4,
        detail: format!("{good}/{SEEDS} seeds; {}", rows.join("; ")),
        seconds: start.elapsed().as_secs_f64(),
    };
    with_time_limit(o, 300.0)
}

/// Epochs to relative residue 2e-3 for rank-10 factorization of a noisy
/// 100 x 100 matrix; the full update must never increase the objective.
fn nmf_ordering() -> CheckOutcome {
    let start = Instant::now();
    let mut good = 0;
    let mut apg_monotone = true;
    let mut rows = Vec::new();
    for seed in 0..SEEDS {
        let config = RunConfig::new(Problem::Nmf(NmfParams::default()), seed, SelectionRule::Cyclic, 500);
        let instance = build_instance(&config).expect("nmf instance");
        let runs: Vec<_> = standard_rules()
            .iter()
            .map(|rule| run_rule(&config, &instance, rule, &RunSettings::default()).expect("nmf run"))
            .collect();
        let objectives: Vec<f64> = runs[0].records.iter().filter_map(|r| r.objective).collect();
        apg_monotone &= objectives.windows(2).all(|w| w[1] <= w[0]);
        let hits: Vec<Option<usize>> = runs.iter().map(|r| r.epochs_to_residual(2e-3)).collect();
        let ok = hits[1..].iter().all(|h| match (h, hits[0]) {
            (Some(k), Some(f)) => *k < f,
            (Some(_), None) => true,
            _ => false,
        });
        good += ok as usize;
        rows.push(format!(
            "seed {seed}: full {} cyclic {} shuffled {} random {}",
            fmt_epochs(hits[0]),
            fmt_epochs(hits[1]),
            fmt_epochs(hits[2]),
            fmt_epochs(hits[3])
        ));
    }
    CheckOutcome {
        name: "NMF column updates beat alternating projected gradient",
        passed: good >= 4 && apg_monotone,
        detail: format!("{good}/{SEEDS} seeds, full-update objective monotone: {apg_monotone}; {}", rows.join("; ")),
        seconds: start.elapsed().as_secs_f64(),
    }
}

#[test]
fn acceptance() {
    let scale = SuiteScale::FULL;
    let cache = tempfile::tempdir().expect("temporary cache directory");
    let checks: Vec<(usize, Box<dyn Fn() -> CheckOutcome>)> = vec![
        (1, Box::new(move || with_time_limit(rate_certificate(scale.rate_instances, scale.rate_epochs, 1).unwrap(), 30.0))),
        (2, Box::new(move || with_time_limit(r_bound(scale.r_draws, 2).unwrap(), 30.0))),
        (3, Box::new(move || epoch_lipschitz_and_quasi_contraction(scale.lipschitz_trials, 3).unwrap())),
        (4, Box::new(move || sublinear_regime(scale.sublinear_instances, scale.sublinear_epochs, 1e-6, 4).unwrap())),
        (5, Box::new(move || caching_equivalence(scale.cache_l1, scale.cache_ct, scale.cache_epochs, 5).unwrap())),
        (6, Box::new(|| robust_l1_ordering(cache.path()))),
        (7, Box::new(|| ct_ordering(cache.path()))),
        (8, Box::new(nmf_ordering)),
        (9, Box::new(move || structural_identities(scale.metrics, 9).unwrap())),
    ];
    let mut failed = Vec::new();
    let _ = writeln!(std::io::stderr());
    for (k, check) in &checks {
        let o = check();
        // Straight to stderr so the lines survive libtest's output capture.
        let _ = writeln!(std::io::stderr(), "{k}. {o}");
        if !o.passed {
            failed.push(*k);
        }
    }
    assert!(failed.is_empty(), "failed checks: {failed:?}");
}
