use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cyclic-fp"));
    cmd.args(args).env_remove("CYCLICFP_WORKERS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL_L1: &str = "problem = \"robust_l1\"\nseed = 2\nepochs = 30\n[robust_l1]\nn = 40\nm = 6\nnu = 1.0\n[reference]\nepochs = 2000\n";

#[test]
fn solve_writes_the_csv_under_out() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL_L1);
    let out = dir.path().join("logs");
    let o = cli(&["solve", "--config", &config, "--rule", "shuffled", "--out", out.to_str().unwrap()], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("robust_l1_shuffled_seed2.csv")).unwrap();
    assert_eq!(text.lines().count(), 31);
    assert!(text.lines().nth(1).unwrap().starts_with("1,shuffled,2,"));
}

#[test]
fn invalid_configs_are_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "problem = \"nmf\"\nseed = 0\nepochs = 5\nrule = \"sorted\"\n");
    let o = cli(&["solve", "--config", &config, "--out", dir.path().to_str().unwrap()], &[]);
    assert!(!o.status.success());
    assert!(std::fs::read_dir(dir.path()).unwrap().count() == 1);
}

#[test]
fn divergence_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "problem = \"affine_diag\"\nseed = 0\nepochs = 5000\n[schedule]\nkind = \"constant\"\nalpha = 1000.0\n",
    );
    let o = cli(&["solve", "--config", &config, "--no-reference", "--out", dir.path().to_str().unwrap()], &[]);
    assert!(!o.status.success());
    assert!(dir.path().join("affine_diag_cyclic_seed0.csv").exists());
}

#[test]
fn study_honours_the_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL_L1);
    let out = dir.path().to_str().unwrap();
    let o = cli(&["study", "--config", &config, "--out", out], &[("CYCLICFP_WORKERS", "2")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("robust_l1_seed2_manifest.json").exists());
    let bad = cli(&["study", "--config", &config, "--out", out], &[("CYCLICFP_WORKERS", "zero")]);
    assert!(!bad.status.success());
}

#[test]
fn quick_verify_passes() {
    let o = cli(&["verify", "--quick"], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).lines().filter(|l| l.starts_with("[PASS]")).count() >= 6);
}
