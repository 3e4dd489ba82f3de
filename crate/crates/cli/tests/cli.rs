use std::path::Path;

use assert_cmd::Command;
use predicates::prelude::*;

const SMALL: &str = r#"
label = "small"

[design]
arms = ["Arm A", "Arm B", "Arm C"]
highest_is_best = false
min_probs = [0.2, 0.2, 0.2]
rescale_probs = "limits"
soften_power = 0.5
data_looks = { from = 100, to = 400, by = 100 }
randomised_at_looks = { lag = 20 }
superiority = 0.99
inferiority = 0.01
equivalence_prob = { burn_in_until = 200, value = 0.9 }
equivalence_diff = 0.05
n_draws = 500

[design.outcome]
model = "binomial"
true_ys = [0.25, 0.25, 0.25]

[run]
n_rep = 30
base_seed = 7

[[scenario]]
true_ys = [0.25, 0.10, 0.25]
"#;

fn trialsim() -> Command {
    Command::cargo_bin("trialsim").unwrap()
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("design.toml");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn validate_accepts_good_and_rejects_malformed_configs() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), SMALL);
    trialsim()
        .args(["validate", "--config"])
        .arg(&good)
        .assert()
        .success()
        .stdout(predicate::str::contains("design OK"));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, SMALL.replace("n_draws = 500", "n_draws = 500\nbogus = 1")).unwrap();
    trialsim()
        .args(["validate", "--config"])
        .arg(&bad)
        .assert()
        .failure()
        .stderr(predicate::str::contains("bogus"));

    let one_arm = dir.path().join("one.toml");
    std::fs::write(
        &one_arm,
        SMALL.replace(r#"arms = ["Arm A", "Arm B", "Arm C"]"#, r#"arms = ["Arm A"]"#),
    )
    .unwrap();
    trialsim().args(["validate", "--config"]).arg(&one_arm).assert().failure();
}

#[test]
fn simulate_is_deterministic_and_reuses_stored_batches() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        trialsim()
            .args(["simulate", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .assert()
            .success()
            .stderr(predicate::str::contains("30 simulations (30 new)"));
    }
    assert_eq!(
        std::fs::read(a.join("batch.jsonl")).unwrap(),
        std::fs::read(b.join("batch.jsonl")).unwrap()
    );
    assert_eq!(
        std::fs::read(a.join("metrics.csv")).unwrap(),
        std::fs::read(b.join("metrics.csv")).unwrap()
    );
    let metrics = std::fs::read_to_string(a.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("metric,est,err_sd,err_mad,lo,hi\n"));
    assert!(metrics.contains("\nprob_superior,"));

    trialsim()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&a)
        .assert()
        .success()
        .stderr(predicate::str::contains("(0 new)"));
    trialsim()
        .args(["simulate", "--n-rep", "40", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&a)
        .assert()
        .success()
        .stderr(predicate::str::contains("40 simulations (10 new)"));
    trialsim()
        .args(["simulate", "--seed", "8", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&a)
        .assert()
        .failure()
        .stderr(predicate::str::contains("base_seed"));

    let log = std::fs::read_to_string(a.join("session.log")).unwrap();
    assert_eq!(log.lines().count(), 4);
    assert!(log.contains("\"base_seed\":7"));
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let (a, b) = (dir.path().join("w1"), dir.path().join("w2"));
    for (out, w) in [(&a, "1"), (&b, "3")] {
        trialsim()
            .args(["simulate", "--workers", w, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .assert()
            .success();
    }
    assert_eq!(
        std::fs::read(a.join("batch.jsonl")).unwrap(),
        std::fs::read(b.join("batch.jsonl")).unwrap()
    );
}

#[test]
fn metrics_and_combos_read_stored_batches() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("run");
    trialsim()
        .args(["simulate", "--scenario", "1", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .assert()
        .success();
    let batch = out.join("batch.jsonl");
    let csv = dir.path().join("m.csv");
    trialsim()
        .args(["metrics", "--scenario", "1", "--select-strategy", "best", "--boot", "20", "--config"])
        .arg(&cfg)
        .arg("--batch")
        .arg(&batch)
        .arg("--out")
        .arg(&csv)
        .assert()
        .success();
    let text = std::fs::read_to_string(&csv).unwrap();
    let row = text.lines().find(|l| l.starts_with("prob_superior,")).unwrap();
    assert_eq!(row.split(',').count(), 6);
    assert!(row.split(',').all(|c| !c.is_empty()), "{row}");

    // Without --scenario the batch does not match the base design.
    trialsim()
        .args(["metrics", "--config"])
        .arg(&cfg)
        .arg("--batch")
        .arg(&batch)
        .assert()
        .failure();

    trialsim()
        .args(["combos", "--scenario", "1", "--config"])
        .arg(&cfg)
        .arg("--batch")
        .arg(&batch)
        .assert()
        .success()
        .stdout(predicate::str::starts_with("arms,probability\n"));
}

#[test]
fn scenarios_write_key_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("grid");
    trialsim()
        .args(["scenarios", "--n-rep", "5", "--effects", "0,-0.05", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .assert()
        .success();
    let table = std::fs::read_to_string(out.join("key_results.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "A,B,C,size,pr_concl,pr_sup,pr_equi");
    // {0, -0.05} over two exchangeable arms: three unique scenarios.
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("25,25,25,"));
}

#[test]
fn calibrate_reports_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("cal");
    let args = |c: &mut Command| {
        c.args([
            "calibrate", "--n-rep", "20", "--target", "0.1", "--tol", "0.1", "--dir", "-1", "--range",
            "0.9,0.999", "--iter-max", "6", "--config",
        ])
        .arg(&cfg)
        .arg("--out")
        .arg(&out);
    };
    let mut first = trialsim();
    args(&mut first);
    first
        .assert()
        .success()
        .stdout(predicate::str::contains("Trial calibration:"))
        .stdout(predicate::str::contains("* Result: calibration successful"))
        .stdout(predicate::str::contains("at or below target, range: 0 to 0.1"));
    assert!(out.join("calibration.json").exists());
    assert!(out.join("calibrated_batch.jsonl").exists());

    let mut second = trialsim();
    args(&mut second);
    second
        .assert()
        .success()
        .stderr(predicate::str::contains("resuming with"));

    trialsim()
        .args(["simulate", "--calibrated"])
        .arg(out.join("calibration.json"))
        .args(["--n-rep", "20", "--config"])
        .arg(&cfg)
        .assert()
        .success();
}
