use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn shiftlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shiftlab")).args(args).output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

#[test]
fn generate_impute_adapt_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&shiftlab(&["generate", "--dag", "2", "--n", "600", "--miss", "0.2", "--seed", "4", "--out", s(d)]));
    for f in ["source.csv", "target.csv", "target_truth.csv", "shift.json"] {
        assert!(d.join(f).exists(), "{f}");
    }
    let target_header = std::fs::read_to_string(d.join("target.csv")).unwrap();
    assert!(!target_header.lines().next().unwrap().contains('Y'), "target outcome must not be written");

    ok(&shiftlab(&[
        "impute", "--input", s(&d.join("source.csv")), "--method", "mice_norm", "--outcome", "Y", "--out",
        s(&d.join("source_imp.csv")),
    ]));
    ok(&shiftlab(&[
        "impute", "--input", s(&d.join("target.csv")), "--method", "mice_norm", "--domain", "target", "--out",
        s(&d.join("target_imp.csv")),
    ]));
    let out = ok(&shiftlab(&[
        "adapt", "--source", s(&d.join("source_imp.csv")), "--target", s(&d.join("target_imp.csv")), "--truth",
        s(&d.join("target_truth.csv")), "--out", s(&d.join("adapt")),
    ]));
    assert!(out.contains("target RMSE"));
    let preds = std::fs::read_to_string(d.join("adapt/predictions.csv")).unwrap();
    assert_eq!(preds.lines().count(), 1 + 180);
}

#[test]
fn leak_imputer_without_outcome_fails() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&shiftlab(&["generate", "--n", "200", "--out", s(d)]));
    let out = shiftlab(&[
        "impute", "--input", s(&d.join("target.csv")), "--method", "joint", "--domain", "target", "--out",
        s(&d.join("x.csv")),
    ]);
    assert!(!out.status.success());
}

#[test]
fn simulate_report_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("cfg.toml");
    std::fs::write(
        &cfg,
        "master_seed = 1\nreps = 1\nsample_sizes = [300]\ntarget_props = [0.5]\nmiss_pcts = [0.2]\n\
         dags = [1, 3]\nnonlinearity = [1]\nmethods = [\"mean\", \"mice_pmm\"]\n",
    )
    .unwrap();
    let out = ok(&shiftlab(&["simulate", "--config", s(&cfg), "--jobs", "2", "--out", s(&d.join("run"))]));
    assert!(out.contains("4 rows"));
    let out = ok(&shiftlab(&["report", "--results", s(&d.join("run")), "--out", s(&d.join("rep"))]));
    assert!(out.contains("mice_pmm"));
    assert!(d.join("rep/summary_by_miss_pct.csv").exists());

    // every PMM row fails: nonzero exit unless errors are allowed
    let bad = d.join("bad.toml");
    std::fs::write(
        &bad,
        std::fs::read_to_string(&cfg).unwrap() + "[imputer]\ndonors = 100000\n",
    )
    .unwrap();
    let out = shiftlab(&["simulate", "--config", s(&bad), "--out", s(&d.join("bad"))]);
    assert_eq!(out.status.code(), Some(1));
    ok(&shiftlab(&["simulate", "--config", s(&bad), "--out", s(&d.join("bad2")), "--allow-errors"]));

    std::fs::write(&bad, "master_seed = 1\nreps = 1\nmethods = []\n").unwrap();
    let out = shiftlab(&["simulate", "--config", s(&bad), "--out", s(&d.join("bad3"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_passes() {
    let out = ok(&shiftlab(&["verify", "--seed", "3"]));
    assert!(out.contains("PASS"));
    assert!(!out.contains("FAIL"));
}

#[test]
fn apply_on_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&shiftlab(&[
        "apply",
        "--data",
        s(&fixture("two_region.csv")),
        "--schema",
        s(&fixture("two_region.toml")),
        "--method",
        "mean",
        "--out",
        s(dir.path()),
    ]));
    assert!(out.contains("5.88%"), "{out}");
    assert!(out.contains("13.4% missing") && out.contains("17.9% missing"), "{out}");
    assert!(dir.path().join("metrics.json").exists());
}
