use std::path::Path;
use std::process::{Command, Output};

fn mpks(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpks")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// A short 2D run: every artifact is produced in a second or two.
fn simulate_small(dir: &Path) -> Output {
    mpks(&[
        "simulate",
        "bounded_window_2d",
        "--n-per-axis",
        "128",
        "--box-length",
        "16",
        "--t-final",
        "0.2",
        "--output-dir",
        dir.to_str().unwrap(),
    ])
}

#[test]
fn presets_are_listed_and_printable() {
    let out = mpks(&["presets"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    for name in ["small_mass_2d", "supercritical_2d", "heat_only_2d"] {
        assert!(text.contains(name), "{text}");
    }
    let shown = mpks(&["presets", "--show", "small_mass_2d"]);
    assert_eq!(code(&shown), 0);
    let config = mpks_core::harness::RunConfig::from_toml(&stdout(&shown)).unwrap();
    assert_eq!(config.label, "small_mass_2d");
}

#[test]
fn simulate_writes_artifacts_and_fit_decay_reads_them() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate_small(dir.path());
    assert_eq!(code(&out), 0, "{}\n{}", stdout(&out), String::from_utf8_lossy(&out.stderr));
    let run_dir = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.is_dir())
        .expect("run directory");
    for name in ["config.toml", "report.json", "decay.csv", "trajectory.bin", "trajectory.json"] {
        assert!(run_dir.join(name).exists(), "missing {name}");
    }

    let csv = dir.path().join("fit.csv");
    let fit = mpks(&[
        "fit-decay",
        run_dir.to_str().unwrap(),
        "--request",
        "0,0:0:2",
        "--request",
        "1,0:0:inf",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&fit), 0, "{}", String::from_utf8_lossy(&fit.stderr));
    let rows = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(rows.lines().count(), 3, "{rows}");

    let bad = mpks(&["fit-decay", run_dir.to_str().unwrap(), "--request", "0,0,0:0:2"]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "label = \"x\"\nmystery = 3\n").unwrap();
    assert_eq!(code(&mpks(&["simulate", path.to_str().unwrap()])), 2);
    assert_eq!(code(&mpks(&["simulate", "no_such_preset"])), 2);
    assert_eq!(code(&mpks(&["simulate", "small_mass_2d", "--set", "grid.dim=9"])), 2);
    assert_eq!(code(&mpks(&["sweep", "small_mass_2d", "--axis", "datum.mass=1,2,3", "--max-points", "2"])), 2);
}

#[test]
fn sweep_writes_a_summary_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = mpks(&[
        "sweep",
        "bounded_window_2d",
        "--n-per-axis",
        "128",
        "--box-length",
        "16",
        "--t-final",
        "0.1",
        "--set",
        "diagnostics.decay=[]",
        "--axis",
        "datum.mass=1.0,2.0",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let summary = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "csv"))
        .expect("summary csv");
    assert_eq!(std::fs::read_to_string(summary).unwrap().lines().count(), 3);
}

#[test]
fn verify_kernel_prints_the_table() {
    let out = mpks(&["verify-kernel", "--beta-max", "1", "--k-max", "1", "--dim", "1", "--q", "1,inf", "--t", "1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.lines().count() > 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("max_ratio"));
}
