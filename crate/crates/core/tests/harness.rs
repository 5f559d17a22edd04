use std::path::Path;

use mpks_core::harness::{preset, run_scenario, sweep, RunConfig, SweepAxis, SweepOptions};
use mpks_core::Error;

/// A short, cheap run that still produces every artifact.
fn small(dir: &Path) -> RunConfig {
    let mut c = preset("bounded_window_2d").unwrap();
    c.apply_overrides(&["grid.n_per_axis=128", "grid.box_length=16.0", "time.t_final=0.25", "time.points=16"])
        .unwrap();
    c.output.dir = dir.to_path_buf();
    c
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_scenario(&small(a.path())).unwrap();
    let rb = run_scenario(&small(b.path())).unwrap();
    assert_eq!(ra.config_hash, rb.config_hash);
    for name in ["decay.csv", "trajectory.bin", "trajectory.json"] {
        let x = std::fs::read(ra.run_dir.join(name)).unwrap();
        let y = std::fs::read(rb.run_dir.join(name)).unwrap();
        assert!(!x.is_empty(), "{name} is empty");
        assert_eq!(x, y, "{name} differs between reruns");
    }
    assert_eq!(ra.decay, rb.decay);
    assert!(ra.status.is_completed());
    assert!(ra.summary.mass_drift < 1e-12);
}

#[test]
fn stored_config_reproduces_the_run_hash() {
    let dir = tempfile::tempdir().unwrap();
    let config = small(dir.path());
    let report = run_scenario(&config).unwrap();
    let stored = RunConfig::load(&report.run_dir.join("config.toml")).unwrap();
    assert_eq!(stored, config);
    assert_eq!(stored.hash(), report.config_hash);
    let loaded = mpks_core::harness::load_report(&report.run_dir).unwrap();
    assert_eq!(loaded.decay, report.decay);
}

#[test]
fn bad_names_and_values_fail_before_any_work() {
    assert!(matches!(preset("no_such_scenario"), Err(Error::Config(_))));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let mut c = small(&out);
    assert!(matches!(c.set("grid.n_per_axis", "-4"), Err(Error::Config(_))));
    assert!(matches!(c.set("grid.nonsense", "1"), Err(Error::Config(_))));
    c.datum = mpks_core::harness::DatumConfig::Gaussian { mass: -1.0, sigma: 1.0, center: Vec::new() };
    assert!(matches!(run_scenario(&c), Err(Error::Config(_))));
    assert!(!out.exists());
}

#[test]
fn empty_sweep_matches_a_single_run() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let single = run_scenario(&small(a.path())).unwrap();
    let swept = sweep(&small(b.path()), &[], &SweepOptions::default()).unwrap();
    assert_eq!(swept.points.len(), 1);
    let point = swept.points[0].outcome.as_ref().unwrap();
    assert_eq!(point.config_hash, single.config_hash);
    assert_eq!(point.decay, single.decay);
    assert!(swept.summary_csv.exists());
}

#[test]
fn sweep_records_failures_and_keeps_going() {
    let dir = tempfile::tempdir().unwrap();
    let axis: SweepAxis = "grid.dim=2,7".parse().unwrap();
    let report = sweep(&small(dir.path()), &[axis], &SweepOptions::default()).unwrap();
    assert_eq!(report.points.len(), 2);
    assert!(report.points[0].outcome.is_ok());
    assert!(report.points[1].outcome.is_err());
    assert_eq!(report.points[1].exit_code(), 2);
    let csv = std::fs::read_to_string(&report.summary_csv).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn sweep_cap_is_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let axis: SweepAxis = "datum.mass=1.0,2.0,3.0".parse().unwrap();
    let err = sweep(&small(dir.path()), &[axis], &SweepOptions { max_points: 2 }).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}

#[test]
fn diagnostic_only_axes_share_one_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let axis: SweepAxis = "diagnostics.decay.0.q=2,\"inf\"".parse().unwrap();
    let report = sweep(&small(dir.path()), &[axis], &SweepOptions::default()).unwrap();
    let a = report.points[0].outcome.as_ref().unwrap();
    let b = report.points[1].outcome.as_ref().unwrap();
    assert_ne!(a.config_hash, b.config_hash);
    assert_eq!(a.summary, b.summary);
    assert_ne!(a.decay[0].q, b.decay[0].q);
}
