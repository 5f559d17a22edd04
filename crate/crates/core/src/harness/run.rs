use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{EngineKind, RunConfig};
use super::datum::build_datum;
use crate::diagnostics::{
    analyticity_estimate, blow_up_monitor, decay_fits, growth_rate_fit, ladder_sup_norms,
    write_analyticity_csv, write_decay_csv, AnalyticityEstimate, BlowUpClass, BlowUpEvidence,
    DecayFit, DecayRequest, GrowthFit,
};
use crate::error::{Error, Result};
use crate::evolution::{
    etd_evolve, picard_solve, AbortReason, MpksSystem, PicardDiagnostics, RunStatus, Scheme,
    Trajectory,
};
use crate::exponent::display_exponent;
use crate::grid::{Field, SpectralGrid};

/// Relative boundary value above which the datum is reported as touching
/// the box faces.
const BOUNDARY_WARNING: f64 = 1e-6;
/// Spectral tail of the datum above which it is reported as under-resolved.
const DATUM_TAIL_WARNING: f64 = 1e-10;

/// What the engine produced, before any post-processing.
#[derive(Debug, Clone)]
pub struct EngineOutcome {
    pub trajectory: Trajectory,
    pub picard: Option<PicardDiagnostics>,
    pub engine_seconds: f64,
    /// Warnings about the setup, independent of the engine.
    pub setup_warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub steps: usize,
    pub snapshots: usize,
    pub final_time: f64,
    pub initial_mass: f64,
    pub mass_drift: f64,
    pub worst_negativity: f64,
    pub initial_max: f64,
    pub final_max: f64,
    /// Largest `max rho` over the run divided by the initial one.
    pub peak_growth: f64,
    pub validity_horizon: f64,
}

/// A requested diagnostic that could not be produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticFailure {
    pub diagnostic: String,
    pub target: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub engine_seconds: f64,
    pub diagnostics_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_hash: String,
    pub label: String,
    pub engine: EngineKind,
    pub run_dir: PathBuf,
    pub status: RunStatus,
    pub summary: TrajectorySummary,
    /// Window actually used by the decay fits and analyticity radii.
    pub window: Option<(f64, f64)>,
    pub decay: Vec<DecayFit>,
    pub analyticity: Vec<AnalyticityEstimate>,
    pub growth: Vec<GrowthFit>,
    pub blow_up: Option<BlowUpEvidence>,
    pub classification: Option<BlowUpClass>,
    pub picard: Option<PicardDiagnostics>,
    pub failures: Vec<DiagnosticFailure>,
    pub warnings: Vec<String>,
    pub timing: Timing,
}

impl RunReport {
    /// 3 for an engine abort, 4 for a missing diagnostic, else 0.
    pub fn exit_code(&self) -> i32 {
        if !self.status.is_completed() {
            3
        } else if !self.failures.is_empty() {
            4
        } else {
            0
        }
    }

    pub fn decay_for(&self, beta: &crate::grid::MultiIndex, k: usize, q: f64) -> Option<&DecayFit> {
        self.decay.iter().find(|f| &f.beta == beta && f.k == k && f.q == q)
    }
}

/// Validates, simulates, measures and writes every artifact under
/// [`RunConfig::run_dir`]. Engine aborts end up in the report status; only
/// configuration and I/O problems are errors.
pub fn run_scenario(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let outcome = simulate(config)?;
    finish_run(config, &outcome)
}

/// Builds the datum and runs the configured engine.
pub fn simulate(config: &RunConfig) -> Result<EngineOutcome> {
    config.validate()?;
    let grid = SpectralGrid::from_spec(config.grid.spec())?;
    let rho0 = build_datum(config, &grid)?;
    let setup_warnings = setup_warnings(config, &grid, &rho0);
    let mut times = config.time.output_times();
    times.extend(config.diagnostics.growth_times.iter().copied());
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());

    let start = Instant::now();
    let (mut trajectory, picard) = match config.engine.kind {
        EngineKind::Etd => {
            let system = MpksSystem::new(&grid)?;
            (etd_evolve(&system, &rho0, &times, &config.etd_options())?, None)
        }
        EngineKind::HeatOnly => {
            let system = MpksSystem::heat_only(&grid);
            (etd_evolve(&system, &rho0, &times, &config.etd_options())?, None)
        }
        EngineKind::Picard => {
            let system = MpksSystem::new(&grid)?;
            let mut options = config.picard_options();
            options.output_times = times.clone();
            match picard_solve(&system, &rho0, config.time.t_final, &options) {
                Ok((traj, diag)) => (traj, Some(diag)),
                Err(Error::NonContraction(detail)) => {
                    (refused(&grid, &rho0, &config.diagnostics.q_list, detail), None)
                }
                Err(e) => return Err(e),
            }
        }
    };
    trajectory.config_hash = config.physics_hash();
    Ok(EngineOutcome {
        trajectory,
        picard,
        engine_seconds: start.elapsed().as_secs_f64(),
        setup_warnings,
    })
}

fn refused(grid: &Arc<SpectralGrid>, rho0: &Field, q_list: &[f64], detail: String) -> Trajectory {
    let mut traj = Trajectory::new(grid.clone(), Scheme::Picard, true, q_list.to_vec());
    traj.record(0.0, rho0.real(), rho0.spectral());
    traj.push_snapshot(0.0, rho0.clone());
    traj.status = RunStatus::Aborted { reason: AbortReason::NonContraction, time: 0.0, detail };
    traj
}

fn setup_warnings(config: &RunConfig, grid: &SpectralGrid, rho0: &Field) -> Vec<String> {
    let mut out = Vec::new();
    let horizon = grid.validity_horizon();
    if config.time.t_final > horizon {
        out.push(format!(
            "t_final = {} exceeds the validity horizon {horizon:.4}; periodic images are no longer \
             negligible and fits are clipped to the horizon",
            config.time.t_final
        ));
    }
    let tail = grid.tail_energy_fraction(rho0.spectral());
    if tail > DATUM_TAIL_WARNING {
        out.push(format!("initial datum is under-resolved: spectral tail fraction {tail:.3e}"));
    }
    let n = grid.n_per_axis();
    let mut idx = vec![0usize; grid.dim()];
    let mut face: f64 = 0.0;
    for (flat, &v) in rho0.real().iter().enumerate() {
        grid.unflatten(flat, &mut idx);
        if idx.iter().any(|&i| i == 0 || i == n - 1) {
            face = face.max(v.abs());
        }
    }
    if face > BOUNDARY_WARNING * rho0.max_abs() {
        out.push(format!(
            "initial datum reaches the box faces: boundary value {:.3e} of the maximum",
            face / rho0.max_abs()
        ));
    }
    out
}

/// Window of the decay fits and analyticity radii, clipped to the reached
/// time, the validity horizon and the resolution floor.
pub fn resolve_window(
    requested: Option<[f64; 2]>,
    grid: &SpectralGrid,
    reached: f64,
) -> std::result::Result<(f64, f64), String> {
    let cap = reached.min(grid.validity_horizon());
    let floor = 4.0 * grid.spacing() * grid.spacing();
    let (lo, hi) = match requested {
        Some([lo, hi]) => (lo, hi.min(cap)),
        None => ((cap / 16.0).max(floor), cap),
    };
    if lo >= hi {
        return Err(format!(
            "empty fit window [{lo}, {hi}] (reached t = {reached}, horizon {})",
            grid.validity_horizon()
        ));
    }
    Ok((lo, hi))
}

/// Runs the requested diagnostics on an engine outcome and writes the
/// artifacts.
pub fn finish_run(config: &RunConfig, outcome: &EngineOutcome) -> Result<RunReport> {
    let start = Instant::now();
    let traj = &outcome.trajectory;
    let grid = &traj.grid;
    let diag = &config.diagnostics;
    let mut failures = Vec::new();
    let mut warnings = outcome.setup_warnings.clone();
    warnings.extend(traj.warnings.iter().cloned());
    let fail = |failures: &mut Vec<DiagnosticFailure>, diagnostic: &str, target: String, error: String| {
        failures.push(DiagnosticFailure { diagnostic: diagnostic.into(), target, error });
    };

    let window = match resolve_window(diag.window, grid, traj.final_time()) {
        Ok(w) => {
            if let Some([lo, hi]) = diag.window {
                if w != (lo, hi) {
                    warnings.push(format!("fit window [{lo}, {hi}] clipped to [{}, {}]", w.0, w.1));
                }
            }
            Some(w)
        }
        Err(e) => {
            if !diag.decay.is_empty() || diag.analyticity {
                warnings.push(e.clone());
            }
            None
        }
    };

    let mut decay = Vec::new();
    if !diag.decay.is_empty() {
        let requests: Vec<DecayRequest> =
            diag.decay.iter().map(|d| DecayRequest { beta: d.beta.clone(), k: d.k, q: d.q }).collect();
        let target = |r: &DecayRequest| format!("beta={} k={} q={}", r.beta, r.k, display_exponent(r.q));
        match window {
            Some(w) => {
                for (r, fit) in requests.iter().zip(decay_fits(traj, &requests, w)?) {
                    match fit {
                        Ok(f) => decay.push(f),
                        Err(e) => fail(&mut failures, "decay", target(r), e.to_string()),
                    }
                }
            }
            None => {
                for r in &requests {
                    fail(&mut failures, "decay", target(r), "no usable fit window".into());
                }
            }
        }
    }

    let system = MpksSystem::with_drift(grid, traj.drift_enabled)?;
    let mut analyticity = Vec::new();
    if diag.analyticity {
        match window {
            Some((lo, hi)) => {
                let inside: Vec<_> = traj.snapshots_in(lo, hi).collect();
                // every stride-th snapshot, always keeping both ends of the window
                let mut snaps: Vec<_> = inside.iter().rev().step_by(diag.analyticity_stride).copied().collect();
                if let Some(&first) = inside.first() {
                    if !std::ptr::eq(*snaps.last().unwrap(), first) {
                        snaps.push(first);
                    }
                }
                snaps.reverse();
                if snaps.is_empty() {
                    fail(&mut failures, "analyticity", format!("[{lo}, {hi}]"), "no snapshots in window".into());
                }
                let rows: Vec<_> = snaps
                    .par_iter()
                    .map(|s| (s.time, analyticity_estimate(&system, &s.field, s.time, diag.ladder_order)))
                    .collect();
                for (t, row) in rows {
                    match row {
                        Ok(r) => analyticity.push(r),
                        Err(e) => fail(&mut failures, "analyticity", format!("t={t}"), e.to_string()),
                    }
                }
            }
            None => fail(&mut failures, "analyticity", "window".into(), "no usable fit window".into()),
        }
    }

    let mut growth = Vec::new();
    for &t in &diag.growth_times {
        let result = traj
            .snapshot_at(t)
            .ok_or_else(|| Error::InvalidArgument(format!("no snapshot at t = {t} (run reached {})", traj.final_time())))
            .and_then(|s| ladder_sup_norms(&system, &s.field, diag.growth_order))
            .and_then(|norms| growth_rate_fit(&norms, t, grid.dim()));
        match result {
            Ok(g) => growth.push(g),
            Err(e) => fail(&mut failures, "growth", format!("t={t}"), e.to_string()),
        }
    }

    let mut blow_up = None;
    if diag.blow_up {
        match blow_up_monitor(traj) {
            Ok(e) => blow_up = Some(e),
            Err(e) => fail(&mut failures, "blow_up", "trajectory".into(), e.to_string()),
        }
    }

    let first = traj.per_step.first();
    let initial_max = first.map_or(0.0, |d| d.max);
    let peak = traj.per_step.iter().map(|d| d.max).fold(f64::NEG_INFINITY, f64::max);
    let summary = TrajectorySummary {
        steps: traj.per_step.len().saturating_sub(1),
        snapshots: traj.snapshots.len(),
        final_time: traj.final_time(),
        initial_mass: first.map_or(0.0, |d| d.mass),
        mass_drift: traj.mass_drift(),
        worst_negativity: traj.worst_negativity(),
        initial_max,
        final_max: traj.per_step.last().map_or(0.0, |d| d.max),
        peak_growth: if initial_max > 0.0 { peak / initial_max } else { f64::NAN },
        validity_horizon: grid.validity_horizon(),
    };
    for f in &failures {
        if f.error.contains("resolution floor") {
            warnings.push(format!("resolution guard: {} {}: {}", f.diagnostic, f.target, f.error));
        }
    }
    let report = RunReport {
        config_hash: config.hash(),
        label: config.label.clone(),
        engine: config.engine.kind,
        run_dir: config.run_dir(),
        status: traj.status.clone(),
        summary,
        window,
        decay,
        analyticity,
        growth,
        classification: blow_up.as_ref().map(|b| b.class),
        blow_up,
        picard: outcome.picard.clone(),
        failures,
        warnings,
        timing: Timing {
            engine_seconds: outcome.engine_seconds,
            diagnostics_seconds: start.elapsed().as_secs_f64(),
        },
    };
    write_artifacts(config, traj, &report)?;
    Ok(report)
}

fn write_artifacts(config: &RunConfig, traj: &Trajectory, report: &RunReport) -> Result<()> {
    let dir = &report.run_dir;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.toml"), config.to_toml()?)?;
    if config.output.trajectory {
        traj.write_files(dir, "trajectory")?;
    }
    write_decay_csv(&report.decay, BufWriter::new(File::create(dir.join("decay.csv"))?))?;
    if config.diagnostics.analyticity {
        write_analyticity_csv(&report.analyticity, BufWriter::new(File::create(dir.join("analyticity.csv"))?))?;
    }
    if !config.diagnostics.growth_times.is_empty() {
        write_growth_csv(&report.growth, BufWriter::new(File::create(dir.join("growth.csv"))?))?;
    }
    serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join("report.json"))?), report)?;
    Ok(())
}

/// Columns `t, j, m_j`.
pub fn write_growth_csv<W: std::io::Write>(rows: &[GrowthFit], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "j", "m_j"])?;
    for g in rows {
        for (j, m) in g.m.iter().enumerate() {
            w.write_record([format!("{:.17e}", g.t), (j + 1).to_string(), format!("{m:.17e}")])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads `report.json` back from a run directory.
pub fn load_report(run_dir: &Path) -> Result<RunReport> {
    let file = File::open(run_dir.join("report.json"))?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}
