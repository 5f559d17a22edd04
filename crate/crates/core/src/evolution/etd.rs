use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::system::MpksSystem;
use super::trajectory::{AbortReason, RunStatus, Scheme, Trajectory};
use crate::error::{Error, Result};
use crate::exponent::serde_q_vec;
use crate::grid::Field;
use crate::heat::apply_heat_in_place;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtdScheme {
    /// Half heat step, SSP-RK3 transport step, half heat step.
    Strang,
    /// `rho <- e^{dt lap} (rho - dt div(rho grad c))`.
    ExponentialEuler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EtdOptions {
    pub scheme: EtdScheme,
    pub dt_max: f64,
    /// First step, and the floor when `dt_rel` is set.
    pub dt_initial: f64,
    /// When set, steps grow as `dt = dt_rel * t` (capped by `dt_max`).
    pub dt_rel: Option<f64>,
    #[serde(with = "serde_q_vec")]
    pub q_list: Vec<f64>,
    /// Abort once [`SpectralGrid::tail_energy_fraction`] exceeds this
    /// (drift runs only).
    ///
    /// [`SpectralGrid::tail_energy_fraction`]: crate::grid::SpectralGrid::tail_energy_fraction
    pub tail_threshold: f64,
    /// Abort once `min < -collapse_threshold * max`.
    pub collapse_threshold: f64,
    pub max_steps: usize,
}

impl Default for EtdOptions {
    fn default() -> Self {
        EtdOptions {
            scheme: EtdScheme::Strang,
            dt_max: 1e-2,
            dt_initial: 1e-3,
            dt_rel: None,
            q_list: vec![1.0, 2.0, f64::INFINITY],
            tail_threshold: 1e-8,
            collapse_threshold: 1e-2,
            max_steps: 1_000_000,
        }
    }
}

impl EtdOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.dt_max) || !positive(self.dt_initial) {
            return Err(Error::InvalidArgument(
                "time steps must be positive and finite".into(),
            ));
        }
        if self.dt_rel.is_some_and(|r| !positive(r)) {
            return Err(Error::InvalidArgument("dt_rel must be positive".into()));
        }
        if !(self.tail_threshold > 0.0) || !(self.collapse_threshold > 0.0) {
            return Err(Error::InvalidArgument(
                "abort thresholds must be positive".into(),
            ));
        }
        for &q in &self.q_list {
            crate::heat::check_exponent(q)?;
        }
        Ok(())
    }
}

/// Evolves `rho0` through every time in `t_grid`, recording diagnostics after
/// each step and a snapshot at each requested time (plus `t = 0`).
///
/// Without drift the heat semigroup is applied exactly, one jump per output
/// time. Abort conditions end the run with [`RunStatus::Aborted`] rather than
/// an error; the last finite state is kept as a snapshot.
pub fn etd_evolve(
    system: &MpksSystem,
    rho0: &Field,
    t_grid: &[f64],
    options: &EtdOptions,
) -> Result<Trajectory> {
    options.validate()?;
    let grid = system.grid().clone();
    if rho0.grid().spec() != grid.spec() {
        return Err(Error::InvalidArgument(
            "initial datum lives on a different grid".into(),
        ));
    }
    let targets = output_times(t_grid)?;
    let scheme = match (system.drift_enabled(), options.scheme) {
        (false, _) => Scheme::HeatOnly,
        (true, EtdScheme::Strang) => Scheme::Strang,
        (true, EtdScheme::ExponentialEuler) => Scheme::ExponentialEuler,
    };
    let mut traj = Trajectory::new(
        grid.clone(),
        scheme,
        system.drift_enabled(),
        options.q_list.clone(),
    );
    let mut state = rho0.spectral().to_vec();
    traj.record(0.0, rho0.real(), &state);
    traj.push_snapshot(0.0, rho0.clone());

    let h = grid.spacing();
    let mut t = 0.0f64;
    let mut steps = 0usize;
    let mut stability_cap = f64::INFINITY;
    let mut reductions: Vec<(f64, f64)> = Vec::new();
    for &target in &targets {
        while t < target {
            let mut dt = if scheme == Scheme::HeatOnly {
                target - t
            } else {
                let base = match options.dt_rel {
                    Some(r) => (r * t).max(options.dt_initial),
                    None => {
                        if steps == 0 {
                            options.dt_initial.min(options.dt_max)
                        } else {
                            options.dt_max
                        }
                    }
                };
                base.min(options.dt_max).min(stability_cap)
            };
            if t + dt >= target - 1e-12 * target {
                dt = target - t;
            }
            let next = match scheme {
                Scheme::HeatOnly => {
                    let mut s = state.clone();
                    apply_heat_in_place(&grid, &mut s, dt);
                    s
                }
                Scheme::ExponentialEuler => {
                    let eval = system.evaluate(&state, &state);
                    if eval.max_drift * dt > h / 2.0 {
                        stability_cap = 0.45 * h / eval.max_drift;
                        reductions.push((t, stability_cap));
                        continue;
                    }
                    let mut s: Vec<Complex64> = state
                        .iter()
                        .zip(&eval.divergence)
                        .map(|(r, f)| r - f * dt)
                        .collect();
                    apply_heat_in_place(&grid, &mut s, dt);
                    s
                }
                Scheme::Strang => match strang_step(system, &state, dt, h) {
                    Ok(s) => s,
                    Err(speed) => {
                        stability_cap = 0.45 * h / speed;
                        reductions.push((t, stability_cap));
                        continue;
                    }
                },
                Scheme::Picard => unreachable!(),
            };
            steps += 1;
            if steps > options.max_steps {
                return Err(Error::EngineAbort(format!(
                    "step budget {} exhausted at t = {t}",
                    options.max_steps
                )));
            }
            let real = grid.inverse_real(&next);
            let t_next = if dt == target - t { target } else { t + dt };
            if real.iter().any(|v| !v.is_finite()) {
                traj.status = RunStatus::Aborted {
                    reason: AbortReason::NonFinite,
                    time: t_next,
                    detail: "non-finite density".into(),
                };
                if traj.snapshots.last().is_none_or(|s| s.time != t) {
                    traj.push_snapshot(t, Field::from_spectral_unchecked(grid.clone(), state));
                }
                note_reductions(&mut traj, &reductions);
                return Ok(traj);
            }
            state = next;
            t = t_next;
            let d = traj.record(t, &real, &state).clone();
            // the heat semigroup is applied exactly, so only the drift can
            // push energy toward the cutoff
            let abort = if scheme != Scheme::HeatOnly && d.tail_fraction > options.tail_threshold {
                Some((
                    AbortReason::SpectralTail,
                    format!("tail energy fraction {:.3e}", d.tail_fraction),
                ))
            } else if d.min < -options.collapse_threshold * d.max {
                Some((
                    AbortReason::NegativityCollapse,
                    format!("min {:.3e} against max {:.3e}", d.min, d.max),
                ))
            } else {
                None
            };
            if let Some((reason, detail)) = abort {
                traj.status = RunStatus::Aborted {
                    reason,
                    time: t,
                    detail,
                };
                let last = Field::from_real(grid.clone(), real)?;
                traj.push_snapshot(t, last);
                note_reductions(&mut traj, &reductions);
                return Ok(traj);
            }
            if t == target {
                let field = Field::from_real(grid.clone(), real)?;
                traj.push_snapshot(t, field);
            }
        }
    }
    note_reductions(&mut traj, &reductions);
    Ok(traj)
}

/// One warning summarizing every advective step reduction.
fn note_reductions(traj: &mut Trajectory, reductions: &[(f64, f64)]) {
    if let (Some(first), Some(last)) = (reductions.first(), reductions.last()) {
        traj.warn(format!(
            "advective stability limit reduced dt {} times: to {:.3e} at t = {:.4e}, last to {:.3e} at t = {:.4e}",
            reductions.len(),
            first.1,
            first.0,
            last.1,
            last.0
        ));
    }
}

/// Sorted positive output times; zero is dropped (it is always recorded).
fn output_times(t_grid: &[f64]) -> Result<Vec<f64>> {
    let mut ts: Vec<f64> = t_grid.iter().copied().filter(|&t| t != 0.0).collect();
    if ts.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidArgument(
            "output times must be finite and nonnegative".into(),
        ));
    }
    if ts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "output times must be strictly increasing".into(),
        ));
    }
    ts.dedup();
    Ok(ts)
}

/// One Strang step; `Err(max speed)` when the transport stage violates the
/// advective limit `max|grad c| dt <= h/2`.
fn strang_step(
    system: &MpksSystem,
    state: &[Complex64],
    dt: f64,
    h: f64,
) -> std::result::Result<Vec<Complex64>, f64> {
    let grid = system.grid();
    let mut u = state.to_vec();
    apply_heat_in_place(grid, &mut u, dt / 2.0);
    let stage = |v: &[Complex64]| system.evaluate(v, v);
    let e0 = stage(&u);
    if e0.max_drift * dt > h / 2.0 {
        return Err(e0.max_drift);
    }
    let u1: Vec<Complex64> = u
        .iter()
        .zip(&e0.divergence)
        .map(|(a, f)| a - f * dt)
        .collect();
    let e1 = stage(&u1);
    let u2: Vec<Complex64> = u
        .iter()
        .zip(&u1)
        .zip(&e1.divergence)
        .map(|((a, b), f)| 0.75 * a + 0.25 * (b - f * dt))
        .collect();
    let e2 = stage(&u2);
    let mut out: Vec<Complex64> = u
        .iter()
        .zip(&u2)
        .zip(&e2.divergence)
        .map(|((a, b), f)| a / 3.0 + 2.0 / 3.0 * (b - f * dt))
        .collect();
    apply_heat_in_place(grid, &mut out, dt / 2.0);
    Ok(out)
}

/// Geometric output grid of `count` times from `t_lo` to `t_hi`.
pub fn geometric_times(t_lo: f64, t_hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![t_hi];
    }
    let ratio = (t_hi / t_lo).powf(1.0 / (count - 1) as f64);
    (0..count)
        .map(|i| {
            if i + 1 == count {
                t_hi
            } else {
                t_lo * ratio.powi(i as i32)
            }
        })
        .collect()
}
