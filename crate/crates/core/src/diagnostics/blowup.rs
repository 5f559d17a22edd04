use serde::{Deserialize, Serialize};

use super::fit::fit_line;
use crate::error::{Error, Result};
use crate::evolution::{RunStatus, Trajectory};

pub const MIN_MONITOR_STEPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlowUpClass {
    Decaying,
    Growing,
    AbortedBlowUpCandidate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowUpEvidence {
    pub class: BlowUpClass,
    /// Slopes against `t` over the final third of the steps.
    pub linf_trend: f64,
    pub log_tail_trend: f64,
    pub moment_trend: f64,
    /// Largest `max rho` over the run divided by the initial one.
    pub peak_growth: f64,
    pub steps: usize,
}

/// Classifies a run from monotone trends over its final third; an engine
/// abort for loss of resolution or sign short-circuits to
/// [`BlowUpClass::AbortedBlowUpCandidate`].
pub fn blow_up_monitor(traj: &Trajectory) -> Result<BlowUpEvidence> {
    let steps = traj.per_step.len();
    if steps < MIN_MONITOR_STEPS {
        return Err(Error::InvalidArgument(format!(
            "{steps} steps recorded, need at least {MIN_MONITOR_STEPS}"
        )));
    }
    let tail = &traj.per_step[steps - steps / 3..];
    let t: Vec<f64> = tail.iter().map(|d| d.time).collect();
    let trend = |y: Vec<f64>| fit_line(&t, &y).map(|f| f.slope).unwrap_or(0.0);
    let linf_trend = trend(tail.iter().map(|d| d.max.ln()).collect());
    let log_tail_trend = trend(
        tail.iter()
            .map(|d| d.tail_fraction.max(1e-300).ln())
            .collect(),
    );
    let moment_trend = trend(tail.iter().map(|d| d.second_moment).collect());
    let first = traj.per_step[0].max;
    let peak = traj
        .per_step
        .iter()
        .map(|d| d.max)
        .fold(f64::NEG_INFINITY, f64::max);
    let aborted =
        matches!(&traj.status, RunStatus::Aborted { reason, .. } if reason.is_blow_up_candidate());
    let class = if aborted {
        BlowUpClass::AbortedBlowUpCandidate
    } else if linf_trend > 0.0 && tail.last().unwrap().max > tail[0].max {
        BlowUpClass::Growing
    } else {
        BlowUpClass::Decaying
    };
    Ok(BlowUpEvidence {
        class,
        linf_trend,
        log_tail_trend,
        moment_trend,
        peak_growth: peak / first,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{
        etd_evolve, geometric_times, AbortReason, EtdOptions, MpksSystem, Scheme,
    };
    use crate::grid::make_grid;
    use crate::heat::gaussian_kernel_values;

    #[test]
    fn heat_flow_is_decaying() {
        let g = make_grid(2, 64, 32.0).unwrap();
        let sys = MpksSystem::heat_only(&g);
        let rho0 = gaussian_kernel_values(&g, 0.5).unwrap();
        let tr = etd_evolve(
            &sys,
            &rho0,
            &geometric_times(0.1, 4.0, 15),
            &EtdOptions::default(),
        )
        .unwrap();
        let e = blow_up_monitor(&tr).unwrap();
        assert_eq!(e.class, BlowUpClass::Decaying);
        assert!(e.linf_trend < 0.0);
        assert_eq!(e.peak_growth, 1.0);
    }

    #[test]
    fn short_runs_rejected_and_aborts_flagged() {
        let g = make_grid(1, 16, 8.0).unwrap();
        let rho0 = gaussian_kernel_values(&g, 0.5).unwrap();
        let mut tr = Trajectory::new(g.clone(), Scheme::Strang, true, vec![]);
        for i in 0..5 {
            tr.record(i as f64, rho0.real(), rho0.spectral());
        }
        assert!(blow_up_monitor(&tr).is_err());
        for i in 5..12 {
            tr.record(i as f64, rho0.real(), rho0.spectral());
        }
        tr.status = RunStatus::Aborted {
            reason: AbortReason::SpectralTail,
            time: 11.0,
            detail: String::new(),
        };
        assert_eq!(
            blow_up_monitor(&tr).unwrap().class,
            BlowUpClass::AbortedBlowUpCandidate
        );
    }
}
