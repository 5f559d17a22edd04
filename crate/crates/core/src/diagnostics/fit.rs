use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::norms::lq_norm;
use crate::error::{Error, Result};
use crate::evolution::{time_derivative_ladder, MpksSystem, Trajectory};
use crate::exponent::{display_exponent, serde_q};
use crate::grid::{spectral_derivative, MultiIndex};
use crate::heat::kernel_time_exponent;

/// Minimum number of sample times for a decay fit.
pub const MIN_FIT_SAMPLES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = slope x + intercept`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::DegenerateFit(format!(
            "need >= 2 paired samples, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateFit("non-finite sample".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx <= 1e-300 || sxx <= 1e-24 * x.iter().map(|v| v * v).sum::<f64>() {
        return Err(Error::DegenerateFit("zero variance in the abscissa".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    Ok(LineFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// `-|beta|/2 - k - (d/2)(1 - 1/q)`.
pub fn predicted_decay_slope(dim: usize, beta: &MultiIndex, k: usize, q: f64) -> f64 {
    kernel_time_exponent(dim, beta.order(), k, q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub dim: usize,
    pub beta: MultiIndex,
    pub k: usize,
    #[serde(with = "serde_q")]
    pub q: f64,
    pub window: (f64, f64),
    pub samples: usize,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub predicted_slope: f64,
    pub slope_error: f64,
}

/// One `(beta, k, q)` request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRequest {
    pub beta: MultiIndex,
    pub k: usize,
    #[serde(with = "serde_q")]
    pub q: f64,
}

/// Fits `log ||D^beta d_t^k rho(t)||_q` against `log t` over the snapshots
/// inside `window`. Time derivatives come from the exact ladder.
pub fn decay_fit(
    traj: &Trajectory,
    beta: &MultiIndex,
    k: usize,
    q: f64,
    window: (f64, f64),
) -> Result<DecayFit> {
    let system = MpksSystem::with_drift(&traj.grid, traj.drift_enabled)?;
    decay_fit_with(&system, traj, beta, k, q, window)
}

fn decay_fit_with(
    system: &MpksSystem,
    traj: &Trajectory,
    beta: &MultiIndex,
    k: usize,
    q: f64,
    window: (f64, f64),
) -> Result<DecayFit> {
    let grid = &traj.grid;
    let (lo, hi) = window;
    if !(lo > 0.0 && lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "window ({lo}, {hi}) must satisfy 0 < t_lo < t_hi"
        )));
    }
    let horizon = grid.validity_horizon();
    if hi > horizon * (1.0 + 1e-9) {
        return Err(Error::InvalidArgument(format!(
            "window end {hi} is beyond the validity horizon {horizon}"
        )));
    }
    if beta.dim() != grid.dim() {
        return Err(Error::InvalidArgument(format!(
            "multi-index {beta} does not match dimension {}",
            grid.dim()
        )));
    }
    let samples: Vec<_> = traj.snapshots_in(lo, hi).collect();
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "{} snapshots in [{lo}, {hi}], need at least {MIN_FIT_SAMPLES}",
            samples.len()
        )));
    }
    let mut log_t = Vec::with_capacity(samples.len());
    let mut log_n = Vec::with_capacity(samples.len());
    for s in samples {
        let base = if k == 0 {
            s.field.clone()
        } else {
            time_derivative_ladder(system, &s.field, k)?.pop().unwrap()
        };
        let value = lq_norm(&spectral_derivative(&base, beta)?, q)?;
        if !(value > 0.0) {
            return Err(Error::DegenerateFit(format!(
                "norm vanishes at t = {}",
                s.time
            )));
        }
        log_t.push(s.time.ln());
        log_n.push(value.ln());
    }
    let line = fit_line(&log_t, &log_n)?;
    let predicted = predicted_decay_slope(grid.dim(), beta, k, q);
    Ok(DecayFit {
        dim: grid.dim(),
        beta: beta.clone(),
        k,
        q,
        window,
        samples: log_t.len(),
        slope: line.slope,
        intercept: line.intercept,
        r_squared: line.r_squared,
        predicted_slope: predicted,
        slope_error: line.slope - predicted,
    })
}

/// Independent fits over several requests, run in parallel.
pub fn decay_fits(
    traj: &Trajectory,
    requests: &[DecayRequest],
    window: (f64, f64),
) -> Result<Vec<Result<DecayFit>>> {
    let system = MpksSystem::with_drift(&traj.grid, traj.drift_enabled)?;
    Ok(requests
        .par_iter()
        .map(|r| decay_fit_with(&system, traj, &r.beta, r.k, r.q, window))
        .collect())
}

/// Columns `d, beta, k, q, t_lo, t_hi, slope, predicted, error, r2`.
pub fn write_decay_csv<W: Write>(fits: &[DecayFit], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "d",
        "beta",
        "k",
        "q",
        "t_lo",
        "t_hi",
        "slope",
        "predicted",
        "error",
        "r2",
    ])?;
    for f in fits {
        w.write_record([
            f.dim.to_string(),
            f.beta.to_string(),
            f.k.to_string(),
            display_exponent(f.q),
            format!("{:.17e}", f.window.0),
            format!("{:.17e}", f.window.1),
            format!("{:.17e}", f.slope),
            format!("{:.17e}", f.predicted_slope),
            format!("{:.17e}", f.slope_error),
            format!("{:.17e}", f.r_squared),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{etd_evolve, geometric_times, EtdOptions};
    use crate::grid::make_grid;
    use crate::heat::gaussian_kernel_values;

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-15 && (f.intercept - 2.0).abs() < 1e-15);
        assert_eq!(f.r_squared, 1.0);
    }

    #[test]
    fn degenerate_abscissa_rejected() {
        assert!(matches!(
            fit_line(&[1.0, 1.0, 1.0], &[0.0, 1.0, 2.0]),
            Err(Error::DegenerateFit(_))
        ));
        assert!(fit_line(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn predicted_slopes() {
        assert_eq!(
            predicted_decay_slope(2, &MultiIndex(vec![0, 0]), 0, f64::INFINITY),
            -1.0
        );
        assert_eq!(
            predicted_decay_slope(2, &MultiIndex(vec![1, 0]), 1, 2.0),
            -2.0
        );
    }

    #[test]
    fn heat_flow_reproduces_predicted_slopes() {
        // exact heat flow of G(., s0) with s0 small against the window
        let g = make_grid(2, 256, 64.0).unwrap();
        let sys = MpksSystem::heat_only(&g);
        let rho0 = gaussian_kernel_values(&g, 0.02).unwrap();
        let times = geometric_times(1.0, 16.0, 12);
        let tr = etd_evolve(&sys, &rho0, &times, &EtdOptions::default()).unwrap();
        for (beta, k, q) in [
            (vec![0, 0], 0, f64::INFINITY),
            (vec![1, 0], 0, 2.0),
            (vec![0, 0], 1, f64::INFINITY),
            (vec![2, 0], 1, 1.0),
            (vec![1, 1], 0, 4.0),
        ] {
            let fit = decay_fit(&tr, &MultiIndex(beta.clone()), k, q, (1.0, 16.0)).unwrap();
            assert!(fit.slope_error.abs() <= 0.02, "{beta:?} {k} {q}: {fit:?}");
            assert!(fit.r_squared > 0.999);
        }
    }

    #[test]
    fn window_checks() {
        let g = make_grid(1, 128, 32.0).unwrap();
        let sys = MpksSystem::heat_only(&g);
        let rho0 = gaussian_kernel_values(&g, 1.0).unwrap();
        let tr = etd_evolve(
            &sys,
            &rho0,
            &geometric_times(0.5, 4.0, 10),
            &EtdOptions::default(),
        )
        .unwrap();
        let beta = MultiIndex(vec![0]);
        assert!(decay_fit(&tr, &beta, 0, 2.0, (0.5, 8.0)).is_err());
        assert!(decay_fit(&tr, &beta, 0, 2.0, (2.0, 1.0)).is_err());
        assert!(decay_fit(&tr, &beta, 0, 2.0, (2.0, 4.0)).is_err());
        assert!(decay_fit(&tr, &beta, 0, 2.0, (0.5, 4.0)).is_ok());
    }

    #[test]
    fn csv_header_and_row() {
        let fit = DecayFit {
            dim: 2,
            beta: MultiIndex(vec![1, 0]),
            k: 0,
            q: f64::INFINITY,
            window: (1.0, 16.0),
            samples: 12,
            slope: -1.5,
            intercept: 0.0,
            r_squared: 1.0,
            predicted_slope: -1.5,
            slope_error: 0.0,
        };
        let mut buf = Vec::new();
        write_decay_csv(&[fit], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "d,beta,k,q,t_lo,t_hi,slope,predicted,error,r2"
        );
        assert!(lines.next().unwrap().starts_with("2,\"(1,0)\",0,inf,"));
    }
}
