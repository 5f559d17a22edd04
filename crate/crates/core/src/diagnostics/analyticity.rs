//! Analyticity radii. The space radius is the exponential decay rate of the
//! Fourier coefficients; the time radius comes from the root test on the
//! exact time-derivative ladder.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::fit::fit_line;
use crate::error::{Error, Result};
use crate::evolution::{time_derivative_ladder, MpksSystem};
use crate::exponent::serde_q;
use crate::grid::{factorial, Field};

/// Fit band, as amplitudes relative to the spectral peak. Relative levels
/// keep the estimator invariant under rescaling of `f`.
pub const BAND_UPPER: f64 = 1e-3;
pub const BAND_LOWER: f64 = 1e-10;
pub const MIN_BAND_SHELLS: usize = 4;

const UNDERFLOW: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitFlag {
    /// Too few shells between the band levels.
    NoDecayBand,
    /// The spectrum underflows before the band is filled; `r_space` is a
    /// lower bound.
    Underflow,
    /// The log-spectrum bends downward over the band (faster than
    /// exponential decay); `r_space` is a band-dependent secant rate.
    GaussianDecay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceRadiusFit {
    pub r_space: f64,
    /// `|xi|` range of the fitted shells.
    pub band: (f64, f64),
    pub shells: usize,
    pub r_squared: f64,
    /// Root-mean-square residual of the log-amplitude fit.
    pub residual: f64,
    pub flags: Vec<FitFlag>,
}

/// Largest `|f^|` per radial shell of width `2 pi / L`, with the `|xi|` at
/// which it is attained. Shells past the inscribed sphere are incomplete and
/// dropped.
pub fn shell_maxima(f: &Field) -> Vec<(f64, f64)> {
    let grid = f.grid();
    let dk = 2.0 * std::f64::consts::PI / grid.box_length();
    let kmax = dk * (grid.n_per_axis() / 2 - 1) as f64;
    let shells = (kmax / dk).round() as usize + 1;
    let mut best = vec![(0.0f64, 0.0f64); shells];
    for (c, k2) in f.spectral().iter().zip(grid.k2()) {
        let k = k2.sqrt();
        if k > kmax + 1e-9 * dk {
            continue;
        }
        let s = (k / dk).round() as usize;
        let a = c.norm();
        if a > best[s].1 {
            best[s] = (k, a);
        }
    }
    best
}

/// Fits `log max|f^|` against `|xi|` over shells whose amplitude lies
/// between [`BAND_LOWER`] and [`BAND_UPPER`] times the peak, beyond the peak.
pub fn analyticity_radius_space(f: &Field) -> SpaceRadiusFit {
    let shells = shell_maxima(f);
    let (peak_shell, peak) =
        shells.iter().enumerate().fold(
            (0, 0.0),
            |acc, (i, s)| if s.1 > acc.1 { (i, s.1) } else { acc },
        );
    let rejected = |flags: Vec<FitFlag>, r: f64| SpaceRadiusFit {
        r_space: r,
        band: (0.0, 0.0),
        shells: 0,
        r_squared: 0.0,
        residual: 0.0,
        flags,
    };
    if peak <= UNDERFLOW {
        return rejected(vec![FitFlag::NoDecayBand, FitFlag::Underflow], 0.0);
    }
    let hi = peak * BAND_UPPER;
    let lo = (peak * BAND_LOWER).max(UNDERFLOW);
    let tail = &shells[peak_shell..];
    let band: Vec<(f64, f64)> = tail
        .iter()
        .copied()
        .filter(|&(k, a)| k > 0.0 && a <= hi && a >= lo)
        .collect();
    let underflow_at = tail
        .iter()
        .find(|(k, a)| *k > 0.0 && *a < UNDERFLOW)
        .map(|s| s.0);
    if band.len() < MIN_BAND_SHELLS {
        return match underflow_at {
            Some(k) if k > 0.0 => rejected(vec![FitFlag::Underflow], (peak / UNDERFLOW).ln() / k),
            _ => rejected(vec![FitFlag::NoDecayBand], 0.0),
        };
    }
    let x: Vec<f64> = band.iter().map(|b| b.0).collect();
    let y: Vec<f64> = band.iter().map(|b| b.1.ln()).collect();
    let Ok(line) = fit_line(&x, &y) else {
        return rejected(vec![FitFlag::NoDecayBand], 0.0);
    };
    let residual = (x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - line.slope * a - line.intercept).powi(2))
        .sum::<f64>()
        / x.len() as f64)
        .sqrt();
    let mut flags = Vec::new();
    let half = x.len() / 2;
    if half >= 2 {
        let first = fit_line(&x[..half], &y[..half]).map(|f| f.slope);
        let second = fit_line(&x[half..], &y[half..]).map(|f| f.slope);
        if let (Ok(a), Ok(b)) = (first, second) {
            if b < 1.2 * a {
                flags.push(FitFlag::GaussianDecay);
            }
        }
    }
    if underflow_at.is_some() && band.last().is_some_and(|b| b.1 > lo * 1e3) {
        flags.push(FitFlag::Underflow);
    }
    SpaceRadiusFit {
        r_space: (-line.slope).max(0.0),
        band: (x[0], *x.last().unwrap()),
        shells: x.len(),
        r_squared: line.r_squared,
        residual,
        flags,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeRadius {
    pub t: f64,
    /// Infinite when every ladder norm past `j = 1` vanishes.
    #[serde(with = "serde_q")]
    pub r_time: f64,
    /// `(j, (||d_t^j rho||_inf / j!)^{-1/j})` for each usable `j >= 2`.
    pub per_order: Vec<(usize, f64)>,
}

impl TimeRadius {
    pub fn ratio_to_t(&self) -> f64 {
        self.r_time / self.t
    }
}

/// Root-test estimate `min_{j >= 2} (||d_t^j rho||_inf / j!)^{-1/j}` from the
/// norms for `j = 0..=k_max`, `k_max >= 4`.
pub fn analyticity_radius_time(ladder_norms: &[f64], t: f64) -> Result<TimeRadius> {
    if ladder_norms.len() < 5 {
        return Err(Error::InvalidArgument(format!(
            "need ladder norms up to order >= 4, got {}",
            ladder_norms.len().saturating_sub(1)
        )));
    }
    let per_order: Vec<(usize, f64)> = ladder_norms
        .iter()
        .enumerate()
        .skip(2)
        .filter(|(_, n)| **n > 0.0)
        .map(|(j, n)| (j, (n / factorial(j)).powf(-1.0 / j as f64)))
        .collect();
    let r_time = per_order.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    Ok(TimeRadius {
        t,
        r_time,
        per_order,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub t: f64,
    /// `M_j = (||d_t^j rho||_inf t^{j + d/2} / j^j)^{1/j}` for `j = 1..=k_max`.
    pub m: Vec<f64>,
    pub max: f64,
    pub median: f64,
    /// Least-squares slope of `M_j` against `j`.
    pub trend: f64,
}

impl GrowthFit {
    /// `max M_j <= 2 median M_j`.
    pub fn is_bounded(&self) -> bool {
        self.max <= 2.0 * self.median
    }
}

pub fn growth_rate_fit(ladder_norms: &[f64], t: f64, dim: usize) -> Result<GrowthFit> {
    if ladder_norms.len() < 5 {
        return Err(Error::InvalidArgument(
            "need ladder norms up to order >= 4".into(),
        ));
    }
    let d = dim as f64;
    let m: Vec<f64> = ladder_norms
        .iter()
        .enumerate()
        .skip(1)
        .map(|(j, n)| {
            let jf = j as f64;
            (n * t.powf(jf + d / 2.0) / jf.powf(jf)).powf(1.0 / jf)
        })
        .collect();
    let mut sorted = m.clone();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    };
    let js: Vec<f64> = (1..=m.len()).map(|j| j as f64).collect();
    let trend = fit_line(&js, &m).map(|f| f.slope).unwrap_or(0.0);
    Ok(GrowthFit {
        t,
        max: *sorted.last().unwrap(),
        median,
        trend,
        m,
    })
}

/// `||d_t^j rho||_inf` for `j = 0..=k_max`.
pub fn ladder_sup_norms(system: &MpksSystem, rho: &Field, k_max: usize) -> Result<Vec<f64>> {
    Ok(time_derivative_ladder(system, rho, k_max)?
        .iter()
        .map(|f| f.max_abs())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticityEstimate {
    pub t: f64,
    pub r_space: f64,
    #[serde(with = "serde_q")]
    pub r_time: f64,
    pub space_fit: SpaceRadiusFit,
    pub time_fit: TimeRadius,
}

pub fn analyticity_estimate(
    system: &MpksSystem,
    rho: &Field,
    t: f64,
    k_max: usize,
) -> Result<AnalyticityEstimate> {
    let space_fit = analyticity_radius_space(rho);
    let time_fit = analyticity_radius_time(&ladder_sup_norms(system, rho, k_max)?, t)?;
    Ok(AnalyticityEstimate {
        t,
        r_space: space_fit.r_space,
        r_time: time_fit.r_time,
        space_fit,
        time_fit,
    })
}

/// Columns `t, r_space, r_time, flags`.
pub fn write_analyticity_csv<W: Write>(rows: &[AnalyticityEstimate], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "r_space", "r_time", "flags"])?;
    for r in rows {
        let flags: Vec<String> = r
            .space_fit
            .flags
            .iter()
            .map(|f| {
                serde_json::to_value(f)
                    .ok()
                    .and_then(|v| v.as_str().map(String::from))
                    .unwrap_or_default()
            })
            .collect();
        w.write_record([
            format!("{:.17e}", r.t),
            format!("{:.17e}", r.r_space),
            if r.r_time.is_finite() {
                format!("{:.17e}", r.r_time)
            } else {
                "inf".into()
            },
            flags.join(";"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::heat::gaussian_kernel_values;
    use rustfft::num_complex::Complex64;
    use std::f64::consts::PI;

    fn synthetic(dim: usize, n: usize, box_length: f64, r: f64) -> Field {
        let g = make_grid(dim, n, box_length).unwrap();
        let coeffs = g
            .k2()
            .iter()
            .map(|k2| Complex64::new((-r * k2.sqrt()).exp(), 0.0))
            .collect();
        Field::from_spectral(g, coeffs).unwrap()
    }

    #[test]
    fn recovers_exponential_spectra_over_two_decades() {
        for r in [0.1, 0.3, 1.0, 3.0, 10.0] {
            let fit = analyticity_radius_space(&synthetic(1, 4096, 60.0, r));
            assert!((fit.r_space / r - 1.0).abs() < 0.02, "r={r}: {fit:?}");
            assert!(!fit.flags.contains(&FitFlag::GaussianDecay));
        }
        let fit = analyticity_radius_space(&synthetic(2, 256, 40.0, 0.5));
        assert!((fit.r_space / 0.5 - 1.0).abs() < 0.02, "{fit:?}");
    }

    #[test]
    fn heat_kernel_is_flagged_gaussian() {
        let g = make_grid(2, 128, 40.0).unwrap();
        let t = 0.5;
        let fit = analyticity_radius_space(&gaussian_kernel_values(&g, t).unwrap());
        assert!(fit.flags.contains(&FitFlag::GaussianDecay), "{fit:?}");
        // secant rate of exp(-t xi^2) over the fitted band
        let secant = t * (fit.band.0 + fit.band.1);
        assert!(
            (fit.r_space / secant - 1.0).abs() < 0.1,
            "{fit:?} vs {secant}"
        );
    }

    #[test]
    fn single_harmonic_has_no_band() {
        let g = make_grid(1, 64, 2.0 * PI).unwrap();
        let f = Field::from_fn(g, |x| (3.0 * x[0]).cos());
        let fit = analyticity_radius_space(&f);
        assert!(fit.flags.contains(&FitFlag::NoDecayBand));
        assert_eq!(fit.r_space, 0.0);
        let z = analyticity_radius_space(&Field::zeros(make_grid(1, 8, 1.0).unwrap()));
        assert!(!z.r_space.is_nan());
    }

    #[test]
    fn space_radius_is_amplitude_invariant() {
        let f = synthetic(1, 2048, 60.0, 1.0);
        let a = analyticity_radius_space(&f).r_space;
        let b = analyticity_radius_space(&f.scale(1e-5)).r_space;
        assert!((a - b).abs() < 1e-6 * a);
    }

    #[test]
    fn time_radius_of_stationary_field_is_infinite() {
        let r = analyticity_radius_time(&[1.0, 0.0, 0.0, 0.0, 0.0], 1.0).unwrap();
        assert!(r.r_time.is_infinite());
        assert!(analyticity_radius_time(&[1.0, 1.0, 1.0], 1.0).is_err());
    }

    /// `max |d^{2j}/dx^{2j} G(x, t)|` in 1D is attained at `x = 0`:
    /// `(2j)! / (j! (4t)^j) G(0, t)`.
    fn heat_ladder_1d(t: f64, k_max: usize) -> Vec<f64> {
        let g0 = (4.0 * PI * t).powf(-0.5);
        (0..=k_max)
            .map(|j| factorial(2 * j) / (factorial(j) * (4.0 * t).powi(j as i32)) * g0)
            .collect()
    }

    #[test]
    fn heat_ladder_closed_form_matches_grid() {
        let g = make_grid(1, 128, 60.0).unwrap();
        let sys = MpksSystem::heat_only(&g);
        let t = 2.0;
        let f = gaussian_kernel_values(&g, t).unwrap();
        let grid_norms = ladder_sup_norms(&sys, &f, 6).unwrap();
        // round-off in the top modes is amplified by |xi|^{2j}
        for (a, b) in grid_norms.iter().zip(heat_ladder_1d(t, 6)) {
            assert!((a - b).abs() < 1e-6 * b, "{a} vs {b}");
        }
    }

    #[test]
    fn heat_time_radius_grows_with_t() {
        let r1 = analyticity_radius_time(&heat_ladder_1d(1.0, 8), 1.0).unwrap();
        let r4 = analyticity_radius_time(&heat_ladder_1d(4.0, 8), 4.0).unwrap();
        // ladder norms scale as t^{-j-1/2}, so each root-test term scales as
        // t^{1 + 1/(2j)}, between t and t^{5/4}
        let growth = r4.r_time / r1.r_time;
        assert!(growth > 4.0 && growth < 4.0 * 4f64.powf(0.25), "{growth}");
        // the root test approaches t from above as more orders enter
        let short = analyticity_radius_time(&heat_ladder_1d(1.0, 4), 1.0).unwrap();
        assert!(short.r_time >= r1.r_time);
        assert!(r1.r_time > 1.0 && r1.r_time < 1.5, "{r1:?}");
    }

    #[test]
    fn growth_rates_first_order_and_closed_form() {
        let t = 1.5;
        let norms = heat_ladder_1d(t, 6);
        let fit = growth_rate_fit(&norms, t, 1).unwrap();
        assert!((fit.m[0] - norms[1] * t.powf(1.5)).abs() < 1e-14);
        for (j, m) in fit.m.iter().enumerate() {
            let j = j + 1;
            let jf = j as f64;
            let closed = (factorial(2 * j) / (factorial(j) * 4f64.powi(j as i32))
                * (4.0 * PI).powf(-0.5)
                / jf.powf(jf))
            .powf(1.0 / jf);
            assert!((m - closed).abs() < 1e-12 * closed);
        }
        assert!(fit.is_bounded());
    }
}
