//! Chemoattractant gradient of the logarithmic potential
//! `c = -(1/(d pi)) ln|x| * rho`.
//!
//! Only `grad c` is ever built; `c` grows at infinity and would not survive
//! truncation to a box. In Fourier space
//!
//! ```text
//! (grad c)^(xi) = gamma_d * i xi / |xi|^d * rho^(xi),   gamma_d = 2^{d-1} pi^{d/2} Gamma(d/2) / (d pi)
//! ```
//!
//! which gives `gamma_1 = 1` (a Hilbert transform), `gamma_2 = 1`
//! (`grad (-lap)^{-1}`) and `gamma_3 = 2 pi / 3`. The zero mode is dropped, so
//! on the periodic box the drift responds to `rho - mean(rho)`.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use gauss_quad::legendre::GaussLegendre;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{lq_norm, vector_lq_norm};
use crate::error::{Error, Result};
use crate::grid::{Field, SpectralGrid};

/// Closed-form Fourier constant of `grad c` in dimension `dim`.
pub fn drift_constant(dim: usize) -> f64 {
    match dim {
        1 => 1.0,
        2 => 1.0,
        3 => 2.0 * PI / 3.0,
        _ => panic!("dimension {dim} not supported"),
    }
}

/// Largest tolerated mismatch between the multiplier drift and the radial
/// quadrature oracle during calibration.
pub const CALIBRATION_TOLERANCE: f64 = 0.01;

/// Fourier symbol of `grad c` on one grid.
#[derive(Debug, Clone)]
pub struct DriftMultiplier {
    grid: Arc<SpectralGrid>,
    components: Vec<Vec<Complex64>>,
    gamma: f64,
}

/// Builds `m_j(xi) = gamma_d i xi_j / |xi|^d` with `m(0) = 0`. For `d = 3`
/// the constant is first checked against the radial quadrature oracle.
pub fn build_drift_multiplier(grid: &Arc<SpectralGrid>) -> Result<DriftMultiplier> {
    let gamma = match grid.dim() {
        3 => calibrated_gamma3()?,
        d => drift_constant(d),
    };
    Ok(DriftMultiplier::with_gamma(grid, gamma))
}

impl DriftMultiplier {
    pub fn new(grid: &Arc<SpectralGrid>) -> Result<Self> {
        build_drift_multiplier(grid)
    }

    /// Multiplier with an explicit constant, skipping calibration.
    pub fn with_gamma(grid: &Arc<SpectralGrid>, gamma: f64) -> Self {
        let dim = grid.dim();
        let n = grid.n_per_axis();
        let nyquist = n / 2;
        let k2 = grid.k2();
        let wn = grid.axis_wavenumbers();
        let mut components = vec![vec![Complex64::new(0.0, 0.0); grid.len()]; dim];
        let mut idx = [0usize; 3];
        for flat in 0..grid.len() {
            if k2[flat] == 0.0 {
                continue;
            }
            grid.unflatten(flat, &mut idx[..dim]);
            let scale = gamma / k2[flat].powf(dim as f64 / 2.0);
            for (axis, comp) in components.iter_mut().enumerate() {
                // the lone Nyquist mode has no mirror; keep the symbol odd
                if idx[axis] == nyquist {
                    continue;
                }
                comp[flat] = Complex64::new(0.0, wn[idx[axis]] * scale);
            }
        }
        DriftMultiplier {
            grid: grid.clone(),
            components,
            gamma,
        }
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn components(&self) -> &[Vec<Complex64>] {
        &self.components
    }

    /// Spectral coefficients of each component of `grad c`.
    pub fn apply(&self, rho_hat: &[Complex64]) -> Vec<Vec<Complex64>> {
        self.components
            .iter()
            .map(|m| m.iter().zip(rho_hat).map(|(a, b)| a * b).collect())
            .collect()
    }
}

/// `grad c` of a real density, one field per axis.
pub fn compute_drift(multiplier: &DriftMultiplier, rho: &Field) -> Result<Vec<Field>> {
    if rho.grid().spec() != multiplier.grid.spec() {
        return Err(Error::InvalidArgument(
            "density and multiplier live on different grids".into(),
        ));
    }
    Ok(multiplier
        .apply(rho.spectral())
        .into_iter()
        .map(|c| Field::from_spectral_unchecked(multiplier.grid.clone(), c))
        .collect())
}

/// Radially symmetric density used by the oracle.
pub struct RadialProfile<'a> {
    pub density: &'a (dyn Fn(f64) -> f64 + Sync),
    /// The density vanishes for `r > support`.
    pub support: f64,
}

const ORACLE_PANELS: usize = 16;
const ORACLE_NODES: usize = 48;

fn legendre() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(ORACLE_NODES).expect("degree >= 2"))
}

fn composite(a: f64, b: f64, f: &dyn Fn(f64) -> f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let rule = legendre();
    let w = (b - a) / ORACLE_PANELS as f64;
    (0..ORACLE_PANELS)
        .map(|i| {
            let lo = a + i as f64 * w;
            rule.integrate(lo, lo + w, f)
        })
        .sum()
}

/// `int_a^b f` where `f` may carry an integrable log singularity at `b`;
/// the map `s = b - (b - a) u^2` flattens it.
fn composite_singular_at_upper(a: f64, b: f64, f: &dyn Fn(f64) -> f64) -> f64 {
    let len = b - a;
    composite(0.0, 1.0, &|u| 2.0 * len * u * f(b - len * u * u))
}

fn composite_singular_at_lower(a: f64, b: f64, f: &dyn Fn(f64) -> f64) -> f64 {
    let len = b - a;
    composite(0.0, 1.0, &|u| 2.0 * len * u * f(a + len * u * u))
}

/// Whole-space radial component of `grad c` (negative points inward) for a
/// radial density, by shell integration (`d = 2`) or direct kernel quadrature
/// (`d = 1, 3`). Independent of the Fourier multiplier.
pub fn radial_drift_oracle(
    profile: &RadialProfile<'_>,
    dim: usize,
    box_length: f64,
    radii: &[f64],
) -> Result<Vec<f64>> {
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidArgument(format!(
            "dimension {dim} not in {{1,2,3}}"
        )));
    }
    let support = profile.support;
    if !(support > 0.0) || support > box_length / 2.0 {
        return Err(Error::InvalidArgument(format!(
            "support radius {support} must lie in (0, {}]",
            box_length / 2.0
        )));
    }
    let rho = profile.density;
    let peak = (0..=200)
        .map(|i| rho(support * i as f64 / 200.0))
        .fold(0.0, f64::max);
    if (0..=200).any(|i| rho(support * i as f64 / 200.0) < 0.0) {
        return Err(Error::InvalidArgument(
            "radial profile must be nonnegative".into(),
        ));
    }
    let outside = (1..=100)
        .map(|i| rho(support * (1.0 + i as f64 / 100.0)).abs())
        .fold(0.0, f64::max);
    if outside > 1e-14 * peak.max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidArgument(format!(
            "profile is {outside:.3e} beyond its declared support {support}"
        )));
    }
    Ok(radii
        .iter()
        .map(|&r| {
            let r = r.abs();
            if r == 0.0 {
                return 0.0;
            }
            match dim {
                1 => drift_1d(rho, support, r),
                2 => drift_2d(rho, support, r),
                _ => drift_3d(rho, support, r),
            }
        })
        .collect())
}

fn drift_1d(rho: &dyn Fn(f64) -> f64, support: f64, x: f64) -> f64 {
    // -(1/pi) p.v. int_0^S rho(s) 2x / (x^2 - s^2) ds, singularity subtracted
    let kernel = |s: f64| 2.0 * x / (x * x - s * s);
    if x >= support {
        let body = composite_singular_at_upper(0.0, support, &|s| rho(s) * kernel(s));
        return -body / PI;
    }
    let rx = rho(x);
    let smooth = |s: f64| (rho(s) - rx) * kernel(s);
    let inner = composite(0.0, x, &smooth) + composite(x, support, &smooth);
    let pv = ((x + support) / (support - x)).ln();
    -(inner + rx * pv) / PI
}

fn drift_2d(rho: &dyn Fn(f64) -> f64, support: f64, r: f64) -> f64 {
    // Newton: only the enclosed mass pulls, with strength m(r) / (2 pi r)
    let upper = r.min(support);
    let enclosed = composite(0.0, upper, &|s| 2.0 * PI * s * rho(s));
    -enclosed / (2.0 * PI * r)
}

/// Sphere average of `(x - y).x_hat / |x - y|^2` over `|y| = s`, `|x| = r`.
fn shell_kernel_3d(r: f64, s: f64) -> f64 {
    if s == 0.0 {
        return 1.0 / r;
    }
    let log = (2.0 * s / (r - s).abs()).ln_1p();
    let log = if s > r { ((s + r) / (s - r)).ln() } else { log };
    1.0 / (2.0 * r) + (r * r - s * s) / (4.0 * r * r * s) * log
}

fn drift_3d(rho: &dyn Fn(f64) -> f64, support: f64, r: f64) -> f64 {
    let integrand = |s: f64| 4.0 * PI * s * s * rho(s) * shell_kernel_3d(r, s);
    let total = if r < support {
        composite_singular_at_upper(0.0, r, &integrand)
            + composite_singular_at_lower(r, support, &integrand)
    } else {
        composite_singular_at_upper(0.0, support, &integrand)
    };
    -total / (3.0 * PI)
}

fn calibrated_gamma3() -> Result<f64> {
    static GAMMA3: OnceLock<std::result::Result<f64, String>> = OnceLock::new();
    GAMMA3
        .get_or_init(|| calibrate_gamma3().map_err(|e| e.to_string()))
        .clone()
        .map_err(Error::Calibration)
}

/// Least-squares fit `oracle(r) = gamma * unit(r) + lattice_slope * r`, where
/// `unit` is the grid drift with constant 1. The linear term absorbs the
/// periodic images and the removed zero mode, which perturb the drift near
/// the center by a field linear in `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFit {
    pub gamma: f64,
    pub lattice_slope: f64,
    /// Largest relative residual of the two-term fit.
    pub residual: f64,
}

pub fn calibration_fit_3d() -> Result<CalibrationFit> {
    let grid = crate::grid::make_grid(3, 64, 32.0)?;
    let gauss = |r: f64| (2.0 * PI).powf(-1.5) * (-r * r / 2.0).exp();
    let rho = Field::from_fn(grid.clone(), |x| {
        gauss((x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt())
    });
    let unit = DriftMultiplier::with_gamma(&grid, 1.0);
    let drift = compute_drift(&unit, &rho)?;
    // samples along the positive x axis through the center, r in [1, 5]
    let center = grid.n_per_axis() / 2;
    let mut radii = Vec::new();
    let mut unit_values = Vec::new();
    for j in center + 2..=center + 10 {
        radii.push(grid.coordinate(j));
        unit_values.push(drift[0].real()[grid.flatten(&[j, center, center])]);
    }
    let truncated = move |r: f64| if r <= 12.0 { gauss(r) } else { 0.0 };
    let profile = RadialProfile {
        density: &truncated,
        support: 12.0,
    };
    let oracle = radial_drift_oracle(&profile, 3, grid.box_length(), &radii)?;
    let (mut aa, mut ab, mut bb, mut ay, mut by) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((u, r), o) in unit_values.iter().zip(&radii).zip(&oracle) {
        aa += u * u;
        ab += u * r;
        bb += r * r;
        ay += u * o;
        by += r * o;
    }
    let det = aa * bb - ab * ab;
    let gamma = (ay * bb - by * ab) / det;
    let lattice_slope = (aa * by - ab * ay) / det;
    let residual = unit_values
        .iter()
        .zip(&radii)
        .zip(&oracle)
        .map(|((u, r), o)| ((gamma * u + lattice_slope * r - o) / o).abs())
        .fold(0.0, f64::max);
    Ok(CalibrationFit {
        gamma,
        lattice_slope,
        residual,
    })
}

/// Checks the closed-form 3D constant against [`calibration_fit_3d`]; fails
/// when they differ by more than [`CALIBRATION_TOLERANCE`].
pub fn calibrate_gamma3() -> Result<f64> {
    let fit = calibration_fit_3d()?;
    let expected = drift_constant(3);
    let mismatch = (fit.gamma / expected - 1.0).abs();
    if mismatch > CALIBRATION_TOLERANCE {
        return Err(Error::Calibration(format!(
            "fitted gamma_3 = {:.6} differs from {expected:.6} by {:.2}%",
            fit.gamma,
            100.0 * mismatch
        )));
    }
    Ok(expected)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HlsCheck {
    /// `||grad c||_{L^{2d}}`
    pub lhs: f64,
    /// `||rho||_{L^{2d/(2d-1)}}`
    pub rhs: f64,
    /// `lhs / rhs`, reported as 0 when both sides vanish.
    pub ratio: f64,
}

/// Both sides of `||grad c||_{L^{2d}} <= C ||rho||_{L^{2d/(2d-1)}}`.
pub fn hls_check(multiplier: &DriftMultiplier, rho: &Field) -> Result<HlsCheck> {
    let d = rho.grid().dim() as f64;
    let drift = compute_drift(multiplier, rho)?;
    let lhs = vector_lq_norm(&drift, 2.0 * d)?;
    let rhs = lq_norm(rho, 2.0 * d / (2.0 * d - 1.0))?;
    let ratio = if rhs == 0.0 { 0.0 } else { lhs / rhs };
    Ok(HlsCheck { lhs, rhs, ratio })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HlsBattery {
    pub labels: Vec<String>,
    pub checks: Vec<HlsCheck>,
    /// Supremum of the ratios: the empirical HLS constant on this battery.
    pub empirical_constant: f64,
}

pub fn hls_battery(multiplier: &DriftMultiplier, shapes: &[(String, Field)]) -> Result<HlsBattery> {
    let checks = shapes
        .iter()
        .map(|(_, f)| hls_check(multiplier, f))
        .collect::<Result<Vec<_>>>()?;
    Ok(HlsBattery {
        labels: shapes.iter().map(|(l, _)| l.clone()).collect(),
        empirical_constant: checks.iter().map(|c| c.ratio).fold(0.0, f64::max),
        checks,
    })
}
