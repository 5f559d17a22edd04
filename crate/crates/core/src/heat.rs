//! Gaussian heat kernel, the semigroup `e^{t lap}`, and the kernel
//! derivative-norm machinery.
//!
//! Norms of `D^beta d_t^k G(., t)` are never computed at general `t`.
//! The heat equation turns `d_t^k` into `lap^k`, and the substitution
//! `y = x / sqrt(t)` gives
//!
//! ```text
//! ||D^beta lap^k G(., t)||_q = t^{-(|beta|+2k)/2 - (d/2)(1-1/q)} ||D^beta lap^k G(., 1)||_q
//! ```
//!
//! so only the `t = 1` reference norm is evaluated, by spectral quadrature on
//! a dedicated box whose resolution is doubled until the value settles.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::{Arc, Mutex};

use log::warn;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{fit_line, lq_norm, lq_norm_samples};
use crate::error::{Error, Result};
use crate::grid::{check_symbol_range, Field, MultiIndex, SpectralGrid};

/// Largest `|beta| + 2k` handled by the kernel norm routines.
pub const MAX_KERNEL_ORDER: usize = 12;

/// `G(x, t) = (4 pi t)^{-d/2} exp(-|x|^2 / 4t)` as a function of `|x|^2`.
pub fn heat_kernel(dim: usize, x2: f64, t: f64) -> f64 {
    (4.0 * PI * t).powf(-(dim as f64) / 2.0) * (-x2 / (4.0 * t)).exp()
}

/// Closed-form `||G(., t)||_{L^q(R^d)} = (4 pi t)^{-(d/2)(1-1/q)} q^{-d/(2q)}`.
pub fn heat_kernel_lq_norm(dim: usize, t: f64, q: f64) -> f64 {
    let d = dim as f64;
    if q.is_infinite() {
        return (4.0 * PI * t).powf(-d / 2.0);
    }
    (4.0 * PI * t).powf(-d / 2.0 * (1.0 - 1.0 / q)) * q.powf(-d / (2.0 * q))
}

/// Samples `G(x, t)` with `x` measured from the box center. No periodic
/// images are added, so `sqrt(t)` should stay small against the box.
pub fn gaussian_kernel_values(grid: &Arc<SpectralGrid>, t: f64) -> Result<Field> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "kernel time {t} must be positive"
        )));
    }
    if 4.0 * t.sqrt() > grid.box_length() / 4.0 {
        warn!(
            "heat kernel at t = {t} is wide compared with box length {}",
            grid.box_length()
        );
    }
    let dim = grid.dim();
    Ok(Field::from_fn(grid.clone(), |x| {
        heat_kernel(dim, x.iter().map(|v| v * v).sum(), t)
    }))
}

/// Multiplies coefficients by `exp(-|xi|^2 dt)`.
pub fn apply_heat_in_place(grid: &SpectralGrid, coeffs: &mut [Complex64], dt: f64) {
    if dt == 0.0 {
        return;
    }
    for (c, &k2) in coeffs.iter_mut().zip(grid.k2()) {
        *c *= (-k2 * dt).exp();
    }
}

/// `e^{dt lap} f` as a spectral multiplier. The zero mode is untouched, so
/// mass is conserved exactly.
pub fn apply_semigroup(f: &Field, dt: f64) -> Result<Field> {
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "semigroup time {dt} must be nonnegative"
        )));
    }
    if dt == 0.0 {
        return Ok(f.clone());
    }
    let mut coeffs = f.spectral().to_vec();
    apply_heat_in_place(f.grid(), &mut coeffs, dt);
    Ok(Field::from_spectral_unchecked(f.grid().clone(), coeffs))
}

/// Exponent of `t` in `||D^beta d_t^k G(., t)||_q`.
pub fn kernel_time_exponent(dim: usize, order: usize, k: usize, q: f64) -> f64 {
    -((order + 2 * k) as f64) / 2.0 - dim as f64 / 2.0 * (1.0 - inv(q))
}

pub(crate) fn inv(q: f64) -> f64 {
    if q.is_infinite() {
        0.0
    } else {
        1.0 / q
    }
}

pub(crate) fn check_exponent(q: f64) -> Result<()> {
    if q.is_nan() || q < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "exponent q = {q} outside [1, inf]"
        )));
    }
    Ok(())
}

/// Settings of the `t = 1` reference quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelQuadrature {
    /// Side of the quadrature box; `G(., 1)` is below 1e-40 at its faces.
    pub box_length: f64,
    /// Starting resolution per axis.
    pub base_n: usize,
    /// Hard cap on `n^d`.
    pub max_points: usize,
    /// Relative change between successive doublings that counts as settled.
    pub rel_change: f64,
}

impl Default for KernelQuadrature {
    fn default() -> Self {
        KernelQuadrature {
            box_length: 40.0,
            base_n: 64,
            max_points: 1 << 22,
            rel_change: 1e-3,
        }
    }
}

/// Cache of `t = 1` reference norms `||D^beta lap^k G(., 1)||_q`.
pub struct HeatKernelNorms {
    dim: usize,
    quadrature: KernelQuadrature,
    samples: Mutex<HashMap<(MultiIndex, usize, usize), Arc<Vec<f64>>>>,
    references: Mutex<HashMap<(MultiIndex, usize, u64), ReferenceNorm>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceNorm {
    pub value: f64,
    /// Resolution per axis at which the value settled.
    pub n_per_axis: usize,
}

impl HeatKernelNorms {
    pub fn new(dim: usize) -> Self {
        Self::with_quadrature(dim, KernelQuadrature::default())
    }

    pub fn with_quadrature(dim: usize, quadrature: KernelQuadrature) -> Self {
        HeatKernelNorms {
            dim,
            quadrature,
            samples: Mutex::new(HashMap::new()),
            references: Mutex::new(HashMap::new()),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn kernel_samples(&self, beta: &MultiIndex, k: usize, n: usize) -> Result<Arc<Vec<f64>>> {
        let key = (beta.clone(), k, n);
        if let Some(s) = self.samples.lock().unwrap().get(&key) {
            return Ok(s.clone());
        }
        let grid = SpectralGrid::new(self.dim, n, self.quadrature.box_length)?;
        check_symbol_range(&grid, beta.order() + 2 * k)?;
        let symbol = grid.derivative_symbol(beta);
        let norm = 1.0 / grid.volume();
        let coeffs: Vec<Complex64> = symbol
            .iter()
            .zip(grid.k2())
            .map(|(s, &k2)| s * ((-k2).powi(k as i32) * (-k2).exp() * norm))
            .collect();
        let values = Arc::new(grid.inverse_real(&coeffs));
        self.samples.lock().unwrap().insert(key, values.clone());
        Ok(values)
    }

    /// `||D^beta lap^k G(., 1)||_q`, refined until successive doublings agree
    /// to the configured relative change.
    pub fn reference_norm(&self, beta: &MultiIndex, k: usize, q: f64) -> Result<ReferenceNorm> {
        check_exponent(q)?;
        if beta.dim() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "multi-index {beta} does not match dimension {}",
                self.dim
            )));
        }
        let order = beta.order() + 2 * k;
        if order > MAX_KERNEL_ORDER {
            return Err(Error::InvalidArgument(format!(
                "|beta| + 2k = {order} exceeds {MAX_KERNEL_ORDER}"
            )));
        }
        let key = (beta.clone(), k, q.to_bits());
        if let Some(r) = self.references.lock().unwrap().get(&key) {
            return Ok(*r);
        }
        let qd = self.quadrature;
        let norm_at = |n: usize| -> Result<f64> {
            let samples = self.kernel_samples(beta, k, n)?;
            let h = qd.box_length / n as f64;
            Ok(lq_norm_samples(&samples, h.powi(self.dim as i32), q))
        };
        let mut n = qd.base_n;
        let mut previous = norm_at(n)?;
        loop {
            let next_n = 2 * n;
            if next_n.pow(self.dim as u32) > qd.max_points {
                return Err(Error::Resolution(format!(
                    "reference norm for beta = {beta}, k = {k}, q = {q} did not settle \
                     below {} points per axis (last value {previous:.6e})",
                    n
                )));
            }
            let current = norm_at(next_n)?;
            let change = (current - previous).abs() / current.abs().max(f64::MIN_POSITIVE);
            if change < qd.rel_change {
                let r = ReferenceNorm {
                    value: current,
                    n_per_axis: next_n,
                };
                self.references.lock().unwrap().insert(key, r);
                return Ok(r);
            }
            previous = current;
            n = next_n;
        }
    }

    /// `||D^beta d_t^k G(., t)||_q` through the exact scaling identity.
    pub fn norm(&self, beta: &MultiIndex, k: usize, t: f64, q: f64) -> Result<f64> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!("time {t} must be positive")));
        }
        let reference = self.reference_norm(beta, k, q)?;
        Ok(reference.value * t.powf(kernel_time_exponent(self.dim, beta.order(), k, q)))
    }
}

/// One-off evaluation of `||D^beta d_t^k G(., t)||_q` in dimension `beta.dim()`.
pub fn kernel_derivative_norm(beta: &MultiIndex, k: usize, t: f64, q: f64) -> Result<f64> {
    HeatKernelNorms::new(beta.dim()).norm(beta, k, t, q)
}

/// Which inequality an entry of the bound report is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundFamily {
    /// `beta = 0, k = 0`: `||G(., t)||_q <= (4 pi t)^{-(d/2)(1-1/q)}`.
    Kernel,
    /// `k = 0, beta != 0`: the `C0` bound on pure space derivatives.
    SpaceDerivative,
    /// `k >= 1`: the `M0` bound on mixed space-time derivatives.
    SpaceTimeDerivative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelBoundEntry {
    pub beta: MultiIndex,
    pub k: usize,
    #[serde(with = "crate::exponent::serde_q")]
    pub q: f64,
    pub t: f64,
    pub measured_norm: f64,
    pub stated_bound: f64,
    pub ratio: f64,
    pub family: BoundFamily,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelBoundReport {
    pub dim: usize,
    pub entries: Vec<KernelBoundEntry>,
    /// `2 max{ sup_p ||grad G(.,1)||_p, sup_p ||grad^2 G(.,1)||_p }` over the tested `p`.
    pub implied_c0: f64,
    /// Smallest `C0` for which every space-derivative entry holds.
    pub minimal_c0: f64,
    /// Smallest `M0` for which every entry with `|beta| + k > 0` holds.
    pub implied_m0: f64,
    /// Max deviation of the fitted `t` exponent from the predicted one.
    pub max_exponent_error: f64,
    /// Finest resolution any reference norm needed.
    pub max_resolution: usize,
}

impl KernelBoundReport {
    pub fn max_ratio(&self) -> f64 {
        self.entries.iter().map(|e| e.ratio).fold(0.0, f64::max)
    }

    /// CSV with columns `beta,k,q,t,measured,bound,ratio`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["beta", "k", "q", "t", "measured", "bound", "ratio"])?;
        for e in &self.entries {
            w.write_record([
                e.beta.to_string(),
                e.k.to_string(),
                format_exponent(e.q),
                format!("{:.17e}", e.t),
                format!("{:.17e}", e.measured_norm),
                format!("{:.17e}", e.stated_bound),
                format!("{:.17e}", e.ratio),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn format_exponent(q: f64) -> String {
    if q.is_infinite() {
        "inf".to_string()
    } else {
        format!("{q:.17e}")
    }
}

fn space_bound_shape(dim: usize, order: usize, q: f64) -> f64 {
    let half = order as f64 / 2.0;
    half.powf(half + dim as f64 / 2.0 * (1.0 - inv(q)))
}

fn space_time_bound_shape(dim: usize, order: usize, k: usize, q: f64) -> f64 {
    let total = (order + k) as f64;
    total.powf(order as f64 / 2.0 + k as f64 + dim as f64 / 2.0 * (1.0 - inv(q)))
}

/// Checks the heat-kernel derivative bounds on every `|beta| <= beta_max`,
/// `k <= k_max`, `q` and `t` requested, with `C0` and `M0` set to the
/// smallest values consistent with the measured norms.
pub fn verify_kernel_bounds(
    norms: &HeatKernelNorms,
    beta_max: usize,
    k_max: usize,
    q_list: &[f64],
    t_list: &[f64],
) -> Result<KernelBoundReport> {
    let dim = norms.dim();
    for &q in q_list {
        check_exponent(q)?;
    }
    if t_list.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::InvalidArgument("times must be positive".into()));
    }
    if beta_max + 2 * k_max > MAX_KERNEL_ORDER {
        return Err(Error::InvalidArgument(format!(
            "beta_max + 2 k_max = {} exceeds {MAX_KERNEL_ORDER}",
            beta_max + 2 * k_max
        )));
    }
    let mut cases = Vec::new();
    for order in 0..=beta_max {
        for beta in MultiIndex::all_of_order(dim, order) {
            for k in 0..=k_max {
                for &q in q_list {
                    cases.push((beta.clone(), k, q));
                }
            }
        }
    }
    let references: Vec<ReferenceNorm> = cases
        .par_iter()
        .map(|(beta, k, q)| norms.reference_norm(beta, *k, *q))
        .collect::<Result<_>>()?;

    // C0 recipe: first and second single partials of G(., 1) over the tested p.
    let mut grad_sup: f64 = 0.0;
    let mut hess_sup: f64 = 0.0;
    for &p in q_list {
        for axis in 0..dim {
            grad_sup = grad_sup.max(
                norms
                    .reference_norm(&MultiIndex::unit(dim, axis), 0, p)?
                    .value,
            );
        }
        for beta in MultiIndex::all_of_order(dim, 2) {
            hess_sup = hess_sup.max(norms.reference_norm(&beta, 0, p)?.value);
        }
    }
    let implied_c0 = 2.0 * grad_sup.max(hess_sup);

    let mut minimal_c0: f64 = 0.0;
    let mut implied_m0: f64 = 0.0;
    for ((beta, k, q), r) in cases.iter().zip(&references) {
        let order = beta.order();
        if order + k == 0 {
            continue;
        }
        // the bound is t-independent relative to the measured norm, so t = 1 decides
        let m_needed = (r.value / space_time_bound_shape(dim, order, *k, *q))
            .powf(1.0 / (order as f64 / 2.0 + *k as f64));
        implied_m0 = implied_m0.max(m_needed);
        if *k == 0 {
            let c_needed = (r.value / space_bound_shape(dim, order, *q)).powf(2.0 / order as f64);
            minimal_c0 = minimal_c0.max(c_needed);
        }
    }
    let c0 = implied_c0.max(minimal_c0);
    if minimal_c0 > implied_c0 {
        warn!("C0 recipe {implied_c0:.6e} is below the minimal admissible {minimal_c0:.6e}");
    }

    let mut entries = Vec::with_capacity(cases.len() * t_list.len());
    let mut max_exponent_error: f64 = 0.0;
    for ((beta, k, q), r) in cases.iter().zip(&references) {
        let order = beta.order();
        let exponent = kernel_time_exponent(dim, order, *k, *q);
        let mut log_t = Vec::with_capacity(t_list.len());
        let mut log_m = Vec::with_capacity(t_list.len());
        for &t in t_list {
            let measured = r.value * t.powf(exponent);
            let (family, bound) = if order + k == 0 {
                (
                    BoundFamily::Kernel,
                    (4.0 * PI * t).powf(-(dim as f64) / 2.0 * (1.0 - inv(*q))),
                )
            } else if *k == 0 {
                (
                    BoundFamily::SpaceDerivative,
                    c0.powf(order as f64 / 2.0)
                        * space_bound_shape(dim, order, *q)
                        * t.powf(exponent),
                )
            } else {
                (
                    BoundFamily::SpaceTimeDerivative,
                    implied_m0.powf(order as f64 / 2.0 + *k as f64)
                        * space_time_bound_shape(dim, order, *k, *q)
                        * t.powf(exponent),
                )
            };
            log_t.push(t.ln());
            log_m.push(measured.ln());
            entries.push(KernelBoundEntry {
                beta: beta.clone(),
                k: *k,
                q: *q,
                t,
                measured_norm: measured,
                stated_bound: bound,
                ratio: measured / bound,
                family,
            });
        }
        if t_list.len() >= 2 {
            let fit = fit_line(&log_t, &log_m)?;
            max_exponent_error = max_exponent_error.max((fit.slope - exponent).abs());
        }
    }
    Ok(KernelBoundReport {
        dim,
        entries,
        implied_c0,
        minimal_c0,
        implied_m0,
        max_exponent_error,
        max_resolution: references.iter().map(|r| r.n_per_axis).max().unwrap_or(0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VanishingProbe {
    /// `(t, t^{(d/2)(1/p-1/q)} ||G(., t) * f||_q)`, ordered by decreasing `t`.
    pub points: Vec<(f64, f64)>,
    /// Slope of `log value` against `log t`.
    pub slope: f64,
    /// Last value (smallest `t`) below the first.
    pub decreasing: bool,
    /// `q == p`: the weight is trivial and no vanishing is expected.
    pub informational: bool,
}

/// Tracks `t^{(d/2)(1/p-1/q)} ||G(., t) * f||_q` as `t` decreases to 0.
pub fn small_time_vanishing_probe(
    f: &Field,
    p: f64,
    q: f64,
    times: &[f64],
) -> Result<VanishingProbe> {
    check_exponent(p)?;
    check_exponent(q)?;
    if q < p {
        return Err(Error::InvalidArgument(format!(
            "need q >= p, got p = {p}, q = {q}"
        )));
    }
    if times.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least two probe times".into(),
        ));
    }
    let grid = f.grid();
    let floor = 4.0 * grid.spacing() * grid.spacing();
    let horizon = grid.validity_horizon();
    let mut ts = times.to_vec();
    ts.sort_by(|a, b| b.total_cmp(a));
    for &t in &ts {
        if t < floor {
            return Err(Error::Resolution(format!(
                "probe time {t:.3e} is below the resolution floor {floor:.3e}"
            )));
        }
        if t > horizon {
            return Err(Error::InvalidArgument(format!(
                "probe time {t} is beyond the validity horizon {horizon}"
            )));
        }
    }
    let weight_exp = grid.dim() as f64 / 2.0 * (inv(p) - inv(q));
    let points = ts
        .iter()
        .map(|&t| {
            let evolved = apply_semigroup(f, t)?;
            Ok((t, t.powf(weight_exp) * lq_norm(&evolved, q)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let (lt, lv): (Vec<f64>, Vec<f64>) = points.iter().map(|(t, v)| (t.ln(), v.ln())).unzip();
    let slope = fit_line(&lt, &lv)?.slope;
    Ok(VanishingProbe {
        decreasing: points.last().unwrap().1 < points[0].1,
        points,
        slope,
        informational: q == p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn kernel_peak_is_one_at_unit_scale() {
        let g = make_grid(2, 32, 10.0).unwrap();
        let t = 1.0 / (4.0 * PI);
        let f = gaussian_kernel_values(&g, t).unwrap();
        assert!((f.max() - 1.0).abs() < 1e-14);
        assert!(f.min() >= 0.0);
    }

    #[test]
    fn kernel_value_at_two_sqrt_t() {
        let t = 0.7;
        let v = heat_kernel(3, 4.0 * t, t);
        assert!((v - (4.0 * PI * t).powf(-1.5) * (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn kernel_has_unit_mass() {
        for dim in 1..=3 {
            let g = make_grid(dim, 128, 32.0).unwrap();
            for t in [0.5f64, 1.0, 2.0] {
                assert!(t >= 4.0 * g.spacing() * g.spacing());
                let f = gaussian_kernel_values(&g, t).unwrap();
                assert!((f.integral() - 1.0).abs() < 1e-10, "d={dim} t={t}");
            }
        }
    }

    #[test]
    fn rejects_nonpositive_times() {
        let g = make_grid(1, 16, 10.0).unwrap();
        assert!(gaussian_kernel_values(&g, 0.0).is_err());
        let f = Field::zeros(g);
        assert!(apply_semigroup(&f, -1e-3).is_err());
        assert!(kernel_derivative_norm(&MultiIndex(vec![1]), 0, 0.0, 1.0).is_err());
        assert!(kernel_derivative_norm(&MultiIndex(vec![1]), 0, 1.0, 0.5).is_err());
    }

    #[test]
    fn semigroup_identity_and_composition() {
        let g = make_grid(2, 32, 12.0).unwrap();
        let f = Field::from_fn(g.clone(), |x| {
            (-(x[0] * x[0] + 2.0 * x[1] * x[1])).exp() + 0.1
        });
        assert_eq!(apply_semigroup(&f, 0.0).unwrap().real(), f.real());
        let two = apply_semigroup(&apply_semigroup(&f, 0.3).unwrap(), 0.45).unwrap();
        let one = apply_semigroup(&f, 0.75).unwrap();
        assert!(two.max_abs_diff(&one) < 1e-13);
        assert_eq!(one.spectral()[0], f.spectral()[0]);
    }

    #[test]
    fn gaussian_spreads_to_gaussian() {
        let g = make_grid(2, 64, 30.0).unwrap();
        let s = 0.5;
        let dt = 0.8;
        let start = gaussian_kernel_values(&g, s).unwrap();
        let evolved = apply_semigroup(&start, dt).unwrap();
        let exact = gaussian_kernel_values(&g, s + dt).unwrap();
        assert!(evolved.max_abs_diff(&exact) < 1e-9);
    }

    #[test]
    fn unit_mass_kernel_norm_is_one() {
        let norms = HeatKernelNorms::new(2);
        for t in [0.1, 1.0, 10.0] {
            let v = norms.norm(&MultiIndex::zero(2), 0, t, 1.0).unwrap();
            assert!((v - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn gradient_l1_norm_scales_like_inverse_sqrt_t() {
        let norms = HeatKernelNorms::new(2);
        let beta = MultiIndex(vec![1, 0]);
        let at_one = norms.norm(&beta, 0, 1.0, 1.0).unwrap();
        for t in [0.01, 0.3, 7.0] {
            let v = norms.norm(&beta, 0, t, 1.0).unwrap();
            assert!((v - t.powf(-0.5) * at_one).abs() <= 1e-14 * v);
        }
    }

    #[test]
    fn one_dimensional_total_variation_matches_quadrature() {
        // oracle: integral of |d/dx G(x,1)| by Gauss-Legendre on [0, 40], doubled
        let rule = gauss_quad::legendre::GaussLegendre::new(200).unwrap();
        let deriv = |x: f64| x / 2.0 * heat_kernel(1, x * x, 1.0);
        let oracle = 2.0 * rule.integrate(0.0, 40.0, deriv);
        assert!((oracle - PI.powf(-0.5)).abs() < 1e-12);
        let v = kernel_derivative_norm(&MultiIndex(vec![1]), 0, 1.0, 1.0).unwrap();
        assert!((v - oracle).abs() / oracle < 1e-3, "{v} vs {oracle}");
    }

    #[test]
    fn exponent_example() {
        assert_eq!(kernel_time_exponent(2, 1, 1, 2.0), -2.0);
    }

    #[test]
    fn vanishing_probe_for_smooth_datum() {
        let g = make_grid(2, 256, 40.0).unwrap();
        let f = gaussian_kernel_values(&g, 0.5).unwrap();
        let times = [1.0, 0.5, 0.25, 0.16, 0.1];
        let probe = small_time_vanishing_probe(&f, 1.0, 4.0 / 3.0, &times).unwrap();
        assert!(probe.decreasing);
        assert!(probe.slope > 0.0);
        // oracle: G(., s0) * G(., t) = G(., s0 + t), so the value is
        // t^{1/4} ||G(., s0 + t)||_{4/3}
        for (t, v) in &probe.points {
            let exact = t.powf(0.25) * heat_kernel_lq_norm(2, 0.5 + t, 4.0 / 3.0);
            assert!((v - exact).abs() < 1e-8 * exact, "t={t}: {v} vs {exact}");
        }
        let same = small_time_vanishing_probe(&f, 2.0, 2.0, &times).unwrap();
        assert!(same.informational);
        assert!(small_time_vanishing_probe(&f, 1.0, 2.0, &[1.0, 1e-4]).is_err());
    }
}
