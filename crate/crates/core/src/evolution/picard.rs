//! Fixed-point construction of the mild solution
//!
//! ```text
//! S rho(t) = G(t) * rho0 - int_0^t grad G(t - s) * [rho grad c](s) ds
//! ```
//!
//! on a geometric time mesh. Between mesh nodes the flux is interpolated by
//! local cubic Lagrange polynomials; the substitution `s = t (1 - u^2)` turns
//! the `(t - s)^{-1/2}` weight near `s = t` into a smooth integrand for a
//! composite Gauss-Legendre rule in `u`.

use gauss_quad::legendre::GaussLegendre;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::system::MpksSystem;
use super::trajectory::{AbortReason, RunStatus, Scheme, Trajectory};
use crate::diagnostics::{fit_line, lq_norm_samples, theta_functional};
use crate::error::{Error, Result};
use crate::exponent::serde_q_vec;
use crate::grid::{Field, SpectralGrid};
use crate::heat::apply_heat_in_place;

/// Consecutive non-contracting iterations tolerated before aborting.
pub const NON_CONTRACTION_PATIENCE: usize = 3;

/// Default smallness gate on the measured theta. Tuned by bisection on the
/// contraction outcome for Gaussian data on `(0, 1/2]`: iteration converges
/// within 15 steps up to theta ~ 5.7 and stops contracting near 11.
pub const DEFAULT_THETA_GATE: f64 = 5.0;

/// Gauss points per panel of the composite rule.
const PANEL_NODES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PicardOptions {
    pub max_iters: usize,
    pub tol: f64,
    /// Geometric mesh nodes in `[mesh_start * T, T]`; `t = 0` is added.
    pub mesh_nodes: usize,
    pub mesh_start: f64,
    pub quad_nodes: usize,
    /// Extra times forced into the mesh.
    pub output_times: Vec<f64>,
    #[serde(with = "serde_q_vec")]
    pub q_list: Vec<f64>,
    /// Refuse to iterate when the measured theta exceeds this.
    pub theta_gate: Option<f64>,
    pub quadrature_tolerance: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions {
            max_iters: 30,
            tol: 1e-8,
            mesh_nodes: 80,
            mesh_start: 1e-4,
            quad_nodes: 32,
            output_times: Vec::new(),
            q_list: vec![1.0, 2.0, f64::INFINITY],
            theta_gate: Some(DEFAULT_THETA_GATE),
            quadrature_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardDiagnostics {
    pub interval: (f64, f64),
    /// `||rho^(m+1) - rho^(m)||_{X_T}`, one per iteration.
    pub iterate_gaps: Vec<f64>,
    pub contraction_ratios: Vec<f64>,
    /// `sup_t t^{1/4} ||G(t) * rho0||_{L^{2d/(2d-1)}}` over the mesh.
    pub theta_measured: f64,
    pub theta_gate: Option<f64>,
    pub converged: bool,
    pub abort_reason: Option<String>,
    /// Full rule against the half rule at the last node, in `L^inf`.
    pub quadrature_error: f64,
    pub mesh: Vec<f64>,
}

impl PicardDiagnostics {
    /// `exp` of the least-squares slope of `log gap` against the iteration
    /// count, over the positive gaps.
    pub fn fitted_ratio(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .iterate_gaps
            .iter()
            .enumerate()
            .filter(|(_, g)| **g > 0.0 && g.is_finite())
            .map(|(i, g)| (i as f64, g.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        fit_line(&x, &y).ok().map(|f| f.slope.exp())
    }
}

/// `u` nodes and weights of the composite rule on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct DuhamelQuadrature {
    nodes: Vec<(f64, f64)>,
}

impl DuhamelQuadrature {
    pub fn new(quad_nodes: usize) -> Result<Self> {
        if quad_nodes < 2 {
            return Err(Error::Quadrature(format!(
                "need at least 2 nodes, got {quad_nodes}"
            )));
        }
        let panels = (quad_nodes / PANEL_NODES).max(1);
        let per_panel = quad_nodes / panels;
        let rule = GaussLegendre::new(per_panel).map_err(|e| Error::Quadrature(e.to_string()))?;
        let width = 1.0 / panels as f64;
        let mut nodes = Vec::with_capacity(panels * per_panel);
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * width;
            for (x, w) in rule.as_node_weight_pairs() {
                nodes.push((mid + 0.5 * width * x, 0.5 * width * w));
            }
        }
        Ok(DuhamelQuadrature { nodes })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Cubic Lagrange stencil on `mesh` for the point `s`.
fn stencil(mesh: &[f64], s: f64) -> ([usize; 4], [f64; 4]) {
    let m = mesh.len();
    let a = mesh.partition_point(|&t| t <= s).saturating_sub(1);
    let start = a.saturating_sub(1).min(m - 4);
    let idx = [start, start + 1, start + 2, start + 3];
    let mut w = [1.0; 4];
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                w[i] *= (s - mesh[idx[j]]) / (mesh[idx[i]] - mesh[idx[j]]);
            }
        }
    }
    (idx, w)
}

/// `e^{-tau |xi|^2}` for every mode, assembled from per-axis factors.
fn heat_factors(grid: &SpectralGrid, tau: f64, out: &mut [f64]) {
    let axis: Vec<f64> = grid
        .axis_wavenumbers()
        .iter()
        .map(|k| (-tau * k * k).exp())
        .collect();
    let n = grid.n_per_axis();
    match grid.dim() {
        1 => out.copy_from_slice(&axis),
        2 => {
            for (i, row) in out.chunks_exact_mut(n).enumerate() {
                for (o, b) in row.iter_mut().zip(&axis) {
                    *o = axis[i] * b;
                }
            }
        }
        _ => {
            for (i, plane) in out.chunks_exact_mut(n * n).enumerate() {
                for (j, row) in plane.chunks_exact_mut(n).enumerate() {
                    let ab = axis[i] * axis[j];
                    for (o, c) in row.iter_mut().zip(&axis) {
                        *o = ab * c;
                    }
                }
            }
        }
    }
}

/// `int_0^t e^{(t-s) lap} F(s) ds` with `F` interpolated from mesh values.
fn duhamel_integral(
    grid: &SpectralGrid,
    mesh: &[f64],
    fluxes: &[Vec<Complex64>],
    t: f64,
    quad: &DuhamelQuadrature,
) -> Vec<Complex64> {
    let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
    if t == 0.0 {
        return acc;
    }
    let mut factors = vec![0.0; grid.len()];
    for &(u, w) in &quad.nodes {
        let tau = t * u * u;
        let s = t - tau;
        let weight = 2.0 * t * u * w;
        heat_factors(grid, tau, &mut factors);
        let (idx, l) = stencil(mesh, s);
        let (f0, f1, f2, f3) = (
            &fluxes[idx[0]],
            &fluxes[idx[1]],
            &fluxes[idx[2]],
            &fluxes[idx[3]],
        );
        for k in 0..acc.len() {
            let f = f0[k] * l[0] + f1[k] * l[1] + f2[k] * l[2] + f3[k] * l[3];
            acc[k] += f * (weight * factors[k]);
        }
    }
    acc
}

/// One application of `S` at every mesh node.
fn duhamel_map(
    system: &MpksSystem,
    mesh: &[f64],
    states: &[Vec<Complex64>],
    rho0_hat: &[Complex64],
    quad: &DuhamelQuadrature,
) -> Vec<Vec<Complex64>> {
    let grid = system.grid();
    let fluxes: Option<Vec<Vec<Complex64>>> = system.drift_enabled().then(|| {
        states
            .par_iter()
            .map(|s| system.flux_divergence(s))
            .collect()
    });
    mesh.par_iter()
        .map(|&t| {
            let mut out = rho0_hat.to_vec();
            apply_heat_in_place(grid, &mut out, t);
            if let Some(fluxes) = &fluxes {
                let integral = duhamel_integral(grid, mesh, fluxes, t, quad);
                for (o, i) in out.iter_mut().zip(integral) {
                    *o -= i;
                }
            }
            out
        })
        .collect()
}

/// `max(sup ||a - b||_1, sup t^{1/4} ||a - b||_{2d/(2d-1)})` over mesh nodes
/// with `t > 0`.
fn xt_gap(grid: &SpectralGrid, mesh: &[f64], a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> f64 {
    let d = grid.dim() as f64;
    let p = 2.0 * d / (2.0 * d - 1.0);
    let cell = grid.cell_volume();
    mesh.par_iter()
        .zip(a.par_iter().zip(b.par_iter()))
        .filter(|(t, _)| **t > 0.0)
        .map(|(&t, (x, y))| {
            let diff: Vec<Complex64> = x.iter().zip(y).map(|(u, v)| u - v).collect();
            let real = grid.inverse_real(&diff);
            let l1 = lq_norm_samples(&real, cell, 1.0);
            let lp = t.powf(0.25) * lq_norm_samples(&real, cell, p);
            if l1.is_nan() || lp.is_nan() {
                f64::INFINITY
            } else {
                l1.max(lp)
            }
        })
        .reduce(|| 0.0, f64::max)
}

/// `X_T` distance between two trajectories over their shared positive
/// snapshot times.
pub fn xt_distance(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    let grid = a.grid.clone();
    let mut mesh = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for s in &a.snapshots {
        if s.time > 0.0 {
            if let Some(o) = b.snapshot_at(s.time) {
                mesh.push(s.time);
                xs.push(s.field.spectral().to_vec());
                ys.push(o.field.spectral().to_vec());
            }
        }
    }
    if mesh.is_empty() {
        return Err(Error::InvalidArgument(
            "trajectories share no positive snapshot times".into(),
        ));
    }
    Ok(xt_gap(&grid, &mesh, &xs, &ys))
}

fn build_mesh(t_final: f64, options: &PicardOptions) -> Result<Vec<f64>> {
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "final time {t_final} must be positive"
        )));
    }
    if options.mesh_nodes < 3 || !(options.mesh_start > 0.0 && options.mesh_start < 1.0) {
        return Err(Error::InvalidArgument(
            "mesh needs >= 3 nodes and a start fraction in (0, 1)".into(),
        ));
    }
    let mut mesh = vec![0.0];
    mesh.extend(super::etd::geometric_times(
        options.mesh_start * t_final,
        t_final,
        options.mesh_nodes,
    ));
    for &t in &options.output_times {
        if !(t > 0.0 && t <= t_final) {
            return Err(Error::InvalidArgument(format!(
                "output time {t} outside (0, {t_final}]"
            )));
        }
        mesh.push(t);
    }
    mesh.sort_by(f64::total_cmp);
    mesh.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs());
    Ok(mesh)
}

fn to_trajectory(
    system: &MpksSystem,
    mesh: &[f64],
    states: Vec<Vec<Complex64>>,
    q_list: &[f64],
    scheme: Scheme,
) -> Trajectory {
    let grid = system.grid().clone();
    let mut traj = Trajectory::new(
        grid.clone(),
        scheme,
        system.drift_enabled(),
        q_list.to_vec(),
    );
    for (&t, s) in mesh.iter().zip(states) {
        let field = Field::from_spectral_unchecked(grid.clone(), s);
        traj.record(t, field.real(), field.spectral());
        traj.push_snapshot(t, field);
    }
    traj
}

fn quadrature_error(
    system: &MpksSystem,
    mesh: &[f64],
    states: &[Vec<Complex64>],
    quad: &DuhamelQuadrature,
) -> Result<f64> {
    if !system.drift_enabled() {
        return Ok(0.0);
    }
    let grid = system.grid();
    let half = DuhamelQuadrature::new((quad.len() / 2).max(2))?;
    let fluxes: Vec<Vec<Complex64>> = states
        .par_iter()
        .map(|s| system.flux_divergence(s))
        .collect();
    let t = *mesh.last().unwrap();
    let full = duhamel_integral(grid, mesh, &fluxes, t, quad);
    let coarse = duhamel_integral(grid, mesh, &fluxes, t, &half);
    let diff: Vec<Complex64> = full.iter().zip(&coarse).map(|(a, b)| a - b).collect();
    Ok(grid
        .inverse_real(&diff)
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max))
}

/// Applies the Duhamel map to a path given by the snapshots of `rho_path`
/// on `[0, t_final]`; the output lives on the same times.
pub fn duhamel_apply(
    system: &MpksSystem,
    rho_path: &Trajectory,
    rho0: &Field,
    t_final: f64,
    quad_nodes: usize,
) -> Result<Trajectory> {
    let mut mesh = Vec::new();
    let mut states = Vec::new();
    for s in &rho_path.snapshots {
        if s.time <= t_final * (1.0 + 1e-12) {
            mesh.push(s.time);
            states.push(s.field.spectral().to_vec());
        }
    }
    if mesh.len() < 4 || mesh[0] != 0.0 || (mesh.last().unwrap() - t_final).abs() > 1e-9 * t_final {
        return Err(Error::InvalidArgument(
            "path needs at least 4 snapshots spanning [0, T], starting at t = 0".into(),
        ));
    }
    let quad = DuhamelQuadrature::new(quad_nodes)?;
    let next = duhamel_map(system, &mesh, &states, rho0.spectral(), &quad);
    let err = quadrature_error(system, &mesh, &states, &quad)?;
    let mut traj = to_trajectory(system, &mesh, next, &rho_path.q_list, Scheme::Picard);
    let tolerance = PicardOptions::default().quadrature_tolerance;
    if err > tolerance {
        traj.warn(format!(
            "Duhamel quadrature error estimate {err:.3e} exceeds {tolerance:.1e}"
        ));
    }
    Ok(traj)
}

/// Picard iteration `rho^(0) = G * rho0`, `rho^(m+1) = S rho^(m)` on `(0, T]`.
///
/// Non-contraction (three consecutive gap ratios `>= 1`, or a non-finite gap)
/// ends the run with an aborted trajectory and `converged = false`.
pub fn picard_solve(
    system: &MpksSystem,
    rho0: &Field,
    t_final: f64,
    options: &PicardOptions,
) -> Result<(Trajectory, PicardDiagnostics)> {
    let grid = system.grid().clone();
    if rho0.grid().spec() != grid.spec() {
        return Err(Error::InvalidArgument(
            "initial datum lives on a different grid".into(),
        ));
    }
    if rho0.min() < 0.0 {
        return Err(Error::InvalidArgument(
            "initial datum must be nonnegative".into(),
        ));
    }
    if !(options.tol > 0.0) || options.max_iters == 0 {
        return Err(Error::InvalidArgument(
            "need tol > 0 and max_iters >= 1".into(),
        ));
    }
    let mesh = build_mesh(t_final, options)?;
    let quad = DuhamelQuadrature::new(options.quad_nodes)?;

    let d = grid.dim() as f64;
    let floor = 4.0 * grid.spacing() * grid.spacing();
    let theta_times: Vec<f64> = mesh
        .iter()
        .copied()
        .filter(|&t| t >= floor.min(t_final))
        .collect();
    let theta = theta_functional(rho0, t_final, &[2.0 * d / (2.0 * d - 1.0)], &theta_times)?;
    let theta_measured = theta.entries[0].supremum;
    let mut diag = PicardDiagnostics {
        interval: (0.0, t_final),
        iterate_gaps: Vec::new(),
        contraction_ratios: Vec::new(),
        theta_measured,
        theta_gate: options.theta_gate,
        converged: false,
        abort_reason: None,
        quadrature_error: 0.0,
        mesh: mesh.clone(),
    };
    if let Some(gate) = options.theta_gate {
        if theta_measured > gate {
            return Err(Error::NonContraction(format!(
                "measured theta {theta_measured:.4} exceeds the smallness gate {gate:.4}"
            )));
        }
    }

    let rho0_hat = rho0.spectral();
    let mut states: Vec<Vec<Complex64>> = mesh
        .iter()
        .map(|&t| {
            let mut s = rho0_hat.to_vec();
            apply_heat_in_place(&grid, &mut s, t);
            s
        })
        .collect();
    let mut streak = 0;
    for _ in 0..options.max_iters {
        let next = duhamel_map(system, &mesh, &states, rho0_hat, &quad);
        let gap = xt_gap(&grid, &mesh, &next, &states);
        states = next;
        if let Some(&prev) = diag.iterate_gaps.last() {
            let ratio = gap / prev;
            diag.contraction_ratios.push(ratio);
            streak = if ratio >= 1.0 || ratio.is_nan() {
                streak + 1
            } else {
                0
            };
        }
        diag.iterate_gaps.push(gap);
        log::debug!(
            "picard iteration {}: gap {gap:.3e}",
            diag.iterate_gaps.len()
        );
        if gap < options.tol {
            diag.converged = true;
            break;
        }
        if !gap.is_finite() {
            diag.abort_reason = Some("iterate gap is not finite".into());
            break;
        }
        if streak >= NON_CONTRACTION_PATIENCE {
            diag.abort_reason = Some(format!(
                "gap ratios >= 1 for {NON_CONTRACTION_PATIENCE} consecutive iterations"
            ));
            break;
        }
    }
    if !diag.converged && diag.abort_reason.is_none() {
        diag.abort_reason = Some(format!(
            "no convergence to {:.1e} within {} iterations",
            options.tol, options.max_iters
        ));
    }
    let finite = states
        .iter()
        .all(|s| s.iter().all(|c| c.re.is_finite() && c.im.is_finite()));
    if finite {
        diag.quadrature_error = quadrature_error(system, &mesh, &states, &quad)?;
    } else {
        diag.quadrature_error = f64::NAN;
    }
    let mut traj = to_trajectory(system, &mesh, states, &options.q_list, Scheme::Picard);
    if diag.quadrature_error > options.quadrature_tolerance {
        traj.warn(format!(
            "Duhamel quadrature error estimate {:.3e} exceeds {:.1e}",
            diag.quadrature_error, options.quadrature_tolerance
        ));
    }
    if let Some(reason) = &diag.abort_reason {
        traj.status = RunStatus::Aborted {
            reason: AbortReason::NonContraction,
            time: t_final,
            detail: reason.clone(),
        };
    }
    Ok((traj, diag))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_integrates_polynomials_in_u() {
        let q = DuhamelQuadrature::new(32).unwrap();
        assert_eq!(q.len(), 32);
        let sum: f64 = q.nodes.iter().map(|(u, w)| w * u.powi(7)).sum();
        assert!((sum - 0.125).abs() < 1e-15);
        // int_0^t (t - s)^{-1/2} ds = 2 sqrt(t), exact after the substitution
        let t = 0.7;
        let s: f64 = q
            .nodes
            .iter()
            .map(|(u, w)| 2.0 * t * u * w / (t * u * u).sqrt())
            .sum();
        assert!((s - 2.0 * t.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn stencil_reproduces_cubics() {
        let mesh = [0.0, 0.1, 0.25, 0.5, 0.9, 1.4];
        let p = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t - 3.0 * t * t * t;
        for s in [0.0, 0.05, 0.3, 0.77, 1.4] {
            let (idx, w) = stencil(&mesh, s);
            let v: f64 = idx.iter().zip(w).map(|(&i, w)| w * p(mesh[i])).sum();
            assert!((v - p(s)).abs() < 1e-13);
        }
    }

    #[test]
    fn fitted_ratio_of_geometric_sequence() {
        let diag = PicardDiagnostics {
            interval: (0.0, 1.0),
            iterate_gaps: vec![1.0, 0.3, 0.09, 0.027],
            contraction_ratios: vec![0.3; 3],
            theta_measured: 0.0,
            theta_gate: None,
            converged: true,
            abort_reason: None,
            quadrature_error: 0.0,
            mesh: vec![],
        };
        assert!((diag.fitted_ratio().unwrap() - 0.3).abs() < 1e-12);
    }
}
