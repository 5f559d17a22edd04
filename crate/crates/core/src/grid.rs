//! Periodic box discretization of R^d and the transform primitives built on it.
//!
//! # Transform convention
//!
//! Grid points are `x_j = -L/2 + j h` on every axis, so the origin of R^d sits
//! at index `n/2` and the box is centered on it. The forward transform is the
//! normalized DFT
//!
//! ```text
//! c_m = (1/N) * sum_j f(x_j) * exp(-2 pi i m.j / n),      N = n^d
//! ```
//!
//! so the zero mode equals the box mean `(1/L^d) * integral f`. Phases are
//! referenced to the first grid point, which is irrelevant to every multiplier
//! used in this crate (they depend on `xi` only). The inverse is the plain sum
//! `f(x_j) = sum_m c_m exp(2 pi i m.j / n)`, and Plancherel reads
//! `h^d sum |f|^2 = L^d sum |c|^2`.
//!
//! Wavenumbers on each axis are `xi = 2 pi m / L` for `m` in `{-n/2, .., n/2-1}`.
//! The Nyquist mode `m = -n/2` has no partner; odd-order symbols are zeroed
//! there so real fields stay real.

use std::cell::RefCell;
use std::fmt;
use std::sync::{Arc, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest derivative order accepted by [`spectral_derivative`] unless a
/// caller passes its own limit.
pub const DEFAULT_MAX_DERIVATIVE_ORDER: usize = 12;

/// Relative tolerance on Hermitian symmetry when a real field is demanded.
pub const HERMITIAN_TOLERANCE: f64 = 1e-9;

/// Plain description of a grid, used in configs and on-disk headers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub n_per_axis: usize,
    pub box_length: f64,
}

/// Multi-index `beta` in N^d.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    /// Unit multi-index along `axis`.
    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut v = vec![0; dim];
        v[axis] = 1;
        MultiIndex(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `|beta|`.
    pub fn order(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&b| b == 0)
    }

    /// `beta!` as a float.
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&b| factorial(b)).product()
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Every multi-index of dimension `dim` with `|beta| == order`, in
    /// lexicographic order.
    pub fn all_of_order(dim: usize, order: usize) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        let mut current = vec![0; dim];
        fill_of_order(&mut current, 0, order, &mut out);
        out
    }

    /// Every `gamma <= self` componentwise.
    pub fn sub_indices(&self) -> Vec<MultiIndex> {
        let mut out = vec![MultiIndex(Vec::with_capacity(self.dim()))];
        for &k in &self.0 {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (0..=k).map(move |b| {
                        let mut next = prefix.0.clone();
                        next.push(b);
                        MultiIndex(next)
                    })
                })
                .collect();
        }
        out
    }
}

fn fill_of_order(
    current: &mut Vec<usize>,
    axis: usize,
    remaining: usize,
    out: &mut Vec<MultiIndex>,
) {
    if axis + 1 == current.len() {
        current[axis] = remaining;
        out.push(MultiIndex(current.clone()));
        return;
    }
    for b in (0..=remaining).rev() {
        current[axis] = b;
        fill_of_order(current, axis + 1, remaining - b, out);
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, b) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{b}")?;
        }
        write!(f, ")")
    }
}

impl std::str::FromStr for MultiIndex {
    type Err = Error;

    /// Accepts `(1,0)`, `1,0` or `1;0`.
    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim().trim_start_matches('(').trim_end_matches(')');
        if trimmed.is_empty() {
            return Err(Error::InvalidArgument(format!("empty multi-index '{s}'")));
        }
        trimmed
            .split([',', ';'])
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidArgument(format!("bad multi-index '{s}'")))
            })
            .collect::<Result<Vec<_>>>()
            .map(MultiIndex)
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// Cache-blocked transpose of a `rows x cols` row-major matrix.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const TILE: usize = 16;
    for r0 in (0..rows).step_by(TILE) {
        for c0 in (0..cols).step_by(TILE) {
            for r in r0..(r0 + TILE).min(rows) {
                for c in c0..(c0 + TILE).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// Truncated periodic discretization of R^d with cached FFT plans.
pub struct SpectralGrid {
    dim: usize,
    n: usize,
    box_length: f64,
    spacing: f64,
    /// Integer mode number per axis index, `m` in `{-n/2, .., n/2-1}`.
    modes: Vec<i64>,
    /// `xi = 2 pi m / L` per axis index.
    wavenumbers: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    k2: OnceLock<Vec<f64>>,
    dealias_mask: OnceLock<Vec<bool>>,
    negation: OnceLock<Vec<usize>>,
    tail_mask: OnceLock<Vec<bool>>,
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("dim", &self.dim)
            .field("n_per_axis", &self.n)
            .field("box_length", &self.box_length)
            .field("spacing", &self.spacing)
            .finish()
    }
}

impl PartialEq for SpectralGrid {
    fn eq(&self, other: &Self) -> bool {
        self.spec() == other.spec()
    }
}

/// Builds a grid; rejects odd or too small `n`, `dim` outside `{1,2,3}` and
/// nonpositive box lengths.
pub fn make_grid(dim: usize, n_per_axis: usize, box_length: f64) -> Result<Arc<SpectralGrid>> {
    SpectralGrid::new(dim, n_per_axis, box_length).map(Arc::new)
}

impl SpectralGrid {
    pub fn new(dim: usize, n_per_axis: usize, box_length: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!(
                "dimension {dim} not in {{1,2,3}}"
            )));
        }
        if n_per_axis % 2 != 0 || n_per_axis < 8 {
            return Err(Error::InvalidGrid(format!(
                "n_per_axis = {n_per_axis} must be even and at least 8"
            )));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "box length {box_length} must be positive"
            )));
        }
        let n = n_per_axis;
        let modes: Vec<i64> = (0..n)
            .map(|j| {
                if j < n / 2 {
                    j as i64
                } else {
                    j as i64 - n as i64
                }
            })
            .collect();
        let wavenumbers = modes
            .iter()
            .map(|&m| 2.0 * std::f64::consts::PI * m as f64 / box_length)
            .collect();
        let mut planner = FftPlanner::new();
        Ok(SpectralGrid {
            dim,
            n,
            box_length,
            spacing: box_length / n as f64,
            modes,
            wavenumbers,
            fft: planner.plan_fft_forward(n),
            ifft: planner.plan_fft_inverse(n),
            k2: OnceLock::new(),
            dealias_mask: OnceLock::new(),
            negation: OnceLock::new(),
            tail_mask: OnceLock::new(),
        })
    }

    pub fn from_spec(spec: GridSpec) -> Result<Arc<Self>> {
        make_grid(spec.dim, spec.n_per_axis, spec.box_length)
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            dim: self.dim,
            n_per_axis: self.n,
            box_length: self.box_length,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_per_axis(&self) -> usize {
        self.n
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// `h^d`, the quadrature weight of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.box_length.powi(self.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Wavenumbers of one axis in storage order (0, 1, .., n/2-1, -n/2, .., -1).
    pub fn axis_wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Wavenumbers sorted ascending, `{-n/2, .., n/2-1} * 2 pi / L`.
    pub fn sorted_wavenumbers(&self) -> Vec<f64> {
        let mut w = self.wavenumbers.clone();
        w.sort_by(f64::total_cmp);
        w
    }

    pub fn axis_modes(&self) -> &[i64] {
        &self.modes
    }

    /// Largest `|xi|` on one axis (the Nyquist wavenumber).
    pub fn max_wavenumber(&self) -> f64 {
        std::f64::consts::PI * self.n as f64 / self.box_length
    }

    /// Coordinate of axis index `j`.
    pub fn coordinate(&self, j: usize) -> f64 {
        -0.5 * self.box_length + j as f64 * self.spacing
    }

    /// Decomposes a flat row-major index into per-axis indices.
    pub fn unflatten(&self, mut flat: usize, out: &mut [usize]) {
        for axis in (0..self.dim).rev() {
            out[axis] = flat % self.n;
            flat /= self.n;
        }
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    /// Flat index of the mode `-xi` for the mode at `flat`.
    pub fn negated_index(&self, flat: usize) -> usize {
        let mut idx = [0usize; 3];
        self.unflatten(flat, &mut idx[..self.dim]);
        for i in idx[..self.dim].iter_mut() {
            *i = (self.n - *i) % self.n;
        }
        self.flatten(&idx[..self.dim])
    }

    /// Physical coordinates of every grid point, in flat order.
    pub fn points(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        (0..self.len()).map(move |flat| {
            let mut idx = [0usize; 3];
            self.unflatten(flat, &mut idx[..self.dim]);
            let mut x = [0.0; 3];
            for a in 0..self.dim {
                x[a] = self.coordinate(idx[a]);
            }
            x
        })
    }

    /// Wavevectors of every mode, in flat order.
    pub fn wavevectors(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        (0..self.len()).map(move |flat| {
            let mut idx = [0usize; 3];
            self.unflatten(flat, &mut idx[..self.dim]);
            let mut xi = [0.0; 3];
            for a in 0..self.dim {
                xi[a] = self.wavenumbers[idx[a]];
            }
            xi
        })
    }

    /// `|xi|^2` for every mode, cached.
    pub fn k2(&self) -> &[f64] {
        self.k2.get_or_init(|| {
            self.wavevectors()
                .map(|xi| xi[..self.dim].iter().map(|v| v * v).sum())
                .collect()
        })
    }

    /// `true` where a mode survives the 2/3 rule (every axis `|m| <= n/3`).
    pub fn dealias_mask(&self) -> &[bool] {
        self.dealias_mask.get_or_init(|| {
            let cutoff = self.n as i64 / 3;
            (0..self.len())
                .map(|flat| {
                    let mut idx = [0usize; 3];
                    self.unflatten(flat, &mut idx[..self.dim]);
                    idx[..self.dim]
                        .iter()
                        .all(|&i| self.modes[i].abs() <= cutoff)
                })
                .collect()
        })
    }

    /// Zeroes every mode outside the 2/3 band.
    pub fn dealias_in_place(&self, coeffs: &mut [Complex64]) {
        for (c, &keep) in coeffs.iter_mut().zip(self.dealias_mask()) {
            if !keep {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// Latest time at which whole-space decay laws are trusted on this box:
    /// `4 sqrt(t) <= L / 4`. Later, diffusion feels the periodic images.
    pub fn validity_horizon(&self) -> f64 {
        (self.box_length / 16.0).powi(2)
    }

    /// Fraction of spectral energy in the top third of the retained band
    /// and beyond (some axis with `|m| > 2n/9`). The evolution dealiases
    /// every product, so this is where loss of resolution first shows.
    pub fn tail_energy_fraction(&self, coeffs: &[Complex64]) -> f64 {
        let mask = self.tail_mask.get_or_init(|| {
            let cutoff = 2 * self.n as i64 / 9;
            (0..self.len())
                .map(|flat| {
                    let mut idx = [0usize; 3];
                    self.unflatten(flat, &mut idx[..self.dim]);
                    idx[..self.dim]
                        .iter()
                        .any(|&i| self.modes[i].abs() > cutoff)
                })
                .collect()
        });
        let mut total = 0.0;
        let mut tail = 0.0;
        for (c, &in_tail) in coeffs.iter().zip(mask) {
            let e = c.norm_sqr();
            total += e;
            if in_tail {
                tail += e;
            }
        }
        if total > 0.0 {
            tail / total
        } else {
            0.0
        }
    }

    fn fft_nd(&self, data: &mut [Complex64], inverse: bool) {
        thread_local! {
            static BUFFERS: RefCell<(Vec<Complex64>, Vec<Complex64>)> = const { RefCell::new((Vec::new(), Vec::new())) };
        }
        let plan = if inverse { &self.ifft } else { &self.fft };
        let n = self.n;
        let total = data.len();
        BUFFERS.with_borrow_mut(|(lines, scratch)| {
            scratch.resize(plan.get_inplace_scratch_len(), Complex64::new(0.0, 0.0));
            if self.dim > 1 {
                lines.resize(total, Complex64::new(0.0, 0.0));
            }
            for axis in 0..self.dim {
                let stride = n.pow((self.dim - 1 - axis) as u32);
                if stride == 1 {
                    plan.process_with_scratch(data, scratch);
                    continue;
                }
                // each block is an n x stride matrix; transpose so the axis is contiguous
                let block = n * stride;
                let lines = &mut lines[..total];
                for (src, dst) in data.chunks_exact(block).zip(lines.chunks_exact_mut(block)) {
                    transpose(src, dst, n, stride);
                }
                plan.process_with_scratch(lines, scratch);
                for (src, dst) in lines.chunks_exact(block).zip(data.chunks_exact_mut(block)) {
                    transpose(src, dst, stride, n);
                }
            }
        });
    }

    /// Flat index of `-xi` for every flat index of `xi`.
    fn negation(&self) -> &[usize] {
        self.negation
            .get_or_init(|| (0..self.len()).map(|f| self.negated_index(f)).collect())
    }

    /// Two real inverse transforms for the price of one complex transform;
    /// both inputs must be Hermitian.
    pub fn inverse_real_pair(&self, a: &[Complex64], b: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        assert!(
            a.len() == self.len() && b.len() == self.len(),
            "coefficient count does not match grid"
        );
        let i = Complex64::new(0.0, 1.0);
        let mut data: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x + i * y).collect();
        self.fft_nd(&mut data, true);
        data.into_iter().map(|c| (c.re, c.im)).unzip()
    }

    /// Two normalized real forward transforms through one complex transform,
    /// separated by conjugate symmetry.
    pub fn forward_pair(&self, x: &[f64], y: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        assert!(
            x.len() == self.len() && y.len() == self.len(),
            "sample count does not match grid"
        );
        let mut data: Vec<Complex64> = x
            .iter()
            .zip(y)
            .map(|(a, b)| Complex64::new(*a, *b))
            .collect();
        self.fft_nd(&mut data, false);
        let scale = 0.5 / self.len() as f64;
        let neg = self.negation();
        let mut fx = Vec::with_capacity(data.len());
        let mut fy = Vec::with_capacity(data.len());
        for (z, &m) in data.iter().zip(neg) {
            let w = data[m].conj();
            fx.push((z + w) * scale);
            fy.push(Complex64::new(0.0, -1.0) * (z - w) * scale);
        }
        (fx, fy)
    }

    /// Normalized forward transform of real samples.
    pub fn forward(&self, samples: &[f64]) -> Vec<Complex64> {
        assert_eq!(
            samples.len(),
            self.len(),
            "sample count does not match grid"
        );
        let mut data: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft_nd(&mut data, false);
        let scale = 1.0 / self.len() as f64;
        for c in data.iter_mut() {
            *c *= scale;
        }
        data
    }

    /// Inverse transform keeping the full complex result.
    pub fn inverse_complex(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(
            coeffs.len(),
            self.len(),
            "coefficient count does not match grid"
        );
        let mut data = coeffs.to_vec();
        self.fft_nd(&mut data, true);
        data
    }

    /// Inverse transform returning the real part; callers guarantee symmetry.
    pub fn inverse_real(&self, coeffs: &[Complex64]) -> Vec<f64> {
        self.inverse_complex(coeffs)
            .into_iter()
            .map(|c| c.re)
            .collect()
    }

    /// Max deviation from `c(-xi) = conj(c(xi))`, relative to the largest
    /// coefficient.
    pub fn hermitian_asymmetry(&self, coeffs: &[Complex64]) -> f64 {
        let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for (flat, c) in coeffs.iter().enumerate() {
            let partner = coeffs[self.negated_index(flat)];
            worst = worst.max((partner - c.conj()).norm());
        }
        worst / scale
    }

    /// Symbol `prod_j (i xi_j)^{beta_j}`, with the Nyquist mode dropped on
    /// every axis of odd order.
    pub fn derivative_symbol(&self, beta: &MultiIndex) -> Vec<Complex64> {
        assert_eq!(beta.dim(), self.dim, "multi-index dimension mismatch");
        let nyquist = self.n / 2;
        let mut idx = [0usize; 3];
        (0..self.len())
            .map(|flat| {
                self.unflatten(flat, &mut idx[..self.dim]);
                let mut s = Complex64::new(1.0, 0.0);
                for a in 0..self.dim {
                    let b = beta.0[a];
                    if b == 0 {
                        continue;
                    }
                    if b % 2 == 1 && idx[a] == nyquist {
                        return Complex64::new(0.0, 0.0);
                    }
                    s *= Complex64::new(0.0, self.wavenumbers[idx[a]]).powu(b as u32);
                }
                s
            })
            .collect()
    }
}

/// A real scalar function sampled on a grid.
///
/// Both representations are derived lazily and cached; a field never changes
/// after construction, so it may be shared freely between threads.
#[derive(Clone)]
pub struct Field {
    grid: Arc<SpectralGrid>,
    real: OnceLock<Vec<f64>>,
    spectral: OnceLock<Vec<Complex64>>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("grid", &self.grid)
            .field("real_current", &self.is_real_current())
            .field("spectral_current", &self.is_spectral_current())
            .finish()
    }
}

impl Field {
    pub fn from_real(grid: Arc<SpectralGrid>, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} samples, got {}",
                grid.len(),
                samples.len()
            )));
        }
        let real = OnceLock::new();
        let _ = real.set(samples);
        Ok(Field {
            grid,
            real,
            spectral: OnceLock::new(),
        })
    }

    /// Builds a real field from spectral coefficients, rejecting input that
    /// is not Hermitian within [`HERMITIAN_TOLERANCE`].
    pub fn from_spectral(grid: Arc<SpectralGrid>, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                coeffs.len()
            )));
        }
        let asymmetry = grid.hermitian_asymmetry(&coeffs);
        if asymmetry > HERMITIAN_TOLERANCE {
            return Err(Error::NotHermitian { asymmetry });
        }
        Ok(Self::from_spectral_unchecked(grid, coeffs))
    }

    pub(crate) fn from_spectral_unchecked(grid: Arc<SpectralGrid>, coeffs: Vec<Complex64>) -> Self {
        let spectral = OnceLock::new();
        let _ = spectral.set(coeffs);
        Field {
            grid,
            real: OnceLock::new(),
            spectral,
        }
    }

    /// Samples `f(x)` at every grid point; `x` has `dim` entries.
    pub fn from_fn(grid: Arc<SpectralGrid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let dim = grid.dim();
        let samples = grid.points().map(|x| f(&x[..dim])).collect();
        Field::from_real(grid, samples).expect("sample count matches grid")
    }

    pub fn zeros(grid: Arc<SpectralGrid>) -> Self {
        let len = grid.len();
        Field::from_real(grid, vec![0.0; len]).expect("sample count matches grid")
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn is_real_current(&self) -> bool {
        self.real.get().is_some()
    }

    pub fn is_spectral_current(&self) -> bool {
        self.spectral.get().is_some()
    }

    pub fn real(&self) -> &[f64] {
        self.real.get_or_init(|| {
            let coeffs = self.spectral.get().expect("field has a representation");
            self.grid.inverse_real(coeffs)
        })
    }

    pub fn spectral(&self) -> &[Complex64] {
        self.spectral.get_or_init(|| {
            let samples = self.real.get().expect("field has a representation");
            self.grid.forward(samples)
        })
    }

    pub fn into_real(self) -> Vec<f64> {
        self.real();
        self.real.into_inner().expect("just initialized")
    }

    pub fn max(&self) -> f64 {
        self.real()
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.real().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Riemann-sum integral `h^d sum f`.
    pub fn integral(&self) -> f64 {
        self.grid.cell_volume() * self.real().iter().sum::<f64>()
    }

    /// Pointwise linear combination `a*self + b*other`.
    pub fn axpby(&self, a: f64, other: &Field, b: f64) -> Field {
        let samples = self
            .real()
            .iter()
            .zip(other.real())
            .map(|(x, y)| a * x + b * y)
            .collect();
        Field::from_real(self.grid.clone(), samples).expect("same grid")
    }

    pub fn scale(&self, a: f64) -> Field {
        let samples = self.real().iter().map(|x| a * x).collect();
        Field::from_real(self.grid.clone(), samples).expect("same grid")
    }

    /// Max absolute difference of real samples.
    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.real()
            .iter()
            .zip(other.real())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.real().iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

/// Returns a field whose spectral representation is current.
pub fn forward_transform(f: &Field) -> Field {
    let coeffs = f.spectral().to_vec();
    let mut out = Field::from_spectral_unchecked(f.grid.clone(), coeffs);
    if let Some(real) = f.real.get() {
        out.real = OnceLock::from(real.clone());
    }
    out
}

/// Returns a field whose real representation is current.
pub fn inverse_transform(f: &Field) -> Field {
    Field::from_real(f.grid.clone(), f.real().to_vec()).expect("same grid")
}

/// Discrete L^2 norm computed from the spectral side, `sqrt(L^d sum |c|^2)`.
pub fn spectral_l2_norm(f: &Field) -> f64 {
    let energy: f64 = f.spectral().iter().map(|c| c.norm_sqr()).sum();
    (f.grid.volume() * energy).sqrt()
}

/// `D^beta f` with the default order limit.
pub fn spectral_derivative(f: &Field, beta: &MultiIndex) -> Result<Field> {
    spectral_derivative_bounded(f, beta, DEFAULT_MAX_DERIVATIVE_ORDER)
}

pub fn spectral_derivative_bounded(
    f: &Field,
    beta: &MultiIndex,
    max_order: usize,
) -> Result<Field> {
    let grid = f.grid();
    if beta.dim() != grid.dim() {
        return Err(Error::InvalidArgument(format!(
            "multi-index {beta} has dimension {}, grid has {}",
            beta.dim(),
            grid.dim()
        )));
    }
    let order = beta.order();
    if order > max_order {
        return Err(Error::InvalidArgument(format!(
            "derivative order {order} exceeds limit {max_order}"
        )));
    }
    if beta.is_zero() {
        return Ok(f.clone());
    }
    check_symbol_range(grid, order)?;
    let symbol = grid.derivative_symbol(beta);
    let coeffs = f
        .spectral()
        .iter()
        .zip(&symbol)
        .map(|(c, s)| c * s)
        .collect();
    Ok(Field::from_spectral_unchecked(grid.clone(), coeffs))
}

pub(crate) fn check_symbol_range(grid: &SpectralGrid, order: usize) -> Result<()> {
    let kmax = grid.max_wavenumber() * (grid.dim() as f64).sqrt();
    let value = kmax.powi(order as i32);
    if !value.is_finite() || value > f64::MAX / 1e16 {
        return Err(Error::DerivativeOverflow { order, value });
    }
    Ok(())
}

/// Zeroes every coefficient with some axis `|m| > n/3`.
pub fn dealias(f: &Field) -> Field {
    let mut coeffs = f.spectral().to_vec();
    f.grid.dealias_in_place(&mut coeffs);
    Field::from_spectral_unchecked(f.grid.clone(), coeffs)
}
