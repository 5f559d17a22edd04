use std::sync::Arc;

use rustfft::num_complex::Complex64;

use crate::chemo::{build_drift_multiplier, DriftMultiplier};
use crate::error::Result;
use crate::grid::SpectralGrid;

/// The discretized right-hand side `lap rho - div(rho grad c)` on one grid,
/// with a switch that removes the drift entirely.
#[derive(Debug, Clone)]
pub struct MpksSystem {
    grid: Arc<SpectralGrid>,
    drift: Option<DriftMultiplier>,
    /// `xi_j` per flat mode; zero on the Nyquist row of axis `j`.
    gradient: Vec<Vec<f64>>,
}

pub(crate) struct FluxEvaluation {
    pub divergence: Vec<Complex64>,
    pub max_drift: f64,
}

impl MpksSystem {
    pub fn new(grid: &Arc<SpectralGrid>) -> Result<Self> {
        Self::with_drift(grid, true)
    }

    pub fn heat_only(grid: &Arc<SpectralGrid>) -> Self {
        Self::with_drift(grid, false).expect("no calibration without drift")
    }

    pub fn with_drift(grid: &Arc<SpectralGrid>, enabled: bool) -> Result<Self> {
        let drift = if enabled {
            Some(build_drift_multiplier(grid)?)
        } else {
            None
        };
        let dim = grid.dim();
        let nyquist = grid.n_per_axis() / 2;
        let wn = grid.axis_wavenumbers();
        let mut gradient = vec![vec![0.0; grid.len()]; dim];
        let mut idx = [0usize; 3];
        for flat in 0..grid.len() {
            grid.unflatten(flat, &mut idx[..dim]);
            for (axis, g) in gradient.iter_mut().enumerate() {
                if idx[axis] != nyquist {
                    g[flat] = wn[idx[axis]];
                }
            }
        }
        Ok(MpksSystem {
            grid: grid.clone(),
            drift,
            gradient,
        })
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn drift_enabled(&self) -> bool {
        self.drift.is_some()
    }

    pub fn drift_multiplier(&self) -> Option<&DriftMultiplier> {
        self.drift.as_ref()
    }

    /// Spectral `div(rho grad c)`, dealiased on inputs and output.
    pub fn flux_divergence(&self, rho_hat: &[Complex64]) -> Vec<Complex64> {
        self.evaluate(rho_hat, rho_hat).divergence
    }

    /// Spectral `div(a grad c[b])`; bilinear, so time derivatives of the flux
    /// follow from the Leibniz rule.
    pub fn bilinear_divergence(&self, a_hat: &[Complex64], b_hat: &[Complex64]) -> Vec<Complex64> {
        self.evaluate(a_hat, b_hat).divergence
    }

    /// Spectral `lap rho - div(rho grad c)`.
    pub fn rhs(&self, rho_hat: &[Complex64]) -> Vec<Complex64> {
        let flux = self.flux_divergence(rho_hat);
        rho_hat
            .iter()
            .zip(self.grid.k2())
            .zip(flux)
            .map(|((r, k2), f)| -r * *k2 - f)
            .collect()
    }

    pub(crate) fn evaluate(&self, a_hat: &[Complex64], b_hat: &[Complex64]) -> FluxEvaluation {
        let grid = &self.grid;
        let Some(drift) = &self.drift else {
            return FluxEvaluation {
                divergence: vec![Complex64::new(0.0, 0.0); grid.len()],
                max_drift: 0.0,
            };
        };
        // real-space fields [a, v_1, .., v_d], inverted two at a time
        let mut spectral = Vec::with_capacity(grid.dim() + 1);
        let mut a = a_hat.to_vec();
        grid.dealias_in_place(&mut a);
        spectral.push(a);
        for symbol in drift.components() {
            let mut v: Vec<Complex64> = symbol.iter().zip(b_hat).map(|(m, b)| m * b).collect();
            grid.dealias_in_place(&mut v);
            spectral.push(v);
        }
        let mut real = Vec::with_capacity(spectral.len());
        for pair in spectral.chunks(2) {
            match pair {
                [x, y] => {
                    let (rx, ry) = grid.inverse_real_pair(x, y);
                    real.push(rx);
                    real.push(ry);
                }
                [x] => real.push(grid.inverse_real(x)),
                _ => unreachable!(),
            }
        }
        let (a_real, v_real) = real.split_first().unwrap();
        let mut speed2 = vec![0.0; grid.len()];
        for v in v_real {
            for (s, vi) in speed2.iter_mut().zip(v) {
                *s += vi * vi;
            }
        }
        let products: Vec<Vec<f64>> = v_real
            .iter()
            .map(|v| a_real.iter().zip(v).map(|(x, y)| x * y).collect())
            .collect();
        let mut product_hats = Vec::with_capacity(products.len());
        for pair in products.chunks(2) {
            match pair {
                [x, y] => {
                    let (fx, fy) = grid.forward_pair(x, y);
                    product_hats.push(fx);
                    product_hats.push(fy);
                }
                [x] => product_hats.push(grid.forward(x)),
                _ => unreachable!(),
            }
        }
        let mask = grid.dealias_mask();
        let mut divergence = vec![Complex64::new(0.0, 0.0); grid.len()];
        for (p_hat, xi) in product_hats.iter().zip(&self.gradient) {
            for (((d, p), k), &keep) in divergence.iter_mut().zip(p_hat).zip(xi).zip(mask) {
                if keep {
                    *d += Complex64::new(0.0, *k) * p;
                }
            }
        }
        FluxEvaluation {
            divergence,
            max_drift: speed2.iter().fold(0.0f64, |m, s| m.max(*s)).sqrt(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, Field};

    #[test]
    fn flux_has_no_zero_mode() {
        let g = make_grid(2, 32, 12.0).unwrap();
        let sys = MpksSystem::new(&g).unwrap();
        let rho = Field::from_fn(g.clone(), |x| (-(x[0] * x[0] + 2.0 * x[1] * x[1])).exp());
        let f = sys.flux_divergence(rho.spectral());
        assert_eq!(f[0], Complex64::new(0.0, 0.0));
        assert!(g.hermitian_asymmetry(&f) < 1e-14);
    }

    #[test]
    fn heat_only_rhs_is_laplacian() {
        let g = make_grid(1, 16, 6.0).unwrap();
        let sys = MpksSystem::heat_only(&g);
        let rho = Field::from_fn(g.clone(), |x| (-(x[0] * x[0])).exp());
        let rhs = sys.rhs(rho.spectral());
        for ((r, k2), c) in rhs.iter().zip(g.k2()).zip(rho.spectral()) {
            assert_eq!(*r, -c * *k2);
        }
    }

    #[test]
    fn radial_flux_points_inward() {
        // aggregation: rho grad c points toward the center
        let g = make_grid(2, 64, 16.0).unwrap();
        let sys = MpksSystem::new(&g).unwrap();
        let rho = Field::from_fn(g.clone(), |x| (-(x[0] * x[0] + x[1] * x[1])).exp());
        let div = Field::from_spectral(g.clone(), sys.flux_divergence(rho.spectral())).unwrap();
        let center = g.flatten(&[32, 32]);
        // div(rho grad c) < 0 at the peak, so rho grows there
        assert!(div.real()[center] < 0.0);
    }
}
