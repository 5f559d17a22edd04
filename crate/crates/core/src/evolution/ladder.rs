use rustfft::num_complex::Complex64;

use super::system::MpksSystem;
use crate::error::{Error, Result};
use crate::grid::{binomial, Field};

pub const DEFAULT_LADDER_ORDER: usize = 8;
pub const MAX_LADDER_ORDER: usize = 12;

/// Refuse the ladder when this much spectral energy sits outside the 2/3 band.
pub const LADDER_TAIL_THRESHOLD: f64 = 1e-12;

/// Spectral level, relative to the peak of `rho^`, below which coefficients
/// are round-off. Every rung is truncated to the ball where `|rho^|` reaches
/// this level; noise outside it would be amplified by `|xi|^2` per rung.
pub const LADDER_NOISE_FLOOR: f64 = 1e-14;

/// Exact time derivatives `d_t^j rho`, `j = 0..=k_max`, of the solution
/// through `rho`, from
///
/// ```text
/// d_t^{j+1} rho = lap d_t^j rho - div sum_i C(j, i) d_t^i rho grad c[d_t^{j-i} rho]
/// ```
///
/// which holds because `rho -> grad c` is linear and time independent.
pub fn time_derivative_ladder(
    system: &MpksSystem,
    rho: &Field,
    k_max: usize,
) -> Result<Vec<Field>> {
    if k_max > MAX_LADDER_ORDER {
        return Err(Error::InvalidArgument(format!(
            "ladder order {k_max} exceeds the limit {MAX_LADDER_ORDER}"
        )));
    }
    let grid = system.grid().clone();
    if rho.grid().spec() != grid.spec() {
        return Err(Error::InvalidArgument(
            "density lives on a different grid".into(),
        ));
    }
    let tail = grid.tail_energy_fraction(rho.spectral());
    if tail > LADDER_TAIL_THRESHOLD {
        return Err(Error::Resolution(format!(
            "tail energy fraction {tail:.3e} exceeds {LADDER_TAIL_THRESHOLD:.0e}"
        )));
    }
    crate::grid::check_symbol_range(&grid, 2 * k_max)?;
    let k2 = grid.k2();
    let peak = rho.spectral().iter().map(|c| c.norm()).fold(0.0, f64::max);
    let band = rho
        .spectral()
        .iter()
        .zip(k2)
        .filter(|(c, _)| c.norm() >= LADDER_NOISE_FLOOR * peak)
        .map(|(_, k)| *k)
        .fold(0.0, f64::max);
    let truncate = |coeffs: &mut Vec<Complex64>| {
        for (c, k) in coeffs.iter_mut().zip(k2) {
            if *k > band {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    };
    let mut first = rho.spectral().to_vec();
    truncate(&mut first);
    let mut ladder: Vec<Vec<Complex64>> = vec![first];
    for j in 0..k_max {
        let mut next: Vec<Complex64> = ladder[j].iter().zip(k2).map(|(c, k)| -c * *k).collect();
        if system.drift_enabled() {
            for i in 0..=j {
                let term = system.bilinear_divergence(&ladder[i], &ladder[j - i]);
                let c = binomial(j, i);
                for (n, t) in next.iter_mut().zip(term) {
                    *n -= t * c;
                }
            }
        }
        truncate(&mut next);
        ladder.push(next);
    }
    Ok(ladder
        .into_iter()
        .map(|c| Field::from_spectral_unchecked(grid.clone(), c))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::heat::gaussian_kernel_values;

    #[test]
    fn heat_ladder_is_powers_of_laplacian() {
        let g = make_grid(2, 64, 24.0).unwrap();
        let sys = MpksSystem::heat_only(&g);
        let rho = gaussian_kernel_values(&g, 1.0).unwrap();
        let ladder = time_derivative_ladder(&sys, &rho, 4).unwrap();
        // coefficients dropped under the noise floor, amplified by |xi|^{2j},
        // stay below 1e-8 of the rung here
        for (j, f) in ladder.iter().enumerate() {
            let expected: Vec<Complex64> = rho
                .spectral()
                .iter()
                .zip(g.k2())
                .map(|(r, k2)| r * (-k2).powi(j as i32))
                .collect();
            let expected = Field::from_spectral_unchecked(g.clone(), expected);
            assert!(
                f.max_abs_diff(&expected) <= 1e-8 * expected.max_abs(),
                "rung {j}"
            );
        }
    }

    #[test]
    fn round_off_is_not_amplified() {
        // a clean heat profile plus noise at the round-off level
        let g = make_grid(2, 128, 32.0).unwrap();
        let sys = MpksSystem::heat_only(&g);
        let clean = gaussian_kernel_values(&g, 2.0).unwrap();
        let noisy = Field::from_fn(g.clone(), |x| {
            let i = ((x[0] * 7.3 + x[1] * 13.1).sin() * 1e4).fract();
            1e-17 * i
        })
        .axpby(1.0, &clean, 1.0);
        let a = time_derivative_ladder(&sys, &clean, 8).unwrap();
        let b = time_derivative_ladder(&sys, &noisy, 8).unwrap();
        let (top_a, top_b) = (a[8].max_abs(), b[8].max_abs());
        assert!((top_a - top_b).abs() < 1e-6 * top_a, "{top_a} vs {top_b}");
    }

    #[test]
    fn zero_density_has_zero_ladder() {
        let g = make_grid(2, 16, 8.0).unwrap();
        let sys = MpksSystem::new(&g).unwrap();
        for f in time_derivative_ladder(&sys, &Field::zeros(g.clone()), 5).unwrap() {
            assert_eq!(f.max_abs(), 0.0);
        }
    }

    #[test]
    fn first_rung_is_the_right_hand_side() {
        let g = make_grid(2, 64, 20.0).unwrap();
        let sys = MpksSystem::new(&g).unwrap();
        let rho = gaussian_kernel_values(&g, 1.0).unwrap().scale(3.0);
        let ladder = time_derivative_ladder(&sys, &rho, 1).unwrap();
        let rhs = Field::from_spectral(g.clone(), sys.rhs(rho.spectral())).unwrap();
        assert!(ladder[1].max_abs_diff(&rhs) <= 1e-10 * rhs.max_abs());
    }

    #[test]
    fn under_resolved_input_is_refused() {
        let g = make_grid(1, 32, 8.0).unwrap();
        let sys = MpksSystem::heat_only(&g);
        let spike = Field::from_fn(g.clone(), |x| if x[0].abs() < 0.1 { 1.0 } else { 0.0 });
        assert!(matches!(
            time_derivative_ladder(&sys, &spike, 2),
            Err(Error::Resolution(_))
        ));
        let smooth = gaussian_kernel_values(&g, 1.0).unwrap();
        assert!(time_derivative_ladder(&sys, &smooth, MAX_LADDER_ORDER + 1).is_err());
    }
}
