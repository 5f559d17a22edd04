use crate::error::Result;
use crate::grid::Field;
use crate::heat::check_exponent;

/// `(h^d sum |f|^q)^{1/q}`; `q = inf` is the grid max of `|f|`.
///
/// The grid max is a lower bound on the continuum sup norm, tight for
/// well-resolved smooth fields.
pub fn lq_norm(f: &Field, q: f64) -> Result<f64> {
    check_exponent(q)?;
    Ok(lq_norm_samples(f.real(), f.grid().cell_volume(), q))
}

pub fn lq_norm_samples(samples: &[f64], cell_volume: f64, q: f64) -> f64 {
    if q.is_infinite() {
        return samples.iter().map(|v| v.abs()).fold(0.0, f64::max);
    }
    if q == 1.0 {
        return cell_volume * samples.iter().map(|v| v.abs()).sum::<f64>();
    }
    if q == 2.0 {
        return (cell_volume * samples.iter().map(|v| v * v).sum::<f64>()).sqrt();
    }
    // scale by the max to keep large q away from overflow
    let scale = samples.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let sum: f64 = if q.fract() == 0.0 && q <= 64.0 {
        let p = q as i32;
        samples.iter().map(|v| (v.abs() / scale).powi(p)).sum()
    } else {
        samples.iter().map(|v| (v.abs() / scale).powf(q)).sum()
    };
    scale * (cell_volume * sum).powf(1.0 / q)
}

/// Euclidean magnitude of a vector field, pointwise.
pub fn magnitude(components: &[Field]) -> Vec<f64> {
    let len = components[0].real().len();
    let mut out = vec![0.0; len];
    for c in components {
        for (o, v) in out.iter_mut().zip(c.real()) {
            *o += v * v;
        }
    }
    out.iter_mut().for_each(|v| *v = v.sqrt());
    out
}

/// `L^q` norm of `|v|` for a vector field `v`.
pub fn vector_lq_norm(components: &[Field], q: f64) -> Result<f64> {
    check_exponent(q)?;
    Ok(lq_norm_samples(
        &magnitude(components),
        components[0].grid().cell_volume(),
        q,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::heat::{gaussian_kernel_values, heat_kernel_lq_norm};

    #[test]
    fn constant_field_norms() {
        let g = make_grid(2, 16, 3.0).unwrap();
        let f = Field::from_fn(g, |_| -2.0);
        for q in [1.0, 1.5, 2.0, 4.0] {
            let expected = 2.0 * 3.0f64.powf(2.0 / q);
            assert!((lq_norm(&f, q).unwrap() - expected).abs() < 1e-12 * expected);
        }
        assert_eq!(lq_norm(&f, f64::INFINITY).unwrap(), 2.0);
    }

    #[test]
    fn kernel_l1_is_one() {
        let g = make_grid(3, 48, 24.0).unwrap();
        for t in [0.5, 1.0] {
            let f = gaussian_kernel_values(&g, t).unwrap();
            assert!((lq_norm(&f, 1.0).unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn gaussian_l2_matches_closed_form() {
        // ||G(., t)||_2 in 2D = (8 pi t)^{-1/2}
        let g = make_grid(2, 128, 30.0).unwrap();
        let t = 0.6;
        let f = gaussian_kernel_values(&g, t).unwrap();
        let exact = (8.0 * std::f64::consts::PI * t).powf(-0.5);
        assert!((heat_kernel_lq_norm(2, t, 2.0) - exact).abs() < 1e-15);
        assert!((lq_norm(&f, 2.0).unwrap() - exact).abs() < 1e-8);
    }

    #[test]
    fn rejects_sub_unit_exponent() {
        let g = make_grid(1, 8, 1.0).unwrap();
        assert!(lq_norm(&Field::zeros(g), 0.5).is_err());
    }
}
