use serde::{Deserialize, Serialize};

use super::norms::lq_norm;
use crate::error::{Error, Result};
use crate::exponent::serde_q;
use crate::grid::Field;
use crate::heat::{apply_semigroup, check_exponent, heat_kernel_lq_norm, inv};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaEntry {
    #[serde(with = "serde_q")]
    pub q: f64,
    /// `sup_t t^{(d/2)(1-1/q)} ||G(t) * rho0||_q` over the samples.
    pub supremum: f64,
    pub argmax: f64,
    /// `sup_t t^{(d/2)(1-1/q)} ||G(t)||_q * ||rho0||_1`, which bounds the
    /// supremum for nonnegative data by Young's inequality.
    pub mass_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaReport {
    pub t_final: f64,
    pub l1_norm: f64,
    pub entries: Vec<ThetaEntry>,
}

/// Weighted heat-flow suprema of the initial datum on `(0, T]`.
pub fn theta_functional(
    rho0: &Field,
    t_final: f64,
    q_list: &[f64],
    t_samples: &[f64],
) -> Result<ThetaReport> {
    let grid = rho0.grid();
    let floor = 4.0 * grid.spacing() * grid.spacing();
    if t_samples.is_empty() {
        return Err(Error::InvalidArgument("no sample times".into()));
    }
    for &t in t_samples {
        if !(t > 0.0 && t <= t_final * (1.0 + 1e-12)) {
            return Err(Error::InvalidArgument(format!(
                "sample time {t} outside (0, {t_final}]"
            )));
        }
        if t < floor.min(t_final) {
            return Err(Error::Resolution(format!(
                "sample time {t:.3e} below the resolution floor {floor:.3e}"
            )));
        }
    }
    for &q in q_list {
        check_exponent(q)?;
    }
    let d = grid.dim() as f64;
    let l1 = lq_norm(rho0, 1.0)?;
    let mut entries: Vec<ThetaEntry> = q_list
        .iter()
        .map(|&q| ThetaEntry {
            q,
            supremum: 0.0,
            argmax: t_samples[0],
            mass_bound: heat_kernel_lq_norm(grid.dim(), 1.0, q) * l1,
        })
        .collect();
    for &t in t_samples {
        let evolved = apply_semigroup(rho0, t)?;
        for e in entries.iter_mut() {
            let v = t.powf(d / 2.0 * (1.0 - inv(e.q))) * lq_norm(&evolved, e.q)?;
            if v > e.supremum {
                e.supremum = v;
                e.argmax = t;
            }
        }
    }
    Ok(ThetaReport {
        t_final,
        l1_norm: l1,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::geometric_times;
    use crate::grid::make_grid;
    use crate::heat::gaussian_kernel_values;

    #[test]
    fn gaussian_datum_matches_closed_form() {
        // G(t) * G(s0) = G(t + s0): the weighted norm is increasing in t, so
        // the supremum sits at T with value T^a ||G(T + s0)||_q
        let g = make_grid(2, 256, 40.0).unwrap();
        let s0 = 0.3;
        let rho0 = gaussian_kernel_values(&g, s0).unwrap();
        let t_final = 2.0;
        let times = geometric_times(0.1, t_final, 10);
        let report =
            theta_functional(&rho0, t_final, &[4.0 / 3.0, 2.0, f64::INFINITY], &times).unwrap();
        for e in &report.entries {
            let a = 1.0 - 1.0 / e.q;
            let exact = t_final.powf(a) * heat_kernel_lq_norm(2, t_final + s0, e.q);
            assert!(
                (e.supremum - exact).abs() < 1e-8 * exact,
                "{e:?} vs {exact}"
            );
            assert_eq!(e.argmax, t_final);
            assert!(e.supremum <= e.mass_bound);
        }
    }

    #[test]
    fn l1_entry_is_mass_and_amplitude_is_linear() {
        let g = make_grid(2, 128, 24.0).unwrap();
        let rho0 = Field::from_fn(g.clone(), |x| {
            (-(x[0] - 1.0).powi(2) - 2.0 * x[1] * x[1]).exp()
        });
        let times = geometric_times(0.2, 1.0, 6);
        let one = theta_functional(&rho0, 1.0, &[1.0, 2.0, f64::INFINITY], &times).unwrap();
        assert!((one.entries[0].supremum - rho0.integral()).abs() < 1e-12 * rho0.integral());
        let two =
            theta_functional(&rho0.scale(2.0), 1.0, &[1.0, 2.0, f64::INFINITY], &times).unwrap();
        for (a, b) in one.entries.iter().zip(&two.entries) {
            assert!((b.supremum - 2.0 * a.supremum).abs() < 1e-13 * b.supremum);
        }
    }

    #[test]
    fn invariant_under_mass_preserving_dilation() {
        let g = make_grid(2, 512, 64.0).unwrap();
        let lambda: f64 = 2.0;
        let profile = |x: &[f64]| (-(x[0] * x[0] + 0.5 * x[1] * x[1])).exp();
        let rho = Field::from_fn(g.clone(), profile);
        let rho_l = Field::from_fn(g.clone(), |x| {
            lambda * lambda * profile(&[lambda * x[0], lambda * x[1]])
        });
        let times = geometric_times(0.25, 2.0, 6);
        let scaled: Vec<f64> = times.iter().map(|t| t / (lambda * lambda)).collect();
        let a = theta_functional(&rho, 2.0, &[4.0 / 3.0, 2.0, 4.0], &times).unwrap();
        let b = theta_functional(
            &rho_l,
            2.0 / (lambda * lambda),
            &[4.0 / 3.0, 2.0, 4.0],
            &scaled,
        )
        .unwrap();
        for (x, y) in a.entries.iter().zip(&b.entries) {
            assert!(
                (x.supremum - y.supremum).abs() < 1e-6 * x.supremum,
                "{x:?} {y:?}"
            );
        }
    }

    #[test]
    fn rejects_samples_below_floor() {
        let g = make_grid(1, 16, 8.0).unwrap();
        let rho0 = gaussian_kernel_values(&g, 1.0).unwrap();
        assert!(matches!(
            theta_functional(&rho0, 1.0, &[2.0], &[1e-4]),
            Err(Error::Resolution(_))
        ));
        assert!(theta_functional(&rho0, 1.0, &[2.0], &[2.0]).is_err());
    }
}
