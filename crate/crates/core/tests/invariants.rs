use std::f64::consts::PI;
use std::sync::Arc;

use mpks_core::chemo::{compute_drift, DriftMultiplier};
use mpks_core::diagnostics::lq_norm;
use mpks_core::exponent::{display_exponent, parse_exponent};
use mpks_core::grid::make_grid;
use mpks_core::harness::{preset, simulate, RunConfig};
use mpks_core::heat::apply_semigroup;
use mpks_core::{Field, SpectralGrid};
use proptest::prelude::*;

/// A few positive bumps, negligible at the box edge so mirroring is exact.
fn bumps(g: &Arc<SpectralGrid>, centers: &[(f64, f64, f64)]) -> Field {
    Field::from_fn(g.clone(), |x| {
        centers
            .iter()
            .map(|&(cx, cy, w)| (-((x[0] - cx).powi(2) + (x[1] - cy).powi(2)) / (2.0 * w * w)).exp())
            .sum()
    })
}

fn centers() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64, 0.6..1.5f64), 1..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn heat_flow_keeps_mass_and_shrinks_norms(c in centers(), t in 0.01..4.0f64) {
        let g = make_grid(2, 128, 32.0).unwrap();
        let f = bumps(&g, &c);
        let u = apply_semigroup(&f, t).unwrap();
        prop_assert!((u.integral() - f.integral()).abs() <= 1e-12 * f.integral());
        for q in [1.0, 2.0, 4.0, f64::INFINITY] {
            let before = lq_norm(&f, q).unwrap();
            let after = lq_norm(&u, q).unwrap();
            prop_assert!(after <= before * (1.0 + 1e-10), "q={q}: {after} > {before}");
        }
    }

    #[test]
    fn heat_flow_is_a_semigroup(c in centers(), a in 0.0..2.0f64, b in 0.0..2.0f64) {
        let g = make_grid(2, 128, 32.0).unwrap();
        let f = bumps(&g, &c);
        let two_steps = apply_semigroup(&apply_semigroup(&f, a).unwrap(), b).unwrap();
        let one_step = apply_semigroup(&f, a + b).unwrap();
        prop_assert!(two_steps.max_abs_diff(&one_step) <= 1e-13 * f.max_abs());
    }

    /// The drift is odd under reflection and exerts no net force.
    #[test]
    fn drift_is_odd_and_momentum_free(c in centers()) {
        let g = make_grid(2, 128, 32.0).unwrap();
        let m = DriftMultiplier::new(&g).unwrap();
        let rho = bumps(&g, &c);
        let mirrored: Vec<(f64, f64, f64)> = c.iter().map(|&(x, y, w)| (-x, y, w)).collect();
        let drift = compute_drift(&m, &rho).unwrap();
        let drift_m = compute_drift(&m, &bumps(&g, &mirrored)).unwrap();
        let n = g.n_per_axis();
        let scale = drift[0].max_abs().max(drift[1].max_abs());
        for i in 0..n {
            // x -> -x maps index i to (n - i) mod n along the first axis
            let mi = (n - i) % n;
            for j in 0..n {
                let a = g.flatten(&[i, j]);
                let b = g.flatten(&[mi, j]);
                prop_assert!((drift[0].real()[a] + drift_m[0].real()[b]).abs() <= 1e-10 * scale);
                prop_assert!((drift[1].real()[a] - drift_m[1].real()[b]).abs() <= 1e-10 * scale);
            }
        }
        for comp in &drift {
            let force: f64 = rho.real().iter().zip(comp.real()).map(|(r, v)| r * v).sum::<f64>() * g.cell_volume();
            prop_assert!(force.abs() <= 1e-10 * rho.integral() * scale);
        }
    }

    #[test]
    fn exponents_round_trip_through_text(num in 1u32..60, den in 1u32..13) {
        prop_assume!(num >= den);
        let q = num as f64 / den as f64;
        let text = display_exponent(q);
        prop_assert!((parse_exponent(&text).unwrap() - q).abs() <= 1e-12 * q);
    }

    #[test]
    fn config_edits_survive_toml(n in 8usize..200, l in 1.0..100.0f64, mass in 0.01..50.0f64, seed in 0..=i64::MAX as u64) {
        let mut c = preset("small_mass_2d").unwrap();
        c.apply_overrides(&[
            format!("grid.n_per_axis={}", 2 * n),
            format!("grid.box_length={l:?}"),
            format!("datum.mass={mass:?}"),
            format!("seed={seed}"),
        ]).unwrap();
        let back = RunConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.hash(), c.hash());
        let before = c.physics_hash();
        c.set("datum.mass", &format!("{:?}", mass * 1.5)).unwrap();
        prop_assert_ne!(c.physics_hash(), before);
        let mut too_big = c.clone();
        too_big.seed = i64::MAX as u64 + 1 + seed / 2;
        prop_assert!(too_big.validate().is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    /// The full nonlinear flow conserves mass and positivity on random data.
    #[test]
    fn nonlinear_flow_conserves_mass(seed in 0..=i64::MAX as u64, fraction in 0.05..0.5f64) {
        let mut c = preset("small_mass_2d").unwrap();
        c.apply_overrides(&[
            "grid.n_per_axis=64".to_string(),
            "grid.box_length=16.0".into(),
            format!("datum={{ kind = \"random_bumps\", mass = {:?}, sigma = 1.0, count = 3, spread = 3.0 }}", fraction * 8.0 * PI),
            format!("seed={seed}"),
            "time.include=[]".into(),
            "diagnostics.growth_times=[]".into(),
            "time.t_final=0.2".into(),
            "time.t_start=0.01".into(),
            "time.points=4".into(),
        ]).unwrap();
        let traj = simulate(&c).unwrap().trajectory;
        prop_assert!(traj.status.is_completed(), "{:?}", traj.status);
        prop_assert!(traj.mass_drift() <= 1e-12, "drift {}", traj.mass_drift());
        prop_assert!(traj.worst_negativity() <= 1e-8);
    }
}
