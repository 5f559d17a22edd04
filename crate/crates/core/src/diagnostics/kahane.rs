use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{binomial, MultiIndex};

/// Largest `|kappa|` enumerated.
pub const MAX_KAHANE_ORDER: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KahaneCheck {
    pub kappa: MultiIndex,
    pub delta: f64,
    pub epsilon: f64,
    pub lhs: f64,
    /// `lhs / |kappa|^{|kappa| + max(delta, epsilon)}`.
    pub ratio: f64,
}

/// `n^{n + p}` with `0^p = 1`.
fn power(n: usize, p: f64) -> f64 {
    if n == 0 {
        1.0
    } else {
        (n as f64).powf(n as f64 + p)
    }
}

/// Exact enumeration of
/// `sum_{beta + gamma = kappa} kappa!/(beta! gamma!) |beta|^{|beta|+delta} |gamma|^{|gamma|+epsilon}`.
pub fn kahane_sum_check(kappa: &MultiIndex, delta: f64, epsilon: f64) -> Result<KahaneCheck> {
    if !(delta < -0.5 || epsilon < -0.5) {
        return Err(Error::InvalidArgument(format!(
            "need delta < -1/2 or epsilon < -1/2, got ({delta}, {epsilon})"
        )));
    }
    let order = kappa.order();
    if order == 0 || order > MAX_KAHANE_ORDER {
        return Err(Error::InvalidArgument(format!(
            "|kappa| = {order} outside 1..={MAX_KAHANE_ORDER}"
        )));
    }
    let lhs: f64 = kappa
        .sub_indices()
        .iter()
        .map(|beta| {
            let coeff: f64 = kappa
                .0
                .iter()
                .zip(&beta.0)
                .map(|(&k, &b)| binomial(k, b))
                .product();
            let b = beta.order();
            coeff * power(b, delta) * power(order - b, epsilon)
        })
        .sum();
    Ok(KahaneCheck {
        kappa: kappa.clone(),
        delta,
        epsilon,
        lhs,
        ratio: lhs / power(order, delta.max(epsilon)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KahaneSweep {
    pub dim: usize,
    pub delta: f64,
    pub epsilon: f64,
    /// Largest ratio over all `kappa` of each order `1..=max_order`.
    pub max_ratio_by_order: Vec<f64>,
    /// The empirical constant: largest ratio seen.
    pub lambda: f64,
}

/// Every `kappa` with `1 <= |kappa| <= max_order` in dimension `dim`.
pub fn kahane_sweep(dim: usize, max_order: usize, delta: f64, epsilon: f64) -> Result<KahaneSweep> {
    let mut by_order = Vec::with_capacity(max_order);
    for order in 1..=max_order {
        let mut best: f64 = 0.0;
        for kappa in MultiIndex::all_of_order(dim, order) {
            best = best.max(kahane_sum_check(&kappa, delta, epsilon)?.ratio);
        }
        by_order.push(best);
    }
    Ok(KahaneSweep {
        dim,
        delta,
        epsilon,
        lambda: by_order.iter().copied().fold(0.0, f64::max),
        max_ratio_by_order: by_order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Vandermonde: the multinomial weights summed over `|beta| = j` give
    /// `C(|kappa|, j)`, so the sum depends on `|kappa|` only.
    fn one_dimensional(n: usize, delta: f64, epsilon: f64) -> f64 {
        (0..=n)
            .map(|j| binomial(n, j) * power(j, delta) * power(n - j, epsilon))
            .sum()
    }

    #[test]
    fn unit_index_hand_value() {
        let c = kahane_sum_check(&MultiIndex(vec![1, 0]), -1.0, -1.0).unwrap();
        assert_eq!(c.lhs, 2.0);
        assert_eq!(c.ratio, 2.0);
    }

    #[test]
    fn rejects_out_of_scope_input() {
        assert!(kahane_sum_check(&MultiIndex(vec![0, 0]), -1.0, -1.0).is_err());
        assert!(kahane_sum_check(&MultiIndex(vec![1, 1]), 0.0, 0.5).is_err());
        assert!(kahane_sum_check(&MultiIndex(vec![21]), -1.0, -1.0).is_err());
    }

    #[test]
    fn enumeration_matches_vandermonde_collapse() {
        for kappa in [vec![3, 2], vec![5, 0, 4], vec![7, 6], vec![1, 1, 1]] {
            let k = MultiIndex(kappa);
            for (d, e) in [(-1.0, -1.0), (-1.0, 0.5), (0.5, -1.0)] {
                let lhs = kahane_sum_check(&k, d, e).unwrap().lhs;
                let oracle = one_dimensional(k.order(), d, e);
                assert!((lhs - oracle).abs() <= 1e-12 * oracle);
            }
        }
    }

    #[test]
    fn sweep_is_bounded() {
        for (d, e) in [(-1.0, -1.0), (-1.0, 0.5), (0.5, -1.0)] {
            let s = kahane_sweep(2, MAX_KAHANE_ORDER, d, e).unwrap();
            assert_eq!(s.max_ratio_by_order.len(), MAX_KAHANE_ORDER);
            assert!(s.lambda.is_finite() && s.lambda < 10.0, "{s:?}");
        }
    }
}
