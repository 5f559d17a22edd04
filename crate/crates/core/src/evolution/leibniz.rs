use std::ops::{Add, Mul, Sub};

use crate::grid::binomial;

/// Dense polynomial in `t`, coefficients in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Polynomial { coeffs }.trimmed()
    }

    pub fn constant(c: f64) -> Self {
        Polynomial::new(vec![c])
    }

    pub fn monomial(power: usize) -> Self {
        let mut coeffs = vec![0.0; power + 1];
        coeffs[power] = 1.0;
        Polynomial { coeffs }
    }

    fn trimmed(mut self) -> Self {
        while self.coeffs.len() > 1 && self.coeffs.last() == Some(&0.0) {
            self.coeffs.pop();
        }
        if self.coeffs.is_empty() {
            self.coeffs.push(0.0);
        }
        self
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    /// `k`-th derivative.
    pub fn derivative(&self, k: usize) -> Polynomial {
        if k > self.degree() {
            return Polynomial::constant(0.0);
        }
        let coeffs = (k..self.coeffs.len())
            .map(|i| self.coeffs[i] * ((i - k + 1)..=i).map(|m| m as f64).product::<f64>())
            .collect();
        Polynomial::new(coeffs)
    }

    /// `t^power * self`.
    pub fn shift(&self, power: usize) -> Polynomial {
        let mut coeffs = vec![0.0; power];
        coeffs.extend_from_slice(&self.coeffs);
        Polynomial::new(coeffs)
    }

    pub fn scale(&self, a: f64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|c| a * c).collect())
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).fold(0.0, f64::max)
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, other: &Polynomial) -> Polynomial {
        let len = self.coeffs.len().max(other.coeffs.len());
        let get = |p: &Polynomial, i: usize| p.coeffs.get(i).copied().unwrap_or(0.0);
        Polynomial::new((0..len).map(|i| get(self, i) + get(other, i)).collect())
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, other: &Polynomial) -> Polynomial {
        self + &other.scale(-1.0)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, other: &Polynomial) -> Polynomial {
        let mut coeffs = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Polynomial::new(coeffs)
    }
}

/// Both sides of
///
/// ```text
/// d^k (t^k f g) = sum_j C(k,j) d^j(t^j f) d^{k-j}(t^{k-j} g)
///               - k sum_j C(k-1,j) d^j(t^j f) d^{k-1-j}(t^{k-1-j} g)
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct LeibnizResidual {
    pub lhs: Polynomial,
    pub rhs: Polynomial,
    /// Largest coefficient of `lhs - rhs` relative to the largest of `lhs`.
    pub relative: f64,
}

/// Compares the two sides coefficient by coefficient; `k >= 1`.
pub fn leibniz_identity_check(f: &Polynomial, g: &Polynomial, k: usize) -> LeibnizResidual {
    assert!(k >= 1, "the identity needs k >= 1");
    let lhs = (&(f * g).shift(k)).derivative(k);
    let weighted = |p: &Polynomial, j: usize, order: usize| p.shift(j).derivative(order);
    let mut rhs = Polynomial::constant(0.0);
    for j in 0..=k {
        let term = &weighted(f, j, j) * &weighted(g, k - j, k - j);
        rhs = &rhs + &term.scale(binomial(k, j));
    }
    for j in 0..k {
        let term = &weighted(f, j, j) * &weighted(g, k - 1 - j, k - 1 - j);
        rhs = &rhs - &term.scale(k as f64 * binomial(k - 1, j));
    }
    let diff = (&lhs - &rhs).max_abs_coeff();
    let relative = diff / lhs.max_abs_coeff().max(f64::MIN_POSITIVE);
    LeibnizResidual { lhs, rhs, relative }
}
