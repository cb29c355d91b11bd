//! Exact integer arithmetic behind the monotonicity split of the `λ(t)` curve.
//!
//! The derivative of `λ(t)` carries the polynomial
//!
//! ```text
//! ϑ(t,k) = (t^k−1)(t^{2k}−1) + kt(t^{k−2}−1)(t^{2k}−1) − 2k²t^k(t−1)(t^{k−1}−1)
//! ```
//!
//! Substituting `t = x+1` gives `ϑ₁(x,k)`, whose lowest non-zero power is `x⁴`.
//! Everything here is checked per `k` with big integers and rationals.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, Mul, Sub};

use crate::error::{check_order, Error, Result};

/// Polynomial with arbitrary-precision integer coefficients, `coeffs[n]` is
/// the coefficient of `x^n`. Trailing zeros are always trimmed, so the zero
/// polynomial has no coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExactPoly {
    coeffs: Vec<BigInt>,
}

impl ExactPoly {
    pub fn new(mut coeffs: Vec<BigInt>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn monomial(c: BigInt, power: usize) -> Self {
        let mut coeffs = vec![BigInt::zero(); power + 1];
        coeffs[power] = c;
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn coeff(&self, n: usize) -> BigInt {
        self.coeffs.get(n).cloned().unwrap_or_default()
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn scale(&self, c: &BigInt) -> Self {
        Self::new(self.coeffs.iter().map(|a| a * c).collect())
    }

    /// Horner evaluation at a rational point.
    pub fn eval(&self, x: &BigRational) -> BigRational {
        self.coeffs
            .iter()
            .rev()
            .fold(BigRational::zero(), |acc, c| {
                acc * x + BigRational::from_integer(c.clone())
            })
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(n, c)| c * BigInt::from(n))
                .collect(),
        )
    }

    /// Divides by `x^n`, which must divide the polynomial exactly.
    pub fn shift_down(&self, n: usize) -> Option<Self> {
        if self.coeffs.iter().take(n).any(|c| !c.is_zero()) {
            return None;
        }
        Some(Self::new(self.coeffs.iter().skip(n).cloned().collect()))
    }

    /// Sign changes in the coefficient sequence, zeros skipped.
    pub fn sign_changes(&self) -> usize {
        let signs: Vec<bool> = self
            .coeffs
            .iter()
            .filter(|c| !c.is_zero())
            .map(|c| c.is_positive())
            .collect();
        signs.windows(2).filter(|w| w[0] != w[1]).count()
    }
}

impl Add for &ExactPoly {
    type Output = ExactPoly;
    fn add(self, rhs: &ExactPoly) -> ExactPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        ExactPoly::new((0..n).map(|i| self.coeff(i) + rhs.coeff(i)).collect())
    }
}

impl Sub for &ExactPoly {
    type Output = ExactPoly;
    fn sub(self, rhs: &ExactPoly) -> ExactPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        ExactPoly::new((0..n).map(|i| self.coeff(i) - rhs.coeff(i)).collect())
    }
}

impl Mul for &ExactPoly {
    type Output = ExactPoly;
    fn mul(self, rhs: &ExactPoly) -> ExactPoly {
        if self.is_zero() || rhs.is_zero() {
            return ExactPoly::zero();
        }
        let mut out = vec![BigInt::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        ExactPoly::new(out)
    }
}

impl fmt::Display for ExactPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (n, c) in self.coeffs.iter().enumerate().filter(|(_, c)| !c.is_zero()) {
            if !first {
                write!(f, " {} ", if c.is_negative() { '-' } else { '+' })?;
            } else if c.is_negative() {
                write!(f, "-")?;
            }
            first = false;
            match n {
                0 => write!(f, "{}", c.abs())?,
                1 => write!(f, "{}x", c.abs())?,
                _ => write!(f, "{}x^{n}", c.abs())?,
            }
        }
        Ok(())
    }
}

pub fn binomial(n: u32, i: u32) -> BigInt {
    if i > n {
        return BigInt::zero();
    }
    let i = i.min(n - i);
    (0..i).fold(BigInt::one(), |acc, j| acc * BigInt::from(n - j) / BigInt::from(j + 1))
}

pub fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, j| acc * BigInt::from(j))
}

/// `Σ_{i=from}^{to} C(n,i) x^{i+shift}`; empty ranges give zero.
fn binomial_sum(n: u32, from: u32, to: u32, shift: usize) -> ExactPoly {
    let mut coeffs = vec![BigInt::zero(); to as usize + shift + 1];
    for i in from..=to {
        coeffs[i as usize + shift] = binomial(n, i);
    }
    ExactPoly::new(coeffs)
}

/// `ϑ₁(x,k) = ϑ(x+1,k)` assembled from the binomial expansions of each factor.
pub fn theta1_poly(k: u32) -> Result<ExactPoly> {
    check_order(k)?;
    let kb = BigInt::from(k);
    let one_plus_x = ExactPoly::new(vec![BigInt::one(), BigInt::one()]);
    // t^{2k} − 1
    let a = binomial_sum(2 * k, 1, 2 * k, 0);
    // (t^k − 1) + k t (t^{k−2} − 1)
    let b = &binomial_sum(k, 1, k, 0) + &(&one_plus_x * &binomial_sum(k - 2, 1, k - 2, 0)).scale(&kb);
    // t^k (t − 1)
    let c = binomial_sum(k, 0, k, 1);
    // t^{k−1} − 1
    let d = binomial_sum(k - 1, 1, k - 1, 0);
    Ok(&(&a * &b) - &(&c * &d).scale(&(BigInt::from(2) * &kb * &kb)))
}

/// `ϑ(t,k)` evaluated directly from its product form.
pub fn theta_product(k: u32, t: &BigRational) -> Result<BigRational> {
    check_order(k)?;
    let one = BigRational::one();
    let kr = BigRational::from_integer(BigInt::from(k));
    let p = |e: u32| -> BigRational { Pow::pow(t, e) };
    let first = (p(k) - &one) * (p(2 * k) - &one);
    let second = &kr * t * (p(k - 2) - &one) * (p(2 * k) - &one);
    let third = BigRational::from_integer(BigInt::from(2)) * &kr * &kr
        * p(k)
        * (t - &one)
        * (p(k - 1) - &one);
    Ok(first + second - third)
}

/// `k²(k−1)(2k²−k+3)/6`.
pub fn x4_coefficient(k: u32) -> BigInt {
    let k = BigInt::from(k);
    let two = BigInt::from(2);
    &k * &k * (&k - 1) * (&two * &k * &k - &k + 3) / 6
}

/// The coefficients of `x⁰..x³` vanish and that of `x⁴` matches
/// [`x4_coefficient`].
pub fn check_low_coeffs(k: u32) -> Result<bool> {
    let p = theta1_poly(k)?;
    Ok((0..4).all(|n| p.coeff(n).is_zero()) && p.coeff(4) == x4_coefficient(k))
}

/// Every coefficient from `x⁴` up to the degree is strictly positive.
pub fn check_nonneg_high_coeffs(k: u32) -> Result<bool> {
    let p = theta1_poly(k)?;
    let Some(deg) = p.degree() else {
        return Ok(false);
    };
    Ok(deg >= 4 && (4..=deg).all(|n| p.coeff(n).is_positive()))
}

/// `C(2k,i) ≥ 2k·C(k,i−1)`.
pub fn binomial_inequality_holds(k: u32, i: u32) -> bool {
    binomial(2 * k, i) >= BigInt::from(2 * k) * binomial(k, i - 1)
}

/// The same inequality after clearing denominators:
/// `(2k−1)!(k+1−i)! ≥ i·k!(2k−i)!`, for `1 ≤ i ≤ k+1`.
pub fn factorial_inequality_holds(k: u32, i: u32) -> bool {
    factorial(2 * k - 1) * factorial(k + 1 - i) >= BigInt::from(i) * factorial(k) * factorial(2 * k - i)
}

/// Both forms of the inequality hold for every `i` in `3..=k+1`.
pub fn check_binomial_inequality(k: u32) -> Result<bool> {
    check_order(k)?;
    Ok((3..=k + 1).all(|i| binomial_inequality_holds(k, i) && factorial_inequality_holds(k, i)))
}

/// `η(x+1) = ϑ₁(x,k)/x⁴`.
pub fn eta_poly(k: u32) -> Result<ExactPoly> {
    theta1_poly(k)?
        .shift_down(4)
        .ok_or(Error::LowCoefficientsNonzero(k))
}

/// `η(t) > 0` at every grid point, by exact evaluation at `x = t − 1`.
pub fn eta_positive_samples(k: u32, grid: &[BigRational]) -> Result<bool> {
    if let Some(t) = grid.iter().find(|t| !t.is_positive()) {
        return Err(Error::InvalidParameter(format!(
            "grid point t = {t} must be positive"
        )));
    }
    if !check_low_coeffs(k)? {
        return Err(Error::LowCoefficientsNonzero(k));
    }
    let eta = eta_poly(k)?;
    let one = BigRational::one();
    Ok(grid.iter().all(|t| eta.eval(&(t - &one)).is_positive()))
}

/// Rational sample points on both sides of `t = 1`, denominators ≤ 10⁶.
pub fn default_eta_grid() -> Vec<BigRational> {
    let r = |n: i64, d: i64| BigRational::new(BigInt::from(n), BigInt::from(d));
    vec![
        r(1, 1_000_000),
        r(1, 1000),
        r(1, 10),
        r(1, 2),
        r(9, 10),
        r(999_999, 1_000_000),
        r(1_000_001, 1_000_000),
        r(11, 10),
        r(3, 2),
        r(2, 1),
        r(10, 1),
        r(1000, 1),
    ]
}

/// `g(a) = 2^k a^{k+1} − λ(a+2)^k`, scaled by the denominator of `λ` so the
/// coefficients are integers with the same signs.
pub fn descartes_poly(k: u32, lambda: &BigRational) -> Result<ExactPoly> {
    check_order(k)?;
    if !lambda.is_positive() {
        return Err(Error::InvalidParameter(format!(
            "lambda = {lambda} must be positive"
        )));
    }
    let (num, den) = (lambda.numer(), lambda.denom());
    let two = BigInt::from(2);
    let lead = ExactPoly::monomial(Pow::pow(&two, k) * den, k as usize + 1);
    let tail = ExactPoly::new(
        (0..=k)
            .map(|j| num * binomial(k, j) * Pow::pow(&two, k - j))
            .collect(),
    );
    Ok(&lead - &tail)
}

pub fn descartes_sign_count(k: u32, lambda: &BigRational) -> Result<usize> {
    Ok(descartes_poly(k, lambda)?.sign_changes())
}

fn descartes_samples() -> Vec<BigRational> {
    let r = |n: i64, d: i64| BigRational::new(BigInt::from(n), BigInt::from(d));
    vec![r(1, 1000), r(1, 3), r(1, 1), r(2, 1), r(1000, 1)]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub k: u32,
    pub degree: usize,
    pub low_coeffs: bool,
    /// Coefficient of `x⁴`, as a decimal string.
    pub x4_coefficient: String,
    pub high_coeffs_positive: bool,
    pub binomial_inequality: bool,
    pub eta_positive: bool,
    pub product_form_agrees: bool,
    pub descartes_single_change: bool,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.degree == 3 * self.k as usize
            && self.low_coeffs
            && self.high_coeffs_positive
            && self.binomial_inequality
            && self.eta_positive
            && self.product_form_agrees
            && self.descartes_single_change
    }
}

pub fn verify_k(k: u32) -> Result<VerificationReport> {
    let theta1 = theta1_poly(k)?;
    let one = BigRational::one();
    let product_form_agrees = default_eta_grid()
        .iter()
        .map(|t| theta_product(k, t).map(|v| v == theta1.eval(&(t - &one))))
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .all(|b| b);
    let descartes_single_change = descartes_samples()
        .iter()
        .map(|l| descartes_sign_count(k, l))
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .all(|n| n == 1);
    let low_coeffs = check_low_coeffs(k)?;
    Ok(VerificationReport {
        k,
        degree: theta1.degree().unwrap_or(0),
        low_coeffs,
        x4_coefficient: theta1.coeff(4).to_string(),
        high_coeffs_positive: check_nonneg_high_coeffs(k)?,
        binomial_inequality: check_binomial_inequality(k)?,
        eta_positive: low_coeffs && eta_positive_samples(k, &default_eta_grid())?,
        product_form_agrees,
        descartes_single_change,
    })
}

pub const DEFAULT_K_MIN: u32 = 2;
pub const DEFAULT_K_MAX: u32 = 12;

pub fn verify_range(k_min: u32, k_max: u32) -> Result<Vec<VerificationReport>> {
    check_order(k_min)?;
    if k_max < k_min {
        return Err(Error::InvalidParameter(format!(
            "empty range {k_min}..={k_max}"
        )));
    }
    (k_min..=k_max).map(verify_k).collect()
}
