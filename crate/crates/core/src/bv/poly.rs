//! Scalars (exact rationals or floats) and univariate polynomials over them.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num::{BigInt, BigRational, Signed, ToPrimitive, Zero};

pub trait Scalar:
    Clone
    + PartialEq
    + PartialOrd
    + fmt::Debug
    + fmt::Display
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn ratio(n: i64, d: i64) -> Self;
    fn to_f64(&self) -> f64;
    fn abs(&self) -> Self;
    /// Exactly zero for rationals, within rounding for floats.
    fn negligible(&self) -> bool;
}

impl Scalar for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn ratio(n: i64, d: i64) -> Self {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
    fn negligible(&self) -> bool {
        self.is_zero()
    }
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn ratio(n: i64, d: i64) -> Self {
        n as f64 / d as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn negligible(&self) -> bool {
        f64::abs(*self) <= 1e-12
    }
}

/// Parses `p`, `p/q` or a terminating decimal into an exact rational.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if s.contains('/') {
        return BigRational::from_str(s).ok().filter(|r| !r.denom().is_zero());
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = BigInt::from_str(&format!("0{int}{frac}")).ok()?;
    let den = num::pow(BigInt::from(10), frac.len());
    let r = BigRational::new(digits, den);
    Some(if neg { -r } else { r })
}

/// `Σ c_k x^k`, trailing zeros trimmed.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly<S> {
    c: Vec<S>,
}

impl<S: Scalar> Poly<S> {
    pub fn new(mut c: Vec<S>) -> Self {
        while c.last().is_some_and(|v| *v == S::zero()) {
            c.pop();
        }
        Self { c }
    }

    pub fn constant(v: S) -> Self {
        Self::new(vec![v])
    }

    pub fn zero() -> Self {
        Self { c: Vec::new() }
    }

    pub fn coefficients(&self) -> &[S] {
        &self.c
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }

    /// Zero within [`Scalar::negligible`] coefficientwise.
    pub fn negligible(&self) -> bool {
        self.c.iter().all(Scalar::negligible)
    }

    pub fn eval(&self, x: &S) -> S {
        self.c.iter().rev().fold(S::zero(), |acc, c| acc * x.clone() + c.clone())
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        self.c.iter().rev().fold(0.0, |acc, c| acc * x + c.to_f64())
    }

    pub fn derivative(&self) -> Self {
        Self::new(self.c.iter().enumerate().skip(1).map(|(k, c)| c.clone() * S::ratio(k as i64, 1)).collect())
    }

    pub fn scale(&self, s: &S) -> Self {
        Self::new(self.c.iter().map(|c| c.clone() * s.clone()).collect())
    }

    pub fn powi(&self, n: u32) -> Self {
        (0..n).fold(Poly::constant(S::ratio(1, 1)), |acc, _| &acc * self)
    }
}

impl<S: Scalar> Add for &Poly<S> {
    type Output = Poly<S>;
    fn add(self, o: &Poly<S>) -> Poly<S> {
        let n = self.c.len().max(o.c.len());
        Poly::new((0..n).map(|k| self.c.get(k).cloned().unwrap_or_else(S::zero) + o.c.get(k).cloned().unwrap_or_else(S::zero)).collect())
    }
}

impl<S: Scalar> Sub for &Poly<S> {
    type Output = Poly<S>;
    fn sub(self, o: &Poly<S>) -> Poly<S> {
        self + &o.scale(&S::ratio(-1, 1))
    }
}

impl<S: Scalar> Mul for &Poly<S> {
    type Output = Poly<S>;
    fn mul(self, o: &Poly<S>) -> Poly<S> {
        if self.is_zero() || o.is_zero() {
            return Poly::zero();
        }
        let mut c = vec![S::zero(); self.c.len() + o.c.len() - 1];
        for (i, a) in self.c.iter().enumerate() {
            for (j, b) in o.c.iter().enumerate() {
                c[i + j] = c[i + j].clone() + a.clone() * b.clone();
            }
        }
        Poly::new(c)
    }
}

impl<S: Scalar> fmt::Display for Poly<S> {
    /// Ascending coefficient list, the fixture file spelling.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.c.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.c.iter().map(|c| c.to_string()).collect();
        write!(f, "{}", parts.join(" "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::ratio(n, d)
    }

    #[test]
    fn rational_parsing() {
        assert_eq!(parse_rational("3/4"), Some(q(3, 4)));
        assert_eq!(parse_rational("-0.125"), Some(q(-1, 8)));
        assert_eq!(parse_rational("7"), Some(q(7, 1)));
        assert_eq!(parse_rational(".5"), Some(q(1, 2)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("x"), None);
        assert_eq!(parse_rational("-"), None);
    }

    #[test]
    fn arithmetic() {
        // (1 + x)(1 − x) = 1 − x²
        let a = Poly::new(vec![q(1, 1), q(1, 1)]);
        let b = Poly::new(vec![q(1, 1), q(-1, 1)]);
        let p = &a * &b;
        assert_eq!(p.coefficients(), &[q(1, 1), q(0, 1), q(-1, 1)]);
        assert_eq!(p.derivative().coefficients(), &[q(0, 1), q(-2, 1)]);
        assert_eq!(p.eval(&q(1, 2)), q(3, 4));
        assert!((&p - &p).is_zero());
        assert_eq!(a.powi(3).eval(&q(1, 1)), q(8, 1));
        assert_eq!(p.to_string(), "1 0 -1");
    }
}
