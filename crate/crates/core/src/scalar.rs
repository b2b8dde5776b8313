//! Scalar abstractions shared by the algebraic and analytic layers.
//!
//! [`Scalar`] is the ring interface used by Lie-algebra arithmetic and BCH
//! evaluation; it is implemented for `f64`, exact rationals and [`Jet`]s.
//! [`Real`] adds the elementary functions needed to evaluate metric
//! expressions and connection forms; it is implemented for `f64` and [`Jet`].
//!
//! [`Jet`]: crate::jet::Jet

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, ToPrimitive, Zero};
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Ring operations plus conversion from floating point constants.
pub trait Scalar:
    Clone
    + Debug
    + Send
    + Sync
    + Zero
    + One
    + FromPrimitive
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("finite constant")
    }

    /// Exact rational constant `num/den`.
    fn from_ratio(num: &BigInt, den: &BigInt) -> Self;

    /// Nearest double of the value (the constant term for jets).
    fn re(&self) -> f64;
}

/// Scalars supporting division and the elementary functions.
pub trait Real: Scalar + Div<Output = Self> {
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tan(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn powf(self, a: f64) -> Self;
    /// `deriv`-th derivative of the smooth compactly supported profile
    /// `s ↦ exp(1 − 1/(1 − s))` for `s < 1`, zero for `s ≥ 1`.
    fn bump(self, deriv: u32) -> Self;

    /// Size used to truncate series: `|x|`, or the largest jet coefficient.
    fn magnitude(&self) -> f64;

    fn recip(self) -> Self {
        Self::one() / self
    }
}

impl Scalar for f64 {
    fn from_ratio(num: &BigInt, den: &BigInt) -> Self {
        BigRational::new(num.clone(), den.clone())
            .to_f64()
            .unwrap_or(f64::NAN)
    }

    fn re(&self) -> f64 {
        *self
    }
}

impl Real for f64 {
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn tan(self) -> Self {
        f64::tan(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn powf(self, a: f64) -> Self {
        f64::powf(self, a)
    }
    fn bump(self, deriv: u32) -> Self {
        bump_taylor(self, deriv as usize)[deriv as usize] * factorial(deriv as usize)
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl Scalar for BigRational {
    fn from_ratio(num: &BigInt, den: &BigInt) -> Self {
        BigRational::new(num.clone(), den.clone())
    }

    fn re(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Taylor coefficients `c_0..=c_order` of the bump profile expanded at `s0`.
pub(crate) fn bump_taylor(s0: f64, order: usize) -> Vec<f64> {
    let mut out = vec![0.0; order + 1];
    if !(s0 < 1.0) {
        return out;
    }
    let d = 1.0 - s0;
    // u(h) = 1 - 1/(d - h) = 1 - sum_j h^j / d^{j+1}
    let mut u = vec![0.0; order + 1];
    let mut p = 1.0 / d;
    for (j, uj) in u.iter_mut().enumerate() {
        *uj = -p;
        if j == 0 {
            *uj += 1.0;
        }
        p /= d;
    }
    // exp of a power series: e' = u' e
    out[0] = u[0].exp();
    for k in 1..=order {
        let mut acc = 0.0;
        for j in 1..=k {
            acc += j as f64 * u[j] * out[k - j];
        }
        out[k] = acc / k as f64;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_vanishes_outside_support() {
        assert_eq!(Real::bump(1.0_f64, 0), 0.0);
        assert_eq!(Real::bump(2.5_f64, 3), 0.0);
        assert!((Real::bump(0.0_f64, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bump_derivative_matches_finite_difference() {
        let s = 0.3_f64;
        let h = 1e-5;
        for d in 0..3u32 {
            let fd = (Real::bump(s + h, d) - Real::bump(s - h, d)) / (2.0 * h);
            let exact = Real::bump(s, d + 1);
            assert!((fd - exact).abs() < 1e-6 * exact.abs().max(1.0), "d={d}");
        }
    }
}
