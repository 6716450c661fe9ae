//! Exact arithmetic in a real quadratic field Q(theta), theta^2 = t*theta + u.
//!
//! Elements are stored as p + q*theta with rational coefficients. This is
//! enough for golden-ratio-type spectral data: Perron eigenvalues of 2x2
//! substitution matrices, tile lengths, return vectors and the coefficients
//! of closed-form zeta functions all live here, and equality checks in tests
//! are exact instead of float comparisons.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num::rational::Ratio;
use num::{Signed, Zero};

pub type Rat = Ratio<i128>;

/// The defining data of the field: theta^2 = t*theta + u, with theta taken to
/// be the larger real root t/2 + sqrt(t^2/4 + u). Callers must pick (t, u)
/// with positive discriminant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QuadField {
    pub t: i64,
    pub u: i64,
}

impl QuadField {
    pub const fn new(t: i64, u: i64) -> Self {
        QuadField { t, u }
    }

    /// The golden field: theta = tau, tau^2 = tau + 1.
    pub const GOLDEN: QuadField = QuadField { t: 1, u: 1 };

    pub fn discriminant(&self) -> i64 {
        self.t * self.t + 4 * self.u
    }

    /// Numeric value of theta (the larger root).
    pub fn theta_f64(&self) -> f64 {
        let d = self.discriminant() as f64;
        (self.t as f64 + d.sqrt()) / 2.0
    }

    /// Numeric value of the Galois conjugate t - theta (the smaller root).
    pub fn conj_f64(&self) -> f64 {
        self.t as f64 - self.theta_f64()
    }
}

/// An element p + q*theta of the field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Quad {
    pub field: QuadField,
    pub p: Rat,
    pub q: Rat,
}

impl Quad {
    pub fn new(field: QuadField, p: Rat, q: Rat) -> Self {
        Quad { field, p, q }
    }

    pub fn from_ints(field: QuadField, p: i128, q: i128) -> Self {
        Quad::new(field, Rat::from_integer(p), Rat::from_integer(q))
    }

    pub fn rational(field: QuadField, p: Rat) -> Self {
        Quad::new(field, p, Rat::zero())
    }

    pub fn zero(field: QuadField) -> Self {
        Quad::from_ints(field, 0, 0)
    }

    pub fn one(field: QuadField) -> Self {
        Quad::from_ints(field, 1, 0)
    }

    pub fn theta(field: QuadField) -> Self {
        Quad::from_ints(field, 0, 1)
    }

    pub fn is_zero(&self) -> bool {
        self.p.is_zero() && self.q.is_zero()
    }

    pub fn is_rational(&self) -> bool {
        self.q.is_zero()
    }

    /// Galois conjugation theta -> t - theta.
    pub fn conj(&self) -> Self {
        let t = Rat::from_integer(self.field.t as i128);
        Quad::new(self.field, self.p + self.q * t, -self.q)
    }

    /// Field norm N(x) = x * conj(x), a rational number.
    pub fn norm(&self) -> Rat {
        let t = Rat::from_integer(self.field.t as i128);
        let u = Rat::from_integer(self.field.u as i128);
        // (p + q theta)(p + qt - q theta) = p^2 + pqt - q^2 u
        self.p * self.p + self.p * self.q * t - self.q * self.q * u
    }

    pub fn inv(&self) -> Self {
        let n = self.norm();
        assert!(!n.is_zero(), "division by zero in quadratic field");
        let c = self.conj();
        Quad::new(self.field, c.p / n, c.q / n)
    }

    /// Integer power, negative exponents via inversion.
    pub fn powi(&self, k: i32) -> Self {
        let mut base = if k < 0 { self.inv() } else { *self };
        let mut e = k.unsigned_abs();
        let mut acc = Quad::one(self.field);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }

    /// Numeric value under theta -> larger root.
    pub fn to_f64(&self) -> f64 {
        rat_f64(self.p) + rat_f64(self.q) * self.field.theta_f64()
    }

    /// Numeric value under the conjugate embedding theta -> smaller root.
    pub fn conj_f64(&self) -> f64 {
        rat_f64(self.p) + rat_f64(self.q) * self.field.conj_f64()
    }

    pub fn abs(&self) -> Self {
        if self.to_f64() < 0.0 {
            -*self
        } else {
            *self
        }
    }

    fn assert_same_field(&self, other: &Quad) {
        assert_eq!(
            self.field, other.field,
            "mixed quadratic fields in arithmetic"
        );
    }
}

pub fn rat_f64(r: Rat) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

impl Add for Quad {
    type Output = Quad;
    fn add(self, rhs: Quad) -> Quad {
        self.assert_same_field(&rhs);
        Quad::new(self.field, self.p + rhs.p, self.q + rhs.q)
    }
}

impl Sub for Quad {
    type Output = Quad;
    fn sub(self, rhs: Quad) -> Quad {
        self.assert_same_field(&rhs);
        Quad::new(self.field, self.p - rhs.p, self.q - rhs.q)
    }
}

impl Neg for Quad {
    type Output = Quad;
    fn neg(self) -> Quad {
        Quad::new(self.field, -self.p, -self.q)
    }
}

impl Mul for Quad {
    type Output = Quad;
    fn mul(self, rhs: Quad) -> Quad {
        self.assert_same_field(&rhs);
        let t = Rat::from_integer(self.field.t as i128);
        let u = Rat::from_integer(self.field.u as i128);
        // (p1 + q1 th)(p2 + q2 th) = p1p2 + q1q2*u + (p1q2 + q1p2 + q1q2*t) th
        let qq = self.q * rhs.q;
        Quad::new(
            self.field,
            self.p * rhs.p + qq * u,
            self.p * rhs.q + self.q * rhs.p + qq * t,
        )
    }
}

impl Div for Quad {
    type Output = Quad;
    fn div(self, rhs: Quad) -> Quad {
        #[allow(clippy::suspicious_arithmetic_impl)]
        {
            self * rhs.inv()
        }
    }
}

impl fmt::Display for Quad {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Rendered as "p + q·θ"; negative q prints as "p - |q|·θ".
        if self.q.is_negative() {
            write!(f, "{} - {}·θ", self.p, -self.q)
        } else {
            write!(f, "{} + {}·θ", self.p, self.q)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tau() -> Quad {
        Quad::theta(QuadField::GOLDEN)
    }

    #[test]
    fn golden_ratio_satisfies_its_equation() {
        let t = tau();
        assert_eq!(t * t, t + Quad::one(QuadField::GOLDEN));
        assert!((t.to_f64() - 1.618033988749895).abs() < 1e-14);
    }

    #[test]
    fn inversion_and_conjugation() {
        let t = tau();
        // 1/tau = tau - 1
        assert_eq!(t.inv(), t - Quad::one(QuadField::GOLDEN));
        // conj(tau) = 1 - tau, and N(tau) = tau * (1 - tau) = -1
        assert_eq!(t.conj(), Quad::one(QuadField::GOLDEN) - t);
        assert_eq!(t.norm(), Rat::from_integer(-1));
    }

    #[test]
    fn integer_powers_match_fibonacci_recursion() {
        // tau^n = F_n tau + F_{n-1}
        let t = tau();
        let mut fib = (1i128, 0i128); // (F_n, F_{n-1}) at n = 1
        for n in 1..=20 {
            let p = t.powi(n);
            assert_eq!(p.q, Rat::from_integer(fib.0), "F_{n}");
            assert_eq!(p.p, Rat::from_integer(fib.1), "F_{}", n - 1);
            fib = (fib.0 + fib.1, fib.0);
        }
        // negative powers: tau^-2 = 2 - tau
        assert_eq!(t.powi(-2), Quad::from_ints(QuadField::GOLDEN, 2, -1));
    }

    #[test]
    fn rendering() {
        let x = Quad::from_ints(QuadField::GOLDEN, 2, -1);
        assert_eq!(x.to_string(), "2 - 1·θ");
        let y = Quad::new(
            QuadField::GOLDEN,
            Rat::new(1, 2),
            Rat::new(3, 4),
        );
        assert_eq!(y.to_string(), "1/2 + 3/4·θ");
    }

    #[test]
    fn squared_golden_field_for_f2_eigenvalues() {
        // theta = tau^2 satisfies theta^2 = 3 theta - 1.
        let f = QuadField::new(3, -1);
        let th = Quad::theta(f);
        assert!((th.to_f64() - 2.618033988749895).abs() < 1e-14);
        // tau = theta - 1 inside this field; tau^2 = theta.
        let tau_here = th - Quad::one(f);
        assert_eq!(tau_here * tau_here, th);
    }
}
