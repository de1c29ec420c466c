//! Minimal forward-mode automatic differentiation.
//!
//! Model right-hand sides and observation maps are written once, generically
//! over [`Scalar`], and evaluated with `f64` for values, [`Dual`] for
//! directional derivatives and [`HyperDual`] for mixed second directional
//! derivatives. The real part of every operation is computed with exactly the
//! same floating-point operation as the plain `f64` path, so trajectories
//! obtained through dual evaluation are bit-identical to plain ones.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Number type accepted by model code.
pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + 'static
{
    fn constant(v: f64) -> Self;
    fn re(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sqrt(self) -> Self;
    fn powi(self, n: i32) -> Self;
}

impl Scalar for f64 {
    #[inline]
    fn constant(v: f64) -> Self {
        v
    }
    #[inline]
    fn re(self) -> f64 {
        self
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

/// First-order dual number `re + eps·ε`, `ε² = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Dual {
    pub re: f64,
    pub eps: f64,
}

impl Dual {
    #[inline]
    pub fn new(re: f64, eps: f64) -> Self {
        Self { re, eps }
    }

    #[inline]
    fn chain(self, f: f64, df: f64) -> Self {
        Self::new(f, df * self.eps)
    }
}

/// Hyper-dual number `re + e1·ε₁ + e2·ε₂ + e12·ε₁ε₂` with `ε₁² = ε₂² = 0`.
///
/// Seeding an input as `x + a ε₁ + b ε₂ + c ε₁ε₂` yields
/// `f(x) + Df[a] ε₁ + Df[b] ε₂ + (D²f[a, b] + Df[c]) ε₁ε₂`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct HyperDual {
    pub re: f64,
    pub e1: f64,
    pub e2: f64,
    pub e12: f64,
}

impl HyperDual {
    #[inline]
    pub fn new(re: f64, e1: f64, e2: f64, e12: f64) -> Self {
        Self { re, e1, e2, e12 }
    }

    #[inline]
    fn chain(self, f: f64, df: f64, d2f: f64) -> Self {
        Self::new(
            f,
            df * self.e1,
            df * self.e2,
            df * self.e12 + d2f * self.e1 * self.e2,
        )
    }
}

macro_rules! impl_common_ops {
    ($t:ident, $($field:ident),+) => {
        impl Add for $t {
            type Output = Self;
            #[inline]
            fn add(self, o: Self) -> Self {
                Self { $($field: self.$field + o.$field),+ }
            }
        }
        impl Sub for $t {
            type Output = Self;
            #[inline]
            fn sub(self, o: Self) -> Self {
                Self { $($field: self.$field - o.$field),+ }
            }
        }
        impl Neg for $t {
            type Output = Self;
            #[inline]
            fn neg(self) -> Self {
                Self { $($field: -self.$field),+ }
            }
        }
        impl Mul<f64> for $t {
            type Output = Self;
            #[inline]
            fn mul(self, c: f64) -> Self {
                Self { $($field: self.$field * c),+ }
            }
        }
        impl Div<f64> for $t {
            type Output = Self;
            #[inline]
            fn div(self, c: f64) -> Self {
                Self { $($field: self.$field / c),+ }
            }
        }
        impl Add<f64> for $t {
            type Output = Self;
            #[inline]
            fn add(self, c: f64) -> Self {
                let mut out = self;
                out.re = self.re + c;
                out
            }
        }
        impl Sub<f64> for $t {
            type Output = Self;
            #[inline]
            fn sub(self, c: f64) -> Self {
                let mut out = self;
                out.re = self.re - c;
                out
            }
        }
        impl AddAssign for $t {
            #[inline]
            fn add_assign(&mut self, o: Self) {
                *self = *self + o;
            }
        }
        impl SubAssign for $t {
            #[inline]
            fn sub_assign(&mut self, o: Self) {
                *self = *self - o;
            }
        }
        impl MulAssign for $t {
            #[inline]
            fn mul_assign(&mut self, o: Self) {
                *self = *self * o;
            }
        }
    };
}

impl_common_ops!(Dual, re, eps);
impl_common_ops!(HyperDual, re, e1, e2, e12);

impl Mul for Dual {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Self::new(self.re * o.re, self.re * o.eps + self.eps * o.re)
    }
}

impl Div for Dual {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let q = self.re / o.re;
        Self::new(q, (self.eps - q * o.eps) / o.re)
    }
}

impl Mul for HyperDual {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.re * o.re,
            self.re * o.e1 + self.e1 * o.re,
            self.re * o.e2 + self.e2 * o.re,
            self.re * o.e12 + self.e1 * o.e2 + self.e2 * o.e1 + self.e12 * o.re,
        )
    }
}

impl Div for HyperDual {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        // Solve self = q * o component by component.
        let q = self.re / o.re;
        let q1 = (self.e1 - q * o.e1) / o.re;
        let q2 = (self.e2 - q * o.e2) / o.re;
        let q12 = (self.e12 - q1 * o.e2 - q2 * o.e1 - q * o.e12) / o.re;
        Self::new(q, q1, q2, q12)
    }
}

impl Scalar for Dual {
    #[inline]
    fn constant(v: f64) -> Self {
        Self::new(v, 0.0)
    }
    #[inline]
    fn re(self) -> f64 {
        self.re
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e)
    }
    fn ln(self) -> Self {
        self.chain(self.re.ln(), 1.0 / self.re)
    }
    fn sin(self) -> Self {
        self.chain(self.re.sin(), self.re.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.re.cos(), -self.re.sin())
    }
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        self.chain(s, 0.5 / s)
    }
    fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Self::constant(1.0);
        }
        self.chain(self.re.powi(n), f64::from(n) * self.re.powi(n - 1))
    }
}

impl Scalar for HyperDual {
    #[inline]
    fn constant(v: f64) -> Self {
        Self::new(v, 0.0, 0.0, 0.0)
    }
    #[inline]
    fn re(self) -> f64 {
        self.re
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e, e)
    }
    fn ln(self) -> Self {
        let inv = 1.0 / self.re;
        self.chain(self.re.ln(), inv, -inv * inv)
    }
    fn sin(self) -> Self {
        let (s, c) = self.re.sin_cos();
        self.chain(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = self.re.sin_cos();
        self.chain(c, -s, -c)
    }
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.re))
    }
    fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Self::constant(1.0);
        }
        let nf = f64::from(n);
        let d2 = if n == 1 {
            0.0
        } else {
            nf * (nf - 1.0) * self.re.powi(n - 2)
        };
        self.chain(self.re.powi(n), nf * self.re.powi(n - 1), d2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly<S: Scalar>(x: S, y: S) -> S {
        x * x * y - (x / y).exp() + y.sin() * 3.0
    }

    #[test]
    fn dual_matches_analytic_derivative() {
        let (x, y) = (0.7, 1.3);
        let d = poly(Dual::new(x, 1.0), Dual::constant(y));
        let expected = 2.0 * x * y - (x / y).exp() / y;
        assert!((d.eps - expected).abs() < 1e-13);
        assert_eq!(d.re, poly(x, y));
    }

    #[test]
    fn hyperdual_mixed_second_derivative() {
        let (x, y) = (0.7, 1.3);
        let h = poly(HyperDual::new(x, 1.0, 0.0, 0.0), HyperDual::new(y, 0.0, 1.0, 0.0));
        // d²/dxdy of x²y − exp(x/y) + 3 sin y
        let e = (x / y).exp();
        let expected = 2.0 * x + e / (y * y) + x * e / (y * y * y);
        assert!((h.e12 - expected).abs() < 1e-12, "{} vs {}", h.e12, expected);
        assert_eq!(h.re, poly(x, y));
    }

    #[test]
    fn hyperdual_same_direction_gives_second_derivative() {
        let x = 0.4;
        let h = HyperDual::new(x, 1.0, 1.0, 0.0).sqrt().ln();
        // f = ½ ln x, f'' = −½ x⁻²
        assert!((h.e12 + 0.5 / (x * x)).abs() < 1e-12);
        let p = HyperDual::new(x, 1.0, 1.0, 0.0).powi(3);
        assert!((p.e12 - 6.0 * x).abs() < 1e-12);
    }
}
