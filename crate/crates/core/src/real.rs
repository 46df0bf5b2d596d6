//! Scalar abstraction for the shooting integrator.
//!
//! Trajectories near the separatrix separate from it like `exp(2κr)` in the
//! amplitude perturbation, so large balls need more than 53 bits of amplitude
//! resolution. The integrator is generic over this trait and runs either in
//! `f64` or in double-double ([`Dd`], ~106 bits).

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use twofloat::TwoFloat;

pub trait Real:
    Copy
    + Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Send
    + Sync
{
    /// Relative spacing of representable numbers near 1.
    const EPSILON: f64;

    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn powi(self, n: i32) -> Self;

    /// `num / den` rounded once in this precision.
    fn ratio(num: i64, den: i64) -> Self {
        Self::from_f64(num as f64) / Self::from_f64(den as f64)
    }

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn one() -> Self {
        Self::from_f64(1.0)
    }

    fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn is_finite(self) -> bool {
        self.to_f64().is_finite()
    }
}

impl Real for f64 {
    const EPSILON: f64 = f64::EPSILON;

    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

/// Double-double number backed by [`TwoFloat`] for addition and
/// multiplication. Division is done here: `TwoFloat / TwoFloat` in twofloat
/// 0.8 forms the residual `1 − b·(1/b)` without a fused multiply-add and only
/// keeps `f64` accuracy.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Dd(pub TwoFloat);

impl Dd {
    pub fn hi(self) -> f64 {
        self.0.hi()
    }

    pub fn lo(self) -> f64 {
        self.0.lo()
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd(TwoFloat::from(x))
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, rhs: Dd) -> Dd {
        Dd(self.0 + rhs.0)
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, rhs: Dd) -> Dd {
        Dd(self.0 - rhs.0)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, rhs: Dd) -> Dd {
        Dd(self.0 * rhs.0)
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, rhs: Dd) -> Dd {
        // long division: quotient by the leading word, then one correction
        let b = rhs.0.hi();
        let q1 = self.0 / b;
        let r = self.0 - q1 * rhs.0;
        Dd(q1 + r / b)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd(-self.0)
    }
}

impl AddAssign for Dd {
    fn add_assign(&mut self, rhs: Dd) {
        *self = *self + rhs;
    }
}

impl SubAssign for Dd {
    fn sub_assign(&mut self, rhs: Dd) {
        *self = *self - rhs;
    }
}

impl MulAssign for Dd {
    fn mul_assign(&mut self, rhs: Dd) {
        *self = *self * rhs;
    }
}

impl Real for Dd {
    const EPSILON: f64 = 1.0e-31;

    fn from_f64(x: f64) -> Self {
        Dd::from(x)
    }
    fn to_f64(self) -> f64 {
        self.0.hi() + self.0.lo()
    }
    fn sqrt(self) -> Self {
        Dd(self.0.sqrt())
    }
    fn abs(self) -> Self {
        Dd(self.0.abs())
    }
    fn powi(self, n: i32) -> Self {
        let mut acc = Dd::one();
        let mut base = self;
        let mut k = n.unsigned_abs();
        while k > 0 {
            if k & 1 == 1 {
                acc *= base;
            }
            base *= base;
            k >>= 1;
        }
        if n < 0 {
            Dd::one() / acc
        } else {
            acc
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_double_resolves_below_f64_epsilon() {
        let one = Dd::one();
        let tiny = Dd::from_f64(1e-25);
        let sum = one + tiny;
        assert!(sum > one);
        assert!(((sum - one).to_f64() - 1e-25).abs() < 1e-38);
    }

    #[test]
    fn ratio_is_correctly_rounded_in_double_double() {
        let r = <Dd as Real>::ratio(1, 3);
        let back = r * Dd::from_f64(3.0) - Dd::one();
        assert!(back.to_f64().abs() < 1e-31);
        let r = Dd::from_f64(7.0) / Dd::from_f64(0.1);
        assert!((r * Dd::from_f64(0.1) - Dd::from_f64(7.0)).to_f64().abs() < 1e-29);
        assert_eq!(<f64 as Real>::ratio(1, 4), 0.25);
    }

    #[test]
    fn powi_and_sqrt_agree_across_precisions() {
        let x = 1.7_f64;
        let dd = Dd::from_f64(x);
        assert!((Real::powi(dd, -3).to_f64() - x.powi(-3)).abs() < 1e-15);
        let back = Real::powi(dd, -3) * Real::powi(dd, 3) - Dd::one();
        assert!(back.to_f64().abs() < 1e-30);
        assert!((Real::sqrt(dd).to_f64() - x.sqrt()).abs() < 1e-15);
    }
}
