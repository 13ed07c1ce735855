//! Double-double arithmetic: an unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`,
//! giving roughly 106 significant bits.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// ln 2 split into non-overlapping doubles.
#[allow(clippy::approx_constant)]
pub(crate) const LN2_PARTS: [f64; 4] = [
    0.6931471805599453,
    2.3190468138462996e-17,
    5.707708438416212e-34,
    -3.5824322106018114e-50,
];

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let e = b - (s - a);
    (s, e)
}

#[inline]
pub(crate) fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let e = a.mul_add(b, -p);
    (p, e)
}

impl DoubleDouble {
    pub const ZERO: Self = Self { hi: 0.0, lo: 0.0 };
    pub const ONE: Self = Self { hi: 1.0, lo: 0.0 };
    pub const LN2: Self = Self {
        hi: LN2_PARTS[0],
        lo: LN2_PARTS[1],
    };

    #[inline]
    pub const fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    /// Builds a normalized value from two arbitrary doubles.
    #[inline]
    pub fn from_sum(a: f64, b: f64) -> Self {
        let (hi, lo) = two_sum(a, b);
        Self { hi, lo }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }

    #[inline]
    pub fn abs(self) -> Self {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }

    #[inline]
    pub fn signum(self) -> f64 {
        if self.hi > 0.0 {
            1.0
        } else if self.hi < 0.0 {
            -1.0
        } else if self.lo > 0.0 {
            1.0
        } else if self.lo < 0.0 {
            -1.0
        } else {
            0.0
        }
    }

    #[inline]
    pub fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        let e = e + self.lo * b;
        let (hi, lo) = quick_two_sum(p, e);
        Self { hi, lo }
    }

    #[inline]
    pub fn add_f64(self, b: f64) -> Self {
        let (s, e) = two_sum(self.hi, b);
        let e = e + self.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Self { hi, lo }
    }

    /// Multiplication by a power of two, exact barring over/underflow.
    #[inline]
    pub fn ldexp(self, k: i32) -> Self {
        if k.abs() > 1000 {
            let half = k / 2;
            return self.ldexp(half).ldexp(k - half);
        }
        let f = pow2(k);
        Self {
            hi: self.hi * f,
            lo: self.lo * f,
        }
    }

    #[inline]
    pub fn sqr(self) -> Self {
        self * self
    }

    /// `k * ln 2` to about 150 bits for `|k| < 2^52`.
    pub fn ln2_multiple(k: i64) -> Self {
        let kf = k as f64;
        let (p0, e0) = two_prod(kf, LN2_PARTS[0]);
        let (p1, e1) = two_prod(kf, LN2_PARTS[1]);
        let p2 = kf * LN2_PARTS[2];
        let t = Self::from_sum(p0, p1);
        t.add_f64(e0).add_f64(e1).add_f64(p2)
    }

    /// `exp(x) - 1` keeping full relative precision for small `x`.
    pub fn exp_m1(self) -> Self {
        if self.hi == 0.0 && self.lo == 0.0 {
            return Self::ZERO;
        }
        if self.hi.abs() > 0.3 {
            return self.exp() - Self::ONE;
        }
        self.exp_m1_kernel()
    }

    /// `exp(x) - 1` for `|x| <= ln2 / 2`.
    fn exp_m1_kernel(self) -> Self {
        // Scale down by 2^8, Taylor, then undo with em <- em (em + 2).
        const SQUARINGS: i32 = 8;
        let r = self.ldexp(-SQUARINGS);
        let mut term = r;
        let mut sum = r;
        let mut k = 2.0;
        loop {
            term = term * r / Self::from_f64(k);
            sum = sum + term;
            if term.hi.abs() <= 1e-36 * sum.hi.abs() {
                break;
            }
            k += 1.0;
        }
        for _ in 0..SQUARINGS {
            sum = sum * sum.add_f64(2.0);
        }
        sum
    }

    pub fn exp(self) -> Self {
        if self.hi > 709.8 {
            return Self::from_f64(f64::INFINITY);
        }
        if self.hi < -745.2 {
            return Self::ZERO;
        }
        let k = (self.hi / LN2_PARTS[0]).round() as i64;
        let r = self - Self::ln2_multiple(k);
        r.exp_m1_kernel().add_f64(1.0).ldexp(k as i32)
    }

    /// `ln(1 + x)` for `x > -1`, relative precision preserved near zero.
    pub fn ln_1p(self) -> Self {
        if self.hi == 0.0 && self.lo == 0.0 {
            return Self::ZERO;
        }
        if self.hi.abs() > 0.3 {
            return self.add_f64(1.0).ln();
        }
        let x0 = Self::from_f64(self.hi.ln_1p());
        // Newton on expm1(y) = x
        let em = x0.exp_m1();
        x0 - (em - self) / self.add_f64(1.0)
    }

    pub fn ln(self) -> Self {
        if self.hi <= 0.0 {
            return Self::from_f64(if self.hi == 0.0 {
                f64::NEG_INFINITY
            } else {
                f64::NAN
            });
        }
        if !self.hi.is_finite() {
            return self;
        }
        // x = m 2^e with m in [1/sqrt2, sqrt2)
        let mut e = frexp_exponent(self.hi);
        let mut m = self.ldexp(-e);
        if m.hi > std::f64::consts::SQRT_2 {
            m = m.ldexp(-1);
            e += 1;
        }
        let x0 = Self::from_f64(m.hi.ln());
        // y = m * exp(-x0) is close to one
        let y = m * (-x0).exp();
        Self::ln2_multiple(e as i64) + x0 + (y - Self::ONE).ln_1p_small()
    }

    /// One Newton-free correction for `ln(1 + d)`, `|d| < 1e-15`.
    #[inline]
    fn ln_1p_small(self) -> Self {
        self - self.sqr().mul_f64(0.5)
    }
}

/// Exponent `e` with `x = m 2^e`, `m in [1, 2)`; handles subnormals.
pub(crate) fn frexp_exponent(x: f64) -> i32 {
    let bits = x.abs().to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i32;
    if biased == 0 {
        let mant = bits & ((1u64 << 52) - 1);
        -1022 - (mant.leading_zeros() as i32 - 12) - 1
    } else {
        biased - 1023
    }
}

pub(crate) fn pow2(k: i32) -> f64 {
    if k > 1023 {
        f64::INFINITY
    } else if k >= -1022 {
        f64::from_bits(((k + 1023) as u64) << 52)
    } else if k >= -1074 {
        f64::from_bits(1u64 << (k + 1074))
    } else {
        0.0
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    #[inline]
    fn add(self, b: Self) -> Self {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let s2 = s2 + t1;
        let (s1, s2) = quick_two_sum(s1, s2);
        let s2 = s2 + t2;
        let (hi, lo) = quick_two_sum(s1, s2);
        Self { hi, lo }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    #[inline]
    fn sub(self, b: Self) -> Self {
        self + (-b)
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    #[inline]
    fn mul(self, b: Self) -> Self {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Self { hi, lo }
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    #[inline]
    fn div(self, b: Self) -> Self {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Self { hi, lo }.add_f64(q3)
    }
}

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi)? {
            Ordering::Equal => self.lo.partial_cmp(&other.lo),
            o => Some(o),
        }
    }
}
