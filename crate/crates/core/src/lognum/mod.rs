//! Log-domain magnitudes.
//!
//! A [`LogMagnitude`] stores a positive real `x` through its logarithm
//! `ln x = exp2 * ln 2 + frac`, where `exp2` is an exact integer and `frac`
//! is a double-double residual in `[-ln2/2, ln2/2]`. Quantities such as
//! `exp(-2^50)` and `2^-60` are therefore representable without loss, and
//! exact zero is a separate variant.

mod dd;

pub use dd::DoubleDouble;

use crate::error::{Error, Result};
use dd::{frexp_exponent, LN2_PARTS};
use num_bigint::BigInt;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::ops::{Add, Div, Mul};
use std::sync::OnceLock;

/// Inputs whose magnitude exceeds this go through exact big-integer reduction.
const BIG_REDUCTION_THRESHOLD: f64 = 1048576.0;

/// Past this log-ratio the smaller addend is below double-double resolution.
const NEGLIGIBLE_LOG_RATIO: f64 = 80.0;

/// `floor(ln 2 * 2^256)`
const LN2_FIXED_256: &str =
    "80260960185991308862233904206310070533990667611589946606122867505419956976171";
const FIXED_BITS: u32 = 256;

fn ln2_fixed() -> &'static BigInt {
    static CELL: OnceLock<BigInt> = OnceLock::new();
    CELL.get_or_init(|| LN2_FIXED_256.parse().expect("constant parses"))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogMagnitude {
    #[default]
    Zero,
    Positive { exp2: i64, frac: DoubleDouble },
}

impl LogMagnitude {
    pub const ONE: Self = Self::Positive {
        exp2: 0,
        frac: DoubleDouble::ZERO,
    };

    pub fn zero() -> Self {
        Self::Zero
    }

    pub fn one() -> Self {
        Self::ONE
    }

    /// Exact `2^k`.
    pub fn pow2(k: i64) -> Self {
        Self::Positive {
            exp2: k,
            frac: DoubleDouble::ZERO,
        }
    }

    /// Converts a nonnegative finite double.
    ///
    /// Panics on negative, NaN or infinite input.
    pub fn from_f64(x: f64) -> Self {
        assert!(
            x >= 0.0 && x.is_finite(),
            "LogMagnitude::from_f64 requires a finite nonnegative value, got {x}"
        );
        if x == 0.0 {
            return Self::Zero;
        }
        let mut e = frexp_exponent(x);
        let mut m = DoubleDouble::from_f64(x).ldexp(-e);
        if m.hi > std::f64::consts::SQRT_2 {
            m = m.ldexp(-1);
            e += 1;
        }
        Self::Positive {
            exp2: e as i64,
            frac: m.ln(),
        }
    }

    /// `exp(x)` for a double-precision log value.
    pub fn from_ln(x: f64) -> Self {
        Self::from_ln_dd(DoubleDouble::from_f64(x))
    }

    /// `exp(x)` for a double-double log value. `-inf` maps to zero.
    pub fn from_ln_dd(x: DoubleDouble) -> Self {
        if x.hi == f64::NEG_INFINITY {
            return Self::Zero;
        }
        assert!(x.is_finite(), "LogMagnitude::from_ln_dd on non-finite log");
        if x.hi.abs() < BIG_REDUCTION_THRESHOLD {
            let k = (x.hi / LN2_PARTS[0]).round() as i64;
            Self::Positive {
                exp2: k,
                frac: reduce_small(x, k),
            }
        } else {
            let (k, frac) = reduce_big(x);
            Self::Positive { exp2: k, frac }
        }
    }

    /// `exp(-2^m)`, exact up to the residual precision.
    pub fn exp_neg_pow2(m: u32) -> Self {
        Self::from_ln_dd(DoubleDouble::from_f64(-(2f64.powi(m as i32))))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero)
    }

    /// Natural log as a double-double; `-inf` for zero.
    ///
    pub fn ln_dd(&self) -> DoubleDouble {
        match *self {
            Self::Zero => DoubleDouble::from_f64(f64::NEG_INFINITY),
            Self::Positive { exp2, frac } => {
                ln2_times(exp2) + frac
            }
        }
    }

    pub fn ln(&self) -> f64 {
        self.ln_dd().to_f64()
    }

    /// Integer and residual parts, `(exp2, frac)`; zero yields `None`.
    pub fn parts(&self) -> Option<(i64, DoubleDouble)> {
        match *self {
            Self::Zero => None,
            Self::Positive { exp2, frac } => Some((exp2, frac)),
        }
    }

    /// Builds from raw parts, renormalizing the residual.
    pub fn from_parts(exp2: i64, frac: DoubleDouble) -> Self {
        normalize(exp2, frac)
    }

    pub fn to_f64(&self) -> f64 {
        self.to_dd().to_f64()
    }

    /// Value as a double-double; saturates to zero or infinity outside the double range.
    pub fn to_dd(&self) -> DoubleDouble {
        match *self {
            Self::Zero => DoubleDouble::ZERO,
            Self::Positive { exp2, frac } => {
                if exp2 > 1100 {
                    DoubleDouble::from_f64(f64::INFINITY)
                } else if exp2 < -1200 {
                    DoubleDouble::ZERO
                } else if frac == DoubleDouble::ZERO {
                    DoubleDouble::ONE.ldexp(exp2 as i32)
                } else {
                    frac.exp().ldexp(exp2 as i32)
                }
            }
        }
    }

    pub fn recip(&self) -> Self {
        match *self {
            Self::Zero => panic!("reciprocal of zero LogMagnitude"),
            Self::Positive { exp2, frac } => normalize(-exp2, -frac),
        }
    }

    pub fn sqrt(&self) -> Self {
        match *self {
            Self::Zero => Self::Zero,
            Self::Positive { exp2, frac } => {
                let q = exp2.div_euclid(2);
                let r = exp2.rem_euclid(2);
                let mut f = frac.ldexp(-1);
                if r == 1 {
                    f = f + DoubleDouble::LN2.ldexp(-1);
                }
                normalize(q, f)
            }
        }
    }

    pub fn powi(&self, k: i64) -> Self {
        match *self {
            Self::Zero => {
                if k == 0 {
                    Self::ONE
                } else if k > 0 {
                    Self::Zero
                } else {
                    panic!("negative power of zero LogMagnitude")
                }
            }
            Self::Positive { exp2, frac } => normalize(
                exp2.checked_mul(k).expect("LogMagnitude exponent overflow"),
                frac.mul_f64(k as f64),
            ),
        }
    }

    /// `ln(self) - ln(other)` for positive operands.
    fn log_ratio(&self, other: &Self) -> DoubleDouble {
        match (*self, *other) {
            (Self::Positive { exp2: a, frac: fa }, Self::Positive { exp2: b, frac: fb }) => {
                ln2_times(a.saturating_sub(b)) + (fa - fb)
            }
            _ => panic!("log_ratio on zero"),
        }
    }

    /// `ln(1 + self)` as a double-double.
    pub fn ln_1p(&self) -> DoubleDouble {
        match *self {
            Self::Zero => DoubleDouble::ZERO,
            Self::Positive { .. } => {
                let l = self.ln_dd();
                if l.hi > NEGLIGIBLE_LOG_RATIO {
                    l + DoubleDouble::from_f64((-l.hi).exp())
                } else if l.hi < -NEGLIGIBLE_LOG_RATIO {
                    // ln(1+x) = x - x^2/2 with x < e^-80
                    let x = l.exp();
                    x - x.sqr().ldexp(-1)
                } else {
                    l.exp().ln_1p()
                }
            }
        }
    }

    pub fn total_cmp(&self, other: &Self) -> Ordering {
        match (self.is_zero(), other.is_zero()) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Less,
            (false, true) => Ordering::Greater,
            _ => {
                let d = self.log_ratio(other);
                if d.signum() > 0.0 {
                    Ordering::Greater
                } else if d.signum() < 0.0 {
                    Ordering::Less
                } else {
                    Ordering::Equal
                }
            }
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self.total_cmp(&other) == Ordering::Less {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: Self) -> Self {
        if self.total_cmp(&other) == Ordering::Greater {
            other
        } else {
            self
        }
    }
}

/// `k ln 2` as a double-double for any `k`.
fn ln2_times(k: i64) -> DoubleDouble {
    if k.unsigned_abs() < (1u64 << 52) {
        DoubleDouble::ln2_multiple(k)
    } else {
        let hi = k >> 32;
        let lo = k - (hi << 32);
        DoubleDouble::ln2_multiple(hi).ldexp(32) + DoubleDouble::ln2_multiple(lo)
    }
}

/// Residual `x - k ln2` for moderate `k`.
fn reduce_small(x: DoubleDouble, k: i64) -> DoubleDouble {
    if k == 0 {
        return x;
    }
    let kf = k as f64;
    let (p0, e0) = dd::two_prod(kf, LN2_PARTS[0]);
    let (p1, e1) = dd::two_prod(kf, LN2_PARTS[1]);
    let p2 = kf * LN2_PARTS[2];
    // x.hi and p0 are within a factor of two: the difference is exact
    let head = DoubleDouble::from_f64(x.hi - p0);
    head + DoubleDouble::from_sum(x.lo, -e0)
        - DoubleDouble::from_sum(p1, e1)
        - DoubleDouble::from_f64(p2)
}

/// Exact integer reduction of a large log value against 256 bits of ln 2.
fn reduce_big(x: DoubleDouble) -> (i64, DoubleDouble) {
    let scaled = f64_to_fixed(x.hi) + f64_to_fixed(x.lo);
    let ln2 = ln2_fixed();
    let twice: BigInt = &scaled * 2 + ln2;
    let period: BigInt = ln2 * 2;
    let mut k: BigInt = &twice / &period;
    // BigInt division truncates toward zero; we want floor((2x + ln2) / (2 ln2))
    if twice.is_negative() && !(&twice % &period).is_zero() {
        k -= 1;
    }
    let rem = scaled - &k * ln2;
    let k = k.to_i64().expect("log value exceeds the LogMagnitude range");
    (k, fixed_to_dd(&rem))
}

fn f64_to_fixed(x: f64) -> BigInt {
    if x == 0.0 {
        return BigInt::zero();
    }
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { -1 } else { 1 };
    let biased = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, exp) = if biased == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), biased - 1075)
    };
    let shift = exp + FIXED_BITS as i64;
    let m = BigInt::from(mant) * sign;
    if shift >= 0 {
        m << (shift as usize)
    } else {
        // truncation below 2^-256 is far beneath double-double resolution
        m >> ((-shift) as usize)
    }
}

fn fixed_to_dd(r: &BigInt) -> DoubleDouble {
    let hi_scaled = r.to_f64().unwrap_or(0.0);
    let hi_exact = BigInt::from_f64(hi_scaled).unwrap_or_default();
    let lo_scaled = (r - hi_exact).to_f64().unwrap_or(0.0);
    DoubleDouble::from_sum(hi_scaled, lo_scaled).ldexp(-(FIXED_BITS as i32))
}

fn normalize(exp2: i64, frac: DoubleDouble) -> LogMagnitude {
    if !frac.is_finite() {
        if frac.hi == f64::NEG_INFINITY {
            return LogMagnitude::Zero;
        }
        panic!("non-finite LogMagnitude residual");
    }
    if frac.hi.abs() <= 0.5 * LN2_PARTS[0] {
        return LogMagnitude::Positive { exp2, frac };
    }
    if frac.hi.abs() < BIG_REDUCTION_THRESHOLD {
        let k = (frac.hi / LN2_PARTS[0]).round() as i64;
        LogMagnitude::Positive {
            exp2: exp2.checked_add(k).expect("LogMagnitude exponent overflow"),
            frac: reduce_small(frac, k),
        }
    } else {
        let (k, f) = reduce_big(frac);
        LogMagnitude::Positive {
            exp2: exp2.checked_add(k).expect("LogMagnitude exponent overflow"),
            frac: f,
        }
    }
}

/// `a + b` in the log domain. Total and exactly commutative.
pub fn log_add_exp(a: LogMagnitude, b: LogMagnitude) -> LogMagnitude {
    if a.is_zero() {
        return b;
    }
    if b.is_zero() {
        return a;
    }
    let d = b.log_ratio(&a);
    // order the operands canonically so that a + b and b + a take one path
    let (big, d) = match d.signum() {
        s if s > 0.0 => (b, -d),
        s if s < 0.0 => (a, d),
        _ => {
            if repr_key(&a) >= repr_key(&b) {
                (a, d)
            } else {
                (b, d)
            }
        }
    };
    if d.hi < -NEGLIGIBLE_LOG_RATIO {
        return big;
    }
    let (e, f) = big.parts().expect("nonzero");
    normalize(e, f + d.exp().ln_1p())
}

fn repr_key(x: &LogMagnitude) -> (i64, u64, u64) {
    match *x {
        LogMagnitude::Zero => (i64::MIN, 0, 0),
        LogMagnitude::Positive { exp2, frac } => (exp2, frac.hi.to_bits(), frac.lo.to_bits()),
    }
}

/// `a - b` in the log domain; errors when `a < b`.
pub fn log_sub_exp(a: LogMagnitude, b: LogMagnitude) -> Result<LogMagnitude> {
    if b.is_zero() {
        return Ok(a);
    }
    if a.is_zero() {
        return Err(Error::InvalidSubtraction);
    }
    let d = a.log_ratio(&b);
    let s = d.signum();
    if s < 0.0 {
        return Err(Error::InvalidSubtraction);
    }
    if s == 0.0 {
        return Ok(LogMagnitude::Zero);
    }
    if d.hi > NEGLIGIBLE_LOG_RATIO {
        return Ok(a);
    }
    // a - b = a (1 - e^{-d}) = a * (-expm1(-d))
    let factor = -(-d).exp_m1();
    let (e, f) = a.parts().expect("nonzero");
    Ok(normalize(e, f + factor.ln()))
}

/// `ln(1 + e^l)` for a signed log value; `l = -inf` gives 0.
pub fn log1p_exp(l: f64) -> f64 {
    if l == f64::NEG_INFINITY {
        0.0
    } else if l > 40.0 {
        l + (-l).exp()
    } else if l < -40.0 {
        l.exp()
    } else {
        l.exp().ln_1p()
    }
}

impl Mul for LogMagnitude {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: Self) -> Self {
        match (self, rhs) {
            (Self::Positive { exp2: a, frac: fa }, Self::Positive { exp2: b, frac: fb }) => {
                normalize(
                    a.checked_add(b).expect("LogMagnitude exponent overflow"),
                    fa + fb,
                )
            }
            _ => Self::Zero,
        }
    }
}

impl Div for LogMagnitude {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Self) -> Self {
        self * rhs.recip()
    }
}

impl Add for LogMagnitude {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        log_add_exp(self, rhs)
    }
}

impl PartialOrd for LogMagnitude {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.total_cmp(other))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn doubling() {
        let one = LogMagnitude::one();
        assert_eq!((one + one).to_f64(), 2.0);
    }

    #[test]
    fn additive_identity() {
        let x = LogMagnitude::from_f64(3.75);
        assert_eq!(x + LogMagnitude::zero(), x);
        assert_eq!(LogMagnitude::zero() + x, x);
    }

    #[test]
    fn doubling_tiny_magnitude_adds_ln2() {
        let y = LogMagnitude::from_ln(-1024.0);
        let s = y + y;
        let expected = DoubleDouble::from_f64(-1024.0) + DoubleDouble::LN2;
        assert!((s.ln_dd() - expected).to_f64().abs() < 1e-28);
    }

    #[test]
    fn subtraction_basics() {
        let two = LogMagnitude::from_f64(2.0);
        let one = LogMagnitude::one();
        assert!(rel(log_sub_exp(two, one).unwrap().to_f64(), 1.0) < 1e-15);
        let x = LogMagnitude::from_f64(0.3);
        assert!(log_sub_exp(x, x).unwrap().is_zero());
        assert!(matches!(
            log_sub_exp(one, two),
            Err(Error::InvalidSubtraction)
        ));
    }

    #[test]
    fn subtraction_of_nearly_equal_values_keeps_bits() {
        let a = LogMagnitude::one();
        let b = LogMagnitude::from_f64(1.0 - 2f64.powi(-40));
        let d = log_sub_exp(a, b).unwrap();
        // exact answer 2^-40
        let err = d.log_ratio(&LogMagnitude::pow2(-40)).to_f64();
        assert!(err.abs() < 1e-18, "log error {err}");
    }

    #[test]
    fn log1p_exp_branches() {
        assert!((log1p_exp(0.0) - std::f64::consts::LN_2).abs() < 1e-16);
        assert_eq!(log1p_exp(f64::NEG_INFINITY), 0.0);
        assert_eq!(log1p_exp(1000.0), 1000.0);
        assert!(rel(log1p_exp(-50.0), (-50f64).exp()) < 1e-15);
        let mut prev = 0.0;
        for i in -200..200 {
            let v = log1p_exp(i as f64 * 0.5);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn exp_neg_pow2_is_exact_at_log_level() {
        for m in [4u32, 20, 40, 50, 60] {
            let x = LogMagnitude::exp_neg_pow2(m);
            let l = x.ln_dd();
            let target = -(2f64.powi(m as i32));
            // ln_dd is only double-double accurate relative to |l|
            assert!(((l.hi - target) + l.lo).abs() <= target.abs() * 1e-30 + 1e-28);
            // the residual itself is exact to ~1e-30
            let (k, f) = x.parts().unwrap();
            assert!(f.hi.abs() <= 0.5 * std::f64::consts::LN_2 + 1e-15);
            assert!(k < 0);
        }
    }

    #[test]
    fn big_and_small_reduction_agree_at_the_threshold() {
        let x = DoubleDouble::from_sum(-1048575.75, 1.0e-12);
        let (k_small, f_small) = {
            let k = (x.hi / LN2_PARTS[0]).round() as i64;
            (k, reduce_small(x, k))
        };
        let (k_big, f_big) = reduce_big(x);
        assert_eq!(k_small, k_big);
        assert!((f_small - f_big).to_f64().abs() < 1e-27);
    }

    #[test]
    fn sqrt_and_powi() {
        let x = LogMagnitude::from_f64(2.0);
        assert!(rel(x.sqrt().to_f64(), std::f64::consts::SQRT_2) < 1e-15);
        assert!(rel(LogMagnitude::pow2(-7).sqrt().to_f64(), 2f64.powf(-3.5)) < 1e-15);
        assert!(rel(x.powi(10).to_f64(), 1024.0) < 1e-15);
    }

    fn arb_log() -> impl Strategy<Value = LogMagnitude> {
        (-1048576.0f64..1048576.0).prop_map(LogMagnitude::from_ln)
    }

    proptest! {
        #[test]
        fn add_is_commutative(a in arb_log(), b in arb_log()) {
            prop_assert_eq!(a + b, b + a);
        }

        #[test]
        fn add_is_associative(a in arb_log(), b in arb_log(), c in arb_log()) {
            let l = (a + b) + c;
            let r = a + (b + c);
            let d = l.log_ratio(&r).to_f64();
            prop_assert!(d.abs() <= 1e-24, "log discrepancy {}", d);
        }

        #[test]
        fn sub_inverts_add(a in arb_log(), b in arb_log()) {
            prop_assume!(a.log_ratio(&b).to_f64() >= -(1e6f64).ln());
            let s = log_sub_exp(a + b, b).unwrap();
            let d = s.log_ratio(&a).to_f64();
            prop_assert!(d.abs() <= 1e-20, "log discrepancy {}", d);
        }

        #[test]
        fn agrees_with_doubles(x in 1e-150f64..1e150, y in 1e-150f64..1e150) {
            let a = LogMagnitude::from_f64(x);
            let b = LogMagnitude::from_f64(y);
            prop_assert!(rel((a + b).to_f64(), x + y) < 1e-12);
            prop_assert!(rel((a * b).to_f64(), x * y) < 1e-12);
            prop_assert!(rel((a / b).to_f64(), x / y) < 1e-12);
            let (hi, lo) = if x >= y { (a, b) } else { (b, a) };
            let diff = (x - y).abs();
            if diff > 1e-10 * x.max(y) {
                prop_assert!(rel(log_sub_exp(hi, lo).unwrap().to_f64(), diff) < 1e-12 * x.max(y) / diff);
            }
        }

        #[test]
        fn f64_round_trip(x in 1e-300f64..1e300) {
            prop_assert!(rel(LogMagnitude::from_f64(x).to_f64(), x) <= 1e-15);
        }
    }
}
