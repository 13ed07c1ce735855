//! Geometry of the unit disk in gap-angle coordinates.
//!
//! A point is stored as `z = (1 - gap) e^{i theta}` with the radial gap kept in
//! the log domain, so radii such as `1 - 2^-60` or `1 - 2^-20 - e^{-2^20}` are
//! exact. The pseudo-hyperbolic distance is evaluated from
//!
//! ```text
//! rho^2 = ((s - t)^2 + 4 (1-u) sin^2(d/2)) / (u^2 + 4 (1-u) sin^2(d/2)),
//! u = s + t - s t,
//! ```
//!
//! which involves only sums of positive terms once `|s - t|` is known.

use crate::error::{Error, Result};
use crate::lognum::{log_add_exp, log_sub_exp, DoubleDouble, LogMagnitude};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::f64::consts::{PI, TAU};

/// Largest denominator exponent kept exactly for dyadic angles.
pub const MAX_DYADIC_EXP: u32 = 62;

/// A boundary direction: an exact dyadic fraction of a turn, or a double in radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Angle {
    /// `theta = 2 pi num / 2^den_exp`, reduced so that `num` is odd or zero.
    Dyadic { num: u64, den_exp: u32 },
    Radians(f64),
}

impl Angle {
    pub fn dyadic(num: u64, den_exp: u32) -> Self {
        assert!(den_exp <= MAX_DYADIC_EXP, "dyadic exponent too large");
        let mut num = num & ((1u64 << den_exp) - 1);
        let mut den_exp = den_exp;
        if num == 0 {
            return Self::Dyadic { num: 0, den_exp: 0 };
        }
        while num.is_multiple_of(2) {
            num /= 2;
            den_exp -= 1;
        }
        Self::Dyadic { num, den_exp }
    }

    pub fn radians(theta: f64) -> Self {
        Self::Radians(theta.rem_euclid(TAU))
    }

    pub fn to_radians(&self) -> f64 {
        match *self {
            Self::Dyadic { num, den_exp } => TAU * (num as f64) / (2f64).powi(den_exp as i32),
            Self::Radians(t) => t,
        }
    }

    /// Position as a fraction of a turn, in `[0, 1)`.
    pub fn turns(&self) -> f64 {
        match *self {
            Self::Dyadic { num, den_exp } => (num as f64) / (2f64).powi(den_exp as i32),
            Self::Radians(t) => (t / TAU).rem_euclid(1.0),
        }
    }

    /// `self - other` in turns, wrapped into `(-1/2, 1/2]`.
    ///
    /// Exact (before the final rounding) when both angles are dyadic.
    pub fn diff_turns(&self, other: &Self) -> f64 {
        match (*self, *other) {
            (
                Self::Dyadic { num: a, den_exp: ea },
                Self::Dyadic { num: b, den_exp: eb },
            ) => {
                let e = ea.max(eb);
                let full: i128 = 1i128 << e;
                let av = (a as i128) << (e - ea);
                let bv = (b as i128) << (e - eb);
                let mut d = (av - bv).rem_euclid(full);
                if 2 * d > full {
                    d -= full;
                }
                d as f64 / full as f64
            }
            _ => {
                let mut d = (self.turns() - other.turns()).rem_euclid(1.0);
                if d > 0.5 {
                    d -= 1.0;
                }
                d
            }
        }
    }

    pub fn same_as(&self, other: &Self) -> bool {
        match (*self, *other) {
            (Self::Dyadic { .. }, Self::Dyadic { .. }) => self == other,
            _ => self.diff_turns(other) == 0.0,
        }
    }
}

/// Radial gap `1 - |z|`, held as `base + excess`.
///
/// The split lets a twin point sit at gap `2^-m + e^{-2^m}(1 - 2^-m)`: the
/// difference to its partner is then `excess` itself, not a cancellation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub base: LogMagnitude,
    pub excess: LogMagnitude,
}

impl Gap {
    pub fn new(base: LogMagnitude) -> Self {
        Self {
            base,
            excess: LogMagnitude::Zero,
        }
    }

    pub fn with_excess(base: LogMagnitude, excess: LogMagnitude) -> Self {
        Self { base, excess }
    }

    pub fn from_f64(g: f64) -> Self {
        Self::new(LogMagnitude::from_f64(g))
    }

    pub fn value(&self) -> LogMagnitude {
        log_add_exp(self.base, self.excess)
    }

    pub fn to_f64(&self) -> f64 {
        self.base.to_f64() + self.excess.to_f64()
    }

    /// `|self - other|` together with the sign of `self - other`.
    pub fn difference(&self, other: &Gap) -> (LogMagnitude, Ordering) {
        let (a, b) = if self.base == other.base {
            (self.excess, other.excess)
        } else {
            (self.value(), other.value())
        };
        match a.total_cmp(&b) {
            Ordering::Equal => (LogMagnitude::Zero, Ordering::Equal),
            Ordering::Greater => (log_sub_exp(a, b).expect("ordered"), Ordering::Greater),
            Ordering::Less => (log_sub_exp(b, a).expect("ordered"), Ordering::Less),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiskPoint {
    pub angle: Angle,
    pub gap: Gap,
}

impl DiskPoint {
    pub fn new(angle: Angle, gap: Gap) -> Result<Self> {
        let g = gap.value();
        if g.is_zero() || g.total_cmp(&LogMagnitude::one()) == Ordering::Greater {
            return Err(Error::InvalidInput(format!(
                "gap must lie in (0, 1], got {:e}",
                g.to_f64()
            )));
        }
        Ok(Self { angle, gap })
    }

    pub fn origin() -> Self {
        Self {
            angle: Angle::Dyadic { num: 0, den_exp: 0 },
            gap: Gap::new(LogMagnitude::one()),
        }
    }

    /// `(1 - gap) e^{i theta}` from doubles.
    pub fn from_gap_f64(gap: f64, theta: f64) -> Self {
        Self::new(Angle::radians(theta), Gap::from_f64(gap)).expect("gap in (0, 1]")
    }

    pub fn from_complex(z: Complex64) -> Result<Self> {
        let r = z.norm();
        if r >= 1.0 {
            return Err(Error::InvalidInput(format!("|z| = {r} is not inside the disk")));
        }
        if r == 0.0 {
            return Ok(Self::origin());
        }
        Self::new(Angle::radians(z.arg()), Gap::from_f64(1.0 - r))
    }

    pub fn gap_f64(&self) -> f64 {
        self.gap.to_f64()
    }

    pub fn radius_f64(&self) -> f64 {
        1.0 - self.gap_f64()
    }

    /// Lossy conversion to a double-precision complex number.
    pub fn to_complex(&self) -> Complex64 {
        Complex64::from_polar(self.radius_f64(), self.angle.to_radians())
    }

    fn is_origin(&self) -> bool {
        self.gap.value() == LogMagnitude::ONE
    }

    /// Exact identity test on the stored representation.
    pub fn same_point(&self, other: &DiskPoint) -> bool {
        if self.is_origin() && other.is_origin() {
            return true;
        }
        self.gap.difference(&other.gap).1 == Ordering::Equal && self.angle.same_as(&other.angle)
    }
}

fn one_minus(x: LogMagnitude) -> LogMagnitude {
    log_sub_exp(LogMagnitude::one(), x).expect("value at most one")
}

/// Pieces shared by every two-point formula.
struct PairTerms {
    /// |s - t| and the sign of s - t (s = gap of the first point)
    dst: (LogMagnitude, Ordering),
    /// s + t - s t
    u: LogMagnitude,
    /// (1 - s)(1 - t)
    one_minus_u: LogMagnitude,
    /// first angle minus second, in turns
    dturns: f64,
}

fn pair_terms(z: &DiskPoint, w: &DiskPoint) -> PairTerms {
    let s = z.gap.value();
    let t = w.gap.value();
    let oms = one_minus(s);
    let omt = one_minus(t);
    PairTerms {
        dst: z.gap.difference(&w.gap),
        u: log_add_exp(s, t * oms),
        one_minus_u: oms * omt,
        dturns: z.angle.diff_turns(&w.angle),
    }
}

/// Pseudo-hyperbolic distance `|z - w| / |1 - conj(w) z|`.
pub fn rho(z: &DiskPoint, w: &DiskPoint) -> LogMagnitude {
    let p = pair_terms(z, w);
    let sigma = (PI * p.dturns).sin().abs();
    if sigma == 0.0 || p.one_minus_u.is_zero() {
        return p.dst.0 / p.u;
    }
    let cross = p.one_minus_u * LogMagnitude::from_f64(4.0 * sigma * sigma);
    let num = log_add_exp(p.dst.0.powi(2), cross);
    let den = log_add_exp(p.u.powi(2), cross);
    (num / den).sqrt()
}

/// Closed form of `rho` for two points on one ray: `|s - t| / (s + t - s t)`.
pub fn rho_collinear(s: &Gap, t: &Gap) -> LogMagnitude {
    let (dst, _) = s.difference(t);
    if dst.is_zero() {
        return LogMagnitude::Zero;
    }
    let sv = s.value();
    let u = log_add_exp(sv, t.value() * one_minus(sv));
    dst / u
}

/// `ln |b_pole(z)|`, `-inf` when `z` is the pole.
pub fn blaschke_factor_logmod(pole: &DiskPoint, z: &DiskPoint) -> DoubleDouble {
    rho(pole, z).ln_dd()
}

/// A nonzero complex number as `(ln |w|, arg w)`; zero has `ln_abs = -inf`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogComplex {
    pub ln_abs: DoubleDouble,
    pub arg: f64,
}

impl LogComplex {
    pub const ONE: Self = Self {
        ln_abs: DoubleDouble::ZERO,
        arg: 0.0,
    };

    pub fn zero() -> Self {
        Self {
            ln_abs: DoubleDouble::from_f64(f64::NEG_INFINITY),
            arg: 0.0,
        }
    }

    pub fn from_complex(w: Complex64) -> Self {
        let n = w.norm();
        if n == 0.0 {
            return Self::zero();
        }
        Self {
            ln_abs: DoubleDouble::from_f64(n.ln()),
            arg: w.arg(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.ln_abs.hi == f64::NEG_INFINITY
    }

    pub fn mul(self, other: Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        Self {
            ln_abs: self.ln_abs + other.ln_abs,
            arg: wrap_angle(self.arg + other.arg),
        }
    }

    pub fn recip(self) -> Self {
        assert!(!self.is_zero(), "reciprocal of zero");
        Self {
            ln_abs: -self.ln_abs,
            arg: wrap_angle(-self.arg),
        }
    }

    pub fn to_complex(self) -> Complex64 {
        if self.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(self.ln_abs.to_f64().exp(), self.arg)
    }
}

/// Wraps into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    r
}

/// `b_pole(z) = (z - pole) / (1 - conj(pole) z)` with modulus from [`rho`]
/// and phase from the rotated, cancellation-free numerator and denominator.
pub fn blaschke_factor(pole: &DiskPoint, z: &DiskPoint) -> LogComplex {
    let modulus = rho(pole, z);
    if modulus.is_zero() {
        return LogComplex::zero();
    }
    // rotate by the pole direction: z e^{-i beta} = (1-s) e^{i delta}
    let p = pair_terms(z, pole);
    let delta = TAU * p.dturns;
    let half = (0.5 * delta).sin();
    let one_minus_cos = 2.0 * half * half;
    let s = z.gap.value().to_f64();
    let oms = 1.0 - s;
    // t - s, signed, without cancellation
    let t_minus_s = match p.dst.1 {
        Ordering::Less => p.dst.0.to_f64(),
        Ordering::Greater => -p.dst.0.to_f64(),
        Ordering::Equal => 0.0,
    };
    let num = Complex64::new(t_minus_s - oms * one_minus_cos, oms * delta.sin());
    let omu = p.one_minus_u.to_f64();
    let den = Complex64::new(p.u.to_f64() + omu * one_minus_cos, -omu * delta.sin());
    let num_arg = if num.im == 0.0 && num.re == 0.0 {
        if p.dst.1 == Ordering::Greater {
            PI
        } else {
            0.0
        }
    } else {
        num.im.atan2(num.re)
    };
    LogComplex {
        ln_abs: modulus.ln_dd(),
        arg: wrap_angle(pole.angle.to_radians() + num_arg - den.arg()),
    }
}

/// Disk automorphism `(z - w) / (1 - conj(w) z)` at double precision.
pub fn mobius(w: Complex64, z: Complex64) -> Complex64 {
    (z - w) / (Complex64::new(1.0, 0.0) - w.conj() * z)
}

/// Closed boundary arc `[center - half_width, center + half_width]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub center: f64,
    pub half_width: f64,
}

impl Arc {
    pub fn new(center: f64, half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width <= PI) {
            return Err(Error::InvalidInput(format!(
                "arc half-width {half_width} outside (0, pi]"
            )));
        }
        Ok(Self {
            center: center.rem_euclid(TAU),
            half_width,
        })
    }

    pub fn full_circle() -> Self {
        Self {
            center: PI,
            half_width: PI,
        }
    }

    pub fn length(&self) -> f64 {
        2.0 * self.half_width
    }

    pub fn start(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn end(&self) -> f64 {
        self.center + self.half_width
    }

    pub fn contains(&self, theta: f64) -> bool {
        let d = wrap_angle(theta - self.center).abs();
        d <= self.half_width
    }

    /// Whether `other` lies inside `self`.
    pub fn covers(&self, other: &Arc) -> bool {
        if self.half_width >= PI {
            return true;
        }
        let d = wrap_angle(other.center - self.center).abs();
        d + other.half_width <= self.half_width + 1e-15
    }
}

/// Boundary arc `{e^{i theta} : |e^{i theta} - lambda| <= 2 (1 - |lambda|)}`.
///
/// With `g = 1 - |lambda|` the chord condition reads
/// `g^2 + 4 (1 - g) sin^2(phi/2) <= 4 g^2`, so the half-width is
/// `2 asin(g sqrt(3) / (2 sqrt(1 - g)))`, clamped to the full circle.
pub fn privalov_shadow(lambda: &DiskPoint) -> Result<Arc> {
    let g = lambda.gap_f64();
    if g >= 1.0 {
        return Err(Error::InvalidInput(
            "the shadow of the origin is undefined".into(),
        ));
    }
    let arg = g * 3f64.sqrt() / (2.0 * (1.0 - g).sqrt());
    let half_width = if arg >= 1.0 { PI } else { 2.0 * arg.asin() };
    Arc::new(lambda.angle.to_radians(), half_width)
}

/// Dyadic interval `I_{n,k} = [k 2^-n, (k+1) 2^-n)` turns and its Carleson box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CarlesonBox {
    pub n: u32,
    pub k: u64,
}

impl CarlesonBox {
    pub fn new(n: u32, k: u64) -> Result<Self> {
        if n > MAX_DYADIC_EXP || k >= (1u64 << n) {
            return Err(Error::InvalidInput(format!("no dyadic interval ({n}, {k})")));
        }
        Ok(Self { n, k })
    }

    /// `|I|` normalized to total length one.
    pub fn length(&self) -> f64 {
        (2f64).powi(-(self.n as i32))
    }

    pub fn arc(&self) -> Arc {
        let w = PI * self.length();
        Arc {
            center: TAU * (self.k as f64 + 0.5) * self.length(),
            half_width: w,
        }
    }

    /// Index of the depth-`n` interval containing the angle.
    pub fn locate(angle: &Angle, n: u32) -> u64 {
        match *angle {
            Angle::Dyadic { num, den_exp } => {
                if den_exp >= n {
                    num >> (den_exp - n)
                } else {
                    num << (n - den_exp)
                }
            }
            Angle::Radians(_) => {
                let t = angle.turns();
                let k = (t * (2f64).powi(n as i32)).floor() as u64;
                k.min((1u64 << n) - 1)
            }
        }
    }
}

/// `z` lies in `Q(I) = {r e^{i theta} : 1 - r < |I|, e^{i theta} in I}`.
pub fn box_contains(b: &CarlesonBox, z: &DiskPoint) -> bool {
    let len = LogMagnitude::pow2(-(b.n as i64));
    if z.gap.value().total_cmp(&len) != Ordering::Less {
        return false;
    }
    CarlesonBox::locate(&z.angle, b.n) == b.k
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(r: f64, theta: f64) -> DiskPoint {
        DiskPoint::from_gap_f64(1.0 - r, theta)
    }

    fn rho_direct(z: Complex64, w: Complex64) -> f64 {
        ((z - w) / (Complex64::new(1.0, 0.0) - w.conj() * z)).norm()
    }

    #[test]
    fn rho_from_origin_is_modulus() {
        let w = pt(0.3, 1.1);
        assert!((rho(&DiskPoint::origin(), &w).to_f64() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn rho_of_a_point_with_itself_is_zero() {
        let z = pt(0.7, 2.0);
        assert!(rho(&z, &z).is_zero());
    }

    #[test]
    fn rho_half_and_minus_half() {
        let z = pt(0.5, 0.0);
        let w = pt(0.5, PI);
        // |1| / |1.25|
        assert!((rho(&z, &w).to_f64() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn rho_collinear_examples() {
        let s = Gap::new(LogMagnitude::pow2(-2));
        assert!(rho_collinear(&s, &s).is_zero());
        let t = Gap::from_f64(0.4);
        let origin_gap = Gap::new(LogMagnitude::one());
        assert!((rho_collinear(&origin_gap, &t).to_f64() - 0.6).abs() < 1e-15);
        let t = Gap::new(LogMagnitude::pow2(-3));
        let expected = 0.125 / 0.34375;
        assert!((rho_collinear(&s, &t).to_f64() - expected).abs() < 1e-15);
        let cross = rho_direct(Complex64::new(0.75, 0.0), Complex64::new(0.875, 0.0));
        assert!((cross - expected).abs() < 1e-14);
    }

    #[test]
    fn blaschke_factor_special_cases() {
        let z = pt(0.6, 0.4);
        let l = blaschke_factor_logmod(&DiskPoint::origin(), &z).to_f64();
        assert!((l - 0.6f64.ln()).abs() < 1e-15);
        assert_eq!(blaschke_factor_logmod(&z, &z).hi, f64::NEG_INFINITY);
    }

    #[test]
    fn twin_pair_at_level_four() {
        let s = LogMagnitude::pow2(-4);
        let excess = LogMagnitude::exp_neg_pow2(4) * LogMagnitude::from_f64(1.0 - 1.0 / 16.0);
        let a = DiskPoint::new(Angle::dyadic(1, 1), Gap::new(s)).unwrap();
        let b = DiskPoint::new(Angle::dyadic(1, 1), Gap::with_excess(s, excess)).unwrap();
        let got = blaschke_factor_logmod(&a, &b).to_f64();
        // closed form e^{-16}(1-s) / (2s - s^2 + e^{-16}(1-s)^2), s = 1/16
        let eps = (-16f64).exp();
        let sf: f64 = 1.0 / 16.0;
        let expected = -16.0 + ((1.0 - sf) / (2.0 * sf - sf * sf + eps * (1.0 - sf).powi(2))).ln();
        assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
    }

    #[test]
    fn blaschke_factor_phase_matches_direct_complex() {
        let a = pt(0.4, 0.3);
        let z = pt(0.7, 2.5);
        let direct = mobius(a.to_complex(), z.to_complex());
        let got = blaschke_factor(&a, &z).to_complex();
        assert!((got - direct).norm() < 1e-14);
        // same ray, pole outside z
        let a = pt(0.9, 1.0);
        let z = pt(0.3, 1.0);
        let direct = mobius(a.to_complex(), z.to_complex());
        assert!((blaschke_factor(&a, &z).to_complex() - direct).norm() < 1e-14);
    }

    #[test]
    fn privalov_shadow_examples() {
        // gap 1/2: sin(phi/2) <= sqrt(3)/(2 sqrt 2)
        let l = pt(0.5, 0.0);
        let arc = privalov_shadow(&l).unwrap();
        let expected = 2.0 * (3f64.sqrt() / (2.0 * 2f64.sqrt())).asin();
        assert!((arc.half_width - expected).abs() < 1e-15);
        // clamp for large gaps
        let l = pt(0.2, 1.0);
        assert_eq!(privalov_shadow(&l).unwrap().half_width, PI);
        // endpoints satisfy the chord condition with equality
        for &g in &[0.25, 1e-3, 2f64.powi(-10), 1e-9] {
            let l = DiskPoint::from_gap_f64(g, 0.7);
            let arc = privalov_shadow(&l).unwrap();
            let end = Complex64::from_polar(1.0, arc.end());
            let chord = (end - l.to_complex()).norm();
            assert!(((chord - 2.0 * g) / g).abs() < 1e-6, "g = {g}");
        }
        assert!(privalov_shadow(&DiskPoint::origin()).is_err());
    }

    #[test]
    fn small_gap_shadow_series() {
        let g = 2f64.powi(-10);
        let arc = privalov_shadow(&DiskPoint::from_gap_f64(g, 0.0)).unwrap();
        // 2 asin(x) with x = sqrt(3) g / (2 sqrt(1-g)) = sqrt(3) g (1 + g/2 + ...)/2
        let series = 3f64.sqrt() * g * (1.0 + g / 2.0);
        assert!(((arc.half_width - series) / series).abs() < 1e-5);
        // ratio |I| / (2 pi) over 2 g / pi tends to sqrt(3) / 2
        let ratio = arc.length() / TAU / (g * 2.0 / PI);
        assert!((ratio - 3f64.sqrt() / 2.0).abs() < 1e-3);
    }

    #[test]
    fn nested_shadows_on_one_ray() {
        let a = privalov_shadow(&DiskPoint::from_gap_f64(0.1, 1.0)).unwrap();
        let b = privalov_shadow(&DiskPoint::from_gap_f64(0.01, 1.0)).unwrap();
        assert!(a.covers(&b));
    }

    #[test]
    fn box_membership() {
        let b = CarlesonBox::new(3, 5).unwrap();
        // gap equal to |I| is excluded
        let z = DiskPoint::new(Angle::dyadic(11, 4), Gap::new(LogMagnitude::pow2(-3))).unwrap();
        assert!(!box_contains(&b, &z));
        let z = DiskPoint::new(Angle::dyadic(11, 4), Gap::new(LogMagnitude::pow2(-4))).unwrap();
        assert!(box_contains(&b, &z));
        // right endpoint (k+1) 2^-n is outside
        let z = DiskPoint::new(Angle::dyadic(6, 3), Gap::new(LogMagnitude::pow2(-10))).unwrap();
        assert!(!box_contains(&b, &z));
        // left endpoint is inside
        let z = DiskPoint::new(Angle::dyadic(5, 3), Gap::new(LogMagnitude::pow2(-10))).unwrap();
        assert!(box_contains(&b, &z));
    }

    #[test]
    fn sequence_points_sit_in_their_boxes() {
        // a_m^{n,k} with m >= 2n lies in Q(I_{n,k})
        for n in 1..6u32 {
            for k in (1..(1u64 << n)).step_by(2) {
                for m in 2 * n..2 * n + 4 {
                    let z = DiskPoint::new(
                        Angle::dyadic(k, n),
                        Gap::new(LogMagnitude::pow2(-(m as i64))),
                    )
                    .unwrap();
                    assert!(box_contains(&CarlesonBox::new(n, k).unwrap(), &z));
                }
            }
        }
    }

    fn arb_point(max_r: f64) -> impl Strategy<Value = Complex64> {
        (0.0..max_r, 0.0..TAU).prop_map(|(r, t)| Complex64::from_polar(r, t))
    }

    proptest! {
        #[test]
        fn mobius_invariance(w in arb_point(0.9), z1 in arb_point(0.9), z2 in arb_point(0.9)) {
            let a = DiskPoint::from_complex(mobius(w, z1)).unwrap();
            let b = DiskPoint::from_complex(mobius(w, z2)).unwrap();
            let before = rho_direct(z1, z2);
            let after = rho(&a, &b).to_f64();
            prop_assume!(before > 1e-3);
            prop_assert!(((after - before) / before).abs() < 1e-12, "{} vs {}", after, before);
        }

        #[test]
        fn rho_matches_double_formula(z in arb_point(0.95), w in arb_point(0.95)) {
            let direct = rho_direct(z, w);
            prop_assume!(direct > 1e-3);
            let got = rho(&DiskPoint::from_complex(z).unwrap(), &DiskPoint::from_complex(w).unwrap()).to_f64();
            prop_assert!(((got - direct) / direct).abs() < 1e-12);
        }

        #[test]
        fn rho_is_symmetric(z in arb_point(0.99), w in arb_point(0.99)) {
            let a = DiskPoint::from_complex(z).unwrap();
            let b = DiskPoint::from_complex(w).unwrap();
            let d = rho(&a, &b).ln() - rho(&b, &a).ln();
            prop_assert!(d.abs() < 1e-14);
        }

        #[test]
        fn strong_triangle_inequality(a in arb_point(0.99), b in arb_point(0.99), c in arb_point(0.99)) {
            let (a, b, c) = (
                DiskPoint::from_complex(a).unwrap(),
                DiskPoint::from_complex(b).unwrap(),
                DiskPoint::from_complex(c).unwrap(),
            );
            let ac = rho(&a, &c).to_f64();
            let ab = rho(&a, &b).to_f64();
            let bc = rho(&b, &c).to_f64();
            prop_assert!(ac <= (ab + bc) / (1.0 + ab * bc) + 1e-12);
        }

        #[test]
        fn collinear_agrees_with_general(s in 1e-6f64..1.0, t in 1e-6f64..1.0, theta in 0.0..TAU) {
            let a = DiskPoint::from_gap_f64(s, theta);
            let b = DiskPoint::from_gap_f64(t, theta);
            let general = rho(&a, &b).to_f64();
            let closed = rho_collinear(&a.gap, &b.gap).to_f64();
            prop_assume!(closed > 0.0);
            prop_assert!(((general - closed) / closed).abs() < 1e-12);
        }
    }
}
