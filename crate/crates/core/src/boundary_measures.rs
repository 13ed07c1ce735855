//! Positive measures on the circle (atoms plus piecewise-constant arc densities),
//! their Poisson and Herglotz transforms, and convex gauges.
//!
//! Normalization: `P[mu](z) = int P(z, theta) dmu(theta)` where an atom contributes
//! `mass * P(z, theta)` with `P(0, .) = 1`, and a density of height `h` on an arc
//! contributes `h * omega(z, arc)`, `omega` being harmonic measure. Hence
//! `P[mu](0)` is the total mass `sum mass + sum h |arc| / (2 pi)`.
//!
//! For `z = (1 - g) e^{i alpha}` and `phi = theta - alpha`:
//!
//! ```text
//! P(z, theta)   = g (2 - g) / D,        D = g^2 + 4 (1 - g) sin^2(phi / 2)
//! omega(z, arc) = (1 / pi) atan2(sin(d / 2), c1 c2 / K + K s1 s2)
//! ```
//!
//! with `K = (2 - g) / g`, `c_i = cos(phi_i / 2)`, `s_i = sin(phi_i / 2)`,
//! `d = phi_2 - phi_1`, and `phi_i` in `[-pi, pi]` (arcs are split at the antipode of `z`).

use crate::disk_geom::{privalov_shadow, Angle, Arc, DiskPoint};
use crate::error::{Error, Result};
use crate::quadrature::{graded_breaks, integrate_breaks, normalize_breaks, Neumaier, QuadOptions};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::f64::consts::{LN_2, PI, TAU};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom {
    pub angle: Angle,
    pub mass: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArcDensity {
    pub arc: Arc,
    pub height: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMeasure {
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(default)]
    pub arcs: Vec<ArcDensity>,
}

#[derive(Serialize, Deserialize)]
struct AtomRepr {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    angle_turns: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    angle_rad: Option<f64>,
    mass: f64,
}

impl Serialize for Atom {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = match self.angle {
            Angle::Dyadic { .. } => AtomRepr {
                angle_turns: Some(self.angle.turns()),
                angle_rad: None,
                mass: self.mass,
            },
            Angle::Radians(t) => AtomRepr {
                angle_turns: None,
                angle_rad: Some(t),
                mass: self.mass,
            },
        };
        repr.serialize(s)
    }
}

/// Turns that are exact dyadic fractions map back to exact dyadic angles.
fn angle_from_turns(t: f64) -> Angle {
    let t = t.rem_euclid(1.0);
    for e in 0..=52u32 {
        let scaled = t * (2f64).powi(e as i32);
        if scaled.fract() == 0.0 {
            return Angle::dyadic(scaled as u64, e);
        }
    }
    Angle::radians(TAU * t)
}

impl<'de> Deserialize<'de> for Atom {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = AtomRepr::deserialize(d)?;
        let angle = match (r.angle_turns, r.angle_rad) {
            (Some(t), None) => angle_from_turns(t),
            (None, Some(a)) => Angle::radians(a),
            _ => {
                return Err(serde::de::Error::custom(
                    "atom needs exactly one of angle_turns, angle_rad",
                ))
            }
        };
        Ok(Atom { angle, mass: r.mass })
    }
}

#[derive(Serialize, Deserialize)]
struct ArcRepr {
    center_rad: f64,
    halfwidth_rad: f64,
    height: f64,
}

impl Serialize for ArcDensity {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ArcRepr {
            center_rad: self.arc.center,
            halfwidth_rad: self.arc.half_width,
            height: self.height,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ArcDensity {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = ArcRepr::deserialize(d)?;
        let arc = Arc::new(r.center_rad, r.halfwidth_rad).map_err(serde::de::Error::custom)?;
        Ok(ArcDensity { arc, height: r.height })
    }
}

impl BoundaryMeasure {
    pub fn new(atoms: Vec<Atom>, arcs: Vec<ArcDensity>) -> Result<Self> {
        let m = Self { atoms, arcs };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let bad_atom = self.atoms.iter().any(|a| !(a.mass >= 0.0 && a.mass.is_finite()));
        let bad_arc = self.arcs.iter().any(|a| !(a.height >= 0.0 && a.height.is_finite()));
        if bad_atom || bad_arc {
            return Err(Error::InvalidInput(
                "measure masses and heights must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn uniform(height: f64) -> Self {
        Self {
            atoms: vec![],
            arcs: vec![ArcDensity {
                arc: Arc::full_circle(),
                height,
            }],
        }
    }

    pub fn atom(angle: Angle, mass: f64) -> Self {
        Self {
            atoms: vec![Atom { angle, mass }],
            arcs: vec![],
        }
    }

    pub fn total_mass(&self) -> f64 {
        let mut acc = Neumaier::default();
        for a in &self.atoms {
            acc.add(a.mass);
        }
        for a in &self.arcs {
            acc.add(a.height * a.arc.length() / TAU);
        }
        acc.sum()
    }

    /// `L^1` norm of the density part, `dtheta / 2 pi` normalization.
    pub fn density_norm(&self) -> f64 {
        self.arcs.iter().map(|a| a.height * a.arc.length() / TAU).sum()
    }

    /// Density at `theta`, arcs only.
    pub fn density_at(&self, theta: f64) -> f64 {
        self.arcs
            .iter()
            .filter(|a| a.arc.contains(theta))
            .map(|a| a.height)
            .sum()
    }

    /// Arc endpoints and atom angles, in radians.
    pub fn singular_angles(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.atoms.iter().map(|a| a.angle.to_radians()).collect();
        for a in &self.arcs {
            if a.arc.half_width < PI {
                v.push(a.arc.start().rem_euclid(TAU));
                v.push(a.arc.end().rem_euclid(TAU));
            }
        }
        v
    }
}

/// Poisson kernel `(1 - |z|^2) / |z - e^{i theta}|^2` at `z = (1-g) e^{i alpha}`,
/// `phi = theta - alpha` in turns.
#[inline]
pub fn poisson_kernel_gap(g: f64, phi_turns: f64) -> f64 {
    let s = (PI * phi_turns).sin();
    g * (2.0 - g) / (g * g + 4.0 * (1.0 - g) * s * s)
}

/// Harmonic measure of `[phi1, phi2]`, both relative to `z`'s angle and inside `[-pi, pi]`.
fn omega_piece(k: f64, phi1: f64, phi2: f64) -> f64 {
    let (s1, c1) = (0.5 * phi1).sin_cos();
    let (s2, c2) = (0.5 * phi2).sin_cos();
    let d = (0.5 * (phi2 - phi1)).sin();
    d.atan2(c1 * c2 / k + k * s1 * s2) / PI
}

/// Splits `[c - h, c + h]` (relative to `z`, `c` in `(-pi, pi]`) into pieces inside `[-pi, pi]`.
fn relative_pieces(c: f64, h: f64) -> [(f64, f64); 2] {
    let (start, end) = (c - h, c + h);
    if end > PI {
        [(start, PI), (-PI, end - TAU)]
    } else if start < -PI {
        [(start + TAU, PI), (-PI, end)]
    } else {
        [(start, end), (0.0, 0.0)]
    }
}

fn omega_relative(g: f64, c: f64, h: f64) -> f64 {
    let k = (2.0 - g) / g;
    relative_pieces(c, h)
        .iter()
        .filter(|(a, b)| b > a)
        .map(|&(a, b)| omega_piece(k, a, b))
        .sum()
}

/// Harmonic measure `omega(z, arc)` at `z = (1-g) e^{i alpha}`.
pub fn harmonic_measure(g: f64, alpha: f64, arc: &Arc) -> f64 {
    if arc.half_width >= PI {
        return 1.0;
    }
    omega_relative(g, crate::disk_geom::wrap_angle(arc.center - alpha), arc.half_width)
}

/// Harmonic measure of a dyadic interval, with the interval offset taken
/// exactly in turns.
pub fn harmonic_measure_box(g: f64, z_angle: &Angle, b: &crate::disk_geom::CarlesonBox) -> f64 {
    if b.n == 0 {
        return 1.0;
    }
    let lo = Angle::dyadic(2 * b.k + 1, b.n + 1);
    let c = TAU * lo.diff_turns(z_angle);
    omega_relative(g, c, PI * b.length())
}

/// `(1/pi) log(|e^{ia} - z| / |e^{ib} - z|)`, the conjugate Poisson integral of an arc's indicator.
pub fn conjugate_arc(g: f64, alpha: f64, arc: &Arc) -> f64 {
    if arc.half_width >= PI {
        return 0.0;
    }
    let c = crate::disk_geom::wrap_angle(arc.center - alpha);
    let chord2 = |phi: f64| {
        let s = (0.5 * phi).sin();
        g * g + 4.0 * (1.0 - g) * s * s
    };
    (chord2(c - arc.half_width).ln() - chord2(c + arc.half_width).ln()) / TAU
}

fn point_polar(z: &DiskPoint) -> (f64, f64) {
    (z.gap_f64(), z.angle.to_radians())
}

/// `P[mu](z)`.
pub fn poisson_eval(mu: &BoundaryMeasure, z: &DiskPoint) -> f64 {
    let g = z.gap_f64();
    let mut acc = Neumaier::default();
    for a in &mu.atoms {
        acc.add(a.mass * poisson_kernel_gap(g, a.angle.diff_turns(&z.angle)));
    }
    let alpha = z.angle.to_radians();
    for a in &mu.arcs {
        acc.add(a.height * harmonic_measure(g, alpha, &a.arc));
    }
    acc.sum()
}

/// `P[mu]` at `(1-g) e^{i alpha}` from doubles.
pub fn poisson_eval_polar(mu: &BoundaryMeasure, g: f64, alpha: f64) -> f64 {
    let mut acc = Neumaier::default();
    let t = alpha / TAU;
    for a in &mu.atoms {
        let mut d = (a.angle.turns() - t).rem_euclid(1.0);
        if d > 0.5 {
            d -= 1.0;
        }
        acc.add(a.mass * poisson_kernel_gap(g, d));
    }
    for a in &mu.arcs {
        acc.add(a.height * harmonic_measure(g, alpha, &a.arc));
    }
    acc.sum()
}

/// Reference evaluation of `P[mu](z)` for the arc part by adaptive quadrature.
pub fn poisson_eval_quadrature(mu: &BoundaryMeasure, z: &DiskPoint, opts: &QuadOptions) -> Result<f64> {
    let (g, alpha) = point_polar(z);
    let mut total = Neumaier::default();
    for a in &mu.atoms {
        total.add(a.mass * poisson_kernel_gap(g, a.angle.diff_turns(&z.angle)));
    }
    for a in &mu.arcs {
        let (lo, hi) = (a.arc.start(), a.arc.end());
        let near = alpha + TAU * ((0.5 * (lo + hi) - alpha) / TAU).round();
        let breaks = graded_breaks(near.clamp(lo, hi), g * 1e-2, lo, hi);
        let kernel = |t: f64| poisson_kernel_gap(g, (t - alpha) / TAU) / TAU;
        let r = integrate_breaks(kernel, &normalize_breaks(breaks), opts)?;
        total.add(a.height * r.value);
    }
    Ok(total.sum())
}

/// `(lambda* + z) / (lambda* - z)` with `lambda* = e^{i beta}`.
pub fn herglotz_point(beta: &Angle, z: &DiskPoint) -> Complex64 {
    herglotz_point_turns(z.gap_f64(), z.angle.diff_turns(beta))
}

/// Herglotz kernel at `(1-g) e^{i alpha}` for a unit atom at `beta`, `alpha - beta` in turns.
#[inline]
pub fn herglotz_point_turns(g: f64, delta_turns: f64) -> Complex64 {
    let s = (PI * delta_turns).sin();
    let d = g * g + 4.0 * (1.0 - g) * s * s;
    Complex64::new(g * (2.0 - g) / d, 2.0 * (1.0 - g) * (TAU * delta_turns).sin() / d)
}

/// Herglotz transform `int (e^{it} + z)/(e^{it} - z) dmu(t)` of atoms and arcs.
pub fn herglotz_of_measure(mu: &BoundaryMeasure, z: &DiskPoint) -> Complex64 {
    herglotz_of_measure_polar(mu, z.gap_f64(), z.angle.to_radians(), Some(&z.angle))
}

pub fn herglotz_of_measure_polar(
    mu: &BoundaryMeasure,
    g: f64,
    alpha: f64,
    exact_angle: Option<&Angle>,
) -> Complex64 {
    let (mut re, mut im) = (Neumaier::default(), Neumaier::default());
    for a in &mu.atoms {
        let dt = match exact_angle {
            Some(ang) => ang.diff_turns(&a.angle),
            None => Angle::Radians(alpha).diff_turns(&a.angle),
        };
        let h = herglotz_point_turns(g, dt);
        re.add(a.mass * h.re);
        im.add(a.mass * h.im);
    }
    for a in &mu.arcs {
        re.add(a.height * harmonic_measure(g, alpha, &a.arc));
        im.add(a.height * conjugate_arc(g, alpha, &a.arc));
    }
    Complex64::new(re.sum(), im.sum())
}

/// Herglotz transform of the density part only.
pub fn herglotz_of_density(w: &BoundaryMeasure, z: &DiskPoint) -> Complex64 {
    let arcs_only = BoundaryMeasure {
        atoms: vec![],
        arcs: w.arcs.clone(),
    };
    herglotz_of_measure(&arcs_only, z)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmirnovWeightParams {
    pub c0: f64,
    pub c1: f64,
}

impl SmirnovWeightParams {
    pub fn new(c0: f64, c1: f64) -> Result<Self> {
        if !(c0 > 0.0 && c1 > 0.0) || c0 * c1 < 1.0 {
            return Err(Error::InvalidInput(format!(
                "weight constants need C0, C1 > 0 and C0 C1 >= 1, got C0 = {c0}, C1 = {c1}"
            )));
        }
        Ok(Self { c0, c1 })
    }

    /// `C0 = 1.2 / C1` for a certified `C1`.
    pub fn from_certified_c1(c1: f64) -> Self {
        Self { c0: 1.2 / c1, c1 }
    }
}

/// `g log2(1/g)`, the shadow-weight normalizer.
pub fn shadow_scale(g: f64) -> f64 {
    -g * g.ln() / LN_2
}

/// `w_lambda = C0 / ((1-|lambda|) log2(1/(1-|lambda|))) * chi_{I_lambda}`.
pub fn make_shadow_weight(lambda: &DiskPoint, params: &SmirnovWeightParams) -> Result<BoundaryMeasure> {
    let g = lambda.gap_f64();
    if g > 0.25 {
        return Err(Error::InvalidInput(format!(
            "shadow weight needs gap <= 1/4, got {g}"
        )));
    }
    Ok(BoundaryMeasure {
        atoms: vec![],
        arcs: vec![ArcDensity {
            arc: privalov_shadow(lambda)?,
            height: params.c0 / shadow_scale(g),
        }],
    })
}

/// `omega(lambda, I_lambda)`, the quantity bounded below by `C1`.
pub fn shadow_harmonic_measure(lambda: &DiskPoint) -> Result<f64> {
    let arc = privalov_shadow(lambda)?;
    Ok(harmonic_measure(lambda.gap_f64(), lambda.angle.to_radians(), &arc))
}

/// `C1 = 0.9 min_lambda omega(lambda, I_lambda)` over points with gap at most 1/4.
pub fn certify_c1<'a>(points: impl IntoIterator<Item = &'a DiskPoint>) -> Result<f64> {
    let mut min = f64::INFINITY;
    for p in points {
        if p.gap_f64() <= 0.25 {
            min = min.min(shadow_harmonic_measure(p)?);
        }
    }
    if !min.is_finite() {
        return Err(Error::InvalidInput("no points with gap <= 1/4".into()));
    }
    Ok(0.9 * min)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GaugeFunction {
    /// `(1 + t) log(1 + t)`
    PsiLlog,
    /// `(1 + t)^-2`
    PhiQuad,
    Identity,
    /// Piecewise-linear interpolation of `(t, value)` pairs, flat beyond the ends.
    Table { points: Vec<(f64, f64)> },
}

impl GaugeFunction {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::PsiLlog => (1.0 + t) * t.ln_1p(),
            Self::PhiQuad => (1.0 + t).powi(-2),
            Self::Identity => t,
            Self::Table { points } => {
                if points.is_empty() {
                    return 0.0;
                }
                let i = points.partition_point(|p| p.0 <= t);
                if i == 0 {
                    return points[0].1;
                }
                if i == points.len() {
                    return points[i - 1].1;
                }
                let (a, b) = (points[i - 1], points[i]);
                a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiboundedReport {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    /// `int psi[w] dtheta / 2 pi`
    pub boundary_value: f64,
    pub monotone: bool,
    /// `|values.last - boundary_value| / boundary_value`
    pub final_rel_gap: f64,
}

/// `int psi[w(theta)] dtheta / 2 pi` for a piecewise-constant density.
pub fn boundary_psi_integral(w: &BoundaryMeasure, psi: &GaugeFunction) -> f64 {
    let mut cuts = vec![0.0, TAU];
    for a in &w.arcs {
        if a.arc.half_width < PI {
            cuts.push(a.arc.start().rem_euclid(TAU));
            cuts.push(a.arc.end().rem_euclid(TAU));
        }
    }
    let cuts = normalize_breaks(cuts);
    let mut acc = Neumaier::default();
    for c in cuts.windows(2) {
        let mid = 0.5 * (c[0] + c[1]);
        acc.add(psi.eval(w.density_at(mid)) * (c[1] - c[0]) / TAU);
    }
    acc.sum()
}

/// `int psi[P[w](r e^{i theta})] dtheta / 2 pi`, refined at arc endpoints.
pub fn circle_mean_psi_of_poisson(
    w: &BoundaryMeasure,
    psi: &GaugeFunction,
    r: f64,
    opts: &QuadOptions,
) -> Result<(f64, f64)> {
    let g = 1.0 - r;
    let mut breaks = vec![0.0, TAU];
    for s in w.singular_angles() {
        breaks.extend(graded_breaks(s, (g * 1e-2).max(1e-12), 0.0, TAU));
    }
    let f = |t: f64| psi.eval(poisson_eval_polar(w, g, t)) / TAU;
    let res = integrate_breaks(f, &normalize_breaks(breaks), opts)?;
    Ok((res.value, res.error))
}

/// Ladder of `psi`-means of `P[w]` against the boundary value.
pub fn quasibounded_check(
    w: &BoundaryMeasure,
    psi: &GaugeFunction,
    r_grid: &[f64],
    opts: &QuadOptions,
) -> Result<QuasiboundedReport> {
    let mut values = Vec::with_capacity(r_grid.len());
    let mut errors = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let (v, e) = circle_mean_psi_of_poisson(w, psi, r, opts)?;
        values.push(v);
        errors.push(e);
    }
    let boundary_value = boundary_psi_integral(w, psi);
    let monotone = values
        .windows(2)
        .zip(errors.windows(2))
        .all(|(v, e)| v[1] >= v[0] - (e[0] + e[1]) - 1e-12 * v[0].abs());
    let final_rel_gap = values
        .last()
        .map(|v| (v - boundary_value).abs() / boundary_value.abs().max(f64::MIN_POSITIVE))
        .unwrap_or(f64::NAN);
    Ok(QuasiboundedReport {
        radii: r_grid.to_vec(),
        values,
        errors,
        boundary_value,
        monotone,
        final_rel_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disk_geom::{CarlesonBox, Gap};
    use crate::lognum::LogMagnitude;
    use proptest::prelude::*;

    fn arc(c: f64, h: f64) -> Arc {
        Arc::new(c, h).unwrap()
    }

    #[test]
    fn value_at_origin_is_total_mass() {
        let mu = BoundaryMeasure::new(
            vec![Atom { angle: Angle::dyadic(1, 3), mass: 0.7 }],
            vec![ArcDensity { arc: arc(1.0, 0.4), height: 2.0 }],
        )
        .unwrap();
        let p = poisson_eval(&mu, &DiskPoint::origin());
        assert!((p - mu.total_mass()).abs() < 1e-15);
        assert!((mu.total_mass() - (0.7 + 2.0 * 0.8 / TAU)).abs() < 1e-15);
    }

    #[test]
    fn unit_atom_on_the_real_axis() {
        let mu = BoundaryMeasure::atom(Angle::dyadic(0, 0), 1.0);
        let z = DiskPoint::from_gap_f64(0.5, 0.0);
        assert!((poisson_eval(&mu, &z) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_density_is_constant() {
        let mu = BoundaryMeasure::uniform(1.0);
        for &(g, t) in &[(1.0, 0.0), (0.5, 1.0), (1e-9, 4.0)] {
            assert!((poisson_eval(&mu, &DiskPoint::from_gap_f64(g, t)) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn herglotz_point_examples() {
        let beta = Angle::dyadic(1, 3);
        let h = herglotz_point(&beta, &DiskPoint::origin());
        assert!((h - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let g = 1.0 / 16.0;
        let z = DiskPoint::new(beta, Gap::new(LogMagnitude::pow2(-4))).unwrap();
        assert!((herglotz_point(&beta, &z).re - 31.0).abs() < 1e-12);
        assert!(herglotz_point(&beta, &z).im.abs() < 1e-15);
        // toward the antipode the value tends to zero
        let far = DiskPoint::from_gap_f64(1e-9, beta.to_radians() + PI);
        assert!(herglotz_point(&beta, &far).norm() < 1e-8);
        // against direct complex arithmetic
        let z = DiskPoint::from_gap_f64(0.3, 2.0);
        let ls = Complex64::from_polar(1.0, beta.to_radians());
        let direct = (ls + z.to_complex()) / (ls - z.to_complex());
        assert!((herglotz_point(&beta, &z) - direct).norm() < 1e-13);
        let _ = g;
    }

    #[test]
    fn herglotz_of_density_examples() {
        let w = BoundaryMeasure::uniform(2.5);
        let h = herglotz_of_density(&w, &DiskPoint::from_gap_f64(0.01, 3.0));
        assert!((h - Complex64::new(2.5, 0.0)).norm() < 1e-14);
        let w = BoundaryMeasure::new(vec![], vec![ArcDensity { arc: arc(0.5, 0.3), height: 3.0 }]).unwrap();
        let h0 = herglotz_of_density(&w, &DiskPoint::origin());
        assert!((h0.re - w.total_mass()).abs() < 1e-15);
        assert!(h0.im.abs() < 1e-15);
    }

    #[test]
    fn conjugate_matches_quadrature() {
        let a = arc(0.8, 0.25);
        let w = BoundaryMeasure::new(vec![], vec![ArcDensity { arc: a, height: 1.0 }]).unwrap();
        for &(g, t) in &[(0.3, 0.1), (0.01, 0.9), (1e-4, 0.8 + 0.25), (0.5, 4.0)] {
            let z = DiskPoint::from_gap_f64(g, t);
            let zc = z.to_complex();
            let f = |th: f64| {
                let e = Complex64::from_polar(1.0, th);
                ((e + zc) / (e - zc)).im / TAU
            };
            let breaks = normalize_breaks(graded_breaks(t, g * 1e-2, a.start(), a.end()));
            let q = integrate_breaks(f, &breaks, &QuadOptions::default()).unwrap().value;
            let got = herglotz_of_density(&w, &z).im;
            assert!((got - q).abs() < 1e-9 * (1.0 + q.abs()), "g = {g}: {got} vs {q}");
        }
    }

    #[test]
    fn shadow_weight_examples() {
        let params = SmirnovWeightParams::new(2.0, 0.6).unwrap();
        let l = DiskPoint::new(Angle::dyadic(1, 1), Gap::new(LogMagnitude::pow2(-2))).unwrap();
        let w = make_shadow_weight(&l, &params).unwrap();
        assert!((w.arcs[0].height - 2.0 * params.c0).abs() < 1e-15);
        // norms decrease along generations
        let norms: Vec<f64> = (1..8)
            .map(|n| {
                let l = DiskPoint::new(Angle::dyadic(1, n), Gap::new(LogMagnitude::pow2(-2 * n as i64))).unwrap();
                make_shadow_weight(&l, &params).unwrap().density_norm()
            })
            .collect();
        assert!(norms.windows(2).all(|w| w[1] < w[0]));
        assert!(norms.iter().all(|&x| x <= params.c0));
        let big = DiskPoint::from_gap_f64(0.5, 0.0);
        assert!(make_shadow_weight(&big, &params).is_err());
        assert!(SmirnovWeightParams::new(1.0, 0.5).is_err());
    }

    #[test]
    fn shadow_harmonic_measure_tends_to_two_thirds() {
        for m in [4, 10, 20, 40] {
            let l = DiskPoint::new(Angle::dyadic(1, 2), Gap::new(LogMagnitude::pow2(-m))).unwrap();
            let w = shadow_harmonic_measure(&l).unwrap();
            assert!(w > 0.6 && w < 0.7, "m = {m}: {w}");
        }
        let l = DiskPoint::new(Angle::dyadic(1, 2), Gap::new(LogMagnitude::pow2(-40))).unwrap();
        assert!((shadow_harmonic_measure(&l).unwrap() - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn psi_gauge_values() {
        assert_eq!(GaugeFunction::PsiLlog.eval(0.0), 0.0);
        assert!((GaugeFunction::PsiLlog.eval(1.0) - 2.0 * LN_2).abs() < 1e-15);
        assert!((GaugeFunction::PhiQuad.eval(1.0) - 0.25).abs() < 1e-15);
        let big = GaugeFunction::PsiLlog.eval(2f64.powi(48));
        assert!(big.is_finite() && big > 0.0);
        let t = GaugeFunction::Table { points: vec![(0.0, 0.0), (1.0, 2.0)] };
        assert_eq!(t.eval(0.5), 1.0);
        assert_eq!(t.eval(5.0), 2.0);
    }

    #[test]
    fn quasibounded_trivial_cases() {
        let opts = QuadOptions::default();
        let w = BoundaryMeasure::uniform(3.0);
        let rep = quasibounded_check(&w, &GaugeFunction::PsiLlog, &[0.0, 0.5, 0.9], &opts).unwrap();
        for v in &rep.values {
            assert!((v - GaugeFunction::PsiLlog.eval(3.0)).abs() < 1e-12);
        }
        let half = BoundaryMeasure::new(vec![], vec![ArcDensity { arc: arc(0.0, PI / 2.0), height: 3.0 }]).unwrap();
        let rep = quasibounded_check(&half, &GaugeFunction::PsiLlog, &[0.0], &opts).unwrap();
        let psi = &GaugeFunction::PsiLlog;
        assert!((rep.values[0] - psi.eval(1.5)).abs() < 1e-12);
        assert!(rep.values[0] <= 0.5 * (psi.eval(3.0) + psi.eval(0.0)));
    }

    #[test]
    fn dyadic_partition_sums_to_one() {
        for &(g, t) in &[(0.5, 0.3), (1e-3, 2.0), (1e-8, 0.0), (1.0, 0.0)] {
            for n in [1u32, 3, 6] {
                let total: f64 = (0..(1u64 << n))
                    .map(|k| harmonic_measure_box(g, &Angle::radians(t), &CarlesonBox::new(n, k).unwrap()))
                    .sum();
                assert!((total - 1.0).abs() < 1e-10, "g = {g}, n = {n}: {total}");
                if g >= 1e-6 {
                    let by_arcs: f64 = (0..(1u64 << n))
                        .map(|k| harmonic_measure(g, t, &CarlesonBox::new(n, k).unwrap().arc()))
                        .sum();
                    assert!((by_arcs - 1.0).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn json_schema_round_trip() {
        let mu = BoundaryMeasure::new(
            vec![
                Atom { angle: Angle::dyadic(3, 3), mass: 1.5 },
                Atom { angle: Angle::radians(1.0), mass: 0.5 },
            ],
            vec![ArcDensity { arc: arc(2.0, 0.1), height: 4.0 }],
        )
        .unwrap();
        let s = serde_json::to_string(&mu).unwrap();
        assert!(s.contains("\"angle_turns\":0.375"));
        assert!(s.contains("\"halfwidth_rad\":0.1"));
        let back: BoundaryMeasure = serde_json::from_str(&s).unwrap();
        assert_eq!(back, mu);
    }

    fn arb_arc() -> impl Strategy<Value = Arc> {
        (0.0..TAU, 1e-4..PI).prop_map(|(c, h)| Arc::new(c, h).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn closed_form_matches_quadrature(a in arb_arc(), lg in -13.8f64..0.0, t in 0.0..TAU) {
            let g = lg.exp();
            let z = DiskPoint::from_gap_f64(g, t);
            let w = BoundaryMeasure { atoms: vec![], arcs: vec![ArcDensity { arc: a, height: 1.0 }] };
            let closed = poisson_eval(&w, &z);
            // the error estimate floors near 1e-11 once 1 / g reaches 1e6
            let quad = poisson_eval_quadrature(&w, &z, &QuadOptions::default()).unwrap();
            prop_assert!((closed - quad).abs() <= 1e-9 * quad.max(1e-300) + 1e-15, "{} vs {}", closed, quad);
        }
    }

    proptest! {
        #[test]
        fn positivity_and_atom_lower_bound(
            masses in proptest::collection::vec((0.0..TAU, 0.0..5.0f64), 1..5),
            g in 1e-6f64..1.0,
            t in 0.0..TAU,
        ) {
            let atoms: Vec<Atom> = masses.iter().map(|&(a, m)| Atom { angle: Angle::radians(a), mass: m }).collect();
            let mu = BoundaryMeasure::new(atoms.clone(), vec![]).unwrap();
            let z = DiskPoint::from_gap_f64(g, t);
            let p = poisson_eval(&mu, &z);
            prop_assert!(p >= 0.0);
            for a in atoms {
                prop_assert!(p >= a.mass * g / 4.0);
            }
        }

        #[test]
        fn real_part_of_herglotz_is_poisson(a in arb_arc(), g in 1e-6f64..1.0, t in 0.0..TAU, h in 0.1..10.0f64) {
            let w = BoundaryMeasure { atoms: vec![], arcs: vec![ArcDensity { arc: a, height: h }] };
            let z = DiskPoint::from_gap_f64(g, t);
            let p = poisson_eval(&w, &z);
            prop_assert!((herglotz_of_density(&w, &z).re - p).abs() <= 1e-10 * p.max(1e-300));
        }
    }
}
