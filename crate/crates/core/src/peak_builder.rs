//! Peak functions: `1` at one sequence point, `0` at every other one.
//!
//! Counterexample peaks `f = c P^S P^O b_twin e^g`:
//! `P^S` peaks over the points of `lambda`'s kind, `P^O` over the other kind
//! with the twin replaced by `lambda`, and `c` makes `f(lambda) = 1`.
//! Necessity peaks `f = F e^g (2 + g)^2` with `g` the Herglotz transform of a
//! certificate measure.

use crate::blaschke_carleson::{ln_rho_f64, theorem_a_check, PointTable};
use crate::boundary_measures::{
    herglotz_of_measure, herglotz_of_measure_polar, make_shadow_weight, poisson_eval_polar,
    BoundaryMeasure, SmirnovWeightParams,
};
use crate::disk_geom::{blaschke_factor, wrap_angle, DiskPoint, LogComplex};
use crate::dyadic_model::{twin, FamilyKind, PointIndex, SequenceFamily};
use crate::error::{Error, Result};
use crate::interpolation_engine::{peak_interpolant, peak_interpolant_scaled, BoundedInterpolant};
use crate::lognum::DoubleDouble;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "factor", rename_all = "snake_case")]
pub enum Factor {
    Constant { value: LogComplex },
    Interpolant { f: BoundedInterpolant },
    Blaschke { pole: DiskPoint },
    /// `exp(g)`, `g` the Herglotz transform of `mu`.
    HerglotzExp { mu: BoundaryMeasure },
    /// `(2 + g)^2`
    HerglotzSquare { mu: BoundaryMeasure },
}

fn exp_of(g: Complex64) -> LogComplex {
    LogComplex {
        ln_abs: DoubleDouble::from_f64(g.re),
        arg: wrap_angle(g.im),
    }
}

impl Factor {
    pub fn eval(&self, z: &DiskPoint) -> LogComplex {
        match self {
            Self::Constant { value } => *value,
            Self::Interpolant { f } => f.eval(z),
            Self::Blaschke { pole } => blaschke_factor(pole, z),
            Self::HerglotzExp { mu } => exp_of(herglotz_of_measure(mu, z)),
            Self::HerglotzSquare { mu } => {
                let w = Complex64::new(2.0, 0.0) + herglotz_of_measure(mu, z);
                LogComplex::from_complex(w * w)
            }
        }
    }

    /// `ln |factor|` at `(1-g) e^{2 pi i turns}` in doubles.
    pub fn ln_abs_polar(&self, g: f64, turns: f64) -> f64 {
        match self {
            Self::Constant { value } => value.ln_abs.to_f64(),
            Self::Interpolant { f } => f.ln_abs_polar(g, turns),
            Self::Blaschke { pole } => ln_rho_f64(g, pole.gap_f64(), turns - pole.angle.turns()),
            Self::HerglotzExp { mu } => poisson_eval_polar(mu, g, TAU * turns),
            Self::HerglotzSquare { mu } => {
                let w = Complex64::new(2.0, 0.0) + herglotz_of_measure_polar(mu, g, TAU * turns, None);
                2.0 * w.norm().ln()
            }
        }
    }

    /// Angles (radians) where the factor is singular or steep on the boundary.
    pub fn singular_angles(&self) -> Vec<f64> {
        match self {
            Self::Constant { .. } => vec![],
            Self::Interpolant { f } => f.zeros.iter().map(|p| p.angle.to_radians()).collect(),
            Self::Blaschke { pole } => vec![pole.angle.to_radians()],
            Self::HerglotzExp { mu } | Self::HerglotzSquare { mu } => mu.singular_angles(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeakKind {
    Nevanlinna,
    Smirnov,
    Necessity,
}

/// Magnitudes recorded while assembling a peak.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakAudit {
    /// `ln |c_lambda|`
    pub log_abs_c: f64,
    /// Certified norms of the interpolant factors.
    pub pick_norms: Vec<f64>,
    /// `ln (1 / rho(lambda, twin))`
    pub ln_inv_twin_rho: Option<f64>,
    /// `Re g(lambda)`
    pub re_g_at_lambda: f64,
    /// `|H(lambda)|` for necessity peaks.
    pub h_abs_at_lambda: Option<f64>,
    /// `(1 + ln(e / |B_lambda(lambda)|))^2`, the required lower bound on `|H(lambda)|`.
    pub h_required: Option<f64>,
    /// `ln(|B| phi(ln(e/|B|))) - ln |v|`, nonnegative when the target obeys the interpolation hypothesis.
    pub target_margin: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakFunction {
    pub kind: PeakKind,
    pub lambda: DiskPoint,
    pub index: Option<PointIndex>,
    /// Position of `lambda` in the node list it peaks on.
    pub position: usize,
    pub factors: Vec<Factor>,
    pub audit: PeakAudit,
}

impl PeakFunction {
    pub fn eval(&self, z: &DiskPoint) -> LogComplex {
        let mut acc = LogComplex::ONE;
        for f in &self.factors {
            acc = acc.mul(f.eval(z));
            if acc.is_zero() {
                break;
            }
        }
        acc
    }

    pub fn ln_abs_polar(&self, g: f64, turns: f64) -> f64 {
        self.factors.iter().map(|f| f.ln_abs_polar(g, turns)).sum()
    }

    pub fn singular_angles(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.factors.iter().flat_map(|f| f.singular_angles()).collect();
        out.push(self.lambda.angle.to_radians());
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        out
    }

    /// Largest certified interpolant norm.
    pub fn max_pick_norm(&self) -> f64 {
        self.audit.pick_norms.iter().copied().fold(1.0, f64::max)
    }

    /// `|f(lambda) - 1|` and the count of nodes other than `lambda` where `f` is not exactly zero.
    pub fn delta_audit(&self, nodes: &[DiskPoint]) -> DeltaAudit {
        let mut nonzero = 0;
        let mut at_lambda = f64::NAN;
        for z in nodes {
            let v = self.eval(z);
            if z.same_point(&self.lambda) {
                at_lambda = (v.to_complex() - Complex64::new(1.0, 0.0)).norm();
            } else if !v.is_zero() {
                nonzero += 1;
            }
        }
        DeltaAudit {
            value_error: at_lambda,
            nonzero_elsewhere: nonzero,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaAudit {
    pub value_error: f64,
    pub nonzero_elsewhere: usize,
}

impl DeltaAudit {
    pub fn passes(&self, tol: f64) -> bool {
        self.value_error <= tol && self.nonzero_elsewhere == 0
    }
}

/// `c = 1 / prod(factors)(lambda)`, prepended as a constant.
fn normalize(lambda: &DiskPoint, mut factors: Vec<Factor>) -> Result<(Vec<Factor>, LogComplex)> {
    let mut at = LogComplex::ONE;
    for f in &factors {
        at = at.mul(f.eval(lambda));
    }
    if at.is_zero() || !at.ln_abs.is_finite() {
        return Err(Error::PickFailure("peak vanishes or overflows at its own node".into()));
    }
    let c = at.recip();
    factors.insert(0, Factor::Constant { value: c });
    Ok((factors, c))
}

/// Counterexample peak for a Nevanlinna or Smirnov family; `g` is the Herglotz
/// transform of `mu`.
fn build_counterexample_peak(
    idx: &PointIndex,
    family: &SequenceFamily,
    mu: BoundaryMeasure,
    kind: PeakKind,
) -> Result<PeakFunction> {
    let lambda = family.get(idx)?.point;
    let tw = twin(*idx);
    let tw_point = family.get(&tw)?.point;
    let same: Vec<DiskPoint> = family.of_kind(idx.kind).map(|p| p.point).collect();
    let pos = family
        .of_kind(idx.kind)
        .position(|p| p.index == *idx)
        .ok_or_else(|| Error::NotInFamily(idx.to_string()))?;
    let mut other: Vec<DiskPoint> = family
        .of_kind(idx.kind.other())
        .filter(|p| p.index != tw)
        .map(|p| p.point)
        .collect();
    other.push(lambda);
    let p_same = peak_interpolant(pos, &same)?;
    let p_other = peak_interpolant(other.len() - 1, &other)?;
    let pick_norms = vec![p_same.norm, p_other.norm];
    let re_g = herglotz_of_measure(&mu, &lambda).re;
    let ln_inv_twin_rho = -blaschke_factor(&tw_point, &lambda).ln_abs.to_f64();
    let (factors, c) = normalize(
        &lambda,
        vec![
            Factor::Interpolant { f: p_same },
            Factor::Interpolant { f: p_other },
            Factor::Blaschke { pole: tw_point },
            Factor::HerglotzExp { mu },
        ],
    )?;
    Ok(PeakFunction {
        kind,
        lambda,
        index: Some(*idx),
        position: family.position(idx).expect("member"),
        factors,
        audit: PeakAudit {
            log_abs_c: c.ln_abs.to_f64(),
            pick_norms,
            ln_inv_twin_rho: Some(ln_inv_twin_rho),
            re_g_at_lambda: re_g,
            h_abs_at_lambda: None,
            h_required: None,
            target_margin: None,
        },
    })
}

/// `f = c P^A P^B b_twin e^{g}` with `g` the Herglotz kernel of the unit atom at `lambda / |lambda|`.
pub fn build_peak_nevanlinna(idx: &PointIndex, family: &SequenceFamily) -> Result<PeakFunction> {
    if family.family != FamilyKind::Nevanlinna {
        return Err(Error::InvalidInput("expected a Nevanlinna family".into()));
    }
    let mu = BoundaryMeasure::atom(idx.angle(), 1.0);
    build_counterexample_peak(idx, family, mu, PeakKind::Nevanlinna)
}

/// As [`build_peak_nevanlinna`] with `g` the Herglotz transform of the shadow weight
/// of the pair's `A` member.
pub fn build_peak_smirnov(
    idx: &PointIndex,
    family: &SequenceFamily,
    params: &SmirnovWeightParams,
) -> Result<PeakFunction> {
    if family.family != FamilyKind::Smirnov {
        return Err(Error::InvalidInput("expected a Smirnov family".into()));
    }
    SmirnovWeightParams::new(params.c0, params.c1)?;
    // B-side peaks reuse the weight of the pair's A member
    let a = PointIndex { kind: crate::dyadic_model::PointKind::A, ..*idx };
    let w = make_shadow_weight(&family.get(&a)?.point, params)?;
    build_counterexample_peak(idx, family, w, PeakKind::Smirnov)
}

/// Peaks for every member, in family order.
pub fn build_all_peaks(family: &SequenceFamily, params: Option<&SmirnovWeightParams>) -> Result<Vec<PeakFunction>> {
    use rayon::prelude::*;
    family
        .points
        .par_iter()
        .map(|p| match family.family {
            FamilyKind::Nevanlinna => build_peak_nevanlinna(&p.index, family),
            FamilyKind::Smirnov => {
                let params = params.ok_or_else(|| Error::InvalidInput("Smirnov peaks need weight constants".into()))?;
                build_peak_smirnov(&p.index, family, params)
            }
        }
        .map_err(|e| match e {
            Error::PickFailure(m) => Error::PickFailure(format!("peak {}: {m}", p.index)),
            e @ Error::IllConditioned(..) => Error::PickFailure(format!("peak {}: {e}", p.index)),
            e => e,
        }))
        .collect()
}

/// `(1 + t)^-2`
fn phi(t: f64) -> f64 {
    (1.0 + t).powi(-2)
}

/// `f = F e^g (2 + g)^2` with `F(lambda) = 1 / (e^{g(lambda)} H(lambda))` and `F = 0` on the other nodes.
///
/// The target at `lambda` carries the phase that makes `f(lambda) = 1`; its modulus is
/// `e^{-P[mu](lambda)} / |H(lambda)|`.
pub fn build_necessity_peak(position: usize, nodes: &[DiskPoint], mu: &BoundaryMeasure) -> Result<PeakFunction> {
    let report = theorem_a_check(nodes, mu).into_result()?;
    let lambda = *nodes
        .get(position)
        .ok_or_else(|| Error::InvalidInput(format!("node {position} out of range")))?;
    let g = herglotz_of_measure(mu, &lambda);
    let two_g = Complex64::new(2.0, 0.0) + g;
    let h = LogComplex::from_complex(two_g * two_g);
    let target = exp_of(g).mul(h).recip();
    let f = peak_interpolant_scaled(position, nodes, target)?;
    let ln_inv_b = report.margins[position].log_inv_b;
    let ln_b = -ln_inv_b;
    let t = 1.0 + ln_inv_b;
    let target_margin = ln_b + phi(t).ln() - target.ln_abs.to_f64();
    let pick_norms = vec![f.norm];
    let factors = vec![
        Factor::Interpolant { f },
        Factor::HerglotzExp { mu: mu.clone() },
        Factor::HerglotzSquare { mu: mu.clone() },
    ];
    Ok(PeakFunction {
        kind: PeakKind::Necessity,
        lambda,
        index: None,
        position,
        factors,
        audit: PeakAudit {
            log_abs_c: 0.0,
            pick_norms,
            ln_inv_twin_rho: None,
            re_g_at_lambda: g.re,
            h_abs_at_lambda: Some(h.ln_abs.to_f64().exp()),
            h_required: Some((1.0 + t).powi(2)),
            target_margin: Some(target_margin),
        },
    })
}

fn log_plus(x: f64) -> f64 {
    x.max(0.0)
}

/// Violations of `ln+|f| <= ln+ ||F|| + P[mu] + ln+|H|` on an `n_r x n_theta` polar grid.
pub fn check_necessity_bound(peak: &PeakFunction, mu: &BoundaryMeasure, n_r: usize, n_theta: usize) -> BoundCheck {
    let ln_norm = peak.audit.pick_norms.first().map_or(0.0, |n| n.ln());
    let mut check = BoundCheck::default();
    for i in 0..n_r {
        let g = 1.0 - (i as f64 + 0.5) / n_r as f64 * (1.0 - 1e-6);
        for j in 0..n_theta {
            let t = j as f64 / n_theta as f64;
            let z = DiskPoint::from_gap_f64(g, TAU * t);
            let lhs = log_plus(peak.eval(&z).ln_abs.to_f64());
            let w = Complex64::new(2.0, 0.0) + herglotz_of_measure(mu, &z);
            let rhs = log_plus(ln_norm) + poisson_eval_polar(mu, g, TAU * t) + log_plus(2.0 * w.norm().ln());
            check.record(rhs - lhs);
        }
    }
    check
}

/// Violations of `ln+|f| <= ln+|c| + 2 ln+ C + Re g` at the given points.
pub fn check_counterexample_bound(peak: &PeakFunction, points: &[DiskPoint]) -> BoundCheck {
    let mu = peak.factors.iter().find_map(|f| match f {
        Factor::HerglotzExp { mu } => Some(mu),
        _ => None,
    });
    let mut check = BoundCheck::default();
    for z in points {
        let lhs = log_plus(peak.eval(z).ln_abs.to_f64());
        let re_g = mu.map_or(0.0, |m| herglotz_of_measure(m, z).re);
        let rhs = log_plus(peak.audit.log_abs_c) + 2.0 * log_plus(peak.max_pick_norm().ln()) + re_g;
        check.record(rhs - lhs);
    }
    check
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub points: usize,
    pub violations: usize,
    /// Smallest `rhs - lhs` seen.
    pub worst_margin: f64,
}

impl BoundCheck {
    fn record(&mut self, margin: f64) {
        let tol = 1e-9 * (1.0 + margin.abs());
        if self.points == 0 || margin < self.worst_margin {
            self.worst_margin = margin;
        }
        self.points += 1;
        if margin < -tol {
            self.violations += 1;
        }
    }
}

/// Points of `family` as a plain list, in family order.
pub fn family_nodes(family: &SequenceFamily) -> Vec<DiskPoint> {
    family.points.iter().map(|p| p.point).collect()
}

/// `ln |B_lambda(lambda)|` for every node; convenience for reports.
pub fn log_b_all(nodes: &[DiskPoint]) -> Vec<f64> {
    let t = PointTable::new(nodes);
    (0..nodes.len()).map(|i| crate::blaschke_carleson::log_b_omit_points(&t, i).to_f64()).collect()
}
