//! Circle means of `log(1 + |f|)`, `log+ |f|` and `psi(log(1 + |f|))` for peak
//! functions, on radial ladders `r_j = 1 - 2^-j`.
//!
//! All three integrands are subharmonic in `f`'s argument, so every ladder is
//! nondecreasing in `r`.

use crate::boundary_measures::GaugeFunction;
use crate::error::{Error, Result};
use crate::lognum::log1p_exp;
use crate::peak_builder::PeakFunction;
use crate::quadrature::{graded_breaks, integrate_breaks, normalize_breaks, QuadOptions};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Gauge {
    /// `log(1 + |f|)`
    Log1p,
    /// `log+ |f|`
    LogPlus,
    /// `psi(log(1 + |f|))`
    Psi { psi: GaugeFunction },
}

impl Gauge {
    fn apply(&self, ln_abs: f64) -> f64 {
        match self {
            Self::Log1p => log1p_exp(ln_abs),
            Self::LogPlus => ln_abs.max(0.0),
            Self::Psi { psi } => psi.eval(log1p_exp(ln_abs)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeOptions {
    pub quad: QuadOptions,
    /// Refinement stops at `max(width_factor * (1 - r), width_floor)`.
    pub width_factor: f64,
    pub width_floor: f64,
    /// Recompute on halved panels and report the relative change.
    pub self_check: bool,
}

impl Default for GaugeOptions {
    fn default() -> Self {
        Self {
            quad: QuadOptions {
                rel_tol: 1e-11,
                ..QuadOptions::default()
            },
            width_factor: 1e-2,
            width_floor: 1e-12,
            self_check: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeValue {
    pub r: f64,
    pub value: f64,
    /// Quadrature error estimate.
    pub error: f64,
    /// Relative change when every panel is halved.
    pub self_convergence: f64,
}

/// `int gauge(f(r e^{i theta})) dtheta / 2 pi`.
pub fn circle_mean(f: &PeakFunction, gauge: &Gauge, r: f64, opts: &GaugeOptions) -> Result<GaugeValue> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidInput(format!("radius {r} outside (0, 1)")));
    }
    let g = 1.0 - r;
    let min_width = (opts.width_factor * g).max(opts.width_floor);
    let mut breaks = vec![0.0, TAU];
    for s in f.singular_angles() {
        let s = s.rem_euclid(TAU);
        for c in [s - TAU, s, s + TAU] {
            if c > -min_width && c < TAU + min_width {
                breaks.extend(graded_breaks(c, min_width, 0.0, TAU));
            }
        }
    }
    let breaks = normalize_breaks(breaks);
    let integrand = |theta: f64| gauge.apply(f.ln_abs_polar(g, theta / TAU)) / TAU;
    let res = integrate_breaks(integrand, &breaks, &opts.quad)?;
    let self_convergence = if opts.self_check {
        let h = res.halved_value(integrand);
        (h - res.value).abs() / res.value.abs().max(f64::MIN_POSITIVE)
    } else {
        f64::NAN
    };
    Ok(GaugeValue {
        r,
        value: res.value,
        error: res.error,
        self_convergence: if res.value == 0.0 { 0.0 } else { self_convergence },
    })
}

pub fn circle_mean_log1p(f: &PeakFunction, r: f64, opts: &GaugeOptions) -> Result<GaugeValue> {
    circle_mean(f, &Gauge::Log1p, r, opts)
}

pub fn circle_mean_psi(f: &PeakFunction, psi: &GaugeFunction, r: f64, opts: &GaugeOptions) -> Result<GaugeValue> {
    circle_mean(f, &Gauge::Psi { psi: psi.clone() }, r, opts)
}

/// `1 - 2^-j` for each `j`.
pub fn ladder_radii(js: &[u32]) -> Vec<f64> {
    js.iter().map(|&j| 1.0 - 2f64.powi(-(j as i32))).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitEstimate {
    pub last: f64,
    pub last_increment: f64,
    /// Declared estimate: the last value.
    pub estimate: f64,
    /// `2 |last increment|`
    pub error_bar: f64,
    /// `last + d q / (1 - q)` when the last two increments shrink geometrically with ratio `q`.
    pub geometric_limit: Option<f64>,
    /// Increments grew at the end of the ladder.
    pub non_cauchy: bool,
}

/// Reports the last ladder value with an error bar; never extrapolates past the data.
pub fn radial_limit_estimate(values: &[f64]) -> Result<LimitEstimate> {
    if values.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "need at least 4 ladder values, got {}",
            values.len()
        )));
    }
    let n = values.len();
    let d = values[n - 1] - values[n - 2];
    let dp = values[n - 2] - values[n - 3];
    let non_cauchy = d.abs() > dp.abs() * (1.0 + 1e-12) && d.abs() > 1e-15 * values[n - 1].abs();
    let geometric_limit = if dp != 0.0 && d != 0.0 {
        let q = d / dp;
        (q > 0.0 && q < 1.0).then(|| values[n - 1] + d * q / (1.0 - q))
    } else if d == 0.0 {
        Some(values[n - 1])
    } else {
        None
    };
    Ok(LimitEstimate {
        last: values[n - 1],
        last_increment: d,
        estimate: values[n - 1],
        error_bar: 2.0 * d.abs(),
        geometric_limit,
        non_cauchy,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeRow {
    pub peak: usize,
    pub label: String,
    pub r: f64,
    pub value: f64,
    pub error: f64,
    pub self_convergence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeReport {
    pub gauge: Gauge,
    pub radii: Vec<f64>,
    pub rows: Vec<GaugeRow>,
    /// Max over peaks at each radius.
    pub max_per_radius: Vec<f64>,
    /// Max over peaks and radii: the reported uniform constant.
    pub max_value: f64,
    pub worst_self_convergence: f64,
    /// Every per-peak ladder nondecreasing within its error estimates.
    pub monotone: bool,
    pub limit: Option<LimitEstimate>,
}

impl GaugeReport {
    pub fn to_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for (i, row) in self.rows.iter().enumerate() {
            w.serialize(row).map_err(|e| Error::Csv {
                row: i + 1,
                message: e.to_string(),
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

fn peak_label(p: &PeakFunction) -> String {
    match &p.index {
        Some(idx) => idx.to_string(),
        None => format!("node {}", p.position),
    }
}

/// Gauge ladder for every peak and radius, parallel over `(peak, r)`.
pub fn gauge_ladder(peaks: &[PeakFunction], gauge: &Gauge, radii: &[f64], opts: &GaugeOptions) -> Result<GaugeReport> {
    let jobs: Vec<(usize, usize)> = (0..peaks.len())
        .flat_map(|p| (0..radii.len()).map(move |r| (p, r)))
        .collect();
    let values: Vec<GaugeValue> = jobs
        .par_iter()
        .map(|&(p, r)| circle_mean(&peaks[p], gauge, radii[r], opts))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(jobs.len());
    let mut max_per_radius = vec![0.0f64; radii.len()];
    let mut monotone = true;
    for (p, peak) in peaks.iter().enumerate() {
        let ladder = &values[p * radii.len()..(p + 1) * radii.len()];
        for (ri, v) in ladder.iter().enumerate() {
            max_per_radius[ri] = max_per_radius[ri].max(v.value);
            rows.push(GaugeRow {
                peak: p,
                label: peak_label(peak),
                r: v.r,
                value: v.value,
                error: v.error,
                self_convergence: v.self_convergence,
            });
        }
        monotone &= ladder.windows(2).all(|w| {
            w[1].value >= w[0].value - (w[0].error + w[1].error) - 1e-10 * w[0].value.abs()
        });
    }
    let worst_self_convergence = values.iter().map(|v| v.self_convergence).fold(0.0, f64::max);
    let max_value = max_per_radius.iter().copied().fold(0.0, f64::max);
    let limit = radial_limit_estimate(&max_per_radius).ok();
    Ok(GaugeReport {
        gauge: gauge.clone(),
        radii: radii.to_vec(),
        rows,
        max_per_radius,
        max_value,
        worst_self_convergence,
        monotone,
        limit,
    })
}

/// `psi(C) (1 - |I|/2pi) + (|I|/2pi) psi(C + h)`: the boundary mean of
/// `psi(C + w)` for `w = h chi_I`, which bounds `int psi(C + P_r[w])` by Jensen.
pub fn psi_chain_bound(psi: &GaugeFunction, c: f64, h: f64, arc_len: f64) -> f64 {
    let frac = arc_len / TAU;
    psi.eval(c) * (1.0 - frac) + frac * psi.eval(c + h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary_measures::BoundaryMeasure;
    use crate::disk_geom::{Angle, DiskPoint, LogComplex};
    use crate::dyadic_model::{build_nevanlinna, PointKind};
    use crate::lognum::DoubleDouble;
    use crate::peak_builder::{build_necessity_peak, build_peak_nevanlinna, Factor, PeakAudit, PeakKind};

    fn bare(factors: Vec<Factor>) -> PeakFunction {
        PeakFunction {
            kind: PeakKind::Necessity,
            lambda: DiskPoint::origin(),
            index: None,
            position: 0,
            factors,
            audit: PeakAudit {
                log_abs_c: 0.0,
                pick_norms: vec![],
                ln_inv_twin_rho: None,
                re_g_at_lambda: 0.0,
                h_abs_at_lambda: None,
                h_required: None,
                target_margin: None,
            },
        }
    }

    fn constant(c: f64) -> PeakFunction {
        bare(vec![Factor::Constant {
            value: LogComplex {
                ln_abs: DoubleDouble::from_f64(c.ln()),
                arg: 0.0,
            },
        }])
    }

    #[test]
    fn constants() {
        let opts = GaugeOptions::default();
        let zero = bare(vec![Factor::Constant { value: LogComplex::zero() }]);
        assert_eq!(circle_mean_log1p(&zero, 0.5, &opts).unwrap().value, 0.0);
        let v = circle_mean_log1p(&constant(3.0), 0.9, &opts).unwrap();
        assert!((v.value - 4f64.ln()).abs() < 1e-13);
        let psi = GaugeFunction::PsiLlog;
        assert_eq!(circle_mean_psi(&zero, &psi, 0.5, &opts).unwrap().value, 0.0);
        let id = circle_mean_psi(&constant(3.0), &GaugeFunction::Identity, 0.9, &opts).unwrap();
        assert!((id.value - v.value).abs() < 1e-14);
    }

    #[test]
    fn herglotz_exponential_is_bounded() {
        let f = bare(vec![Factor::HerglotzExp {
            mu: BoundaryMeasure::atom(Angle::dyadic(1, 3), 1.0),
        }]);
        let opts = GaugeOptions::default();
        let mut last = 0.0;
        for j in 1..=16 {
            let v = circle_mean_log1p(&f, 1.0 - 2f64.powi(-j), &opts).unwrap();
            assert!(v.value <= 2f64.ln() + 1.0);
            assert!(v.value >= last - 1e-12);
            assert!(v.self_convergence < 1e-8, "{v:?}");
            last = v.value;
        }
        // log+ mean of e^{P} is the mean of P, which is one
        let lp = circle_mean(&f, &Gauge::LogPlus, 1.0 - 1e-6, &opts).unwrap();
        assert!((lp.value - 1.0).abs() < 1e-8, "{lp:?}");
    }

    #[test]
    fn limit_estimates() {
        let c = radial_limit_estimate(&[2.0; 5]).unwrap();
        assert_eq!((c.estimate, c.error_bar, c.non_cauchy), (2.0, 0.0, false));
        let geo: Vec<f64> = (0..8).map(|j| 1.0 - 0.5f64.powi(j)).collect();
        let g = radial_limit_estimate(&geo).unwrap();
        let last = geo[7];
        assert!((g.geometric_limit.unwrap() - (last + g.last_increment)).abs() < 1e-15);
        assert!((g.geometric_limit.unwrap() - 1.0).abs() < 1e-15);
        assert!(!g.non_cauchy);
        let grow = radial_limit_estimate(&[0.0, 1.0, 3.0, 7.0]).unwrap();
        assert!(grow.non_cauchy);
        assert!(radial_limit_estimate(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn nevanlinna_ladder_is_monotone_and_converged() {
        let f = build_nevanlinna(2, 1).unwrap();
        let peaks: Vec<PeakFunction> = f
            .of_kind(PointKind::A)
            .take(3)
            .map(|p| build_peak_nevanlinna(&p.index, &f).unwrap())
            .collect();
        let radii = ladder_radii(&[2, 4, 6, 8, 10]);
        let rep = gauge_ladder(&peaks, &Gauge::Log1p, &radii, &GaugeOptions::default()).unwrap();
        assert!(rep.monotone);
        assert!(rep.worst_self_convergence < 1e-8);
        assert!(rep.max_value.is_finite() && rep.max_value > 0.0);
        let mut buf = Vec::new();
        rep.to_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 15);
    }

    #[test]
    fn necessity_gauge_obeys_its_budget() {
        let nodes: Vec<DiskPoint> = (0..4).map(|i| DiskPoint::from_gap_f64(0.4, TAU * i as f64 / 4.0)).collect();
        let mu = BoundaryMeasure::uniform(1.5);
        let opts = GaugeOptions::default();
        for pos in 0..nodes.len() {
            let p = build_necessity_peak(pos, &nodes, &mu).unwrap();
            for &r in &[0.5, 0.9, 0.99] {
                let v = circle_mean_log1p(&p, r, &opts).unwrap().value;
                // mean log+|H| at radius r, H = (2 + g)^2
                let h_only = bare(vec![Factor::HerglotzSquare { mu: mu.clone() }]);
                let h_mean = circle_mean(&h_only, &Gauge::LogPlus, r, &opts).unwrap().value;
                let budget = 2f64.ln() + p.audit.pick_norms[0].ln().max(0.0) + mu.total_mass() + h_mean;
                assert!(v <= budget, "{v} > {budget}");
            }
        }
    }

    #[test]
    fn psi_bound_dominates_smoothed_values() {
        let b = psi_chain_bound(&GaugeFunction::PsiLlog, 0.5, 10.0, 0.3);
        let direct = GaugeFunction::PsiLlog.eval(0.5) * (1.0 - 0.3 / TAU) + 0.3 / TAU * GaugeFunction::PsiLlog.eval(10.5);
        assert!((b - direct).abs() < 1e-14);
    }
}
