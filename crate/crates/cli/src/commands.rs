use crate::config::{KindFilter, RunConfig};
use crate::manifest::OutputDir;
use crate::svg;
use nlab_core::blaschke_carleson::carleson_norm;
use nlab_core::boundary_measures::certify_c1;
use nlab_core::dyadic_model::{build_nevanlinna, build_smirnov, read_sequence_csv, write_sequence_csv};
use nlab_core::nevanlinna_gauges::{gauge_ladder, ladder_radii};
use nlab_core::peak_builder::{build_all_peaks, build_necessity_peak, check_necessity_bound, family_nodes};
use nlab_core::witness_optimizer::{depth_trace, kernel_grid, kernel_sum_sup, smirnov_contradiction};
use nlab_core::{
    DiskPoint, Error, FamilyKind, Gauge, GaugeFunction, PointKind, SequenceFamily, SmirnovWeightParams,
};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::TAU;
use std::path::Path;

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(String),
    Threshold(String),
    Other(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical(_) => 3,
            Self::Threshold(_) => 4,
            Self::Other(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration: {m}"),
            Self::Numerical(m) => write!(f, "numerical failure: {m}"),
            Self::Threshold(m) => write!(f, "threshold violated: {m}"),
            Self::Other(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let m = e.to_string();
        match e {
            Error::InvalidInput(_) | Error::NotInFamily(_) | Error::ResourceLimit { .. } | Error::Csv { .. } | Error::Json(_) => {
                Self::Config(m)
            }
            Error::CertificateRejected { .. } => Self::Threshold(m),
            Error::Io(_) => Self::Other(m),
            _ => Self::Numerical(m),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::Other(e.to_string())
    }
}

fn build_family(cfg: &RunConfig) -> Result<SequenceFamily, Failure> {
    Ok(match cfg.family {
        FamilyKind::Nevanlinna => build_nevanlinna(cfg.n_gen, cfg.m_extra)?,
        FamilyKind::Smirnov => build_smirnov(cfg.n_gen)?,
    })
}

fn weight_params(cfg: &RunConfig, family: &SequenceFamily) -> Result<SmirnovWeightParams, Failure> {
    let c1 = match cfg.weights.c1 {
        Some(c) => c,
        None => certify_c1(family.points.iter().map(|p| &p.point))?,
    };
    Ok(match cfg.weights.c0 {
        Some(c0) => SmirnovWeightParams::new(c0, c1)?,
        None => SmirnovWeightParams::from_certified_c1(c1),
    })
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> nlab_core::Result<()>) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

pub fn construct(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let family = build_family(cfg)?;
    let mut dir = OutputDir::create(out)?;
    let data = csv_bytes(|b| write_sequence_csv(family.points.iter().copied(), b))?;
    dir.write("sequence.csv", &data)?;
    dir.write("figure.svg", svg::interval_figure(&family, cfg.figure.n, cfg.figure.k).as_bytes())?;
    dir.finish("construct", cfg)?;
    println!("{} points written to {}", family.len(), out.join("sequence.csv").display());
    Ok(())
}

pub fn check(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let points: Vec<nlab_core::dyadic_model::FamilyPoint> = match &cfg.check.input_csv {
        Some(path) => {
            let file = std::fs::File::open(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            read_sequence_csv(file)?
        }
        None => build_family(cfg)?.points,
    };
    let selected: Vec<DiskPoint> = points
        .iter()
        .filter(|p| match cfg.check.kind {
            KindFilter::A => p.index.kind == PointKind::A,
            KindFilter::B => p.index.kind == PointKind::B,
            KindFilter::All => true,
        })
        .map(|p| p.point)
        .collect();
    let report = carleson_norm(&selected, cfg.check.depth);
    let mut dir = OutputDir::create(out)?;
    dir.write_json("check.json", &report)?;
    dir.finish("check", cfg)?;
    println!(
        "points = {}, Carleson norm = {:.6}, min separation = {:?}, Blaschke sum = {:.12}",
        report.points, report.norm, report.min_sep, report.blaschke_sum
    );
    if let Some(max) = cfg.check.max_carleson {
        if report.norm > max {
            return Err(Failure::Threshold(format!("Carleson norm {} exceeds {max}", report.norm)));
        }
    }
    if let (Some(min), Some(sep)) = (cfg.check.min_separation, report.min_sep) {
        if sep < min {
            return Err(Failure::Threshold(format!("minimum separation {sep} below {min}")));
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct PeakRow {
    label: String,
    log_abs_c: f64,
    pick_norms: Vec<f64>,
    value_error: f64,
    nonzero_elsewhere: usize,
}

#[derive(Serialize)]
struct PeaksSummary<'a> {
    family: FamilyKind,
    n_gen: u32,
    m_extra: u32,
    weights: Option<SmirnovWeightParams>,
    peaks: Vec<PeakRow>,
    max_value_error: f64,
    nonzero_elsewhere: usize,
    max_log_abs_c: f64,
    max_pick_norm: f64,
    gauge: &'a Gauge,
    max_gauge: f64,
    worst_self_convergence: f64,
    monotone: bool,
    max_per_radius: &'a [f64],
    limit: Option<nlab_core::nevanlinna_gauges::LimitEstimate>,
}

pub fn peaks(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    if let Some(nec) = &cfg.peaks.necessity {
        return necessity(cfg, nec, out);
    }
    let family = build_family(cfg)?;
    let params = match family.family {
        FamilyKind::Smirnov => Some(weight_params(cfg, &family)?),
        FamilyKind::Nevanlinna => None,
    };
    let peaks = build_all_peaks(&family, params.as_ref())?;
    let nodes = family_nodes(&family);
    let rows: Vec<PeakRow> = peaks
        .par_iter()
        .map(|p| {
            let d = p.delta_audit(&nodes);
            PeakRow {
                label: p.index.map(|i| i.to_string()).unwrap_or_default(),
                log_abs_c: p.audit.log_abs_c,
                pick_norms: p.audit.pick_norms.clone(),
                value_error: d.value_error,
                nonzero_elsewhere: d.nonzero_elsewhere,
            }
        })
        .collect();
    let gauge = match family.family {
        FamilyKind::Nevanlinna => Gauge::Log1p,
        FamilyKind::Smirnov => Gauge::Psi { psi: GaugeFunction::PsiLlog },
    };
    let radii = ladder_radii(&cfg.peaks.ladder);
    let report = gauge_ladder(&peaks, &gauge, &radii, &cfg.peaks.quadrature)?;
    let summary = PeaksSummary {
        family: family.family,
        n_gen: family.n_gen,
        m_extra: family.m_extra,
        weights: params,
        max_value_error: rows.iter().map(|r| r.value_error).fold(0.0, f64::max),
        nonzero_elsewhere: rows.iter().map(|r| r.nonzero_elsewhere).sum(),
        max_log_abs_c: rows.iter().map(|r| r.log_abs_c).fold(f64::NEG_INFINITY, f64::max),
        max_pick_norm: peaks.iter().map(|p| p.max_pick_norm()).fold(0.0, f64::max),
        peaks: rows,
        gauge: &report.gauge,
        max_gauge: report.max_value,
        worst_self_convergence: report.worst_self_convergence,
        monotone: report.monotone,
        max_per_radius: &report.max_per_radius,
        limit: report.limit,
    };
    let mut dir = OutputDir::create(out)?;
    dir.write("gauges.csv", &csv_bytes(|b| report.to_csv(b))?)?;
    dir.write_json("peaks.json", &summary)?;
    dir.finish("peaks", cfg)?;
    println!(
        "{} peaks, max |f(lambda) - 1| = {:.2e}, nonzero elsewhere = {}, max gauge = {:.6} (self-convergence {:.1e})",
        summary.peaks.len(),
        summary.max_value_error,
        summary.nonzero_elsewhere,
        summary.max_gauge,
        summary.worst_self_convergence
    );
    if summary.max_value_error > cfg.peaks.delta_tol || summary.nonzero_elsewhere > 0 {
        return Err(Failure::Threshold("delta property not exact".into()));
    }
    if family.family == FamilyKind::Smirnov && summary.max_log_abs_c > 0.0 {
        return Err(Failure::Threshold(format!("log|c| = {} is positive", summary.max_log_abs_c)));
    }
    if let Some(max) = cfg.peaks.max_gauge {
        if summary.max_gauge > max {
            return Err(Failure::Threshold(format!("uniform gauge {} exceeds {max}", summary.max_gauge)));
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct NecessityRow {
    position: usize,
    pick_norm: f64,
    value_error: f64,
    nonzero_elsewhere: usize,
    grid_points: usize,
    violations: usize,
    worst_margin: f64,
}

fn necessity(cfg: &RunConfig, nec: &crate::config::NecessityConfig, out: &Path) -> Result<(), Failure> {
    let nodes: Vec<DiskPoint> = nec
        .nodes
        .iter()
        .map(|&(g, t)| {
            if g > 0.0 && g <= 1.0 {
                Ok(DiskPoint::from_gap_f64(g, TAU * t))
            } else {
                Err(Failure::Config(format!("node gap {g} outside (0, 1]")))
            }
        })
        .collect::<Result<_, _>>()?;
    nec.mu.validate()?;
    let rows: Vec<NecessityRow> = (0..nodes.len())
        .into_par_iter()
        .map(|pos| {
            let p = build_necessity_peak(pos, &nodes, &nec.mu)?;
            let d = p.delta_audit(&nodes);
            let b = check_necessity_bound(&p, &nec.mu, nec.grid, nec.grid);
            Ok(NecessityRow {
                position: pos,
                pick_norm: p.audit.pick_norms[0],
                value_error: d.value_error,
                nonzero_elsewhere: d.nonzero_elsewhere,
                grid_points: b.points,
                violations: b.violations,
                worst_margin: b.worst_margin,
            })
        })
        .collect::<nlab_core::Result<_>>()
        .map_err(|e| match e {
            Error::CertificateRejected { index, margin } => {
                Failure::Threshold(format!("measure refused: first failing node {index} has margin {margin:e}"))
            }
            e => e.into(),
        })?;
    let mut dir = OutputDir::create(out)?;
    dir.write_json("necessity.json", &rows)?;
    dir.finish("peaks", cfg)?;
    let violations: usize = rows.iter().map(|r| r.violations).sum();
    println!("{} necessity peaks, bound violations = {violations}", rows.len());
    if violations > 0 || rows.iter().any(|r| r.nonzero_elsewhere > 0 || r.value_error > cfg.peaks.delta_tol) {
        return Err(Failure::Threshold("necessity peak failed its audit".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct SmirnovWitness {
    kernel_sum: KernelSummary,
    contradiction: nlab_core::witness_optimizer::ContradictionReport,
}

#[derive(Serialize)]
struct KernelSummary {
    n_gen: u32,
    sup: f64,
    argmax_turns: f64,
    comparison: f64,
    single_dominant: bool,
    dominant_violations: usize,
    /// Sup on the grid refined by two more dyadic levels.
    refined_sup: f64,
}

pub fn witness(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let w = &cfg.witness;
    let mut dir = OutputDir::create(out)?;
    match cfg.family {
        FamilyKind::Nevanlinna => {
            let trace = depth_trace(&w.depths, |n| build_nevanlinna(n, cfg.m_extra), &w.grid, w.rhs)?;
            dir.write_json("witness.json", &trace.results)?;
            dir.write("depth_trace.csv", &csv_bytes(|b| trace.to_csv(b))?)?;
            let rows: Vec<(u32, f64)> = trace.results.iter().map(|r| (r.n_gen, r.value)).collect();
            dir.write("depth_trace.svg", svg::trace_chart(&rows, "least certifying mass").as_bytes())?;
            dir.finish("witness", cfg)?;
            for r in &trace.results {
                println!("N = {}: mass = {:.6} (dual bound {:.6}, gap {:.1e})", r.n_gen, r.value, r.dual_bound, r.gap);
            }
            if let Some(r) = trace.results.iter().find(|r| r.gap > 1e-6) {
                return Err(Failure::Numerical(format!("duality gap {} at N = {}", r.gap, r.n_gen)));
            }
            if trace.results.len() < 2 {
                eprintln!("warning: a single depth gives no growth check");
                return Ok(());
            }
            if !trace.strictly_increasing || trace.ratios.iter().any(|&q| q < w.min_ratio) {
                return Err(Failure::Threshold(format!("growth ratios {:?} below {}", trace.ratios, w.min_ratio)));
            }
        }
        FamilyKind::Smirnov => {
            let fam = build_smirnov(cfg.n_gen)?;
            let ks = kernel_sum_sup(&fam, &kernel_grid(cfg.n_gen, w.kernel_extra));
            let refined = kernel_sum_sup(&fam, &kernel_grid(cfg.n_gen, w.kernel_extra + 2));
            let contradiction = smirnov_contradiction(cfg.n_gen, w.reference_depth, &w.grid, w.kernel_extra)?;
            let report = SmirnovWitness {
                kernel_sum: KernelSummary {
                    n_gen: ks.n_gen,
                    sup: ks.sup,
                    argmax_turns: ks.argmax_turns,
                    comparison: ks.comparison,
                    single_dominant: ks.single_dominant,
                    dominant_violations: ks.dominant_violations.len(),
                    refined_sup: refined.sup,
                },
                contradiction,
            };
            dir.write_json("witness.json", &report)?;
            let rows: Vec<(u32, f64)> = report.contradiction.rows.iter().map(|r| (r.n_gen, r.mass_lower_bound)).collect();
            dir.write("depth_trace.svg", svg::trace_chart(&rows, "mass lower bound").as_bytes())?;
            dir.finish("witness", cfg)?;
            println!(
                "kernel sum sup = {:.4}, reference mass = {:.4}, crossing depth = {:?}",
                report.kernel_sum.sup, report.contradiction.reference_mass, report.contradiction.crossing_depth
            );
            if report.contradiction.crossing_depth.is_none() {
                return Err(Failure::Threshold(format!("no crossing up to N = {}", cfg.n_gen)));
            }
        }
    }
    Ok(())
}

#[derive(serde::Deserialize)]
struct TraceRow {
    n_gen: u32,
    value: f64,
}

pub fn figure(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let family = build_family(cfg)?;
    let mut dir = OutputDir::create(out)?;
    dir.write("figure.svg", svg::interval_figure(&family, cfg.figure.n, cfg.figure.k).as_bytes())?;
    if let Some(path) = &cfg.figure.trace_csv {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        let rows: Vec<(u32, f64)> = rdr
            .deserialize::<TraceRow>()
            .enumerate()
            .map(|(i, r)| {
                r.map(|r| (r.n_gen, r.value))
                    .map_err(|e| Failure::Config(format!("{} row {}: {e}", path.display(), i + 1)))
            })
            .collect::<Result<_, _>>()?;
        dir.write("depth_trace.svg", svg::trace_chart(&rows, "least certifying mass").as_bytes())?;
    }
    dir.finish("figure", cfg)?;
    Ok(())
}
