//! The two counterexample families.
//!
//! Rays sit at the dyadic angles `k 2^-n` turns with `k` odd, so generation `n`
//! carries `2^{n-1}` rays and no ray repeats an earlier generation's endpoint.
//!
//! * Nevanlinna: `a = (1 - 2^-m) e^{2 pi i k 2^-n}` for `m >= 2n`, twinned with
//!   `b = (1 - e^{-2^m}) a`, whose gap is `2^-m + e^{-2^m}(1 - 2^-m)`.
//! * Smirnov: one pair per ray, `a` at gap `2^-2n` and `b` on the same ray with
//!   `rho(a, b) = exp(-2^{2n} / (2n))` exactly.

use crate::disk_geom::{Angle, DiskPoint, Gap};
use crate::error::{Error, Result};
use crate::lognum::{log_sub_exp, DoubleDouble, LogMagnitude};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

/// Default cap on materialized points.
pub const DEFAULT_POINT_CAP: usize = 1 << 21;

/// Deepest radial level whose twin offset `e^{-2^m}` stays in range.
pub const MAX_LEVEL: u32 = 60;

/// Deepest Smirnov generation (`2^{2n}/(2n)` must stay in range).
pub const MAX_SMIRNOV_GEN: u32 = 29;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Nevanlinna,
    Smirnov,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PointKind {
    A,
    B,
}

impl PointKind {
    pub fn other(self) -> Self {
        match self {
            Self::A => Self::B,
            Self::B => Self::A,
        }
    }
}

/// `(n, k, m, kind)`; field order gives the lexicographic family order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PointIndex {
    pub n: u32,
    pub k: u64,
    pub m: u32,
    pub kind: PointKind,
}

impl PointIndex {
    pub fn angle(&self) -> Angle {
        Angle::dyadic(self.k, self.n)
    }
}

impl std::fmt::Display for PointIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {}, {:?})", self.n, self.k, self.m, self.kind)
    }
}

/// Same ray and level, other kind.
pub fn twin(idx: PointIndex) -> PointIndex {
    PointIndex {
        kind: idx.kind.other(),
        ..idx
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyPoint {
    pub index: PointIndex,
    pub point: DiskPoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceFamily {
    pub family: FamilyKind,
    pub n_gen: u32,
    pub m_extra: u32,
    pub points: Vec<FamilyPoint>,
}

/// `e^{-2^m} (1 - 2^-m)`, the Nevanlinna twin gap offset.
pub fn nevanlinna_twin_excess(m: u32) -> LogMagnitude {
    let one_minus = log_sub_exp(LogMagnitude::one(), LogMagnitude::pow2(-(m as i64)))
        .expect("2^-m <= 1");
    LogMagnitude::exp_neg_pow2(m) * one_minus
}

pub fn nevanlinna_point(n: u32, k: u64, m: u32, kind: PointKind) -> DiskPoint {
    let base = LogMagnitude::pow2(-(m as i64));
    let gap = match kind {
        PointKind::A => Gap::new(base),
        PointKind::B => Gap::with_excess(base, nevanlinna_twin_excess(m)),
    };
    DiskPoint {
        angle: Angle::dyadic(k, n),
        gap,
    }
}

/// Target separation `rho(a_{n,k}, b_{n,k}) = exp(-2^{2n} / (2n))`.
pub fn smirnov_target_rho(n: u32) -> LogMagnitude {
    let num = DoubleDouble::ONE.ldexp(2 * n as i32);
    LogMagnitude::from_ln_dd(-(num / DoubleDouble::from_f64(2.0 * n as f64)))
}

/// Gap offset `d` with `rho_collinear(s, s + d) = rho`, `s = 2^-2n`:
/// `d = rho (2s - s^2) / (1 - rho (1 - s))`.
pub fn smirnov_twin_excess(n: u32) -> LogMagnitude {
    let s = LogMagnitude::pow2(-2 * n as i64);
    let one = LogMagnitude::one();
    let oms = log_sub_exp(one, s).expect("s <= 1");
    let two_minus_s = log_sub_exp(LogMagnitude::pow2(1), s).expect("s <= 2");
    let rho = smirnov_target_rho(n);
    let den = log_sub_exp(one, rho * oms).expect("rho < 1");
    rho * s * two_minus_s / den
}

pub fn smirnov_point(n: u32, k: u64, kind: PointKind) -> DiskPoint {
    let base = LogMagnitude::pow2(-2 * n as i64);
    let gap = match kind {
        PointKind::A => Gap::new(base),
        PointKind::B => Gap::with_excess(base, smirnov_twin_excess(n)),
    };
    DiskPoint {
        angle: Angle::dyadic(k, n),
        gap,
    }
}

/// Number of points `2 (M + 1) (2^N - 1)` of a Nevanlinna truncation.
pub fn nevanlinna_count(n_gen: u32, m_extra: u32) -> u128 {
    2 * (m_extra as u128 + 1) * ((1u128 << n_gen) - 1)
}

/// Lazily enumerates the Nevanlinna points of one kind (or both) in family order.
pub fn nevanlinna_indices(
    n_gen: u32,
    m_extra: u32,
    kinds: &'static [PointKind],
) -> impl Iterator<Item = PointIndex> {
    (1..=n_gen).flat_map(move |n| {
        (0..(1u64 << (n - 1))).flat_map(move |j| {
            let k = 2 * j + 1;
            (2 * n..=2 * n + m_extra)
                .flat_map(move |m| kinds.iter().map(move |&kind| PointIndex { n, k, m, kind }))
        })
    })
}

fn check_cap(requested: u128, cap: usize) -> Result<()> {
    if requested > cap as u128 {
        return Err(Error::ResourceLimit {
            what: "sequence points",
            requested,
            cap,
        });
    }
    Ok(())
}

pub fn build_nevanlinna(n_gen: u32, m_extra: u32) -> Result<SequenceFamily> {
    build_nevanlinna_with_cap(n_gen, m_extra, DEFAULT_POINT_CAP)
}

pub fn build_nevanlinna_with_cap(n_gen: u32, m_extra: u32, cap: usize) -> Result<SequenceFamily> {
    if n_gen == 0 {
        return Err(Error::InvalidInput("N_gen must be at least 1".into()));
    }
    if 2 * n_gen + m_extra > MAX_LEVEL {
        return Err(Error::InvalidInput(format!(
            "deepest level 2N + M = {} exceeds {MAX_LEVEL}",
            2 * n_gen + m_extra
        )));
    }
    check_cap(nevanlinna_count(n_gen, m_extra), cap)?;
    let max_m = 2 * n_gen + m_extra;
    let excess: Vec<LogMagnitude> = (0..=max_m).map(nevanlinna_twin_excess).collect();
    let points = nevanlinna_indices(n_gen, m_extra, &[PointKind::A, PointKind::B])
        .map(|index| {
            let base = LogMagnitude::pow2(-(index.m as i64));
            let gap = match index.kind {
                PointKind::A => Gap::new(base),
                PointKind::B => Gap::with_excess(base, excess[index.m as usize]),
            };
            FamilyPoint {
                index,
                point: DiskPoint {
                    angle: index.angle(),
                    gap,
                },
            }
        })
        .collect();
    Ok(SequenceFamily {
        family: FamilyKind::Nevanlinna,
        n_gen,
        m_extra,
        points,
    })
}

pub fn build_smirnov(n_gen: u32) -> Result<SequenceFamily> {
    build_smirnov_with_cap(n_gen, DEFAULT_POINT_CAP)
}

pub fn build_smirnov_with_cap(n_gen: u32, cap: usize) -> Result<SequenceFamily> {
    if n_gen == 0 {
        return Err(Error::InvalidInput("N_gen must be at least 1".into()));
    }
    if n_gen > MAX_SMIRNOV_GEN {
        return Err(Error::InvalidInput(format!(
            "Smirnov generation {n_gen} exceeds {MAX_SMIRNOV_GEN}"
        )));
    }
    check_cap(2 * ((1u128 << n_gen) - 1), cap)?;
    let mut points = Vec::new();
    for n in 1..=n_gen {
        let excess = smirnov_twin_excess(n);
        let base = LogMagnitude::pow2(-2 * n as i64);
        for j in 0..(1u64 << (n - 1)) {
            let k = 2 * j + 1;
            for kind in [PointKind::A, PointKind::B] {
                let gap = match kind {
                    PointKind::A => Gap::new(base),
                    PointKind::B => Gap::with_excess(base, excess),
                };
                let index = PointIndex { n, k, m: 2 * n, kind };
                points.push(FamilyPoint {
                    index,
                    point: DiskPoint {
                        angle: index.angle(),
                        gap,
                    },
                });
            }
        }
    }
    Ok(SequenceFamily {
        family: FamilyKind::Smirnov,
        n_gen,
        m_extra: 0,
        points,
    })
}

impl SequenceFamily {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Radial levels per ray.
    fn levels(&self) -> u64 {
        self.m_extra as u64 + 1
    }

    /// Position of `idx` in `points`, computed from the enumeration order.
    pub fn position(&self, idx: &PointIndex) -> Option<usize> {
        let (n, k, m) = (idx.n, idx.k, idx.m);
        if n == 0 || n > self.n_gen || k % 2 == 0 || k >= (1u64 << n) {
            return None;
        }
        if m < 2 * n || m as u64 > 2 * n as u64 + self.m_extra as u64 {
            return None;
        }
        let per_ray = 2 * self.levels();
        let before = ((1u64 << (n - 1)) - 1) * per_ray;
        let within = (k / 2) * per_ray + (m - 2 * n) as u64 * 2 + (idx.kind == PointKind::B) as u64;
        let pos = (before + within) as usize;
        (pos < self.points.len() && self.points[pos].index == *idx).then_some(pos)
    }

    pub fn get(&self, idx: &PointIndex) -> Result<&FamilyPoint> {
        self.position(idx)
            .map(|p| &self.points[p])
            .ok_or_else(|| Error::NotInFamily(idx.to_string()))
    }

    /// Twin index, checked for membership.
    pub fn twin_of(&self, idx: &PointIndex) -> Result<PointIndex> {
        self.get(idx)?;
        Ok(twin(*idx))
    }

    pub fn of_kind(&self, kind: PointKind) -> impl Iterator<Item = &FamilyPoint> {
        self.points.iter().filter(move |p| p.index.kind == kind)
    }

    /// Deepest stored radial level on any ray.
    pub fn max_level(&self) -> u32 {
        self.points.iter().map(|p| p.index.m).max().unwrap_or(0)
    }

    pub fn to_csv<W: Write>(&self, out: W) -> Result<()> {
        write_sequence_csv(self.points.iter().copied(), out)
    }
}

/// Sum of `1 - |a|` over the Nevanlinna `A` points of a truncation, with the
/// closed-form tail `sum_{m > 2n + M} 2^-m = 2^{-2n-M}` per ray when `full_tails`.
pub fn nevanlinna_blaschke_sum(n_gen: u32, m_extra: u32, full_tails: bool) -> DoubleDouble {
    let mut total = DoubleDouble::ZERO;
    for idx in nevanlinna_indices(n_gen, m_extra, &[PointKind::A]) {
        total = total + DoubleDouble::ONE.ldexp(-(idx.m as i32));
    }
    if full_tails {
        for n in 1..=n_gen {
            let rays = (1u64 << (n - 1)) as f64;
            let tail = DoubleDouble::ONE.ldexp(-(2 * n as i32) - m_extra as i32);
            total = total + tail.mul_f64(rays);
        }
    }
    total
}

/// One row of the sequence CSV.
///
/// `log_gap_*` describe the full gap. `base_*` and `excess_*` carry the exact
/// split when the gap has a twin offset, and are empty otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceRow {
    pub kind: PointKind,
    pub n: u32,
    pub k: u64,
    pub m: u32,
    pub angle_turns_num: u64,
    pub angle_turns_den_exp: u32,
    pub log_gap_exp2: i64,
    pub log_gap_frac: f64,
    pub log_gap_frac_lo: f64,
    pub base_exp2: Option<i64>,
    pub base_frac: Option<f64>,
    pub base_frac_lo: Option<f64>,
    pub excess_exp2: Option<i64>,
    pub excess_frac: Option<f64>,
    pub excess_frac_lo: Option<f64>,
}

fn split_parts(x: LogMagnitude) -> (Option<i64>, Option<f64>, Option<f64>) {
    match x.parts() {
        Some((e, f)) => (Some(e), Some(f.hi), Some(f.lo)),
        None => (None, None, None),
    }
}

impl SequenceRow {
    pub fn from_point(p: &FamilyPoint) -> Result<Self> {
        let (num, den_exp) = match p.point.angle {
            Angle::Dyadic { num, den_exp } => (num, den_exp),
            Angle::Radians(_) => {
                return Err(Error::InvalidInput(
                    "sequence CSV requires dyadic angles".into(),
                ))
            }
        };
        let (exp2, frac) = p.point.gap.value().parts().expect("gap is positive");
        let split = !p.point.gap.excess.is_zero();
        let (be, bf, bl) = if split { split_parts(p.point.gap.base) } else { (None, None, None) };
        let (ee, ef, el) = if split { split_parts(p.point.gap.excess) } else { (None, None, None) };
        Ok(Self {
            kind: p.index.kind,
            n: p.index.n,
            k: p.index.k,
            m: p.index.m,
            angle_turns_num: num,
            angle_turns_den_exp: den_exp,
            log_gap_exp2: exp2,
            log_gap_frac: frac.hi,
            log_gap_frac_lo: frac.lo,
            base_exp2: be,
            base_frac: bf,
            base_frac_lo: bl,
            excess_exp2: ee,
            excess_frac: ef,
            excess_frac_lo: el,
        })
    }

    pub fn to_point(&self) -> Result<FamilyPoint> {
        if self.angle_turns_den_exp > crate::disk_geom::MAX_DYADIC_EXP {
            return Err(Error::InvalidInput("angle denominator too large".into()));
        }
        let join = |e: Option<i64>, f: Option<f64>, l: Option<f64>| match (e, f) {
            (Some(e), Some(f)) => Some(LogMagnitude::from_parts(
                e,
                DoubleDouble::from_sum(f, l.unwrap_or(0.0)),
            )),
            _ => None,
        };
        let gap = match (
            join(self.base_exp2, self.base_frac, self.base_frac_lo),
            join(self.excess_exp2, self.excess_frac, self.excess_frac_lo),
        ) {
            (Some(b), Some(e)) => Gap::with_excess(b, e),
            _ => Gap::new(LogMagnitude::from_parts(
                self.log_gap_exp2,
                DoubleDouble::from_sum(self.log_gap_frac, self.log_gap_frac_lo),
            )),
        };
        let point = DiskPoint::new(Angle::dyadic(self.angle_turns_num, self.angle_turns_den_exp), gap)?;
        Ok(FamilyPoint {
            index: PointIndex {
                n: self.n,
                k: self.k,
                m: self.m,
                kind: self.kind,
            },
            point,
        })
    }
}

pub fn write_sequence_csv<W: Write>(
    points: impl IntoIterator<Item = FamilyPoint>,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (row, p) in points.into_iter().enumerate() {
        let r = SequenceRow::from_point(&p)?;
        w.serialize(r).map_err(|e| Error::Csv {
            row: row + 1,
            message: e.to_string(),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a sequence CSV; row numbers in errors count data rows from 1.
pub fn read_sequence_csv<R: Read>(input: R) -> Result<Vec<FamilyPoint>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<SequenceRow>().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Csv {
            row,
            message: e.to_string(),
        })?;
        out.push(rec.to_point().map_err(|e| Error::Csv {
            row,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
