//! Non-interpolation witnesses.
//!
//! A measure `mu` certifying Nevanlinna interpolation must satisfy
//! `P[mu](lambda) >= c_lambda` at every point. The least total mass of such a
//! measure on a boundary grid is a covering LP; its growth with depth shows
//! that no finite measure works. For Smirnov weights the same inequality,
//! weighted by `1 - |a|^2` and summed, is bounded by `||w||_1` times a kernel
//! sum that stays bounded while the left side diverges.

use crate::blaschke_carleson::log_b_omit_all;
use crate::boundary_measures::{harmonic_measure, poisson_kernel_gap};
use crate::disk_geom::{rho, Angle, Arc};
use crate::dyadic_model::{build_smirnov, twin, SequenceFamily};
use crate::error::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Solution of `min sum x` subject to `K x >= c`, `x >= 0`, with its dual.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub x: Vec<f64>,
    /// Multipliers `y >= 0` with `K^T y <= 1`, rescaled to be exactly feasible.
    pub y: Vec<f64>,
    pub primal_value: f64,
    /// `c^T y`, a certified lower bound on the optimum.
    pub dual_bound: f64,
    /// `max_i (c_i - (K x)_i)^+ / c_i`
    pub primal_infeasibility: f64,
    /// Complementary slackness residual, relative to the optimum.
    pub cs_residual: f64,
    pub iterations: usize,
}

impl LpSolution {
    /// `(primal - dual) / primal`
    pub fn gap(&self) -> f64 {
        (self.primal_value - self.dual_bound) / self.primal_value.abs().max(f64::MIN_POSITIVE)
    }
}

const PIVOT_TOL: f64 = 1e-12;
/// Iterations without objective progress before switching to Bland's rule.
const STALL_LIMIT: usize = 50;

/// Dense dual simplex for a covering LP with nonnegative `k` (row-major `m x n`).
///
/// Rows are scaled by `1 / c_i`, so the slack basis starts dual feasible
/// (unit costs) and primal infeasible; each pivot restores one row.
pub fn solve_covering(k: &[f64], m: usize, n: usize, c: &[f64]) -> Result<LpSolution> {
    if k.len() != m * n || c.len() != m {
        return Err(Error::Lp("dimension mismatch".into()));
    }
    if k.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::Lp("coefficients must be finite and nonnegative".into()));
    }
    let active: Vec<usize> = (0..m).filter(|&i| c[i] > 0.0).collect();
    let ma = active.len();
    let width = n + ma + 1;
    // row i: -sum_j (K_ij / c_i) x_j + t_i = -1
    let mut tab = vec![0.0; ma * width];
    for (r, &i) in active.iter().enumerate() {
        let row = &mut tab[r * width..(r + 1) * width];
        for j in 0..n {
            row[j] = -k[i * n + j] / c[i];
        }
        row[n + r] = 1.0;
        row[width - 1] = -1.0;
    }
    let mut cost = vec![1.0; n + ma];
    for v in cost.iter_mut().skip(n) {
        *v = 0.0;
    }
    let mut basis: Vec<usize> = (0..ma).map(|r| n + r).collect();
    let mut iterations = 0;
    let mut stall = 0;
    let mut best_obj = f64::NEG_INFINITY;
    let max_iter = 50 * (n + ma) + 1000;
    loop {
        let bland = stall >= STALL_LIMIT;
        let leave = if bland {
            (0..ma)
                .filter(|&r| tab[r * width + width - 1] < -1e-13)
                .min_by_key(|&r| basis[r])
        } else {
            (0..ma)
                .filter(|&r| tab[r * width + width - 1] < -1e-13)
                .min_by(|&a, &b| tab[a * width + width - 1].total_cmp(&tab[b * width + width - 1]))
        };
        let Some(r) = leave else { break };
        let row = &tab[r * width..(r + 1) * width];
        let scale = row[..width - 1].iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut enter: Option<(usize, f64)> = None;
        for j in 0..(n + ma) {
            let a = row[j];
            if a < -PIVOT_TOL * scale {
                let ratio = cost[j] / -a;
                let better = match enter {
                    None => true,
                    Some((_, best)) => ratio < best * (1.0 - 1e-14),
                };
                if better {
                    enter = Some((j, ratio));
                }
            }
        }
        let Some((e, _)) = enter else {
            return Err(Error::Lp(format!("row {} cannot be satisfied", active[r])));
        };
        let piv = tab[r * width + e];
        for v in tab[r * width..(r + 1) * width].iter_mut() {
            *v /= piv;
        }
        let prow: Vec<f64> = tab[r * width..(r + 1) * width].to_vec();
        tab.par_chunks_mut(width).enumerate().for_each(|(q, row)| {
            if q != r {
                let f = row[e];
                if f != 0.0 {
                    for (v, p) in row.iter_mut().zip(&prow) {
                        *v -= f * p;
                    }
                    row[e] = 0.0;
                }
            }
        });
        let f = cost[e];
        for (v, p) in cost.iter_mut().zip(&prow) {
            *v -= f * p;
        }
        cost[e] = 0.0;
        basis[r] = e;
        iterations += 1;
        // dual objective: sum of duals = sum of reduced costs on slacks
        let obj: f64 = (0..ma).map(|q| cost[n + q]).sum::<f64>().abs();
        if obj > best_obj * (1.0 + 1e-12) {
            best_obj = obj;
            stall = 0;
        } else {
            stall += 1;
        }
        if iterations > max_iter {
            return Err(Error::Lp(format!("no convergence after {iterations} pivots")));
        }
    }
    let mut x = vec![0.0; n];
    for (r, &b) in basis.iter().enumerate() {
        if b < n {
            x[b] = tab[r * width + width - 1].max(0.0);
        }
    }
    // reduced cost of the surplus is the dual of the scaled row; undo the scaling
    let mut y = vec![0.0; m];
    for (r, &i) in active.iter().enumerate() {
        y[i] = cost[n + r].max(0.0) / c[i];
    }
    certify(k, m, n, c, x, y, iterations)
}

/// Recomputes both certificates from the original data.
fn certify(k: &[f64], m: usize, n: usize, c: &[f64], x: Vec<f64>, mut y: Vec<f64>, iterations: usize) -> Result<LpSolution> {
    let kx: Vec<f64> = (0..m).map(|i| (0..n).map(|j| k[i * n + j] * x[j]).sum()).collect();
    let mut kty = vec![0.0; n];
    for i in 0..m {
        if y[i] != 0.0 {
            for j in 0..n {
                kty[j] += k[i * n + j] * y[i];
            }
        }
    }
    let worst = kty.iter().copied().fold(0.0f64, f64::max);
    if worst > 1.0 {
        for v in y.iter_mut() {
            *v /= worst;
        }
        for v in kty.iter_mut() {
            *v /= worst;
        }
    }
    let primal_value: f64 = x.iter().sum();
    let dual_bound: f64 = y.iter().zip(c).map(|(a, b)| a * b).sum();
    let primal_infeasibility = (0..m)
        .filter(|&i| c[i] > 0.0)
        .map(|i| ((c[i] - kx[i]) / c[i]).max(0.0))
        .fold(0.0, f64::max);
    let scale = primal_value.max(f64::MIN_POSITIVE);
    let cs_rows = (0..m).map(|i| y[i] * (kx[i] - c[i]).abs()).fold(0.0, f64::max);
    let cs_cols = (0..n).map(|j| x[j] * (1.0 - kty[j]).abs()).fold(0.0, f64::max);
    Ok(LpSolution {
        x,
        y,
        primal_value,
        dual_bound,
        primal_infeasibility,
        cs_residual: cs_rows.max(cs_cols) / scale,
        iterations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    /// Dyadic endpoints to depth `N + extra_depth`.
    pub extra_depth: u32,
    /// Uniform angles added on top.
    pub uniform: usize,
    /// Refinement around each ray down to `min_gap * refine_floor` radians.
    pub refine_floor: f64,
    /// Grid multiplier for refinement studies (1 = default).
    pub density: u32,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            extra_depth: 4,
            uniform: 512,
            refine_floor: 0.25,
            density: 1,
        }
    }
}

/// Grid angles (in turns, sorted, in `[0, 1)`) and the innermost refinement offsets.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryGrid {
    pub turns: Vec<f64>,
    /// Index of grid points that sit at the innermost refinement offset of some zone.
    pub innermost: Vec<bool>,
}

pub fn build_grid(family: &SequenceFamily, spec: &GridSpec) -> BoundaryGrid {
    let depth = (family.n_gen + spec.extra_depth + spec.density.max(1).ilog2()).min(20);
    let mut pts: Vec<(f64, bool)> = (0..(1u64 << depth)).map(|k| (k as f64 / (1u64 << depth) as f64, false)).collect();
    let uni = spec.uniform * spec.density.max(1) as usize;
    pts.extend((0..uni).map(|k| (k as f64 / uni as f64, false)));
    let min_gap = family.points.iter().map(|p| p.point.gap_f64()).fold(1.0, f64::min);
    let spacing = 1.0 / (1u64 << depth) as f64;
    let mut rays: Vec<f64> = family.points.iter().map(|p| p.point.angle.turns()).collect();
    rays.sort_by(f64::total_cmp);
    rays.dedup();
    let step = 2f64.powf(1.0 / spec.density.max(1) as f64);
    for &a in &rays {
        let mut w = min_gap * spec.refine_floor / TAU;
        let mut first = true;
        while w < spacing {
            for s in [a - w, a + w] {
                pts.push((s.rem_euclid(1.0), first));
            }
            first = false;
            w *= step;
        }
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|a, b| {
        if (a.0 - b.0).abs() < 1e-15 {
            b.1 |= a.1;
            true
        } else {
            false
        }
    });
    BoundaryGrid {
        turns: pts.iter().map(|p| p.0).collect(),
        innermost: pts.iter().map(|p| p.1).collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsMode {
    /// `log(1 / |B_lambda(lambda)|)` over the truncation.
    Full,
    /// `log(1 / rho(lambda, twin))`, a lower bound free of truncation effects.
    TwinOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessResult {
    pub n_gen: u32,
    pub m_extra: u32,
    pub rhs: RhsMode,
    /// Optimal total mass.
    pub value: f64,
    pub dual_bound: f64,
    pub gap: f64,
    pub cs_residual: f64,
    pub primal_infeasibility: f64,
    /// Atoms `(angle in turns, mass)` with positive mass.
    pub primal: Vec<(f64, f64)>,
    /// Per-point multipliers, family order.
    pub dual: Vec<f64>,
    pub grid_size: usize,
    pub rows: usize,
    pub iterations: usize,
    /// Optimal support touches the innermost refinement offset of a zone.
    pub grid_too_coarse: bool,
}

fn rhs_values(family: &SequenceFamily, mode: RhsMode) -> Result<Vec<f64>> {
    match mode {
        RhsMode::TwinOnly => family
            .points
            .iter()
            .map(|p| Ok(-rho(&p.point, &family.get(&twin(p.index))?.point).ln()))
            .collect(),
        RhsMode::Full => Ok(log_b_omit_all(family).iter().map(|b| b.log_inv()).collect()),
    }
}

/// Least mass of atoms on the grid with `P[mu](lambda) >= c_lambda` for every point.
pub fn min_mass_lp(family: &SequenceFamily, grid: &GridSpec, mode: RhsMode) -> Result<WitnessResult> {
    if family.is_empty() {
        return Err(Error::InvalidInput("empty truncation".into()));
    }
    let g = build_grid(family, grid);
    let n = g.turns.len();
    let m = family.len();
    let c = rhs_values(family, mode)?;
    let k: Vec<f64> = family
        .points
        .par_iter()
        .flat_map_iter(|p| {
            let gap = p.point.gap_f64();
            let t0 = p.point.angle.turns();
            g.turns.iter().map(move |&t| poisson_kernel_gap(gap, t - t0))
        })
        .collect();
    let sol = solve_covering(&k, m, n, &c)?;
    let total = sol.primal_value;
    let primal: Vec<(f64, f64)> = g
        .turns
        .iter()
        .zip(&sol.x)
        .filter(|(_, &x)| x > 0.0)
        .map(|(&t, &x)| (t, x))
        .collect();
    let grid_too_coarse = g
        .innermost
        .iter()
        .zip(&sol.x)
        .any(|(&inner, &x)| inner && x > 1e-9 * total);
    Ok(WitnessResult {
        n_gen: family.n_gen,
        m_extra: family.m_extra,
        rhs: mode,
        value: total,
        dual_bound: sol.dual_bound,
        gap: sol.gap(),
        cs_residual: sol.cs_residual,
        primal_infeasibility: sol.primal_infeasibility,
        primal,
        dual: sol.y,
        grid_size: n,
        rows: m,
        iterations: sol.iterations,
        grid_too_coarse,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthTrace {
    pub results: Vec<WitnessResult>,
    /// `value(N + 1) / value(N)`
    pub ratios: Vec<f64>,
    pub strictly_increasing: bool,
}

impl DepthTrace {
    pub fn to_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Row {
            n_gen: u32,
            m_extra: u32,
            value: f64,
            dual_bound: f64,
            gap: f64,
            cs_residual: f64,
            ratio: Option<f64>,
        }
        let mut w = csv::Writer::from_writer(out);
        for (i, r) in self.results.iter().enumerate() {
            w.serialize(Row {
                n_gen: r.n_gen,
                m_extra: r.m_extra,
                value: r.value,
                dual_bound: r.dual_bound,
                gap: r.gap,
                cs_residual: r.cs_residual,
                ratio: i.checked_sub(1).map(|p| self.ratios[p]),
            })
            .map_err(|e| Error::Csv {
                row: i + 1,
                message: e.to_string(),
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn depth_trace(
    depths: &[u32],
    build: impl Fn(u32) -> Result<SequenceFamily>,
    grid: &GridSpec,
    mode: RhsMode,
) -> Result<DepthTrace> {
    let results: Vec<WitnessResult> = depths
        .iter()
        .map(|&d| min_mass_lp(&build(d)?, grid, mode))
        .collect::<Result<_>>()?;
    let ratios: Vec<f64> = results.windows(2).map(|w| w[1].value / w[0].value).collect();
    let strictly_increasing = ratios.iter().all(|&r| r > 1.0);
    Ok(DepthTrace {
        results,
        ratios,
        strictly_increasing,
    })
}

/// `(1 - |a|^2)^2 / |a - e^{i theta}|^2` for gap `g`, offset in turns.
#[inline]
pub fn kernel_term(g: f64, dturns: f64) -> f64 {
    let s = (std::f64::consts::PI * dturns).sin();
    let w = g * (2.0 - g);
    w * w / (g * g + 4.0 * (1.0 - g) * s * s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSumReport {
    pub n_gen: u32,
    pub sup: f64,
    pub argmax_turns: f64,
    /// `(turns, sum, number of terms above one)` per grid angle.
    pub per_theta: Vec<(f64, f64, usize)>,
    /// `4 (1 + sum_{n <= N} 2^{-2n})`
    pub comparison: f64,
    /// At most one term exceeds one at every grid angle.
    pub single_dominant: bool,
    /// Grid angles (turns) where two or more terms exceed one.
    pub dominant_violations: Vec<f64>,
}

/// Dyadic grid at depth `N + extra` (endpoints and midpoints of depth `N + extra - 1`).
pub fn kernel_grid(n_gen: u32, extra: u32) -> Vec<f64> {
    let d = n_gen + extra;
    (0..(1u64 << d)).map(|k| k as f64 / (1u64 << d) as f64).collect()
}

/// `sup_theta sum_{a in A} (1 - |a|^2)^2 / |a - e^{i theta}|^2` over the grid.
pub fn kernel_sum_sup(family: &SequenceFamily, grid_turns: &[f64]) -> KernelSumReport {
    let a: Vec<(f64, f64)> = family
        .of_kind(crate::dyadic_model::PointKind::A)
        .map(|p| (p.point.gap_f64(), p.point.angle.turns()))
        .collect();
    let per_theta: Vec<(f64, f64, usize)> = grid_turns
        .par_iter()
        .map(|&t| {
            let mut sum = 0.0;
            let mut big = 0;
            for &(g, ta) in &a {
                let v = kernel_term(g, t - ta);
                sum += v;
                if v > 1.0 {
                    big += 1;
                }
            }
            (t, sum, big)
        })
        .collect();
    let (argmax_turns, sup) = per_theta
        .iter()
        .fold((0.0, f64::NEG_INFINITY), |b, &(t, s, _)| if s > b.1 { (t, s) } else { b });
    let comparison = 4.0 * (1.0 + (1..=family.n_gen).map(|n| 2f64.powi(-2 * n as i32)).sum::<f64>());
    KernelSumReport {
        n_gen: family.n_gen,
        sup,
        argmax_turns,
        single_dominant: per_theta.iter().all(|p| p.2 <= 1),
        dominant_violations: per_theta.iter().filter(|p| p.2 > 1).map(|p| p.0).collect(),
        per_theta,
        comparison,
    }
}

/// Least `||w||_1` of a piecewise-constant weight on grid cells with
/// `P[w](lambda) >= log(1 / rho(lambda, twin))` on a Smirnov truncation.
pub fn min_weight_lp(family: &SequenceFamily, grid: &GridSpec) -> Result<(f64, LpSolution)> {
    let g = build_grid(family, grid);
    let cells: Vec<Arc> = (0..g.turns.len())
        .map(|i| {
            let a = g.turns[i];
            let b = if i + 1 < g.turns.len() { g.turns[i + 1] } else { g.turns[0] + 1.0 };
            Arc::new(TAU * 0.5 * (a + b), TAU * 0.5 * (b - a)).expect("positive cell")
        })
        .collect();
    let c = rhs_values(family, RhsMode::TwinOnly)?;
    let n = cells.len();
    let k: Vec<f64> = family
        .points
        .par_iter()
        .flat_map_iter(|p| {
            let gap = p.point.gap_f64();
            let alpha = p.point.angle.to_radians();
            // unit mass spread over the cell: height 2 pi / |cell|
            cells.iter().map(move |cell| harmonic_measure(gap, alpha, cell) * TAU / cell.length())
        })
        .collect();
    let sol = solve_covering(&k, family.len(), n, &c)?;
    Ok((sol.primal_value, sol))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContradictionRow {
    pub n_gen: u32,
    /// `sum_{n <= N} 2^{n-1} / (2n)`
    pub lhs: f64,
    pub kernel_sup: f64,
    /// `1.75 lhs / kernel_sup`: least `||w||_1` any certificate at depth `N` needs.
    pub mass_lower_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContradictionReport {
    /// Depth at which the reference weight was optimized.
    pub reference_depth: u32,
    /// Optimal `||w||_1` at the reference depth.
    pub reference_mass: f64,
    pub rows: Vec<ContradictionRow>,
    /// Smallest depth whose lower bound exceeds the reference mass.
    pub crossing_depth: Option<u32>,
}

/// Compares the mass any Smirnov certificate needs at depth `N` with the
/// optimal weight of depth `reference_depth`.
///
/// Weighting `P[w](a) >= 2^{2n}/(2n)` by `1 - |a|^2 >= 1.75 * 2^{-2n}` and summing
/// over `A` gives `1.75 sum 2^{n-1}/(2n) <= ||w||_1 sup_theta sum (1-|a|^2)^2/|a - e^{i theta}|^2`.
pub fn smirnov_contradiction(n_max: u32, reference_depth: u32, grid: &GridSpec, kernel_extra: u32) -> Result<ContradictionReport> {
    if n_max < 2 || reference_depth < 1 {
        return Err(Error::InvalidInput("need N >= 2 and a positive reference depth".into()));
    }
    let (reference_mass, _) = min_weight_lp(&build_smirnov(reference_depth)?, grid)?;
    let mut rows = Vec::new();
    let mut crossing_depth = None;
    let mut lhs = 0.0;
    for n in 1..=n_max {
        lhs += 2f64.powi(n as i32 - 1) / (2.0 * n as f64);
        if n < 2 {
            continue;
        }
        let fam = build_smirnov(n)?;
        let ks = kernel_sum_sup(&fam, &kernel_grid(n, kernel_extra));
        let lb = 1.75 * lhs / ks.sup;
        if crossing_depth.is_none() && lb > reference_mass {
            crossing_depth = Some(n);
        }
        rows.push(ContradictionRow {
            n_gen: n,
            lhs,
            kernel_sup: ks.sup,
            mass_lower_bound: lb,
        });
    }
    Ok(ContradictionReport {
        reference_depth,
        reference_mass,
        rows,
        crossing_depth,
    })
}

/// Pairs `(turns, mass)` for a measure expressed as atoms at exact dyadic angles when possible.
pub fn atoms_to_angles(primal: &[(f64, f64)]) -> Vec<(Angle, f64)> {
    primal
        .iter()
        .map(|&(t, m)| {
            let scaled = t * (1u64 << 40) as f64;
            let angle = if scaled.fract() == 0.0 {
                Angle::dyadic(scaled as u64, 40)
            } else {
                Angle::Radians(TAU * t)
            };
            (angle, m)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic_model::build_nevanlinna;
    use proptest::prelude::*;

    /// Brute-force oracle for tiny LPs: enumerate square bases of the covering LP
    /// after adding surplus variables.
    fn brute_force(k: &[f64], m: usize, n: usize, c: &[f64]) -> f64 {
        // columns: x_0..x_{n-1}, surplus s_0..s_{m-1} with K x - s = c
        let cols = n + m;
        let col = |j: usize, i: usize| if j < n { k[i * n + j] } else if j - n == i { -1.0 } else { 0.0 };
        let mut best = f64::INFINITY;
        let mut idx: Vec<usize> = (0..m).collect();
        loop {
            // solve the m x m system
            let mut a: Vec<Vec<f64>> = (0..m).map(|i| idx.iter().map(|&j| col(j, i)).chain([c[i]]).collect()).collect();
            let mut ok = true;
            for p in 0..m {
                let piv = (p..m).max_by(|&x, &y| a[x][p].abs().total_cmp(&a[y][p].abs())).unwrap();
                if a[piv][p].abs() < 1e-12 {
                    ok = false;
                    break;
                }
                a.swap(p, piv);
                for q in 0..m {
                    if q != p {
                        let f = a[q][p] / a[p][p];
                        for r in p..=m {
                            a[q][r] -= f * a[p][r];
                        }
                    }
                }
            }
            if ok {
                let sol: Vec<f64> = (0..m).map(|i| a[i][m] / a[i][i]).collect();
                if sol.iter().all(|&v| v >= -1e-12) {
                    let obj: f64 = idx.iter().zip(&sol).filter(|(&j, _)| j < n).map(|(_, v)| v).sum();
                    best = best.min(obj);
                }
            }
            // next combination
            let mut i = m;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if idx[i] < cols - m + i {
                    idx[i] += 1;
                    for q in i + 1..m {
                        idx[q] = idx[q - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    #[test]
    fn origin_constraint() {
        let k = vec![1.0; 8];
        let s = solve_covering(&k, 1, 8, &[1.0]).unwrap();
        assert!((s.primal_value - 1.0).abs() < 1e-14);
        assert!((s.dual_bound - 1.0).abs() < 1e-14);
    }

    #[test]
    fn single_radial_point() {
        // mass at theta = 0 is optimal: T (1 - r) / (1 + r)
        let (r, t) = (0.8, 3.0);
        let g = 1.0 - r;
        let grid: Vec<f64> = (0..4096).map(|k| k as f64 / 4096.0).collect();
        let k: Vec<f64> = grid.iter().map(|&th| poisson_kernel_gap(g, th)).collect();
        let s = solve_covering(&k, 1, grid.len(), &[t]).unwrap();
        assert!((s.primal_value - t * (1.0 - r) / (1.0 + r)).abs() < 1e-6);
    }

    #[test]
    fn matches_brute_force_on_small_instances() {
        let mut seed = 17u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..30 {
            let (m, n) = (3, 5);
            let k: Vec<f64> = (0..m * n).map(|_| next() * 2.0).collect();
            let c: Vec<f64> = (0..m).map(|_| 0.1 + next()).collect();
            let s = solve_covering(&k, m, n, &c).unwrap();
            let b = brute_force(&k, m, n, &c);
            assert!((s.primal_value - b).abs() < 1e-9 * b, "{} {b}", s.primal_value);
            assert!(s.gap() < 1e-9 && s.cs_residual < 1e-8);
        }
    }

    #[test]
    fn nevanlinna_lp_certificates() {
        let f = build_nevanlinna(2, 3).unwrap();
        let r = min_mass_lp(&f, &GridSpec::default(), RhsMode::TwinOnly).unwrap();
        assert!(r.gap <= 1e-6 && r.primal_infeasibility < 1e-9 && r.cs_residual <= 1e-8, "{r:?}");
        assert!(r.dual_bound <= r.value * (1.0 + 1e-12));
        let full = min_mass_lp(&f, &GridSpec::default(), RhsMode::Full).unwrap();
        assert!(full.value >= r.value * (1.0 - 1e-9));
    }

    #[test]
    fn lp_value_monotone_in_constraints_and_grid() {
        let f = build_nevanlinna(2, 2).unwrap();
        let coarse = min_mass_lp(&f, &GridSpec::default(), RhsMode::TwinOnly).unwrap();
        let fine = min_mass_lp(&f, &GridSpec { density: 2, ..GridSpec::default() }, RhsMode::TwinOnly).unwrap();
        assert!(fine.value <= coarse.value * (1.0 + 1e-9));
        let sub = SequenceFamily {
            points: f.points.iter().filter(|p| p.index.n == 1).copied().collect(),
            ..f.clone()
        };
        let fewer = min_mass_lp(&sub, &GridSpec::default(), RhsMode::TwinOnly).unwrap();
        assert!(fewer.value <= coarse.value * (1.0 + 1e-9));
    }

    #[test]
    fn kernel_sum_examples() {
        let f = build_smirnov(1).unwrap();
        let r = kernel_sum_sup(&f, &[0.5]);
        let g: f64 = 0.25;
        assert!((r.sup - (2.0 - g).powi(2)).abs() < 1e-12);
        let f8 = build_smirnov(8).unwrap();
        let r8 = kernel_sum_sup(&f8, &kernel_grid(8, 5));
        assert!(r8.sup <= 8.0, "{}", r8.sup);
        assert!(r8.sup <= 4.0 * r8.comparison && r8.comparison <= 4.0 * r8.sup);
        let r10 = kernel_sum_sup(&build_smirnov(10).unwrap(), &kernel_grid(10, 5));
        assert!((r10.sup / r8.sup - 1.0).abs() <= 0.1);
    }

    #[test]
    fn shallow_and_deep_terms_overlap() {
        // a_{1,1} still sees 1 - |a| comparable to the distance at a_{8,127}
        let f = build_smirnov(8).unwrap();
        let t = 0.5 - 2f64.powi(-8);
        let r = kernel_sum_sup(&f, &[t]);
        assert_eq!(r.per_theta[0].2, 2);
        assert!(kernel_term(0.25, t - 0.5) > 3.0);
        assert!(!r.single_dominant && r.dominant_violations == vec![t]);
    }

    #[test]
    fn contradiction_depth_is_finite() {
        let rep = smirnov_contradiction(10, 2, &GridSpec::default(), 5).unwrap();
        let lbs: Vec<f64> = rep.rows.iter().map(|r| r.mass_lower_bound).collect();
        assert!(lbs.windows(2).all(|w| w[1] > w[0]));
        let d = rep.crossing_depth.unwrap();
        assert!(d > 2 && d <= 10, "{rep:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn weak_duality_on_random_covering(seed in 0u64..10_000, m in 1usize..6, n in 1usize..12) {
            let mut s = seed;
            let mut next = || {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 11) as f64 / (1u64 << 53) as f64
            };
            let k: Vec<f64> = (0..m * n).map(|_| 0.01 + next()).collect();
            let c: Vec<f64> = (0..m).map(|_| next() * 3.0).collect();
            let sol = solve_covering(&k, m, n, &c).unwrap();
            prop_assert!(sol.dual_bound <= sol.primal_value * (1.0 + 1e-12) + 1e-15);
            prop_assert!(sol.gap() <= 1e-9 || sol.primal_value < 1e-12);
            prop_assert!(sol.primal_infeasibility < 1e-9);
        }
    }
}
