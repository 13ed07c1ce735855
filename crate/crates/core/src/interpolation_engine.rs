//! Finite bounded interpolation in the disk.
//!
//! General data: bisection on `c` for positivity of the Pick matrix
//! `[(c^2 - v_i conj(v_j)) / (1 - conj(z_i) z_j)]`, then a Schur chain realizing
//! an interpolant of norm `c`.
//!
//! Peak data (`1` or `v` at one node, `0` elsewhere): every interpolant factors
//! through the Blaschke product `B` of the other nodes, so `v B(z) / B(lambda)`
//! is optimal with norm `|v| / |B(lambda)|` and its zeros are exact.

use crate::blaschke_carleson::ln_rho_f64;
use crate::disk_geom::{blaschke_factor, rho, DiskPoint, LogComplex};
use crate::error::{Error, Result};
use crate::lognum::DoubleDouble;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PickProblem {
    pub nodes: Vec<DiskPoint>,
    pub targets: Vec<Complex64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PickOptions {
    /// Relative width of the final bisection bracket.
    pub rel_tol: f64,
    /// Pivots below `psd_threshold * trace` count as zero.
    pub psd_threshold: f64,
    /// Node pairs with `rho` below this are rejected.
    pub min_rho: f64,
    pub max_nodes: usize,
}

impl Default for PickOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            psd_threshold: 1e-12,
            min_rho: 1e-10,
            max_nodes: 2000,
        }
    }
}

impl PickProblem {
    pub fn new(nodes: Vec<DiskPoint>, targets: Vec<Complex64>) -> Result<Self> {
        if nodes.len() != targets.len() {
            return Err(Error::InvalidInput(format!(
                "{} nodes but {} targets",
                nodes.len(),
                targets.len()
            )));
        }
        if targets.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidInput("non-finite target".into()));
        }
        Ok(Self { nodes, targets })
    }

    fn check_separation(&self, min_rho: f64) -> Result<()> {
        let ln_min = min_rho.ln();
        for i in 0..self.nodes.len() {
            for j in (i + 1)..self.nodes.len() {
                let (a, b) = (&self.nodes[i], &self.nodes[j]);
                let l = if a.angle.same_as(&b.angle) {
                    rho(a, b).ln()
                } else {
                    ln_rho_f64(a.gap_f64(), b.gap_f64(), a.angle.diff_turns(&b.angle))
                };
                if !(l >= ln_min) {
                    return Err(Error::IllConditioned(i, j));
                }
            }
        }
        Ok(())
    }
}

/// Szego kernel normalized to unit diagonal:
/// `sqrt((1-|z_i|^2)(1-|z_j|^2)) / (1 - conj(z_i) z_j)`, assembled from gaps.
fn normalized_kernel(nodes: &[DiskPoint]) -> Vec<Complex64> {
    let n = nodes.len();
    let g: Vec<f64> = nodes.iter().map(|p| p.gap_f64()).collect();
    let d: Vec<f64> = g.iter().map(|&x| (x * (2.0 - x)).sqrt()).collect();
    let mut k = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                k[i * n + j] = Complex64::new(1.0, 0.0);
                continue;
            }
            let delta = TAU * nodes[i].angle.diff_turns(&nodes[j].angle);
            let (ri, rj) = (1.0 - g[i], 1.0 - g[j]);
            let u = g[i] + g[j] - g[i] * g[j];
            let h = (0.5 * delta).sin();
            let one_minus = Complex64::new(u + 2.0 * ri * rj * h * h, -ri * rj * delta.sin());
            k[i * n + j] = Complex64::new(d[i] * d[j], 0.0) / one_minus;
        }
    }
    k
}

fn pick_matrix(kernel: &[Complex64], v: &[Complex64], c: f64) -> Vec<Complex64> {
    let n = v.len();
    let mut m = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = (Complex64::new(c * c, 0.0) - v[i] * v[j].conj()) * kernel[i * n + j];
        }
    }
    m
}

/// Positive semidefiniteness of a Hermitian matrix by diagonally pivoted
/// Cholesky; pivots within `threshold * trace` of zero are treated as zero.
pub fn is_psd(mut a: Vec<Complex64>, n: usize, threshold: f64) -> bool {
    let trace: f64 = (0..n).map(|i| a[i * n + i].re).sum();
    if n == 0 {
        return true;
    }
    if !(trace > 0.0) {
        return a.iter().all(|x| x.norm() == 0.0);
    }
    let tol = threshold * trace;
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let (p, dmax) = (k..n)
            .map(|i| (i, a[perm[i] * n + perm[i]].re))
            .fold((k, f64::NEG_INFINITY), |b, x| if x.1 > b.1 { x } else { b });
        if dmax <= tol {
            // remaining Schur complement must vanish to tolerance
            return (k..n).all(|i| {
                (k..n).all(|j| {
                    let x = a[perm[i] * n + perm[j]];
                    if i == j {
                        x.re >= -tol
                    } else {
                        x.norm() <= tol
                    }
                })
            });
        }
        perm.swap(k, p);
        let pk = perm[k];
        let piv = a[pk * n + pk].re;
        for i in (k + 1)..n {
            let pi = perm[i];
            let lik = a[pi * n + pk] / piv;
            for j in (k + 1)..n {
                let pj = perm[j];
                let upd = lik * a[pk * n + pj];
                a[pi * n + pj] -= upd;
            }
        }
    }
    true
}

/// Complex double-double, enough to keep the Schur recursion exact to ~1e-20
/// when a parameter approaches the unit circle.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Cdd {
    re: DoubleDouble,
    im: DoubleDouble,
}

impl Cdd {
    const ONE: Self = Self {
        re: DoubleDouble::ONE,
        im: DoubleDouble::ZERO,
    };

    fn from_c(z: Complex64) -> Self {
        Self {
            re: DoubleDouble::from_f64(z.re),
            im: DoubleDouble::from_f64(z.im),
        }
    }

    fn split(self) -> (Complex64, Complex64) {
        let hi = Complex64::new(self.re.hi, self.im.hi);
        (hi, Complex64::new(self.re.lo, self.im.lo))
    }

    fn join(hi: Complex64, lo: Complex64) -> Self {
        Self {
            re: DoubleDouble::from_sum(hi.re, lo.re),
            im: DoubleDouble::from_sum(hi.im, lo.im),
        }
    }

    fn to_c(self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    fn conj(self) -> Self {
        Self {
            re: self.re,
            im: -self.im,
        }
    }

    fn add(self, o: Self) -> Self {
        Self {
            re: self.re + o.re,
            im: self.im + o.im,
        }
    }

    fn sub(self, o: Self) -> Self {
        Self {
            re: self.re - o.re,
            im: self.im - o.im,
        }
    }

    fn mul(self, o: Self) -> Self {
        Self {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }

    fn norm_sqr(self) -> DoubleDouble {
        self.re * self.re + self.im * self.im
    }

    fn div(self, o: Self) -> Self {
        let d = o.norm_sqr();
        let n = self.mul(o.conj());
        Self {
            re: n.re / d,
            im: n.im / d,
        }
    }

    fn norm(self) -> f64 {
        self.norm_sqr().to_f64().sqrt()
    }
}

fn mobius_dd(a: Cdd, z: Cdd) -> Cdd {
    z.sub(a).div(Cdd::ONE.sub(a.conj().mul(z)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchurStep {
    pub node: Complex64,
    /// Parameter as an unevaluated sum `gamma + gamma_lo`.
    pub gamma: Complex64,
    pub gamma_lo: Complex64,
}

/// Schur function given by `f_k = (gamma_k + b_k f_{k+1}) / (1 + conj(gamma_k) b_k f_{k+1})`,
/// `b_k` the Blaschke factor at `node_k`, ending in the constant `terminal`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchurChain {
    pub steps: Vec<SchurStep>,
    pub terminal: Complex64,
}

impl SchurChain {
    pub fn constant(c: Complex64) -> Self {
        Self {
            steps: vec![],
            terminal: c,
        }
    }

    /// Runs the Schur algorithm on values `w` (already divided by the norm).
    /// A parameter on or outside the unit circle terminates the chain with
    /// the nearest unimodular constant.
    pub fn build(nodes: &[Complex64], w: &[Complex64]) -> Self {
        let zs: Vec<Cdd> = nodes.iter().map(|&z| Cdd::from_c(z)).collect();
        let mut vals: Vec<Cdd> = w.iter().map(|&x| Cdd::from_c(x)).collect();
        let mut steps = Vec::with_capacity(nodes.len());
        for k in 0..nodes.len() {
            let gamma = vals[k];
            let modulus = gamma.norm();
            if modulus >= 1.0 {
                return Self {
                    steps,
                    terminal: gamma.to_c() / modulus,
                };
            }
            for j in (k + 1)..nodes.len() {
                let num = vals[j].sub(gamma).div(Cdd::ONE.sub(gamma.conj().mul(vals[j])));
                vals[j] = num.div(mobius_dd(zs[k], zs[j]));
            }
            let (hi, lo) = gamma.split();
            steps.push(SchurStep {
                node: nodes[k],
                gamma: hi,
                gamma_lo: lo,
            });
        }
        Self {
            steps,
            terminal: Complex64::new(0.0, 0.0),
        }
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let z = Cdd::from_c(z);
        let mut f = Cdd::from_c(self.terminal);
        for s in self.steps.iter().rev() {
            let g = Cdd::join(s.gamma, s.gamma_lo);
            let bf = mobius_dd(Cdd::from_c(s.node), z).mul(f);
            f = g.add(bf).div(Cdd::ONE.add(g.conj().mul(bf)));
        }
        f.to_c()
    }

    /// Largest parameter modulus; below one iff the data are strictly solvable.
    pub fn max_gamma(&self) -> f64 {
        self.steps.iter().map(|s| s.gamma.norm()).fold(self.terminal.norm(), f64::max)
    }
}

/// `scale * prod_{a in zeros} b_a(z) * chain(z)` with `|chain| <= 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundedInterpolant {
    /// Certified bound on the sup norm.
    pub norm: f64,
    pub ln_norm: f64,
    pub scale: LogComplex,
    pub zeros: Vec<DiskPoint>,
    pub chain: SchurChain,
    /// `(failing, passing)` values of `c` from the bisection, when one ran.
    pub bracket: Option<(f64, f64)>,
    /// `(gap, turns)` of each zero, for double-precision evaluation.
    zeros_polar: Vec<(f64, f64)>,
}

impl BoundedInterpolant {
    fn new(
        scale: LogComplex,
        zeros: Vec<DiskPoint>,
        chain: SchurChain,
        bracket: Option<(f64, f64)>,
    ) -> Self {
        let ln_norm = scale.ln_abs.to_f64();
        let zeros_polar = zeros.iter().map(|p| (p.gap_f64(), p.angle.turns())).collect();
        Self {
            norm: ln_norm.exp(),
            ln_norm,
            scale,
            zeros,
            chain,
            bracket,
            zeros_polar,
        }
    }

    pub fn eval(&self, z: &DiskPoint) -> LogComplex {
        let mut acc = self.scale;
        for a in &self.zeros {
            acc = acc.mul(blaschke_factor(a, z));
            if acc.is_zero() {
                return acc;
            }
        }
        if !self.chain.steps.is_empty() || self.chain.terminal != Complex64::new(1.0, 0.0) {
            acc = acc.mul(LogComplex::from_complex(self.chain.eval(z.to_complex())));
        }
        acc
    }

    pub fn eval_complex(&self, z: &DiskPoint) -> Complex64 {
        self.eval(z).to_complex()
    }

    /// `ln |f|` at `(1-g) e^{2 pi i turns}` in doubles, for quadrature.
    pub fn ln_abs_polar(&self, g: f64, turns: f64) -> f64 {
        let mut acc = self.scale.ln_abs.to_f64();
        for &(ga, ta) in &self.zeros_polar {
            acc += ln_rho_f64(g, ga, turns - ta);
        }
        if !self.chain.steps.is_empty() || self.chain.terminal != Complex64::new(1.0, 0.0) {
            let z = Complex64::from_polar(1.0 - g, TAU * turns);
            acc += self.chain.eval(z).norm().ln();
        }
        acc
    }
}

/// Minimal-norm interpolant of general data; norm within `rel_tol` of optimal.
pub fn pick_min_norm(p: &PickProblem, opts: &PickOptions) -> Result<BoundedInterpolant> {
    let n = p.nodes.len();
    if n == 0 {
        return Ok(BoundedInterpolant::new(LogComplex::zero(), vec![], SchurChain::constant(Complex64::new(0.0, 0.0)), None));
    }
    if n > opts.max_nodes {
        return Err(Error::InvalidInput(format!("{n} nodes exceed the cap {}", opts.max_nodes)));
    }
    p.check_separation(opts.min_rho)?;
    let kernel = normalized_kernel(&p.nodes);
    let psd = |c: f64| is_psd(pick_matrix(&kernel, &p.targets, c), n, opts.psd_threshold);
    let vmax = p.targets.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if vmax == 0.0 {
        return Ok(BoundedInterpolant::new(LogComplex::zero(), vec![], SchurChain::constant(Complex64::new(0.0, 0.0)), None));
    }
    let (mut lo, mut hi);
    if psd(vmax) {
        lo = vmax;
        hi = vmax;
    } else {
        lo = vmax;
        hi = 2.0 * vmax;
        let mut doublings = 0;
        while !psd(hi) {
            lo = hi;
            hi *= 2.0;
            doublings += 1;
            if doublings > 200 {
                return Err(Error::PickFailure(format!("no positive Pick matrix up to c = {hi:e}")));
            }
        }
        while hi > lo * (1.0 + opts.rel_tol) {
            let mid = (lo * hi).sqrt();
            if psd(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    // the PSD threshold can accept c marginally below optimal on ill-conditioned
    // data; the realization then decides, and the bracket moves up if it fails
    let z: Vec<Complex64> = p.nodes.iter().map(|x| x.to_complex()).collect();
    let realize = |c: f64| {
        let w: Vec<Complex64> = p.targets.iter().map(|v| v / c).collect();
        let chain = SchurChain::build(&z, &w);
        let residual = z
            .iter()
            .zip(&w)
            .map(|(&zi, wi)| (chain.eval(zi) - wi).norm())
            .fold(0.0, f64::max);
        (residual <= 1e-12).then_some(chain)
    };
    let chain = match realize(hi) {
        Some(ch) => ch,
        None => {
            lo = lo.max(hi);
            let mut step = opts.rel_tol;
            let mut found = None;
            for _ in 0..200 {
                let c = lo * (1.0 + step);
                if let Some(ch) = realize(c) {
                    found = Some((c, ch));
                    break;
                }
                lo = c;
                step *= 2.0;
            }
            let (mut c_ok, mut ch_ok) =
                found.ok_or_else(|| Error::PickFailure("Schur realization never became feasible".into()))?;
            while c_ok > lo * (1.0 + opts.rel_tol) {
                let mid = (lo * c_ok).sqrt();
                match realize(mid) {
                    Some(ch) => {
                        c_ok = mid;
                        ch_ok = ch;
                    }
                    None => lo = mid,
                }
            }
            hi = c_ok;
            ch_ok
        }
    };
    let scale = LogComplex {
        ln_abs: DoubleDouble::from_f64(hi.ln()),
        arg: 0.0,
    };
    Ok(BoundedInterpolant::new(scale, vec![], chain, Some((lo, hi))))
}

/// `target * B(z) / B(lambda)`, `B` the Blaschke product over `nodes` minus `nodes[lambda]`.
pub fn peak_interpolant_scaled(lambda: usize, nodes: &[DiskPoint], target: LogComplex) -> Result<BoundedInterpolant> {
    let l = nodes
        .get(lambda)
        .ok_or_else(|| Error::InvalidInput(format!("peak index {lambda} out of range")))?;
    let mut zeros = Vec::with_capacity(nodes.len().saturating_sub(1));
    let mut at_lambda = LogComplex::ONE;
    for (j, a) in nodes.iter().enumerate() {
        if j == lambda {
            continue;
        }
        let b = blaschke_factor(a, l);
        if b.is_zero() {
            return Err(Error::IllConditioned(lambda.min(j), lambda.max(j)));
        }
        at_lambda = at_lambda.mul(b);
        zeros.push(*a);
    }
    let scale = target.mul(at_lambda.recip());
    Ok(BoundedInterpolant::new(scale, zeros, SchurChain::constant(Complex64::new(1.0, 0.0)), None))
}

/// Optimal interpolant of `1` at `nodes[lambda]` and `0` at the other nodes.
pub fn peak_interpolant(lambda: usize, nodes: &[DiskPoint]) -> Result<BoundedInterpolant> {
    peak_interpolant_scaled(lambda, nodes, LogComplex::ONE)
}
