//! Adaptive Gauss-Kronrod (7/15) quadrature with user breakpoints.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-300,
            max_panels: 20_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    /// Final panels, sorted by left endpoint.
    pub panels: Vec<(f64, f64)>,
}

impl QuadResult {
    /// Integral recomputed with every final panel halved; used as a self-convergence check.
    pub fn halved_value<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let mut acc = Neumaier::default();
        for &(a, b) in &self.panels {
            let m = 0.5 * (a + b);
            acc.add(kronrod(&f, a, m).0);
            acc.add(kronrod(&f, m, b).0);
        }
        acc.sum()
    }
}

/// Compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn sum(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Kronrod estimate and `|K - G|` on one panel.
fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let (v, e, _) = kronrod_abs(f, a, b);
    (v, e)
}

/// As [`kronrod`], also returning the Kronrod integral of `|f|`.
fn kronrod_abs<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    let mut ra = fc.abs() * WGK[7];
    for j in 0..7 {
        let x = h * XGK[j];
        let (l, r) = (f(c - x), f(c + x));
        rk += WGK[j] * (l + r);
        ra += WGK[j] * (l.abs() + r.abs());
        if j % 2 == 1 {
            rg += WG[j / 2] * (l + r);
        }
    }
    (rk * h, ((rk - rg) * h).abs(), ra * h.abs())
}

/// Error attributable to rounding alone, per unit of `int |f|`.
const ROUNDOFF: f64 = 50.0 * f64::EPSILON;

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Integrates `f` over `[breaks[0], breaks[last]]`, starting from one panel per
/// consecutive breakpoint pair and bisecting the worst panel until the total
/// error estimate meets `max(abs_tol, rel_tol |I|)`.
pub fn integrate_breaks<F: Fn(f64) -> f64>(
    f: F,
    breaks: &[f64],
    opts: &QuadOptions,
) -> Result<QuadResult> {
    if breaks.len() < 2 {
        return Err(Error::InvalidInput("need at least two breakpoints".into()));
    }
    let mut heap = BinaryHeap::new();
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let (value, error, abs) = kronrod_abs(&f, w[0], w[1]);
            heap.push(Panel {
                a: w[0],
                b: w[1],
                value,
                error,
                abs,
            });
        }
    }
    loop {
        let (mut value, mut error, mut abs) = (Neumaier::default(), Neumaier::default(), 0.0);
        for p in heap.iter() {
            value.add(p.value);
            error.add(p.error);
            abs += p.abs;
        }
        let (total, err) = (value.sum(), error.sum());
        let target = opts.abs_tol.max(opts.rel_tol * total.abs()).max(ROUNDOFF * abs);
        let worst_width = heap.peek().map(|p| p.b - p.a).unwrap_or(0.0);
        let exhausted = heap.len() >= opts.max_panels;
        let unsplittable = worst_width <= f64::EPSILON * breaks[0].abs().max(1.0) * 4.0;
        if err <= target || exhausted || unsplittable {
            if err > target {
                return Err(Error::QuadratureNonConvergence {
                    error: err,
                    panels: heap.len(),
                });
            }
            let mut panels: Vec<Panel> = heap.into_vec();
            panels.sort_by(|x, y| x.a.total_cmp(&y.a));
            let mut ordered = Neumaier::default();
            for p in &panels {
                ordered.add(p.value);
            }
            return Ok(QuadResult {
                value: ordered.sum(),
                error: err,
                panels: panels.iter().map(|p| (p.a, p.b)).collect(),
            });
        }
        let worst = heap.pop().expect("nonempty");
        let m = 0.5 * (worst.a + worst.b);
        for (a, b) in [(worst.a, m), (m, worst.b)] {
            let (value, error, abs) = kronrod_abs(&f, a, b);
            heap.push(Panel { a, b, value, error, abs });
        }
    }
}

pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult> {
    integrate_breaks(f, &[a, b], opts)
}

/// Breakpoints in `[lo, hi]` clustering geometrically at `center`, from
/// `min_width` up to the interval scale.
pub fn graded_breaks(center: f64, min_width: f64, lo: f64, hi: f64) -> Vec<f64> {
    let mut out = vec![lo, hi];
    if center > lo && center < hi {
        out.push(center);
    }
    let span = hi - lo;
    let mut w = min_width.max(span * 1e-16);
    while w < span {
        for x in [center - w, center + w] {
            if x > lo && x < hi {
                out.push(x);
            }
        }
        w *= 2.0;
    }
    out
}

/// Sorts and removes near-duplicate breakpoints.
pub fn normalize_breaks(mut b: Vec<f64>) -> Vec<f64> {
    b.sort_by(f64::total_cmp);
    b.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * y.abs().max(1.0));
    b
}
