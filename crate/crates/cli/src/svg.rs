//! Minimal SVG 1.1 writers.

use nlab_core::{PointKind, SequenceFamily};
use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 480.0;
const PAD: f64 = 56.0;

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}">
<title>{}</title>
<rect width="{W}" height="{H}" fill="white"/>"#,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(out: &mut String, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        r#"<line x1="{PAD}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>
<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{y0}" stroke="black"/>
<text x="{xm}" y="{yl}" text-anchor="middle" font-size="13">{}</text>
<text x="16" y="{ym}" text-anchor="middle" font-size="13" transform="rotate(-90 16 {ym})">{}</text>"#,
        escape(x_label),
        escape(y_label),
        y0 = H - PAD,
        x1 = W - PAD,
        xm = W / 2.0,
        yl = H - 16.0,
        ym = H / 2.0,
    );
}

/// Points of the family above `I_{n,k}`: angle across, `log2(1 / gap)` upward.
pub fn interval_figure(family: &SequenceFamily, n: u32, k: u64) -> String {
    let lo = k as f64 / (1u64 << n) as f64;
    let hi = (k + 1) as f64 / (1u64 << n) as f64;
    let pts: Vec<(f64, f64, PointKind)> = family
        .points
        .iter()
        .filter_map(|p| {
            let t = p.point.angle.turns();
            (t >= lo && t <= hi).then(|| (t, p.point.gap.value().ln() / -std::f64::consts::LN_2, p.index.kind))
        })
        .collect();
    let ymax = pts.iter().map(|p| p.1).fold(1.0, f64::max).ceil();
    let sx = |t: f64| PAD + (t - lo) / (hi - lo) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - y / ymax * (H - 2.0 * PAD);
    let mut out = String::new();
    header(&mut out, &format!("points above I({n}, {k})"));
    axes(&mut out, &format!("angle / 2 pi in [{lo}, {hi}]"), "log2(1 / (1 - |z|))");
    for tick in 0..=(ymax as u32) {
        let y = sy(tick as f64);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end" font-size="10">{tick}</text>"#,
            PAD - 6.0,
            y + 3.0
        );
    }
    let _ = writeln!(
        out,
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="steelblue" stroke-width="4"/>"#,
        sx(lo),
        H - PAD,
        sx(hi),
        H - PAD
    );
    for (t, y, kind) in &pts {
        let (fill, r) = match kind {
            PointKind::A => ("black", 3.0),
            PointKind::B => ("none", 5.0),
        };
        let _ = writeln!(
            out,
            r#"<circle cx="{:.3}" cy="{:.3}" r="{r}" fill="{fill}" stroke="crimson"/>"#,
            sx(*t),
            sy(*y)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Line chart of `(depth, value)` on a logarithmic value axis.
pub fn trace_chart(rows: &[(u32, f64)], y_label: &str) -> String {
    let mut out = String::new();
    header(&mut out, "depth trace");
    axes(&mut out, "depth N", y_label);
    if rows.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }
    let (x0, x1) = (rows[0].0 as f64, rows[rows.len() - 1].0 as f64);
    let ly: Vec<f64> = rows.iter().map(|r| r.1.max(f64::MIN_POSITIVE).log10()).collect();
    let (y0, y1) = ly.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |b, &v| (b.0.min(v), b.1.max(v)));
    let span_x = if x1 > x0 { x1 - x0 } else { 1.0 };
    let span_y = if y1 > y0 { y1 - y0 } else { 1.0 };
    let sx = |x: f64| PAD + (x - x0) / span_x * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / span_y * (H - 2.0 * PAD);
    let path: Vec<String> = rows
        .iter()
        .zip(&ly)
        .map(|(r, &y)| format!("{:.3},{:.3}", sx(r.0 as f64), sy(y)))
        .collect();
    let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#, path.join(" "));
    for (r, &y) in rows.iter().zip(&ly) {
        let (cx, cy) = (sx(r.0 as f64), sy(y));
        let _ = writeln!(
            out,
            r#"<circle cx="{cx:.3}" cy="{cy:.3}" r="3" fill="steelblue"/>
<text x="{cx:.3}" y="{:.3}" text-anchor="middle" font-size="10">{:.4}</text>
<text x="{cx:.3}" y="{:.3}" text-anchor="middle" font-size="10">{}</text>"#,
            cy - 8.0,
            r.1,
            H - PAD + 14.0,
            r.0
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nlab_core::dyadic_model::build_nevanlinna;

    #[test]
    fn figure_lists_points_of_the_interval() {
        let f = build_nevanlinna(2, 1).unwrap();
        // I(1, 0) = [0, 1/2] holds the rays at 1/4 and 1/2
        let svg = interval_figure(&f, 1, 0);
        assert_eq!(svg.matches("<circle").count(), 2 * 2 * 2);
        assert!(svg.starts_with("<?xml") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn chart_has_one_marker_per_row() {
        let svg = trace_chart(&[(2, 1.0), (3, 2.0), (4, 4.0)], "mass");
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.contains("<polyline"));
    }
}
