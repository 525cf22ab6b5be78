//! Minimal two-panel SVG line plots of pendulum angles.

use std::f64::consts::PI;
use std::fmt::Write;

use huygens_core::dynamics::Trajectory;

use crate::figures::Panel;

const WIDTH: f64 = 900.0;
const PANEL_HEIGHT: f64 = 260.0;
const MARGIN: f64 = 50.0;
/// Polylines are reduced to at most this many min/max buckets.
const MAX_BUCKETS: usize = 2000;

struct Series<'a> {
    values: &'a [f64],
    color: &'a str,
}

/// Keeps the first, minimum and maximum sample of each bucket so that
/// oscillation envelopes survive decimation.
fn decimate(t: &[f64], v: &[f64]) -> Vec<(f64, f64)> {
    if v.len() <= 3 * MAX_BUCKETS {
        return t.iter().copied().zip(v.iter().copied()).collect();
    }
    let per = v.len().div_ceil(MAX_BUCKETS);
    let mut out = Vec::with_capacity(3 * MAX_BUCKETS);
    for start in (0..v.len()).step_by(per) {
        let end = (start + per).min(v.len());
        let (mut lo, mut hi) = (start, start);
        for k in start..end {
            if v[k] < v[lo] {
                lo = k;
            }
            if v[k] > v[hi] {
                hi = k;
            }
        }
        let (a, b) = if lo < hi { (lo, hi) } else { (hi, lo) };
        out.push((t[a], v[a]));
        if b != a {
            out.push((t[b], v[b]));
        }
    }
    out
}

fn panel(svg: &mut String, top: f64, label: &str, cycles: &[f64], series: &[Series<'_>]) {
    let (t0, t1) = (cycles[0], *cycles.last().unwrap());
    let span_t = if t1 > t0 { t1 - t0 } else { 1.0 };
    let ymax = series.iter().flat_map(|s| s.values.iter()).fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = PANEL_HEIGHT - 2.0 * MARGIN;
    let x = |t: f64| MARGIN + (t - t0) / span_t * plot_w;
    let y = |v: f64| top + MARGIN + (1.0 - (v / ymax + 1.0) / 2.0) * plot_h;

    let _ = writeln!(
        svg,
        r##"<rect x="{MARGIN}" y="{:.1}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#888"/>"##,
        top + MARGIN
    );
    let _ = writeln!(
        svg,
        r##"<line x1="{MARGIN}" y1="{0:.1}" x2="{1}" y2="{0:.1}" stroke="#ccc"/>"##,
        y(0.0),
        WIDTH - MARGIN
    );
    let _ = writeln!(svg, r#"<text x="{MARGIN}" y="{:.1}" font-size="13">{label}</text>"#, top + MARGIN - 8.0);
    let _ = writeln!(svg, r#"<text x="8" y="{:.1}" font-size="11">{ymax:.3}</text>"#, top + MARGIN + 4.0);
    let _ = writeln!(svg, r#"<text x="8" y="{:.1}" font-size="11">{:.3}</text>"#, top + MARGIN + plot_h, -ymax);
    for frac in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let t = t0 + frac * span_t;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{t:.0}</text>"#,
            x(t),
            top + MARGIN + plot_h + 16.0
        );
    }
    for s in series {
        let mut points = String::new();
        for (t, v) in decimate(cycles, s.values) {
            let _ = write!(points, "{:.2},{:.2} ", x(t), y(v));
        }
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{}" stroke-width="0.8" points="{}"/>"#,
            s.color,
            points.trim_end()
        );
    }
}

/// Panel (a) overlays θ₁ (lighter) and θ₂ (darker); panel (b) shows their
/// sum or difference. Time is in nominal cycles.
pub fn render(traj: &Trajectory, second: Panel, title: &str) -> String {
    let cycles: Vec<f64> = traj.times.iter().map(|t| t / (2.0 * PI)).collect();
    let th1 = traj.theta(0);
    let th2 = if traj.n >= 2 { traj.theta(1) } else { vec![0.0; th1.len()] };
    let (label, combined): (&str, Vec<f64>) = match second {
        Panel::Sum => ("(b) theta1 + theta2", th1.iter().zip(&th2).map(|(a, b)| a + b).collect()),
        Panel::Difference => ("(b) theta1 - theta2", th1.iter().zip(&th2).map(|(a, b)| a - b).collect()),
    };
    let height = 2.0 * PANEL_HEIGHT + 40.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{MARGIN}" y="22" font-size="15">{}</text>"#, escape(title));
    if !cycles.is_empty() {
        panel(
            &mut svg,
            30.0,
            "(a) theta1 (light), theta2 (dark)",
            &cycles,
            &[Series { values: &th1, color: "#9ecae1" }, Series { values: &th2, color: "#08519c" }],
        );
        panel(&mut svg, 30.0 + PANEL_HEIGHT, label, &cycles, &[Series { values: &combined, color: "#333" }]);
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">time (cycles)</text>"#,
            WIDTH / 2.0,
            height - 6.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
