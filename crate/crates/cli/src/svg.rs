//! Minimal line plots: one polyline per series, a legend and axis extents.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn extent(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        return None;
    }
    // Degenerate ranges get a unit-width window so the mapping stays finite.
    Some(if hi - lo < 1e-300 { (lo - 0.5, hi + 0.5) } else { (lo, hi) })
}

/// Renders `series` against `xs`. Missing values split a line into segments.
pub fn line_plot(x_label: &str, xs: &[f64], series: &[(String, Vec<Option<f64>>)]) -> String {
    let (x0, x1) = extent(xs.iter().copied()).unwrap_or((0.0, 1.0));
    let (y0, y1) = extent(series.iter().flat_map(|(_, ys)| ys.iter().flatten().copied())).unwrap_or((0.0, 1.0));
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let below = HEIGHT - MARGIN + 16.0;
    let _ = writeln!(out, r#"<text x="{MARGIN}" y="{below}">{x0:.4}</text>"#);
    let _ = writeln!(out, r#"<text x="{}" y="{below}" text-anchor="end">{x1:.4}</text>"#, WIDTH - MARGIN);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#, WIDTH / 2.0, below + 18.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{y1:.4}</text>"#, MARGIN - 4.0, MARGIN + 4.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{y0:.4}</text>"#, MARGIN - 4.0, HEIGHT - MARGIN);

    for (k, (name, ys)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut segment: Vec<String> = Vec::new();
        let flush = |segment: &mut Vec<String>, out: &mut String| {
            if segment.len() > 1 {
                let _ = writeln!(
                    out,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    segment.join(" ")
                );
            }
            segment.clear();
        };
        for (x, y) in xs.iter().zip(ys) {
            match y.filter(|v| v.is_finite()) {
                Some(y) => segment.push(format!("{:.2},{:.2}", px(*x), py(y))),
                None => flush(&mut segment, &mut out),
            }
        }
        flush(&mut segment, &mut out);
        let ly = MARGIN + 14.0 + 16.0 * k as f64;
        let lx = WIDTH - MARGIN - 150.0;
        let _ = writeln!(out, r#"<line x1="{lx}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-width="2"/>"#, ly - 4.0, lx + 18.0, ly - 4.0);
        let _ = writeln!(out, r#"<text x="{}" y="{ly}">{name}</text>"#, lx + 24.0);
    }
    out.push_str("</svg>\n");
    out
}
