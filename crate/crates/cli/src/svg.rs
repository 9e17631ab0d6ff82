//! Minimal native SVG emission: log-log error lines and histogram bars
//! with a density overlay. Text output only, deterministic.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 6] = ["#c0392b", "#2980b9", "#27ae60", "#8e44ad", "#d35400", "#16a085"];

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" font-family=\"monospace\" font-size=\"14\" text-anchor=\"middle\">{title}</text>\n",
        WIDTH / 2.0
    )
}

fn axis_box() -> String {
    format!(
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>\n",
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    )
}

/// Log-log line chart: one polyline per labeled series of (x, y) pairs.
/// Non-finite or non-positive points are skipped.
pub fn loglog_lines(title: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|(_, p)| p.iter().copied())
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .collect();
    let mut svg = header(title);
    svg.push_str(&axis_box());
    if pts.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for (x, y) in &pts {
        x0 = x0.min(x.log10());
        x1 = x1.max(x.log10());
        y0 = y0.min(y.log10());
        y1 = y1.max(y.log10());
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| MARGIN + (x.log10() - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y.log10() - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    // decade ticks
    for d in (x0.floor() as i64)..=(x1.ceil() as i64) {
        let x = sx(10f64.powi(d as i32));
        if (MARGIN..=WIDTH - MARGIN).contains(&x) {
            let _ = writeln!(
                svg,
                "<line x1=\"{x:.1}\" y1=\"{}\" x2=\"{x:.1}\" y2=\"{}\" stroke=\"#ccc\"/>\
                 <text x=\"{x:.1}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"middle\">1e{d}</text>",
                MARGIN,
                HEIGHT - MARGIN,
                HEIGHT - MARGIN + 16.0
            );
        }
    }
    for d in (y0.floor() as i64)..=(y1.ceil() as i64) {
        let y = sy(10f64.powi(d as i32));
        if (MARGIN..=HEIGHT - MARGIN).contains(&y) {
            let _ = writeln!(
                svg,
                "<line x1=\"{}\" y1=\"{y:.1}\" x2=\"{}\" y2=\"{y:.1}\" stroke=\"#ccc\"/>\
                 <text x=\"{}\" y=\"{y:.1}\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"end\">1e{d}</text>",
                MARGIN,
                WIDTH - MARGIN,
                MARGIN - 6.0
            );
        }
    }

    for (si, (label, points)) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let path: Vec<String> = points
            .iter()
            .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
            .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
            .collect();
        if path.len() >= 2 {
            let _ = writeln!(
                svg,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>",
                path.join(" ")
            );
        }
        for p in &path {
            let mut it = p.split(',');
            let (cx, cy) = (it.next().unwrap(), it.next().unwrap());
            let _ = writeln!(svg, "<circle cx=\"{cx}\" cy=\"{cy}\" r=\"3\" fill=\"{color}\"/>");
        }
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"12\" fill=\"{color}\">{label}</text>",
            MARGIN + 10.0,
            MARGIN + 18.0 + 16.0 * si as f64
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Histogram bars (sample masses) with the exact per-bin masses drawn as a
/// step overlay.
pub fn histogram_overlay(
    title: &str,
    edges: &[f64],
    sample_masses: &[f64],
    exact_masses: &[f64],
) -> String {
    let mut svg = header(title);
    svg.push_str(&axis_box());
    let n = sample_masses.len();
    if n == 0 || edges.len() != n + 1 {
        svg.push_str("</svg>\n");
        return svg;
    }
    let max_mass = sample_masses
        .iter()
        .chain(exact_masses.iter())
        .fold(0.0f64, |m, &v| m.max(v))
        .max(1e-12);
    let (e0, e1) = (edges[0], edges[n]);
    let sx = |x: f64| MARGIN + (x - e0) / (e1 - e0) * (WIDTH - 2.0 * MARGIN);
    let sy = |m: f64| HEIGHT - MARGIN - (m / max_mass) * (HEIGHT - 2.0 * MARGIN);
    for i in 0..n {
        let x = sx(edges[i]);
        let w = sx(edges[i + 1]) - x;
        let y = sy(sample_masses[i]);
        let _ = writeln!(
            svg,
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{:.2}\" fill=\"#2980b9\" fill-opacity=\"0.55\"/>",
            HEIGHT - MARGIN - y
        );
    }
    let mut path = String::new();
    for i in 0..n {
        let y = sy(exact_masses[i]);
        let _ = write!(
            path,
            "{}{:.2},{y:.2} {:.2},{y:.2} ",
            if i == 0 { "" } else { "" },
            sx(edges[i]),
            sx(edges[i + 1])
        );
    }
    let _ = writeln!(
        svg,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#c0392b\" stroke-width=\"2\"/>",
        path.trim_end()
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"12\" fill=\"#2980b9\">samples</text>\
         <text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"12\" fill=\"#c0392b\">exact</text>",
        MARGIN + 10.0,
        MARGIN + 18.0,
        MARGIN + 10.0,
        MARGIN + 34.0
    );
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loglog_emits_polylines_and_is_deterministic() {
        let series = vec![
            ("corv".to_string(), vec![(1e-3, 1e-3), (1e-2, 1e-2), (1e-1, 9e-2)]),
            ("mirror".to_string(), vec![(1e-3, 5e-2), (1e-2, 6e-2), (1e-1, 8e-2)]),
        ];
        let a = loglog_lines("errors", &series);
        let b = loglog_lines("errors", &series);
        assert_eq!(a, b);
        assert!(a.contains("<polyline"));
        assert!(a.starts_with("<svg"));
        assert!(a.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn histogram_emits_bars() {
        let edges = vec![0.0, 0.5, 1.0];
        let svg = histogram_overlay("h", &edges, &[0.4, 0.6], &[0.5, 0.5]);
        assert_eq!(svg.matches("<rect").count(), 4); // background + axis box + 2 bars
        assert!(svg.contains("polyline"));
    }
}
