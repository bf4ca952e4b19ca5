//! Self-contained SVG charts.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 480.0;
const PAD: f64 = 60.0;

/// Least-squares `y = a + b x`; `None` with fewer than two distinct x values.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return None;
    }
    let mx = xs[..n].iter().sum::<f64>() / n as f64;
    let my = ys[..n].iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs[..n].iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = xs[..n].iter().zip(&ys[..n]).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    Some((my - b * mx, b))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    if hi - lo < 1e-9 {
        return (lo - 1.0, hi + 1.0);
    }
    let m = (hi - lo) * 0.05;
    (lo - m, hi + m)
}

/// Scatter of `(x, y)` points with a least-squares trend line and the
/// `y = x` diagonal.
pub fn scatter_svg(points: &[(f64, f64)], title: &str, x_label: &str, y_label: &str) -> String {
    let (x0, x1) = bounds(points.iter().map(|p| p.0));
    let (y0, y1) = bounds(points.iter().map(|p| p.1));
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="30" text-anchor="middle" font-size="16">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#,
        W / 2.0,
        H - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 15 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    for (v, x, y, anchor) in [
        (x0, sx(x0), H - PAD + 15.0, "start"),
        (x1, sx(x1), H - PAD + 15.0, "end"),
    ] {
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}" font-size="10">{v:.1}</text>"#);
    }
    for (v, y) in [(y0, sy(y0)), (y1, sy(y1) + 10.0)] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{y:.2}" text-anchor="end" font-size="10">{v:.1}</text>"#,
            PAD - 4.0
        );
    }

    // y = x within the shared range
    let lo = x0.max(y0);
    let hi = x1.min(y1);
    if lo < hi {
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#999" stroke-dasharray="4 4"/>"##,
            sx(lo),
            sy(lo),
            sx(hi),
            sy(hi)
        );
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    if let Some((a, b)) = linear_fit(&xs, &ys) {
        let (ya, yb) = (a + b * x0, a + b * x1);
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#d62728" stroke-width="1.5"/>"##,
            sx(x0),
            sy(ya.clamp(y0, y1)).clamp(PAD, H - PAD),
            sx(x1),
            sy(yb.clamp(y0, y1)).clamp(PAD, H - PAD)
        );
    }
    for &(x, y) in points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#1f77b4" fill-opacity="0.7"/>"##,
            sx(x),
            sy(y)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Line chart of one series against its index.
pub fn line_svg(values: &[f64], title: &str) -> String {
    let (y0, y1) = bounds(values.iter().copied());
    let n = values.len().max(2) as f64 - 1.0;
    let sx = |i: usize| PAD + i as f64 / n * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let pts: Vec<String> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| format!("{:.2},{:.2}", sx(i), sy(v)))
        .collect();
    format!(
        concat!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
            "\n",
            r#"<rect width="{w}" height="{h}" fill="white"/>"#,
            "\n",
            r#"<text x="{tx}" y="30" text-anchor="middle" font-size="16">{title}</text>"#,
            "\n",
            r##"<polyline fill="none" stroke="#1f77b4" stroke-width="1.5" points="{pts}"/>"##,
            "\n",
            r#"<text x="{lx}" y="{ly0:.2}" text-anchor="end" font-size="10">{y0:.1}</text>"#,
            "\n",
            r#"<text x="{lx}" y="{ly1:.2}" text-anchor="end" font-size="10">{y1:.1}</text>"#,
            "\n</svg>\n"
        ),
        w = W,
        h = H,
        tx = W / 2.0,
        title = escape(title),
        pts = pts.join(" "),
        lx = PAD - 4.0,
        ly0 = sy(y0),
        ly1 = sy(y1) + 10.0,
        y0 = y0,
        y1 = y1,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_a_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let (a, b) = linear_fit(&xs, &ys).unwrap();
        assert!((a - 2.0).abs() < 1e-12 && (b + 0.5).abs() < 1e-12);
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 2.0]).is_none());
        assert!(linear_fit(&[1.0], &[0.0]).is_none());
    }

    #[test]
    fn svg_is_well_formed() {
        let s = scatter_svg(&[(1.0, 2.0), (3.0, -1.0), (0.5, 0.5)], "a < b & c", "x", "y");
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<circle").count(), 3);
        assert!(s.contains("a &lt; b &amp; c"));
        let empty = scatter_svg(&[], "t", "x", "y");
        assert!(empty.contains("</svg>"));
        let l = line_svg(&[1.0, 2.0, 1.5], "eq");
        assert!(l.contains("<polyline") && l.trim_end().ends_with("</svg>"));
    }
}
