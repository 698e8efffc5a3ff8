//! Plot data: two-column `.dat` files and small self-contained SVG line
//! plots.

use std::fmt::Write as _;

/// `# x y` header followed by one whitespace-separated pair per line.
pub fn two_column(x_label: &str, y_label: &str, xs: &[f64], ys: &[f64]) -> String {
    let mut out = format!("# {x_label} {y_label}\n");
    for (x, y) in xs.iter().zip(ys) {
        let _ = writeln!(out, "{x} {y:.17e}");
    }
    out
}

/// Line plot with markers; the x axis is logarithmic when `log_x`.
pub fn svg_line_plot(title: &str, x_label: &str, y_label: &str, xs: &[f64], ys: &[f64], log_x: bool) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const M: f64 = 60.0;
    let tx: Vec<f64> = xs.iter().map(|&x| if log_x { x.log2() } else { x }).collect();
    let range = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() || !hi.is_finite() {
            (0.0, 1.0)
        } else if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        }
    };
    let (x0, x1) = range(&tx);
    let (y0, y1) = range(ys);
    let px = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let py = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<path d="M{M} {M} V{b} H{r}" stroke="black" fill="none"/>"#,
        b = H - M,
        r = W - M
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 15.0,
        escape(&if log_x { format!("log2 {x_label}") } else { x_label.to_string() })
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    for (v, label_x, anchor) in [(x0, px(x0), "start"), (x1, px(x1), "end")] {
        let _ = writeln!(s, r#"<text x="{label_x}" y="{}" font-family="sans-serif" font-size="11" text-anchor="{anchor}">{v:.3}</text>"#, H - M + 16.0);
    }
    for v in [y0, y1] {
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{v:.4}</text>"#, M - 4.0, py(v) + 4.0);
    }
    let points: Vec<String> = tx.iter().zip(ys).map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
    let _ = writeln!(s, r#"<polyline points="{}" stroke="steelblue" stroke-width="2" fill="none"/>"#, points.join(" "));
    for (&x, &y) in tx.iter().zip(ys) {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#, px(x), py(y));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn data_file_layout() {
        let d = two_column("lambda", "S", &[2.0, 4.0], &[1.0, 1.5]);
        assert_eq!(d.lines().count(), 3);
        assert!(d.starts_with("# lambda S\n2 "));
    }

    #[test]
    fn svg_is_well_formed_for_degenerate_data() {
        let s = svg_line_plot("t<1>", "x", "y", &[4.0], &[0.0], true);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(s.contains("t&lt;1&gt;"));
        assert!(!s.contains("NaN"));
    }
}
