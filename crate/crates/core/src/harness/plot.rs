use std::fmt::Write as _;

use crate::stats::ExponentFit;

const W: f64 = 560.0;
const H: f64 = 400.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// One data series of a log-log plot, with an optional fitted line.
#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub fit: Option<ExponentFit>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Log-log SVG of positive data; the fit's slope is printed in the legend.
pub fn loglog_svg(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.x.iter().zip(&s.y).map(|(&x, &y)| (x, y)))
        .filter(|&(x, y)| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.log10(), y.log10()))
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = (0.0, 1.0, 0.0, 1.0);
    if !pts.is_empty() {
        x0 = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min).floor();
        x1 = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max).ceil();
        y0 = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).floor();
        y1 = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max).ceil();
        if x1 <= x0 {
            x1 = x0 + 1.0;
        }
        if y1 <= y0 {
            y1 = y0 + 1.0;
        }
    }
    let sx = |lx: f64| MARGIN + (lx - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let sy = |ly: f64| H - MARGIN - (ly - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    for k in (x0 as i64)..=(x1 as i64) {
        let px = sx(k as f64);
        let _ = writeln!(s, r##"<line x1="{px:.2}" y1="{MARGIN}" x2="{px:.2}" y2="{:.2}" stroke="#ddd"/>"##, H - MARGIN);
        let _ = writeln!(s, r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle" font-size="11">1e{k}</text>"#, H - MARGIN + 16.0);
    }
    for k in (y0 as i64)..=(y1 as i64) {
        let py = sy(k as f64);
        let _ = writeln!(s, r##"<line x1="{MARGIN}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#ddd"/>"##, W - MARGIN);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="11">1e{k}</text>"#, MARGIN - 6.0, py + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#, W / 2.0, H - 18.0, escape(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        for (&x, &y) in ser.x.iter().zip(&ser.y) {
            if x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite() {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x.log10()), sy(y.log10()));
            }
        }
        let mut legend = escape(&ser.label);
        if let Some(fit) = ser.fit {
            let (a, b) = (fit.window.0.log10(), fit.window.1.log10());
            let ln10 = std::f64::consts::LN_10;
            let line = |lx: f64| (fit.intercept / ln10) + fit.estimate * lx;
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-dasharray="5,3"/>"#,
                sx(a),
                sy(line(a)),
                sx(b),
                sy(line(b))
            );
            let _ = write!(legend, " (slope {:.4} ± {:.1e})", fit.estimate, fit.stderr);
        }
        let ly = MARGIN + 16.0 + 16.0 * i as f64;
        let _ = writeln!(s, r#"<text x="{:.2}" y="{ly:.2}" font-size="12" fill="{color}">{legend}</text>"#, MARGIN + 8.0);
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::loglog_fit;

    #[test]
    fn svg_has_points_and_slope() {
        let x: Vec<f64> = (1..6).map(|k| 10f64.powi(-k)).collect();
        let y: Vec<f64> = x.iter().map(|t| t.powf(0.25)).collect();
        let fit = loglog_fit(&x, &y).unwrap();
        let svg = loglog_svg("d_h", "h", "d", &[Series { label: "d_h".into(), x, y, fit: Some(fit) }]);
        assert_eq!(svg.matches("<circle").count(), 5);
        assert!(svg.contains("slope 0.2500"), "{svg}");
        assert!(svg.ends_with("</svg>\n"));
    }
}
