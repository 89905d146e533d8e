//! Minimal self-contained SVG plots: polylines and a success heat map.

use std::fmt::Write;

use super::PhaseGrid;

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>
<text x="{}" y="{}" text-anchor="middle">{}</text>
<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>
"#,
        W / 2.0,
        escape(title),
        W / 2.0,
        H - 12.0,
        escape(xlabel),
        H / 2.0,
        H / 2.0,
        escape(ylabel),
    );
}

/// Line plot; with `log_y` the y axis shows `log10` of positive values.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series], log_y: bool) -> String {
    let tf = |y: f64| if log_y { y.log10() } else { y };
    let pts = || {
        series
            .iter()
            .flat_map(|s| s.points.iter())
            .filter(|p| p.0.is_finite() && tf(p.1).is_finite())
    };
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts() {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(tf(y));
        y1 = y1.max(tf(y));
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (tf(y) - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

    let mut out = String::new();
    header(&mut out, title, xlabel, if log_y { format!("log10 {ylabel}") } else { ylabel.to_string() }.as_str());
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    for (v, x, y, anchor) in [
        (x0, MARGIN, H - MARGIN + 16.0, "start"),
        (x1, W - MARGIN, H - MARGIN + 16.0, "end"),
        (y0, MARGIN - 4.0, H - MARGIN, "end"),
        (y1, MARGIN - 4.0, MARGIN + 4.0, "end"),
    ] {
        let _ = writeln!(out, r#"<text x="{x}" y="{y}" text-anchor="{anchor}">{v:.4}</text>"#);
    }
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let coords: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && tf(p.1).is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            coords.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            W - MARGIN + 4.0,
            MARGIN + 14.0 * (k as f64 + 1.0),
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Success-fraction heat map: rows are sparsity levels, columns measurement
/// counts; red is certain success, blue certain failure, grey skipped.
pub fn phase_heatmap(grid: &PhaseGrid, title: &str) -> String {
    let rows = grid.spec.s_grid.len();
    let cols = grid.spec.m_grid.len();
    let cw = (W - 2.0 * MARGIN) / cols as f64;
    let ch = (H - 2.0 * MARGIN) / rows as f64;
    let mut out = String::new();
    header(&mut out, title, "m", "s");
    for (i, row) in grid.rows().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            let fill = match cell.success_fraction() {
                Some(f) => {
                    let r = (255.0 * f).round() as u8;
                    let b = (255.0 * (1.0 - f)).round() as u8;
                    format!("#{r:02x}00{b:02x}")
                }
                None => "#bbbbbb".to_string(),
            };
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                MARGIN + j as f64 * cw,
                H - MARGIN - (i as f64 + 1.0) * ch,
                cw,
                ch
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="{}">{}</text><text x="{}" y="{}" text-anchor="end">{}</text>"#,
        H - MARGIN + 16.0,
        grid.spec.m_grid[0],
        W - MARGIN,
        H - MARGIN + 16.0,
        grid.spec.m_grid[cols - 1]
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_plot_is_wellformed() {
        let s = Series { name: "a<b".into(), points: vec![(0.0, 1.0), (1.0, 0.1), (2.0, 0.0)] };
        let svg = line_plot("t", "x", "y", &[s], true);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a&lt;b"));
        assert_eq!(svg.matches("<polyline").count(), 1);
    }

    #[test]
    fn empty_plot_does_not_panic() {
        assert!(line_plot("t", "x", "y", &[], false).contains("</svg>"));
    }
}
