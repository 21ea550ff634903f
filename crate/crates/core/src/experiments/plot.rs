//! Minimal SVG rendering: line charts, heatmaps and scatter grids.

use std::fmt::Write;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: (f64, f64, f64, f64) = (60.0, 150.0, 40.0, 50.0); // left, right, top, bottom

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open(s: &mut String, w: f64, h: f64, title: &str) {
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        w / 2.0,
        escape(title)
    );
}

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Line chart; `y_range` fixes the vertical axis (e.g. `(0, 1)` for AUROC).
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], y_range: Option<(f64, f64)>) -> String {
    let (l, r, t, b) = MARGIN;
    let (x0, x1) = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = y_range.unwrap_or_else(|| bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1))));
    let px = |x: f64| l + (x - x0) / (x1 - x0) * (W - l - r);
    let py = |y: f64| H - b - (y - y0) / (y1 - y0) * (H - t - b);

    let mut s = String::new();
    open(&mut s, W, H, title);
    let _ = writeln!(
        s,
        r#"<rect x="{l}" y="{t}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        W - l - r,
        H - t - b
    );
    for k in 0..=4 {
        let y = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{y:.2}</text>"#,
            l - 4.0,
            py(y) + 4.0
        );
        let x = x0 + (x1 - x0) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x:.1}</text>"#,
            px(x),
            H - b + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        l + (W - l - r) / 2.0,
        H - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .filter(|p| p.1.is_finite())
            .map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y.clamp(y0, y1))))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        for p in &pts {
            let (cx, cy) = p.split_once(',').unwrap();
            let _ = writeln!(s, r#"<circle cx="{cx}" cy="{cy}" r="2.5" fill="{color}"/>"#);
        }
        let ly = t + 14.0 + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            W - r + 10.0,
            W - r + 28.0,
            W - r + 32.0,
            ly + 4.0,
            escape(&ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Diverging blue-white-red colour for `v` in `[lo, hi]`.
fn heat(v: f64, lo: f64, hi: f64) -> String {
    if !v.is_finite() {
        return "#999999".into();
    }
    let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0) * 2.0 - 1.0;
    let (r, g, b) = if t < 0.0 {
        let a = 1.0 + t;
        (a, a, 1.0)
    } else {
        (1.0, 1.0 - t, 1.0 - t)
    };
    format!("#{:02x}{:02x}{:02x}", (r * 255.0) as u8, (g * 255.0) as u8, (b * 255.0) as u8)
}

pub fn heatmap(title: &str, rows: &[String], cols: &[String], values: &[Vec<f64>], range: (f64, f64)) -> String {
    let cell = (36.0f64).min(480.0 / cols.len().max(rows.len()).max(1) as f64);
    let (l, t) = (90.0, 50.0);
    let w = l + cell * cols.len() as f64 + 40.0;
    let h = t + cell * rows.len() as f64 + 50.0;
    let mut s = String::new();
    open(&mut s, w.max(240.0), h, title);
    for (i, row) in values.iter().enumerate() {
        let y = t + cell * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            l - 4.0,
            y + cell / 2.0 + 4.0,
            escape(&rows[i])
        );
        for (j, &v) in row.iter().enumerate() {
            let x = l + cell * j as f64;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.1}" y="{y:.1}" width="{cell:.1}" height="{cell:.1}" fill="{}"><title>{v:.4}</title></rect>"#,
                heat(v, range.0, range.1)
            );
            if cell >= 28.0 {
                let _ = writeln!(
                    s,
                    r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="9">{v:.2}</text>"#,
                    x + cell / 2.0,
                    y + cell / 2.0 + 3.0
                );
            }
        }
    }
    for (j, c) in cols.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            l + cell * j as f64 + cell / 2.0,
            t + cell * rows.len() as f64 + 14.0,
            escape(c)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[derive(Debug, Clone)]
pub struct ScatterPanel {
    pub title: String,
    /// `(x, y, label)`
    pub points: Vec<(f64, f64, bool)>,
}

/// Grid of scatter plots, true points in blue and false points in red.
pub fn scatter_grid(title: &str, panels: &[ScatterPanel]) -> String {
    let cols = panels.len().clamp(1, 3);
    let rows = panels.len().div_ceil(cols).max(1);
    let (pw, ph) = (260.0, 240.0);
    let w = pw * cols as f64;
    let h = 30.0 + ph * rows as f64;
    let mut s = String::new();
    open(&mut s, w, h, title);
    for (k, panel) in panels.iter().enumerate() {
        let ox = pw * (k % cols) as f64;
        let oy = 30.0 + ph * (k / cols) as f64;
        let (x0, x1) = bounds(panel.points.iter().map(|p| p.0));
        let (y0, y1) = bounds(panel.points.iter().map(|p| p.1));
        let (pl, pt, iw, ih) = (ox + 20.0, oy + 24.0, pw - 40.0, ph - 44.0);
        let _ = writeln!(
            s,
            r#"<rect x="{pl:.1}" y="{pt:.1}" width="{iw:.1}" height="{ih:.1}" fill="none" stroke="gray"/><text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            ox + pw / 2.0,
            oy + 16.0,
            escape(&panel.title)
        );
        for &(x, y, label) in &panel.points {
            let cx = pl + (x - x0) / (x1 - x0) * iw;
            let cy = pt + ih - (y - y0) / (y1 - y0) * ih;
            let color = if label { PALETTE[0] } else { PALETTE[1] };
            let _ = writeln!(s, r#"<circle cx="{cx:.1}" cy="{cy:.1}" r="1.8" fill="{color}" fill-opacity="0.6"/>"#);
        }
    }
    s.push_str("</svg>\n");
    s
}
