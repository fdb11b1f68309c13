//! Minimal deterministic SVG plots: labelled scatter, line charts and
//! heatmaps.

use std::collections::BTreeMap;
use std::fmt::Write;

const PALETTE: [&str; 10] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

const W: f64 = 640.0;
const H: f64 = 440.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

pub fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(title: &str) -> String {
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#, W / 2.0, escape(title))
        .unwrap();
    s
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let widen = |(lo, hi): (f64, f64)| if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        Self { x: widen(x), y: widen(y) }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }

    fn axes(&self, s: &mut String, x_label: &str, y_label: &str, x_ticks: Option<&[(f64, String)]>) {
        let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
        writeln!(s, r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#, x1 - x0, y1 - y0)
            .unwrap();
        for i in 0..=4 {
            let v = self.y.0 + (self.y.1 - self.y.0) * i as f64 / 4.0;
            let y = self.py(v);
            writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 4.0, y + 4.0, tick(v)).unwrap();
        }
        let ticks: Vec<(f64, String)> = match x_ticks {
            Some(t) => t.to_vec(),
            None => (0..=4)
                .map(|i| {
                    let v = self.x.0 + (self.x.1 - self.x.0) * i as f64 / 4.0;
                    (v, tick(v))
                })
                .collect(),
        };
        for (v, text) in ticks {
            writeln!(
                s,
                r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
                self.px(v),
                y1 + 15.0,
                escape(&text)
            )
            .unwrap();
        }
        writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            H - 12.0,
            escape(x_label)
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="14" y="{0}" text-anchor="middle" transform="rotate(-90 14 {0})">{1}</text>"#,
            (y0 + y1) / 2.0,
            escape(y_label)
        )
        .unwrap();
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 1000.0 || (v.fract() == 0.0 && v.abs() < 1e15) {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn legend(s: &mut String, entries: &[(String, &str)]) {
    for (i, (name, color)) in entries.iter().enumerate() {
        let y = TOP + 8.0 + 16.0 * i as f64;
        let x = W - RIGHT + 12.0;
        writeln!(s, r#"<rect x="{x}" y="{}" width="10" height="10" fill="{color}"/>"#, y - 8.0).unwrap();
        writeln!(s, r#"<text x="{}" y="{y}">{}</text>"#, x + 14.0, escape(name)).unwrap();
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn finite_or_unit(r: (f64, f64)) -> (f64, f64) {
    if r.0.is_finite() {
        r
    } else {
        (0.0, 1.0)
    }
}

/// Scatter plot coloured by label, with a legend in sorted label order.
pub fn scatter(points: &[[f64; 2]], labels: &[String], title: &str) -> String {
    let distinct: BTreeMap<&String, usize> =
        labels.iter().collect::<std::collections::BTreeSet<_>>().into_iter().enumerate().map(|(i, l)| (l, i)).collect();
    let frame = Frame::new(
        finite_or_unit(range(points.iter().map(|p| p[0]))),
        finite_or_unit(range(points.iter().map(|p| p[1]))),
    );
    let mut s = header(title);
    frame.axes(&mut s, "dim 1", "dim 2", None);
    for (p, l) in points.iter().zip(labels) {
        let color = PALETTE[distinct[l] % PALETTE.len()];
        writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}" fill-opacity="0.8"/>"#,
            frame.px(p[0]),
            frame.py(p[1])
        )
        .unwrap();
    }
    let entries: Vec<(String, &str)> =
        distinct.iter().map(|(l, &i)| ((*l).clone(), PALETTE[i % PALETTE.len()])).collect();
    legend(&mut s, &entries);
    s.push_str("</svg>\n");
    s
}

pub struct Series<'a> {
    pub name: &'a str,
    /// Missing values break the line.
    pub values: &'a [Option<f64>],
}

pub struct LineChart<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub xs: &'a [f64],
    /// Optional text for the x positions, e.g. step inputs.
    pub x_names: Option<&'a [String]>,
    pub y_range: Option<(f64, f64)>,
    pub series: &'a [Series<'a>],
}

pub fn line_chart(chart: &LineChart) -> String {
    let y = chart
        .y_range
        .unwrap_or_else(|| finite_or_unit(range(chart.series.iter().flat_map(|s| s.values.iter().flatten().copied()))));
    let frame = Frame::new(finite_or_unit(range(chart.xs.iter().copied())), y);
    let mut s = header(chart.title);
    let ticks: Option<Vec<(f64, String)>> = chart.x_names.map(|names| {
        let stride = names.len().div_ceil(20).max(1);
        chart.xs.iter().zip(names).step_by(stride).map(|(&x, n)| (x, n.clone())).collect()
    });
    frame.axes(&mut s, chart.x_label, chart.y_label, ticks.as_deref());
    let mut entries = Vec::new();
    for (i, series) in chart.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut segments: Vec<Vec<String>> = vec![Vec::new()];
        for (&x, v) in chart.xs.iter().zip(series.values) {
            match v {
                Some(v) if v.is_finite() => {
                    segments.last_mut().unwrap().push(format!("{:.2},{:.2}", frame.px(x), frame.py(*v)))
                }
                _ => segments.push(Vec::new()),
            }
        }
        for seg in segments.iter().filter(|seg| !seg.is_empty()) {
            writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, seg.join(" "))
                .unwrap();
            if seg.len() == 1 {
                let (x, y) = seg[0].split_once(',').unwrap();
                writeln!(s, r#"<circle cx="{x}" cy="{y}" r="2" fill="{color}"/>"#).unwrap();
            }
        }
        entries.push((series.name.to_string(), color));
    }
    legend(&mut s, &entries);
    s.push_str("</svg>\n");
    s
}

/// Heatmap with one row per matrix row, white at zero and dark blue at the
/// maximum.
pub fn heatmap(matrix: &[Vec<f64>], title: &str, row_label: &str, col_label: &str) -> String {
    let rows = matrix.len();
    let cols = matrix.first().map_or(0, Vec::len);
    let max = matrix.iter().flatten().copied().filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(v.abs()));
    let mut s = header(&format!("{title} (max {max:.3})"));
    let (x0, y0) = (LEFT, TOP);
    let cw = (W - LEFT - RIGHT) / cols.max(1) as f64;
    let ch = (H - TOP - BOTTOM) / rows.max(1) as f64;
    for (i, row) in matrix.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let a = if max > 0.0 { (v.abs() / max).clamp(0.0, 1.0) } else { 0.0 };
            let shade = |c: f64| (255.0 - a * (255.0 - c)).round() as u8;
            writeln!(
                s,
                r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#{:02x}{:02x}{:02x}"/>"##,
                x0 + j as f64 * cw,
                y0 + i as f64 * ch,
                cw,
                ch,
                shade(8.0),
                shade(48.0),
                shade(107.0)
            )
            .unwrap();
        }
        if rows <= 40 {
            writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{i}</text>"#, x0 - 4.0, y0 + (i as f64 + 0.7) * ch)
                .unwrap();
        }
    }
    writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        x0 + cw * cols as f64 / 2.0,
        H - 12.0,
        escape(col_label)
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="14" y="{0}" text-anchor="middle" transform="rotate(-90 14 {0})">{1}</text>"#,
        (H - BOTTOM + TOP) / 2.0,
        escape(row_label)
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}
