//! Minimal static SVG charts. Coordinates are printed with one decimal so the
//! output is byte-stable across runs.

use std::fmt::Write;

use crate::labels::StanceLabel;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 150.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 70.0;

pub fn color(label: StanceLabel) -> &'static str {
    match label {
        StanceLabel::AntiHamas => "#1f77b4",
        StanceLabel::AntiIsrael => "#d62728",
        StanceLabel::AntiPalestino => "#9467bd",
        StanceLabel::SinPostura => "#7f7f7f",
        StanceLabel::NoRelacionado => "#bcbd22",
        StanceLabel::ProIsrael => "#17becf",
        StanceLabel::ProPalestino => "#2ca02c",
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="28" text-anchor="middle" font-size="16">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    s
}

/// Horizontal bars, one per row: `(label, value, caption)`.
pub fn bar_chart(title: &str, rows: &[(StanceLabel, f64, String)]) -> String {
    let mut s = open(title);
    let max = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let plot_w = WIDTH - LEFT - RIGHT - 60.0;
    let band = (HEIGHT - TOP - 20.0) / rows.len().max(1) as f64;
    for (i, (label, value, caption)) in rows.iter().enumerate() {
        let y = TOP + band * i as f64;
        let w = if max > 0.0 { value / max * plot_w } else { 0.0 };
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            LEFT - 8.0,
            y + band * 0.6,
            escape(label.display_name())
        );
        let _ = writeln!(
            s,
            r#"<rect x="{LEFT:.1}" y="{:.1}" width="{w:.1}" height="{:.1}" fill="{}"/>"#,
            y + band * 0.15,
            band * 0.7,
            color(*label)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            LEFT + w + 6.0,
            y + band * 0.6,
            escape(caption)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// One polyline per series over shared x ticks.
pub fn line_chart(title: &str, ticks: &[String], series: &[(StanceLabel, Vec<u64>)]) -> String {
    let mut s = open(title);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let max = series.iter().flat_map(|(_, v)| v.iter().copied()).max().unwrap_or(0).max(1) as f64;
    let step = if ticks.len() > 1 { plot_w / (ticks.len() - 1) as f64 } else { 0.0 };
    let x_at = |i: usize| LEFT + step * i as f64;
    let y_at = |v: u64| TOP + plot_h - v as f64 / max * plot_h;

    let _ = writeln!(
        s,
        r##"<line x1="{LEFT:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#333"/>"##,
        TOP + plot_h,
        LEFT + plot_w,
        TOP + plot_h
    );
    let _ = writeln!(
        s,
        r##"<line x1="{LEFT:.1}" y1="{TOP:.1}" x2="{LEFT:.1}" y2="{:.1}" stroke="#333"/>"##,
        TOP + plot_h
    );
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, LEFT - 6.0, TOP + 4.0, max as u64);
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">0</text>"#, LEFT - 6.0, TOP + plot_h + 4.0);
    for (i, t) in ticks.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            x_at(i),
            TOP + plot_h + 18.0,
            escape(t)
        );
    }
    for (k, (label, values)) in series.iter().enumerate() {
        let points: Vec<String> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| format!("{:.1},{:.1}", x_at(i), y_at(v)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="2" points="{}"/>"#,
            color(*label),
            points.join(" ")
        );
        let ly = HEIGHT - 20.0;
        let lx = 10.0 + k as f64 * 100.0;
        let _ = writeln!(s, r#"<rect x="{lx:.1}" y="{:.1}" width="10" height="10" fill="{}"/>"#, ly - 9.0, color(*label));
        let _ = writeln!(s, r#"<text x="{:.1}" y="{ly:.1}" font-size="10">{}</text>"#, lx + 13.0, escape(label.display_name()));
    }
    s.push_str("</svg>\n");
    s
}
