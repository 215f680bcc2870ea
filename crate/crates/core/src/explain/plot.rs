//! Minimal SVG renderings: a horizontal bar chart of gain importance and a
//! beeswarm of SHAP values coloured by feature-value quantile.

use super::{FeatureSummary, GainImportance};
use std::fmt::Write;

const WIDTH: f64 = 760.0;
const LABEL_W: f64 = 190.0;
const ROW_H: f64 = 34.0;
const TOP: f64 = 48.0;
const BOTTOM: f64 = 48.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(out: &mut String, height: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

pub fn gain_bar_svg(gain: &GainImportance, title: &str) -> String {
    let n = gain.ranked.len() as f64;
    let height = TOP + BOTTOM + n * ROW_H;
    let plot_w = WIDTH - LABEL_W - 80.0;
    let max = gain.ranked.iter().map(|g| g.gain).fold(0.0, f64::max);
    let mut out = String::new();
    header(&mut out, height, title);
    for (i, g) in gain.ranked.iter().enumerate() {
        let y = TOP + i as f64 * ROW_H;
        let w = if max > 0.0 { g.gain / max * plot_w } else { 0.0 };
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
            LABEL_W - 8.0,
            y + ROW_H / 2.0 + 4.0,
            escape(&g.feature)
        );
        let _ = writeln!(
            out,
            r##"<rect x="{LABEL_W}" y="{:.1}" width="{w:.2}" height="{:.1}" fill="#1e88e5"/>"##,
            y + 6.0,
            ROW_H - 12.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}">{:.3}</text>"#,
            LABEL_W + w + 6.0,
            y + ROW_H / 2.0 + 4.0,
            g.gain
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{:.1}" text-anchor="middle">total gain</text>"#,
        LABEL_W + plot_w / 2.0,
        height - 16.0
    );
    out.push_str("</svg>\n");
    out
}

/// Blue for low feature values through purple to red for high ones.
fn quantile_colour(q: f64) -> String {
    let q = q.clamp(0.0, 1.0);
    let lerp = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * q).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(0x00, 0xff), lerp(0x8b, 0x00), lerp(0xfb, 0x52))
}

/// One row per feature in the given order. Points are stacked outward
/// from the row centre where they collide, so the layout is deterministic.
pub fn beeswarm_svg(summary: &[FeatureSummary], title: &str) -> String {
    let n = summary.len() as f64;
    let height = TOP + BOTTOM + n * ROW_H;
    let plot_w = WIDTH - LABEL_W - 60.0;
    let extent = summary
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.phi.abs()))
        .fold(0.0, f64::max)
        .max(1e-12);
    let x_of = |phi: f64| LABEL_W + (phi / extent + 1.0) / 2.0 * plot_w;
    let mut out = String::new();
    header(&mut out, height, title);
    let zero = x_of(0.0);
    let _ = writeln!(
        out,
        r##"<line x1="{zero:.1}" y1="{TOP}" x2="{zero:.1}" y2="{:.1}" stroke="#999"/>"##,
        height - BOTTOM
    );
    const R: f64 = 2.5;
    for (i, s) in summary.iter().enumerate() {
        let cy = TOP + i as f64 * ROW_H + ROW_H / 2.0;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
            LABEL_W - 8.0,
            cy + 4.0,
            escape(&s.feature)
        );
        let mut order: Vec<usize> = (0..s.points.len()).collect();
        order.sort_by(|&a, &b| s.points[a].phi.total_cmp(&s.points[b].phi).then(a.cmp(&b)));
        let mut stacks: std::collections::HashMap<i64, usize> = std::collections::HashMap::new();
        let max_offset = ((ROW_H / 2.0 - R) / R).floor() as usize;
        for idx in order {
            let p = &s.points[idx];
            let x = x_of(p.phi);
            let slot = stacks.entry((x / (2.0 * R)).floor() as i64).or_insert(0);
            let k = *slot % (2 * max_offset + 1);
            *slot += 1;
            let offset = if k % 2 == 0 { (k / 2) as f64 } else { -(((k + 1) / 2) as f64) };
            let _ = writeln!(
                out,
                r#"<circle cx="{x:.2}" cy="{:.2}" r="{R}" fill="{}" fill-opacity="0.8"/>"#,
                cy + offset * R,
                quantile_colour(p.quantile)
            );
        }
    }
    let axis_y = height - BOTTOM + 16.0;
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{axis_y:.1}" text-anchor="middle">{:.3}</text>"#,
        LABEL_W,
        -extent
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{axis_y:.1}" text-anchor="middle">{:.3}</text>"#,
        LABEL_W + plot_w,
        extent
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">SHAP value (impact on margin); colour: feature value low (blue) to high (red)</text>"#,
        LABEL_W + plot_w / 2.0,
        axis_y + 18.0
    );
    out.push_str("</svg>\n");
    out
}
