//! Text, TSV and SVG renderings of aggregated runs.

use std::fmt::Write as _;

use super::{MeanSd, RunAggregate};

/// `mean^±sd`: mean with one decimal, deviation with up to two.
pub fn format_mean_sd(m: &MeanSd) -> String {
    let sd = format!("{:.2}", m.sd);
    let sd = sd.trim_end_matches('0').trim_end_matches('.');
    let sd = if sd.is_empty() { "0" } else { sd };
    format!("{:.1}^±{}", m.mean, sd)
}

fn cell(m: &Option<MeanSd>) -> String {
    m.as_ref().map_or_else(|| "-".to_owned(), format_mean_sd)
}

/// One row per model: `model<TAB>BLEU<TAB>ChrF`.
pub fn render_table(rows: &[RunAggregate]) -> String {
    let mut out = String::from("model\tBLEU\tChrF\n");
    for r in rows {
        let _ = writeln!(out, "{}\t{}\t{}", r.label, cell(&r.bleu), cell(&r.chrf));
    }
    out
}

/// Long format for plotting: `metric<TAB>model<TAB>mean<TAB>sd`.
pub fn render_plot_tsv(rows: &[RunAggregate]) -> String {
    let mut out = String::from("metric\tmodel\tmean\tsd\n");
    for (metric, get) in [
        (
            "BLEU",
            (|r: &RunAggregate| r.bleu) as fn(&RunAggregate) -> Option<MeanSd>,
        ),
        ("ChrF", |r: &RunAggregate| r.chrf),
    ] {
        for r in rows {
            if let Some(m) = get(r) {
                let _ = writeln!(out, "{metric}\t{}\t{}\t{}", r.label, m.mean, m.sd);
            }
        }
    }
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Grouped bar chart: one group per model, one bar per metric, with
/// deviation whiskers.
pub fn render_svg(rows: &[RunAggregate]) -> String {
    const BAR: f64 = 18.0;
    const GAP: f64 = 22.0;
    const HEIGHT: f64 = 240.0;
    const LEFT: f64 = 40.0;
    const TOP: f64 = 20.0;
    let colors = ["#4c72b0", "#dd8452"];
    let width = LEFT + rows.len() as f64 * (2.0 * BAR + GAP) + GAP;
    let total_h = TOP + HEIGHT + 60.0;
    let y = |v: f64| TOP + HEIGHT * (1.0 - v.clamp(0.0, 100.0) / 100.0);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{total_h:.0}" font-family="sans-serif" font-size="10">"#
    );
    for tick in (0..=100).step_by(20) {
        let ty = y(tick as f64);
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT}" y1="{ty:.1}" x2="{width:.0}" y2="{ty:.1}" stroke="#ddd"/><text x="{:.0}" y="{:.1}" text-anchor="end">{tick}</text>"##,
            LEFT - 4.0,
            ty + 3.0
        );
    }
    for (i, r) in rows.iter().enumerate() {
        let gx = LEFT + GAP + i as f64 * (2.0 * BAR + GAP);
        for (j, m) in [r.bleu, r.chrf].iter().enumerate() {
            let Some(m) = m else { continue };
            let x = gx + j as f64 * BAR;
            let top = y(m.mean);
            let cx = x + BAR / 2.0;
            let _ = writeln!(
                out,
                r#"<rect x="{x:.1}" y="{top:.1}" width="{BAR}" height="{:.1}" fill="{}"><title>{} {}</title></rect>"#,
                TOP + HEIGHT - top,
                colors[j],
                xml_escape(&r.label),
                format_mean_sd(m)
            );
            let _ = writeln!(
                out,
                r#"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="black"/>"#,
                y(m.mean + m.sd),
                y(m.mean - m.sd)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" transform="rotate(-45 {:.1} {:.1})">{}</text>"#,
            gx + BAR,
            TOP + HEIGHT + 12.0,
            gx + BAR,
            TOP + HEIGHT + 12.0,
            xml_escape(&r.label)
        );
    }
    for (j, name) in ["BLEU", "ChrF"].iter().enumerate() {
        let lx = LEFT + 10.0 + j as f64 * 60.0;
        let _ = writeln!(
            out,
            r#"<rect x="{lx:.0}" y="4" width="10" height="10" fill="{}"/><text x="{:.0}" y="13">{name}</text>"#,
            colors[j],
            lx + 14.0
        );
    }
    out.push_str("</svg>\n");
    out
}
