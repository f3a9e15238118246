//! SVG heatmaps of aggregated archives.
//!
//! Columns are tour-length bins (shortest on the left), rows are profit bins
//! (largest on top), so the cell nearest both reference optima sits in the
//! top-left corner. Only grid cells are drawn as `<rect>` elements.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::harness::AggregateMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeatmapMode {
    /// Mean z of the occupants across runs.
    Quality,
    /// Share of runs with an occupant.
    Frequency,
}

const CELL: f64 = 24.0;
const LEFT: f64 = 110.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 70.0;
const RIGHT: f64 = 30.0;
pub const EMPTY_FILL: &str = "#e0e0e0";

// light yellow -> orange -> dark red
const STOPS: [(f64, [f64; 3]); 3] = [
    (0.0, [255.0, 237.0, 160.0]),
    (0.5, [253.0, 141.0, 60.0]),
    (1.0, [128.0, 0.0, 38.0]),
];

/// Warm colormap for `t` in `[0, 1]`, as `#rrggbb`.
pub fn warm_color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let k = if t <= STOPS[1].0 { 0 } else { 1 };
    let (t0, c0) = STOPS[k];
    let (t1, c1) = STOPS[k + 1];
    let u = (t - t0) / (t1 - t0);
    let ch = |a: f64, b: f64| (a + (b - a) * u).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        ch(c0[0], c1[0]),
        ch(c0[1], c1[1]),
        ch(c0[2], c1[2])
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn num(x: f64) -> String {
    let s = format!("{x:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Normalization used for one figure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
struct Scale {
    mode: HeatmapMode,
    colormap: &'static str,
    min: Option<f64>,
    max: Option<f64>,
    runs: usize,
}

pub fn render_heatmap(agg: &AggregateMap, mode: HeatmapMode, title: &str) -> String {
    let spec = &agg.spec;
    let (d1, d2) = (spec.delta1, spec.delta2);
    let width = LEFT + d1 as f64 * CELL + RIGHT;
    let height = TOP + d2 as f64 * CELL + BOTTOM;

    let occupied_means: Vec<f64> = agg.cells().filter_map(|(_, c)| c.mean_z).collect();
    let (min, max) = if occupied_means.is_empty() {
        (None, None)
    } else {
        let lo = occupied_means.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = occupied_means
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        (Some(lo), Some(hi))
    };
    let scale = match mode {
        HeatmapMode::Quality => Scale {
            mode,
            colormap: "min-max normalized mean z, yellow (min) to dark red (max)",
            min,
            max,
            runs: agg.runs,
        },
        HeatmapMode::Frequency => Scale {
            mode,
            colormap: "occupancy / runs, yellow (low) to dark red (all runs)",
            min: Some(0.0),
            max: Some(agg.runs as f64),
            runs: agg.runs,
        },
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#,
        w = num(width),
        h = num(height)
    );
    let _ = writeln!(svg, "<title>{}</title>", escape(title));
    let _ = writeln!(
        svg,
        "<desc>{}</desc>",
        escape(&serde_json::to_string(&scale).expect("scale serializes"))
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        num(LEFT + d1 as f64 * CELL / 2.0),
        escape(title)
    );

    let _ = writeln!(
        svg,
        r##"<g class="cells" stroke="#ffffff" stroke-width="1">"##
    );
    for i in 1..=d1 {
        for j in 1..=d2 {
            let cell = agg.cell(i, j);
            let fill = match mode {
                HeatmapMode::Quality => match (cell.mean_z, min, max) {
                    (Some(z), Some(lo), Some(hi)) => {
                        let t = if hi > lo { (z - lo) / (hi - lo) } else { 1.0 };
                        warm_color(t)
                    }
                    _ => EMPTY_FILL.to_string(),
                },
                HeatmapMode::Frequency if cell.occupancy == 0 => EMPTY_FILL.to_string(),
                HeatmapMode::Frequency => warm_color(cell.occupancy as f64 / agg.runs as f64),
            };
            let x = LEFT + (i - 1) as f64 * CELL;
            let y = TOP + (d2 - j) as f64 * CELL;
            let tip = match cell.mean_z {
                Some(z) => format!(
                    "({i}, {j}) mean z {} in {}/{} runs",
                    num(z),
                    cell.occupancy,
                    agg.runs
                ),
                None => format!("({i}, {j}) empty"),
            };
            let _ = writeln!(
                svg,
                r#"<rect class="cell" data-i="{i}" data-j="{j}" x="{}" y="{}" width="{CELL}" height="{CELL}" fill="{fill}"><title>{tip}</title></rect>"#,
                num(x),
                num(y)
            );
        }
    }
    let _ = writeln!(svg, "</g>");

    // axis ticks at the grid corners and middle
    let grid_bottom = TOP + d2 as f64 * CELL;
    let _ = writeln!(svg, r##"<g class="axes" fill="#333333">"##);
    for &i in &[0, d1 / 2, d1] {
        let f = spec.f_star + (spec.f_max - spec.f_star) * i as f64 / d1 as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            num(LEFT + i as f64 * CELL),
            num(grid_bottom + 16.0),
            num(f)
        );
    }
    for &j in &[0, d2 / 2, d2] {
        let g = spec.g_min + (spec.g_star - spec.g_min) * j as f64 / d2 as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            num(LEFT - 6.0),
            num(TOP + (d2 - j) as f64 * CELL + 4.0),
            num(g)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">tour length f [{} .. {}]</text>"#,
        num(LEFT + d1 as f64 * CELL / 2.0),
        num(grid_bottom + 40.0),
        num(spec.f_star),
        num(spec.f_max)
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{y}" text-anchor="middle" transform="rotate(-90 20 {y})">packing profit g [{} .. {}]</text>"#,
        num(spec.g_min),
        num(spec.g_star),
        y = num(TOP + d2 as f64 * CELL / 2.0)
    );
    let legend = match (mode, min, max) {
        (HeatmapMode::Quality, Some(lo), Some(hi)) => {
            format!("mean z from {} to {}", num(lo), num(hi))
        }
        (HeatmapMode::Quality, _, _) => "no occupied cells".to_string(),
        (HeatmapMode::Frequency, _, _) => format!("share of {} runs", agg.runs),
    };
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        num(LEFT + d1 as f64 * CELL / 2.0),
        num(grid_bottom + 58.0),
        escape(&legend)
    );
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");
    svg
}
