//! Static SVG plots of a single scenario.
//!
//! The target agent is blue, other scored agents green and context agents
//! red. Observed steps are drawn solid, future steps dotted, and the lane
//! graph underneath is colored by point type.

use std::fmt::Write as _;

use crate::mapgraph::{etype, mtype, LaneGraph};
use crate::record::Scenario;

pub const TA_COLOR: &str = "#1f5fd6";
pub const SCORED_COLOR: &str = "#1e9e3a";
pub const CONTEXT_COLOR: &str = "#d62728";

/// Map extent kept around the agents, meters.
const MAP_MARGIN: f64 = 25.0;
const PX_PER_M: f64 = 6.0;
const PAD_PX: f64 = 20.0;

fn mtype_color(t: u8) -> &'static str {
    match t {
        mtype::LINE_THIN_DASHED | mtype::LINE_THICK_DASHED => "#9a9a9a",
        mtype::LINE_THIN_SOLID | mtype::LINE_THICK_SOLID | mtype::DOUBLE_LINE => "#555555",
        mtype::CURBSTONE | mtype::ROAD_BORDER | mtype::GUARD_RAIL | mtype::BARRIER => "#222222",
        mtype::VIRTUAL => "#c8c8ff",
        mtype::STOP_LINE => "#aa3300",
        mtype::PEDESTRIAN_MARKING | mtype::ZEBRA_MARKING => "#c9a400",
        mtype::BIKE_MARKING => "#7a4fb0",
        _ => "#bbbbbb",
    }
}

/// Role of each agent row: 0 for the TA, 1 for scored targets, 2 otherwise.
fn roles(s: &Scenario) -> Vec<u8> {
    (0..s.num_agents())
        .map(|a| {
            if a == s.ta_index {
                0
            } else if s.ma_row(a).iter().any(|&m| m) {
                1
            } else {
                2
            }
        })
        .collect()
}

struct View {
    min: [f64; 2],
    max: [f64; 2],
}

impl View {
    fn px(&self, p: [f64; 2]) -> (f64, f64) {
        (
            PAD_PX + (p[0] - self.min[0]) * PX_PER_M,
            PAD_PX + (self.max[1] - p[1]) * PX_PER_M,
        )
    }

    fn contains(&self, p: [f64; 2]) -> bool {
        (self.min[0]..=self.max[0]).contains(&p[0]) && (self.min[1]..=self.max[1]).contains(&p[1])
    }
}

fn path_data(view: &View, pts: &[[f64; 2]]) -> String {
    let mut d = String::new();
    for (i, p) in pts.iter().enumerate() {
        let (x, y) = view.px(*p);
        write!(d, "{}{x:.1},{y:.1}", if i == 0 { "M" } else { " L" }).unwrap();
    }
    d
}

/// Render `s` (and the lane graph it refers to, if given) as an SVG
/// document.
pub fn render_scenario(s: &Scenario, map: Option<&LaneGraph>) -> String {
    let a_n = s.num_agents();
    let mut past: Vec<Vec<[f64; 2]>> = vec![Vec::new(); a_n];
    let mut future: Vec<Vec<[f64; 2]>> = vec![Vec::new(); a_n];
    for a in 0..a_n {
        for k in 0..s.obs_len {
            let i = s.inp_idx(a, k);
            if s.input_mask[i] {
                past[a].push([s.inp_pos[i][0] as f64, s.inp_pos[i][1] as f64]);
            }
        }
        for k in 0..s.pred_len {
            let i = s.trg_idx(a, k);
            if s.valid_mask[i] {
                future[a].push([s.trg_pos[i][0] as f64, s.trg_pos[i][1] as f64]);
            }
        }
    }
    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    for p in past.iter().chain(&future).flatten() {
        for d in 0..2 {
            min[d] = min[d].min(p[d]);
            max[d] = max[d].max(p[d]);
        }
    }
    if !min[0].is_finite() {
        min = [0.0; 2];
        max = [0.0; 2];
    }
    let view = View {
        min: [min[0] - MAP_MARGIN, min[1] - MAP_MARGIN],
        max: [max[0] + MAP_MARGIN, max[1] + MAP_MARGIN],
    };
    let w = 2.0 * PAD_PX + (view.max[0] - view.min[0]) * PX_PER_M;
    let h = 2.0 * PAD_PX + (view.max[1] - view.min[1]) * PX_PER_M;

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
    )
    .unwrap();
    writeln!(svg, "<title>{}</title>", xml_escape(&s.scenario_id)).unwrap();
    writeln!(
        svg,
        "<style>.past{{fill:none;stroke-width:2}} .future{{fill:none;stroke-width:2;stroke-dasharray:2 3}} .lane{{stroke-width:1}}</style>"
    )
    .unwrap();
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();

    if let Some(g) = map {
        writeln!(svg, r#"<g class="map">"#).unwrap();
        for e in g.edges.iter().filter(|e| e.etype == etype::SUCCESSIVE) {
            let (p, q) = (&g.points[e.from as usize], &g.points[e.to as usize]);
            if !view.contains(p.pos) && !view.contains(q.pos) {
                continue;
            }
            let (x1, y1) = view.px(p.pos);
            let (x2, y2) = view.px(q.pos);
            writeln!(
                svg,
                r#"<line class="lane" x1="{x1:.1}" y1="{y1:.1}" x2="{x2:.1}" y2="{y2:.1}" stroke="{}"/>"#,
                mtype_color(p.mtype)
            )
            .unwrap();
        }
        writeln!(svg, "</g>").unwrap();
    }

    let roles = roles(s);
    // Context first so scored agents and the TA are drawn on top.
    for role in [2u8, 1, 0] {
        let (class, color) = match role {
            0 => ("ta", TA_COLOR),
            1 => ("scored", SCORED_COLOR),
            _ => ("context", CONTEXT_COLOR),
        };
        for a in (0..a_n).filter(|&a| roles[a] == role) {
            writeln!(
                svg,
                r#"<g class="agent {class}" data-agent="{}" stroke="{color}" fill="{color}">"#,
                s.agents[a].id
            )
            .unwrap();
            if past[a].len() > 1 {
                writeln!(svg, r#"<path class="past" d="{}"/>"#, path_data(&view, &past[a])).unwrap();
            }
            if let Some(&last) = past[a].last() {
                let (x, y) = view.px(last);
                writeln!(svg, r#"<circle cx="{x:.1}" cy="{y:.1}" r="3"/>"#).unwrap();
            }
            if !future[a].is_empty() {
                let mut f = past[a].last().copied().into_iter().collect::<Vec<_>>();
                f.extend(&future[a]);
                if f.len() > 1 {
                    writeln!(svg, r#"<path class="future" d="{}"/>"#, path_data(&view, &f)).unwrap();
                }
            }
            writeln!(svg, "</g>").unwrap();
        }
    }
    svg += "</svg>\n";
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapgraph::{MapEdge, MapPoint};
    use crate::record::tests::fixture;

    #[test]
    fn well_formed_with_one_ta_group() {
        let s = fixture();
        let svg = render_scenario(&s, None);
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let groups: Vec<_> = doc
            .descendants()
            .filter(|n| n.attribute("class").is_some_and(|c| c.starts_with("agent")))
            .collect();
        assert_eq!(groups.len(), s.num_agents());
        let ta: Vec<_> = groups.iter().filter(|g| g.attribute("class") == Some("agent ta")).collect();
        assert_eq!(ta.len(), 1);
        assert_eq!(ta[0].attribute("stroke"), Some(TA_COLOR));
        assert!(!svg.contains(r#"class="map""#));
    }

    #[test]
    fn map_lines_drawn_near_agents() {
        let s = fixture();
        let g = LaneGraph {
            points: vec![
                MapPoint { pos: [0.0, -2.0], mtype: mtype::LINE_THIN_SOLID },
                MapPoint { pos: [10.0, -2.0], mtype: mtype::LINE_THIN_SOLID },
                MapPoint { pos: [5000.0, 0.0], mtype: mtype::CURBSTONE },
                MapPoint { pos: [5010.0, 0.0], mtype: mtype::CURBSTONE },
            ],
            edges: vec![
                MapEdge { from: 0, to: 1, etype: etype::SUCCESSIVE },
                MapEdge { from: 2, to: 3, etype: etype::SUCCESSIVE },
            ],
        };
        let svg = render_scenario(&s, Some(&g));
        roxmltree::Document::parse(&svg).unwrap();
        assert_eq!(svg.matches("<line ").count(), 1);
    }
}
