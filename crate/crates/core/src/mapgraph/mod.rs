//! Typed lane graphs compiled from Lanelet2 maps or highway lane markings.
//!
//! A graph is a list of typed points (resampled boundary polylines) and
//! typed directed edges between them.

mod osm;
mod projection;

use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::Scenario;
use crate::types::MarkingGroup;

pub use osm::{parse_lanelet_osm, parse_lanelet_osm_str, Member, RawMap, RawNode, RawRelation, RawWay, Tags};
pub use projection::{utm_zone, Projection, ProjectionOrigin};

pub const DEFAULT_SPACING: f64 = 2.0;

/// Point types: boundary `type`/`subtype` tags of the way a point lies on.
pub mod mtype {
    pub const UNKNOWN: u8 = 0;
    pub const LINE_THIN_SOLID: u8 = 1;
    pub const LINE_THIN_DASHED: u8 = 2;
    pub const LINE_THICK_SOLID: u8 = 3;
    pub const LINE_THICK_DASHED: u8 = 4;
    pub const DOUBLE_LINE: u8 = 5;
    pub const CURBSTONE: u8 = 6;
    pub const VIRTUAL: u8 = 7;
    pub const STOP_LINE: u8 = 8;
    pub const GUARD_RAIL: u8 = 9;
    pub const ROAD_BORDER: u8 = 10;
    pub const PEDESTRIAN_MARKING: u8 = 11;
    pub const ZEBRA_MARKING: u8 = 12;
    pub const BIKE_MARKING: u8 = 13;
    pub const BARRIER: u8 = 14;

    pub const NAMES: [(u8, &str); 15] = [
        (UNKNOWN, "unknown"),
        (LINE_THIN_SOLID, "line_thin_solid"),
        (LINE_THIN_DASHED, "line_thin_dashed"),
        (LINE_THICK_SOLID, "line_thick_solid"),
        (LINE_THICK_DASHED, "line_thick_dashed"),
        (DOUBLE_LINE, "double_line"),
        (CURBSTONE, "curbstone"),
        (VIRTUAL, "virtual"),
        (STOP_LINE, "stop_line"),
        (GUARD_RAIL, "guard_rail"),
        (ROAD_BORDER, "road_border"),
        (PEDESTRIAN_MARKING, "pedestrian_marking"),
        (ZEBRA_MARKING, "zebra_marking"),
        (BIKE_MARKING, "bike_marking"),
        (BARRIER, "barrier"),
    ];
}

/// Edge types.
pub mod etype {
    /// Consecutive points of one polyline, in way order.
    pub const SUCCESSIVE: u8 = 0;
    /// Left boundary point to the matching right boundary point of a lanelet.
    pub const PAIRING: u8 = 1;

    pub const NAMES: [(u8, &str); 2] = [(SUCCESSIVE, "successive"), (PAIRING, "pairing")];
}

/// Point type of a way from its Lanelet2 tags.
pub fn mtype_of(tags: &Tags) -> u8 {
    let t = tags.get("type").map(String::as_str).unwrap_or("");
    let sub = tags.get("subtype").map(String::as_str).unwrap_or("");
    let double = matches!(sub, "solid_solid" | "solid_dashed" | "dashed_solid" | "dashed_dashed");
    match t {
        "line_thin" | "line_thick" if double => mtype::DOUBLE_LINE,
        "line_thin" if sub == "dashed" => mtype::LINE_THIN_DASHED,
        "line_thin" => mtype::LINE_THIN_SOLID,
        "line_thick" if sub == "dashed" => mtype::LINE_THICK_DASHED,
        "line_thick" => mtype::LINE_THICK_SOLID,
        "curbstone" => mtype::CURBSTONE,
        "virtual" => mtype::VIRTUAL,
        "stop_line" => mtype::STOP_LINE,
        "guard_rail" => mtype::GUARD_RAIL,
        "road_border" => mtype::ROAD_BORDER,
        "pedestrian_marking" => mtype::PEDESTRIAN_MARKING,
        "zebra_marking" => mtype::ZEBRA_MARKING,
        "bike_marking" => mtype::BIKE_MARKING,
        "fence" | "wall" | "jersey_barrier" => mtype::BARRIER,
        _ => mtype::UNKNOWN,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapPoint {
    pub pos: [f64; 2],
    pub mtype: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MapEdge {
    pub from: u32,
    pub to: u32,
    pub etype: u8,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LaneGraph {
    pub points: Vec<MapPoint>,
    pub edges: Vec<MapEdge>,
}

impl LaneGraph {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.points.len() as u32;
        for e in &self.edges {
            if e.from >= n || e.to >= n {
                return Err(Error::InvalidArgument(format!("edge {e:?} out of range ({n} points)")));
            }
            if e.from == e.to {
                return Err(Error::InvalidArgument(format!("self-loop at point {}", e.from)));
            }
        }
        if self.points.iter().any(|p| !p.pos[0].is_finite() || !p.pos[1].is_finite()) {
            return Err(Error::NonFinite("map point"));
        }
        Ok(())
    }

    pub fn translate(&mut self, d: [f64; 2]) {
        for p in &mut self.points {
            p.pos[0] += d[0];
            p.pos[1] += d[1];
        }
    }

    /// Append a polyline's points joined by successive edges.
    fn push_polyline(&mut self, pts: &[[f64; 2]], mtype: u8) -> std::ops::Range<usize> {
        let start = self.points.len();
        self.points.extend(pts.iter().map(|&pos| MapPoint { pos, mtype }));
        for i in start + 1..self.points.len() {
            self.edges.push(MapEdge {
                from: (i - 1) as u32,
                to: i as u32,
                etype: etype::SUCCESSIVE,
            });
        }
        start..self.points.len()
    }
}

/// Ways and lanelets with node positions in a local metric frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProjectedMap {
    /// Positions of all nodes, in id order.
    pub nodes: Vec<[f64; 2]>,
    /// `(way id, polyline, point type)` in id order.
    pub ways: Vec<(i64, Vec<[f64; 2]>, u8)>,
    /// `(relation id, left way id, right way id)` in id order.
    pub lanelets: Vec<(i64, i64, i64)>,
}

impl ProjectedMap {
    /// Mean of all node positions, `None` for an empty map.
    pub fn center(&self) -> Option<[f64; 2]> {
        if self.nodes.is_empty() {
            return None;
        }
        let n = self.nodes.len() as f64;
        let (sx, sy) = self.nodes.iter().fold((0.0, 0.0), |(a, b), p| (a + p[0], b + p[1]));
        Some([sx / n, sy / n])
    }
}

fn local_xy(node: &RawNode) -> Option<[f64; 2]> {
    let x = node.tags.get("local_x")?.parse().ok()?;
    let y = node.tags.get("local_y")?.parse().ok()?;
    Some([x, y])
}

/// Project a raw map into a local frame. Nodes carrying `local_x`/`local_y`
/// tags on every node are used as is; otherwise `projection` is required.
pub fn project_map(raw: &RawMap, projection: Option<&Projection>) -> Result<ProjectedMap> {
    let local: Option<Vec<[f64; 2]>> = raw.nodes.iter().map(local_xy).collect();
    let nodes = match (local, projection) {
        (Some(l), _) if !raw.nodes.is_empty() => l,
        (_, Some(p)) => raw
            .nodes
            .iter()
            .map(|n| {
                p.forward(n.lat, n.lon).map(|(x, y)| [x, y]).map_err(|e| Error::Osm {
                    element: format!("node {}", n.id),
                    message: e.to_string(),
                })
            })
            .collect::<Result<_>>()?,
        (_, None) if raw.nodes.is_empty() => Vec::new(),
        (_, None) => return Err(Error::Projection("map nodes have no local coordinates and no projection origin is known".into())),
    };
    let pos = |id: i64| nodes[raw.nodes.binary_search_by_key(&id, |n| n.id).expect("validated reference")];
    let ways = raw
        .ways
        .iter()
        .map(|w| (w.id, w.nodes.iter().map(|&r| pos(r)).collect(), mtype_of(&w.tags)))
        .collect();
    let lanelets = raw
        .relations
        .iter()
        .filter(|r| r.is_lanelet())
        .filter_map(|r| Some((r.id, r.member("left")?, r.member("right")?)))
        .collect();
    Ok(ProjectedMap { nodes, ways, lanelets })
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Resample a polyline at about `spacing` meters along its arc length.
/// Both endpoints are kept; `None` for fewer than two distinct points.
pub fn resample_polyline(pts: &[[f64; 2]], spacing: f64) -> Option<Vec<[f64; 2]>> {
    let mut cum = vec![0.0];
    for w in pts.windows(2) {
        cum.push(cum[cum.len() - 1] + dist(w[0], w[1]));
    }
    let total = *cum.last()?;
    if pts.len() < 2 || total <= 0.0 {
        return None;
    }
    let n = ((total / spacing).round() as usize).max(1);
    let mut out = Vec::with_capacity(n + 1);
    let mut seg = 0;
    for k in 0..=n {
        let s = total * k as f64 / n as f64;
        while seg + 2 < cum.len() && cum[seg + 1] < s {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let t = if len > 0.0 { ((s - cum[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
        let (a, b) = (pts[seg], pts[seg + 1]);
        out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
    }
    *out.last_mut()? = pts[pts.len() - 1];
    Some(out)
}

/// Compile a projected map into a lane graph.
///
/// Every way becomes a resampled polyline. For each lanelet, every left
/// boundary point is paired with the right boundary point at the nearest
/// relative arc length, respecting the relative orientation of the two ways.
pub fn build_lane_graph(map: &ProjectedMap, spacing: f64) -> Result<LaneGraph> {
    if !(spacing > 0.0) {
        return Err(Error::InvalidArgument(format!("spacing must be positive, got {spacing}")));
    }
    let mut g = LaneGraph::default();
    let mut ranges = std::collections::BTreeMap::new();
    for (id, pts, mt) in &map.ways {
        match resample_polyline(pts, spacing) {
            Some(r) => {
                ranges.insert(*id, g.push_polyline(&r, *mt));
            }
            None => log::warn!("way {id}: fewer than two distinct nodes, skipped"),
        }
    }
    let mut pairs = BTreeSet::new();
    for &(_, left, right) in &map.lanelets {
        let (Some(l), Some(r)) = (ranges.get(&left), ranges.get(&right)) else {
            continue;
        };
        let (l, r) = (l.clone(), r.clone());
        let p = |i: usize| g.points[i].pos;
        let reversed = dist(p(l.start), p(r.start)) + dist(p(l.end - 1), p(r.end - 1))
            > dist(p(l.start), p(r.end - 1)) + dist(p(l.end - 1), p(r.start));
        let (nl, nr) = ((l.len() - 1).max(1) as f64, (r.len() - 1).max(1) as f64);
        for i in l.clone() {
            let mut f = (i - l.start) as f64 / nl;
            if reversed {
                f = 1.0 - f;
            }
            let j = r.start + (f * nr).round() as usize;
            if i != j {
                pairs.insert(MapEdge {
                    from: i as u32,
                    to: j as u32,
                    etype: etype::PAIRING,
                });
            }
        }
    }
    g.edges.extend(pairs);
    Ok(g)
}

/// Simplified lane graph of one highway direction group: one straight
/// polyline per marking line, sorted by `y`; outer lines are solid, inner
/// lines dashed.
pub fn highd_lane_graph(group: &MarkingGroup, spacing: f64) -> Result<LaneGraph> {
    let (x0, x1) = group.x_range;
    if group.y.is_empty() {
        return Err(Error::InvalidArgument(format!("direction {}: no lane markings", group.direction)));
    }
    if !(x1 > x0) || group.y.iter().any(|y| !y.is_finite()) {
        return Err(Error::InvalidArgument(format!("direction {}: invalid marking extent", group.direction)));
    }
    let mut ys = group.y.clone();
    ys.sort_by(f64::total_cmp);
    let mut g = LaneGraph::default();
    for (k, &y) in ys.iter().enumerate() {
        let line = resample_polyline(&[[x0, y], [x1, y]], spacing).expect("positive length");
        let mt = if k == 0 || k + 1 == ys.len() {
            mtype::LINE_THIN_SOLID
        } else {
            mtype::LINE_THIN_DASHED
        };
        g.push_polyline(&line, mt);
    }
    Ok(g)
}

/// Per agent, the index of the map point nearest to its position at the
/// anchor step (ties to the lower index). `None` for agents unobserved at
/// the anchor and for an empty graph.
pub fn nearest_map_point(s: &Scenario, graph: &LaneGraph) -> Vec<Option<usize>> {
    (0..s.num_agents())
        .map(|a| {
            let i = s.inp_idx(a, s.obs_len - 1);
            if !s.input_mask[i] {
                return None;
            }
            let q = [s.inp_pos[i][0] as f64, s.inp_pos[i][1] as f64];
            nearest_point(graph, q)
        })
        .collect()
}

pub fn nearest_point(graph: &LaneGraph, q: [f64; 2]) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for (k, p) in graph.points.iter().enumerate() {
        let d = (p.pos[0] - q[0]).powi(2) + (p.pos[1] - q[1]).powi(2);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, k));
        }
    }
    best.map(|b| b.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum MapLine {
    Header {
        map_id: String,
        /// Translation subtracted from the projected map coordinates.
        origin_shift: [f64; 2],
        points: usize,
        edges: usize,
        mtypes: Vec<(u8, String)>,
        etypes: Vec<(u8, String)>,
    },
    Point {
        x: f64,
        y: f64,
        mtype: u8,
    },
    Edge {
        from: u32,
        to: u32,
        etype: u8,
    },
}

fn json_err(context: &str) -> impl FnOnce(serde_json::Error) -> Error + '_ {
    move |source| Error::Json {
        context: context.to_string(),
        source,
    }
}

/// Write a graph as NDJSON: a header line with the type vocabularies, then
/// one line per point and per edge.
pub fn write_lane_graph(path: &Path, map_id: &str, origin_shift: [f64; 2], g: &LaneGraph) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    let names = |t: &[(u8, &str)]| t.iter().map(|&(k, v)| (k, v.to_string())).collect();
    let header = MapLine::Header {
        map_id: map_id.to_string(),
        origin_shift,
        points: g.points.len(),
        edges: g.edges.len(),
        mtypes: names(&mtype::NAMES),
        etypes: names(&etype::NAMES),
    };
    let lines = std::iter::once(header)
        .chain(g.points.iter().map(|p| MapLine::Point {
            x: p.pos[0],
            y: p.pos[1],
            mtype: p.mtype,
        }))
        .chain(g.edges.iter().map(|e| MapLine::Edge {
            from: e.from,
            to: e.to,
            etype: e.etype,
        }));
    for line in lines {
        serde_json::to_writer(&mut w, &line).map_err(json_err("map line"))?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Read a graph written by [`write_lane_graph`]; returns `(map_id, graph)`.
pub fn read_lane_graph(path: &Path) -> Result<(String, LaneGraph)> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let r = std::io::BufReader::new(std::fs::File::open(path).map_err(io)?);
    let mut id = None;
    let mut g = LaneGraph::default();
    for line in r.lines() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line).map_err(json_err("map line"))? {
            MapLine::Header { map_id, .. } => id = Some(map_id),
            MapLine::Point { x, y, mtype } => g.points.push(MapPoint { pos: [x, y], mtype }),
            MapLine::Edge { from, to, etype } => g.edges.push(MapEdge { from, to, etype }),
        }
    }
    g.validate()?;
    let id = id.ok_or_else(|| Error::Format(format!("{}: missing map header", path.display())))?;
    Ok((id, g))
}
