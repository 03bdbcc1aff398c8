//! Scenario assembly: coordinate normalization, neighbor selection and
//! mask construction around a target agent (TA) and an anchor frame.

mod frame;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::angle::wrap_unchecked;
use crate::error::{Error, Result};
use crate::record::{
    psi_to_f32, Scenario, ScenarioAgent, ScenarioLimits, DEFAULT_MAX_SCORED_NEIGHBORS, DEFAULT_MIN_NEIGHBOR_FUTURE,
    DEFAULT_OBS_LEN, DEFAULT_PRED_LEN,
};
use crate::types::{AgentId, Recording, TrackPoint, Trajectory};

pub use frame::{from_agent_frame, to_agent_frame, AgentPose};

/// How a recording's coordinates are normalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    /// Per travel-direction group: +x along travel, +y to the left, origin
    /// at the lower-left corner of the group's lane-marking extent.
    DirectionSplit,
    /// Translate the origin to the scene center: `map_center` (in the raw
    /// frame) when a map exists, else the mean of all track positions.
    SceneCenter { map_center: Option<[f64; 2]> },
}

fn rotate_point(p: &mut TrackPoint) {
    p.x = -p.x;
    p.y = -p.y;
    p.vx = -p.vx;
    p.vy = -p.vy;
    p.ax = p.ax.map(|a| -a);
    p.ay = p.ay.map(|a| -a);
    p.psi = wrap_unchecked(p.psi + std::f64::consts::PI);
}

pub fn normalize_coordinates(rec: &Recording, mode: Normalization) -> Result<Recording> {
    let mut out = rec.clone();
    match mode {
        Normalization::DirectionSplit => {
            if rec.normalized {
                return Ok(out);
            }
            let err = |m: String| Error::Recording {
                recording: rec.recording_id.clone(),
                message: m,
            };
            if rec.lane_markings.is_empty() {
                return Err(err("direction split needs lane markings".into()));
            }
            // Groups driving toward -x are turned by 180 degrees.
            let mut sums: BTreeMap<u8, (f64, usize)> = BTreeMap::new();
            for t in &rec.trajectories {
                let d = t
                    .direction
                    .ok_or_else(|| err(format!("agent {} has no travel direction", t.agent_id)))?;
                if !rec.lane_markings.iter().any(|g| g.direction == d) {
                    return Err(err(format!("no lane markings for direction {d}")));
                }
                let e = sums.entry(d).or_insert((0.0, 0));
                e.0 += t.points.iter().map(|p| p.vx).sum::<f64>();
                e.1 += t.points.len();
            }
            let rotated = |d: u8| sums.get(&d).is_some_and(|&(s, _)| s < 0.0);
            let mut corners = BTreeMap::new();
            for g in &mut out.lane_markings {
                if g.y.is_empty() {
                    return Err(err(format!("direction {} has no marking lines", g.direction)));
                }
                let (mut x0, mut x1) = g.x_range;
                if rotated(g.direction) {
                    (x0, x1) = (-x1, -x0);
                    for y in &mut g.y {
                        *y = -*y;
                    }
                }
                g.y.sort_by(f64::total_cmp);
                let corner = [x0, g.y[0]];
                for y in &mut g.y {
                    *y -= corner[1];
                }
                g.x_range = (0.0, x1 - x0);
                corners.insert(g.direction, corner);
            }
            for t in &mut out.trajectories {
                let d = t.direction.unwrap_or_default();
                let c = corners[&d];
                for p in &mut t.points {
                    if rotated(d) {
                        rotate_point(p);
                    }
                    p.x -= c[0];
                    p.y -= c[1];
                }
            }
        }
        Normalization::SceneCenter { map_center } => {
            let center = match map_center {
                Some(c) => c,
                None => {
                    let n = rec.point_count();
                    if n == 0 {
                        rec.origin_shift
                    } else {
                        let (sx, sy) = rec
                            .trajectories
                            .iter()
                            .flat_map(|t| &t.points)
                            .fold((0.0, 0.0), |(a, b), p| (a + p.x, b + p.y));
                        [sx / n as f64 + rec.origin_shift[0], sy / n as f64 + rec.origin_shift[1]]
                    }
                }
            };
            let d = [center[0] - rec.origin_shift[0], center[1] - rec.origin_shift[1]];
            for p in out.trajectories.iter_mut().flat_map(|t| t.points.iter_mut()) {
                p.x -= d[0];
                p.y -= d[1];
            }
            for g in &mut out.lane_markings {
                g.x_range = (g.x_range.0 - d[0], g.x_range.1 - d[0]);
                for y in &mut g.y {
                    *y -= d[1];
                }
            }
            out.origin_shift = center;
        }
    }
    out.normalized = true;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentFrame {
    Off,
    Ta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub obs_len: usize,
    pub pred_len: usize,
    pub limits: ScenarioLimits,
    pub agent_frame: AgentFrame,
    /// Emit acceleration arrays (points without acceleration store 0).
    pub include_acc: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            obs_len: DEFAULT_OBS_LEN,
            pred_len: DEFAULT_PRED_LEN,
            limits: ScenarioLimits {
                max_scored_neighbors: DEFAULT_MAX_SCORED_NEIGHBORS,
                min_neighbor_future: DEFAULT_MIN_NEIGHBOR_FUTURE,
            },
            agent_frame: AgentFrame::Off,
            include_acc: false,
        }
    }
}

/// Why an anchor candidate produced no scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    TaMissing,
    TaAbsentAtAnchor,
    ShortFuture,
    ForeignTa,
    CrossSplitWindow,
}

impl SkipReason {
    pub fn as_str(self) -> &'static str {
        match self {
            SkipReason::TaMissing => "ta_missing",
            SkipReason::TaAbsentAtAnchor => "ta_absent_at_anchor",
            SkipReason::ShortFuture => "short_future",
            SkipReason::ForeignTa => "foreign_ta",
            SkipReason::CrossSplitWindow => "cross_split_window",
        }
    }
}

pub fn scenario_id(rec_id: &str, ta: AgentId, anchor_frame: i64) -> String {
    format!("{rec_id}:{ta}:{anchor_frame}")
}

fn future_steps(t: &Trajectory, t0: i64, pred_len: usize) -> usize {
    (1..=pred_len as i64).filter(|k| t.at_frame(t0 + k).is_some()).count()
}

/// Assemble the scenario of `ta` anchored at frame `t0` of a normalized
/// recording at target rate.
///
/// Agents present at `t0` are included, TA first, the rest by distance to
/// the TA at `t0` and then by id. Up to `max_scored_neighbors` of them with
/// at least `min_neighbor_future` valid future steps, and for which
/// `scorable` holds, become multi-agent targets.
pub fn build_scenario(
    rec: &Recording,
    ta: AgentId,
    t0: i64,
    cfg: &ScenarioConfig,
    scorable: &dyn Fn(&Trajectory) -> bool,
) -> std::result::Result<Scenario, SkipReason> {
    let ta_traj = rec.trajectory(ta).ok_or(SkipReason::TaMissing)?;
    let ta_pt = ta_traj.at_frame(t0).ok_or(SkipReason::TaAbsentAtAnchor)?;
    if future_steps(ta_traj, t0, cfg.pred_len) < cfg.pred_len {
        return Err(SkipReason::ShortFuture);
    }

    let mut others: Vec<(f64, AgentId, &Trajectory)> = rec
        .trajectories
        .iter()
        .filter(|t| t.agent_id != ta && (ta_traj.direction.is_none() || t.direction == ta_traj.direction))
        .filter_map(|t| {
            let p = t.at_frame(t0)?;
            Some(((p.x - ta_pt.x).hypot(p.y - ta_pt.y), t.agent_id, t))
        })
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut rows: Vec<&Trajectory> = vec![ta_traj];
    rows.extend(others.iter().map(|o| o.2));
    let mut scored = vec![true];
    let mut n_scored = 0;
    for o in &others {
        let ok = n_scored < cfg.limits.max_scored_neighbors
            && future_steps(o.2, t0, cfg.pred_len) >= cfg.limits.min_neighbor_future
            && scorable(o.2);
        n_scored += usize::from(ok);
        scored.push(ok);
    }

    let agents = rows
        .iter()
        .map(|t| ScenarioAgent {
            id: t.agent_id,
            class: t.class,
        })
        .collect();
    let mut s = Scenario::empty(scenario_id(&rec.recording_id, ta, t0), &rec.recording_id, agents, cfg.obs_len, cfg.pred_len);
    s.anchor_frame = t0;
    s.ta_index = 0;
    let pose = match cfg.agent_frame {
        AgentFrame::Off => AgentPose::IDENTITY,
        AgentFrame::Ta => AgentPose {
            origin: [ta_pt.x, ta_pt.y],
            heading: ta_pt.psi,
        },
    };
    let (mut inp_acc, mut trg_acc) = if cfg.include_acc {
        (Some(vec![[0.0f32; 2]; s.inp_pos.len()]), Some(vec![[0.0f32; 2]; s.trg_pos.len()]))
    } else {
        (None, None)
    };
    let f32x2 = |v: [f64; 2]| [v[0] as f32, v[1] as f32];
    for (a, t) in rows.iter().enumerate() {
        let first = t0 - cfg.obs_len as i64 + 1;
        for k in 0..cfg.obs_len {
            if let Some(p) = t.at_frame(first + k as i64) {
                let i = s.inp_idx(a, k);
                let (pos, vel, psi, acc) = pose.forward(p);
                s.inp_pos[i] = f32x2(pos);
                s.inp_vel[i] = f32x2(vel);
                s.inp_psi[i] = psi_to_f32(psi);
                if let Some(arr) = inp_acc.as_mut() {
                    arr[i] = f32x2(acc);
                }
                s.input_mask[i] = true;
            }
        }
        for k in 0..cfg.pred_len {
            if let Some(p) = t.at_frame(t0 + 1 + k as i64) {
                let i = s.trg_idx(a, k);
                let (pos, vel, psi, acc) = pose.forward(p);
                s.trg_pos[i] = f32x2(pos);
                s.trg_vel[i] = f32x2(vel);
                s.trg_psi[i] = psi_to_f32(psi);
                if let Some(arr) = trg_acc.as_mut() {
                    arr[i] = f32x2(acc);
                }
                s.valid_mask[i] = true;
                s.sa_mask[i] = a == 0;
                s.ma_mask[i] = scored[a];
            }
        }
    }
    s.inp_acc = inp_acc;
    s.trg_acc = trg_acc;
    Ok(s)
}

/// Tally of skipped anchor candidates by reason.
pub type SkipTally = BTreeMap<SkipReason, usize>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{AgentClass, HeadingSource, MarkingGroup};
    use std::f64::consts::PI;

    fn point(frame: i64, x: f64, y: f64, vx: f64) -> TrackPoint {
        TrackPoint {
            frame,
            x,
            y,
            vx,
            vy: 0.0,
            psi: if vx < 0.0 { PI } else { 0.0 },
            ax: Some(0.5),
            ay: Some(0.0),
            lane_id: Some(1),
        }
    }

    pub(crate) fn straight(id: i64, frames: std::ops::Range<i64>, y: f64, vx: f64, x0: f64) -> Trajectory {
        Trajectory {
            agent_id: AgentId::new(id),
            class: AgentClass::Car,
            points: frames.map(|f| point(f, x0 + vx * 0.2 * f as f64, y, vx)).collect(),
            rate_hz: 5.0,
            heading: HeadingSource::Native,
            direction: None,
        }
    }

    pub(crate) fn recording(trajectories: Vec<Trajectory>) -> Recording {
        Recording {
            recording_id: "r1".into(),
            dataset: "test".into(),
            rate_hz: 5.0,
            frame_count: 200,
            location_id: "loc".into(),
            geo_origin: None,
            trajectories,
            frame_stride: 5,
            lane_markings: Vec::new(),
            origin_shift: [0.0; 2],
            predefined_split: None,
            normalized: true,
        }
    }

    fn build(rec: &Recording, ta: i64, t0: i64) -> Scenario {
        build_scenario(rec, AgentId::new(ta), t0, &ScenarioConfig::default(), &|_| true).unwrap()
    }

    #[test]
    fn lone_ta() {
        let rec = recording(vec![straight(1, 0..60, 0.0, 10.0, 0.0)]);
        let s = build(&rec, 1, 20);
        assert_eq!(s.num_agents(), 1);
        assert_eq!(s.ma_mask, s.sa_mask);
        assert_eq!(s.scenario_id, "r1:1:20");
        s.validate(&ScenarioLimits::default()).unwrap();
        // Partial input: only frames 0..=20 exist, all 15 steps observed.
        assert!(s.input_mask.iter().all(|&m| m));
    }

    #[test]
    fn twelve_neighbors_eight_scored_nearest() {
        let mut ts = vec![straight(100, 0..60, 0.0, 10.0, 0.0)];
        // Neighbor i at lateral distance 3 + i, ids descending with distance.
        for i in 0..12 {
            ts.push(straight(50 - i, 0..60, 3.0 + i as f64, 10.0, 0.0));
        }
        let rec = recording(ts);
        let s = build(&rec, 100, 20);
        assert_eq!(s.num_agents(), 13);
        let scored: Vec<i64> = s.ma_agents().iter().map(|&a| s.agents[a].id.track).collect();
        assert_eq!(scored, [100, 50, 49, 48, 47, 46, 45, 44, 43]);
        s.validate(&ScenarioLimits::default()).unwrap();
    }

    #[test]
    fn short_future_neighbor_is_context_only() {
        let rec = recording(vec![
            straight(1, 0..60, 0.0, 10.0, 0.0),
            straight(2, 10..35, 2.0, 10.0, 0.0),
            straight(3, 10..36, 4.0, 10.0, 0.0),
        ]);
        let s = build(&rec, 1, 20);
        // Agent 2 has frames 21..=34: 14 future steps.
        assert_eq!(s.valid_row(1).iter().filter(|&&v| v).count(), 14);
        assert!(s.ma_row(1).iter().all(|&m| !m));
        assert_eq!(s.ma_row(2).iter().filter(|&&v| v).count(), 15);
        assert!(!s.input_mask[s.inp_idx(1, 3)]);
        assert_eq!(s.inp_pos[s.inp_idx(1, 3)], [0.0, 0.0]);
        s.validate(&ScenarioLimits::default()).unwrap();
    }

    #[test]
    fn equal_distances_rank_by_id() {
        let rec = recording(vec![
            straight(1, 0..60, 0.0, 10.0, 0.0),
            straight(9, 0..60, 5.0, 10.0, 0.0),
            straight(4, 0..60, -5.0, 10.0, 0.0),
        ]);
        let s = build(&rec, 1, 20);
        let ids: Vec<i64> = s.agents.iter().map(|a| a.id.track).collect();
        assert_eq!(ids, [1, 4, 9]);
        let mut shuffled = rec.clone();
        shuffled.trajectories.reverse();
        assert_eq!(build(&shuffled, 1, 20), s);
    }

    #[test]
    fn unscorable_neighbors_stay_as_context() {
        let rec = recording(vec![straight(1, 0..60, 0.0, 10.0, 0.0), straight(2, 0..60, 1.0, 10.0, 0.0)]);
        let s = build_scenario(&rec, AgentId::new(1), 20, &ScenarioConfig::default(), &|t| t.agent_id.track != 2).unwrap();
        assert_eq!(s.num_agents(), 2);
        assert_eq!(s.ma_agents(), [0]);
    }

    #[test]
    fn skips_are_reported() {
        let rec = recording(vec![straight(1, 0..40, 0.0, 10.0, 0.0)]);
        let cfg = ScenarioConfig::default();
        let b = |ta, t0| build_scenario(&rec, AgentId::new(ta), t0, &cfg, &|_| true).unwrap_err();
        assert_eq!(b(2, 10), SkipReason::TaMissing);
        assert_eq!(b(1, 45), SkipReason::TaAbsentAtAnchor);
        assert_eq!(b(1, 20), SkipReason::ShortFuture);
    }

    #[test]
    fn acceleration_arrays_on_request() {
        let rec = recording(vec![straight(1, 0..60, 0.0, 10.0, 0.0)]);
        let cfg = ScenarioConfig {
            include_acc: true,
            ..ScenarioConfig::default()
        };
        let s = build_scenario(&rec, AgentId::new(1), 20, &cfg, &|_| true).unwrap();
        assert_eq!(s.trg_acc.as_ref().unwrap()[0], [0.5, 0.0]);
        assert!(build(&rec, 1, 20).trg_acc.is_none());
    }

    #[test]
    fn translation_only_normalization() {
        let rec = recording(vec![straight(1, 0..10, 4.0, 10.0, 100.0)]);
        let n = normalize_coordinates(&rec, Normalization::SceneCenter { map_center: Some([50.0, 1.0]) }).unwrap();
        for (a, b) in rec.trajectories[0].points.iter().zip(&n.trajectories[0].points) {
            assert_eq!((b.x, b.y), (a.x - 50.0, a.y - 1.0));
            assert_eq!((b.vx, b.vy, b.psi), (a.vx, a.vy, a.psi));
        }
        assert_eq!(n.origin_shift, [50.0, 1.0]);
        let again = normalize_coordinates(&n, Normalization::SceneCenter { map_center: Some([50.0, 1.0]) }).unwrap();
        assert_eq!(again, n);
        let m = normalize_coordinates(&rec, Normalization::SceneCenter { map_center: None }).unwrap();
        let mm = normalize_coordinates(&m, Normalization::SceneCenter { map_center: None }).unwrap();
        assert_eq!(m.origin_shift, mm.origin_shift);
        for (a, b) in m.trajectories[0].points.iter().zip(&mm.trajectories[0].points) {
            assert!((a.x - b.x).abs() < 1e-9 && (a.y - b.y).abs() < 1e-9);
        }
    }

    fn highway() -> Recording {
        let mut rec = recording(vec![straight(1, 0..10, -10.0, -20.0, 300.0), straight(2, 0..10, -25.0, 20.0, 50.0)]);
        rec.trajectories[0].direction = Some(1);
        rec.trajectories[1].direction = Some(2);
        rec.lane_markings = vec![
            MarkingGroup {
                direction: 1,
                y: vec![-16.0, -12.0, -8.0],
                x_range: (0.0, 400.0),
            },
            MarkingGroup {
                direction: 2,
                y: vec![-29.0, -25.5, -22.0],
                x_range: (0.0, 400.0),
            },
        ];
        rec.normalized = false;
        rec
    }

    #[test]
    fn opposing_direction_is_rotated() {
        let rec = highway();
        let n = normalize_coordinates(&rec, Normalization::DirectionSplit).unwrap();
        // Before rotation psi = pi, v = (-20, 0).
        let q = &n.trajectories[0].points[0];
        assert_eq!(q.psi, 0.0);
        assert_eq!((q.vx, q.vy), (20.0, 0.0));
        assert!(n.trajectories.iter().flat_map(|t| &t.points).all(|p| p.psi.abs() < 1e-12 || p.psi == PI));
        // Rotated group: corner (-400, 8); x = -300 + 400, y = 10 - 8.
        assert_eq!((q.x, q.y), (100.0, 2.0));
        let r = &n.trajectories[1].points[0];
        assert_eq!((r.x, r.y, r.vx), (50.0, 4.0, 20.0));
        assert_eq!(n.lane_markings[0].y, vec![0.0, 4.0, 8.0]);
        assert_eq!(normalize_coordinates(&n, Normalization::DirectionSplit).unwrap(), n);
    }

    #[test]
    fn opposing_agent_psi_zero_becomes_pi() {
        let mut rec = highway();
        for p in &mut rec.trajectories[0].points {
            p.psi = 0.0;
        }
        let n = normalize_coordinates(&rec, Normalization::DirectionSplit).unwrap();
        assert_eq!(n.trajectories[0].points[0].psi, PI);
    }

    #[test]
    fn direction_metadata_required() {
        let mut rec = highway();
        rec.trajectories[1].direction = None;
        assert!(normalize_coordinates(&rec, Normalization::DirectionSplit).is_err());
    }

    #[test]
    fn other_direction_not_in_scene() {
        let mut rec = highway();
        rec.trajectories[0].points = (0..60).map(|f| point(f, 300.0 - 4.0 * f as f64, -10.0, -20.0)).collect();
        rec.trajectories[1].points = (0..60).map(|f| point(f, 50.0 + 4.0 * f as f64, -25.0, 20.0)).collect();
        let n = normalize_coordinates(&rec, Normalization::DirectionSplit).unwrap();
        let s = build(&n, 1, 20);
        assert_eq!(s.num_agents(), 1);
    }
}
