//! The end-to-end `process` run: raw dataset directory in, split
//! directories and lane graphs out.
//!
//! Stages run in a fixed order. Ownership is computed at source rate so an
//! agent's owning split does not depend on the decimation grid.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::exec::{map_ordered, try_map_ordered, Execution};
use crate::format::{write_split, WriteOptions};
use crate::ingest::{self, DatasetDescriptor, Family, IngestOptions, IngestReport};
use crate::mapgraph::{
    build_lane_graph, highd_lane_graph, parse_lanelet_osm, project_map, write_lane_graph, LaneGraph, Projection,
    ProjectionOrigin, RawMap,
};
use crate::partition::{
    label_maneuver, leakage_audit, stratified_anchor_select, AnchorCandidate, LabelConfig, LateralFrame,
    LeakageAudit, Ownership, SelectConfig, SelectReport, SplitSource,
};
use crate::record::{Scenario, MANEUVER_CLASSES};
use crate::resample::{decimate_recording, ResampleConfig, ResampleTally};
use crate::scenario::{build_scenario, normalize_coordinates, AgentFrame, Normalization, ScenarioConfig, SkipReason, SkipTally};
use crate::types::{Recording, Split};

pub const MAPS_DIR: &str = "maps";
pub const AUDIT_FILE: &str = "audit.json";
const MAP_SEARCH_DEPTH: usize = 4;

#[derive(Debug, Clone)]
pub struct ProcessConfig {
    pub input_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Dataset name; detected from the files when `None`.
    pub dataset: Option<String>,
    pub seed: u64,
    pub ingest: IngestOptions,
    pub resample: ResampleConfig,
    pub scenario: ScenarioConfig,
    pub anchors_per_agent: usize,
    /// Target lane-keep share for highway datasets; `None` keeps every
    /// anchor that survives the per-agent cap.
    pub lk_fraction: Option<f64>,
    pub label: LabelConfig,
    pub map_spacing: f64,
    pub binary: bool,
    pub exec: Execution,
}

impl ProcessConfig {
    pub fn new(input_dir: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            input_dir: input_dir.into(),
            output_dir: output_dir.into(),
            dataset: None,
            seed: 0,
            ingest: IngestOptions::default(),
            resample: ResampleConfig::default(),
            scenario: ScenarioConfig::default(),
            anchors_per_agent: 1,
            lk_fraction: Some(0.5),
            label: LabelConfig::default(),
            map_spacing: crate::mapgraph::DEFAULT_SPACING,
            binary: false,
            exec: Execution::default(),
        }
    }

    /// Settings echoed into every manifest. Paths are left out so the
    /// manifest does not depend on where the run happened.
    fn echo(&self, dataset: &str, stratified: bool) -> serde_json::Value {
        json!({
            "dataset": dataset,
            "seed": self.seed,
            "target_rate_hz": self.resample.target_rate_hz,
            "filter": self.resample.filter,
            "decimation_phase": self.resample.phase,
            "obs_len": self.scenario.obs_len,
            "pred_len": self.scenario.pred_len,
            "max_scored_neighbors": self.scenario.limits.max_scored_neighbors,
            "min_neighbor_future": self.scenario.limits.min_neighbor_future,
            "agent_frame": self.scenario.agent_frame,
            "include_acc": self.scenario.include_acc,
            "anchors_per_agent": self.anchors_per_agent,
            "lk_fraction": if stratified { self.lk_fraction } else { None },
            "map_spacing": self.map_spacing,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub split: Split,
    pub scenarios: usize,
    pub trajectories: usize,
    pub unique_agents: usize,
    pub maneuver_histogram: [usize; MANEUVER_CLASSES],
    pub selection: SelectReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessReport {
    pub dataset: String,
    pub ingest: IngestReport,
    pub resample: ResampleTally,
    /// Lane graphs written under `maps/`, by id.
    pub maps: Vec<String>,
    /// Anchor frames usable by their TA's owning split.
    pub candidates: usize,
    /// Anchor frames rejected, and selected anchors that built no scenario.
    pub skipped: SkipTally,
    pub splits: Vec<SplitSummary>,
    pub audit: LeakageAudit,
}

impl ProcessReport {
    /// Scenario and trajectory counts per split as `N (T)`.
    pub fn table(&self) -> String {
        let cell = |s: usize, t: usize| format!("{s} ({t})");
        let (mut ts, mut tt) = (0, 0);
        let mut row = vec![self.dataset.clone()];
        for s in &self.splits {
            row.push(cell(s.scenarios, s.trajectories));
            ts += s.scenarios;
            tt += s.trajectories;
        }
        row.push(cell(ts, tt));
        let header = ["dataset", "train", "val", "test", "total"];
        let widths: Vec<usize> = header.iter().zip(&row).map(|(h, r)| h.len().max(r.len())).collect();
        let line = |cells: Vec<String>| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        format!(
            "{}\n{}\n",
            line(header.iter().map(|h| h.to_string()).collect()),
            line(row)
        )
    }
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

/// A compiled map of one location, in the recordings' raw frame.
struct LocationMap {
    center: [f64; 2],
    graph: LaneGraph,
}

fn osm_files(dir: &Path, depth: usize, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            if depth < MAP_SEARCH_DEPTH {
                osm_files(&p, depth + 1, out)?;
            }
        } else if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("osm")) {
            out.push(p);
        }
    }
    Ok(())
}

fn same_location(token: &str, location: &str) -> bool {
    match (token.parse::<u64>(), location.parse::<u64>()) {
        (Ok(a), Ok(b)) => a == b,
        _ => token == location,
    }
}

/// The map file of `location` among `files`: a file named after the
/// location (`<id>.osm` or `location<id>.osm`), or one inside a directory
/// named `<id>_<name>` as the drone datasets ship them.
pub fn find_map_file<'a>(files: &'a [PathBuf], root: &Path, location: &str) -> Option<&'a PathBuf> {
    let by_name = files.iter().find(|p| {
        let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("");
        same_location(stem, location) || stem.strip_prefix("location").is_some_and(|s| same_location(s, location))
    });
    by_name.or_else(|| {
        files.iter().find(|p| {
            let rel = p.strip_prefix(root).unwrap_or(p);
            rel.parent().is_some_and(|d| {
                d.components().any(|c| {
                    let name = c.as_os_str().to_str().unwrap_or("");
                    name.split_once('_').is_some_and(|(id, _)| same_location(id, location))
                })
            })
        })
    })
}

fn mean_latlon(raw: &RawMap) -> Option<(f64, f64)> {
    if raw.nodes.is_empty() {
        return None;
    }
    let n = raw.nodes.len() as f64;
    let (a, b) = raw.nodes.iter().fold((0.0, 0.0), |(a, b), x| (a + x.lat, b + x.lon));
    Some((a / n, b / n))
}

/// Projection taking map nodes into the frame of `rec`'s tracks.
fn map_projection(rec: &Recording, family: Family, raw: &RawMap) -> Result<Option<Projection>> {
    if let Some(g) = rec.geo_origin {
        let (lat, lon) = match (g.lat, g.lon) {
            (Some(lat), Some(lon)) => (lat, lon),
            _ => match mean_latlon(raw) {
                Some(p) => p,
                None => return Ok(None),
            },
        };
        return Ok(Some(Projection::new(ProjectionOrigin::Utm {
            zone: crate::mapgraph::utm_zone(lon)?,
            north: lat >= 0.0,
            easting0: g.easting,
            northing0: g.northing,
        })));
    }
    if family == Family::Interaction {
        return Ok(Some(Projection::new(ProjectionOrigin::utm_at(0.0, 0.0)?)));
    }
    Ok(None)
}

fn file_safe(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

fn load_location_maps(
    recordings: &[Recording],
    desc: &DatasetDescriptor,
    cfg: &ProcessConfig,
) -> Result<BTreeMap<String, LocationMap>> {
    let mut out = BTreeMap::new();
    if !desc.has_lanelet {
        return Ok(out);
    }
    let mut files = Vec::new();
    osm_files(&cfg.input_dir, 0, &mut files)?;
    let mut first_at: BTreeMap<&str, &Recording> = BTreeMap::new();
    for r in recordings {
        first_at.entry(r.location_id.as_str()).or_insert(r);
    }
    for (location, rec) in first_at {
        let Some(path) = find_map_file(&files, &cfg.input_dir, location) else {
            log::warn!("no lanelet map found for location {location}; its scenarios carry no map");
            continue;
        };
        let raw = parse_lanelet_osm(path)?;
        let projection = map_projection(rec, desc.family, &raw)?;
        let projected = match project_map(&raw, projection.as_ref()) {
            Ok(m) => m,
            Err(Error::Projection(m)) => {
                log::warn!("{}: {m}; location {location} carries no map", path.display());
                continue;
            }
            Err(e) => return Err(e),
        };
        let Some(center) = projected.center() else {
            log::warn!("{}: empty map", path.display());
            continue;
        };
        let graph = build_lane_graph(&projected, cfg.map_spacing)?;
        out.insert(location.to_string(), LocationMap { center, graph });
    }
    Ok(out)
}

/// Map id of a direction group of a direction-split recording.
pub fn direction_map_id(rec_id: &str, direction: u8) -> String {
    format!("{rec_id}-d{direction}")
}

fn write_maps(
    recordings: &[Recording],
    location_maps: &BTreeMap<String, LocationMap>,
    spacing: f64,
    dir: &Path,
) -> Result<Vec<String>> {
    let mut ids = Vec::new();
    let mut to_write: Vec<(String, [f64; 2], LaneGraph)> = Vec::new();
    for (location, m) in location_maps {
        let mut g = m.graph.clone();
        g.translate([-m.center[0], -m.center[1]]);
        to_write.push((location.clone(), m.center, g));
    }
    for r in recordings {
        for group in &r.lane_markings {
            let g = highd_lane_graph(group, spacing)?;
            to_write.push((direction_map_id(&r.recording_id, group.direction), r.origin_shift, g));
        }
    }
    if to_write.is_empty() {
        return Ok(ids);
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (id, shift, g) in to_write {
        write_lane_graph(&dir.join(format!("{}.ndjson", file_safe(&id))), &id, shift, &g)?;
        ids.push(id);
    }
    Ok(ids)
}

/// Candidate anchors of one recording, already capped per agent, grouped by
/// the owning split of their TA.
struct RecordingCandidates {
    by_split: BTreeMap<Split, Vec<AnchorCandidate>>,
    usable: usize,
    skipped: SkipTally,
}

fn recording_candidates(
    rec: &Recording,
    source: &SplitSource,
    ownership: &Ownership,
    cfg: &ProcessConfig,
    label: Option<&LabelConfig>,
) -> Result<RecordingCandidates> {
    let obs = cfg.scenario.obs_len as i64;
    let pred = cfg.scenario.pred_len;
    let mut by_split: BTreeMap<Split, Vec<AnchorCandidate>> = BTreeMap::new();
    let mut skipped = SkipTally::new();
    let mut usable = 0;
    for t in &rec.trajectories {
        let Some(owner) = ownership.owner(&rec.recording_id, t.agent_id.track) else {
            continue;
        };
        for i in 0..t.points.len().saturating_sub(pred) {
            let t0 = t.points[i].frame;
            let (lo, hi) = (t0 - obs + 1, t0 + pred as i64);
            let fits = |s: Split| source.window_in(lo, hi, rec.frame_stride, rec.frame_count, s);
            if !fits(owner) {
                let reason = if Split::ALL.into_iter().any(fits) {
                    SkipReason::ForeignTa
                } else {
                    SkipReason::CrossSplitWindow
                };
                *skipped.entry(reason).or_insert(0) += 1;
                continue;
            }
            let label = match label {
                Some(c) => Some(label_maneuver(t, i, c).map_err(|e| Error::Recording {
                    recording: rec.recording_id.clone(),
                    message: format!("agent {}: {e}", t.agent_id),
                })?),
                None => None,
            };
            usable += 1;
            by_split.entry(owner).or_default().push(AnchorCandidate {
                rec_id: rec.recording_id.clone(),
                agent: t.agent_id,
                anchor_frame: t0,
                label,
            });
        }
    }
    let cap = SelectConfig {
        seed: cfg.seed,
        anchors_per_agent: cfg.anchors_per_agent,
        lk_fraction: None,
    };
    for cands in by_split.values_mut() {
        *cands = stratified_anchor_select(cands, &cap, &rec.recording_id)?.0;
    }
    Ok(RecordingCandidates {
        by_split,
        usable,
        skipped,
    })
}

/// Run the whole pipeline.
pub fn process(cfg: &ProcessConfig) -> Result<ProcessReport> {
    let desc = stage(
        "ingest",
        match &cfg.dataset {
            Some(name) => ingest::descriptor_by_name(name),
            None => ingest::detect_dataset(&cfg.input_dir),
        },
    )?;
    let highway = desc.family == Family::Highway;
    let stratified = highway && cfg.lk_fraction.is_some();
    let (raw, ingest_report) = stage("ingest", ingest::read_dataset(&cfg.input_dir, &desc, &cfg.ingest, cfg.exec))?;
    log::info!(
        "ingested {} recordings of {} ({} points)",
        raw.len(),
        desc.name,
        ingest_report.points
    );

    let sources = stage(
        "partition",
        try_map_ordered(cfg.exec, &raw, |r| SplitSource::for_recording(r, cfg.seed)),
    )?;
    let mut ownership = Ownership::default();
    for (r, s) in raw.iter().zip(&sources) {
        ownership.add_recording(r, s);
    }

    let location_maps = stage("mapgraph", load_location_maps(&raw, &desc, cfg))?;

    let resampled = stage(
        "resample",
        try_map_ordered(cfg.exec, &raw, |r| decimate_recording(r, &cfg.resample, cfg.exec)),
    )?;
    drop(raw);
    let mut tally = ResampleTally::default();
    let mut recordings = Vec::with_capacity(resampled.len());
    for (r, t) in resampled {
        tally.merge(&t);
        recordings.push(r);
    }
    let recordings = stage(
        "scenario",
        try_map_ordered(cfg.exec, &recordings, |r| {
            let mode = if desc.direction_split {
                Normalization::DirectionSplit
            } else {
                Normalization::SceneCenter {
                    map_center: location_maps.get(&r.location_id).map(|m| m.center),
                }
            };
            normalize_coordinates(r, mode)
        }),
    )?;

    let map_ids = stage(
        "mapgraph",
        write_maps(&recordings, &location_maps, cfg.map_spacing, &cfg.output_dir.join(MAPS_DIR)),
    )?;

    let label_cfg = highway.then_some(LabelConfig {
        lateral: if desc.direction_split {
            LateralFrame::Global
        } else {
            LateralFrame::Heading
        },
        ..cfg.label
    });
    let indexed: Vec<(&Recording, &SplitSource)> = recordings.iter().zip(&sources).collect();
    let per_rec = stage(
        "partition",
        try_map_ordered(cfg.exec, &indexed, |(r, s)| {
            recording_candidates(r, s, &ownership, cfg, label_cfg.as_ref())
        }),
    )?;
    let mut skipped = SkipTally::new();
    let mut candidates = 0;
    let mut pools: BTreeMap<Split, Vec<AnchorCandidate>> = Split::ALL.into_iter().map(|s| (s, Vec::new())).collect();
    for rc in per_rec {
        candidates += rc.usable;
        for (k, v) in rc.skipped {
            *skipped.entry(k).or_insert(0) += v;
        }
        for (s, c) in rc.by_split {
            pools.get_mut(&s).expect("all splits present").extend(c);
        }
    }

    let by_id: HashMap<&str, &Recording> = recordings.iter().map(|r| (r.recording_id.as_str(), r)).collect();
    let select_cfg = SelectConfig {
        seed: cfg.seed,
        anchors_per_agent: cfg.anchors_per_agent,
        lk_fraction: if highway { cfg.lk_fraction } else { None },
    };
    let echo = cfg.echo(&desc.name, stratified);
    let mut emitted: Vec<(Split, Vec<Scenario>, SelectReport)> = Vec::new();
    for (split, pool) in pools {
        let (selected, report) = stage("partition", stratified_anchor_select(&pool, &select_cfg, split.name()))?;
        let built = map_ordered(cfg.exec, &selected, |c| {
            let rec = by_id[c.rec_id.as_str()];
            let scorable = |t: &crate::types::Trajectory| ownership.owner(&rec.recording_id, t.agent_id.track) == Some(split);
            build_scenario(rec, c.agent, c.anchor_frame, &cfg.scenario, &scorable).map(|mut s| {
                s.maneuver_label = c.label;
                s.map_ref = map_ref(rec, c, &location_maps, &cfg.scenario);
                s
            })
        });
        let mut scenarios = Vec::with_capacity(built.len());
        for b in built {
            match b {
                Ok(s) => scenarios.push(s),
                Err(reason) => *skipped.entry(reason).or_insert(0) += 1,
            }
        }
        emitted.push((split, scenarios, report));
    }

    let audit = leakage_audit(
        &emitted.iter().map(|(s, v, _)| (*s, v.as_slice())).collect::<Vec<_>>(),
        Some(&ownership),
    );
    let audit_path = cfg.output_dir.join(AUDIT_FILE);
    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e).in_stage("write"))?;
    let text = serde_json::to_string_pretty(&audit).map_err(|e| Error::json("audit", e))?;
    fs::write(&audit_path, text + "\n").map_err(|e| Error::io(&audit_path, e).in_stage("write"))?;
    if !audit.is_clean() {
        return Err(Error::Leakage(audit.violations.len() + audit.foreign_scored).in_stage("partition"));
    }

    let mut splits = Vec::new();
    for (split, scenarios, selection) in emitted {
        let opts = WriteOptions {
            split,
            dataset: desc.name.clone(),
            seed: cfg.seed,
            obs_len: cfg.scenario.obs_len,
            pred_len: cfg.scenario.pred_len,
            limits: cfg.scenario.limits,
            binary: cfg.binary,
            config: echo.clone(),
        };
        let m = stage("write", write_split(&scenarios, &cfg.output_dir.join(split.name()), &opts))?;
        log::info!("{}: {} scenarios, {} trajectories", split.name(), m.count, m.trajectory_count);
        splits.push(SplitSummary {
            split,
            scenarios: m.count,
            trajectories: m.trajectory_count,
            unique_agents: m.unique_agents,
            maneuver_histogram: m.maneuver_histogram,
            selection,
        });
    }
    Ok(ProcessReport {
        dataset: desc.name.clone(),
        ingest: ingest_report,
        resample: tally,
        maps: map_ids,
        candidates,
        skipped,
        splits,
        audit,
    })
}

fn map_ref(
    rec: &Recording,
    c: &AnchorCandidate,
    location_maps: &BTreeMap<String, LocationMap>,
    cfg: &ScenarioConfig,
) -> Option<String> {
    // Agent-frame scenarios no longer share the map's frame.
    if cfg.agent_frame == AgentFrame::Ta {
        return None;
    }
    if location_maps.contains_key(&rec.location_id) {
        return Some(rec.location_id.clone());
    }
    let d = rec.trajectory(c.agent)?.direction?;
    rec.lane_markings
        .iter()
        .any(|g| g.direction == d)
        .then(|| direction_map_id(&rec.recording_id, d))
}

/// Path of the lane graph a scenario refers to, given its split directory.
pub fn map_path(split_dir: &Path, map_ref: &str) -> PathBuf {
    let root = split_dir.parent().unwrap_or(split_dir);
    root.join(MAPS_DIR).join(format!("{}.ndjson", file_safe(map_ref)))
}
