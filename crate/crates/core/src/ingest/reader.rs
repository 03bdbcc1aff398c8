//! CSV parsing and normalization into [`Recording`] values at source rate.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use crate::angle::wrap_unchecked;
use crate::error::{Error, Result};
use crate::types::{
    AgentClass, AgentId, GeoOrigin, HeadingSource, MarkingGroup, Recording, TrackPoint, Trajectory,
};

use super::descriptor::{AngleUnit, Column, DatasetDescriptor, Field, Layout, PositionRef, RateSource};
use super::discover::RecordingFiles;
use super::heading::estimate_headings;

/// Offset added to `P`-prefixed (pedestrian) track ids so they cannot
/// collide with vehicle ids of the same recording.
pub const PEDESTRIAN_ID_OFFSET: i64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IngestOptions {
    pub heading_speed_floor: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            heading_speed_floor: super::heading::DEFAULT_HEADING_SPEED_FLOOR,
        }
    }
}

/// Per-file-set tallies.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FileTally {
    pub rows: usize,
    pub gap_splits: usize,
    pub derived_heading: usize,
}

struct Table {
    path: PathBuf,
    /// Column index per canonical field.
    index: HashMap<Field, usize>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn load(path: &Path, columns: &[Column]) -> Result<Table> {
        let csv_err = |line: u64, message: String| Error::Csv {
            file: path.to_path_buf(),
            line,
            message,
        };
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| csv_err(1, e.to_string()))?;
        let header: Vec<String> = r
            .headers()
            .map_err(|e| csv_err(1, e.to_string()))?
            .iter()
            .map(|h| h.trim_start_matches('\u{feff}').to_string())
            .collect();
        let mut index = HashMap::new();
        for c in columns {
            match header.iter().position(|h| h == &c.native) {
                Some(i) => {
                    index.insert(c.field, i);
                }
                None if c.required => return Err(csv_err(1, format!("missing column {:?}", c.native))),
                None => {}
            }
        }
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                csv_err(line, e.to_string())
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            rows.push((line, rec));
        }
        Ok(Table {
            path: path.to_path_buf(),
            index,
            rows,
        })
    }

    fn err(&self, line: u64, message: String) -> Error {
        Error::Csv {
            file: self.path.clone(),
            line,
            message,
        }
    }

    fn text<'a>(&self, row: &'a csv::StringRecord, f: Field) -> Option<&'a str> {
        self.index.get(&f).and_then(|&i| row.get(i)).filter(|s| !s.is_empty())
    }

    fn opt_f64(&self, line: u64, row: &csv::StringRecord, f: Field) -> Result<Option<f64>> {
        match self.text(row, f) {
            None => Ok(None),
            Some(s) => {
                let v: f64 = s
                    .parse()
                    .map_err(|_| self.err(line, format!("non-numeric {f:?} cell {s:?}")))?;
                if !v.is_finite() {
                    return Err(self.err(line, format!("non-finite {f:?} cell {s:?}")));
                }
                Ok(Some(v))
            }
        }
    }

    fn f64(&self, line: u64, row: &csv::StringRecord, f: Field) -> Result<f64> {
        self.opt_f64(line, row, f)?
            .ok_or_else(|| self.err(line, format!("empty {f:?} cell")))
    }

    fn int(&self, line: u64, row: &csv::StringRecord, f: Field) -> Result<i64> {
        let s = self
            .text(row, f)
            .ok_or_else(|| self.err(line, format!("empty {f:?} cell")))?;
        parse_int(s).ok_or_else(|| self.err(line, format!("non-integer {f:?} cell {s:?}")))
    }

    fn track_id(&self, line: u64, row: &csv::StringRecord) -> Result<i64> {
        let s = self
            .text(row, Field::TrackId)
            .ok_or_else(|| self.err(line, "empty track id".into()))?;
        parse_track_id(s).ok_or_else(|| self.err(line, format!("malformed track id {s:?}")))
    }
}

/// Integer cell, accepting integral floats such as `"12.0"`.
fn parse_int(s: &str) -> Option<i64> {
    if let Ok(v) = s.parse::<i64>() {
        return Some(v);
    }
    let f: f64 = s.parse().ok()?;
    (f.fract() == 0.0 && f.abs() < 9.0e15).then_some(f as i64)
}

fn parse_track_id(s: &str) -> Option<i64> {
    match s.strip_prefix(['P', 'p']) {
        Some(rest) => parse_int(rest).map(|v| v + PEDESTRIAN_ID_OFFSET),
        None => parse_int(s),
    }
}

fn parse_markings(table: &Table, line: u64, s: &str) -> Result<Vec<f64>> {
    s.split(';')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| table.err(line, format!("malformed lane marking {t:?}")))
        })
        .collect()
}

#[derive(Debug, Clone)]
struct Row {
    line: u64,
    file: usize,
    case: Option<i64>,
    track: i64,
    frame: i64,
    t_ms: Option<f64>,
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
    ax: Option<f64>,
    ay: Option<f64>,
    heading: Option<f64>,
    lane: Option<i64>,
    lane_change: bool,
    class: Option<AgentClass>,
}

struct TrackMeta {
    class: Option<AgentClass>,
    direction: Option<u8>,
}

#[derive(Default)]
struct RecordingMeta {
    rate: Option<f64>,
    location: Option<String>,
    upper: Vec<f64>,
    lower: Vec<f64>,
    utm: Option<(f64, f64)>,
    latlon: Option<(f64, f64)>,
}

fn read_track_meta(desc: &DatasetDescriptor, files: &RecordingFiles) -> Result<HashMap<i64, TrackMeta>> {
    let mut out = HashMap::new();
    for path in &files.tracks_meta {
        let t = Table::load(path, &desc.track_meta_columns)?;
        for (line, row) in &t.rows {
            let id = t.track_id(*line, row)?;
            let class = t.text(row, Field::Class).map(|c| desc.map_class(c)).transpose().map_err(|e| t.err(*line, e.to_string()))?;
            let direction = match t.text(row, Field::Direction) {
                None => None,
                Some(s) => Some(
                    parse_int(s)
                        .and_then(|v| u8::try_from(v).ok())
                        .ok_or_else(|| t.err(*line, format!("malformed direction {s:?}")))?,
                ),
            };
            out.insert(id, TrackMeta { class, direction });
        }
    }
    Ok(out)
}

fn read_recording_meta(desc: &DatasetDescriptor, files: &RecordingFiles) -> Result<RecordingMeta> {
    let Some(path) = &files.recording_meta else {
        return Ok(RecordingMeta::default());
    };
    let t = Table::load(path, &desc.recording_meta_columns)?;
    let Some((line, row)) = t.rows.first() else {
        return Err(t.err(2, "recording metadata has no rows".into()));
    };
    let line = *line;
    let markings = |f| -> Result<Vec<f64>> {
        t.text(row, f).map_or(Ok(Vec::new()), |s| parse_markings(&t, line, s))
    };
    let pair = |a, b| -> Result<Option<(f64, f64)>> {
        Ok(match (t.opt_f64(line, row, a)?, t.opt_f64(line, row, b)?) {
            (Some(a), Some(b)) => Some((a, b)),
            _ => None,
        })
    };
    Ok(RecordingMeta {
        rate: t.opt_f64(line, row, Field::FrameRate)?,
        location: t.text(row, Field::LocationId).map(str::to_string),
        upper: markings(Field::UpperMarkings)?,
        lower: markings(Field::LowerMarkings)?,
        utm: pair(Field::UtmEasting, Field::UtmNorthing)?,
        latlon: pair(Field::Latitude, Field::Longitude)?,
    })
}

fn read_rows(desc: &DatasetDescriptor, tables: &[Table]) -> Result<Vec<Row>> {
    let mut out = Vec::new();
    for (fi, t) in tables.iter().enumerate() {
        out.reserve(t.rows.len());
        for (line, row) in &t.rows {
            let line = *line;
            let mut x = t.f64(line, row, Field::X)?;
            let mut y = t.f64(line, row, Field::Y)?;
            if desc.position == PositionRef::TopLeft {
                x += t.f64(line, row, Field::Width)? / 2.0;
                y += t.f64(line, row, Field::Height)? / 2.0;
            }
            let heading = t.opt_f64(line, row, Field::Heading)?.map(|h| match desc.heading_unit {
                AngleUnit::Radians => h,
                AngleUnit::Degrees => h.to_radians(),
            });
            let lane = match t.text(row, Field::LaneId) {
                None => None,
                Some(s) => {
                    let first = s.split(';').next().unwrap_or("").trim();
                    Some(parse_int(first).ok_or_else(|| t.err(line, format!("malformed lane id {s:?}")))?)
                }
            };
            let lane_change = match t.text(row, Field::LaneChange) {
                None => false,
                Some(s) => parse_int(s).ok_or_else(|| t.err(line, format!("malformed lane-change flag {s:?}")))? != 0,
            };
            let class = t
                .text(row, Field::Class)
                .map(|c| desc.map_class(c))
                .transpose()
                .map_err(|e| t.err(line, e.to_string()))?;
            out.push(Row {
                line,
                file: fi,
                case: t.index.contains_key(&Field::CaseId).then(|| t.int(line, row, Field::CaseId)).transpose()?,
                track: t.track_id(line, row)?,
                frame: t.int(line, row, Field::Frame)?,
                t_ms: t.opt_f64(line, row, Field::TimestampMs)?,
                x,
                y,
                vx: t.f64(line, row, Field::Vx)?,
                vy: t.f64(line, row, Field::Vy)?,
                ax: t.opt_f64(line, row, Field::Ax)?,
                ay: t.opt_f64(line, row, Field::Ay)?,
                heading,
                lane,
                lane_change,
                class,
            });
        }
    }
    Ok(out)
}

/// Median source rate implied by timestamps, rounded to 1 mHz.
fn rate_from_timestamps(groups: &BTreeMap<(Option<i64>, i64), Vec<Row>>) -> Option<f64> {
    let mut dts: Vec<f64> = groups
        .values()
        .flat_map(|rows| rows.windows(2))
        .filter_map(|w| {
            let (a, b) = (w[0].t_ms?, w[1].t_ms?);
            let df = (w[1].frame - w[0].frame) as f64;
            (df > 0.0 && b > a).then(|| (b - a) / df)
        })
        .collect();
    if dts.is_empty() {
        return None;
    }
    dts.sort_by(f64::total_cmp);
    let dt = dts[dts.len() / 2];
    Some((1000.0 / dt * 1000.0).round() / 1000.0)
}

struct Builder<'a> {
    desc: &'a DatasetDescriptor,
    opts: &'a IngestOptions,
    tables: &'a [Table],
    meta: &'a HashMap<i64, TrackMeta>,
    tally: FileTally,
}

impl Builder<'_> {
    fn trajectories(&mut self, track: i64, rows: &[Row], frame_base: i64, rate_hz: f64) -> Result<Vec<Trajectory>> {
        let err = |r: &Row, m: String| self.tables[r.file].err(r.line, m);
        for w in rows.windows(2) {
            if w[1].frame <= w[0].frame {
                return Err(err(
                    &w[1],
                    format!("frame {} does not follow frame {} of track {track}", w[1].frame, w[0].frame),
                ));
            }
        }
        let meta = self.meta.get(&track);
        let class = match rows[0].class.or(meta.and_then(|m| m.class)) {
            Some(c) => c,
            None => return Err(err(&rows[0], format!("no class for track {track}"))),
        };
        if let Some(r) = rows.iter().find(|r| r.class.is_some_and(|c| c != class)) {
            return Err(err(r, format!("track {track} changes class")));
        }
        let direction = meta.and_then(|m| m.direction);
        if self.desc.direction_split && direction.is_none() {
            return Err(err(&rows[0], format!("no driving direction for track {track}")));
        }
        let flip = self.desc.position == PositionRef::TopLeft;
        let counted_lanes = self.desc.column(Field::LaneChange).is_some();

        let mut parts: Vec<&[Row]> = Vec::new();
        let mut start = 0;
        for i in 1..rows.len() {
            if rows[i].frame != rows[i - 1].frame + 1 {
                parts.push(&rows[start..i]);
                start = i;
            }
        }
        parts.push(&rows[start..]);
        if parts.len() > 1 {
            self.tally.gap_splits += 1;
        }

        let mut lane_counter = 0i64;
        let mut out = Vec::with_capacity(parts.len());
        for (k, part) in parts.iter().enumerate() {
            let s = if flip { -1.0 } else { 1.0 };
            let mut points: Vec<TrackPoint> = part
                .iter()
                .map(|r| {
                    if r.lane_change {
                        lane_counter += 1;
                    }
                    TrackPoint {
                        frame: r.frame - frame_base,
                        x: r.x,
                        y: s * r.y,
                        vx: r.vx,
                        vy: s * r.vy,
                        psi: r.heading.map_or(0.0, wrap_unchecked),
                        ax: r.ax,
                        ay: r.ay.map(|a| s * a),
                        lane_id: if counted_lanes { Some(lane_counter) } else { r.lane },
                    }
                })
                .collect();
            let native = self.desc.has_heading && part.iter().all(|r| r.heading.is_some());
            if !native {
                let v: Vec<(f64, f64)> = points.iter().map(|p| (p.vx, p.vy)).collect();
                for (p, h) in points.iter_mut().zip(estimate_headings(&v, self.opts.heading_speed_floor)?) {
                    p.psi = h;
                }
                self.tally.derived_heading += 1;
            }
            let agent_id = if parts.len() > 1 {
                AgentId::with_part(track, k as u32)
            } else {
                AgentId::new(track)
            };
            out.push(Trajectory {
                agent_id,
                class,
                points,
                rate_hz,
                heading: if native { HeadingSource::Native } else { HeadingSource::Derived },
                direction,
            });
        }
        Ok(out)
    }
}

fn location_from_stem(stem: &str) -> String {
    for suffix in ["_train", "_val", "_test", "_obs"] {
        if let Some(s) = stem.strip_suffix(suffix) {
            return location_from_stem(s);
        }
    }
    stem.to_string()
}

/// Read one file set. Split-directory layouts yield one recording per case.
pub fn read_recording_files(
    desc: &DatasetDescriptor,
    files: &RecordingFiles,
    opts: &IngestOptions,
) -> Result<(Vec<Recording>, FileTally)> {
    let tables = files
        .tracks
        .iter()
        .map(|p| Table::load(p, &desc.track_columns))
        .collect::<Result<Vec<_>>>()?;
    let meta = read_track_meta(desc, files)?;
    let rec_meta = read_recording_meta(desc, files)?;
    let rows = read_rows(desc, &tables)?;
    let row_count = rows.len();

    let mut groups: BTreeMap<(Option<i64>, i64), Vec<Row>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.case, r.track)).or_default().push(r);
    }
    let rec_err = |m: String| Error::Recording {
        recording: files.recording_id.clone(),
        message: m,
    };
    let rate_hz = match desc.rate {
        RateSource::Fixed { hz } => hz,
        RateSource::Meta => rec_meta
            .rate
            .ok_or_else(|| rec_err("recording metadata lacks a frame rate".into()))?,
        RateSource::Timestamps => rate_from_timestamps(&groups)
            .ok_or_else(|| rec_err("cannot infer a frame rate from timestamps".into()))?,
    };
    if !(rate_hz > 0.0) {
        return Err(rec_err(format!("frame rate {rate_hz} Hz")));
    }

    let mut by_case: BTreeMap<Option<i64>, Vec<(i64, Vec<Row>)>> = BTreeMap::new();
    for ((case, track), rows) in groups {
        by_case.entry(case).or_default().push((track, rows));
    }
    let location_id = rec_meta
        .location
        .clone()
        .or_else(|| desc.default_location.clone())
        .unwrap_or_else(|| match desc.layout {
            Layout::SplitDirectories => location_from_stem(&files.recording_id),
            _ => files.recording_id.clone(),
        });
    let geo_origin = rec_meta.utm.map(|(e, n)| GeoOrigin {
        easting: e,
        northing: n,
        lat: rec_meta.latlon.map(|p| p.0),
        lon: rec_meta.latlon.map(|p| p.1),
    });

    let mut b = Builder {
        desc,
        opts,
        tables: &tables,
        meta: &meta,
        tally: FileTally {
            rows: row_count,
            ..FileTally::default()
        },
    };
    let mut out = Vec::new();
    for (case, tracks) in by_case {
        let lo = tracks.iter().flat_map(|(_, r)| r.iter().map(|r| r.frame)).min().unwrap_or(0);
        let hi = tracks.iter().flat_map(|(_, r)| r.iter().map(|r| r.frame)).max().unwrap_or(-1);
        let mut trajectories = Vec::new();
        for (track, rows) in &tracks {
            trajectories.extend(b.trajectories(*track, rows, lo, rate_hz)?);
        }
        let lane_markings = if desc.direction_split {
            if rec_meta.upper.is_empty() && rec_meta.lower.is_empty() {
                return Err(rec_err("no lane markings".into()));
            }
            let (x0, x1) = trajectories
                .iter()
                .flat_map(|t| t.points.iter().map(|p| p.x))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
            let group = |direction: u8, ys: &[f64]| {
                let mut y: Vec<f64> = ys.iter().map(|v| -v).collect();
                y.sort_by(f64::total_cmp);
                MarkingGroup {
                    direction,
                    y,
                    x_range: (x0, x1),
                }
            };
            vec![group(1, &rec_meta.upper), group(2, &rec_meta.lower)]
        } else {
            Vec::new()
        };
        let recording_id = match case {
            Some(c) => format!("{}-c{c}", files.recording_id),
            None => files.recording_id.clone(),
        };
        let rec = Recording {
            recording_id,
            dataset: desc.name.clone(),
            rate_hz,
            frame_count: hi - lo + 1,
            location_id: location_id.clone(),
            geo_origin,
            trajectories,
            frame_stride: 1,
            lane_markings,
            origin_shift: [0.0, 0.0],
            predefined_split: files.split,
            normalized: false,
        };
        rec.validate()?;
        out.push(rec);
    }
    Ok((out, b.tally))
}
