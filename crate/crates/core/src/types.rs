//! Domain types shared by every stage: agent classes and identifiers,
//! track points, trajectories and recordings.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Common agent-class vocabulary. The discriminant is the class token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum AgentClass {
    Car = 0,
    Truck = 1,
    Bus = 2,
    Motorcycle = 3,
    Bicycle = 4,
    Pedestrian = 5,
    Tricycle = 6,
    VruOther = 7,
}

impl AgentClass {
    pub const ALL: [AgentClass; 8] = [
        AgentClass::Car,
        AgentClass::Truck,
        AgentClass::Bus,
        AgentClass::Motorcycle,
        AgentClass::Bicycle,
        AgentClass::Pedestrian,
        AgentClass::Tricycle,
        AgentClass::VruOther,
    ];

    pub fn token(self) -> u8 {
        self as u8
    }

    pub fn from_token(token: u8) -> Result<Self> {
        Self::ALL
            .get(token as usize)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("agent class token {token} not in 0..=7")))
    }

    pub fn name(self) -> &'static str {
        match self {
            AgentClass::Car => "car",
            AgentClass::Truck => "truck",
            AgentClass::Bus => "bus",
            AgentClass::Motorcycle => "motorcycle",
            AgentClass::Bicycle => "bicycle",
            AgentClass::Pedestrian => "pedestrian",
            AgentClass::Tricycle => "tricycle",
            AgentClass::VruOther => "vru_other",
        }
    }
}

/// Recording-unique agent identifier.
///
/// `part` is set when a raw track had frame gaps and was split at ingest;
/// it renders as `"<track>#<part>"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentId {
    pub track: i64,
    pub part: Option<u32>,
}

impl AgentId {
    pub fn new(track: i64) -> Self {
        Self { track, part: None }
    }

    pub fn with_part(track: i64, part: u32) -> Self {
        Self {
            track,
            part: Some(part),
        }
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.part {
            Some(p) => write!(f, "{}#{}", self.track, p),
            None => write!(f, "{}", self.track),
        }
    }
}

impl FromStr for AgentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("malformed agent id {s:?}"));
        match s.split_once('#') {
            Some((t, p)) => Ok(AgentId::with_part(
                t.parse().map_err(|_| bad())?,
                p.parse().map_err(|_| bad())?,
            )),
            None => Ok(AgentId::new(s.parse().map_err(|_| bad())?)),
        }
    }
}

impl Serialize for AgentId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AgentId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One kinematic state sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub frame: i64,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub psi: f64,
    pub ax: Option<f64>,
    pub ay: Option<f64>,
    pub lane_id: Option<i64>,
}

impl TrackPoint {
    pub fn is_finite(&self) -> bool {
        [self.x, self.y, self.vx, self.vy, self.psi]
            .iter()
            .chain(self.ax.iter())
            .chain(self.ay.iter())
            .all(|v| v.is_finite())
    }

    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }
}

/// Where a trajectory's heading channel came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadingSource {
    Native,
    /// Estimated from velocities; recomputed rather than filtered downstream.
    Derived,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub agent_id: AgentId,
    pub class: AgentClass,
    pub points: Vec<TrackPoint>,
    pub rate_hz: f64,
    pub heading: HeadingSource,
    /// Travel-direction group for direction-split datasets (highD's
    /// `drivingDirection`), `None` elsewhere.
    pub direction: Option<u8>,
}

impl Trajectory {
    pub fn first_frame(&self) -> i64 {
        self.points[0].frame
    }

    pub fn last_frame(&self) -> i64 {
        self.points[self.points.len() - 1].frame
    }

    /// Point at an absolute frame, if the agent is present.
    pub fn at_frame(&self, frame: i64) -> Option<&TrackPoint> {
        let first = self.points.first()?.frame;
        let idx = frame.checked_sub(first)?;
        if idx < 0 {
            return None;
        }
        self.points.get(idx as usize)
    }

    /// Check non-emptiness, unit frame stride and finiteness.
    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "trajectory {} is empty",
                self.agent_id
            )));
        }
        for w in self.points.windows(2) {
            if w[1].frame != w[0].frame + 1 {
                return Err(Error::InvalidArgument(format!(
                    "trajectory {} has non-unit frame step {} -> {}",
                    self.agent_id, w[0].frame, w[1].frame
                )));
            }
        }
        if !self.points.iter().all(TrackPoint::is_finite) {
            return Err(Error::NonFinite("trajectory point"));
        }
        Ok(())
    }
}

/// Upper/lower lane-marking lines of a direction-split highway recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkingGroup {
    pub direction: u8,
    /// Lateral positions of the marking lines, meters.
    pub y: Vec<f64>,
    /// Longitudinal extent of the road segment, meters.
    pub x_range: (f64, f64),
}

/// Georeference of a recording's local frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoOrigin {
    pub easting: f64,
    pub northing: f64,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(Error::InvalidArgument(format!("unknown split {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub recording_id: String,
    pub dataset: String,
    pub rate_hz: f64,
    pub frame_count: i64,
    pub location_id: String,
    pub geo_origin: Option<GeoOrigin>,
    pub trajectories: Vec<Trajectory>,
    /// Source frames per frame index of this recording (1 at source rate,
    /// the decimation factor after resampling).
    pub frame_stride: i64,
    pub lane_markings: Vec<MarkingGroup>,
    /// Translation already subtracted from all positions by normalization.
    pub origin_shift: [f64; 2],
    /// Split dictated by the dataset itself (INTERACTION).
    pub predefined_split: Option<Split>,
    /// Set once coordinates have been normalized.
    pub normalized: bool,
}

impl Recording {
    pub fn validate(&self) -> Result<()> {
        let err = |message: String| Error::Recording {
            recording: self.recording_id.clone(),
            message,
        };
        if !(self.rate_hz > 0.0) || !self.rate_hz.is_finite() {
            return Err(err(format!("rate {} Hz is not positive", self.rate_hz)));
        }
        for t in &self.trajectories {
            t.validate()?;
            if t.first_frame() < 0 || t.last_frame() >= self.frame_count {
                return Err(err(format!(
                    "trajectory {} frames [{}, {}] outside [0, {})",
                    t.agent_id,
                    t.first_frame(),
                    t.last_frame(),
                    self.frame_count
                )));
            }
        }
        Ok(())
    }

    pub fn point_count(&self) -> usize {
        self.trajectories.iter().map(|t| t.points.len()).sum()
    }

    pub fn trajectory(&self, id: AgentId) -> Option<&Trajectory> {
        self.trajectories.iter().find(|t| t.agent_id == id)
    }
}
