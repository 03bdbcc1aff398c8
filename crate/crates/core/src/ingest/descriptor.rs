//! Dataset adapter tables.
//!
//! Every supported dataset is described by a [`DatasetDescriptor`]: where
//! its files live, which native columns feed which canonical fields, how
//! native class strings map onto [`AgentClass`], and a handful of flags for
//! coordinate conventions. Adding a dataset variant means adding a table
//! (or loading one from JSON), not writing a new reader.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::AgentClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Highway,
    Urban,
    Interaction,
}

/// Canonical fields a native column can feed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    TrackId,
    Frame,
    CaseId,
    TimestampMs,
    X,
    Y,
    Vx,
    Vy,
    Ax,
    Ay,
    Heading,
    /// Lane identifier; a `;`-separated list keeps its first entry.
    LaneId,
    /// Per-frame lane-change flag; lane ids are synthesized by counting.
    LaneChange,
    /// Bounding-box extent along x (used with [`PositionRef::TopLeft`]).
    Width,
    /// Bounding-box extent along y.
    Height,
    Class,
    Direction,
    FrameRate,
    LocationId,
    UpperMarkings,
    LowerMarkings,
    UtmEasting,
    UtmNorthing,
    Latitude,
    Longitude,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub native: String,
    pub field: Field,
    #[serde(default = "yes")]
    pub required: bool,
}

fn yes() -> bool {
    true
}

/// How recordings are laid out on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layout {
    /// `NN_<tracks>`, `NN_<tracks_meta>`, `NN_<recording_meta>` side by side;
    /// `NN` is the recording id.
    Numbered {
        tracks: String,
        tracks_meta: Option<String>,
        recording_meta: Option<String>,
    },
    /// One directory per recording holding fixed file names; the first
    /// entry of `tracks` must exist, the others are optional.
    PerDirectory {
        tracks: Vec<String>,
        tracks_meta: Vec<String>,
    },
    /// Split directories (`train`, `val`, `test`) of per-location CSVs, each
    /// grouped into independent cases by [`Field::CaseId`].
    SplitDirectories,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateSource {
    Fixed { hz: f64 },
    /// Recording-metadata column mapped to [`Field::FrameRate`].
    Meta,
    /// Median spacing of [`Field::TimestampMs`].
    Timestamps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionRef {
    Center,
    /// Position is the top-left corner of the bounding box in image-like
    /// axes (y down).
    TopLeft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleUnit {
    Radians,
    Degrees,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub name: String,
    pub family: Family,
    pub layout: Layout,
    pub track_columns: Vec<Column>,
    #[serde(default)]
    pub track_meta_columns: Vec<Column>,
    #[serde(default)]
    pub recording_meta_columns: Vec<Column>,
    pub class_map: Vec<(String, AgentClass)>,
    pub rate: RateSource,
    pub has_lanelet: bool,
    pub has_heading: bool,
    pub heading_unit: AngleUnit,
    pub predefined_splits: bool,
    pub position: PositionRef,
    /// Two travel directions with per-direction lane markings (highD).
    #[serde(default)]
    pub direction_split: bool,
    /// Location used when the files carry none.
    #[serde(default)]
    pub default_location: Option<String>,
    /// Lower-case path tokens that point at this dataset; used only to break
    /// ties between descriptors with identical file evidence.
    #[serde(default)]
    pub dir_hints: Vec<String>,
    /// Schema not verified against published documentation.
    #[serde(default)]
    pub provisional: bool,
}

impl DatasetDescriptor {
    /// Look up a native class string (case-insensitive).
    pub fn map_class(&self, native: &str) -> Result<AgentClass> {
        let key = native.trim();
        self.class_map
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(key))
            .map(|(_, c)| *c)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "{}: unmapped agent class {native:?}",
                    self.name
                ))
            })
    }

    pub fn column(&self, field: Field) -> Option<&Column> {
        self.track_columns
            .iter()
            .chain(&self.track_meta_columns)
            .chain(&self.recording_meta_columns)
            .find(|c| c.field == field)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(format!("descriptor {}: {m}", self.name)));
        for f in [Field::TrackId, Field::Frame, Field::X, Field::Y, Field::Vx, Field::Vy] {
            if !self.track_columns.iter().any(|c| c.field == f && c.required) {
                return bad(format!("tracks need a required {f:?} column"));
            }
        }
        if self.column(Field::Class).is_none() {
            return bad("no class column".into());
        }
        if self.class_map.is_empty() {
            return bad("empty class map".into());
        }
        for (i, (k, c)) in self.class_map.iter().enumerate() {
            if self.class_map[..i]
                .iter()
                .any(|(k2, c2)| k2.eq_ignore_ascii_case(k) && c2 != c)
            {
                return bad(format!("class {k:?} mapped twice"));
            }
        }
        match self.rate {
            RateSource::Fixed { hz } if !(hz > 0.0 && hz.is_finite()) => {
                return bad(format!("rate {hz} Hz"));
            }
            RateSource::Meta if self.column(Field::FrameRate).is_none() => {
                return bad("rate from metadata without a frame-rate column".into());
            }
            RateSource::Timestamps if self.column(Field::TimestampMs).is_none() => {
                return bad("rate from timestamps without a timestamp column".into());
            }
            _ => {}
        }
        if self.position == PositionRef::TopLeft
            && (self.column(Field::Width).is_none() || self.column(Field::Height).is_none())
        {
            return bad("top-left positions need width and height".into());
        }
        if self.direction_split && self.column(Field::Direction).is_none() {
            return bad("direction split without a direction column".into());
        }
        if matches!(self.layout, Layout::SplitDirectories) != self.predefined_splits {
            return bad("split directories and predefined splits go together".into());
        }
        if self.predefined_splits && self.column(Field::CaseId).is_none() {
            return bad("split directories need a case id column".into());
        }
        Ok(())
    }
}

fn cols(spec: &[(&str, Field, bool)]) -> Vec<Column> {
    spec.iter()
        .map(|&(n, f, r)| Column {
            native: n.to_string(),
            field: f,
            required: r,
        })
        .collect()
}

fn classes(spec: &[(&str, AgentClass)]) -> Vec<(String, AgentClass)> {
    spec.iter().map(|&(k, c)| (k.to_string(), c)).collect()
}

fn numbered() -> Layout {
    Layout::Numbered {
        tracks: "tracks.csv".into(),
        tracks_meta: Some("tracksMeta.csv".into()),
        recording_meta: Some("recordingMeta.csv".into()),
    }
}

fn highd() -> DatasetDescriptor {
    use Field::*;
    DatasetDescriptor {
        name: "highD".into(),
        family: Family::Highway,
        layout: numbered(),
        track_columns: cols(&[
            ("id", TrackId, true),
            ("frame", Frame, true),
            ("x", X, true),
            ("y", Y, true),
            ("width", Width, true),
            ("height", Height, true),
            ("xVelocity", Vx, true),
            ("yVelocity", Vy, true),
            ("xAcceleration", Ax, false),
            ("yAcceleration", Ay, false),
            ("laneId", LaneId, true),
        ]),
        track_meta_columns: cols(&[
            ("id", TrackId, true),
            ("class", Class, true),
            ("drivingDirection", Direction, true),
        ]),
        recording_meta_columns: cols(&[
            ("frameRate", FrameRate, true),
            ("locationId", LocationId, true),
            ("upperLaneMarkings", UpperMarkings, true),
            ("lowerLaneMarkings", LowerMarkings, true),
        ]),
        class_map: classes(&[("Car", AgentClass::Car), ("Truck", AgentClass::Truck)]),
        rate: RateSource::Meta,
        has_lanelet: false,
        has_heading: false,
        heading_unit: AngleUnit::Radians,
        predefined_splits: false,
        position: PositionRef::TopLeft,
        direction_split: true,
        default_location: None,
        dir_hints: vec!["highd".into()],
        provisional: false,
    }
}

/// Column set shared by the drone datasets recorded with georeferenced
/// lanelet maps.
fn levelx_urban_tracks(extra: &[(&str, Field, bool)]) -> Vec<Column> {
    use Field::*;
    let mut c = cols(&[
        ("trackId", TrackId, true),
        ("frame", Frame, true),
        ("xCenter", X, true),
        ("yCenter", Y, true),
        ("heading", Heading, true),
        ("xVelocity", Vx, true),
        ("yVelocity", Vy, true),
        ("xAcceleration", Ax, false),
        ("yAcceleration", Ay, false),
    ]);
    c.extend(cols(extra));
    c
}

fn levelx_meta() -> (Vec<Column>, Vec<Column>) {
    use Field::*;
    (
        cols(&[("trackId", TrackId, true), ("class", Class, true)]),
        cols(&[
            ("frameRate", FrameRate, true),
            ("locationId", LocationId, true),
            ("xUtmOrigin", UtmEasting, false),
            ("yUtmOrigin", UtmNorthing, false),
            ("latLocation", Latitude, false),
            ("lonLocation", Longitude, false),
        ]),
    )
}

fn levelx(name: &str, family: Family, classes_: &[(&str, AgentClass)], extra: &[(&str, Field, bool)]) -> DatasetDescriptor {
    let (track_meta_columns, recording_meta_columns) = levelx_meta();
    DatasetDescriptor {
        name: name.into(),
        family,
        layout: numbered(),
        track_columns: levelx_urban_tracks(extra),
        track_meta_columns,
        recording_meta_columns,
        class_map: classes(classes_),
        rate: RateSource::Meta,
        has_lanelet: true,
        has_heading: true,
        heading_unit: AngleUnit::Degrees,
        predefined_splits: false,
        position: PositionRef::Center,
        direction_split: false,
        default_location: None,
        dir_hints: vec![name.to_ascii_lowercase()],
        provisional: false,
    }
}

fn sind() -> DatasetDescriptor {
    use AgentClass as C;
    use Field::*;
    DatasetDescriptor {
        name: "SinD".into(),
        family: Family::Urban,
        layout: Layout::PerDirectory {
            tracks: vec!["Veh_smoothed_tracks.csv".into(), "Ped_smoothed_tracks.csv".into()],
            tracks_meta: vec![],
        },
        track_columns: cols(&[
            ("track_id", TrackId, true),
            ("frame_id", Frame, true),
            ("timestamp_ms", TimestampMs, true),
            ("agent_type", Class, true),
            ("x", X, true),
            ("y", Y, true),
            ("vx", Vx, true),
            ("vy", Vy, true),
            ("ax", Ax, false),
            ("ay", Ay, false),
            ("heading_rad", Heading, false),
        ]),
        track_meta_columns: vec![],
        recording_meta_columns: vec![],
        class_map: classes(&[
            ("car", C::Car),
            ("truck", C::Truck),
            ("bus", C::Bus),
            ("motorcycle", C::Motorcycle),
            ("bicycle", C::Bicycle),
            ("tricycle", C::Tricycle),
            ("pedestrian", C::Pedestrian),
        ]),
        rate: RateSource::Timestamps,
        has_lanelet: true,
        has_heading: true,
        heading_unit: AngleUnit::Radians,
        predefined_splits: false,
        position: PositionRef::Center,
        direction_split: false,
        default_location: Some("sind".into()),
        dir_hints: vec!["sind".into()],
        provisional: true,
    }
}

fn interaction() -> DatasetDescriptor {
    use Field::*;
    DatasetDescriptor {
        name: "INTERACTION".into(),
        family: Family::Interaction,
        layout: Layout::SplitDirectories,
        track_columns: cols(&[
            ("case_id", CaseId, true),
            ("track_id", TrackId, true),
            ("frame_id", Frame, true),
            ("timestamp_ms", TimestampMs, false),
            ("agent_type", Class, true),
            ("x", X, true),
            ("y", Y, true),
            ("vx", Vx, true),
            ("vy", Vy, true),
            ("psi_rad", Heading, false),
        ]),
        track_meta_columns: vec![],
        recording_meta_columns: vec![],
        class_map: classes(&[
            ("car", AgentClass::Car),
            ("pedestrian/bicycle", AgentClass::VruOther),
        ]),
        rate: RateSource::Fixed { hz: 10.0 },
        has_lanelet: true,
        has_heading: true,
        heading_unit: AngleUnit::Radians,
        predefined_splits: true,
        position: PositionRef::Center,
        direction_split: false,
        default_location: None,
        dir_hints: vec!["interaction".into()],
        provisional: false,
    }
}

/// The shipped adapter tables.
pub fn builtin_descriptors() -> Vec<DatasetDescriptor> {
    use AgentClass as C;
    use Field::*;
    let mut exid = levelx(
        "exiD",
        Family::Highway,
        &[
            ("car", C::Car),
            ("van", C::Car),
            ("truck", C::Truck),
            ("trailer", C::Truck),
            ("bus", C::Bus),
            ("motorcycle", C::Motorcycle),
        ],
        &[("laneChange", LaneChange, true)],
    );
    exid.provisional = true;
    let mut isac = levelx(
        "iSAC",
        Family::Highway,
        &[
            ("car", C::Car),
            ("van", C::Car),
            ("truck", C::Truck),
            ("trailer", C::Truck),
            ("bus", C::Bus),
            ("motorcycle", C::Motorcycle),
        ],
        &[("laneId", LaneId, true)],
    );
    isac.provisional = true;
    vec![
        highd(),
        levelx(
            "rounD",
            Family::Urban,
            &[
                ("car", C::Car),
                ("van", C::Car),
                ("truck", C::Truck),
                ("trailer", C::Truck),
                ("bus", C::Bus),
                ("motorcycle", C::Motorcycle),
                ("bicycle", C::Bicycle),
                ("pedestrian", C::Pedestrian),
            ],
            &[],
        ),
        levelx(
            "inD",
            Family::Urban,
            &[
                ("car", C::Car),
                ("truck_bus", C::Bus),
                ("truck", C::Truck),
                ("bus", C::Bus),
                ("bicycle", C::Bicycle),
                ("pedestrian", C::Pedestrian),
            ],
            &[],
        ),
        exid,
        levelx(
            "uniD",
            Family::Urban,
            &[
                ("car", C::Car),
                ("van", C::Car),
                ("truck", C::Truck),
                ("trailer", C::Truck),
                ("truck_bus", C::Bus),
                ("bus", C::Bus),
                ("motorcycle", C::Motorcycle),
                ("bicycle", C::Bicycle),
                ("pedestrian", C::Pedestrian),
            ],
            &[],
        ),
        sind(),
        isac,
        interaction(),
    ]
}

/// Built-in descriptor by name (case-insensitive).
pub fn descriptor_by_name(name: &str) -> Result<DatasetDescriptor> {
    builtin_descriptors()
        .into_iter()
        .find(|d| d.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| {
            let known: Vec<String> = builtin_descriptors().into_iter().map(|d| d.name).collect();
            Error::InvalidArgument(format!("unknown dataset {name:?} (known: {})", known.join(", ")))
        })
}

/// Load a user-supplied adapter table.
pub fn descriptor_from_json(text: &str) -> Result<DatasetDescriptor> {
    let d: DatasetDescriptor = serde_json::from_str(text).map_err(|e| Error::json("adapter", e))?;
    d.validate()?;
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_tables_are_valid() {
        let all = builtin_descriptors();
        assert_eq!(all.len(), 8);
        for d in &all {
            d.validate().unwrap();
        }
    }

    #[test]
    fn flags_follow_dataset_facts() {
        let h = descriptor_by_name("highd").unwrap();
        assert!(!h.has_heading && !h.has_lanelet && h.direction_split);
        assert!(descriptor_by_name("INTERACTION").unwrap().predefined_splits);
        assert!(descriptor_by_name("nuScenes").is_err());
    }

    #[test]
    fn every_native_class_maps_to_one_token() {
        for d in builtin_descriptors() {
            for (k, c) in &d.class_map {
                let hits: Vec<_> = d
                    .class_map
                    .iter()
                    .filter(|(k2, _)| k2.eq_ignore_ascii_case(k))
                    .collect();
                assert!(hits.iter().all(|(_, c2)| c2 == c), "{} {k}", d.name);
                assert_eq!(d.map_class(&k.to_uppercase()).unwrap(), *c);
            }
            assert!(d.map_class("zeppelin").is_err());
        }
    }

    #[test]
    fn json_adapter_roundtrip() {
        let d = descriptor_by_name("rounD").unwrap();
        let text = serde_json::to_string(&d).unwrap();
        assert_eq!(descriptor_from_json(&text).unwrap(), d);
        let mut broken = d.clone();
        broken.track_columns.retain(|c| c.field != Field::Vx);
        let text = serde_json::to_string(&broken).unwrap();
        assert!(descriptor_from_json(&text).is_err());
    }
}
