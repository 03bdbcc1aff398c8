//! Raw dataset ingestion: detect the dataset, locate its recordings and
//! normalize them into [`Recording`](crate::types::Recording) values at
//! source rate (meters, m/s, radians, frames rebased to 0).

pub mod descriptor;
pub mod discover;
pub mod heading;
pub mod reader;

use std::path::Path;

use crate::error::Result;
use crate::exec::{try_map_ordered, Execution};
use crate::types::Recording;

pub use descriptor::{builtin_descriptors, descriptor_by_name, descriptor_from_json, DatasetDescriptor, Family};
pub use discover::{detect_dataset, discover, RecordingFiles};
pub use heading::{estimate_heading, estimate_headings, DEFAULT_HEADING_SPEED_FLOOR};
pub use reader::{read_recording_files, FileTally, IngestOptions};

#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct IngestReport {
    pub dataset: String,
    pub recordings: usize,
    /// CSV data rows read from track files.
    pub rows: usize,
    pub points: usize,
    /// Raw tracks split at frame gaps.
    pub gap_splits: usize,
    /// Trajectories whose heading was estimated from velocity.
    pub derived_heading: usize,
}

/// Read every recording of `desc` under `input_dir`, ordered by recording id.
pub fn read_dataset(
    input_dir: &Path,
    desc: &DatasetDescriptor,
    opts: &IngestOptions,
    exec: Execution,
) -> Result<(Vec<Recording>, IngestReport)> {
    let files = discover(input_dir, desc)?;
    let parts = try_map_ordered(exec, &files, |f| read_recording_files(desc, f, opts))?;
    let mut report = IngestReport {
        dataset: desc.name.clone(),
        ..IngestReport::default()
    };
    let mut recordings = Vec::new();
    for (recs, tally) in parts {
        report.rows += tally.rows;
        report.gap_splits += tally.gap_splits;
        report.derived_heading += tally.derived_heading;
        recordings.extend(recs);
    }
    recordings.sort_by(|a, b| a.recording_id.cmp(&b.recording_id));
    report.recordings = recordings.len();
    report.points = recordings.iter().map(Recording::point_count).sum();
    Ok((recordings, report))
}
