//! Locating recording files and detecting which dataset a directory holds.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::types::Split;

use super::descriptor::{builtin_descriptors, Column, DatasetDescriptor, Layout};

const MAX_DEPTH: usize = 3;

/// The files making up one recording (or, for split-directory layouts, one
/// file of independent cases).
#[derive(Debug, Clone, PartialEq)]
pub struct RecordingFiles {
    pub recording_id: String,
    pub tracks: Vec<PathBuf>,
    pub tracks_meta: Vec<PathBuf>,
    pub recording_meta: Option<PathBuf>,
    pub split: Option<Split>,
}

fn walk(dir: &Path, depth: usize, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            if depth < MAX_DEPTH {
                walk(&p, depth + 1, out)?;
            }
        } else {
            out.push(p);
        }
    }
    Ok(())
}

fn file_name(p: &Path) -> &str {
    p.file_name().and_then(|n| n.to_str()).unwrap_or("")
}

fn split_of_dir(name: &str) -> Option<Split> {
    let lower = name.to_ascii_lowercase();
    Split::ALL.into_iter().find(|s| lower.starts_with(s.name()))
}

/// Recording file sets for `desc` under `input_dir`, sorted by recording id.
pub fn discover(input_dir: &Path, desc: &DatasetDescriptor) -> Result<Vec<RecordingFiles>> {
    let mut files = Vec::new();
    walk(input_dir, 0, &mut files)?;
    let mut out = Vec::new();
    match &desc.layout {
        Layout::Numbered {
            tracks,
            tracks_meta,
            recording_meta,
        } => {
            for p in &files {
                let name = file_name(p);
                let Some(prefix) = name.strip_suffix(tracks.as_str()).and_then(|s| s.strip_suffix('_')) else {
                    continue;
                };
                if prefix.is_empty() || !prefix.bytes().all(|b| b.is_ascii_digit()) {
                    continue;
                }
                let sibling = |suffix: &Option<String>| {
                    suffix
                        .as_ref()
                        .map(|s| p.with_file_name(format!("{prefix}_{s}")))
                        .filter(|q| q.is_file())
                };
                out.push(RecordingFiles {
                    recording_id: prefix.to_string(),
                    tracks: vec![p.clone()],
                    tracks_meta: sibling(tracks_meta).into_iter().collect(),
                    recording_meta: sibling(recording_meta),
                    split: None,
                });
            }
        }
        Layout::PerDirectory { tracks, tracks_meta } => {
            let dirs: BTreeSet<&Path> = files
                .iter()
                .filter(|p| tracks.first().is_some_and(|t| file_name(p) == t))
                .filter_map(|p| p.parent())
                .collect();
            for d in dirs {
                let present = |names: &[String]| -> Vec<PathBuf> {
                    names.iter().map(|n| d.join(n)).filter(|p| p.is_file()).collect()
                };
                out.push(RecordingFiles {
                    recording_id: file_name(d).to_string(),
                    tracks: present(tracks),
                    tracks_meta: present(tracks_meta),
                    recording_meta: None,
                    split: None,
                });
            }
        }
        Layout::SplitDirectories => {
            for p in &files {
                if p.extension().and_then(|e| e.to_str()) != Some("csv") {
                    continue;
                }
                let Some(split) = p.parent().and_then(|d| split_of_dir(file_name(d))) else {
                    continue;
                };
                let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("").to_string();
                out.push(RecordingFiles {
                    recording_id: stem,
                    tracks: vec![p.clone()],
                    tracks_meta: Vec::new(),
                    recording_meta: None,
                    split: Some(split),
                });
            }
        }
    }
    out.sort_by(|a, b| (a.split, &a.recording_id).cmp(&(b.split, &b.recording_id)));
    for w in out.windows(2) {
        if w[0].recording_id == w[1].recording_id && w[0].split == w[1].split {
            return Err(Error::Detect(format!(
                "recording id {} found twice ({} and {})",
                w[0].recording_id,
                w[0].tracks[0].display(),
                w[1].tracks[0].display()
            )));
        }
    }
    Ok(out)
}

/// Header of a CSV file with a leading byte-order mark removed.
pub(crate) fn read_header(path: &Path) -> Result<Vec<String>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Csv {
            file: path.to_path_buf(),
            line: 1,
            message: e.to_string(),
        })?;
    let h = r.headers().map_err(|e| Error::Csv {
        file: path.to_path_buf(),
        line: 1,
        message: e.to_string(),
    })?;
    Ok(h.iter()
        .enumerate()
        .map(|(i, s)| {
            let s = if i == 0 { s.trim_start_matches('\u{feff}') } else { s };
            s.trim().to_string()
        })
        .collect())
}

/// How well one descriptor matched a directory.
#[derive(Debug, Clone)]
struct Evidence {
    recordings: usize,
    /// `role/column` strings that were found.
    matched: BTreeSet<String>,
    missing: Vec<String>,
}

fn check_columns(
    role: &str,
    path: Option<&Path>,
    columns: &[Column],
    matched: &mut BTreeSet<String>,
    missing: &mut Vec<String>,
) -> Result<()> {
    if columns.is_empty() {
        return Ok(());
    }
    let Some(path) = path else {
        if columns.iter().any(|c| c.required) {
            missing.push(format!("{role} file"));
        }
        return Ok(());
    };
    let header = read_header(path)?;
    for c in columns {
        if header.iter().any(|h| h == &c.native) {
            matched.insert(format!("{role}/{}", c.native));
        } else if c.required {
            missing.push(format!("{role}/{}", c.native));
        }
    }
    Ok(())
}

fn evidence(input_dir: &Path, desc: &DatasetDescriptor) -> Result<Option<Evidence>> {
    let recs = discover(input_dir, desc)?;
    let Some(first) = recs.first() else {
        return Ok(None);
    };
    let mut matched = BTreeSet::new();
    let mut missing = Vec::new();
    check_columns("tracks", first.tracks.first().map(PathBuf::as_path), &desc.track_columns, &mut matched, &mut missing)?;
    check_columns("tracks_meta", first.tracks_meta.first().map(PathBuf::as_path), &desc.track_meta_columns, &mut matched, &mut missing)?;
    check_columns("recording_meta", first.recording_meta.as_deref(), &desc.recording_meta_columns, &mut matched, &mut missing)?;
    Ok(Some(Evidence {
        recordings: recs.len(),
        matched,
        missing,
    }))
}

fn path_tokens(p: &Path) -> BTreeSet<String> {
    let abs = p.canonicalize().unwrap_or_else(|_| p.to_path_buf());
    abs.to_string_lossy()
        .to_ascii_lowercase()
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Pick the unique descriptor among `candidates` whose file patterns and
/// header columns match `input_dir`.
pub fn detect_among(input_dir: &Path, candidates: &[DatasetDescriptor]) -> Result<DatasetDescriptor> {
    if !input_dir.is_dir() {
        return Err(Error::io(
            input_dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        ));
    }
    let mut partial = Vec::new();
    let mut full: Vec<(&DatasetDescriptor, Evidence)> = Vec::new();
    for d in candidates {
        if let Some(ev) = evidence(input_dir, d)? {
            if ev.missing.is_empty() {
                full.push((d, ev));
            } else {
                partial.push(format!(
                    "{}: {} recording(s), missing {}",
                    d.name,
                    ev.recordings,
                    ev.missing.join(", ")
                ));
            }
        }
    }
    if full.is_empty() {
        let detail = if partial.is_empty() {
            String::new()
        } else {
            format!(" ({})", partial.join("; "))
        };
        return Err(Error::Detect(format!(
            "no recognizable recordings in {}{detail}",
            input_dir.display()
        )));
    }
    // A descriptor whose evidence is strictly contained in another's is the
    // less specific reading of the same files.
    let keep: Vec<usize> = (0..full.len())
        .filter(|&i| {
            !full.iter().enumerate().any(|(j, (_, e))| {
                j != i && full[i].1.matched.is_subset(&e.matched) && full[i].1.matched.len() < e.matched.len()
            })
        })
        .collect();
    if keep.len() == 1 {
        return Ok(full[keep[0]].0.clone());
    }
    let tokens = path_tokens(input_dir);
    let hinted: Vec<usize> = keep
        .iter()
        .copied()
        .filter(|&i| full[i].0.dir_hints.iter().any(|h| tokens.contains(h)))
        .collect();
    if hinted.len() == 1 {
        return Ok(full[hinted[0]].0.clone());
    }
    let names: Vec<String> = keep
        .iter()
        .map(|&i| format!("{} ({} recording(s), {} columns matched)", full[i].0.name, full[i].1.recordings, full[i].1.matched.len()))
        .collect();
    Err(Error::Detect(format!(
        "ambiguous dataset in {}: {}; pass --dataset",
        input_dir.display(),
        names.join(", ")
    )))
}

pub fn detect_dataset(input_dir: &Path) -> Result<DatasetDescriptor> {
    detect_among(input_dir, &builtin_descriptors())
}
