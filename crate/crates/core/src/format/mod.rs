//! On-disk split directories.
//!
//! A split directory holds `manifest.json`, the records in
//! `scenarios.ndjson` and, optionally, the binary form in `scenarios.bin`
//! (see [`binary`] for its layout). An empty split has only the manifest.

pub mod binary;
pub mod ndjson;

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::{Scenario, ScenarioLimits, MANEUVER_CLASSES};
use crate::types::Split;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const NDJSON_FILE: &str = "scenarios.ndjson";
pub const BINARY_FILE: &str = "scenarios.bin";
pub const FORMAT_NAME: &str = "bevtraj-split";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFiles {
    pub ndjson: Option<String>,
    pub binary: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub split: Split,
    pub dataset: String,
    pub seed: u64,
    pub obs_len: usize,
    pub pred_len: usize,
    pub limits: ScenarioLimits,
    /// Number of scenarios.
    pub count: usize,
    /// Agent rows summed over scenarios.
    pub trajectory_count: usize,
    /// Distinct `(rec_id, agent_id)` pairs per agent-class token.
    pub class_histogram: [usize; 8],
    pub unique_agents: usize,
    /// Scenario counts per maneuver label 0..=6.
    pub maneuver_histogram: [usize; MANEUVER_CLASSES],
    pub unlabeled: usize,
    pub scenario_ids: Vec<String>,
    pub files: ManifestFiles,
    pub config: serde_json::Value,
}

#[derive(Debug, Clone)]
pub struct SplitSet {
    pub split: Split,
    pub scenarios: Vec<Scenario>,
    pub manifest: Manifest,
}

/// Options for [`write_split`].
#[derive(Debug, Clone)]
pub struct WriteOptions {
    pub split: Split,
    pub dataset: String,
    pub seed: u64,
    pub obs_len: usize,
    pub pred_len: usize,
    pub limits: ScenarioLimits,
    pub binary: bool,
    pub config: serde_json::Value,
}

impl WriteOptions {
    pub fn new(split: Split) -> Self {
        Self {
            split,
            dataset: String::new(),
            seed: 0,
            obs_len: crate::record::DEFAULT_OBS_LEN,
            pred_len: crate::record::DEFAULT_PRED_LEN,
            limits: ScenarioLimits::default(),
            binary: false,
            config: serde_json::Value::Null,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Ndjson,
    Binary,
}

fn build_manifest(scenarios: &[Scenario], opts: &WriteOptions) -> Manifest {
    let mut class_histogram = [0usize; 8];
    let mut seen = BTreeSet::new();
    let mut maneuver_histogram = [0usize; MANEUVER_CLASSES];
    let mut unlabeled = 0;
    for s in scenarios {
        for a in &s.agents {
            if seen.insert((s.rec_id.as_str(), a.id)) {
                class_histogram[a.class.token() as usize] += 1;
            }
        }
        match s.maneuver_label {
            Some(l) => maneuver_histogram[l as usize] += 1,
            None => unlabeled += 1,
        }
    }
    let empty = scenarios.is_empty();
    Manifest {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        split: opts.split,
        dataset: opts.dataset.clone(),
        seed: opts.seed,
        obs_len: opts.obs_len,
        pred_len: opts.pred_len,
        limits: opts.limits,
        count: scenarios.len(),
        trajectory_count: scenarios.iter().map(Scenario::num_agents).sum(),
        class_histogram,
        unique_agents: seen.len(),
        maneuver_histogram,
        unlabeled,
        scenario_ids: scenarios.iter().map(|s| s.scenario_id.clone()).collect(),
        files: ManifestFiles {
            ndjson: (!empty).then(|| NDJSON_FILE.to_string()),
            binary: (!empty && opts.binary).then(|| BINARY_FILE.to_string()),
        },
        config: opts.config.clone(),
    }
}

/// Validate and write `scenarios` into the split directory `dir`.
pub fn write_split(scenarios: &[Scenario], dir: &Path, opts: &WriteOptions) -> Result<Manifest> {
    let mut ids = BTreeSet::new();
    for s in scenarios {
        if s.obs_len != opts.obs_len || s.pred_len != opts.pred_len {
            return Err(Error::record(
                &s.scenario_id,
                "obs_len",
                format!(
                    "windows {}/{} differ from split {}/{}",
                    s.obs_len, s.pred_len, opts.obs_len, opts.pred_len
                ),
            ));
        }
        s.validate(&opts.limits)?;
        if !ids.insert(s.scenario_id.as_str()) {
            return Err(Error::record(&s.scenario_id, "scenario_id", "duplicate id"));
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = build_manifest(scenarios, opts);

    for stale in [NDJSON_FILE, BINARY_FILE] {
        let p = dir.join(stale);
        if p.exists() {
            fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
        }
    }
    if manifest.files.ndjson.is_some() {
        let p = dir.join(NDJSON_FILE);
        let f = fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
        let mut w = BufWriter::new(f);
        for s in scenarios {
            let line = ndjson::encode_line(s)?;
            w.write_all(line.as_bytes())
                .and_then(|_| w.write_all(b"\n"))
                .map_err(|e| Error::io(&p, e))?;
        }
        w.flush().map_err(|e| Error::io(&p, e))?;
    }
    if manifest.files.binary.is_some() {
        let p = dir.join(BINARY_FILE);
        fs::write(&p, binary::encode_file(scenarios)).map_err(|e| Error::io(&p, e))?;
    }
    let p = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json("manifest", e))?;
    fs::write(&p, text + "\n").map_err(|e| Error::io(&p, e))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let p = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::json(p.display().to_string(), e))?;
    if m.format != FORMAT_NAME || m.version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported format {} v{}",
            p.display(),
            m.format,
            m.version
        )));
    }
    if m.scenario_ids.len() != m.count {
        return Err(Error::Format(format!(
            "{}: count {} but {} scenario ids",
            p.display(),
            m.count,
            m.scenario_ids.len()
        )));
    }
    Ok(m)
}

/// Read a split from its NDJSON records.
pub fn read_split(dir: &Path) -> Result<SplitSet> {
    read_split_with(dir, Encoding::Ndjson)
}

pub fn read_split_with(dir: &Path, encoding: Encoding) -> Result<SplitSet> {
    let manifest = read_manifest(dir)?;
    let (ti, to) = (manifest.obs_len, manifest.pred_len);
    let scenarios = match encoding {
        _ if manifest.count == 0 => Vec::new(),
        Encoding::Ndjson => {
            let name = manifest
                .files
                .ndjson
                .as_deref()
                .ok_or_else(|| Error::Format("manifest lists no ndjson file".into()))?;
            let p = dir.join(name);
            let f = fs::File::open(&p).map_err(|e| Error::io(&p, e))?;
            let mut out = Vec::with_capacity(manifest.count);
            for (i, line) in BufReader::new(f).lines().enumerate() {
                let line = line.map_err(|e| Error::io(&p, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let s = ndjson::decode_line(&line, ti, to).map_err(|e| {
                    Error::Format(format!("{}:{}: {e}", p.display(), i + 1))
                })?;
                out.push(s);
            }
            out
        }
        Encoding::Binary => {
            let name = manifest
                .files
                .binary
                .as_deref()
                .ok_or_else(|| Error::Format("manifest lists no binary file".into()))?;
            let p = dir.join(name);
            let buf = fs::read(&p).map_err(|e| Error::io(&p, e))?;
            binary::decode_file(&buf, ti, to)?
        }
    };
    if scenarios.len() != manifest.count {
        return Err(Error::Format(format!(
            "manifest count {} but {} records",
            manifest.count,
            scenarios.len()
        )));
    }
    for (s, id) in scenarios.iter().zip(&manifest.scenario_ids) {
        if &s.scenario_id != id {
            return Err(Error::record(&s.scenario_id, "scenario_id", format!("manifest expects {id}")));
        }
        s.validate(&manifest.limits)?;
    }
    Ok(SplitSet {
        split: manifest.split,
        scenarios,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::tests::fixture;

    #[test]
    fn empty_split_has_manifest_only() {
        let dir = tempfile::tempdir().unwrap();
        let m = write_split(&[], dir.path(), &WriteOptions::new(Split::Val)).unwrap();
        assert_eq!(m.count, 0);
        assert!(dir.path().join(MANIFEST_FILE).exists());
        assert!(!dir.path().join(NDJSON_FILE).exists());
        assert!(!dir.path().join(BINARY_FILE).exists());
        let back = read_split(dir.path()).unwrap();
        assert!(back.scenarios.is_empty());
        assert_eq!(back.split, Split::Val);
    }

    #[test]
    fn roundtrip_both_encodings() {
        let dir = tempfile::tempdir().unwrap();
        let mut b = fixture();
        b.scenario_id = "rec01:2:41".into();
        b.maneuver_label = Some(6);
        let scenarios = vec![fixture(), b];
        let mut opts = WriteOptions::new(Split::Train);
        opts.binary = true;
        let m = write_split(&scenarios, dir.path(), &opts).unwrap();
        assert_eq!(m.count, 2);
        assert_eq!(m.trajectory_count, 6);
        assert_eq!(m.maneuver_histogram, [0, 0, 0, 1, 0, 0, 1]);
        assert_eq!(m.unique_agents, 3);
        let nd = read_split_with(dir.path(), Encoding::Ndjson).unwrap();
        let bin = read_split_with(dir.path(), Encoding::Binary).unwrap();
        assert_eq!(nd.scenarios, scenarios);
        assert_eq!(bin.scenarios, scenarios);
        assert_eq!(nd.manifest, m);
    }

    #[test]
    fn write_refuses_invalid_record() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = fixture();
        let i = s.trg_idx(2, 0);
        s.sa_mask[i] = true;
        let e = write_split(&[s], dir.path(), &WriteOptions::new(Split::Train)).unwrap_err();
        assert!(matches!(e, Error::Record { field: "sa_mask", .. }), "{e}");
        assert!(!dir.path().join(MANIFEST_FILE).exists());
    }
}
