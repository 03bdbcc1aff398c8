use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

use super::{Family, Task, Xy};
use crate::error::{Error, Result};
use crate::record::Scenario;
use crate::types::AgentId;

const PROB_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionWire {
    pub family: String,
    pub scales: Vec<Vec<Xy>>,
}

/// One line of a prediction file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub scenario_id: String,
    #[serde(deserialize_with = "agent_id_lenient")]
    pub agent_id: AgentId,
    pub modes: Vec<Vec<Xy>>,
    pub probs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist: Option<DistributionWire>,
}

/// Agent ids are written as strings; plain JSON integers are accepted too.
fn agent_id_lenient<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<AgentId, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(i64),
        Str(String),
    }
    match Raw::deserialize(d)? {
        Raw::Int(i) => Ok(AgentId::new(i)),
        Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub family: Family,
    pub scales: Vec<Vec<Xy>>,
}

/// A validated multimodal prediction for one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub modes: Vec<Vec<Xy>>,
    /// Sums to one.
    pub probs: Vec<f64>,
    pub dist: Option<Distribution>,
}

fn finite(v: &[Vec<Xy>]) -> bool {
    v.iter().flatten().all(|p| p[0].is_finite() && p[1].is_finite())
}

fn check(rec: PredictionRecord, pred_len: usize) -> std::result::Result<Prediction, String> {
    let k = rec.modes.len();
    if k == 0 {
        return Err("no modes".into());
    }
    if rec.probs.len() != k {
        return Err(format!("{} probabilities for {k} modes", rec.probs.len()));
    }
    if let Some(m) = rec.modes.iter().find(|m| m.len() != pred_len) {
        return Err(format!("horizon {} but the split has {pred_len} target steps", m.len()));
    }
    if !finite(&rec.modes) {
        return Err("non-finite position".into());
    }
    if rec.probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err("probabilities must be finite and nonnegative".into());
    }
    let sum: f64 = rec.probs.iter().sum();
    if sum <= 0.0 {
        return Err("probabilities sum to zero".into());
    }
    let mut probs = rec.probs;
    if (sum - 1.0).abs() > PROB_TOLERANCE {
        log::warn!(
            "{} agent {}: probabilities sum to {sum}, renormalized",
            rec.scenario_id,
            rec.agent_id
        );
        for p in &mut probs {
            *p /= sum;
        }
    }
    let dist = match rec.dist {
        None => None,
        Some(d) => {
            let family: Family = d.family.parse().map_err(|e: Error| e.to_string())?;
            if d.scales.len() != k || d.scales.iter().any(|s| s.len() != pred_len) {
                return Err(format!("dist.scales must have shape [{k}][{pred_len}][2]"));
            }
            if !finite(&d.scales) {
                return Err("non-finite scale".into());
            }
            Some(Distribution { family, scales: d.scales })
        }
    };
    Ok(Prediction {
        modes: rec.modes,
        probs,
        dist,
    })
}

pub type PredictionMap = BTreeMap<(String, AgentId), Prediction>;

/// Parse and validate NDJSON predictions with `pred_len`-step horizons.
pub fn read_predictions_str(text: &str, pred_len: usize) -> Result<PredictionMap> {
    read_lines(text.lines().map(|l| Ok(l.to_string())), pred_len)
}

pub fn read_predictions(path: &Path, pred_len: usize) -> Result<PredictionMap> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_lines(BufReader::new(f).lines().map(|l| l.map_err(|e| Error::io(path, e))), pred_len)
}

fn read_lines(lines: impl Iterator<Item = Result<String>>, pred_len: usize) -> Result<PredictionMap> {
    let mut out = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Prediction { line: i + 1, message };
        let rec: PredictionRecord = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        let key = (rec.scenario_id.clone(), rec.agent_id);
        let p = check(rec, pred_len).map_err(|m| err(format!("{} agent {}: {m}", key.0, key.1)))?;
        if out.insert(key.clone(), p).is_some() {
            return Err(err(format!("{} agent {}: duplicate prediction", key.0, key.1)));
        }
    }
    Ok(out)
}

pub fn write_predictions(path: &Path, records: &[PredictionRecord]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::json("prediction", e))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Single-mode predictions equal to the ground truth of every scored agent.
pub fn ground_truth_predictions(scenarios: &[Scenario], task: Task) -> Vec<PredictionRecord> {
    let mut out = Vec::new();
    for s in scenarios {
        for a in task.scored_agents(s) {
            let row = (0..s.pred_len)
                .map(|k| {
                    let p = s.trg_pos[s.trg_idx(a, k)];
                    [p[0] as f64, p[1] as f64]
                })
                .collect();
            out.push(PredictionRecord {
                scenario_id: s.scenario_id.clone(),
                agent_id: s.agents[a].id,
                modes: vec![row],
                probs: vec![1.0],
                dist: None,
            });
        }
    }
    out
}
