//! Motion-forecasting metrics on position sequences.
//!
//! All functions take a per-step `valid` mask; masked steps are never read.
//! Distances are in meters, ANLL in nats.

mod evaluate;
mod predictions;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use evaluate::{evaluate, evaluate_scenarios, EvalConfig, Metric, MetricReport, MissingPrediction, ScenarioValues, Task};
pub use predictions::{
    ground_truth_predictions, read_predictions, read_predictions_str, write_predictions, Distribution, Prediction, PredictionRecord,
};

pub const MISS_THRESHOLD: f64 = 2.0;
pub const COLLISION_THRESHOLD: f64 = 1.0;
/// Lower bound applied to distribution scales before evaluating densities.
pub const SCALE_FLOOR: f64 = 1e-6;

pub type Xy = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeRule {
    #[default]
    MinFde,
    MaxProb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollisionRule {
    /// Selected-mode predictions of two scored agents.
    #[default]
    PredPred,
    /// A scored agent's prediction against any other agent's ground truth.
    PredGt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BrierMode {
    /// `(1 - p)^2 * FDE`, written `paper` in reports and on the command line.
    #[default]
    #[serde(rename = "paper")]
    Multiplicative,
    /// `FDE + (1 - p)^2`.
    Additive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    Laplace,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Family::Gaussian),
            "laplace" => Ok(Family::Laplace),
            _ => Err(Error::Metric(format!("unknown distribution family {s:?}"))),
        }
    }
}

#[inline]
fn norm(a: Xy, b: Xy) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn last_valid(valid: &[bool]) -> Option<usize> {
    valid.iter().rposition(|&v| v)
}

/// Index of the mode to evaluate. `min_fde`: smallest error at the last
/// valid step; `max_prob`: highest probability. Ties go to the lower index.
pub fn select_mode(modes: &[Vec<Xy>], probs: &[f64], gt: &[Xy], valid: &[bool], rule: ModeRule) -> usize {
    let mut best = 0;
    match rule {
        ModeRule::MinFde => {
            let Some(n) = last_valid(valid) else { return 0 };
            let mut best_err = f64::INFINITY;
            for (k, m) in modes.iter().enumerate() {
                let e = norm(m[n], gt[n]);
                if e < best_err {
                    best_err = e;
                    best = k;
                }
            }
        }
        ModeRule::MaxProb => {
            for (k, &p) in probs.iter().enumerate() {
                if p > probs[best] {
                    best = k;
                }
            }
        }
    }
    best
}

/// Mean Euclidean error over valid steps.
pub fn ade(pred: &[Xy], gt: &[Xy], valid: &[bool]) -> Result<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for k in (0..gt.len()).filter(|&k| valid[k]) {
        sum += norm(pred[k], gt[k]);
        n += 1;
    }
    if n == 0 {
        return Err(Error::Metric("ADE needs at least one valid step".into()));
    }
    Ok(sum / n as f64)
}

/// Euclidean error at the last valid step.
pub fn fde(pred: &[Xy], gt: &[Xy], valid: &[bool]) -> Result<f64> {
    let n = last_valid(valid).ok_or_else(|| Error::Metric("FDE needs a valid step".into()))?;
    Ok(norm(pred[n], gt[n]))
}

/// Mean over valid steps of the distance from each predicted point to the
/// nearest valid ground-truth point of the whole horizon.
pub fn apde(pred: &[Xy], gt: &[Xy], valid: &[bool]) -> Result<f64> {
    let gts: Vec<Xy> = gt.iter().zip(valid).filter(|(_, &v)| v).map(|(g, _)| *g).collect();
    if gts.is_empty() {
        return Err(Error::Metric("APDE needs at least one valid step".into()));
    }
    let mut sum = 0.0;
    for k in (0..gt.len()).filter(|&k| valid[k]) {
        sum += gts.iter().map(|&g| norm(pred[k], g)).fold(f64::INFINITY, f64::min);
    }
    // One term per valid step, as many as there are valid gt points.
    Ok(sum / gts.len() as f64)
}

/// Fraction of final errors beyond `threshold` (a value equal to the
/// threshold is a hit).
pub fn miss_rate(fdes: &[f64], threshold: f64) -> Result<f64> {
    if fdes.is_empty() {
        return Err(Error::Metric("miss rate of no values".into()));
    }
    Ok(fdes.iter().filter(|&&f| f > threshold).count() as f64 / fdes.len() as f64)
}

/// A scored agent's selected trajectory, for collision checks.
pub struct Track<'a> {
    pub pred: &'a [Xy],
    pub valid: &'a [bool],
}

/// Per scored agent, whether it collides. Under `PredPred` two scored
/// agents collide when their predictions come closer than `threshold` at a
/// step valid for both. Under `PredGt` an agent collides when its
/// prediction comes closer than `threshold` to another agent's ground
/// truth; `others` lists `(row, gt, valid)` for every agent of the scene and
/// `rows[i]` is the scene row of scored agent `i`.
pub fn collisions(scored: &[Track], rows: &[usize], others: &[(usize, &[Xy], &[bool])], rule: CollisionRule, threshold: f64) -> Vec<bool> {
    let mut hit = vec![false; scored.len()];
    match rule {
        CollisionRule::PredPred => {
            for i in 0..scored.len() {
                for j in i + 1..scored.len() {
                    let (a, b) = (&scored[i], &scored[j]);
                    let close = (0..a.pred.len()).any(|k| a.valid[k] && b.valid[k] && norm(a.pred[k], b.pred[k]) < threshold);
                    if close {
                        hit[i] = true;
                        hit[j] = true;
                    }
                }
            }
        }
        CollisionRule::PredGt => {
            for (i, a) in scored.iter().enumerate() {
                hit[i] = others.iter().filter(|o| o.0 != rows[i]).any(|&(_, gt, v)| {
                    (0..a.pred.len()).any(|k| a.valid[k] && v[k] && norm(a.pred[k], gt[k]) < threshold)
                });
            }
        }
    }
    hit
}

/// Final-displacement error weighted by the selected mode's probability.
pub fn brier_fde(fde: f64, prob: f64, mode: BrierMode) -> Result<f64> {
    if !(0.0..=1.0).contains(&prob) {
        return Err(Error::Metric(format!("mode probability {prob} outside [0, 1]")));
    }
    let w = (1.0 - prob).powi(2);
    Ok(match mode {
        BrierMode::Multiplicative => w * fde,
        BrierMode::Additive => fde + w,
    })
}

/// Log-density of one mode at one step: independent axes.
fn log_density(family: Family, mean: Xy, scale: Xy, x: Xy) -> f64 {
    (0..2)
        .map(|d| {
            let s = scale[d].max(SCALE_FLOOR);
            let z = (x[d] - mean[d]) / s;
            match family {
                Family::Gaussian => -0.5 * (2.0 * PI).ln() - s.ln() - 0.5 * z * z,
                Family::Laplace => -(2.0 * s).ln() - z.abs(),
            }
        })
        .sum()
}

/// Average negative log-likelihood of the ground truth under a mixture
/// whose component `j` has per-step `means[j]` and `scales[j]`.
pub fn anll(family: Family, means: &[Vec<Xy>], scales: &[Vec<Xy>], probs: &[f64], gt: &[Xy], valid: &[bool]) -> Result<f64> {
    if means.is_empty() || means.len() != scales.len() || means.len() != probs.len() {
        return Err(Error::Metric("mixture with inconsistent component counts".into()));
    }
    let (mut sum, mut n) = (0.0, 0usize);
    let mut terms = Vec::with_capacity(means.len());
    for k in (0..gt.len()).filter(|&k| valid[k]) {
        terms.clear();
        terms.extend(
            (0..means.len())
                .filter(|&j| probs[j] > 0.0)
                .map(|j| probs[j].ln() + log_density(family, means[j][k], scales[j][k], gt[k])),
        );
        let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            return Err(Error::Metric("mixture has no component with positive weight".into()));
        }
        let lse = m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln();
        sum -= lse;
        n += 1;
    }
    if n == 0 {
        return Err(Error::Metric("ANLL needs at least one valid step".into()));
    }
    Ok(sum / n as f64)
}
