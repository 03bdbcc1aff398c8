//! The scenario record: a target-agent-anchored sample with fixed-length
//! input and target windows, per-step masks and scored-agent sets.
//!
//! Arrays are stored flat, row-major over `(agent, step)`, as 32-bit floats.
//! Slots whose mask is false hold `0.0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{AgentClass, AgentId};

pub const DEFAULT_OBS_LEN: usize = 15;
pub const DEFAULT_PRED_LEN: usize = 25;
pub const DEFAULT_MAX_SCORED_NEIGHBORS: usize = 8;
pub const DEFAULT_MIN_NEIGHBOR_FUTURE: usize = 15;
pub const MANEUVER_CLASSES: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioAgent {
    pub id: AgentId,
    pub class: AgentClass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub scenario_id: String,
    pub rec_id: String,
    /// Frame of the last observed step, in the recording's 5 Hz frame index.
    pub anchor_frame: i64,
    pub ta_index: usize,
    pub agents: Vec<ScenarioAgent>,
    pub obs_len: usize,
    pub pred_len: usize,
    pub inp_pos: Vec<[f32; 2]>,
    pub inp_vel: Vec<[f32; 2]>,
    pub inp_psi: Vec<f32>,
    pub inp_acc: Option<Vec<[f32; 2]>>,
    pub trg_pos: Vec<[f32; 2]>,
    pub trg_vel: Vec<[f32; 2]>,
    pub trg_psi: Vec<f32>,
    pub trg_acc: Option<Vec<[f32; 2]>>,
    pub input_mask: Vec<bool>,
    pub valid_mask: Vec<bool>,
    pub sa_mask: Vec<bool>,
    pub ma_mask: Vec<bool>,
    pub maneuver_label: Option<u8>,
    pub map_ref: Option<String>,
}

/// Limits enforced on scored neighbors by [`Scenario::validate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioLimits {
    pub max_scored_neighbors: usize,
    pub min_neighbor_future: usize,
}

impl Default for ScenarioLimits {
    fn default() -> Self {
        Self {
            max_scored_neighbors: DEFAULT_MAX_SCORED_NEIGHBORS,
            min_neighbor_future: DEFAULT_MIN_NEIGHBOR_FUTURE,
        }
    }
}

/// Convert a wrapped heading to `f32` without leaving `(-pi, pi]`.
pub fn psi_to_f32(psi: f64) -> f32 {
    let v = psi as f32;
    if v <= -std::f32::consts::PI {
        std::f32::consts::PI
    } else {
        v
    }
}

impl Scenario {
    /// An all-masked scenario skeleton with `agents.len()` rows.
    pub fn empty(
        scenario_id: impl Into<String>,
        rec_id: impl Into<String>,
        agents: Vec<ScenarioAgent>,
        obs_len: usize,
        pred_len: usize,
    ) -> Self {
        let a = agents.len();
        Scenario {
            scenario_id: scenario_id.into(),
            rec_id: rec_id.into(),
            anchor_frame: 0,
            ta_index: 0,
            agents,
            obs_len,
            pred_len,
            inp_pos: vec![[0.0; 2]; a * obs_len],
            inp_vel: vec![[0.0; 2]; a * obs_len],
            inp_psi: vec![0.0; a * obs_len],
            inp_acc: None,
            trg_pos: vec![[0.0; 2]; a * pred_len],
            trg_vel: vec![[0.0; 2]; a * pred_len],
            trg_psi: vec![0.0; a * pred_len],
            trg_acc: None,
            input_mask: vec![false; a * obs_len],
            valid_mask: vec![false; a * pred_len],
            sa_mask: vec![false; a * pred_len],
            ma_mask: vec![false; a * pred_len],
            maneuver_label: None,
            map_ref: None,
        }
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    #[inline]
    pub fn inp_idx(&self, agent: usize, step: usize) -> usize {
        agent * self.obs_len + step
    }

    #[inline]
    pub fn trg_idx(&self, agent: usize, step: usize) -> usize {
        agent * self.pred_len + step
    }

    pub fn trg_pos_row(&self, agent: usize) -> &[[f32; 2]] {
        &self.trg_pos[agent * self.pred_len..(agent + 1) * self.pred_len]
    }

    pub fn valid_row(&self, agent: usize) -> &[bool] {
        &self.valid_mask[agent * self.pred_len..(agent + 1) * self.pred_len]
    }

    pub fn ma_row(&self, agent: usize) -> &[bool] {
        &self.ma_mask[agent * self.pred_len..(agent + 1) * self.pred_len]
    }

    pub fn sa_row(&self, agent: usize) -> &[bool] {
        &self.sa_mask[agent * self.pred_len..(agent + 1) * self.pred_len]
    }

    /// Agent rows scored in single-agent evaluation.
    pub fn sa_agents(&self) -> Vec<usize> {
        (0..self.num_agents())
            .filter(|&a| self.sa_row(a).iter().any(|&m| m))
            .collect()
    }

    /// Agent rows scored in multi-agent evaluation (TA included).
    pub fn ma_agents(&self) -> Vec<usize> {
        (0..self.num_agents())
            .filter(|&a| self.ma_row(a).iter().any(|&m| m))
            .collect()
    }

    /// Check every structural and mask invariant of the record.
    pub fn validate(&self, limits: &ScenarioLimits) -> Result<()> {
        let id = self.scenario_id.as_str();
        let a = self.num_agents();
        let (t_in, t_out) = (self.obs_len, self.pred_len);
        let shape = |field: &'static str, len: usize, want: usize| -> Result<()> {
            if len == want {
                Ok(())
            } else {
                Err(Error::record(
                    id,
                    field,
                    format!("length {len}, expected {want}"),
                ))
            }
        };
        if a == 0 {
            return Err(Error::record(id, "agents", "scenario has no agents"));
        }
        if t_in == 0 || t_out == 0 {
            return Err(Error::record(id, "obs_len", "window lengths must be positive"));
        }
        shape("inp_pos", self.inp_pos.len(), a * t_in)?;
        shape("inp_vel", self.inp_vel.len(), a * t_in)?;
        shape("inp_psi", self.inp_psi.len(), a * t_in)?;
        shape("input_mask", self.input_mask.len(), a * t_in)?;
        shape("trg_pos", self.trg_pos.len(), a * t_out)?;
        shape("trg_vel", self.trg_vel.len(), a * t_out)?;
        shape("trg_psi", self.trg_psi.len(), a * t_out)?;
        shape("valid_mask", self.valid_mask.len(), a * t_out)?;
        shape("sa_mask", self.sa_mask.len(), a * t_out)?;
        shape("ma_mask", self.ma_mask.len(), a * t_out)?;
        if let Some(acc) = &self.inp_acc {
            shape("inp_acc", acc.len(), a * t_in)?;
        }
        if let Some(acc) = &self.trg_acc {
            shape("trg_acc", acc.len(), a * t_out)?;
        }
        if self.ta_index >= a {
            return Err(Error::record(
                id,
                "ta_index",
                format!("{} out of range for {a} agents", self.ta_index),
            ));
        }
        if let Some(l) = self.maneuver_label {
            if l as usize >= MANEUVER_CLASSES {
                return Err(Error::record(id, "maneuver_label", format!("{l} not in 0..=6")));
            }
        }

        check_slots(id, "inp_pos", &self.input_mask, self.inp_pos.iter().copied())?;
        check_slots(id, "inp_vel", &self.input_mask, self.inp_vel.iter().copied())?;
        check_slots(id, "inp_psi", &self.input_mask, self.inp_psi.iter().map(|&p| [p, 0.0]))?;
        check_slots(id, "trg_pos", &self.valid_mask, self.trg_pos.iter().copied())?;
        check_slots(id, "trg_vel", &self.valid_mask, self.trg_vel.iter().copied())?;
        check_slots(id, "trg_psi", &self.valid_mask, self.trg_psi.iter().map(|&p| [p, 0.0]))?;
        if let Some(acc) = &self.inp_acc {
            check_slots(id, "inp_acc", &self.input_mask, acc.iter().copied())?;
        }
        if let Some(acc) = &self.trg_acc {
            check_slots(id, "trg_acc", &self.valid_mask, acc.iter().copied())?;
        }
        for (field, psi) in [("inp_psi", &self.inp_psi), ("trg_psi", &self.trg_psi)] {
            let pi = std::f32::consts::PI;
            if let Some(bad) = psi.iter().find(|&&p| !(p > -pi && p <= pi)) {
                return Err(Error::record(id, field, format!("heading {bad} not wrapped")));
            }
        }

        let ta = self.ta_index;
        if !self.input_mask[self.inp_idx(ta, t_in - 1)] {
            return Err(Error::record(id, "input_mask", "target agent not observed at anchor"));
        }
        if !self.valid_row(ta).iter().all(|&v| v) {
            return Err(Error::record(id, "valid_mask", "target agent future incomplete"));
        }
        let mut scored_neighbors = 0;
        for agent in 0..a {
            let valid = self.valid_row(agent);
            let sa = self.sa_row(agent);
            let ma = self.ma_row(agent);
            if agent == ta {
                if sa != valid {
                    return Err(Error::record(id, "sa_mask", "TA row differs from valid_mask"));
                }
                if ma != sa {
                    return Err(Error::record(id, "ma_mask", "TA row differs from sa_mask"));
                }
                continue;
            }
            if sa.iter().any(|&m| m) {
                return Err(Error::record(
                    id,
                    "sa_mask",
                    format!("true on non-TA row {agent}"),
                ));
            }
            if ma.iter().zip(valid).any(|(&m, &v)| m && !v) {
                return Err(Error::record(id, "ma_mask", format!("row {agent} not within valid_mask")));
            }
            if ma.iter().any(|&m| m) {
                scored_neighbors += 1;
                let n_valid = valid.iter().filter(|&&v| v).count();
                if n_valid < limits.min_neighbor_future {
                    return Err(Error::record(
                        id,
                        "ma_mask",
                        format!(
                            "scored row {agent} has {n_valid} valid future steps, needs {}",
                            limits.min_neighbor_future
                        ),
                    ));
                }
            }
        }
        if scored_neighbors > limits.max_scored_neighbors {
            return Err(Error::record(
                id,
                "ma_mask",
                format!(
                    "{scored_neighbors} scored neighbors exceeds {}",
                    limits.max_scored_neighbors
                ),
            ));
        }
        Ok(())
    }
}

fn check_slots(
    id: &str,
    field: &'static str,
    mask: &[bool],
    values: impl Iterator<Item = [f32; 2]>,
) -> Result<()> {
    for (i, (v, &m)) in values.zip(mask).enumerate() {
        if !(v[0].is_finite() && v[1].is_finite()) {
            return Err(Error::record(id, field, format!("non-finite value at slot {i}")));
        }
        if !m && (v[0] != 0.0 || v[1] != 0.0) {
            return Err(Error::record(id, field, format!("masked slot {i} is not 0.0")));
        }
    }
    Ok(())
}
