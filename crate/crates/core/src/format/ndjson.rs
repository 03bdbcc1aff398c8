//! NDJSON encoding of scenario records: one JSON object per line, arrays
//! as nested JSON arrays of 32-bit floats.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::{Scenario, ScenarioAgent};
use crate::types::{AgentClass, AgentId};

#[derive(Serialize, Deserialize)]
struct Wire {
    scenario_id: String,
    rec_id: String,
    anchor_frame: i64,
    ta_index: usize,
    agent_ids: Vec<AgentId>,
    atype: Vec<u8>,
    inp_pos: Vec<Vec<[f32; 2]>>,
    inp_vel: Vec<Vec<[f32; 2]>>,
    inp_psi: Vec<Vec<f32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    inp_acc: Option<Vec<Vec<[f32; 2]>>>,
    trg_pos: Vec<Vec<[f32; 2]>>,
    trg_vel: Vec<Vec<[f32; 2]>>,
    trg_psi: Vec<Vec<f32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trg_acc: Option<Vec<Vec<[f32; 2]>>>,
    input_mask: Vec<Vec<bool>>,
    valid_mask: Vec<Vec<bool>>,
    sa_mask: Vec<Vec<bool>>,
    ma_mask: Vec<Vec<bool>>,
    maneuver_label: Option<u8>,
    map_ref: Option<String>,
}

fn nest<T: Clone>(flat: &[T], row: usize) -> Vec<Vec<T>> {
    flat.chunks(row.max(1)).map(<[T]>::to_vec).collect()
}

fn flatten<T: Clone>(
    id: &str,
    field: &'static str,
    rows: Vec<Vec<T>>,
    n_rows: usize,
    row: usize,
) -> Result<Vec<T>> {
    if rows.len() != n_rows || rows.iter().any(|r| r.len() != row) {
        return Err(Error::record(
            id,
            field,
            format!("expected shape [{n_rows}, {row}]"),
        ));
    }
    Ok(rows.into_iter().flatten().collect())
}

pub fn encode_line(s: &Scenario) -> Result<String> {
    let (ti, to) = (s.obs_len, s.pred_len);
    let wire = Wire {
        scenario_id: s.scenario_id.clone(),
        rec_id: s.rec_id.clone(),
        anchor_frame: s.anchor_frame,
        ta_index: s.ta_index,
        agent_ids: s.agents.iter().map(|a| a.id).collect(),
        atype: s.agents.iter().map(|a| a.class.token()).collect(),
        inp_pos: nest(&s.inp_pos, ti),
        inp_vel: nest(&s.inp_vel, ti),
        inp_psi: nest(&s.inp_psi, ti),
        inp_acc: s.inp_acc.as_deref().map(|a| nest(a, ti)),
        trg_pos: nest(&s.trg_pos, to),
        trg_vel: nest(&s.trg_vel, to),
        trg_psi: nest(&s.trg_psi, to),
        trg_acc: s.trg_acc.as_deref().map(|a| nest(a, to)),
        input_mask: nest(&s.input_mask, ti),
        valid_mask: nest(&s.valid_mask, to),
        sa_mask: nest(&s.sa_mask, to),
        ma_mask: nest(&s.ma_mask, to),
        maneuver_label: s.maneuver_label,
        map_ref: s.map_ref.clone(),
    };
    serde_json::to_string(&wire).map_err(|e| Error::json(&s.scenario_id, e))
}

/// Decode one line. Window lengths come from the split manifest.
pub fn decode_line(line: &str, obs_len: usize, pred_len: usize) -> Result<Scenario> {
    let w: Wire = serde_json::from_str(line).map_err(|e| Error::json("scenario record", e))?;
    let id = w.scenario_id.clone();
    let a = w.agent_ids.len();
    if w.atype.len() != a {
        return Err(Error::record(&id, "atype", format!("length {}, expected {a}", w.atype.len())));
    }
    let agents = w
        .agent_ids
        .iter()
        .zip(&w.atype)
        .map(|(&id, &t)| Ok(ScenarioAgent { id, class: AgentClass::from_token(t)? }))
        .collect::<Result<Vec<_>>>()?;
    let acc = |field, v: Option<Vec<Vec<[f32; 2]>>>, row| -> Result<Option<Vec<[f32; 2]>>> {
        v.map(|rows| flatten(&id, field, rows, a, row)).transpose()
    };
    Ok(Scenario {
        inp_pos: flatten(&id, "inp_pos", w.inp_pos, a, obs_len)?,
        inp_vel: flatten(&id, "inp_vel", w.inp_vel, a, obs_len)?,
        inp_psi: flatten(&id, "inp_psi", w.inp_psi, a, obs_len)?,
        inp_acc: acc("inp_acc", w.inp_acc, obs_len)?,
        trg_pos: flatten(&id, "trg_pos", w.trg_pos, a, pred_len)?,
        trg_vel: flatten(&id, "trg_vel", w.trg_vel, a, pred_len)?,
        trg_psi: flatten(&id, "trg_psi", w.trg_psi, a, pred_len)?,
        trg_acc: acc("trg_acc", w.trg_acc, pred_len)?,
        input_mask: flatten(&id, "input_mask", w.input_mask, a, obs_len)?,
        valid_mask: flatten(&id, "valid_mask", w.valid_mask, a, pred_len)?,
        sa_mask: flatten(&id, "sa_mask", w.sa_mask, a, pred_len)?,
        ma_mask: flatten(&id, "ma_mask", w.ma_mask, a, pred_len)?,
        scenario_id: w.scenario_id,
        rec_id: w.rec_id,
        anchor_frame: w.anchor_frame,
        ta_index: w.ta_index,
        agents,
        obs_len,
        pred_len,
        maneuver_label: w.maneuver_label,
        map_ref: w.map_ref,
    })
}
