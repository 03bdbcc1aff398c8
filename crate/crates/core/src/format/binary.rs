//! Compact little-endian binary encoding (`scenarios.bin`).
//!
//! ```text
//! file    := "TRJK1" | version:u8 (=1) | reserved:u16 (=0) | count:u32 | record*
//! record  := len:u32 | nfields:u16 | entry* | payload
//! entry   := name_len:u8 | name | dtype:u8 | ndim:u8 | dim:u32 * ndim | offset:u32 | nbytes:u32
//! ```
//!
//! `len` counts the bytes after itself. `offset` is relative to the start of
//! the record payload, which holds the fields back to back in table order
//! with no padding. Arrays are row-major; dtypes are
//! `1=f32 2=u8 3=i64 4=u32 5=utf8`. Booleans are `u8` 0/1. `agent_ids` is a
//! utf8 field of newline-joined ids with `dim = [A]`. Optional fields
//! (`inp_acc`, `trg_acc`, `maneuver_label`, `map_ref`) are omitted when absent.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::record::{Scenario, ScenarioAgent};
use crate::types::AgentClass;

pub const MAGIC: &[u8; 5] = b"TRJK1";
pub const VERSION: u8 = 1;
pub const FILE_HEADER_LEN: usize = 5 + 1 + 2 + 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum DType {
    F32 = 1,
    U8 = 2,
    I64 = 3,
    U32 = 4,
    Utf8 = 5,
}

impl DType {
    fn from_u8(v: u8) -> Result<Self> {
        Ok(match v {
            1 => DType::F32,
            2 => DType::U8,
            3 => DType::I64,
            4 => DType::U32,
            5 => DType::Utf8,
            _ => return Err(Error::Format(format!("unknown dtype {v}"))),
        })
    }
}

struct Field {
    name: &'static str,
    dtype: DType,
    dims: Vec<u32>,
    bytes: Vec<u8>,
}

fn f32s<'a>(it: impl Iterator<Item = &'a f32>) -> Vec<u8> {
    it.flat_map(|v| v.to_le_bytes()).collect()
}

fn pairs(v: &[[f32; 2]]) -> Vec<u8> {
    f32s(v.iter().flatten())
}

fn bools(v: &[bool]) -> Vec<u8> {
    v.iter().map(|&b| b as u8).collect()
}

fn fields_of(s: &Scenario) -> Vec<Field> {
    let a = s.num_agents() as u32;
    let (ti, to) = (s.obs_len as u32, s.pred_len as u32);
    let f = |name, dtype, dims: &[u32], bytes| Field {
        name,
        dtype,
        dims: dims.to_vec(),
        bytes,
    };
    let ids = s
        .agents
        .iter()
        .map(|a| a.id.to_string())
        .collect::<Vec<_>>()
        .join("\n");
    let mut out = vec![
        f("scenario_id", DType::Utf8, &[], s.scenario_id.as_bytes().to_vec()),
        f("rec_id", DType::Utf8, &[], s.rec_id.as_bytes().to_vec()),
        f("anchor_frame", DType::I64, &[], s.anchor_frame.to_le_bytes().to_vec()),
        f("ta_index", DType::U32, &[], (s.ta_index as u32).to_le_bytes().to_vec()),
        f("agent_ids", DType::Utf8, &[a], ids.into_bytes()),
        f("atype", DType::U8, &[a], s.agents.iter().map(|a| a.class.token()).collect()),
        f("inp_pos", DType::F32, &[a, ti, 2], pairs(&s.inp_pos)),
        f("inp_vel", DType::F32, &[a, ti, 2], pairs(&s.inp_vel)),
        f("inp_psi", DType::F32, &[a, ti], f32s(s.inp_psi.iter())),
    ];
    if let Some(acc) = &s.inp_acc {
        out.push(f("inp_acc", DType::F32, &[a, ti, 2], pairs(acc)));
    }
    out.extend([
        f("trg_pos", DType::F32, &[a, to, 2], pairs(&s.trg_pos)),
        f("trg_vel", DType::F32, &[a, to, 2], pairs(&s.trg_vel)),
        f("trg_psi", DType::F32, &[a, to], f32s(s.trg_psi.iter())),
    ]);
    if let Some(acc) = &s.trg_acc {
        out.push(f("trg_acc", DType::F32, &[a, to, 2], pairs(acc)));
    }
    out.extend([
        f("input_mask", DType::U8, &[a, ti], bools(&s.input_mask)),
        f("valid_mask", DType::U8, &[a, to], bools(&s.valid_mask)),
        f("sa_mask", DType::U8, &[a, to], bools(&s.sa_mask)),
        f("ma_mask", DType::U8, &[a, to], bools(&s.ma_mask)),
    ]);
    if let Some(l) = s.maneuver_label {
        out.push(f("maneuver_label", DType::U8, &[], vec![l]));
    }
    if let Some(m) = &s.map_ref {
        out.push(f("map_ref", DType::Utf8, &[], m.as_bytes().to_vec()));
    }
    out
}

pub fn encode_record(s: &Scenario, out: &mut Vec<u8>) {
    let fields = fields_of(s);
    let mut table = Vec::new();
    table.extend_from_slice(&(fields.len() as u16).to_le_bytes());
    let mut offset = 0u32;
    for f in &fields {
        table.push(f.name.len() as u8);
        table.extend_from_slice(f.name.as_bytes());
        table.push(f.dtype as u8);
        table.push(f.dims.len() as u8);
        for d in &f.dims {
            table.extend_from_slice(&d.to_le_bytes());
        }
        table.extend_from_slice(&offset.to_le_bytes());
        table.extend_from_slice(&(f.bytes.len() as u32).to_le_bytes());
        offset += f.bytes.len() as u32;
    }
    let len = table.len() + offset as usize;
    out.extend_from_slice(&(len as u32).to_le_bytes());
    out.extend_from_slice(&table);
    for f in &fields {
        out.extend_from_slice(&f.bytes);
    }
}

pub fn encode_file(scenarios: &[Scenario]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&(scenarios.len() as u32).to_le_bytes());
    for s in scenarios {
        encode_record(s, &mut out);
    }
    out
}

/// Byte size of one encoded record, from the layout alone.
pub fn record_size(s: &Scenario) -> usize {
    let fields = fields_of(s);
    4 + 2
        + fields
            .iter()
            .map(|f| 1 + f.name.len() + 1 + 1 + 4 * f.dims.len() + 4 + 4 + f.bytes.len())
            .sum::<usize>()
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

struct RawField<'a> {
    dtype: DType,
    dims: Vec<u32>,
    bytes: &'a [u8],
}

struct RawRecord<'a> {
    id: String,
    fields: HashMap<String, RawField<'a>>,
}

impl<'a> RawRecord<'a> {
    fn get(&self, name: &'static str, dtype: DType) -> Result<&RawField<'a>> {
        let f = self
            .fields
            .get(name)
            .ok_or_else(|| Error::record(&self.id, name, "missing field"))?;
        if f.dtype != dtype {
            return Err(Error::record(&self.id, name, format!("dtype {:?}", f.dtype)));
        }
        Ok(f)
    }

    fn opt(&self, name: &'static str) -> bool {
        self.fields.contains_key(name)
    }

    fn utf8(&self, name: &'static str) -> Result<String> {
        let f = self.get(name, DType::Utf8)?;
        String::from_utf8(f.bytes.to_vec()).map_err(|_| Error::record(&self.id, name, "invalid utf8"))
    }

    fn shaped(&self, name: &'static str, dtype: DType, dims: &[u32], elem: usize) -> Result<&'a [u8]> {
        let f = self.get(name, dtype)?;
        if f.dims != dims {
            return Err(Error::record(
                &self.id,
                name,
                format!("shape {:?}, expected {:?}", f.dims, dims),
            ));
        }
        let n: usize = dims.iter().map(|&d| d as usize).product::<usize>() * elem;
        if f.bytes.len() != n {
            return Err(Error::record(&self.id, name, format!("{} bytes, expected {n}", f.bytes.len())));
        }
        Ok(f.bytes)
    }

    fn f32_vec(&self, name: &'static str, dims: &[u32]) -> Result<Vec<f32>> {
        Ok(self
            .shaped(name, DType::F32, dims, 4)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn pair_vec(&self, name: &'static str, dims: &[u32]) -> Result<Vec<[f32; 2]>> {
        Ok(self.f32_vec(name, dims)?.chunks_exact(2).map(|c| [c[0], c[1]]).collect())
    }

    fn bool_vec(&self, name: &'static str, dims: &[u32]) -> Result<Vec<bool>> {
        self.shaped(name, DType::U8, dims, 1)?
            .iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                _ => Err(Error::record(&self.id, name, format!("mask byte {b}"))),
            })
            .collect()
    }
}

fn decode_record(rec: &[u8], obs_len: usize, pred_len: usize) -> Result<Scenario> {
    let mut c = Cursor { buf: rec, pos: 0 };
    let n = c.u16()?;
    let mut entries = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let name_len = c.u8()? as usize;
        let name = std::str::from_utf8(c.take(name_len)?)
            .map_err(|_| Error::Format("field name not utf8".into()))?
            .to_string();
        let dtype = DType::from_u8(c.u8()?)?;
        let ndim = c.u8()? as usize;
        let dims = (0..ndim).map(|_| c.u32()).collect::<Result<Vec<_>>>()?;
        let offset = c.u32()? as usize;
        let nbytes = c.u32()? as usize;
        entries.push((name, dtype, dims, offset, nbytes));
    }
    let payload = &rec[c.pos..];
    let mut fields = HashMap::new();
    for (name, dtype, dims, offset, nbytes) in entries {
        let bytes = payload
            .get(offset..offset + nbytes)
            .ok_or_else(|| Error::Format(format!("field {name} out of bounds")))?;
        fields.insert(name, RawField { dtype, dims, bytes });
    }
    let mut raw = RawRecord {
        id: String::new(),
        fields,
    };
    raw.id = raw.utf8("scenario_id")?;
    let id = raw.id.clone();

    let atype = raw.get("atype", DType::U8)?;
    let a = atype.dims.first().copied().unwrap_or(0);
    let ids_text = raw.utf8("agent_ids")?;
    let ids: Vec<&str> = if a == 0 { vec![] } else { ids_text.split('\n').collect() };
    if ids.len() != a as usize || atype.bytes.len() != a as usize {
        return Err(Error::record(&id, "agent_ids", "agent count mismatch"));
    }
    let agents = ids
        .iter()
        .zip(atype.bytes)
        .map(|(s, &t)| {
            Ok(ScenarioAgent {
                id: s.parse()?,
                class: AgentClass::from_token(t)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (ti, to) = (obs_len as u32, pred_len as u32);
    let scalar = |name, dtype, len| -> Result<&[u8]> {
        let f = raw.get(name, dtype)?;
        if !f.dims.is_empty() || f.bytes.len() != len {
            return Err(Error::record(&id, name, "expected scalar"));
        }
        Ok(f.bytes)
    };
    Ok(Scenario {
        scenario_id: id.clone(),
        rec_id: raw.utf8("rec_id")?,
        anchor_frame: i64::from_le_bytes(scalar("anchor_frame", DType::I64, 8)?.try_into().unwrap()),
        ta_index: u32::from_le_bytes(scalar("ta_index", DType::U32, 4)?.try_into().unwrap()) as usize,
        obs_len,
        pred_len,
        inp_pos: raw.pair_vec("inp_pos", &[a, ti, 2])?,
        inp_vel: raw.pair_vec("inp_vel", &[a, ti, 2])?,
        inp_psi: raw.f32_vec("inp_psi", &[a, ti])?,
        inp_acc: if raw.opt("inp_acc") { Some(raw.pair_vec("inp_acc", &[a, ti, 2])?) } else { None },
        trg_pos: raw.pair_vec("trg_pos", &[a, to, 2])?,
        trg_vel: raw.pair_vec("trg_vel", &[a, to, 2])?,
        trg_psi: raw.f32_vec("trg_psi", &[a, to])?,
        trg_acc: if raw.opt("trg_acc") { Some(raw.pair_vec("trg_acc", &[a, to, 2])?) } else { None },
        input_mask: raw.bool_vec("input_mask", &[a, ti])?,
        valid_mask: raw.bool_vec("valid_mask", &[a, to])?,
        sa_mask: raw.bool_vec("sa_mask", &[a, to])?,
        ma_mask: raw.bool_vec("ma_mask", &[a, to])?,
        maneuver_label: if raw.opt("maneuver_label") {
            Some(scalar("maneuver_label", DType::U8, 1)?[0])
        } else {
            None
        },
        map_ref: if raw.opt("map_ref") { Some(raw.utf8("map_ref")?) } else { None },
        agents,
    })
}

pub fn decode_file(buf: &[u8], obs_len: usize, pred_len: usize) -> Result<Vec<Scenario>> {
    let mut c = Cursor { buf, pos: 0 };
    if c.take(5)? != MAGIC {
        return Err(Error::Format("bad magic, expected TRJK1".into()));
    }
    let version = c.u8()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    c.u16()?;
    let count = c.u32()?;
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let len = c.u32()? as usize;
        let rec = c.take(len)?;
        out.push(decode_record(rec, obs_len, pred_len)?);
    }
    if c.pos != buf.len() {
        return Err(Error::Format(format!("{} trailing bytes", buf.len() - c.pos)));
    }
    Ok(out)
}
