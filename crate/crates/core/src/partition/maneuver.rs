//! Seven-class maneuver labels from the time to lane change (TTLC).
//!
//! | value | maneuver          | TTLC (s)  |
//! |-------|-------------------|-----------|
//! | 0     | lane change left  | (0, 1]    |
//! | 1     | lane change left  | (1, 3]    |
//! | 2     | lane change left  | (3, 5]    |
//! | 3     | lane keep         | none ≤ 5  |
//! | 4     | lane change right | (0, 1]    |
//! | 5     | lane change right | (1, 3]    |
//! | 6     | lane change right | (3, 5]    |

use crate::error::{Error, Result};
use crate::types::Trajectory;

pub const LANE_KEEP: u8 = 3;

/// Frame in which the lateral side of a crossing is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LateralFrame {
    /// Sign of `dy`; for the direction-normalized highway frame, where +x
    /// is the travel direction.
    Global,
    /// Displacement rotated into the agent's heading at the start of the
    /// span; for highway data without a travel-aligned frame.
    Heading,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelConfig {
    /// Look-ahead in seconds.
    pub horizon_s: f64,
    /// Upper TTLC bounds of the three lane-change classes, seconds.
    pub thresholds_s: [f64; 3],
    /// Steps on each side of the crossing used to measure its lateral
    /// direction.
    pub direction_span: usize,
    pub lateral: LateralFrame,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self {
            horizon_s: 5.0,
            thresholds_s: [1.0, 3.0, 5.0],
            direction_span: 2,
            lateral: LateralFrame::Global,
        }
    }
}

/// Label the target agent's maneuver after the point at index `anchor`.
///
/// The first lane-id change within the horizon is the crossing. Its side is
/// the sign of the lateral displacement across the crossing (left is `+y`),
/// measured in the frame chosen by `cfg.lateral`.
pub fn label_maneuver(ta: &Trajectory, anchor: usize, cfg: &LabelConfig) -> Result<u8> {
    let steps = (cfg.horizon_s * ta.rate_hz).round() as usize;
    let p = &ta.points;
    if anchor + steps >= p.len() {
        return Err(Error::Label(format!(
            "agent {}: anchor {anchor} has {} future steps, {steps} needed",
            ta.agent_id,
            p.len().saturating_sub(anchor + 1)
        )));
    }
    let lane = |i: usize| {
        p[i].lane_id.ok_or_else(|| {
            Error::Label(format!("agent {} frame {} has no lane id", ta.agent_id, p[i].frame))
        })
    };
    let prev = lane(anchor)?;
    for i in anchor + 1..=anchor + steps {
        let cur = lane(i)?;
        if cur == prev {
            continue;
        }
        let a = (i - 1).saturating_sub(cfg.direction_span);
        let b = (i + cfg.direction_span).min(p.len() - 1);
        let (dx, dy) = (p[b].x - p[a].x, p[b].y - p[a].y);
        let lateral = match cfg.lateral {
            LateralFrame::Global => dy,
            LateralFrame::Heading => {
                let (s, c) = p[a].psi.sin_cos();
                -s * dx + c * dy
            }
        };
        if lateral == 0.0 {
            return Err(Error::Label(format!(
                "agent {} frame {}: lane change without lateral displacement",
                ta.agent_id, p[i].frame
            )));
        }
        let offset = if lateral > 0.0 { 0 } else { 4 };
        let n = (i - anchor) as f64;
        let class = cfg
            .thresholds_s
            .iter()
            .position(|t| n <= t * ta.rate_hz + 1e-9)
            .unwrap_or(2);
        return Ok(offset + class as u8);
    }
    Ok(LANE_KEEP)
}

/// Broad maneuver group of a label: `"LCL"`, `"LK"` or `"LCR"`.
pub fn group_name(label: u8) -> &'static str {
    match label {
        0..=2 => "LCL",
        3 => "LK",
        _ => "LCR",
    }
}
