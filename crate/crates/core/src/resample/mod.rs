//! Anti-aliased integer decimation of trajectories to the common output
//! rate.
//!
//! Every kinematic channel is low-pass filtered (Chebyshev type I, zero
//! phase by default) below the new Nyquist frequency and then strided.
//! Native headings are unwrapped, filtered and re-wrapped; derived headings
//! are recomputed from the filtered velocities.

pub mod filter;

use serde::{Deserialize, Serialize};

use crate::angle::{unwrap_angles, wrap_unchecked};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::ingest::heading::{estimate_headings, DEFAULT_HEADING_SPEED_FLOOR};
use crate::types::{HeadingSource, Recording, TrackPoint, Trajectory};

pub use filter::Coefficients;

pub const DEFAULT_TARGET_RATE_HZ: f64 = 5.0;

/// Below this many samples no filter is applied at all.
pub const MIN_FILTER_SAMPLES: usize = 9;
const FALLBACK_ORDER: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub order: usize,
    pub ripple_db: f64,
    /// Cutoff as a fraction of the target Nyquist frequency.
    pub cutoff_norm: f64,
    pub zero_phase: bool,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            order: 7,
            ripple_db: 0.05,
            cutoff_norm: 0.8,
            zero_phase: true,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self) -> Result<()> {
        if self.order < 1 {
            return Err(Error::Filter("order must be at least 1".into()));
        }
        if !(self.cutoff_norm > 0.0 && self.cutoff_norm <= 1.0) {
            return Err(Error::Filter(format!(
                "cutoff_norm {} must lie in (0, 1]",
                self.cutoff_norm
            )));
        }
        if !(self.ripple_db > 0.0 && self.ripple_db.is_finite()) {
            return Err(Error::Filter(format!("ripple_db {} must be positive", self.ripple_db)));
        }
        Ok(())
    }
}

/// Design the anti-aliasing filter for `source_rate -> target_rate`, with its
/// edge at `cutoff_norm * target_rate / 2`.
pub fn design_chebyshev1(spec: &FilterSpec, source_rate: f64, target_rate: f64) -> Result<Coefficients> {
    spec.validate()?;
    if !(target_rate > 0.0 && target_rate < source_rate) {
        return Err(Error::Filter(format!(
            "target rate {target_rate} Hz must be positive and below source rate {source_rate} Hz"
        )));
    }
    let cutoff_hz = spec.cutoff_norm * target_rate / 2.0;
    filter::chebyshev1_lowpass(spec.order, spec.ripple_db, cutoff_hz / (source_rate / 2.0))
}

/// Integer decimation factor, or an error naming the recording.
pub fn decimation_factor(recording: &str, source_hz: f64, target_hz: f64) -> Result<usize> {
    let err = || Error::Rate {
        recording: recording.to_string(),
        source_hz,
        target_hz,
    };
    if !(source_hz > 0.0 && target_hz > 0.0) {
        return Err(err());
    }
    let ratio = source_hz / target_hz;
    let m = ratio.round();
    if m < 1.0 || (ratio - m).abs() > 1e-6 * ratio {
        return Err(err());
    }
    Ok(m as usize)
}

/// Which source samples survive striding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecimationPhase {
    /// Keep trajectory indices 0, M, 2M, ...; output frames are numbered
    /// from `first_frame / M`.
    TrajectoryStart,
    /// Keep samples whose absolute frame is a multiple of M, so all agents
    /// of a recording share one output time grid; output frame = frame / M.
    RecordingGrid,
}

/// How a trajectory was reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Filtered,
    Order2Fallback,
    StrideFallback,
    Passthrough,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Filtered => "filtered",
            Provenance::Order2Fallback => "order2_fallback",
            Provenance::StrideFallback => "stride_fallback",
            Provenance::Passthrough => "passthrough",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decimated {
    pub trajectory: Trajectory,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResampleConfig {
    pub filter: FilterSpec,
    pub target_rate_hz: f64,
    pub heading_speed_floor: f64,
    pub phase: DecimationPhase,
}

impl Default for ResampleConfig {
    fn default() -> Self {
        Self {
            filter: FilterSpec::default(),
            target_rate_hz: DEFAULT_TARGET_RATE_HZ,
            heading_speed_floor: DEFAULT_HEADING_SPEED_FLOOR,
            phase: DecimationPhase::RecordingGrid,
        }
    }
}

/// Decimate one trajectory with phase fixed at its first sample.
pub fn decimate_trajectory(traj: &Trajectory, spec: &FilterSpec, target_rate: f64) -> Result<Decimated> {
    let cfg = ResampleConfig {
        filter: *spec,
        target_rate_hz: target_rate,
        heading_speed_floor: DEFAULT_HEADING_SPEED_FLOOR,
        phase: DecimationPhase::TrajectoryStart,
    };
    decimate_trajectory_with(traj, &cfg, &traj.agent_id.to_string())?
        .ok_or_else(|| Error::InvalidArgument("empty trajectory".into()))
}

/// Decimate with full configuration. Returns `None` when no sample of the
/// trajectory falls on the recording grid.
pub fn decimate_trajectory_with(
    traj: &Trajectory,
    cfg: &ResampleConfig,
    recording: &str,
) -> Result<Option<Decimated>> {
    cfg.filter.validate()?;
    let m = decimation_factor(recording, traj.rate_hz, cfg.target_rate_hz)?;
    let n = traj.points.len();
    if n == 0 {
        return Ok(None);
    }
    let first = traj.first_frame();
    let keep: Vec<usize> = match cfg.phase {
        DecimationPhase::TrajectoryStart => (0..n).step_by(m).collect(),
        DecimationPhase::RecordingGrid => (0..n)
            .filter(|&i| (first + i as i64).rem_euclid(m as i64) == 0)
            .collect(),
    };
    if keep.is_empty() {
        return Ok(None);
    }
    let out_frame = |k: usize, i: usize| -> i64 {
        match cfg.phase {
            DecimationPhase::TrajectoryStart => first.div_euclid(m as i64) + k as i64,
            DecimationPhase::RecordingGrid => (first + i as i64) / m as i64,
        }
    };

    if m == 1 {
        let mut t = traj.clone();
        t.rate_hz = cfg.target_rate_hz;
        return Ok(Some(Decimated {
            trajectory: t,
            provenance: Provenance::Passthrough,
        }));
    }

    let order = cfg.filter.order;
    // DC is normalized to unity: even orders would otherwise scale positions
    // by the ripple floor.
    let (coeffs, provenance) = if n > 3 * (order + 1) {
        (Some(design_chebyshev1(&cfg.filter, traj.rate_hz, cfg.target_rate_hz)?), Provenance::Filtered)
    } else if n >= MIN_FILTER_SAMPLES {
        let spec = FilterSpec {
            order: order.min(FALLBACK_ORDER),
            ..cfg.filter
        };
        (Some(design_chebyshev1(&spec, traj.rate_hz, cfg.target_rate_hz)?), Provenance::Order2Fallback)
    } else {
        (None, Provenance::StrideFallback)
    };

    let coeffs = coeffs.map(Coefficients::normalized_dc);
    let apply = |x: Vec<f64>| -> Result<Vec<f64>> {
        match &coeffs {
            None => Ok(x),
            Some(c) if cfg.filter.zero_phase => {
                let pad = filter::default_padlen(c).min(x.len() - 1);
                filter::filtfilt(c, &x, pad)
            }
            Some(c) => Ok(filter::filter_causal(c, &x)),
        }
    };
    let channel = |f: fn(&TrackPoint) -> f64| traj.points.iter().map(f).collect::<Vec<_>>();

    let x = apply(channel(|p| p.x))?;
    let y = apply(channel(|p| p.y))?;
    let vx = apply(channel(|p| p.vx))?;
    let vy = apply(channel(|p| p.vy))?;
    let has_acc = traj.points.iter().all(|p| p.ax.is_some() && p.ay.is_some());
    let (ax, ay) = if has_acc {
        (
            Some(apply(channel(|p| p.ax.unwrap_or(0.0)))?),
            Some(apply(channel(|p| p.ay.unwrap_or(0.0)))?),
        )
    } else {
        (None, None)
    };

    let psi_out: Vec<f64> = match traj.heading {
        HeadingSource::Native => {
            let unwrapped = unwrap_angles(&channel(|p| p.psi));
            let filtered = apply(unwrapped)?;
            keep.iter().map(|&i| wrap_unchecked(filtered[i])).collect()
        }
        HeadingSource::Derived => {
            let v: Vec<(f64, f64)> = keep.iter().map(|&i| (vx[i], vy[i])).collect();
            estimate_headings(&v, cfg.heading_speed_floor)?
        }
    };

    let points = keep
        .iter()
        .enumerate()
        .map(|(k, &i)| TrackPoint {
            frame: out_frame(k, i),
            x: x[i],
            y: y[i],
            vx: vx[i],
            vy: vy[i],
            psi: psi_out[k],
            ax: ax.as_ref().map(|a| a[i]),
            ay: ay.as_ref().map(|a| a[i]),
            lane_id: traj.points[i].lane_id,
        })
        .collect();
    Ok(Some(Decimated {
        trajectory: Trajectory {
            points,
            rate_hz: cfg.target_rate_hz,
            ..traj.clone()
        },
        provenance,
    }))
}

/// Counts of how each trajectory of a recording was reduced.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResampleTally {
    pub filtered: usize,
    pub order2_fallback: usize,
    pub stride_fallback: usize,
    pub passthrough: usize,
    /// Trajectories with no sample on the output grid.
    pub dropped: usize,
}

impl ResampleTally {
    fn add(&mut self, p: Provenance) {
        match p {
            Provenance::Filtered => self.filtered += 1,
            Provenance::Order2Fallback => self.order2_fallback += 1,
            Provenance::StrideFallback => self.stride_fallback += 1,
            Provenance::Passthrough => self.passthrough += 1,
        }
    }

    pub fn merge(&mut self, other: &ResampleTally) {
        self.filtered += other.filtered;
        self.order2_fallback += other.order2_fallback;
        self.stride_fallback += other.stride_fallback;
        self.passthrough += other.passthrough;
        self.dropped += other.dropped;
    }
}

/// Decimate every trajectory of a recording onto the shared output grid.
pub fn decimate_recording(
    rec: &Recording,
    cfg: &ResampleConfig,
    execution: Execution,
) -> Result<(Recording, ResampleTally)> {
    let m = decimation_factor(&rec.recording_id, rec.rate_hz, cfg.target_rate_hz)? as i64;
    let results = exec::try_map_ordered(execution, &rec.trajectories, |t| {
        decimate_trajectory_with(t, cfg, &rec.recording_id)
    })?;
    let mut tally = ResampleTally::default();
    let mut trajectories = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Some(d) => {
                tally.add(d.provenance);
                trajectories.push(d.trajectory);
            }
            None => tally.dropped += 1,
        }
    }
    let frame_count = match cfg.phase {
        DecimationPhase::RecordingGrid => (rec.frame_count + m - 1) / m,
        DecimationPhase::TrajectoryStart => rec.frame_count / m + 1,
    };
    Ok((
        Recording {
            trajectories,
            rate_hz: cfg.target_rate_hz,
            frame_count,
            frame_stride: rec.frame_stride * m,
            ..rec.clone()
        },
        tally,
    ))
}
