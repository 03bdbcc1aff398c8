use crate::angle::wrap_unchecked;
use crate::error::{Error, Result};
use crate::record::{psi_to_f32, Scenario};
use crate::types::TrackPoint;

/// Rigid transform into a target agent's frame: origin at the agent's
/// position at the anchor, +x along its heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentPose {
    pub origin: [f64; 2],
    pub heading: f64,
}

impl AgentPose {
    pub const IDENTITY: AgentPose = AgentPose {
        origin: [0.0, 0.0],
        heading: 0.0,
    };

    #[inline]
    pub fn rotate_in(&self, v: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.heading.sin_cos();
        [c * v[0] + s * v[1], -s * v[0] + c * v[1]]
    }

    #[inline]
    pub fn rotate_out(&self, v: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.heading.sin_cos();
        [c * v[0] - s * v[1], s * v[0] + c * v[1]]
    }

    pub fn pos_in(&self, p: [f64; 2]) -> [f64; 2] {
        self.rotate_in([p[0] - self.origin[0], p[1] - self.origin[1]])
    }

    pub fn pos_out(&self, p: [f64; 2]) -> [f64; 2] {
        let r = self.rotate_out(p);
        [r[0] + self.origin[0], r[1] + self.origin[1]]
    }

    pub fn psi_in(&self, psi: f64) -> f64 {
        wrap_unchecked(psi - self.heading)
    }

    pub fn psi_out(&self, psi: f64) -> f64 {
        wrap_unchecked(psi + self.heading)
    }

    /// Position, velocity, heading and acceleration of a track point in
    /// this frame. Missing acceleration becomes zero.
    pub(crate) fn forward(&self, p: &TrackPoint) -> ([f64; 2], [f64; 2], f64, [f64; 2]) {
        if *self == Self::IDENTITY {
            return ([p.x, p.y], [p.vx, p.vy], p.psi, [p.ax.unwrap_or(0.0), p.ay.unwrap_or(0.0)]);
        }
        (
            self.pos_in([p.x, p.y]),
            self.rotate_in([p.vx, p.vy]),
            self.psi_in(p.psi),
            self.rotate_in([p.ax.unwrap_or(0.0), p.ay.unwrap_or(0.0)]),
        )
    }
}

fn f64x2(v: [f32; 2]) -> [f64; 2] {
    [v[0] as f64, v[1] as f64]
}

fn f32x2(v: [f64; 2]) -> [f32; 2] {
    [v[0] as f32, v[1] as f32]
}

fn map_scenario(s: &Scenario, pos: impl Fn([f64; 2]) -> [f64; 2], vec: impl Fn([f64; 2]) -> [f64; 2], psi: impl Fn(f64) -> f64) -> Scenario {
    let mut out = s.clone();
    let masked = |mask: &[bool], arr: &mut [[f32; 2]], f: &dyn Fn([f64; 2]) -> [f64; 2]| {
        for (v, &m) in arr.iter_mut().zip(mask) {
            if m {
                *v = f32x2(f(f64x2(*v)));
            }
        }
    };
    masked(&s.input_mask, &mut out.inp_pos, &pos);
    masked(&s.input_mask, &mut out.inp_vel, &vec);
    masked(&s.valid_mask, &mut out.trg_pos, &pos);
    masked(&s.valid_mask, &mut out.trg_vel, &vec);
    if let Some(a) = out.inp_acc.as_mut() {
        masked(&s.input_mask, a, &vec);
    }
    if let Some(a) = out.trg_acc.as_mut() {
        masked(&s.valid_mask, a, &vec);
    }
    for (v, &m) in out.inp_psi.iter_mut().zip(&s.input_mask) {
        if m {
            *v = psi_to_f32(psi(*v as f64));
        }
    }
    for (v, &m) in out.trg_psi.iter_mut().zip(&s.valid_mask) {
        if m {
            *v = psi_to_f32(psi(*v as f64));
        }
    }
    out
}

/// Express a scenario in its TA's frame at the anchor step.
///
/// The transform is evaluated in `f64`; results are rounded to the record's
/// `f32` storage. Masked slots stay zero.
pub fn to_agent_frame(s: &Scenario) -> Result<(Scenario, AgentPose)> {
    let i = s.inp_idx(s.ta_index, s.obs_len - 1);
    if !s.input_mask[i] {
        return Err(Error::InvalidArgument(format!("{}: TA not observed at the anchor", s.scenario_id)));
    }
    let pose = AgentPose {
        origin: f64x2(s.inp_pos[i]),
        heading: s.inp_psi[i] as f64,
    };
    let out = map_scenario(s, |p| pose.pos_in(p), |v| pose.rotate_in(v), |a| pose.psi_in(a));
    Ok((out, pose))
}

/// Inverse of [`to_agent_frame`].
pub fn from_agent_frame(s: &Scenario, pose: &AgentPose) -> Scenario {
    map_scenario(s, |p| pose.pos_out(p), |v| pose.rotate_out(v), |a| pose.psi_out(a))
}
