use crate::angle::wrap_unchecked;
use crate::error::{Error, Result};

/// Speeds below this (m/s) hold the previous heading.
pub const DEFAULT_HEADING_SPEED_FLOOR: f64 = 0.1;

/// Heading of the velocity vector, wrapped to `(-pi, pi]`.
///
/// Below `speed_floor` the direction is numerically meaningless, so `prev`
/// is returned instead (0 when there is no previous sample).
pub fn estimate_heading(vx: f64, vy: f64, prev: Option<f64>, speed_floor: f64) -> Result<f64> {
    if !vx.is_finite() || !vy.is_finite() {
        return Err(Error::NonFinite("velocity"));
    }
    if vx.hypot(vy) < speed_floor {
        return Ok(prev.unwrap_or(0.0));
    }
    Ok(wrap_unchecked(vy.atan2(vx)))
}

/// Headings for a velocity sequence with low-speed hold.
pub fn estimate_headings(velocities: &[(f64, f64)], speed_floor: f64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(velocities.len());
    let mut prev = None;
    for &(vx, vy) in velocities {
        let h = estimate_heading(vx, vy, prev, speed_floor)?;
        prev = Some(h);
        out.push(h);
    }
    Ok(out)
}
