//! Synthetic datasets in the on-disk formats of real ones, for tests,
//! benchmarks and trying the tool without licensed data.
//!
//! [`write_urban`] produces a rounD-style directory (per-recording track
//! CSVs plus a georeferenced Lanelet2 map); [`write_highway`] produces a
//! highD-style recording with scripted lane changes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mapgraph::{Projection, ProjectionOrigin};
use crate::partition::NUM_BINS;

const URBAN_TRACKS: &str = "recordingId,trackId,frame,trackLifetime,xCenter,yCenter,heading,width,length,xVelocity,yVelocity,xAcceleration,yAcceleration,lonVelocity,latVelocity,lonAcceleration,latAcceleration\n";
const URBAN_TRACKS_META: &str = "recordingId,trackId,initialFrame,finalFrame,numFrames,width,length,class\n";
const URBAN_RECORDING_META: &str = "recordingId,locationId,frameRate,speedLimit,weekday,startTime,duration,numTracks,numVehicles,numVRUs,latLocation,lonLocation,xUtmOrigin,yUtmOrigin,orthoPxToMeter\n";

const HIGHD_TRACKS: &str = "frame,id,x,y,width,height,xVelocity,yVelocity,xAcceleration,yAcceleration,frontSightDistance,backSightDistance,dhw,thw,ttc,precedingXVelocity,precedingId,followingId,leftPrecedingId,leftAlongsideId,leftFollowingId,rightPrecedingId,rightAlongsideId,rightFollowingId,laneId\n";
const HIGHD_TRACKS_META: &str = "id,width,height,initialFrame,finalFrame,numFrames,class,drivingDirection,traveledDistance,minXVelocity,maxXVelocity,meanXVelocity,minDHW,minTHW,minTTC,numLaneChanges\n";
const HIGHD_RECORDING_META: &str = "id,frameRate,locationId,speedLimit,month,weekDay,startTime,duration,totalDrivenDistance,totalDrivenTime,numVehicles,numCars,numTrucks,upperLaneMarkings,lowerLaneMarkings\n";

/// Geographic anchor of the synthetic urban site.
pub const URBAN_LAT: f64 = 50.78;
pub const URBAN_LON: f64 = 6.07;
pub const URBAN_LOCATION: &str = "0";

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UrbanSpec {
    pub recordings: usize,
    /// Agents over all recordings, dealt out round-robin.
    pub agents: usize,
    /// How many of `agents` cross a bin boundary.
    pub spanning: usize,
    pub frame_count: i64,
    pub rate_hz: f64,
    pub seed: u64,
}

impl Default for UrbanSpec {
    fn default() -> Self {
        Self {
            recordings: 3,
            agents: 60,
            spanning: 20,
            frame_count: 2500,
            rate_hz: 25.0,
            seed: 7,
        }
    }
}

/// One synthetic road user moving along +x with a gentle lateral sway.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthAgent {
    pub track: i64,
    pub class: &'static str,
    pub first_frame: i64,
    pub frames: i64,
    pub x0: f64,
    pub lane_y: f64,
    pub speed: f64,
    pub sway_phase: f64,
}

impl SynthAgent {
    fn size(&self) -> (f64, f64) {
        match self.class {
            "pedestrian" => (0.6, 0.6),
            "bicycle" => (0.7, 1.8),
            "truck" => (2.5, 9.0),
            _ => (1.8, 4.5),
        }
    }

    /// Position, velocity and acceleration at local time `t` seconds.
    fn state(&self, t: f64) -> ([f64; 2], [f64; 2], [f64; 2]) {
        const A: f64 = 0.3;
        const W: f64 = 0.4;
        let arg = W * t + self.sway_phase;
        (
            [self.x0 + self.speed * t, self.lane_y + A * arg.sin()],
            [self.speed, A * W * arg.cos()],
            [0.0, -A * W * W * arg.sin()],
        )
    }
}

/// Lanes of the synthetic urban road: `(center y, class, speed)`. Everyone
/// in a lane moves at the lane speed, so gaps between lane mates are fixed
/// for as long as both are present.
const URBAN_LANES: [(f64, &str, f64); 4] = [
    (0.0, "car", 10.0),
    (3.5, "car", 11.5),
    (6.1, "bicycle", 4.2),
    (8.5, "pedestrian", 1.4),
];

/// Smallest gap between lane mates that are present at the same time.
const URBAN_MIN_GAP: f64 = 8.0;
/// Entry positions are drawn from `[0, URBAN_ENTRY_SPAN)`.
const URBAN_ENTRY_SPAN: f64 = 40.0;

/// Agents of every recording of `spec`, indexed by recording.
///
/// Ingest infers a recording's extent from its tracks, so the first
/// non-spanning agent of each recording starts at frame 0 and the second
/// ends on the last frame.
pub fn urban_agents(spec: &UrbanSpec) -> Vec<Vec<SynthAgent>> {
    let mut out: Vec<Vec<SynthAgent>> = vec![Vec::new(); spec.recordings];
    let mut inside = vec![0usize; spec.recordings];
    let width = spec.frame_count / NUM_BINS as i64;
    for k in 0..spec.agents {
        let r = k % spec.recordings.max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_mul(1_000_003).wrapping_add(k as u64));
        let lane = match k % 7 {
            3 => URBAN_LANES[2],
            6 => URBAN_LANES[3],
            k2 => URBAN_LANES[k2 % 2],
        };
        let class = if lane.1 == "car" && k % 11 == 5 { "truck" } else { lane.1 };
        let (first_frame, frames) = if k < spec.spanning {
            // Straddles the boundary at the start of bin `b`.
            let b = rng.gen_range(1..NUM_BINS as i64);
            let before = rng.gen_range(width / 4..width / 2);
            let after = rng.gen_range(width / 4..width / 2);
            (b * width - before, before + after)
        } else {
            let (b, offset, frames) = match inside[r] {
                0 => (0, 0, rng.gen_range(width * 4 / 5..=width)),
                1 => {
                    let offset = rng.gen_range(0..width / 6);
                    (NUM_BINS as i64 - 1, offset, width - offset)
                }
                _ => {
                    let offset = rng.gen_range(0..width / 6);
                    (rng.gen_range(0..NUM_BINS as i64), offset, rng.gen_range(width * 4 / 5..=width - offset))
                }
            };
            inside[r] += 1;
            (b * width + offset, frames)
        };
        // Position at absolute time t is speed * t + offset; lane mates that
        // overlap in time keep their offsets at least URBAN_MIN_GAP apart.
        let speed = lane.2;
        let t0 = first_frame as f64 / spec.rate_hz;
        let mates: Vec<f64> = out[r]
            .iter()
            .filter(|a| a.lane_y == lane.0)
            .filter(|a| a.first_frame < first_frame + frames && first_frame < a.first_frame + a.frames)
            .map(|a| a.x0 - speed * a.first_frame as f64 / spec.rate_hz)
            .collect();
        let gap = |x0: f64| {
            let c = x0 - speed * t0;
            mates.iter().map(|m| (m - c).abs()).fold(f64::INFINITY, f64::min)
        };
        let mut x0 = rng.gen_range(0.0..URBAN_ENTRY_SPAN);
        for _ in 0..64 {
            if gap(x0) >= URBAN_MIN_GAP {
                break;
            }
            x0 = rng.gen_range(0.0..URBAN_ENTRY_SPAN);
        }
        let track = out[r].len() as i64;
        out[r].push(SynthAgent {
            track,
            class,
            first_frame,
            frames,
            x0,
            lane_y: lane.0,
            speed,
            sway_phase: rng.gen_range(0.0..std::f64::consts::TAU),
        });
    }
    out
}

fn urban_projection() -> Result<(Projection, f64, f64)> {
    let origin = ProjectionOrigin::utm_at(URBAN_LAT, URBAN_LON)?;
    let ProjectionOrigin::Utm { easting0, northing0, .. } = origin else {
        unreachable!("utm_at returns a UTM origin")
    };
    Ok((Projection::new(origin), easting0, northing0))
}

/// Boundary lines of the synthetic road: `(way id, y, type, subtype)`.
const URBAN_LINES: [(i64, f64, &str, &str); 5] = [
    (1001, -1.75, "curbstone", "high"),
    (1002, 1.75, "line_thin", "dashed"),
    (1003, 5.25, "line_thin", "solid"),
    (1004, 7.0, "curbstone", "low"),
    (1005, 10.0, "curbstone", "high"),
];
const URBAN_LANELETS: [(i64, i64, i64, &str); 4] = [
    (2001, 1002, 1001, "road"),
    (2002, 1003, 1002, "road"),
    (2003, 1004, 1003, "bicycle_lane"),
    (2004, 1005, 1004, "walkway"),
];
const URBAN_ROAD_X: [f64; 3] = [-20.0, 150.0, 330.0];

/// The Lanelet2 map of the synthetic site, georeferenced so that projecting
/// it with the recordings' UTM origin reproduces the local road geometry.
pub fn urban_osm() -> Result<String> {
    let (proj, _, _) = urban_projection()?;
    let mut s = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<osm version=\"0.6\" generator=\"bevtraj-synth\">\n");
    let mut node = 1;
    let mut ways = String::new();
    for (id, y, ty, sub) in URBAN_LINES {
        let mut refs = String::new();
        for x in URBAN_ROAD_X {
            let (lat, lon) = proj.inverse(x, y)?;
            writeln!(s, "  <node id=\"{node}\" lat=\"{lat:.11}\" lon=\"{lon:.11}\"/>").unwrap();
            write!(refs, "<nd ref=\"{node}\"/>").unwrap();
            node += 1;
        }
        writeln!(
            ways,
            "  <way id=\"{id}\">{refs}<tag k=\"type\" v=\"{ty}\"/><tag k=\"subtype\" v=\"{sub}\"/></way>"
        )
        .unwrap();
    }
    s += &ways;
    for (id, left, right, sub) in URBAN_LANELETS {
        writeln!(
            s,
            "  <relation id=\"{id}\"><member type=\"way\" ref=\"{left}\" role=\"left\"/><member type=\"way\" ref=\"{right}\" role=\"right\"/><tag k=\"type\" v=\"lanelet\"/><tag k=\"subtype\" v=\"{sub}\"/></relation>"
        )
        .unwrap();
    }
    s += "</osm>\n";
    Ok(s)
}

/// Write a rounD-style dataset: `data/NN_{tracks,tracksMeta,recordingMeta}.csv`
/// per recording and `maps/lanelets/0_synthetic/location0.osm`.
pub fn write_urban(dir: &Path, spec: &UrbanSpec) -> Result<()> {
    let (_, easting, northing) = urban_projection()?;
    for (r, agents) in urban_agents(spec).iter().enumerate() {
        let mut tracks = String::from(URBAN_TRACKS);
        let mut meta = String::from(URBAN_TRACKS_META);
        for a in agents {
            let (w, l) = a.size();
            let last = a.first_frame + a.frames - 1;
            writeln!(meta, "{r},{},{},{last},{},{w},{l},{}", a.track, a.first_frame, a.frames, a.class).unwrap();
            for f in a.first_frame..=last {
                let age = f - a.first_frame;
                let (p, v, acc) = a.state(age as f64 / spec.rate_hz);
                let heading = v[1].atan2(v[0]).to_degrees().rem_euclid(360.0);
                writeln!(
                    tracks,
                    "{r},{},{f},{age},{:.4},{:.4},{heading:.4},{w},{l},{:.4},{:.4},{:.4},{:.4},{:.4},0,0,0",
                    a.track, p[0], p[1], v[0], v[1], acc[0], acc[1], a.speed
                )
                .unwrap();
            }
        }
        let vrus = agents.iter().filter(|a| matches!(a.class, "pedestrian" | "bicycle")).count();
        let rec_meta = format!(
            "{URBAN_RECORDING_META}{r},{URBAN_LOCATION},{},13.89,monday,08:00,{:.2},{},{},{vrus},{URBAN_LAT},{URBAN_LON},{easting:.6},{northing:.6},0.01\n",
            spec.rate_hz,
            spec.frame_count as f64 / spec.rate_hz,
            agents.len(),
            agents.len() - vrus,
        );
        let data = dir.join("data");
        write(&data.join(format!("{r:02}_tracks.csv")), &tracks)?;
        write(&data.join(format!("{r:02}_tracksMeta.csv")), &meta)?;
        write(&data.join(format!("{r:02}_recordingMeta.csv")), &rec_meta)?;
    }
    write(&dir.join("maps/lanelets/0_synthetic/location0.osm"), &urban_osm()?)
}

/// Lane changes scripted into the highway fixture.
#[derive(Debug, Clone, PartialEq)]
pub struct HighwayScript {
    pub recording_id: String,
    /// Frame of the labeling anchor at 5 Hz.
    pub anchor_frame: i64,
    /// `(track id, expected maneuver label)`.
    pub expected: Vec<(i64, u8)>,
}

/// Image-frame y of the lower (eastbound) and upper markings.
const LOWER_MARKINGS: [f64; 4] = [20.0, 23.5, 27.0, 30.5];
const UPPER_MARKINGS: [f64; 4] = [8.0, 11.5, 15.0, 18.5];

fn lane_center(markings: &[f64; 4], lane: usize) -> f64 {
    (markings[lane] + markings[lane + 1]) / 2.0
}

/// Write a highD-style recording `01` at 25 Hz: four eastbound vehicles
/// crossing a marking 0.8 s (left), 1.2 s (left), 4.6 s (right) after the
/// anchor or keeping their lane, plus westbound and eastbound traffic.
pub fn write_highway(dir: &Path) -> Result<HighwayScript> {
    const RATE: f64 = 25.0;
    const FRAMES: i64 = 1000;
    const ANCHOR: i64 = 250;
    const SPEED: f64 = 20.0;
    const LENGTH: f64 = 4.5;
    const WIDTH: f64 = 1.8;
    // (track, start lane, crossing offset in source frames and side, label)
    type Scripted = (i64, usize, Option<(i64, bool)>, u8);
    let scripted: [Scripted; 4] = [
        (1, 1, Some((20, true)), 0),
        (2, 2, Some((30, true)), 1),
        (3, 1, Some((115, false)), 6),
        (4, 1, None, 3),
    ];
    let mut tracks = String::from(HIGHD_TRACKS);
    let mut meta = String::from(HIGHD_TRACKS_META);
    let mut row = |id: i64, f: i64, cx: f64, cy: f64, vx: f64, vy: f64, lane: i64| {
        writeln!(
            tracks,
            "{},{id},{:.4},{:.4},{LENGTH},{WIDTH},{vx:.4},{vy:.4},0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,{lane}",
            f + 1,
            cx - LENGTH / 2.0,
            cy - WIDTH / 2.0
        )
        .unwrap();
    };
    for (k, &(id, lane, change, _)) in scripted.iter().enumerate() {
        let x0 = 40.0 * k as f64;
        let y0 = lane_center(&LOWER_MARKINGS, lane);
        for f in 0..FRAMES {
            let t = f as f64 / RATE;
            let (mut y, mut vy) = (y0, 0.0);
            let mut l = 5 + lane as i64;
            if let Some((off, left)) = change {
                // Cosine lateral profile over 2 s, on the marking at the
                // crossing frame; image y decreases to the left.
                let tc = (ANCHOR + off) as f64 / RATE;
                let dy = if left { -3.5 } else { 3.5 };
                let u = ((t - tc + 1.0) / 2.0).clamp(0.0, 1.0);
                y = y0 + dy * (1.0 - (std::f64::consts::PI * u).cos()) / 2.0;
                if (0.0..1.0).contains(&u) && u > 0.0 {
                    vy = dy * std::f64::consts::PI * (std::f64::consts::PI * u).sin() / 4.0;
                }
                if f >= ANCHOR + off {
                    l = 5 + if left { lane as i64 - 1 } else { lane as i64 + 1 };
                }
            }
            row(id, f, x0 + SPEED * t, y, SPEED, vy, l);
        }
    }
    // Background traffic: two westbound and two more eastbound vehicles.
    let background = [(5, true, 0usize, 500.0), (6, true, 2, 300.0), (7, false, 0, 10.0), (8, false, 2, 90.0)];
    for &(id, westbound, lane, x0) in &background {
        let (markings, base, v) = if westbound {
            (&UPPER_MARKINGS, 2, -SPEED * 1.1)
        } else {
            (&LOWER_MARKINGS, 5, SPEED * 0.95)
        };
        let y = lane_center(markings, lane);
        for f in 0..FRAMES {
            row(id, f, x0 + v * f as f64 / RATE, y, v, 0.0, base + lane as i64);
        }
    }
    for id in 1..=8i64 {
        let direction = if (5..=6).contains(&id) { 1 } else { 2 };
        writeln!(
            meta,
            "{id},{LENGTH},{WIDTH},1,{FRAMES},{FRAMES},Car,{direction},0,0,0,0,0,0,0,0"
        )
        .unwrap();
    }
    let join = |m: &[f64; 4]| m.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(";");
    let rec_meta = format!(
        "{HIGHD_RECORDING_META}1,{RATE},1,-1,09.2017,Tue,08:00,{:.2},0,0,8,8,0,{},{}\n",
        FRAMES as f64 / RATE,
        join(&UPPER_MARKINGS),
        join(&LOWER_MARKINGS)
    );
    write(&dir.join("01_tracks.csv"), &tracks)?;
    write(&dir.join("01_tracksMeta.csv"), &meta)?;
    write(&dir.join("01_recordingMeta.csv"), &rec_meta)?;
    Ok(HighwayScript {
        recording_id: "01".into(),
        anchor_frame: ANCHOR / 5,
        expected: scripted.iter().map(|s| (s.0, s.3)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lane_mates_never_overlap() {
        let spec = UrbanSpec::default();
        for agents in urban_agents(&spec) {
            for (i, a) in agents.iter().enumerate() {
                for b in &agents[i + 1..] {
                    if a.lane_y != b.lane_y {
                        continue;
                    }
                    let lo = a.first_frame.max(b.first_frame);
                    let hi = (a.first_frame + a.frames).min(b.first_frame + b.frames);
                    for f in lo..hi {
                        let pa = a.state((f - a.first_frame) as f64 / spec.rate_hz).0;
                        let pb = b.state((f - b.first_frame) as f64 / spec.rate_hz).0;
                        assert!((pa[0] - pb[0]).abs() >= URBAN_MIN_GAP - 1e-9, "tracks {} and {}", a.track, b.track);
                    }
                }
            }
        }
    }

    #[test]
    fn extent_covers_every_frame() {
        let spec = UrbanSpec::default();
        for agents in urban_agents(&spec) {
            assert_eq!(agents.iter().map(|a| a.first_frame).min(), Some(0));
            assert_eq!(agents.iter().map(|a| a.first_frame + a.frames).max(), Some(spec.frame_count));
        }
    }
}
