//! Recording-level train/val/test partitioning.
//!
//! Each recording's frame range is cut into ten bins that are shuffled by a
//! RNG keyed on `(seed, recording_id)`; eight become train, one val, one
//! test. Agents belong to the split of the bin holding their first frame,
//! and a scenario may only use frames from bins of its own split.

pub mod maneuver;
pub mod select;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::record::Scenario;
use crate::types::{Recording, Split};

pub use maneuver::{label_maneuver, LabelConfig, LateralFrame, LANE_KEEP};
pub use select::{stratified_anchor_select, AnchorCandidate, SelectConfig, SelectReport};

pub const NUM_BINS: usize = 10;
/// Bin labels before shuffling: eight train, one val, one test.
const LABELS: [Split; NUM_BINS] = [
    Split::Train,
    Split::Train,
    Split::Train,
    Split::Train,
    Split::Train,
    Split::Train,
    Split::Train,
    Split::Train,
    Split::Val,
    Split::Test,
];

/// RNG for one `(seed, key)` pair; stable across platforms and runs.
pub fn keyed_rng(seed: u64, key: &str) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key.as_bytes());
    ChaCha20Rng::from_seed(h.finalize().into())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinAssignment {
    pub recording_id: String,
    /// Half-open frame intervals `[start, end)` in source frames.
    pub bins: Vec<(i64, i64)>,
    pub labels: Vec<Split>,
    pub seed: u64,
    /// Source frames per frame of the recording that was binned.
    pub frame_stride: i64,
}

/// Ten tiling bins over `[0, frame_count)`, earlier bins one frame wider
/// when the count does not divide evenly.
pub fn bin_edges(frame_count: i64) -> Vec<(i64, i64)> {
    let n = NUM_BINS as i64;
    let (w, rem) = (frame_count / n, frame_count % n);
    let mut start = 0;
    (0..n)
        .map(|i| {
            let end = start + w + i64::from(i < rem);
            let b = (start, end);
            start = end;
            b
        })
        .collect()
}

pub fn assign_bins(rec: &Recording, seed: u64) -> Result<BinAssignment> {
    if rec.frame_count < NUM_BINS as i64 {
        return Err(Error::Recording {
            recording: rec.recording_id.clone(),
            message: format!("{} frames cannot fill {NUM_BINS} bins", rec.frame_count),
        });
    }
    let mut labels = LABELS.to_vec();
    labels.shuffle(&mut keyed_rng(seed, &rec.recording_id));
    let s = rec.frame_stride;
    Ok(BinAssignment {
        recording_id: rec.recording_id.clone(),
        bins: bin_edges(rec.frame_count)
            .into_iter()
            .map(|(a, b)| (a * s, b * s))
            .collect(),
        labels,
        seed,
        frame_stride: s,
    })
}

impl BinAssignment {
    /// Bin index of a source frame; frames past either end clamp to the
    /// first or last bin.
    pub fn bin_of(&self, source_frame: i64) -> usize {
        self.bins
            .partition_point(|&(_, end)| end <= source_frame)
            .min(self.bins.len() - 1)
    }

    pub fn split_of(&self, source_frame: i64) -> Split {
        self.labels[self.bin_of(source_frame)]
    }

    /// True when every source frame in `[lo, hi]` lies in a bin labeled
    /// `split`.
    pub fn window_in(&self, lo: i64, hi: i64, split: Split) -> bool {
        (self.bin_of(lo)..=self.bin_of(hi)).all(|b| self.labels[b] == split)
    }
}

/// Where a recording's splits come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SplitSource {
    Bins(BinAssignment),
    /// The dataset's own partition, honored verbatim.
    Predefined(Split),
}

impl SplitSource {
    pub fn for_recording(rec: &Recording, seed: u64) -> Result<SplitSource> {
        match rec.predefined_split {
            Some(s) => Ok(SplitSource::Predefined(s)),
            None => assign_bins(rec, seed).map(SplitSource::Bins),
        }
    }

    /// Split of a frame given in units of a recording with `frame_stride`.
    pub fn split_at(&self, frame: i64, frame_stride: i64) -> Split {
        match self {
            SplitSource::Bins(b) => b.split_of(frame * frame_stride),
            SplitSource::Predefined(s) => *s,
        }
    }

    /// Whether the frame window `[lo, hi]` (recording units) is usable by
    /// `split`. Parts of the window outside the recording are ignored.
    pub fn window_in(&self, lo: i64, hi: i64, frame_stride: i64, frame_count: i64, split: Split) -> bool {
        match self {
            SplitSource::Bins(b) => {
                let lo = lo.clamp(0, frame_count - 1);
                let hi = hi.clamp(0, frame_count - 1);
                b.window_in(lo * frame_stride, hi * frame_stride, split)
            }
            SplitSource::Predefined(s) => *s == split,
        }
    }
}

/// Owning split of every physical track: the split at its first frame.
/// Pieces of a gap-split track share one owner.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ownership {
    owners: BTreeMap<String, BTreeMap<i64, Split>>,
}

impl Ownership {
    pub fn add_recording(&mut self, rec: &Recording, source: &SplitSource) {
        let mut first: BTreeMap<i64, i64> = BTreeMap::new();
        for t in &rec.trajectories {
            let f = first.entry(t.agent_id.track).or_insert(i64::MAX);
            *f = (*f).min(t.first_frame());
        }
        let owners = first
            .into_iter()
            .map(|(track, f)| (track, source.split_at(f, rec.frame_stride)))
            .collect();
        self.owners.insert(rec.recording_id.clone(), owners);
    }

    pub fn owner(&self, rec_id: &str, track: i64) -> Option<Split> {
        self.owners.get(rec_id)?.get(&track).copied()
    }

    pub fn counts(&self) -> BTreeMap<Split, usize> {
        let mut out = BTreeMap::new();
        for s in self.owners.values().flat_map(|m| m.values()) {
            *out.entry(*s).or_insert(0) += 1;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakageViolation {
    pub rec_id: String,
    pub track: i64,
    pub splits: Vec<Split>,
}

/// Result of re-scanning emitted splits for agents scored in more than one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakageAudit {
    pub scored_agents: BTreeMap<Split, usize>,
    /// Scored agents whose owner differs from the split they are scored in.
    pub foreign_scored: usize,
    pub violations: Vec<LeakageViolation>,
}

impl LeakageAudit {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty() && self.foreign_scored == 0
    }
}

/// Scan every scored row (TA or multi-agent target) of every scenario.
pub fn leakage_audit(splits: &[(Split, &[Scenario])], ownership: Option<&Ownership>) -> LeakageAudit {
    let mut seen: BTreeMap<(String, i64), BTreeSet<Split>> = BTreeMap::new();
    let mut foreign = BTreeSet::new();
    for (split, scenarios) in splits {
        for s in *scenarios {
            for (i, a) in s.agents.iter().enumerate() {
                let scored = i == s.ta_index || s.ma_row(i).iter().any(|&m| m);
                if !scored {
                    continue;
                }
                let key = (s.rec_id.clone(), a.id.track);
                if let Some(o) = ownership {
                    if o.owner(&s.rec_id, a.id.track) != Some(*split) {
                        foreign.insert((key.clone(), *split));
                    }
                }
                seen.entry(key).or_default().insert(*split);
            }
        }
    }
    let mut scored_agents = BTreeMap::new();
    let mut violations = Vec::new();
    for ((rec_id, track), set) in seen {
        for s in &set {
            *scored_agents.entry(*s).or_insert(0) += 1;
        }
        if set.len() > 1 {
            violations.push(LeakageViolation {
                rec_id,
                track,
                splits: set.into_iter().collect(),
            });
        }
    }
    LeakageAudit {
        scored_agents,
        foreign_scored: foreign.len(),
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::tests::fixture;
    use crate::types::{AgentClass, AgentId, HeadingSource, TrackPoint, Trajectory};
    use proptest::prelude::*;

    fn recording(id: &str, frame_count: i64) -> Recording {
        Recording {
            recording_id: id.into(),
            dataset: "test".into(),
            rate_hz: 25.0,
            frame_count,
            location_id: "0".into(),
            geo_origin: None,
            trajectories: Vec::new(),
            frame_stride: 1,
            lane_markings: Vec::new(),
            origin_shift: [0.0; 2],
            predefined_split: None,
            normalized: false,
        }
    }

    fn traj(track: i64, part: Option<u32>, frames: std::ops::Range<i64>) -> Trajectory {
        Trajectory {
            agent_id: AgentId { track, part },
            class: AgentClass::Car,
            points: frames
                .map(|frame| TrackPoint {
                    frame,
                    x: 0.0,
                    y: 0.0,
                    vx: 0.0,
                    vy: 0.0,
                    psi: 0.0,
                    ax: None,
                    ay: None,
                    lane_id: None,
                })
                .collect(),
            rate_hz: 25.0,
            heading: HeadingSource::Native,
            direction: None,
        }
    }

    fn multiset(labels: &[Split]) -> [usize; 3] {
        let mut c = [0; 3];
        for l in labels {
            c[*l as usize] += 1;
        }
        c
    }

    #[test]
    fn hundred_frames_give_width_ten() {
        let b = assign_bins(&recording("r", 100), 7).unwrap();
        assert!(b.bins.iter().all(|(s, e)| e - s == 10));
        assert_eq!(multiset(&b.labels), [8, 1, 1]);
    }

    #[test]
    fn remainder_goes_to_earlier_bins() {
        let widths: Vec<i64> = bin_edges(103).iter().map(|(s, e)| e - s).collect();
        assert_eq!(widths, [11, 11, 11, 10, 10, 10, 10, 10, 10, 10]);
    }

    #[test]
    fn short_recording_rejected() {
        assert!(assign_bins(&recording("r", 9), 0).is_err());
    }

    #[test]
    fn labels_are_keyed_on_seed_and_recording() {
        let a = assign_bins(&recording("r1", 500), 1).unwrap();
        assert_eq!(a, assign_bins(&recording("r1", 500), 1).unwrap());
        let varied = (0..20u64).any(|s| assign_bins(&recording("r1", 500), s).unwrap().labels != a.labels);
        assert!(varied);
    }

    #[test]
    fn owner_is_split_at_first_frame() {
        let mut rec = recording("r", 100);
        rec.trajectories = vec![traj(1, None, 5..35), traj(2, Some(0), 50..52), traj(2, Some(1), 12..14)];
        let b = assign_bins(&rec, 3).unwrap();
        let src = SplitSource::Bins(b.clone());
        let mut own = Ownership::default();
        own.add_recording(&rec, &src);
        assert_eq!(own.owner("r", 1), Some(b.labels[0]));
        assert_eq!(own.owner("r", 2), Some(b.labels[1]));
        assert_eq!(own.owner("r", 3), None);
    }

    #[test]
    fn strided_recordings_bin_in_source_frames() {
        let mut rec = recording("r", 100);
        let b = assign_bins(&rec, 11).unwrap();
        rec.frame_stride = 5;
        let src = SplitSource::Bins(b.clone());
        assert_eq!(src.split_at(19, 5), b.labels[9]);
        assert_eq!(src.split_at(2, 5), b.labels[1]);
        let same = |lo, hi| src.window_in(lo, hi, 5, 20, b.labels[0]);
        assert!(same(-3, 1));
        assert_eq!(same(0, 2), b.labels[1] == b.labels[0]);
    }

    #[test]
    fn audit_flags_cross_split_scoring() {
        let s = fixture();
        let clean = leakage_audit(&[(Split::Train, std::slice::from_ref(&s))], None);
        assert!(clean.is_clean());
        assert_eq!(clean.scored_agents[&Split::Train], 2);
        let dirty = leakage_audit(
            &[(Split::Train, std::slice::from_ref(&s)), (Split::Test, std::slice::from_ref(&s))],
            None,
        );
        assert_eq!(dirty.violations.len(), 2);
    }

    proptest! {
        #[test]
        fn bins_tile_the_range(n in 10i64..100_000) {
            let bins = bin_edges(n);
            prop_assert_eq!(bins[0].0, 0);
            prop_assert_eq!(bins[9].1, n);
            for w in bins.windows(2) {
                prop_assert_eq!(w[0].1, w[1].0);
            }
            let widths: Vec<i64> = bins.iter().map(|(a, b)| b - a).collect();
            prop_assert!(widths.iter().max().unwrap() - widths.iter().min().unwrap() <= 1);
        }

        #[test]
        fn bin_lookup_matches_edges(n in 10i64..5_000, f in 0i64..5_000) {
            let b = assign_bins(&recording("p", n), 0).unwrap();
            let f = f % n;
            let i = b.bin_of(f);
            prop_assert!(b.bins[i].0 <= f && f < b.bins[i].1);
        }
    }
}
