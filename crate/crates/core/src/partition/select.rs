//! Anchor selection: a per-agent cap followed by stratified subsampling of
//! lane-keep anchors so lane changes are not drowned out.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::AgentId;

use super::{keyed_rng, LANE_KEEP};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorCandidate {
    pub rec_id: String,
    pub agent: AgentId,
    pub anchor_frame: i64,
    pub label: Option<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectConfig {
    pub seed: u64,
    /// Anchors kept per `(agent, label)`.
    pub anchors_per_agent: usize,
    /// Target lane-keep share of the selection; `None` disables
    /// stratification.
    pub lk_fraction: Option<f64>,
}

impl Default for SelectConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            anchors_per_agent: 1,
            lk_fraction: Some(0.5),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectReport {
    pub candidates: usize,
    pub after_agent_cap: usize,
    pub lane_change: usize,
    pub lane_keep_pool: usize,
    pub lane_keep_kept: usize,
    pub warnings: Vec<String>,
}

fn label_key(label: Option<u8>) -> String {
    label.map_or_else(|| "-".to_string(), |l| l.to_string())
}

/// Select anchors from `candidates`. `pool` names the candidate pool (for
/// example the split) and keys the lane-keep subsampling RNG. Output is
/// ordered by `(rec_id, anchor_frame, agent)`.
pub fn stratified_anchor_select(
    candidates: &[AnchorCandidate],
    cfg: &SelectConfig,
    pool: &str,
) -> Result<(Vec<AnchorCandidate>, SelectReport)> {
    if let Some(f) = cfg.lk_fraction {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::InvalidArgument(format!("lane-keep fraction {f} not in (0, 1)")));
        }
    }
    if cfg.anchors_per_agent == 0 {
        return Err(Error::InvalidArgument("anchors per agent must be at least 1".into()));
    }
    let mut report = SelectReport {
        candidates: candidates.len(),
        ..SelectReport::default()
    };

    let mut groups: BTreeMap<(&str, AgentId, Option<u8>), Vec<&AnchorCandidate>> = BTreeMap::new();
    for c in candidates {
        groups.entry((c.rec_id.as_str(), c.agent, c.label)).or_default().push(c);
    }
    let mut capped: Vec<&AnchorCandidate> = Vec::new();
    for ((rec, agent, label), mut group) in groups {
        group.sort_by_key(|c| c.anchor_frame);
        group.dedup_by_key(|c| c.anchor_frame);
        if group.len() > cfg.anchors_per_agent {
            let key = format!("anchor:{rec}:{agent}:{}", label_key(label));
            group.shuffle(&mut keyed_rng(cfg.seed, &key));
            group.truncate(cfg.anchors_per_agent);
        }
        capped.extend(group);
    }
    report.after_agent_cap = capped.len();

    let mut selected: Vec<&AnchorCandidate> = match cfg.lk_fraction {
        None => capped,
        Some(f) => {
            let (mut keep, rest): (Vec<_>, Vec<_>) = capped.into_iter().partition(|c| c.label != Some(LANE_KEEP));
            let mut lane_keep = rest;
            report.lane_change = keep.iter().filter(|c| c.label.is_some()).count();
            report.lane_keep_pool = lane_keep.len();
            if report.lane_change == 0 {
                if !lane_keep.is_empty() {
                    let w = format!("{pool}: no lane-change anchors; keeping all {} lane-keep anchors", lane_keep.len());
                    log::warn!("{w}");
                    report.warnings.push(w);
                }
            } else {
                let target = (f / (1.0 - f) * report.lane_change as f64).round() as usize;
                if target < lane_keep.len() {
                    lane_keep.sort_by(|a, b| (&a.rec_id, a.agent, a.anchor_frame).cmp(&(&b.rec_id, b.agent, b.anchor_frame)));
                    lane_keep.shuffle(&mut keyed_rng(cfg.seed, &format!("lane_keep:{pool}")));
                    lane_keep.truncate(target);
                }
            }
            report.lane_keep_kept = lane_keep.len();
            keep.extend(lane_keep);
            keep
        }
    };
    selected.sort_by(|a, b| (&a.rec_id, a.anchor_frame, a.agent).cmp(&(&b.rec_id, b.anchor_frame, b.agent)));
    Ok((selected.into_iter().cloned().collect(), report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(lk: usize, lc: usize) -> Vec<AnchorCandidate> {
        (0..lk + lc)
            .map(|i| AnchorCandidate {
                rec_id: format!("r{}", i % 3),
                agent: AgentId::new(i as i64),
                anchor_frame: 20 + (i % 7) as i64,
                label: Some(if i < lk { LANE_KEEP } else { [0, 1, 2, 4, 5, 6][i % 6] }),
            })
            .collect()
    }

    fn histogram(sel: &[AnchorCandidate]) -> [usize; 7] {
        let mut h = [0; 7];
        for c in sel {
            h[c.label.unwrap() as usize] += 1;
        }
        h
    }

    #[test]
    fn balanced_target_keeps_all_lane_changes() {
        let (sel, rep) = stratified_anchor_select(&pool(100, 100), &SelectConfig::default(), "train").unwrap();
        assert_eq!(rep.lane_change, 100);
        assert_eq!(rep.lane_keep_kept, 100);
        assert_eq!(sel.len(), 200);
    }

    #[test]
    fn no_lane_changes_keeps_lane_keeps_with_warning() {
        let (sel, rep) = stratified_anchor_select(&pool(40, 0), &SelectConfig::default(), "val").unwrap();
        assert_eq!(sel.len(), 40);
        assert_eq!(rep.warnings.len(), 1);
    }

    #[test]
    fn fraction_outside_open_interval_rejected() {
        for f in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
            let cfg = SelectConfig {
                lk_fraction: Some(f),
                ..SelectConfig::default()
            };
            assert!(stratified_anchor_select(&pool(1, 1), &cfg, "p").is_err());
        }
    }

    #[test]
    fn one_anchor_per_agent_and_label() {
        let mut c = pool(0, 0);
        for f in 0..30 {
            for label in [LANE_KEEP, 1] {
                c.push(AnchorCandidate {
                    rec_id: "r".into(),
                    agent: AgentId::new(9),
                    anchor_frame: f,
                    label: Some(label),
                });
            }
        }
        let cfg = SelectConfig {
            lk_fraction: None,
            ..SelectConfig::default()
        };
        let (sel, rep) = stratified_anchor_select(&c, &cfg, "p").unwrap();
        assert_eq!(rep.after_agent_cap, 2);
        assert_eq!(sel.len(), 2);
        let cfg = SelectConfig {
            anchors_per_agent: 4,
            ..cfg
        };
        assert_eq!(stratified_anchor_select(&c, &cfg, "p").unwrap().0.len(), 8);
    }

    /// The emitted histogram equals a direct recomputation of the rule:
    /// every lane change survives, lane keeps are cut to
    /// `round(f / (1 - f) * n_lc)`.
    #[test]
    fn histogram_matches_rule() {
        for (lk, lc, f) in [(300, 37, 0.5), (300, 37, 0.8), (10, 90, 0.5), (500, 1, 0.3)] {
            let cands = pool(lk, lc);
            let cfg = SelectConfig {
                seed: 99,
                anchors_per_agent: 1,
                lk_fraction: Some(f),
            };
            let (sel, _) = stratified_anchor_select(&cands, &cfg, "train").unwrap();
            let mut want = histogram(&cands);
            want[3] = want[3].min((f / (1.0 - f) * lc as f64).round() as usize);
            assert_eq!(histogram(&sel), want, "{lk} {lc} {f}");
            let again = stratified_anchor_select(&cands, &cfg, "train").unwrap().0;
            assert_eq!(sel, again);
        }
    }

    #[test]
    fn output_order_is_canonical() {
        let mut c = pool(50, 20);
        let (a, _) = stratified_anchor_select(&c, &SelectConfig::default(), "p").unwrap();
        c.reverse();
        let (b, _) = stratified_anchor_select(&c, &SelectConfig::default(), "p").unwrap();
        assert_eq!(a, b);
    }
}
