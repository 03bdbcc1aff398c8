//! Summary statistics of written splits: scenario and trajectory counts,
//! maneuver shares and agent classes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{read_manifest, Manifest, MANIFEST_FILE};
use crate::record::MANEUVER_CLASSES;
use crate::types::{AgentClass, Split};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub split: Split,
    pub scenarios: usize,
    pub trajectories: usize,
    pub unique_agents: usize,
    pub maneuvers: [usize; MANEUVER_CLASSES],
    pub unlabeled: usize,
    pub classes: [usize; 8],
}

impl SplitStats {
    fn from_manifest(m: &Manifest) -> Self {
        SplitStats {
            split: m.split,
            scenarios: m.count,
            trajectories: m.trajectory_count,
            unique_agents: m.unique_agents,
            maneuvers: m.maneuver_histogram,
            unlabeled: m.unlabeled,
            classes: m.class_histogram,
        }
    }
}

/// Lane change left, lane keep and lane change right counts.
pub fn maneuver_groups(h: &[usize; MANEUVER_CLASSES]) -> [usize; 3] {
    [h[0] + h[1] + h[2], h[3], h[4] + h[5] + h[6]]
}

/// Percentages of `counts`, all zero when the total is zero.
pub fn percentages<const N: usize>(counts: &[usize; N]) -> [f64; N] {
    let total: usize = counts.iter().sum();
    let mut out = [0.0; N];
    if total > 0 {
        for (o, &c) in out.iter_mut().zip(counts) {
            *o = 100.0 * c as f64 / total as f64;
        }
    }
    out
}

pub const GROUP_NAMES: [&str; 3] = ["LCL", "LK", "LCR"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub dataset: String,
    pub splits: Vec<SplitStats>,
}

impl Stats {
    pub fn total_scenarios(&self) -> usize {
        self.splits.iter().map(|s| s.scenarios).sum()
    }

    pub fn total_trajectories(&self) -> usize {
        self.splits.iter().map(|s| s.trajectories).sum()
    }

    fn total_maneuvers(&self) -> [usize; MANEUVER_CLASSES] {
        let mut h = [0; MANEUVER_CLASSES];
        for s in &self.splits {
            for (a, b) in h.iter_mut().zip(&s.maneuvers) {
                *a += b;
            }
        }
        h
    }

    fn total_classes(&self) -> [usize; 8] {
        let mut h = [0; 8];
        for s in &self.splits {
            for (a, b) in h.iter_mut().zip(&s.classes) {
                *a += b;
            }
        }
        h
    }

    pub fn labeled(&self) -> bool {
        self.total_maneuvers().iter().any(|&c| c > 0)
    }

    /// Plain-text tables: counts per split as `N (T)`, maneuver groups per
    /// split when labels exist, and unique agents per class.
    pub fn table(&self) -> String {
        let mut rows: Vec<Vec<String>> = vec![vec!["split".into(), "scenarios (trajectories)".into(), "agents".into()]];
        for s in &self.splits {
            rows.push(vec![
                s.split.name().into(),
                format!("{} ({})", s.scenarios, s.trajectories),
                s.unique_agents.to_string(),
            ]);
        }
        rows.push(vec![
            "total".into(),
            format!("{} ({})", self.total_scenarios(), self.total_trajectories()),
            self.splits.iter().map(|s| s.unique_agents).sum::<usize>().to_string(),
        ]);
        let mut out = format!("dataset: {}\n\n{}", self.dataset, render_rows(&rows));

        if self.labeled() {
            let mut rows = vec![vec!["split".to_string()]];
            rows[0].extend(GROUP_NAMES.iter().map(|g| g.to_string()));
            let mut push = |name: &str, h: &[usize; MANEUVER_CLASSES]| {
                let g = maneuver_groups(h);
                let p = percentages(&g);
                let mut r = vec![name.to_string()];
                r.extend(g.iter().zip(p).map(|(c, p)| format!("{c} ({p:.1}%)")));
                rows.push(r);
            };
            for s in &self.splits {
                push(s.split.name(), &s.maneuvers);
            }
            push("total", &self.total_maneuvers());
            out += "\n";
            out += &render_rows(&rows);
        }

        let classes = self.total_classes();
        let mut rows = vec![vec!["class".to_string(), "agents".to_string()]];
        for c in AgentClass::ALL {
            let n = classes[c.token() as usize];
            if n > 0 {
                rows.push(vec![c.name().to_string(), n.to_string()]);
            }
        }
        out += "\n";
        out += &render_rows(&rows);
        out
    }
}

fn render_rows(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect();
        out += line.join("  ").trim_end();
        out.push('\n');
    }
    out
}

/// Statistics of a process output directory (with `train`, `val` and
/// `test` subdirectories) or of a single split directory.
pub fn collect_stats(dir: &Path) -> Result<Stats> {
    let manifests: Vec<Manifest> = if dir.join(MANIFEST_FILE).is_file() {
        vec![read_manifest(dir)?]
    } else {
        let found: Vec<_> = Split::ALL
            .into_iter()
            .map(|s| dir.join(s.name()))
            .filter(|d| d.join(MANIFEST_FILE).is_file())
            .collect();
        if found.is_empty() {
            return Err(Error::Format(format!("{}: no split manifests found", dir.display())));
        }
        found.iter().map(|d| read_manifest(d)).collect::<Result<_>>()?
    };
    let dataset = manifests[0].dataset.clone();
    Ok(Stats {
        dataset,
        splits: manifests.iter().map(SplitStats::from_manifest).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::{write_split, WriteOptions};
    use crate::record::tests::fixture;

    #[test]
    fn maneuver_shares() {
        let mut h = [0; MANEUVER_CLASSES];
        h[0] = 2;
        h[3] = 6;
        h[6] = 2;
        let g = maneuver_groups(&h);
        assert_eq!(g, [2, 6, 2]);
        assert_eq!(percentages(&g), [20.0, 60.0, 20.0]);
        assert_eq!(percentages(&[0usize; 3]), [0.0; 3]);
    }

    #[test]
    fn counts_from_written_split() {
        let dir = tempfile::tempdir().unwrap();
        let mut scenarios = Vec::new();
        for i in 0..10 {
            let mut s = fixture();
            s.scenario_id = format!("rec01:{i}:40");
            s.maneuver_label = Some([0, 0, 3, 3, 3, 3, 3, 3, 6, 6][i]);
            scenarios.push(s);
        }
        write_split(&scenarios, &dir.path().join("train"), &WriteOptions::new(Split::Train)).unwrap();
        write_split(&[], &dir.path().join("val"), &WriteOptions::new(Split::Val)).unwrap();
        let st = collect_stats(dir.path()).unwrap();
        assert_eq!(st.splits.len(), 2);
        assert_eq!(st.total_scenarios(), 10);
        assert_eq!(st.total_trajectories(), 30);
        let t = st.table();
        assert!(t.contains("10 (30)"), "{t}");
        assert!(t.contains("2 (20.0%)") && t.contains("6 (60.0%)"), "{t}");
        assert!(t.lines().any(|l| l.starts_with("val") && l.contains("0 (0)")), "{t}");

        let single = collect_stats(&dir.path().join("val")).unwrap();
        assert_eq!(single.total_scenarios(), 0);
        assert!(collect_stats(&dir.path().join("missing")).is_err());
    }

    #[test]
    fn corrupt_manifest_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join(MANIFEST_FILE), "{ not json").unwrap();
        assert!(collect_stats(dir.path()).is_err());
    }
}
