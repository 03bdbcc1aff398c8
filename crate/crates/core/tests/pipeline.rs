use std::fs;
use std::path::Path;

use bevtraj::exec::Execution;
use bevtraj::format::read_split;
use bevtraj::pipeline::{process, ProcessConfig, ProcessReport};
use bevtraj::record::ScenarioLimits;
use bevtraj::synth::{write_highway, write_urban, UrbanSpec};
use bevtraj::types::Split;

fn run(input: &Path, out: &Path, dataset: &str, seed: u64, exec: Execution) -> ProcessReport {
    let mut cfg = ProcessConfig::new(input, out);
    cfg.dataset = Some(dataset.into());
    cfg.seed = seed;
    cfg.exec = exec;
    process(&cfg).unwrap()
}

#[test]
fn urban_fixture_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("raw");
    write_urban(&input, &UrbanSpec::default()).unwrap();
    let out = dir.path().join("out");
    let report = run(&input, &out, "rounD", 3, Execution::Parallel);
    println!("{}", report.table());
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    assert!(report.audit.is_clean());
    assert_eq!(report.maps, vec!["0".to_string()]);
    let mut total = 0;
    for split in Split::ALL {
        let set = read_split(&out.join(split.name())).unwrap();
        for s in &set.scenarios {
            s.validate(&ScenarioLimits::default()).unwrap();
            assert_eq!(s.map_ref.as_deref(), Some("0"));
            assert!(s.maneuver_label.is_none());
        }
        total += set.manifest.count;
    }
    assert_eq!(total, report.splits.iter().map(|s| s.scenarios).sum::<usize>());
    assert!(total > 0);
}

#[test]
fn sequential_and_parallel_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("raw");
    write_urban(&input, &UrbanSpec::default()).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run(&input, &a, "rounD", 11, Execution::Sequential);
    run(&input, &b, "rounD", 11, Execution::Parallel);
    for rel in ["train/manifest.json", "train/scenarios.ndjson", "val/manifest.json", "test/manifest.json", "maps/0.ndjson", "audit.json"] {
        assert_eq!(fs::read(a.join(rel)).unwrap(), fs::read(b.join(rel)).unwrap(), "{rel}");
    }
}

#[test]
fn highway_fixture_is_labeled() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("raw");
    write_highway(&input).unwrap();
    let out = dir.path().join("out");
    let report = run(&input, &out, "highD", 5, Execution::Parallel);
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    assert!(report.audit.is_clean());
    assert_eq!(report.maps, vec!["01-d1".to_string(), "01-d2".to_string()]);
    for split in Split::ALL {
        let set = read_split(&out.join(split.name())).unwrap();
        for s in &set.scenarios {
            assert!(s.maneuver_label.is_some_and(|l| l < 7));
            assert!(s.map_ref.as_deref().is_some_and(|m| m.starts_with("01-d")));
        }
    }
}
