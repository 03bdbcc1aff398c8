use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bevtraj::format::read_split;
use bevtraj::metrics::{ground_truth_predictions, write_predictions, Task};
use bevtraj::synth::{write_urban, UrbanSpec};

fn bevtraj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bevtraj")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn urban_input(root: &Path) -> PathBuf {
    let input = root.join("raw");
    write_urban(&input, &UrbanSpec::default()).unwrap();
    input
}

fn process(input: &Path, out: &Path, seed: u64) -> Output {
    bevtraj(&[
        "process",
        "--input-dir",
        s(input),
        "--output-dir",
        s(out),
        "--dataset",
        "rounD",
        "--seed",
        &seed.to_string(),
    ])
}

fn scenario_ids(dir: &Path) -> Vec<String> {
    read_split(dir).unwrap().scenarios.into_iter().map(|s| s.scenario_id).collect()
}

#[test]
fn process_stats_eval_render() {
    let tmp = tempfile::tempdir().unwrap();
    let input = urban_input(tmp.path());
    let out = tmp.path().join("out");

    let p = process(&input, &out, 0);
    assert!(p.status.success(), "{}", String::from_utf8_lossy(&p.stderr));
    let table = String::from_utf8(p.stdout).unwrap();
    assert!(table.contains("audit clean"), "{table}");

    let st = bevtraj(&["stats", s(&out), "--json"]);
    assert!(st.status.success());
    let v: serde_json::Value = serde_json::from_slice(&st.stdout).unwrap();
    assert_eq!(v["splits"].as_array().unwrap().len(), 3);

    let test_dir = out.join("test");
    let set = read_split(&test_dir).unwrap();
    assert!(!set.scenarios.is_empty());
    let preds = tmp.path().join("gt.ndjson");
    write_predictions(&preds, &ground_truth_predictions(&set.scenarios, Task::MultiAgent)).unwrap();
    let report_file = tmp.path().join("report.json");
    let e = bevtraj(&["eval", s(&test_dir), s(&preds), "--json", "--output", s(&report_file)]);
    assert!(e.status.success(), "{}", String::from_utf8_lossy(&e.stderr));
    let v: serde_json::Value = serde_json::from_slice(&e.stdout).unwrap();
    for (name, val) in v["metrics"].as_object().unwrap() {
        if name != "ANLL" {
            assert_eq!(val.as_f64().unwrap(), 0.0, "{name}");
        }
    }
    assert!(report_file.is_file());

    let svg_path = tmp.path().join("plot.svg");
    let id = &set.scenarios[0].scenario_id;
    let r = bevtraj(&["render", s(&test_dir), id, s(&svg_path)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let svg = fs::read_to_string(&svg_path).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let ta = doc.descendants().filter(|n| n.attribute("class") == Some("agent ta")).count();
    assert_eq!(ta, 1);
    assert!(svg.contains(r#"class="lane""#));
}

#[test]
fn malformed_prediction_line_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let input = urban_input(tmp.path());
    let out = tmp.path().join("out");
    assert!(process(&input, &out, 0).status.success());
    let test_dir = out.join("test");
    let set = read_split(&test_dir).unwrap();
    let preds = tmp.path().join("p.ndjson");
    write_predictions(&preds, &ground_truth_predictions(&set.scenarios, Task::MultiAgent)).unwrap();
    let mut text = fs::read_to_string(&preds).unwrap();
    text.push_str("{\"scenario_id\": 3}\n");
    let bad_line = text.lines().count();
    fs::write(&preds, text).unwrap();
    let e = bevtraj(&["eval", s(&test_dir), s(&preds)]);
    assert_eq!(e.status.code(), Some(1));
    let err = String::from_utf8_lossy(&e.stderr);
    assert!(err.contains(&format!("line {bad_line}")), "{err}");
}

#[test]
fn seeds_change_bins_and_stay_clean() {
    let tmp = tempfile::tempdir().unwrap();
    let input = urban_input(tmp.path());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(process(&input, &a, 1).status.success());
    assert!(process(&input, &b, 2).status.success());
    for d in [&a, &b] {
        let audit: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("audit.json")).unwrap()).unwrap();
        assert!(audit["violations"].as_array().unwrap().is_empty(), "{audit}");
    }
    assert_ne!(scenario_ids(&a.join("test")), scenario_ids(&b.join("test")));
}

#[test]
fn usage_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope");
    let out = tmp.path().join("out");
    let p = bevtraj(&["process", "--input-dir", s(&missing), "--output-dir", s(&out)]);
    assert_eq!(p.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&p.stderr).contains("is not a directory"));
    assert_eq!(bevtraj(&["process"]).status.code(), Some(2));
    assert_eq!(bevtraj(&["eval", s(tmp.path()), "x", "--metrics", "XYZ"]).status.code(), Some(2));
}

#[test]
fn map_subcommand_writes_graph() {
    let tmp = tempfile::tempdir().unwrap();
    let osm = tmp.path().join("straight.osm");
    fs::write(
        &osm,
        r#"<?xml version="1.0"?>
<osm version="0.6">
  <node id="1" lat="0.0" lon="0.0"><tag k="local_x" v="0"/><tag k="local_y" v="0"/></node>
  <node id="2" lat="0.0" lon="0.0"><tag k="local_x" v="10"/><tag k="local_y" v="0"/></node>
  <way id="10"><nd ref="1"/><nd ref="2"/><tag k="type" v="line_thin"/><tag k="subtype" v="solid"/></way>
</osm>
"#,
    )
    .unwrap();
    let out = tmp.path().join("straight.ndjson");
    let m = bevtraj(&["map", s(&osm), "--output", s(&out), "--json"]);
    assert!(m.status.success(), "{}", String::from_utf8_lossy(&m.stderr));
    let v: serde_json::Value = serde_json::from_slice(&m.stdout).unwrap();
    assert_eq!(v["points"], 6);
    assert_eq!(v["edges"], 5);
    assert!(out.is_file());
}
