//! Acceptance run: one line per criterion, nonzero exit if any fails.
//!
//! Criterion 9 needs a real levelX-format recording and runs only when
//! `BEVTRAJ_LEVELX_DIR` points at one (with `BEVTRAJ_LEVELX_DATASET`
//! naming the dataset, default `inD`).

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bevtraj::exec::Execution;
use bevtraj::format::read_split;
use bevtraj::ingest::{descriptor_by_name, read_dataset, IngestOptions};
use bevtraj::mapgraph::{build_lane_graph, etype, parse_lanelet_osm_str, project_map, write_lane_graph};
use bevtraj::metrics::{
    self, anll, apde, brier_fde, collisions, evaluate, fde, ground_truth_predictions, miss_rate, select_mode,
    write_predictions, BrierMode, CollisionRule, EvalConfig, Family, ModeRule, Task, Track, Xy,
};
use bevtraj::partition::{assign_bins, bin_edges, label_maneuver, LabelConfig, LateralFrame};
use bevtraj::pipeline::{process, ProcessConfig};
use bevtraj::record::{Scenario, DEFAULT_MAX_SCORED_NEIGHBORS, DEFAULT_MIN_NEIGHBOR_FUTURE};
use bevtraj::resample::{decimate_recording, decimate_trajectory, design_chebyshev1, FilterSpec, ResampleConfig};
use bevtraj::scenario::{normalize_coordinates, Normalization};
use bevtraj::stats::collect_stats;
use bevtraj::synth::{urban_agents, write_highway, write_urban, UrbanSpec};
use bevtraj::types::{AgentClass, AgentId, HeadingSource, Split, TrackPoint, Trajectory};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || {
        format!("took {:.2} s, limit {limit_s} s", elapsed.as_secs_f64())
    })
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

fn tmpdir() -> tempfile::TempDir {
    tempfile::tempdir().expect("temp dir")
}

// Straightforward reference formulas for the metric check.
mod naive {
    use super::*;

    pub fn dist(a: Xy, b: Xy) -> f64 {
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }

    pub fn last(valid: &[bool]) -> usize {
        let mut n = 0;
        for (k, &v) in valid.iter().enumerate() {
            if v {
                n = k;
            }
        }
        n
    }

    pub fn best_mode(modes: &[Vec<Xy>], gt: &[Xy], valid: &[bool]) -> usize {
        let n = last(valid);
        let errs: Vec<f64> = modes.iter().map(|m| dist(m[n], gt[n])).collect();
        let min = errs.iter().cloned().fold(f64::INFINITY, f64::min);
        errs.iter().position(|&e| e == min).unwrap()
    }

    pub fn ade(p: &[Xy], g: &[Xy], valid: &[bool]) -> f64 {
        let idx: Vec<usize> = (0..g.len()).filter(|&k| valid[k]).collect();
        idx.iter().map(|&k| dist(p[k], g[k])).sum::<f64>() / idx.len() as f64
    }

    pub fn apde(p: &[Xy], g: &[Xy], valid: &[bool]) -> f64 {
        let idx: Vec<usize> = (0..g.len()).filter(|&k| valid[k]).collect();
        let mut total = 0.0;
        for &k in &idx {
            let mut best = f64::INFINITY;
            for &i in &idx {
                best = best.min(dist(p[k], g[i]));
            }
            total += best;
        }
        total / idx.len() as f64
    }

    fn density(family: Family, mean: Xy, scale: Xy, x: Xy) -> f64 {
        let mut d = 1.0;
        for a in 0..2 {
            let s = scale[a].max(1e-6);
            let z = (x[a] - mean[a]) / s;
            d *= match family {
                Family::Gaussian => (-0.5 * z * z).exp() / ((2.0 * PI).sqrt() * s),
                Family::Laplace => (-z.abs()).exp() / (2.0 * s),
            };
        }
        d
    }

    pub fn anll(family: Family, means: &[Vec<Xy>], scales: &[Vec<Xy>], probs: &[f64], g: &[Xy], valid: &[bool]) -> f64 {
        let idx: Vec<usize> = (0..g.len()).filter(|&k| valid[k]).collect();
        let mut total = 0.0;
        for &k in &idx {
            let mix: f64 = (0..means.len()).map(|j| probs[j] * density(family, means[j][k], scales[j][k], g[k])).sum();
            total -= mix.ln();
        }
        total / idx.len() as f64
    }

    pub fn colliding(preds: &[&[Xy]], valids: &[&[bool]], threshold: f64) -> Vec<bool> {
        let n = preds.len();
        let mut out = vec![false; n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                for k in 0..preds[i].len() {
                    if valids[i][k] && valids[j][k] && dist(preds[i][k], preds[j][k]) < threshold {
                        out[i] = true;
                    }
                }
            }
        }
        out
    }

    pub fn colliding_gt(preds: &[&[Xy]], gts: &[&[Xy]], valids: &[&[bool]], threshold: f64) -> Vec<bool> {
        let n = preds.len();
        let mut out = vec![false; n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                for k in 0..preds[i].len() {
                    if valids[i][k] && valids[j][k] && dist(preds[i][k], gts[j][k]) < threshold {
                        out[i] = true;
                    }
                }
            }
        }
        out
    }
}

struct Agent {
    gt: Vec<Xy>,
    valid: Vec<bool>,
    modes: Vec<Vec<Xy>>,
    scales: Vec<Vec<Xy>>,
    probs: Vec<f64>,
}

fn random_agent(rng: &mut ChaCha8Rng, k: usize, offset: Xy) -> Agent {
    const N: usize = 25;
    let mut gt = Vec::with_capacity(N);
    let (mut x, mut y) = (offset[0], offset[1]);
    let (vx, vy) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
    for _ in 0..N {
        x += vx + rng.gen_range(-0.2..0.2);
        y += vy + rng.gen_range(-0.2..0.2);
        gt.push([x, y]);
    }
    let mut valid: Vec<bool> = (0..N).map(|_| rng.gen_bool(0.85)).collect();
    valid[N - 1] = true;
    let modes = (0..k)
        .map(|_| {
            let spread = rng.gen_range(0.0..3.0);
            gt.iter()
                .map(|g| [g[0] + rng.gen_range(-spread..=spread), g[1] + rng.gen_range(-spread..=spread)])
                .collect()
        })
        .collect();
    let scales = (0..k)
        .map(|_| (0..N).map(|_| [rng.gen_range(0.2..2.5), rng.gen_range(0.2..2.5)]).collect())
        .collect();
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    Agent {
        gt,
        valid,
        modes,
        scales,
        probs: raw.iter().map(|p| p / sum).collect(),
    }
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut compared = 0usize;
    for inst in 0..1000 {
        let k = rng.gen_range(1..=6);
        let n_agents = rng.gen_range(1..=4);
        let family = if rng.gen_bool(0.5) { Family::Gaussian } else { Family::Laplace };
        let agents: Vec<Agent> = (0..n_agents)
            .map(|_| {
                let off = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
                random_agent(&mut rng, k, off)
            })
            .collect();

        let mut lib: BTreeMap<&str, f64> = BTreeMap::new();
        let mut oracle: BTreeMap<&str, f64> = BTreeMap::new();
        let mut sel = Vec::new();
        let mut fdes_lib = Vec::new();
        let mut fdes_ref = Vec::new();
        for a in &agents {
            let j = select_mode(&a.modes, &a.probs, &a.gt, &a.valid, ModeRule::MinFde);
            let jr = naive::best_mode(&a.modes, &a.gt, &a.valid);
            ensure(j == jr, || format!("instance {inst}: mode {j} vs {jr}"))?;
            sel.push(j);
            let m = &a.modes[j];
            let f = fde(m, &a.gt, &a.valid).map_err(|e| e.to_string())?;
            let fr = naive::dist(m[naive::last(&a.valid)], a.gt[naive::last(&a.valid)]);
            fdes_lib.push(f);
            fdes_ref.push(fr);
            let add = |map: &mut BTreeMap<&str, f64>, key, v: f64| *map.entry(key).or_default() += v / n_agents as f64;
            add(&mut lib, "ADE", metrics::ade(m, &a.gt, &a.valid).map_err(|e| e.to_string())?);
            add(&mut oracle, "ADE", naive::ade(m, &a.gt, &a.valid));
            add(&mut lib, "FDE", f);
            add(&mut oracle, "FDE", fr);
            add(&mut lib, "APDE", apde(m, &a.gt, &a.valid).map_err(|e| e.to_string())?);
            add(&mut oracle, "APDE", naive::apde(m, &a.gt, &a.valid));
            add(&mut lib, "BFDE", brier_fde(f, a.probs[j], BrierMode::Multiplicative).map_err(|e| e.to_string())?);
            add(&mut oracle, "BFDE", (1.0 - a.probs[j]) * (1.0 - a.probs[j]) * fr);
            add(
                &mut lib,
                "ANLL",
                anll(family, &a.modes, &a.scales, &a.probs, &a.gt, &a.valid).map_err(|e| e.to_string())?,
            );
            add(&mut oracle, "ANLL", naive::anll(family, &a.modes, &a.scales, &a.probs, &a.gt, &a.valid));
        }
        lib.insert("MR", miss_rate(&fdes_lib, 2.0).map_err(|e| e.to_string())?);
        oracle.insert("MR", fdes_ref.iter().filter(|&&f| f > 2.0).count() as f64 / n_agents as f64);

        let tracks: Vec<Track> = agents
            .iter()
            .zip(&sel)
            .map(|(a, &j)| Track {
                pred: &a.modes[j],
                valid: &a.valid,
            })
            .collect();
        let rows: Vec<usize> = (0..n_agents).collect();
        let others: Vec<(usize, &[Xy], &[bool])> = agents
            .iter()
            .enumerate()
            .map(|(i, a)| (i, a.gt.as_slice(), a.valid.as_slice()))
            .collect();
        let rate = |hits: &[bool]| hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64;
        let preds: Vec<&[Xy]> = tracks.iter().map(|t| t.pred).collect();
        let gts: Vec<&[Xy]> = agents.iter().map(|a| a.gt.as_slice()).collect();
        let valids: Vec<&[bool]> = agents.iter().map(|a| a.valid.as_slice()).collect();
        lib.insert("CR", rate(&collisions(&tracks, &rows, &others, CollisionRule::PredPred, 1.0)));
        oracle.insert("CR", rate(&naive::colliding(&preds, &valids, 1.0)));
        lib.insert("CR_gt", rate(&collisions(&tracks, &rows, &others, CollisionRule::PredGt, 1.0)));
        oracle.insert("CR_gt", rate(&naive::colliding_gt(&preds, &gts, &valids, 1.0)));

        for (name, &v) in &lib {
            let r = oracle[name];
            let tol = if *name == "ANLL" { 1e-7 } else { 1e-9 };
            ensure(rel_close(v, r, tol), || format!("instance {inst} {name}: {v} vs oracle {r}"))?;
            compared += 1;
        }
    }
    within(start.elapsed(), 10.0)?;
    Ok(format!("1000 instances, {compared} values agree"))
}

fn criterion_2() -> Check {
    let gt: Vec<Xy> = (0..5).map(|k| [k as f64, 0.0]).collect();
    let off: Vec<Xy> = gt.iter().map(|g| [g[0] + 3.0, g[1] + 4.0]).collect();
    let all = vec![true; 5];
    let ade = metrics::ade(&off, &gt, &all).map_err(|e| e.to_string())?;
    ensure(ade == 5.0, || format!("offset ADE {ade}"))?;

    let pred = [[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]];
    let g = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
    let v = apde(&pred, &g, &[true; 3]).map_err(|e| e.to_string())?;
    ensure((v - 1.0 / 3.0).abs() < 1e-15, || format!("APDE {v}"))?;

    let b = brier_fde(2.0, 0.5, BrierMode::Multiplicative).map_err(|e| e.to_string())?;
    ensure(b == 0.5, || format!("Brier {b}"))?;

    let means = vec![g.to_vec()];
    let scales = vec![vec![[1.0, 1.0]; 3]];
    let nll = anll(Family::Gaussian, &means, &scales, &[1.0], &g, &[true; 3]).map_err(|e| e.to_string())?;
    ensure((nll - (2.0 * PI).ln()).abs() <= 1e-9, || format!("ANLL {nll}"))?;
    Ok(format!("ADE {ade}, APDE {v:.6}, Brier {b}, ANLL {nll:.10}"))
}

fn criterion_3() -> Check {
    let start = Instant::now();
    let spec = FilterSpec::default();
    let c = design_chebyshev1(&spec, 25.0, 5.0).map_err(|e| e.to_string())?;
    let stop = c.gain(10.0, 25.0);
    ensure(stop < 0.05, || format!("|H(10 Hz)| = {stop}"))?;
    let dc = c.dc_gain();
    let floor = 10f64.powf(-spec.ripple_db / 20.0);
    ensure(dc >= floor - 1e-9 && dc <= 1.0 + 1e-9, || format!("DC gain {dc} outside [{floor}, 1]"))?;

    let points = (0..500)
        .map(|i| {
            let t = i as f64 / 25.0;
            TrackPoint {
                frame: i,
                x: (2.0 * PI * 10.0 * t + 0.3).cos(),
                y: 0.0,
                vx: 1.0,
                vy: 0.0,
                psi: 0.0,
                ax: None,
                ay: None,
                lane_id: None,
            }
        })
        .collect();
    let traj = Trajectory {
        agent_id: AgentId::new(1),
        class: AgentClass::Car,
        points,
        rate_hz: 25.0,
        heading: HeadingSource::Native,
        direction: None,
    };
    let d = decimate_trajectory(&traj, &spec, 5.0).map_err(|e| e.to_string())?;
    // Central half of the output; the ends carry the zero-phase edge transient.
    let out = &d.trajectory.points;
    let amp = out[out.len() / 4..3 * out.len() / 4].iter().map(|p| p.x.abs()).fold(0.0, f64::max);
    ensure(amp < 0.05, || format!("decimated 10 Hz amplitude {amp}"))?;
    within(start.elapsed(), 1.0)?;
    Ok(format!("|H(10 Hz)| {stop:.2e}, DC {dc:.6}, residual amplitude {amp:.4}"))
}

fn dir_bytes(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn run_process(input: &Path, out: &Path, dataset: &str, seed: u64) -> Result<bevtraj::pipeline::ProcessReport, String> {
    let mut cfg = ProcessConfig::new(input, out);
    cfg.dataset = Some(dataset.into());
    cfg.seed = seed;
    process(&cfg).map_err(|e| e.to_string())
}

fn criterion_4() -> Check {
    let start = Instant::now();
    let tmp = tmpdir();
    let spec = UrbanSpec::default();
    let input = tmp.path().join("raw");
    write_urban(&input, &spec).map_err(|e| e.to_string())?;

    let edges: Vec<i64> = bin_edges(spec.frame_count).iter().skip(1).map(|b| b.0).collect();
    let spanning = urban_agents(&spec)
        .iter()
        .flatten()
        .filter(|a| edges.iter().any(|&e| a.first_frame < e && a.first_frame + a.frames > e))
        .count();
    ensure(spanning >= spec.spanning, || format!("only {spanning} bin-spanning agents"))?;

    let desc = descriptor_by_name("rounD").map_err(|e| e.to_string())?;
    let (recs, _) = read_dataset(&input, &desc, &IngestOptions::default(), Execution::default()).map_err(|e| e.to_string())?;
    ensure(recs.len() == 3, || format!("{} recordings", recs.len()))?;
    let seed = 11;
    for r in &recs {
        let b = assign_bins(r, seed).map_err(|e| e.to_string())?;
        let count = |s: Split| b.labels.iter().filter(|&&l| l == s).count();
        ensure(b.bins.len() == 10, || format!("{}: {} bins", r.recording_id, b.bins.len()))?;
        ensure(
            (count(Split::Train), count(Split::Val), count(Split::Test)) == (8, 1, 1),
            || format!("{}: labels {:?}", r.recording_id, b.labels),
        )?;
    }

    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let report = run_process(&input, &a, "rounD", seed)?;
    ensure(report.audit.is_clean(), || format!("audit {:?}", report.audit.violations))?;
    ensure(report.audit.violations.is_empty(), || "agents scored in two splits".into())?;
    run_process(&input, &b, "rounD", seed)?;
    ensure(dir_bytes(&a) == dir_bytes(&b), || "reruns differ".into())?;
    within(start.elapsed(), 5.0)?;
    let total: usize = report.splits.iter().map(|s| s.scenarios).sum();
    Ok(format!("{spanning} spanning agents, 3x10 bins 8/1/1, clean audit, {total} scenarios byte-identical"))
}

fn criterion_5() -> Check {
    let tmp = tmpdir();
    let script = write_highway(tmp.path()).map_err(|e| e.to_string())?;
    let desc = descriptor_by_name("highD").map_err(|e| e.to_string())?;
    let (recs, _) = read_dataset(tmp.path(), &desc, &IngestOptions::default(), Execution::default()).map_err(|e| e.to_string())?;
    let rec = recs
        .iter()
        .find(|r| r.recording_id == script.recording_id)
        .ok_or("highway recording missing")?;
    let (dec, _) = decimate_recording(rec, &ResampleConfig::default(), Execution::default()).map_err(|e| e.to_string())?;
    let norm = normalize_coordinates(&dec, Normalization::DirectionSplit).map_err(|e| e.to_string())?;
    let cfg = LabelConfig {
        lateral: LateralFrame::Global,
        ..LabelConfig::default()
    };
    let mut got = Vec::new();
    for &(track, want) in &script.expected {
        let t = norm
            .trajectories
            .iter()
            .find(|t| t.agent_id.track == track)
            .ok_or_else(|| format!("track {track} missing"))?;
        let i = t
            .points
            .iter()
            .position(|p| p.frame == script.anchor_frame)
            .ok_or_else(|| format!("track {track} has no anchor frame"))?;
        let l = label_maneuver(t, i, &cfg).map_err(|e| e.to_string())?;
        ensure(l == want, || format!("track {track}: label {l}, expected {want}"))?;
        got.push(l);
    }
    Ok(format!("labels {got:?}"))
}

/// Shape and mask contract, checked directly on the arrays.
fn check_scenario(s: &Scenario) -> Result<(), String> {
    let id = &s.scenario_id;
    let (a, ti, to) = (s.num_agents(), s.obs_len, s.pred_len);
    ensure(ti == 15 && to == 25, || format!("{id}: windows {ti}/{to}"))?;
    for (name, len, want) in [
        ("inp_pos", s.inp_pos.len(), a * ti),
        ("input_mask", s.input_mask.len(), a * ti),
        ("trg_pos", s.trg_pos.len(), a * to),
        ("valid_mask", s.valid_mask.len(), a * to),
        ("sa_mask", s.sa_mask.len(), a * to),
        ("ma_mask", s.ma_mask.len(), a * to),
    ] {
        ensure(len == want, || format!("{id}: {name} has {len}, expected {want}"))?;
    }
    let ta = s.ta_index;
    ensure(s.input_mask[ta * ti + ti - 1], || format!("{id}: TA unobserved at anchor"))?;
    let mut neighbors = 0;
    for r in 0..a {
        let row = r * to..(r + 1) * to;
        let valid = &s.valid_mask[row.clone()];
        let sa = &s.sa_mask[row.clone()];
        let ma = &s.ma_mask[row];
        let n_valid = valid.iter().filter(|&&v| v).count();
        for k in 0..to {
            ensure(!sa[k] || valid[k], || format!("{id}: sa outside valid, row {r}"))?;
            ensure(!ma[k] || valid[k], || format!("{id}: ma outside valid, row {r}"))?;
            if !valid[k] {
                ensure(s.trg_pos[r * to + k] == [0.0, 0.0], || format!("{id}: masked target not zero"))?;
            }
        }
        if r == ta {
            ensure(n_valid == to, || format!("{id}: TA has {n_valid} valid future steps"))?;
            ensure(sa == valid && ma == valid, || format!("{id}: TA masks differ from valid"))?;
        } else {
            ensure(sa.iter().all(|&m| !m), || format!("{id}: sa set on row {r}"))?;
            if ma.iter().any(|&m| m) {
                neighbors += 1;
                ensure(n_valid >= DEFAULT_MIN_NEIGHBOR_FUTURE, || {
                    format!("{id}: scored row {r} has {n_valid} valid steps")
                })?;
            }
        }
    }
    for r in 0..a {
        for k in 0..ti {
            if !s.input_mask[r * ti + k] {
                ensure(s.inp_pos[r * ti + k] == [0.0, 0.0], || format!("{id}: masked input not zero"))?;
            }
        }
    }
    ensure(neighbors <= DEFAULT_MAX_SCORED_NEIGHBORS, || format!("{id}: {neighbors} scored neighbors"))
}

fn criterion_6() -> Check {
    let tmp = tmpdir();
    let urban = tmp.path().join("urban");
    let highway = tmp.path().join("highway");
    write_urban(&urban, &UrbanSpec::default()).map_err(|e| e.to_string())?;
    write_highway(&highway).map_err(|e| e.to_string())?;
    let mut checked = 0;
    for (input, dataset) in [(&urban, "rounD"), (&highway, "highD")] {
        let out = tmp.path().join(format!("{dataset}-out"));
        run_process(input, &out, dataset, 0)?;
        for split in Split::ALL {
            let set = read_split(&out.join(split.name())).map_err(|e| e.to_string())?;
            for s in &set.scenarios {
                check_scenario(s)?;
                checked += 1;
            }
        }
    }
    ensure(checked > 0, || "no scenarios emitted".into())?;
    Ok(format!("{checked} scenarios satisfy the contract"))
}

const LANE_OSM: &[&str] = &[
    r#"<node id="1" lat="0" lon="0"><tag k="local_x" v="0"/><tag k="local_y" v="0"/></node>"#,
    r#"<node id="2" lat="0" lon="0"><tag k="local_x" v="10"/><tag k="local_y" v="0"/></node>"#,
    r#"<node id="3" lat="0" lon="0"><tag k="local_x" v="0"/><tag k="local_y" v="3.5"/></node>"#,
    r#"<node id="4" lat="0" lon="0"><tag k="local_x" v="10"/><tag k="local_y" v="3.5"/></node>"#,
    r#"<node id="5" lat="0" lon="0"><tag k="local_x" v="20"/><tag k="local_y" v="3.5"/></node>"#,
    r#"<way id="10"><nd ref="1"/><nd ref="2"/><tag k="type" v="line_thin"/><tag k="subtype" v="solid"/></way>"#,
    r#"<way id="11"><nd ref="3"/><nd ref="4"/><nd ref="5"/><tag k="type" v="line_thin"/><tag k="subtype" v="dashed"/></way>"#,
    r#"<relation id="20"><member type="way" ref="11" role="left"/><member type="way" ref="10" role="right"/><tag k="type" v="lanelet"/></relation>"#,
];

fn compile(elements: &[&str], dir: &Path, name: &str) -> Result<(Vec<u8>, bevtraj::mapgraph::LaneGraph), String> {
    let text = format!("<osm version=\"0.6\">\n{}\n</osm>\n", elements.join("\n"));
    let raw = parse_lanelet_osm_str(&text).map_err(|e| e.to_string())?;
    let g = build_lane_graph(&project_map(&raw, None).map_err(|e| e.to_string())?, 2.0).map_err(|e| e.to_string())?;
    let path = dir.join(name);
    write_lane_graph(&path, "fixture", [0.0, 0.0], &g).map_err(|e| e.to_string())?;
    Ok((fs::read(&path).unwrap(), g))
}

fn criterion_7() -> Check {
    let tmp = tmpdir();
    let (_, straight) = compile(&[LANE_OSM[0], LANE_OSM[1], LANE_OSM[5]], tmp.path(), "straight.ndjson")?;
    ensure(straight.points.len() == 6 && straight.edges.len() == 5, || {
        format!("straight way: {} points, {} edges", straight.points.len(), straight.edges.len())
    })?;

    let (reference, g) = compile(LANE_OSM, tmp.path(), "ref.ndjson")?;
    let successive = g.edges.iter().filter(|e| e.etype == etype::SUCCESSIVE).count();
    ensure(g.points.len() == 17 && successive == 15, || {
        format!("lanelet fixture: {} points, {successive} successive edges", g.points.len())
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..20 {
        let mut shuffled = LANE_OSM.to_vec();
        shuffled.shuffle(&mut rng);
        let (bytes, _) = compile(&shuffled, tmp.path(), &format!("p{trial}.ndjson"))?;
        ensure(bytes == reference, || format!("permutation {trial} changes the graph"))?;
    }
    Ok(format!("straight 6/5, lanelet fixture {} points {} edges, 20 permutations identical", g.points.len(), g.edges.len()))
}

fn criterion_8() -> Check {
    let start = Instant::now();
    let tmp = tmpdir();
    let input = tmp.path().join("raw");
    write_urban(&input, &UrbanSpec::default()).map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        run_process(&input, &out, "rounD", 4)?;
        let stats = collect_stats(&out).map_err(|e| e.to_string())?;
        let table = stats.table();
        ensure(stats.total_scenarios() > 0, || "no scenarios".into())?;
        let split_dir = out.join("test");
        let set = read_split(&split_dir).map_err(|e| e.to_string())?;
        let preds = tmp.path().join(format!("{run}-gt.ndjson"));
        write_predictions(&preds, &ground_truth_predictions(&set.scenarios, Task::MultiAgent)).map_err(|e| e.to_string())?;
        let report = evaluate(&split_dir, &preds, &EvalConfig::default()).map_err(|e| e.to_string())?;
        for name in ["ade", "fde", "apde", "mr", "cr", "bfde"] {
            let v = report.metrics.get(name).copied().ok_or_else(|| format!("{name} missing"))?;
            ensure(v == 0.0, || format!("{name} = {v}"))?;
        }
        let report_json = serde_json::to_vec(&report).unwrap();
        runs.push((dir_bytes(&out), table, report_json, fs::read(&preds).unwrap()));
    }
    ensure(runs[0] == runs[1], || "outputs differ between runs".into())?;
    within(start.elapsed(), 30.0)?;
    Ok(format!("{} output files identical, distance metrics 0", runs[0].0.len()))
}

fn criterion_9() -> Option<Check> {
    let dir = PathBuf::from(std::env::var_os("BEVTRAJ_LEVELX_DIR")?);
    let dataset = std::env::var("BEVTRAJ_LEVELX_DATASET").unwrap_or_else(|_| "inD".into());
    let tmp = tmpdir();
    let run = || -> Check {
        let report = run_process(&dir, tmp.path(), &dataset, 0)?;
        ensure(report.audit.is_clean(), || "leakage audit failed".into())?;
        let stats = collect_stats(tmp.path()).map_err(|e| e.to_string())?;
        println!("{}", stats.table());
        Ok(format!("{} scenarios, {} trajectories", stats.total_scenarios(), stats.total_trajectories()))
    };
    Some(run())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("metric oracle equivalence", criterion_1),
        ("hand-checked metric values", criterion_2),
        ("anti-aliasing filter attenuation", criterion_3),
        ("split correctness", criterion_4),
        ("maneuver labels", criterion_5),
        ("scenario shape contract", criterion_6),
        ("lane-graph fixture", criterion_7),
        ("end-to-end determinism", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name} ({secs:.2} s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} ({secs:.2} s): {why}", i + 1);
            }
        }
    }
    match criterion_9() {
        None => println!("criterion 9: SKIP  real-data smoke run (BEVTRAJ_LEVELX_DIR not set)"),
        Some(Ok(detail)) => println!("criterion 9: PASS  real-data smoke run: {detail}"),
        Some(Err(why)) => {
            failed += 1;
            println!("criterion 9: FAIL  real-data smoke run: {why}");
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
