use std::path::Path;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use bevtraj::exec::Execution;
use bevtraj::ingest::{descriptor_by_name, read_dataset, IngestOptions};
use bevtraj::pipeline::{process, ProcessConfig};
use bevtraj::resample::{decimate_recording, ResampleConfig};
use bevtraj::synth::{write_urban, UrbanSpec};
use bevtraj::types::Recording;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn urban_spec() -> UrbanSpec {
    UrbanSpec {
        recordings: 4,
        agents: 240,
        spanning: 40,
        frame_count: 10_000,
        ..UrbanSpec::default()
    }
}

fn ingest(dir: &Path) -> Vec<Recording> {
    let desc = descriptor_by_name("rounD").unwrap();
    read_dataset(dir, &desc, &IngestOptions::default(), Execution::Parallel).unwrap().0
}

fn decimate(c: &mut Criterion) {
    let tmp = tempfile::tempdir().unwrap();
    write_urban(tmp.path(), &urban_spec()).unwrap();
    let recordings = ingest(tmp.path());
    let cfg = ResampleConfig::default();
    let mut group = c.benchmark_group("decimate");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                for r in &recordings {
                    decimate_recording(r, &cfg, exec).unwrap();
                }
            })
        });
    }
    group.finish();
}

fn pipeline(c: &mut Criterion) {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("raw");
    write_urban(&input, &urban_spec()).unwrap();
    let mut group = c.benchmark_group("process");
    group.sample_size(10);
    for (name, exec) in MODES {
        let mut cfg = ProcessConfig::new(&input, tmp.path().join(name));
        cfg.dataset = Some("rounD".into());
        cfg.exec = exec;
        group.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| {
            b.iter(|| process(cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, decimate, pipeline);
criterion_main!(benches);
