use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bevtraj::exec::Execution;
use bevtraj::mapgraph::{build_lane_graph, parse_lanelet_osm, project_map, read_lane_graph, write_lane_graph};
use bevtraj::mapgraph::{Projection, ProjectionOrigin, DEFAULT_SPACING};
use bevtraj::metrics::{BrierMode, CollisionRule, EvalConfig, Metric, MetricReport, ModeRule, Task};
use bevtraj::pipeline::{map_path, process, ProcessConfig};
use bevtraj::record::{DEFAULT_MAX_SCORED_NEIGHBORS, DEFAULT_MIN_NEIGHBOR_FUTURE, DEFAULT_OBS_LEN, DEFAULT_PRED_LEN};
use bevtraj::resample::{DecimationPhase, DEFAULT_TARGET_RATE_HZ};
use bevtraj::scenario::AgentFrame;
use bevtraj::{format, metrics, render, stats, Error};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bevtraj", version, about = "Prepare and evaluate bird's-eye-view trajectory prediction benchmarks")]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a raw dataset into train/val/test split directories.
    Process(ProcessArgs),
    /// Print scenario, maneuver and class counts of written splits.
    Stats(StatsArgs),
    /// Score a prediction file against a split.
    Eval(EvalArgs),
    /// Compile a Lanelet2 map into a lane graph.
    Map(MapArgs),
    /// Plot one scenario as SVG.
    Render(RenderArgs),
}

#[derive(Args)]
struct ProcessArgs {
    /// Directory holding the raw recordings.
    #[arg(long)]
    input_dir: PathBuf,
    /// Where the split directories and maps are written.
    #[arg(long)]
    output_dir: PathBuf,
    /// Dataset name, or `auto` to detect it from the files.
    #[arg(long, default_value = "auto")]
    dataset: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output sampling rate, Hz.
    #[arg(long, default_value_t = DEFAULT_TARGET_RATE_HZ)]
    rate: f64,
    /// Chebyshev type I filter order.
    #[arg(long, default_value_t = 7)]
    filter_order: usize,
    /// Passband ripple, dB.
    #[arg(long, default_value_t = 0.05)]
    ripple_db: f64,
    /// Filter edge as a fraction of the output Nyquist frequency.
    #[arg(long, default_value_t = 0.8)]
    cutoff: f64,
    /// Filter forward only instead of forward and backward.
    #[arg(long)]
    causal: bool,
    /// Start each trajectory's decimation at its own first sample.
    #[arg(long)]
    trajectory_phase: bool,
    #[arg(long, default_value_t = DEFAULT_OBS_LEN)]
    obs_len: usize,
    #[arg(long, default_value_t = DEFAULT_PRED_LEN)]
    pred_len: usize,
    /// Maximum scored neighbors per scenario.
    #[arg(long, default_value_t = DEFAULT_MAX_SCORED_NEIGHBORS)]
    neighbors: usize,
    /// Valid future steps a neighbor needs to be scored.
    #[arg(long, default_value_t = DEFAULT_MIN_NEIGHBOR_FUTURE)]
    min_neighbor_future: usize,
    #[arg(long, value_enum, default_value_t = FrameArg::Off)]
    agent_frame: FrameArg,
    /// Emit acceleration arrays.
    #[arg(long)]
    include_acc: bool,
    #[arg(long, default_value_t = 1)]
    anchors_per_agent: usize,
    /// Target lane-keep share of highway anchors.
    #[arg(long, default_value_t = 0.5)]
    lk_fraction: f64,
    /// Keep every highway anchor regardless of maneuver.
    #[arg(long, conflicts_with = "lk_fraction")]
    no_stratify: bool,
    /// Lane-graph point spacing, meters.
    #[arg(long, default_value_t = DEFAULT_SPACING)]
    map_spacing: f64,
    /// Also write the binary record form.
    #[arg(long)]
    binary: bool,
    /// Run every stage on one thread.
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct StatsArgs {
    /// A process output directory or one split directory.
    dir: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EvalArgs {
    split_dir: PathBuf,
    /// NDJSON prediction file.
    predictions: PathBuf,
    #[arg(long, value_enum, default_value_t = TaskArg::Multi)]
    task: TaskArg,
    /// Comma-separated subset of ade, fde, apde, mr, cr, bfde, anll.
    #[arg(long, value_delimiter = ',')]
    metrics: Option<Vec<String>>,
    #[arg(long, value_enum, default_value_t = ModeArg::MinFde)]
    mode_rule: ModeArg,
    #[arg(long, value_enum, default_value_t = CrArg::PredPred)]
    cr_rule: CrArg,
    #[arg(long, value_enum, default_value_t = BrierArg::Multiplicative)]
    brier: BrierArg,
    /// Final displacement counted as a miss, meters.
    #[arg(long, default_value_t = metrics::MISS_THRESHOLD)]
    miss_threshold: f64,
    /// Distance counted as a collision, meters.
    #[arg(long, default_value_t = metrics::COLLISION_THRESHOLD)]
    collision_threshold: f64,
    /// Report scored agents without predictions instead of failing.
    #[arg(long)]
    allow_missing: bool,
    /// Include per-scenario values in the JSON report.
    #[arg(long)]
    per_scenario: bool,
    /// Also write the JSON report to this file.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct MapArgs {
    osm: PathBuf,
    /// Lane-graph NDJSON to write.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SPACING)]
    spacing: f64,
    /// Local transverse Mercator origin as `lat,lon`.
    #[arg(long, value_delimiter = ',', num_args = 2, conflicts_with = "utm")]
    origin: Option<Vec<f64>>,
    /// UTM frame as `zone,easting,northing` (northern hemisphere).
    #[arg(long, value_delimiter = ',', num_args = 3)]
    utm: Option<Vec<f64>>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct RenderArgs {
    split_dir: PathBuf,
    scenario_id: String,
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FrameArg {
    Off,
    Ta,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Single,
    Multi,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    MinFde,
    MaxProb,
}

#[derive(Clone, Copy, ValueEnum)]
enum CrArg {
    PredPred,
    PredGt,
}

#[derive(Clone, Copy, ValueEnum)]
enum BrierArg {
    #[value(name = "paper")]
    Multiplicative,
    Additive,
}

/// Failure of a subcommand with the exit code it maps to.
enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e.root() {
            Error::InvalidArgument(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e),
        }
    }
}

type Outcome = Result<(), Failure>;

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::default()
    }
}

fn require_dir(flag: &str, p: &Path) -> Outcome {
    if p.is_dir() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("{flag} {} is not a directory", p.display())))
    }
}

fn print_json(v: &impl serde::Serialize) -> Outcome {
    let text = serde_json::to_string_pretty(v).map_err(|e| Failure::Usage(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn cmd_process(a: ProcessArgs) -> Outcome {
    require_dir("--input-dir", &a.input_dir)?;
    let mut cfg = ProcessConfig::new(&a.input_dir, &a.output_dir);
    cfg.dataset = (a.dataset != "auto").then_some(a.dataset);
    cfg.seed = a.seed;
    cfg.resample.target_rate_hz = a.rate;
    cfg.resample.filter.order = a.filter_order;
    cfg.resample.filter.ripple_db = a.ripple_db;
    cfg.resample.filter.cutoff_norm = a.cutoff;
    cfg.resample.filter.zero_phase = !a.causal;
    if a.trajectory_phase {
        cfg.resample.phase = DecimationPhase::TrajectoryStart;
    }
    if a.obs_len == 0 || a.pred_len == 0 {
        return Err(Failure::Usage("--obs-len and --pred-len must be positive".into()));
    }
    cfg.scenario.obs_len = a.obs_len;
    cfg.scenario.pred_len = a.pred_len;
    cfg.scenario.limits.max_scored_neighbors = a.neighbors;
    cfg.scenario.limits.min_neighbor_future = a.min_neighbor_future;
    cfg.scenario.agent_frame = match a.agent_frame {
        FrameArg::Off => AgentFrame::Off,
        FrameArg::Ta => AgentFrame::Ta,
    };
    cfg.scenario.include_acc = a.include_acc;
    cfg.anchors_per_agent = a.anchors_per_agent;
    cfg.lk_fraction = (!a.no_stratify).then_some(a.lk_fraction);
    cfg.map_spacing = a.map_spacing;
    cfg.binary = a.binary;
    cfg.exec = execution(a.sequential);
    let report = process(&cfg)?;
    if a.json {
        print_json(&report)
    } else {
        print!("{}", report.table());
        let rs = &report.resample;
        println!(
            "\nrecordings {}  maps {}  anchors usable {}  filtered {}  fallback {}  audit clean",
            report.ingest.recordings,
            report.maps.len(),
            report.candidates,
            rs.filtered,
            rs.order2_fallback + rs.stride_fallback + rs.passthrough,
        );
        Ok(())
    }
}

fn cmd_stats(a: StatsArgs) -> Outcome {
    let st = stats::collect_stats(&a.dir)?;
    if a.json {
        print_json(&st)
    } else {
        print!("{}", st.table());
        Ok(())
    }
}

fn report_table(r: &MetricReport) -> String {
    let mut out = format!("scenarios {}  scored agents {}\n", r.scenarios, r.scored_agents);
    for m in Metric::ALL {
        if let Some(v) = r.metrics.get(m.name()) {
            out += &format!("{:<5} {v:.4}\n", m.name());
        }
    }
    if !r.missing.is_empty() {
        out += &format!("missing predictions: {}\n", r.missing.len());
    }
    for n in &r.notes {
        out += &format!("note: {n}\n");
    }
    out
}

fn cmd_eval(a: EvalArgs) -> Outcome {
    let metrics = match &a.metrics {
        None => Metric::ALL.to_vec(),
        Some(names) => names.iter().map(|n| n.trim().parse()).collect::<Result<_, Error>>()?,
    };
    let cfg = EvalConfig {
        task: match a.task {
            TaskArg::Single => Task::SingleAgent,
            TaskArg::Multi => Task::MultiAgent,
        },
        mode_rule: match a.mode_rule {
            ModeArg::MinFde => ModeRule::MinFde,
            ModeArg::MaxProb => ModeRule::MaxProb,
        },
        cr_rule: match a.cr_rule {
            CrArg::PredPred => CollisionRule::PredPred,
            CrArg::PredGt => CollisionRule::PredGt,
        },
        brier: match a.brier {
            BrierArg::Multiplicative => BrierMode::Multiplicative,
            BrierArg::Additive => BrierMode::Additive,
        },
        metrics,
        allow_missing: a.allow_missing,
        per_scenario: a.per_scenario,
        miss_threshold: a.miss_threshold,
        collision_threshold: a.collision_threshold,
        exec: execution(a.sequential),
    };
    let report = metrics::evaluate(&a.split_dir, &a.predictions, &cfg)?;
    if let Some(path) = &a.output {
        let text = serde_json::to_string_pretty(&report).map_err(|e| Failure::Usage(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| {
            Failure::Data(Error::Io {
                path: path.clone(),
                source: e,
            })
        })?;
    }
    if a.json {
        print_json(&report)
    } else {
        print!("{}", report_table(&report));
        Ok(())
    }
}

fn cmd_map(a: MapArgs) -> Outcome {
    let raw = parse_lanelet_osm(&a.osm)?;
    let origin = match (&a.origin, &a.utm) {
        (Some(o), _) => Some(ProjectionOrigin::Local { lat0: o[0], lon0: o[1] }),
        (_, Some(u)) => {
            if u[0].fract() != 0.0 || !(1.0..=60.0).contains(&u[0]) {
                return Err(Failure::Usage(format!("--utm zone {} is not in 1..=60", u[0])));
            }
            Some(ProjectionOrigin::Utm {
                zone: u[0] as u8,
                north: true,
                easting0: u[1],
                northing0: u[2],
            })
        }
        (None, None) => None,
    };
    let projection = origin.map(Projection::new);
    let projected = project_map(&raw, projection.as_ref())?;
    let graph = build_lane_graph(&projected, a.spacing)?;
    let id = a.osm.file_stem().and_then(|s| s.to_str()).unwrap_or("map").to_string();
    write_lane_graph(&a.output, &id, [0.0, 0.0], &graph)?;
    let (nodes, ways, relations) = raw.counts();
    let summary = serde_json::json!({
        "map_id": id,
        "nodes": nodes,
        "ways": ways,
        "relations": relations,
        "points": graph.points.len(),
        "edges": graph.edges.len(),
    });
    if a.json {
        print_json(&summary)
    } else {
        println!(
            "{id}: {nodes} nodes, {ways} ways, {relations} relations -> {} points, {} edges",
            graph.points.len(),
            graph.edges.len()
        );
        Ok(())
    }
}

fn cmd_render(a: RenderArgs) -> Outcome {
    let split = format::read_split(&a.split_dir)?;
    let s = split
        .scenarios
        .iter()
        .find(|s| s.scenario_id == a.scenario_id)
        .ok_or_else(|| Failure::Data(Error::Format(format!("no scenario {:?} in {}", a.scenario_id, a.split_dir.display()))))?;
    let map = match &s.map_ref {
        Some(r) => {
            let p = map_path(&a.split_dir, r);
            if p.is_file() {
                Some(read_lane_graph(&p)?.1)
            } else {
                log::warn!("map {r} not found at {}; plotting agents only", p.display());
                None
            }
        }
        None => None,
    };
    let svg = render::render_scenario(s, map.as_ref());
    std::fs::write(&a.output, svg).map_err(|e| {
        Failure::Data(Error::Io {
            path: a.output.clone(),
            source: e,
        })
    })?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let outcome = match cli.command {
        Command::Process(a) => cmd_process(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Map(a) => cmd_map(a),
        Command::Render(a) => cmd_render(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
