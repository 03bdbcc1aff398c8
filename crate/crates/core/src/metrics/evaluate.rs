use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::predictions::PredictionMap;
use super::*;
use crate::exec::{try_map_ordered, Execution};
use crate::format::read_split;
use crate::record::Scenario;
use crate::types::AgentId;

/// Which agents of a scenario are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// The target agent (`sa_mask`).
    SingleAgent,
    /// The target agent and its scored neighbors (`ma_mask`).
    #[default]
    MultiAgent,
}

impl Task {
    pub fn scored_agents(self, s: &Scenario) -> Vec<usize> {
        match self {
            Task::SingleAgent => s.sa_agents(),
            Task::MultiAgent => s.ma_agents(),
        }
    }

    fn mask_row(self, s: &Scenario, a: usize) -> &[bool] {
        match self {
            Task::SingleAgent => s.sa_row(a),
            Task::MultiAgent => s.ma_row(a),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Ade,
    Fde,
    Apde,
    Mr,
    Cr,
    Bfde,
    Anll,
}

impl Metric {
    pub const ALL: [Metric; 7] = [Metric::Ade, Metric::Fde, Metric::Apde, Metric::Mr, Metric::Cr, Metric::Bfde, Metric::Anll];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Ade => "ade",
            Metric::Fde => "fde",
            Metric::Apde => "apde",
            Metric::Mr => "mr",
            Metric::Cr => "cr",
            Metric::Bfde => "bfde",
            Metric::Anll => "anll",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown metric {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub task: Task,
    pub mode_rule: ModeRule,
    pub cr_rule: CollisionRule,
    pub brier: BrierMode,
    pub metrics: Vec<Metric>,
    pub allow_missing: bool,
    pub per_scenario: bool,
    pub miss_threshold: f64,
    pub collision_threshold: f64,
    #[serde(skip)]
    pub exec: Execution,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            task: Task::default(),
            mode_rule: ModeRule::default(),
            cr_rule: CollisionRule::default(),
            brier: BrierMode::default(),
            metrics: Metric::ALL.to_vec(),
            allow_missing: false,
            per_scenario: false,
            miss_threshold: MISS_THRESHOLD,
            collision_threshold: COLLISION_THRESHOLD,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingPrediction {
    pub scenario_id: String,
    pub agent_id: AgentId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioValues {
    pub scenario_id: String,
    pub scored_agents: usize,
    /// Mean over the scenario's scored agents, per metric.
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub task: Task,
    /// Distinct mode counts seen in the predictions.
    pub k: Vec<usize>,
    pub mode_rule: ModeRule,
    pub cr_rule: CollisionRule,
    pub brier: BrierMode,
    pub miss_threshold: f64,
    pub collision_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Mean over evaluated scenarios of each scenario's per-agent mean.
    pub metrics: BTreeMap<String, f64>,
    pub scenarios: usize,
    pub scored_agents: usize,
    pub missing: Vec<MissingPrediction>,
    /// Predictions for agents that exist but are not scored under the task.
    pub ignored_predictions: usize,
    pub config: ReportConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_scenario: Option<Vec<ScenarioValues>>,
}

struct Outcome {
    values: Option<ScenarioValues>,
    missing: Vec<MissingPrediction>,
    ks: BTreeSet<usize>,
    without_dist: usize,
}

fn row(v: &[[f32; 2]]) -> Vec<Xy> {
    v.iter().map(|p| [p[0] as f64, p[1] as f64]).collect()
}

fn score_scenario(s: &Scenario, preds: &PredictionMap, cfg: &EvalConfig) -> Result<Outcome> {
    let mut missing = Vec::new();
    let mut ks = BTreeSet::new();
    let mut agents = Vec::new();
    for a in cfg.task.scored_agents(s) {
        match preds.get(&(s.scenario_id.clone(), s.agents[a].id)) {
            Some(p) => {
                ks.insert(p.modes.len());
                agents.push((a, p));
            }
            None => missing.push(MissingPrediction {
                scenario_id: s.scenario_id.clone(),
                agent_id: s.agents[a].id,
            }),
        }
    }
    let without_dist = agents.iter().filter(|(_, p)| p.dist.is_none()).count();
    if agents.is_empty() {
        return Ok(Outcome {
            values: None,
            missing,
            ks,
            without_dist,
        });
    }
    let gts: Vec<Vec<Xy>> = (0..s.num_agents()).map(|a| row(s.trg_pos_row(a))).collect();
    let want = |m: Metric| cfg.metrics.contains(&m);
    let mut sums: BTreeMap<Metric, f64> = BTreeMap::new();
    let mut fdes = Vec::with_capacity(agents.len());
    let mut selected = Vec::with_capacity(agents.len());
    for &(a, p) in &agents {
        let valid = cfg.task.mask_row(s, a);
        let gt = &gts[a];
        let ctx = |e: Error| Error::Evaluation(format!("{} agent {}: {e}", s.scenario_id, s.agents[a].id));
        let j = select_mode(&p.modes, &p.probs, gt, valid, cfg.mode_rule);
        let f = fde(&p.modes[j], gt, valid).map_err(ctx)?;
        fdes.push(f);
        selected.push(j);
        let mut add = |m: Metric, v: f64| *sums.entry(m).or_default() += v;
        if want(Metric::Ade) {
            add(Metric::Ade, ade(&p.modes[j], gt, valid).map_err(ctx)?);
        }
        add(Metric::Fde, f);
        if want(Metric::Apde) {
            add(Metric::Apde, apde(&p.modes[j], gt, valid).map_err(ctx)?);
        }
        if want(Metric::Bfde) {
            add(Metric::Bfde, brier_fde(f, p.probs[j], cfg.brier).map_err(ctx)?);
        }
        if want(Metric::Anll) && without_dist == 0 {
            let d = p.dist.as_ref().expect("checked above");
            add(Metric::Anll, anll(d.family, &p.modes, &d.scales, &p.probs, gt, valid).map_err(ctx)?);
        }
    }
    let n = agents.len() as f64;
    let mut values: BTreeMap<String, f64> = sums
        .into_iter()
        .filter(|(m, _)| want(*m))
        .map(|(m, v)| (m.name().to_string(), v / n))
        .collect();
    if want(Metric::Mr) {
        values.insert(Metric::Mr.name().into(), miss_rate(&fdes, cfg.miss_threshold)?);
    }
    if want(Metric::Cr) {
        let tracks: Vec<Track> = agents
            .iter()
            .zip(&selected)
            .map(|(&(a, p), &j)| Track {
                pred: &p.modes[j],
                valid: cfg.task.mask_row(s, a),
            })
            .collect();
        let rows: Vec<usize> = agents.iter().map(|(a, _)| *a).collect();
        let others: Vec<(usize, &[Xy], &[bool])> = (0..s.num_agents()).map(|a| (a, &gts[a][..], s.valid_row(a))).collect();
        let hits = collisions(&tracks, &rows, &others, cfg.cr_rule, cfg.collision_threshold);
        values.insert(Metric::Cr.name().into(), hits.iter().filter(|&&h| h).count() as f64 / n);
    }
    Ok(Outcome {
        values: Some(ScenarioValues {
            scenario_id: s.scenario_id.clone(),
            scored_agents: agents.len(),
            values,
        }),
        missing,
        ks,
        without_dist,
    })
}

/// Evaluate predictions against in-memory scenarios.
pub fn evaluate_scenarios(scenarios: &[Scenario], preds: &PredictionMap, cfg: &EvalConfig) -> Result<MetricReport> {
    let index: BTreeMap<&str, &Scenario> = scenarios.iter().map(|s| (s.scenario_id.as_str(), s)).collect();
    let mut ignored = 0;
    for (sid, agent) in preds.keys() {
        let s = index
            .get(sid.as_str())
            .ok_or_else(|| Error::Evaluation(format!("prediction for unknown scenario {sid:?}")))?;
        let a = s
            .agents
            .iter()
            .position(|x| x.id == *agent)
            .ok_or_else(|| Error::Evaluation(format!("{sid}: prediction for agent {agent} which is not in the scenario")))?;
        if !cfg.task.scored_agents(s).contains(&a) {
            ignored += 1;
        }
    }
    let outcomes = try_map_ordered(cfg.exec, scenarios, |s| score_scenario(s, preds, cfg))?;

    let missing: Vec<MissingPrediction> = outcomes.iter().flat_map(|o| o.missing.iter().cloned()).collect();
    if !missing.is_empty() && !cfg.allow_missing {
        let m = &missing[0];
        return Err(Error::Evaluation(format!(
            "{} scored agents have no prediction (first: {} agent {}); pass --allow-missing to exclude them",
            missing.len(),
            m.scenario_id,
            m.agent_id
        )));
    }
    let mut per: Vec<ScenarioValues> = outcomes.iter().filter_map(|o| o.values.clone()).collect();
    if per.is_empty() {
        return Err(Error::Evaluation("no scored agent with a prediction".into()));
    }
    let mut notes = Vec::new();
    let without_dist: usize = outcomes.iter().map(|o| o.without_dist).sum();
    let mut metrics = BTreeMap::new();
    for m in &cfg.metrics {
        if *m == Metric::Anll && without_dist > 0 {
            notes.push(format!("anll not reported: {without_dist} predictions carry no distribution parameters"));
            continue;
        }
        let vals: Vec<f64> = per.iter().filter_map(|v| v.values.get(m.name()).copied()).collect();
        metrics.insert(m.name().to_string(), vals.iter().sum::<f64>() / vals.len() as f64);
    }
    if without_dist > 0 {
        for v in &mut per {
            v.values.remove(Metric::Anll.name());
        }
    }
    let ks: BTreeSet<usize> = outcomes.iter().flat_map(|o| o.ks.iter().copied()).collect();
    Ok(MetricReport {
        metrics,
        scenarios: per.len(),
        scored_agents: per.iter().map(|v| v.scored_agents).sum(),
        missing,
        ignored_predictions: ignored,
        config: ReportConfig {
            task: cfg.task,
            k: ks.into_iter().collect(),
            mode_rule: cfg.mode_rule,
            cr_rule: cfg.cr_rule,
            brier: cfg.brier,
            miss_threshold: cfg.miss_threshold,
            collision_threshold: cfg.collision_threshold,
        },
        notes,
        per_scenario: cfg.per_scenario.then_some(per),
    })
}

/// Evaluate a prediction file against a split directory.
pub fn evaluate(split_dir: &Path, prediction_file: &Path, cfg: &EvalConfig) -> Result<MetricReport> {
    let split = read_split(split_dir)?;
    let preds = read_predictions(prediction_file, split.manifest.pred_len)?;
    evaluate_scenarios(&split.scenarios, &preds, cfg)
}
