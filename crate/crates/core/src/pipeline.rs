//! End-to-end orchestration: one config in, a directory of artifacts out.
//!
//! A run proceeds simulate → track → score → build-graph → cluster →
//! detect → evaluate, writing each stage's artifact plus a `manifest.json`
//! (config hash, seed, version, completed stages — fully deterministic)
//! and a `timings.json` (wall-clock per stage — the only file that differs
//! between identical runs). All randomness derives from the single config
//! seed through named substreams.
//!
//! `run_benchmark` executes a matrix of run variants (scorer × clusterer ×
//! seeds) in a worker pool and aggregates their dynamic-evaluation scores
//! into a comparison table plus per-frame F1 curves.

use crate::clustering::{
    cnm_greedy, label_propagation, louvain, Clusterer, ModularityParams, Partition, WeightedGraph,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate_dynamic, evaluate_static, EvalConfig, EvalReport};
use crate::graph::{
    aggregate_static_graph, build_framewise, knn_pairs, link_temporal, StaticGroupnessGraph,
    TemporalGroupnessGraph,
};
use crate::groupness::{
    extract_pair_features, labeled_pairs_from_scenario, score_pair, HandcraftedParams,
    HeadWeights, PairObservation, TrainParams,
};
use crate::groups::{dynamic_to_static, partition_to_dynamic, DynamicGroups, StaticGroups};
use crate::ids::{FrameId, PersonId};
use crate::{io, sim};
use crate::sim::{corrupt_tracks, Scenario, SimConfig, TemporalLinkSet};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

// ------------------------------------------------------------------ config

/// Where pair scores come from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerMode {
    /// Train the softmax head on this scenario's ground-truth pair labels,
    /// then score with it.
    #[default]
    Trained,
    /// Score with the documented handcrafted weights.
    Handcrafted,
    /// Read pre-computed scores from `scorer.path`.
    Ingested,
}

impl std::fmt::Display for ScorerMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScorerMode::Trained => "trained",
            ScorerMode::Handcrafted => "handcrafted",
            ScorerMode::Ingested => "ingested",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScorerConfig {
    pub mode: ScorerMode,
    /// Score file (JSONL or CSV) for `ingested` mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Odd temporal window, in frames, for feature smoothing.
    pub window: u32,
    pub handcrafted: HandcraftedParams,
    /// Training hyperparameters; the pipeline replaces `train.seed` with
    /// the run seed so one seed governs the whole run.
    pub train: TrainParams,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig {
            mode: ScorerMode::default(),
            path: None,
            window: 5,
            handcrafted: HandcraftedParams::default(),
            train: TrainParams::default(),
        }
    }
}

/// Temporal graph (per-frame groups) or static aggregation baseline (one
/// group set, held constant over the video).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphMode {
    #[default]
    Temporal,
    Static,
}

impl std::fmt::Display for GraphMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GraphMode::Temporal => "temporal",
            GraphMode::Static => "static",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphConfig {
    pub mode: GraphMode,
    /// Pairs are scored only when one person is among the other's `k`
    /// spatially nearest neighbors.
    pub k: usize,
    /// Weight multiplier on temporal edges.
    pub lambda_t: f64,
    /// Minimum groupness for a spatial edge; 0 keeps every scored pair.
    pub tau: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig { mode: GraphMode::Temporal, k: 4, lambda_t: 1.0, tau: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub algorithm: Clusterer,
    pub modularity: ModularityParams,
    /// Sweep cap for label propagation.
    pub lp_max_iters: u32,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            algorithm: Clusterer::Louvain,
            modularity: ModularityParams::default(),
            lp_max_iters: 100,
        }
    }
}

/// Tracker degradation applied to the ground-truth identity links.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackingConfig {
    /// Probability that a consecutive-frame link has its target swapped.
    pub id_switch_rate: f64,
    /// Spread of the identification-probability noise; 0 keeps P_t = 1.
    pub confidence_sigma: f64,
}

/// Everything one pipeline run needs. Omitted config-file sections fall
/// back to the documented defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub sim: SimConfig,
    pub tracking: TrackingConfig,
    pub scorer: ScorerConfig,
    pub graph: GraphConfig,
    pub cluster: ClusterConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            output_dir: PathBuf::from("out"),
            sim: SimConfig::default(),
            tracking: TrackingConfig::default(),
            scorer: ScorerConfig::default(),
            graph: GraphConfig::default(),
            cluster: ClusterConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        if self.scorer.mode == ScorerMode::Ingested && self.scorer.path.is_none() {
            return Err(Error::config("scorer.path", "required when scorer.mode = \"ingested\""));
        }
        if self.scorer.window == 0 || self.scorer.window % 2 == 0 {
            return Err(Error::config(
                "scorer.window",
                format!("must be odd and positive, got {}", self.scorer.window),
            ));
        }
        if self.graph.k == 0 {
            return Err(Error::config("graph.k", "must be at least 1"));
        }
        if !(self.graph.lambda_t >= 0.0) {
            return Err(Error::config("graph.lambda_t", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.graph.tau) {
            return Err(Error::config("graph.tau", "must lie in [0, 1]"));
        }
        self.cluster.modularity.validate()?;
        if !(0.0..=1.0).contains(&self.tracking.id_switch_rate) {
            return Err(Error::config("tracking.id_switch_rate", "must lie in [0, 1]"));
        }
        if !(self.tracking.confidence_sigma >= 0.0) {
            return Err(Error::config("tracking.confidence_sigma", "must be non-negative"));
        }
        self.eval.check()?;
        Ok(())
    }

    /// Hash of the canonical (JSON) config with the output location
    /// blanked, so the same experiment hashes identically wherever it
    /// lands.
    pub fn sha256(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

// --------------------------------------------------------------- artifacts

/// Deterministic record of a run: rerunning the config reproduces every
/// artifact and this file byte for byte.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub crate_version: String,
    pub seed: u64,
    pub config_sha256: String,
    /// `"ok"`, or `"failed at <stage>: <cause>"` with partial artifacts
    /// retained.
    pub status: String,
    pub completed_stages: Vec<String>,
    /// Artifact label -> file name, relative to the output directory.
    pub artifacts: BTreeMap<String, String>,
}

/// Wall-clock seconds per stage; kept out of the manifest so the manifest
/// stays identical across reruns.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub total_secs: f64,
    pub stages: Vec<(String, f64)>,
}

impl StageTimings {
    pub fn stage_secs(&self, name: &str) -> Option<f64> {
        self.stages.iter().find(|(n, _)| n == name).map(|(_, s)| *s)
    }
}

/// Everything a run produced, in memory.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub scenario: Scenario,
    pub links: TemporalLinkSet,
    pub weights: Option<HeadWeights>,
    pub scores: Vec<PairObservation>,
    pub graph: Option<TemporalGroupnessGraph>,
    pub static_graph: Option<StaticGroupnessGraph>,
    pub partition: Option<Partition>,
    pub detected_dynamic: DynamicGroups,
    pub detected_static: StaticGroups,
    pub truth_dynamic: DynamicGroups,
    pub truth_static: StaticGroups,
    pub report_dynamic: EvalReport,
    pub report_static: EvalReport,
    pub manifest: Manifest,
    pub timings: StageTimings,
}

// ------------------------------------------------------------------ stages

struct StageContext<'a> {
    config: &'a RunConfig,
    manifest: Manifest,
    timings: StageTimings,
}

impl StageContext<'_> {
    fn run<T>(&mut self, name: &str, f: impl FnOnce(&RunConfig) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f(self.config).map_err(|e| e.in_stage(name))?;
        self.timings.stages.push((name.to_string(), start.elapsed().as_secs_f64()));
        self.manifest.completed_stages.push(name.to_string());
        Ok(out)
    }

    fn artifact(&mut self, label: &str, file: &str) -> PathBuf {
        self.manifest.artifacts.insert(label.to_string(), file.to_string());
        self.config.output_dir.join(file)
    }
}

/// Score every k-NN pair of every frame with the given head.
///
/// Frames are scored in parallel; the result is ordered by frame, then by
/// canonical pair, independent of thread scheduling.
pub fn score_scenario(
    scenario: &Scenario,
    weights: &HeadWeights,
    window: u32,
    k: usize,
) -> Result<Vec<PairObservation>> {
    let frames: Vec<(&FrameId, &BTreeMap<PersonId, sim::PersonState>)> =
        scenario.states.iter().collect();
    let per_frame: Vec<Vec<PairObservation>> = frames
        .par_iter()
        .map(|(frame, states)| {
            let mut scored = Vec::new();
            for (a, b) in knn_pairs(states, k)? {
                let features = extract_pair_features(scenario, **frame, a, b, window)?;
                let (p_i, p_g) = score_pair(&features, weights)?;
                scored.push(PairObservation { frame: **frame, a, b, p_i, p_g });
            }
            Ok(scored)
        })
        .collect::<Result<_>>()?;
    Ok(per_frame.into_iter().flatten().collect())
}

/// Build the per-frame spatial graphs from scored pairs, keeping edges
/// with groupness at least `tau`. Every present person is a node whether
/// or not any of their pairs survive.
pub fn framewise_graphs(
    scenario: &Scenario,
    scores: &[PairObservation],
    tau: f64,
) -> Result<Vec<TemporalGroupnessGraph>> {
    let mut by_frame: BTreeMap<FrameId, Vec<PairObservation>> = BTreeMap::new();
    for obs in scores {
        if obs.p_g >= tau {
            by_frame.entry(obs.frame).or_default().push(*obs);
        }
    }
    for frame in by_frame.keys() {
        if !scenario.states.contains_key(frame) {
            return Err(Error::InvalidInput(format!(
                "scores reference frame {frame}, which the scenario does not contain"
            )));
        }
    }
    scenario
        .states
        .par_iter()
        .map(|(frame, states)| {
            let persons: BTreeSet<PersonId> = states.keys().copied().collect();
            let empty = Vec::new();
            let obs = by_frame.get(frame).unwrap_or(&empty);
            build_framewise(*frame, obs, &persons)
        })
        .collect()
}

/// Cluster the static groupness graph into one group set per person.
pub fn cluster_static_graph(
    graph: &StaticGroupnessGraph,
    cluster: &ClusterConfig,
    seed: u64,
) -> Result<StaticGroups> {
    let persons: Vec<PersonId> = graph.persons.iter().copied().collect();
    let index: BTreeMap<PersonId, usize> =
        persons.iter().enumerate().map(|(i, p)| (*p, i)).collect();
    let edges: Vec<(usize, usize, f64)> =
        graph.edges.iter().map(|(a, b, w)| (index[a], index[b], *w)).collect();
    let weighted = WeightedGraph::from_edges(persons.len(), &edges)?;
    let labels = cluster.algorithm.run(&weighted, &cluster.modularity, seed, cluster.lp_max_iters)?;

    let mut by_label: BTreeMap<usize, BTreeSet<PersonId>> = BTreeMap::new();
    for (i, label) in labels.iter().enumerate() {
        by_label.entry(*label).or_default().insert(persons[i]);
    }
    let mut groups: Vec<BTreeSet<PersonId>> = by_label.into_values().collect();
    groups.sort_by(|a, b| a.iter().next().cmp(&b.iter().next()));
    Ok(StaticGroups { groups })
}

/// Hold a static group set constant over the scenario's frames, restricted
/// to whoever is present in each frame.
pub fn constant_dynamic_groups(scenario: &Scenario, groups: &StaticGroups) -> DynamicGroups {
    let per_frame = scenario
        .states
        .iter()
        .map(|(frame, states)| {
            let mut frame_groups: Vec<BTreeSet<PersonId>> = groups
                .groups
                .iter()
                .map(|g| g.iter().filter(|p| states.contains_key(p)).copied().collect())
                .filter(|g: &BTreeSet<PersonId>| !g.is_empty())
                .collect();
            frame_groups.sort_by(|a, b| a.iter().next().cmp(&b.iter().next()));
            (*frame, frame_groups)
        })
        .collect();
    DynamicGroups { per_frame }
}

/// Cluster the temporal groupness graph into a node partition.
pub fn cluster_temporal_graph(
    graph: &TemporalGroupnessGraph,
    cluster: &ClusterConfig,
    seed: u64,
) -> Result<Partition> {
    match cluster.algorithm {
        Clusterer::Louvain => louvain(graph, &cluster.modularity, seed),
        Clusterer::LabelPropagation => label_propagation(graph, seed, cluster.lp_max_iters),
        Clusterer::Cnm => cnm_greedy(graph, cluster.modularity.resolution),
    }
}

/// Execute every stage, writing artifacts as they are produced.
///
/// On a stage failure the partial artifacts stay on disk, the manifest
/// records `failed at <stage>`, and the error names the stage and cause.
pub fn run_pipeline(config: &RunConfig) -> Result<PipelineOutcome> {
    config.validate()?;
    fs::create_dir_all(&config.output_dir)?;

    let total_start = Instant::now();
    let mut ctx = StageContext {
        config,
        manifest: Manifest {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            config_sha256: config.sha256(),
            status: "ok".to_string(),
            completed_stages: Vec::new(),
            artifacts: BTreeMap::new(),
        },
        timings: StageTimings::default(),
    };

    let result = run_stages(&mut ctx);
    ctx.timings.total_secs = total_start.elapsed().as_secs_f64();
    if let Err(e) = &result {
        ctx.manifest.status = format!("failed at {e}");
    }
    let StageContext { manifest, timings, .. } = ctx;

    serde_json::to_writer_pretty(
        fs::File::create(config.output_dir.join("manifest.json"))?,
        &manifest,
    )?;
    serde_json::to_writer_pretty(
        fs::File::create(config.output_dir.join("timings.json"))?,
        &timings,
    )?;

    let mut outcome = result?;
    outcome.manifest = manifest;
    outcome.timings = timings;
    Ok(outcome)
}

fn run_stages(ctx: &mut StageContext) -> Result<PipelineOutcome> {
    let scenario = ctx.run("simulate", |c| {
        let scenario = sim::simulate(&c.sim, c.seed)?;
        io::write_scenario(&ctx_path(c, "scenario.jsonl"), &scenario)?;
        Ok(scenario)
    })?;
    ctx.artifact("scenario", "scenario.jsonl");

    let links = ctx.run("track", |c| {
        let links = corrupt_tracks(
            &scenario,
            c.tracking.id_switch_rate,
            c.tracking.confidence_sigma,
            c.seed,
        )?;
        io::write_links(&ctx_path(c, "links.jsonl"), &links)?;
        Ok(links)
    })?;
    ctx.artifact("links", "links.jsonl");

    let (weights, scores) = ctx.run("score", |c| {
        let weights = match c.scorer.mode {
            ScorerMode::Handcrafted => Some(HeadWeights::handcrafted(&c.scorer.handcrafted)),
            ScorerMode::Trained => {
                let labeled = labeled_pairs_from_scenario(&scenario, c.scorer.window)?;
                let params = TrainParams { seed: c.seed, ..c.scorer.train.clone() };
                Some(crate::groupness::train_head(&labeled, &params)?)
            }
            ScorerMode::Ingested => None,
        };
        let scores = match (&weights, &c.scorer.path) {
            (Some(w), _) => score_scenario(&scenario, w, c.scorer.window, c.graph.k)?,
            (None, Some(path)) => io::read_scores(path)?,
            (None, None) => unreachable!("validated: ingested mode has a path"),
        };
        if let Some(w) = &weights {
            io::write_weights(&ctx_path(c, "weights.json"), w)?;
        }
        io::write_scores_jsonl(&ctx_path(c, "scores.jsonl"), &scores)?;
        Ok((weights, scores))
    })?;
    if weights.is_some() {
        ctx.artifact("weights", "weights.json");
    }
    ctx.artifact("scores", "scores.jsonl");

    let framewise = ctx.run("build-graph", |c| framewise_graphs(&scenario, &scores, c.graph.tau))?;
    let (graph, static_graph) = match ctx.config.graph.mode {
        GraphMode::Temporal => {
            let graph = ctx.run("link-temporal", |c| {
                let graph = link_temporal(&framewise, &links, c.graph.lambda_t)?;
                io::write_graph(&ctx_path(c, "graph.jsonl"), &graph)?;
                Ok(graph)
            })?;
            ctx.artifact("graph", "graph.jsonl");
            (Some(graph), None)
        }
        GraphMode::Static => {
            let static_graph = ctx.run("aggregate-static", |c| {
                let graph = aggregate_static_graph(&framewise)?;
                io::write_static_graph(&ctx_path(c, "static_graph.jsonl"), &graph)?;
                Ok(graph)
            })?;
            ctx.artifact("static_graph", "static_graph.jsonl");
            (None, Some(static_graph))
        }
    };

    let (partition, detected_dynamic, detected_static) = match (&graph, &static_graph) {
        (Some(graph), _) => {
            let partition = ctx.run("cluster", |c| {
                let partition = cluster_temporal_graph(graph, &c.cluster, c.seed)?;
                io::write_partition_jsonl(&ctx_path(c, "partition.jsonl"), &partition)?;
                io::write_partition_csv(&ctx_path(c, "partition.csv"), &partition)?;
                Ok(partition)
            })?;
            ctx.artifact("partition", "partition.jsonl");
            ctx.artifact("partition_csv", "partition.csv");
            let (dynamic, stat) = ctx.run("detect", |c| {
                let dynamic = partition_to_dynamic(&partition, graph)?;
                let stat = dynamic_to_static(&dynamic)?;
                io::write_dynamic_groups(&ctx_path(c, "dynamic_groups.jsonl"), &dynamic)?;
                io::write_static_groups(&ctx_path(c, "static_groups.jsonl"), &stat)?;
                Ok((dynamic, stat))
            })?;
            (Some(partition), dynamic, stat)
        }
        (None, Some(static_graph)) => {
            let (dynamic, stat) = ctx.run("detect", |c| {
                let stat = cluster_static_graph(static_graph, &c.cluster, c.seed)?;
                let dynamic = constant_dynamic_groups(&scenario, &stat);
                io::write_dynamic_groups(&ctx_path(c, "dynamic_groups.jsonl"), &dynamic)?;
                io::write_static_groups(&ctx_path(c, "static_groups.jsonl"), &stat)?;
                Ok((dynamic, stat))
            })?;
            (None, dynamic, stat)
        }
        (None, None) => unreachable!("one graph mode always builds"),
    };
    ctx.artifact("dynamic_groups", "dynamic_groups.jsonl");
    ctx.artifact("static_groups", "static_groups.jsonl");

    let (truth_dynamic, truth_static, report_dynamic, report_static) =
        ctx.run("evaluate", |c| {
            let truth_dynamic = DynamicGroups::from_scenario(&scenario);
            let truth_static = dynamic_to_static(&truth_dynamic)?;
            let report_dynamic = evaluate_dynamic(&detected_dynamic, &truth_dynamic, &c.eval)?;
            let report_static = evaluate_static(&detected_static, &truth_static, &c.eval)?;
            io::write_report_json(&ctx_path(c, "report_dynamic.json"), &report_dynamic)?;
            io::write_report_json(&ctx_path(c, "report_static.json"), &report_static)?;
            io::write_per_frame_csv(&ctx_path(c, "per_frame.csv"), &report_dynamic)?;
            Ok((truth_dynamic, truth_static, report_dynamic, report_static))
        })?;
    ctx.artifact("report_dynamic", "report_dynamic.json");
    ctx.artifact("report_static", "report_static.json");
    ctx.artifact("per_frame_csv", "per_frame.csv");

    Ok(PipelineOutcome {
        scenario,
        links,
        weights,
        scores,
        graph,
        static_graph,
        partition,
        detected_dynamic,
        detected_static,
        truth_dynamic,
        truth_static,
        report_dynamic,
        report_static,
        // Replaced by the caller once the stage bookkeeping is final.
        manifest: Manifest::default(),
        timings: StageTimings::default(),
    })
}

fn ctx_path(config: &RunConfig, file: &str) -> PathBuf {
    config.output_dir.join(file)
}

// --------------------------------------------------------------- benchmark

/// One cell of a benchmark matrix: a named config run over several seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkVariant {
    pub name: String,
    pub config: RunConfig,
    /// Seeds to run; empty means just the config's own seed.
    #[serde(default)]
    pub seeds: Vec<u64>,
}

/// Aggregated dynamic-evaluation scores of one variant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub variant: String,
    pub method: String,
    pub clustering: String,
    pub mode: String,
    pub status: String,
    pub seeds_ok: u32,
    pub seeds_failed: u32,
    pub precision_mean: f64,
    pub precision_std: f64,
    pub recall_mean: f64,
    pub recall_std: f64,
    pub f1_mean: f64,
    pub f1_std: f64,
    /// Mean clustering-stage seconds per scenario frame.
    pub secs_per_frame: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    (mean, var.sqrt())
}

/// Run every (variant, seed) job in a worker pool, write `benchmark.csv`
/// and per-variant F1-over-frame curves under `out_dir`, and return the
/// table. A failing job marks its variant's row but never aborts the rest.
pub fn run_benchmark(
    variants: &[BenchmarkVariant],
    out_dir: &Path,
    threads: Option<usize>,
) -> Result<Vec<BenchmarkRow>> {
    if variants.is_empty() {
        return Err(Error::InvalidInput("benchmark needs at least one variant".into()));
    }
    for variant in variants {
        variant.config.validate().map_err(|e| {
            Error::config(format!("variant {}", variant.name), e.to_string())
        })?;
    }
    fs::create_dir_all(out_dir)?;

    let jobs: Vec<(usize, u64)> = variants
        .iter()
        .enumerate()
        .flat_map(|(vi, v)| {
            let seeds =
                if v.seeds.is_empty() { vec![v.config.seed] } else { v.seeds.clone() };
            seeds.into_iter().map(move |s| (vi, s))
        })
        .collect();

    let run_all = || -> Vec<(usize, u64, Result<PipelineOutcome>)> {
        jobs.par_iter()
            .map(|&(vi, seed)| {
                let variant = &variants[vi];
                let mut config = variant.config.clone();
                config.seed = seed;
                config.output_dir = out_dir.join(&variant.name).join(format!("seed_{seed}"));
                (vi, seed, run_pipeline(&config))
            })
            .collect()
    };
    let outcomes = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidInput(format!("worker pool: {e}")))?
            .install(run_all),
        None => run_all(),
    };

    let mut rows = Vec::with_capacity(variants.len());
    for (vi, variant) in variants.iter().enumerate() {
        let mut precision = Vec::new();
        let mut recall = Vec::new();
        let mut f1 = Vec::new();
        let mut secs_per_frame = Vec::new();
        let mut curves: BTreeMap<FrameId, Vec<f64>> = BTreeMap::new();
        let mut failures: Vec<String> = Vec::new();
        for (_, seed, outcome) in outcomes.iter().filter(|(i, _, _)| *i == vi) {
            match outcome {
                Ok(out) => {
                    precision.push(out.report_dynamic.precision);
                    recall.push(out.report_dynamic.recall);
                    f1.push(out.report_dynamic.f1);
                    let cluster_secs = out
                        .timings
                        .stage_secs("cluster")
                        .or_else(|| out.timings.stage_secs("detect"))
                        .unwrap_or(0.0);
                    let frames = out.scenario.states.len().max(1);
                    secs_per_frame.push(cluster_secs / frames as f64);
                    for frame in out.report_dynamic.per_frame.iter().flatten() {
                        curves.entry(frame.frame).or_default().push(frame.f1);
                    }
                }
                Err(e) => failures.push(format!("seed {seed}: {e}")),
            }
        }
        let (precision_mean, precision_std) = mean_std(&precision);
        let (recall_mean, recall_std) = mean_std(&recall);
        let (f1_mean, f1_std) = mean_std(&f1);
        let (spf_mean, _) = mean_std(&secs_per_frame);
        rows.push(BenchmarkRow {
            variant: variant.name.clone(),
            method: variant.config.scorer.mode.to_string(),
            clustering: variant.config.cluster.algorithm.to_string(),
            mode: variant.config.graph.mode.to_string(),
            status: if failures.is_empty() {
                "ok".to_string()
            } else {
                failures.join("; ")
            },
            seeds_ok: f1.len() as u32,
            seeds_failed: failures.len() as u32,
            precision_mean,
            precision_std,
            recall_mean,
            recall_std,
            f1_mean,
            f1_std,
            secs_per_frame: spf_mean,
        });

        if !curves.is_empty() {
            let curve_dir = out_dir.join("curves");
            fs::create_dir_all(&curve_dir)?;
            let mut writer =
                csv::Writer::from_path(curve_dir.join(format!("{}.csv", variant.name)))?;
            writer.write_record(["frame", "f1_mean"])?;
            for (frame, values) in &curves {
                let (mean, _) = mean_std(values);
                writer.write_record([frame.to_string(), mean.to_string()])?;
            }
            writer.flush()?;
        }
    }

    let mut writer = csv::Writer::from_path(out_dir.join("benchmark.csv"))?;
    for row in &rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(rows)
}
