//! `groupdet` — dynamic human-group detection from the command line.
//!
//! One subcommand per pipeline stage (`simulate`, `train-head`, `score`,
//! `build-graph`, `cluster`, `detect`, `evaluate`), plus `pipeline` for the
//! whole run and `benchmark` for a variant matrix. Stage subcommands read
//! and write the same interchange files the pipeline produces, so a run can
//! be reproduced or resumed stage by stage.
//!
//! Exit codes: 0 on success, 1 when a stage fails, 2 on usage or
//! configuration errors (including a missing config file).

use clap::{Args, Parser, Subcommand};
use groupdet_core::clustering::Clusterer;
use groupdet_core::eval::{evaluate_dynamic, evaluate_static, EvalReport};
use groupdet_core::groupness::{labeled_pairs_from_scenario, train_head, HeadWeights, TrainParams};
use groupdet_core::graph::{aggregate_static_graph, link_temporal};
use groupdet_core::groups::{dynamic_to_static, partition_to_dynamic};
use groupdet_core::pipeline::{
    cluster_static_graph, cluster_temporal_graph, constant_dynamic_groups, framewise_graphs,
    run_benchmark, run_pipeline, score_scenario, BenchmarkRow, BenchmarkVariant, GraphMode,
    RunConfig, ScorerMode,
};
use groupdet_core::{io, sim, Error, Result};
use serde::Deserialize;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "groupdet",
    version,
    about = "Detect dynamically changing human groups in trajectory scenes",
    propagate_version = true
)]
struct Cli {
    /// Run configuration file (TOML); defaults apply when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Seed overriding the config; one seed governs all randomness.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Output directory overriding the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Clustering algorithm: louvain, lp, or cnm.
    #[arg(long, global = true, value_name = "NAME")]
    clusterer: Option<Clusterer>,

    /// Pairs are scored only within each person's k nearest neighbors.
    #[arg(long, global = true, value_name = "N")]
    k: Option<usize>,

    /// Weight multiplier on temporal (identity) edges.
    #[arg(long = "lambda-t", global = true, value_name = "X")]
    lambda_t: Option<f64>,

    /// Minimum groupness for a spatial edge; 0 keeps every scored pair.
    #[arg(long, global = true, value_name = "X")]
    threshold: Option<f64>,

    /// Count groups of one person on both sides of the evaluation.
    #[arg(long, global = true)]
    include_singletons: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario and its (possibly corrupted) identity links.
    Simulate,
    /// Train the softmax groupness head on a scenario's ground truth.
    TrainHead(TrainHeadArgs),
    /// Score every k-NN pair of every frame with the configured head.
    Score(ScoreArgs),
    /// Build the temporal groupness graph, or the static aggregate.
    BuildGraph(BuildGraphArgs),
    /// Cluster a groupness graph into communities.
    Cluster(ClusterArgs),
    /// Turn a clustering into per-frame dynamic groups and a static set.
    Detect(DetectArgs),
    /// Score detected groups against ground truth.
    Evaluate(EvaluateArgs),
    /// Run every stage end to end into one artifact directory.
    Pipeline,
    /// Run a variant matrix over seeds and write a comparison table.
    Benchmark(BenchmarkArgs),
}

#[derive(Args)]
struct TrainHeadArgs {
    /// Scenario to train on; simulated from the config when omitted.
    #[arg(long, value_name = "FILE")]
    scenario: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    /// Scenario whose pairs to score.
    #[arg(long, value_name = "FILE")]
    scenario: PathBuf,
    /// Head weights to score with, overriding the configured scorer mode.
    #[arg(long, value_name = "FILE")]
    weights: Option<PathBuf>,
}

#[derive(Args)]
struct BuildGraphArgs {
    /// Scenario the scores belong to.
    #[arg(long, value_name = "FILE")]
    scenario: PathBuf,
    /// Pair scores (JSONL or CSV).
    #[arg(long, value_name = "FILE")]
    scores: PathBuf,
    /// Identity links; required for the temporal graph mode.
    #[arg(long, value_name = "FILE")]
    links: Option<PathBuf>,
}

#[derive(Args)]
struct ClusterArgs {
    /// Temporal groupness graph (JSONL) to partition.
    #[arg(long, value_name = "FILE", required_unless_present = "static_graph")]
    graph: Option<PathBuf>,
    /// Aggregated person graph (JSONL) to cluster into one group set.
    #[arg(long, value_name = "FILE", conflicts_with = "graph")]
    static_graph: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    /// Temporal graph the partition labels refer to.
    #[arg(long, value_name = "FILE", requires = "partition")]
    graph: Option<PathBuf>,
    /// Node partition produced by `cluster`.
    #[arg(long, value_name = "FILE", requires = "graph")]
    partition: Option<PathBuf>,
    /// Scenario giving per-frame presence for the static baseline.
    #[arg(long, value_name = "FILE", requires = "static_groups")]
    scenario: Option<PathBuf>,
    /// Static group set to hold constant over the scenario.
    #[arg(long, value_name = "FILE", requires = "scenario")]
    static_groups: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Detected groups (dynamic JSONL, or static with --static).
    #[arg(long, value_name = "FILE")]
    detected: PathBuf,
    /// Ground-truth groups in the same format.
    #[arg(long, value_name = "FILE")]
    truth: PathBuf,
    /// Treat both inputs as static group sets.
    #[arg(long = "static")]
    is_static: bool,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Worker pool size; defaults to the available cores.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                // Bad configuration or a user-supplied path that does not
                // exist is a usage error; anything else failed mid-stage.
                Error::Config { .. } => ExitCode::from(2),
                Error::Io(ref io) if io.kind() == std::io::ErrorKind::NotFound => {
                    ExitCode::from(2)
                }
                _ => ExitCode::from(1),
            }
        }
    }
}

/// The config with every command-line override applied.
fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    if let Some(clusterer) = cli.clusterer {
        config.cluster.algorithm = clusterer;
    }
    if let Some(k) = cli.k {
        config.graph.k = k;
    }
    if let Some(lambda_t) = cli.lambda_t {
        config.graph.lambda_t = lambda_t;
    }
    if let Some(tau) = cli.threshold {
        config.graph.tau = tau;
    }
    if cli.include_singletons {
        config.eval.include_singletons = true;
    }
    config.validate()?;
    Ok(config)
}

fn out_dir(config: &RunConfig) -> Result<&Path> {
    fs::create_dir_all(&config.output_dir)?;
    Ok(&config.output_dir)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate => simulate(cli),
        Command::TrainHead(args) => train_head_cmd(cli, args),
        Command::Score(args) => score(cli, args),
        Command::BuildGraph(args) => build_graph(cli, args),
        Command::Cluster(args) => cluster(cli, args),
        Command::Detect(args) => detect(cli, args),
        Command::Evaluate(args) => evaluate(cli, args),
        Command::Pipeline => pipeline(cli),
        Command::Benchmark(args) => benchmark(cli, args),
    }
}

fn simulate(cli: &Cli) -> Result<()> {
    let config = load_config(cli)?;
    let dir = out_dir(&config)?;
    let scenario = sim::simulate(&config.sim, config.seed)?;
    let links = sim::corrupt_tracks(
        &scenario,
        config.tracking.id_switch_rate,
        config.tracking.confidence_sigma,
        config.seed,
    )?;
    io::write_scenario(&dir.join("scenario.jsonl"), &scenario)?;
    io::write_links(&dir.join("links.jsonl"), &links)?;
    println!(
        "simulated {} frames of {} people (seed {}) into {}",
        scenario.states.len(),
        config.sim.num_people,
        config.seed,
        dir.display()
    );
    Ok(())
}

fn load_or_simulate(config: &RunConfig, path: &Option<PathBuf>) -> Result<sim::Scenario> {
    match path {
        Some(p) => io::read_scenario(p),
        None => sim::simulate(&config.sim, config.seed),
    }
}

fn train_head_cmd(cli: &Cli, args: &TrainHeadArgs) -> Result<()> {
    let config = load_config(cli)?;
    let dir = out_dir(&config)?;
    let scenario = load_or_simulate(&config, &args.scenario)?;
    let labeled = labeled_pairs_from_scenario(&scenario, config.scorer.window)?;
    let params = TrainParams { seed: config.seed, ..config.scorer.train.clone() };
    let weights = train_head(&labeled, &params)?;
    let path = dir.join("weights.json");
    io::write_weights(&path, &weights)?;
    println!("trained on {} labeled pairs; weights in {}", labeled.len(), path.display());
    Ok(())
}

fn score(cli: &Cli, args: &ScoreArgs) -> Result<()> {
    let config = load_config(cli)?;
    let dir = out_dir(&config)?;
    let scenario = io::read_scenario(&args.scenario)?;
    let scores = match (&args.weights, config.scorer.mode) {
        (Some(path), _) => {
            let weights = io::read_weights(path)?;
            score_scenario(&scenario, &weights, config.scorer.window, config.graph.k)?
        }
        (None, ScorerMode::Handcrafted) => {
            let weights = HeadWeights::handcrafted(&config.scorer.handcrafted);
            score_scenario(&scenario, &weights, config.scorer.window, config.graph.k)?
        }
        (None, ScorerMode::Trained) => {
            let labeled = labeled_pairs_from_scenario(&scenario, config.scorer.window)?;
            let params = TrainParams { seed: config.seed, ..config.scorer.train.clone() };
            let weights = train_head(&labeled, &params)?;
            score_scenario(&scenario, &weights, config.scorer.window, config.graph.k)?
        }
        (None, ScorerMode::Ingested) => {
            let path = config.scorer.path.as_ref().expect("validated: ingested mode has a path");
            io::read_scores(path)?
        }
    };
    io::write_scores_jsonl(&dir.join("scores.jsonl"), &scores)?;
    io::write_scores_csv(&dir.join("scores.csv"), &scores)?;
    println!("scored {} pairs into {}", scores.len(), dir.display());
    Ok(())
}

fn build_graph(cli: &Cli, args: &BuildGraphArgs) -> Result<()> {
    let config = load_config(cli)?;
    let dir = out_dir(&config)?;
    let scenario = io::read_scenario(&args.scenario)?;
    let scores = io::read_scores(&args.scores)?;
    let framewise = framewise_graphs(&scenario, &scores, config.graph.tau)?;
    match config.graph.mode {
        GraphMode::Temporal => {
            let links = match &args.links {
                Some(path) => io::read_links(path)?,
                None => {
                    return Err(Error::config(
                        "links",
                        "temporal graph mode needs --links (or set graph.mode = \"static\")",
                    ))
                }
            };
            let graph = link_temporal(&framewise, &links, config.graph.lambda_t)?;
            let path = dir.join("graph.jsonl");
            io::write_graph(&path, &graph)?;
            println!(
                "temporal graph: {} nodes, {} spatial + {} temporal edges in {}",
                graph.nodes.len(),
                graph.spatial_edges.len(),
                graph.temporal_edges.len(),
                path.display()
            );
        }
        GraphMode::Static => {
            let graph = aggregate_static_graph(&framewise)?;
            let path = dir.join("static_graph.jsonl");
            io::write_static_graph(&path, &graph)?;
            println!(
                "static graph: {} persons, {} edges in {}",
                graph.persons.len(),
                graph.edges.len(),
                path.display()
            );
        }
    }
    Ok(())
}

fn cluster(cli: &Cli, args: &ClusterArgs) -> Result<()> {
    let config = load_config(cli)?;
    let dir = out_dir(&config)?;
    if let Some(path) = &args.graph {
        let graph = io::read_graph(path)?;
        let partition = cluster_temporal_graph(&graph, &config.cluster, config.seed)?;
        io::write_partition_jsonl(&dir.join("partition.jsonl"), &partition)?;
        io::write_partition_csv(&dir.join("partition.csv"), &partition)?;
        let communities = partition.assignment.values().collect::<std::collections::BTreeSet<_>>();
        println!(
            "{}: {} nodes in {} communities; partition in {}",
            config.cluster.algorithm,
            partition.assignment.len(),
            communities.len(),
            dir.display()
        );
    } else {
        let path = args.static_graph.as_ref().expect("clap: one graph flag is present");
        let graph = io::read_static_graph(path)?;
        let groups = cluster_static_graph(&graph, &config.cluster, config.seed)?;
        let out = dir.join("static_groups.jsonl");
        io::write_static_groups(&out, &groups)?;
        println!("{}: {} static groups in {}", config.cluster.algorithm, groups.groups.len(), out.display());
    }
    Ok(())
}

fn detect(cli: &Cli, args: &DetectArgs) -> Result<()> {
    let config = load_config(cli)?;
    let dir = out_dir(&config)?;
    let (dynamic, static_groups) = match (&args.graph, &args.scenario) {
        (Some(graph_path), None) => {
            let graph = io::read_graph(graph_path)?;
            let partition = io::read_partition(args.partition.as_ref().expect("clap: requires"))?;
            let dynamic = partition_to_dynamic(&partition, &graph)?;
            let static_groups = dynamic_to_static(&dynamic)?;
            (dynamic, static_groups)
        }
        (None, Some(scenario_path)) => {
            let scenario = io::read_scenario(scenario_path)?;
            let static_groups =
                io::read_static_groups(args.static_groups.as_ref().expect("clap: requires"))?;
            (constant_dynamic_groups(&scenario, &static_groups), static_groups)
        }
        _ => {
            return Err(Error::config(
                "detect",
                "pass --graph with --partition, or --scenario with --static-groups",
            ))
        }
    };
    io::write_dynamic_groups(&dir.join("dynamic_groups.jsonl"), &dynamic)?;
    io::write_static_groups(&dir.join("static_groups.jsonl"), &static_groups)?;
    println!(
        "detected groups over {} frames ({} static) in {}",
        dynamic.per_frame.len(),
        static_groups.groups.len(),
        dir.display()
    );
    Ok(())
}

fn print_report(kind: &str, report: &EvalReport) {
    println!(
        "{kind}: precision {:.4}  recall {:.4}  f1 {:.4}  (tp {} fp {} fn {})",
        report.precision, report.recall, report.f1, report.tp, report.fp, report.fn_
    );
}

fn evaluate(cli: &Cli, args: &EvaluateArgs) -> Result<()> {
    let config = load_config(cli)?;
    let dir = out_dir(&config)?;
    let report = if args.is_static {
        let detected = io::read_static_groups(&args.detected)?;
        let truth = io::read_static_groups(&args.truth)?;
        evaluate_static(&detected, &truth, &config.eval)?
    } else {
        let detected = io::read_dynamic_groups(&args.detected)?;
        let truth = io::read_dynamic_groups(&args.truth)?;
        evaluate_dynamic(&detected, &truth, &config.eval)?
    };
    io::write_report_json(&dir.join("report.json"), &report)?;
    if !args.is_static {
        io::write_per_frame_csv(&dir.join("per_frame.csv"), &report)?;
    }
    print_report(if args.is_static { "static" } else { "dynamic" }, &report);
    Ok(())
}

fn pipeline(cli: &Cli) -> Result<()> {
    let config = load_config(cli)?;
    let outcome = run_pipeline(&config)?;
    print_report("dynamic", &outcome.report_dynamic);
    print_report("static", &outcome.report_static);
    println!(
        "artifacts in {} ({:.2}s total)",
        config.output_dir.display(),
        outcome.timings.total_secs
    );
    Ok(())
}

/// Benchmark config file: a base run config plus a list of variants, each
/// overriding a few knobs. Variants without their own seed list share the
/// top-level one.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchmarkSpec {
    #[serde(default)]
    seeds: Vec<u64>,
    #[serde(default)]
    base: RunConfig,
    variants: Vec<VariantSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariantSpec {
    name: String,
    seeds: Option<Vec<u64>>,
    clusterer: Option<Clusterer>,
    mode: Option<GraphMode>,
    scorer: Option<ScorerMode>,
    k: Option<usize>,
    lambda_t: Option<f64>,
    tau: Option<f64>,
}

impl BenchmarkSpec {
    fn variants(&self, base: &RunConfig) -> Vec<BenchmarkVariant> {
        self.variants
            .iter()
            .map(|v| {
                let mut config = base.clone();
                if let Some(clusterer) = v.clusterer {
                    config.cluster.algorithm = clusterer;
                }
                if let Some(mode) = v.mode {
                    config.graph.mode = mode;
                }
                if let Some(scorer) = v.scorer {
                    config.scorer.mode = scorer;
                }
                if let Some(k) = v.k {
                    config.graph.k = k;
                }
                if let Some(lambda_t) = v.lambda_t {
                    config.graph.lambda_t = lambda_t;
                }
                if let Some(tau) = v.tau {
                    config.graph.tau = tau;
                }
                BenchmarkVariant {
                    name: v.name.clone(),
                    config,
                    seeds: v.seeds.clone().unwrap_or_else(|| self.seeds.clone()),
                }
            })
            .collect()
    }
}

fn print_rows(rows: &[BenchmarkRow]) {
    println!(
        "{:<16} {:<12} {:<10} {:<8} {:<8} {:>7} {:>15} {:>13}",
        "variant", "method", "clustering", "mode", "status", "seeds", "f1 mean±std", "secs/frame"
    );
    for row in rows {
        let status = if row.status == "ok" { "ok" } else { "failed" };
        println!(
            "{:<16} {:<12} {:<10} {:<8} {:<8} {:>7} {:>8.4}±{:.4} {:>13.6}",
            row.variant,
            row.method,
            row.clustering,
            row.mode,
            status,
            row.seeds_ok,
            row.f1_mean,
            row.f1_std,
            row.secs_per_frame
        );
    }
}

fn benchmark(cli: &Cli, args: &BenchmarkArgs) -> Result<()> {
    let path = cli.config.as_ref().ok_or_else(|| {
        Error::config("config", "benchmark needs --config pointing at a variant matrix")
    })?;
    let text = fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    let spec: BenchmarkSpec =
        toml::from_str(&text).map_err(|e| Error::config("config", e.to_string()))?;
    if spec.variants.is_empty() {
        return Err(Error::config("variants", "benchmark needs at least one variant"));
    }

    // Command-line overrides shape the base config the variants build on.
    let mut base = spec.base.clone();
    if let Some(seed) = cli.seed {
        base.seed = seed;
    }
    if let Some(clusterer) = cli.clusterer {
        base.cluster.algorithm = clusterer;
    }
    if let Some(k) = cli.k {
        base.graph.k = k;
    }
    if let Some(lambda_t) = cli.lambda_t {
        base.graph.lambda_t = lambda_t;
    }
    if let Some(tau) = cli.threshold {
        base.graph.tau = tau;
    }
    if cli.include_singletons {
        base.eval.include_singletons = true;
    }
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("bench"));

    let variants = spec.variants(&base);
    let rows = run_benchmark(&variants, &out, args.threads)?;
    print_rows(&rows);
    println!("table in {}", out.join("benchmark.csv").display());
    Ok(())
}
