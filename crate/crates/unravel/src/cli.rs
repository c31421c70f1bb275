//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use unravel_core::embed::{train, Optimizer, TrainConfig};
use unravel_core::eval::evaluate;
use unravel_core::fuzzy::{Conjunction, Disjunction, FuzzyConfig, ProjectionMode};
use unravel_core::homomorphism::find_homomorphism;
use unravel_core::metrics::RankScope;
use unravel_core::predictor::{CrispPredictor, LinkPredictor, ScoreTable};
use unravel_core::querygen::{generate_one, GenConfig, Neighborhood, QueryType, Unanchor};
use unravel_core::synth::{cluster_graph, split, SynthConfig};
use unravel_core::unravel::{unravel_with, UnravelOptions, DEFAULT_DEPTH_LIMIT};
use unravel_core::KnowledgeGraph;

use crate::error::{CliError, Result};
use crate::model_io::{self, ModelHeader};
use crate::pipeline::{evaluate_workload, is_cyclic, with_threads, EvalSettings};
use crate::query_io::{read_query, read_workload, witness_json, write_json, write_workload, ProvenanceJson, QueryJson};
use crate::report::{sweep_csv, write_reports, ReportJson};
use crate::tsv::{load_graph, load_pair, load_with_dictionary, write_graph, DictionaryExport};

/// Largest score table materialized for a trained model, in entries.
const MAX_TABLE_ENTRIES: usize = 1 << 27;

#[derive(Debug, Parser)]
#[command(name = "unravel", version, about = "Unraveling-based query answering over incomplete knowledge graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load triple files and print their sizes
    LoadCheck(LoadCheckArgs),
    /// Write the depth-D unraveling of a query
    Unravel(UnravelArgs),
    /// Decide containment of one query in another
    Contains(ContainsArgs),
    /// Exact answers of a query over a graph
    Answer(AnswerArgs),
    /// Sample and label a query workload
    Gen(GenArgs),
    /// Train a bilinear link predictor
    Train(TrainArgs),
    /// Evaluate a workload and write per-depth reports
    Eval(EvalArgs),
    /// Evaluate a workload over several depths and write a CSV
    Sweep(EvalArgs),
    /// Write a seeded synthetic train/full pair
    Synth(SynthArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct LoadCheckArgs {
    /// Triple files; several are merged
    #[arg(long = "graph", required = true)]
    pub graphs: Vec<PathBuf>,
    /// Write the dictionaries as JSON
    #[arg(long)]
    pub dict_out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct UnravelArgs {
    #[arg(long)]
    pub query: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub depth: usize,
    #[arg(long, default_value_t = DEFAULT_DEPTH_LIMIT)]
    pub depth_limit: usize,
    /// Defaults to standard output
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub provenance: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ContainsArgs {
    /// The query tested for containment
    #[arg(long)]
    pub query: PathBuf,
    /// The query that may contain it
    #[arg(long)]
    pub container: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AnswerArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub query: PathBuf,
    /// Answer the depth-D unraveling instead of a cyclic query itself
    #[arg(long)]
    pub depth: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionArg {
    MaxProduct,
    NoisyOr,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConjArg {
    Product,
    Min,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DisjArg {
    ProbSum,
    Max,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScopeArg {
    Hard,
    All,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorArg {
    Crisp,
    Model,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerArg {
    Sgd,
    Adam,
}

#[derive(Debug, Args, Serialize)]
pub struct GenArgs {
    #[arg(long = "type")]
    pub query_type: String,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub full: PathBuf,
    #[arg(long, default_value_t = 13)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Replace every anchor by a fresh variable
    #[arg(long, conflicts_with = "anchor_subset")]
    pub unanchored: bool,
    /// Replace a random nonempty subset of anchors
    #[arg(long)]
    pub anchor_subset: bool,
    /// Keep queries whose answers are all easy
    #[arg(long)]
    pub allow_no_hard: bool,
    #[arg(long, default_value_t = unravel_core::querygen::DEFAULT_MAX_ATTEMPTS)]
    pub max_attempts: usize,
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Extra triple file contributing only dictionary entries
    #[arg(long)]
    pub full: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 4)]
    pub negatives: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    pub optimizer: OptimizerArg,
    #[arg(long, default_value_t = 0.5)]
    pub init_scale: f64,
    #[arg(long, default_value_t = 0.0)]
    pub l2: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// Graph behind the crisp predictor and the dictionary
    #[arg(long)]
    pub graph: PathBuf,
    /// Extra triple file contributing only dictionary entries
    #[arg(long)]
    pub full: Option<PathBuf>,
    /// Directory holding queries.jsonl and answers.jsonl
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long, value_enum, default_value_t = PredictorArg::Crisp)]
    pub predictor: PredictorArg,
    #[arg(long, required_if_eq("predictor", "model"))]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ProjectionArg::MaxProduct)]
    pub projection: ProjectionArg,
    #[arg(long, value_enum, default_value_t = ConjArg::Product)]
    pub conj: ConjArg,
    #[arg(long, value_enum, default_value_t = DisjArg::ProbSum)]
    pub disj: DisjArg,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Comma-separated unraveling depths
    #[arg(long, value_delimiter = ',', default_value = "3")]
    pub depths: Vec<String>,
    #[arg(long, value_enum, default_value_t = ScopeArg::Hard)]
    pub scope: ScopeArg,
    /// Average reciprocal ranks over answers instead of queries
    #[arg(long)]
    pub pooled: bool,
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    pub entities: usize,
    #[arg(long, default_value_t = 20)]
    pub relations: usize,
    #[arg(long, default_value_t = 10_000)]
    pub edges: usize,
    #[arg(long, default_value_t = 20)]
    pub clusters: usize,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    /// Fraction of edges held out of train.tsv
    #[arg(long, default_value_t = 0.1)]
    pub holdout: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::LoadCheck(a) => load_check(&a),
        Command::Unravel(a) => cmd_unravel(&a),
        Command::Contains(a) => contains(&a),
        Command::Answer(a) => answer(&a),
        Command::Gen(a) => gen(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => eval(&a, false),
        Command::Sweep(a) => eval(&a, true),
        Command::Synth(a) => synth(&a),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    println!("{text}");
    Ok(())
}

#[derive(Serialize)]
struct Echo<'a, T> {
    command: &'a str,
    version: &'a str,
    args: &'a T,
}

/// Records the invocation next to its outputs.
fn echo_config<T: Serialize>(dir: &Path, command: &str, args: &T) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let echo = Echo {
        command,
        version: env!("CARGO_PKG_VERSION"),
        args,
    };
    write_json(&dir.join(format!("{command}.config.json")), &echo)
}

fn parent_dir(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

fn load_check(a: &LoadCheckArgs) -> Result<()> {
    let mut g = load_graph(&a.graphs[0])?;
    for p in &a.graphs[1..] {
        g = g.merge(&load_graph(p)?);
    }
    if let Some(p) = &a.dict_out {
        write_json(p, &DictionaryExport::of(&g))?;
    }
    print_json(&serde_json::json!({
        "entities": g.num_entities(),
        "relations": g.num_relations(),
        "edges": g.num_edges(),
    }))
}

fn cmd_unravel(a: &UnravelArgs) -> Result<()> {
    let q = read_query(&a.query)?;
    let opts = UnravelOptions {
        depth_limit: a.depth_limit,
        ..UnravelOptions::default()
    };
    let u = unravel_with(&q, a.depth, &opts)?;
    let body = QueryJson::from_query(&u.query, None);
    match &a.out {
        Some(p) => write_json(p, &body)?,
        None => print_json(&body)?,
    }
    if let Some(p) = &a.provenance {
        write_json(p, &ProvenanceJson::of(&u))?;
    }
    Ok(())
}

fn contains(a: &ContainsArgs) -> Result<()> {
    let q = read_query(&a.query)?;
    let container = read_query(&a.container)?;
    let witness = find_homomorphism(&container, &q)?;
    print_json(&serde_json::json!({
        "contained": witness.is_some(),
        "witness": witness.as_ref().map(witness_json),
    }))
}

fn answer(a: &AnswerArgs) -> Result<()> {
    let g = load_graph(&a.graph)?;
    let mut q = read_query(&a.query)?;
    if let Some(d) = a.depth {
        if is_cyclic(&q)? {
            q = unravel_with(&q, d, &UnravelOptions::default())?.query;
        }
    }
    let answers = evaluate(&q, &g)?;
    let names: Vec<&str> = answers.iter().map(|e| g.entity_name(e).unwrap_or_default()).collect();
    print_json(&names)
}

fn gen(a: &GenArgs) -> Result<()> {
    let t: QueryType = a
        .query_type
        .parse()
        .map_err(|_| CliError::Usage(format!("unknown query type {:?}", a.query_type)))?;
    let (train_g, full_g) = load_pair(&a.train, &a.full)?;
    let cfg = GenConfig {
        count: a.count,
        seed: a.seed,
        unanchor: match (a.unanchored, a.anchor_subset) {
            (true, _) => Unanchor::All,
            (_, true) => Unanchor::RandomSubset,
            _ => Unanchor::None,
        },
        require_hard: !a.allow_no_hard,
        max_attempts: a.max_attempts,
    };
    let nb = Neighborhood::new(&full_g);
    let batch = with_threads(a.parallel, || {
        (0..cfg.count)
            .into_par_iter()
            .map(|i| generate_one(t, &train_g, &full_g, &nb, &cfg, i))
            .collect::<unravel_core::Result<Vec<_>>>()
    })??;
    write_workload(&a.out, &batch, &full_g)?;
    echo_config(&a.out, "gen", a)?;
    eprintln!("wrote {} {} queries to {}", batch.len(), t, a.out.display());
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let g = load_with_dictionary(&a.graph, a.full.as_deref())?;
    let cfg = TrainConfig {
        dim: a.dim,
        epochs: a.epochs,
        learning_rate: a.lr,
        negatives: a.negatives,
        seed: a.seed,
        optimizer: match a.optimizer {
            OptimizerArg::Sgd => Optimizer::Sgd,
            OptimizerArg::Adam => Optimizer::Adam,
        },
        init_scale: a.init_scale,
        l2: a.l2,
    };
    let outcome = train(&g, &cfg)?;
    let header = ModelHeader {
        dim: cfg.dim,
        num_entities: g.num_entities(),
        num_relations: g.num_relations(),
        dictionary: DictionaryExport::of(&g).fingerprint(),
        config: (&cfg).into(),
    };
    let dir = parent_dir(&a.out);
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    model_io::save(&a.out, &outcome.model, &header)?;
    echo_config(dir, "train", a)?;
    write_json(&dir.join("loss_trace.json"), &outcome.loss_trace)?;
    if let Some(last) = outcome.loss_trace.last() {
        eprintln!("final probe loss {last:.6}");
    }
    Ok(())
}

fn parse_depths(raw: &[String]) -> Result<Vec<usize>> {
    let depths: Vec<usize> = raw
        .iter()
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| CliError::Usage(format!("bad depth {s:?}"))))
        .collect::<Result<_>>()?;
    if depths.is_empty() {
        return Err(CliError::Usage("empty depth list".into()));
    }
    if let Some(&d) = depths.iter().find(|&&d| d == 0 || d > DEFAULT_DEPTH_LIMIT) {
        return Err(CliError::Usage(format!("depth {d} outside 1..={DEFAULT_DEPTH_LIMIT}")));
    }
    Ok(depths)
}

fn settings(a: &EvalArgs) -> Result<EvalSettings> {
    let fuzzy = FuzzyConfig {
        projection: match a.projection {
            ProjectionArg::MaxProduct => ProjectionMode::MaxProduct,
            ProjectionArg::NoisyOr => ProjectionMode::NoisyOr,
        },
        conjunction: match a.conj {
            ConjArg::Product => Conjunction::Product,
            ConjArg::Min => Conjunction::Min,
        },
        disjunction: match a.disj {
            DisjArg::ProbSum => Disjunction::ProbSum,
            DisjArg::Max => Disjunction::Max,
        },
        count_threshold: a.threshold,
    };
    fuzzy.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(EvalSettings {
        fuzzy,
        depths: parse_depths(&a.depths)?,
        scope: match a.scope {
            ScopeArg::Hard => RankScope::HardOnly,
            ScopeArg::All => RankScope::All,
        },
        pooled: a.pooled,
    })
}

fn model_predictor(path: &Path, g: &KnowledgeGraph) -> Result<Box<dyn LinkPredictor>> {
    let (model, header) = model_io::load(path)?;
    let fingerprint = DictionaryExport::of(g).fingerprint();
    if header.dictionary != fingerprint {
        return Err(CliError::Core(unravel_core::Error::Binding(format!(
            "model {} was trained over a different dictionary ({} vs {fingerprint})",
            path.display(),
            header.dictionary
        ))));
    }
    let entries = header.num_entities * header.num_entities * header.num_relations;
    if entries <= MAX_TABLE_ENTRIES {
        Ok(Box::new(ScoreTable::from_predictor(&model)))
    } else {
        Ok(Box::new(model))
    }
}

fn dataset_name(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn eval(a: &EvalArgs, sweep: bool) -> Result<()> {
    let s = settings(a)?;
    let g = load_with_dictionary(&a.graph, a.full.as_deref())?;
    let batch = read_workload(&a.queries, &g)?;
    if sweep && !batch.iter().any(|q| is_cyclic(&q.query).unwrap_or(false)) {
        return Err(CliError::Format(format!("{} holds no cyclic query to sweep", a.queries.display())));
    }
    let crisp;
    let boxed;
    let (predictor, label): (&dyn LinkPredictor, String) = match a.predictor {
        PredictorArg::Crisp => {
            crisp = CrispPredictor::new(&g);
            (&crisp, "crisp".into())
        }
        PredictorArg::Model => {
            let path = a.model.as_deref().ok_or_else(|| CliError::Usage("--model is required".into()))?;
            boxed = model_predictor(path, &g)?;
            (boxed.as_ref(), format!("model:{}", dataset_name(path)))
        }
    };
    let reports = with_threads(a.parallel, || evaluate_workload(&batch, &g, predictor, &s))??;
    let dataset = dataset_name(&a.graph);
    let json: Vec<ReportJson> = reports.iter().map(|r| ReportJson::new(&dataset, &label, r, &s)).collect();
    std::fs::create_dir_all(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    if sweep {
        let path = a.out.join("sweep.csv");
        std::fs::write(&path, sweep_csv(&json)?).map_err(|e| CliError::io(&path, e))?;
        echo_config(&a.out, "sweep", a)?;
    } else {
        write_reports(&a.out, &json)?;
        echo_config(&a.out, "eval", a)?;
        for r in &json {
            print!("{}", r.to_table());
        }
    }
    Ok(())
}

fn synth(a: &SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        entities: a.entities,
        relations: a.relations,
        edges: a.edges,
        clusters: a.clusters,
        noise: a.noise,
        seed: a.seed,
    };
    let g = cluster_graph(&cfg)?;
    let (train_g, full_g) = split(&g, a.holdout, a.seed)?;
    std::fs::create_dir_all(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    write_graph(&train_g, &a.out.join("train.tsv"))?;
    write_graph(&full_g, &a.out.join("full.tsv"))?;
    echo_config(&a.out, "synth", a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_lists() {
        assert_eq!(parse_depths(&["2".into(), "4".into()]).unwrap(), vec![2, 4]);
        assert_eq!(parse_depths(&[]).unwrap_err().exit_code(), 1);
        assert_eq!(parse_depths(&["".into()]).unwrap_err().exit_code(), 1);
        assert!(parse_depths(&["0".into()]).is_err());
        assert!(parse_depths(&["x".into()]).is_err());
    }

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
