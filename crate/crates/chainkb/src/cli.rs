//! Command-line driver.
//!
//! Every subcommand writes a JSON config echo next to its outputs. The echo
//! holds the parsed arguments and any resolved settings and no clock
//! readings, so two runs with the same echo produce the same bytes.

use std::collections::BTreeSet;
use std::path::{Path as FsPath, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use chainkb_core::eval::evaluate;
use chainkb_core::kgraph::{WalkConfig, MAX_PATH_LEN};
use chainkb_core::numcore::{derive_rng, AdamConfig};
use chainkb_core::pathmodel::{ModelConfig, ModelShape, PathQueryVariant};
use chainkb_core::pathquery::{
    edge_queries, evaluate_mq, init_model, sample_queries, train_pathquery, PathQueryConfig,
};
use chainkb_core::synthkg::{generate, SynthSpec};
use chainkb_core::training::{
    build_dataset, subsample, train, DatasetConfig, PathStore, TrainConfig, TrainError,
};
use chainkb_core::{KnowledgeGraph, ModelParams, PoolingKind, RelationId};

use crate::checkpoint::Checkpoint;
use crate::formats::{self, write_file};
use crate::report::{EvalSummary, PathQuerySummary};

#[derive(Debug, Parser)]
#[command(name = "chainkb", version, about = "Recurrent path reasoning over knowledge graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case", tag = "command")]
pub enum Command {
    /// Generate a synthetic graph with planted rules and labeled splits.
    Synth(SynthArgs),
    /// Sample connecting paths for entity pairs.
    Paths(PathsArgs),
    /// Train a path model on the query-relation triples of a graph.
    Train(TrainArgs),
    /// Rank labeled held-out triples with a trained model.
    Eval(EvalArgs),
    /// Train a path-query scorer and report its mean quantile.
    Pathquery(PathQueryArgs),
}

#[derive(Debug, clap::Args, Serialize)]
pub struct SynthArgs {
    /// JSON generator spec; omitted fields take their defaults.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct PathsArgs {
    #[arg(long)]
    pub kg: PathBuf,
    /// `source\ttarget` lines, or labeled triple lines.
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long, default_value_t = MAX_PATH_LEN)]
    pub max_len: usize,
    #[arg(long, default_value_t = 200)]
    pub walks: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated relations whose direct edge between a pair is not walked.
    #[arg(long)]
    pub block: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

const MODELS: [&str; 5] = ["pathrnn", "single", "single+ent", "single+types", "single+ent+types"];

#[derive(Debug, clap::Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub kg: PathBuf,
    #[arg(long)]
    pub types: Option<PathBuf>,
    /// Precomputed paths; pairs not listed are sampled on demand.
    #[arg(long)]
    pub paths: Option<PathBuf>,
    /// Extra labeled triples (positives and explicit negatives).
    #[arg(long)]
    pub labeled: Option<PathBuf>,
    /// Comma-separated query relations; defaults to those in --labeled.
    #[arg(long)]
    pub relations: Option<String>,
    #[arg(long, default_value = "single", value_parser = clap::builder::PossibleValuesParser::new(MODELS))]
    pub model: String,
    /// max | topk:K | avg | lse
    #[arg(long, default_value = "lse")]
    pub pool: PoolingKind,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Relation embedding size.
    #[arg(long, default_value_t = 250)]
    pub dim_relation: usize,
    #[arg(long, default_value_t = 250)]
    pub dim_hidden: usize,
    /// Entity and type embedding size.
    #[arg(long, default_value_t = 50)]
    pub dim_entity: usize,
    #[arg(long, default_value_t = 4)]
    pub negatives: usize,
    /// Fraction of training groups kept per relation.
    #[arg(long, default_value_t = 1.0)]
    pub fraction: f64,
    #[arg(long, default_value_t = MAX_PATH_LEN)]
    pub max_len: usize,
    #[arg(long, default_value_t = 200)]
    pub walks: usize,
    /// Add the type-ranking objective.
    #[arg(long)]
    pub mtl_types: bool,
    #[arg(long, default_value_t = 0.1)]
    pub mtl_weight: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Loss trace CSV; defaults to `<out>.loss.csv`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub kg: PathBuf,
    #[arg(long)]
    pub types: Option<PathBuf>,
    #[arg(long)]
    pub paths: Option<PathBuf>,
    /// Labeled triples to rank.
    #[arg(long)]
    pub test: PathBuf,
    /// Defaults to the pooling the model was trained with.
    #[arg(long)]
    pub pool: Option<PoolingKind>,
    #[arg(long, default_value_t = MAX_PATH_LEN)]
    pub max_len: usize,
    #[arg(long, default_value_t = 200)]
    pub walks: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct PathQueryArgs {
    #[arg(long)]
    pub kg: PathBuf,
    /// Training queries; defaults to every edge plus the sampled queries
    /// not held out.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Test queries; defaults to the first --holdout sampled queries.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Multi-hop queries drawn by random walks.
    #[arg(long, default_value_t = 5000)]
    pub sample: usize,
    #[arg(long, default_value_t = 200)]
    pub holdout: usize,
    #[arg(long, default_value_t = 2)]
    pub min_len: usize,
    #[arg(long, default_value_t = 3)]
    pub max_len: usize,
    /// rnn_diag | comp_transe | comp_bilinear_diag
    #[arg(long, default_value = "rnn_diag")]
    pub variant: PathQueryVariant,
    #[arg(long, default_value_t = 100)]
    pub dim: usize,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub report: PathBuf,
    /// Also write the trained model here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the subcommand. Returns the
/// process exit code: 0 on success, 1 on a runtime error, 2 on bad usage.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn dispatch(command: &Command) -> Result<()> {
    match command {
        Command::Synth(a) => synth(command, a),
        Command::Paths(a) => paths(command, a),
        Command::Train(a) => train_cmd(command, a),
        Command::Eval(a) => eval_cmd(command, a),
        Command::Pathquery(a) => pathquery(command, a),
    }
}

fn echo(command: &Command, resolved: serde_json::Value) -> serde_json::Value {
    json!({
        "tool": "chainkb",
        "version": env!("CARGO_PKG_VERSION"),
        "args": command,
        "resolved": resolved,
    })
}

fn write_json(path: &FsPath, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())?;
    Ok(())
}

/// `<path>.<suffix>` next to `path`.
fn sibling(path: &FsPath, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn synth(command: &Command, a: &SynthArgs) -> Result<()> {
    let spec: SynthSpec = match &a.spec {
        Some(p) => serde_json::from_str(&formats::read_file(p)?)
            .with_context(|| format!("{}: bad generator spec", p.display()))?,
        None => SynthSpec::default(),
    };
    let data = generate(&spec, a.seed)?;
    std::fs::create_dir_all(&a.out_dir)
        .with_context(|| format!("creating {}", a.out_dir.display()))?;
    let kg = &data.kg;
    let out = |name: &str| a.out_dir.join(name);
    write_file(&out("triples.tsv"), formats::format_triples(kg).as_bytes())?;
    write_file(&out("types.tsv"), formats::format_types(kg).as_bytes())?;
    write_file(&out("train.tsv"), formats::format_labeled(kg, &data.train).as_bytes())?;
    write_file(&out("dev.tsv"), formats::format_labeled(kg, &data.dev).as_bytes())?;
    write_file(&out("test.tsv"), formats::format_labeled(kg, &data.test).as_bytes())?;
    let heads: Vec<&str> = data.heads.iter().map(|&r| kg.relation_name(r)).collect();
    write_json(
        &out("config.json"),
        &echo(command, json!({ "spec": spec, "heads": heads })),
    )?;
    eprintln!(
        "synth: {} entities, {} triples, {} train / {} dev / {} test labeled",
        kg.num_entities(),
        kg.num_triples(),
        data.train.len(),
        data.dev.len(),
        data.test.len()
    );
    Ok(())
}

fn relation_list(kg: &KnowledgeGraph, list: &str) -> Result<Vec<RelationId>> {
    formats::parse_relation_list(kg, list).map_err(|e| anyhow!(e))
}

fn walk_config(max_len: usize, walks: usize) -> Result<WalkConfig> {
    if max_len == 0 || max_len > MAX_PATH_LEN {
        bail!("--max-len must be in 1..={MAX_PATH_LEN}");
    }
    Ok(WalkConfig { max_len, walks })
}

fn paths(command: &Command, a: &PathsArgs) -> Result<()> {
    let (kg, _, _) = formats::load_graph(&a.kg, None)?;
    let pairs = formats::parse_pairs(&kg, &a.pairs, &formats::read_file(&a.pairs)?)?;
    let blocked = match &a.block {
        Some(list) => relation_list(&kg, list)?,
        None => Vec::new(),
    };
    let mut store = PathStore::new(walk_config(a.max_len, a.walks)?, a.seed, blocked);
    for (s, t) in pairs.iter().copied().collect::<BTreeSet<_>>() {
        store.paths(&kg, s, t)?;
    }
    write_file(&a.out, formats::format_paths(&kg, store.iter()).as_bytes())?;
    let found = store.iter().filter(|(_, p)| !p.is_empty()).count();
    write_json(
        &sibling(&a.out, "config.json"),
        &echo(command, json!({ "pairs": store.len(), "pairs_with_paths": found })),
    )?;
    eprintln!("paths: {found} of {} pairs connected", store.len());
    Ok(())
}

/// Path store over `kg` blocking the query relations, preloaded from a
/// paths file if one is given.
fn open_store(
    kg: &KnowledgeGraph,
    paths: Option<&FsPath>,
    walk: WalkConfig,
    seed: u64,
    blocked: &[RelationId],
) -> Result<PathStore> {
    let mut store = PathStore::new(walk, seed, blocked.to_vec());
    if let Some(p) = paths {
        for ((s, t), mut set) in formats::parse_paths(kg, p, &formats::read_file(p)?)? {
            formats::strip_blocked(&mut set, s, t, blocked);
            store.insert(s, t, set);
        }
    }
    Ok(store)
}

fn train_cmd(command: &Command, a: &TrainArgs) -> Result<()> {
    if !(a.fraction > 0.0 && a.fraction <= 1.0) {
        bail!("--fraction must be in (0, 1]");
    }
    let (kg, _, _) = formats::load_graph(&a.kg, a.types.as_deref())?;
    let labeled = match &a.labeled {
        Some(p) => formats::parse_labeled(&kg, p, &formats::read_file(p)?)?,
        None => Vec::new(),
    };
    let relations = match &a.relations {
        Some(list) => relation_list(&kg, list)?,
        None => labeled
            .iter()
            .map(|lt| lt.triple.relation)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    };
    if relations.is_empty() {
        bail!("no query relations: pass --relations or a --labeled file");
    }
    if let Some(r) = relations.iter().find(|r| r.is_inverse()) {
        bail!("query relation `{}` is an inverse relation", kg.relation_name(*r));
    }

    let walk = walk_config(a.max_len, a.walks)?;
    let mut store = open_store(&kg, a.paths.as_deref(), walk, a.seed, &relations)?;
    let ds_config = DatasetConfig {
        negatives_per_positive: a.negatives,
        ..DatasetConfig::default()
    };
    let mut dataset = build_dataset(
        &kg,
        &relations,
        &labeled,
        ds_config,
        &mut store,
        &mut derive_rng(a.seed, "dataset", 0),
    )?;
    if a.fraction < 1.0 {
        dataset = subsample(&dataset, a.fraction, &mut derive_rng(a.seed, "subsample", 0));
    }
    for &r in &dataset.stats.relations_without_positives {
        eprintln!("warning: no usable positives for `{}`", kg.relation_name(r));
    }

    let model = ModelConfig::preset(&a.model, a.dim_relation, a.dim_hidden, a.dim_entity)?;
    let shape = ModelShape {
        relations: kg.num_relations(),
        query_relations: relations.len(),
        types: kg.num_types(),
        entities: kg.num_entities(),
    };
    let init = ModelParams::init(model, shape, &mut derive_rng(a.seed, "init", 0))?;
    let config = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch,
        pooling: a.pool,
        seed: a.seed,
        adam: AdamConfig {
            learning_rate: a.lr,
            ..AdamConfig::default()
        },
        mtl_types: a.mtl_types,
        mtl_weight: a.mtl_weight,
        max_steps: None,
    };
    let outcome = match train(&kg, &dataset, init, &config) {
        Ok(o) => o,
        Err(TrainError::NonFinite { step, last_good }) => {
            let path = sibling(&a.out, "last-good");
            let ck = Checkpoint::new(&kg, &relations, Some(a.pool), *last_good);
            write_file(&path, &ck.to_bytes())?;
            bail!(
                "non-finite loss at step {step}; parameters before that step saved to {}",
                path.display()
            );
        }
        Err(e) => return Err(e.into()),
    };

    let ck = Checkpoint::new(&kg, &relations, Some(a.pool), outcome.params);
    write_file(&a.out, &ck.to_bytes())?;
    let mut csv = String::from("step,mean_loss\n");
    for (i, l) in outcome.trace.iter().enumerate() {
        csv.push_str(&format!("{},{l}\n", i + 1));
    }
    let trace = a.trace.clone().unwrap_or_else(|| sibling(&a.out, "loss.csv"));
    write_file(&trace, csv.as_bytes())?;
    let names: Vec<&str> = relations.iter().map(|&r| kg.relation_name(r)).collect();
    write_json(
        &sibling(&a.out, "config.json"),
        &echo(
            command,
            json!({
                "query_relations": names,
                "model": model,
                "train": config,
                "walk": walk,
                "dataset": dataset.stats,
                "steps": outcome.steps,
                "final_epoch_loss": outcome.epoch_losses.last(),
            }),
        ),
    )?;
    eprintln!(
        "train: {} instances, {} steps, last epoch loss {:.5}",
        dataset.len(),
        outcome.steps,
        outcome.epoch_losses.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn eval_cmd(command: &Command, a: &EvalArgs) -> Result<()> {
    let bytes = std::fs::read(&a.ckpt).with_context(|| format!("reading {}", a.ckpt.display()))?;
    let ck = Checkpoint::from_bytes(&bytes).with_context(|| a.ckpt.display().to_string())?;
    let (kg, _, _) = formats::load_graph(&a.kg, a.types.as_deref())?;
    let relations = ck.bind(&kg)?;
    if relations.is_empty() {
        bail!("checkpoint has no query relations (path-query models are scored by `pathquery`)");
    }
    let pooling = a
        .pool
        .or(ck.header.pooling)
        .ok_or_else(|| anyhow!("no pooling recorded in the checkpoint; pass --pool"))?;
    let labeled = formats::parse_labeled(&kg, &a.test, &formats::read_file(&a.test)?)?;
    let walk = walk_config(a.max_len, a.walks)?;
    let mut store = open_store(&kg, a.paths.as_deref(), walk, a.seed, &relations)?;
    let report = evaluate(&ck.params, &kg, &relations, &labeled, &mut store, pooling)?;
    let config = echo(command, json!({ "pooling": pooling, "walk": walk, "model": ck.header.model }));
    let summary = EvalSummary::new(&kg, &report, pooling, config.clone());
    write_json(&a.report, &summary)?;
    write_json(&sibling(&a.report, "config.json"), &config)?;
    match report.map {
        Some(m) => eprintln!("eval: MAP {m:.4} over {} relations", report.relations.len()),
        None => eprintln!("eval: no relation had a positive triple"),
    }
    Ok(())
}

fn pathquery(command: &Command, a: &PathQueryArgs) -> Result<()> {
    let (kg, _, _) = formats::load_graph(&a.kg, None)?;
    let read = |p: &PathBuf| -> Result<_> { Ok(formats::parse_queries(&kg, p, &formats::read_file(p)?)?) };
    let sampled = if a.train.is_none() || a.test.is_none() {
        if a.min_len == 0 || a.min_len > a.max_len || a.max_len > MAX_PATH_LEN {
            bail!("query lengths must satisfy 1 <= --min-len <= --max-len <= {MAX_PATH_LEN}");
        }
        sample_queries(&kg, a.sample, a.min_len, a.max_len, &mut derive_rng(a.seed, "queries", 0))
    } else {
        Vec::new()
    };
    let cut = if a.test.is_none() { a.holdout.min(sampled.len()) } else { 0 };
    let (held, rest) = sampled.split_at(cut);
    let test = match &a.test {
        Some(p) => read(p)?,
        None => held.to_vec(),
    };
    let train_q = match &a.train {
        Some(p) => read(p)?,
        None => {
            let mut q = edge_queries(&kg);
            q.extend_from_slice(rest);
            q
        }
    };
    if test.is_empty() {
        bail!("no test queries");
    }

    let config = PathQueryConfig {
        variant: a.variant,
        dim: a.dim,
        epochs: a.epochs,
        batch_size: a.batch,
        seed: a.seed,
        adam: AdamConfig {
            learning_rate: a.lr,
            ..AdamConfig::default()
        },
    };
    let init = init_model(&kg, a.dim, &mut derive_rng(a.seed, "init", 0))?;
    let control = evaluate_mq(&init, &kg, &test, a.variant)?;
    let outcome = train_pathquery(&kg, &train_q, init, &config)?;
    let mq = evaluate_mq(&outcome.params, &kg, &test, a.variant)?;
    if let Some(out) = &a.out {
        write_file(out, &Checkpoint::new(&kg, &[], None, outcome.params).to_bytes())?;
    }
    let config_echo = echo(command, json!({ "pathquery": config }));
    let summary = PathQuerySummary {
        variant: a.variant.to_string(),
        mq,
        control_mq: control,
        train_queries: train_q.len(),
        test_queries: test.len(),
        final_loss: outcome.trace.last().copied(),
        config: config_echo.clone(),
    };
    write_json(&a.report, &summary)?;
    write_json(&sibling(&a.report, "config.json"), &config_echo)?;
    eprintln!(
        "pathquery: MQ {:.4} (random-parameter control {:.4}) on {} queries",
        mq.unwrap_or(f64::NAN),
        control.unwrap_or(f64::NAN),
        test.len()
    );
    Ok(())
}
