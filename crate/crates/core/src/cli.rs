//! Command-line front end.
//!
//! Every subcommand also reads an optional TOML config file (`--config`).
//! Top-level keys apply to every subcommand, keys under a `[subcommand]`
//! table only to that one. Keys are long flag names; flags given on the
//! command line win.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cera::{self, gradcheck, TrainConfig, ValidationMetric, Variant};
use crate::corpus::{self, Cluster, SourceDocument};
use crate::error::{Error, Result};
use crate::rouge::{self, Aggregation, BatchItem};
use crate::selection::{self, SelectionConfig, SelectionMode, SelectionTrace};

/// Word budgets of the standard benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Dataset {
    MultiNews,
    Wcep10,
    Tac2008,
    Duc2004,
    Crosssum,
}

impl Dataset {
    pub fn budget(self) -> usize {
        match self {
            Dataset::MultiNews => 230,
            Dataset::Tac2008 | Dataset::Duc2004 | Dataset::Crosssum => 100,
            Dataset::Wcep10 => 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CentroidSource {
    MeanPool,
    Cera,
    Cerai,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    BaselineGreedy,
    BeamOnly,
    #[value(name = "beam+greedy", alias = "beam-greedy")]
    BeamGreedy,
}

impl From<ModeArg> for SelectionMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::BaselineGreedy => SelectionMode::BaselineGreedy,
            ModeArg::BeamOnly => SelectionMode::BeamOnly,
            ModeArg::BeamGreedy => SelectionMode::BeamGreedy,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "centrosum", version, about = "Centroid-based extractive multi-document summarization")]
#[command(args_override_self = true)]
pub struct Cli {
    /// TOML file with default flag values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for per-cluster work.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write one extractive summary per cluster.
    Summarize(SummarizeArgs),
    /// Summarize with the reference-summary centroid.
    Oracle(SummarizeArgs),
    /// Train the centroid regression model.
    Train(TrainArgs),
    /// Score summaries with ROUGE and bootstrap confidence intervals.
    Evaluate(EvaluateArgs),
    /// Build multi-document clusters from paired single-document data.
    AdaptCrosssum(AdaptArgs),
    /// Check analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SelectionArgs {
    /// Word budget. Defaults to the dataset's budget.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long, value_enum)]
    pub dataset: Option<Dataset>,
    #[arg(long, value_enum, default_value = "beam+greedy")]
    pub mode: ModeArg,
    /// Sentences kept from the head of each document.
    #[arg(short = 'n', long = "preselect", default_value_t = 9)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub beam: usize,
    /// Oversized candidates tolerated by the greedy pass.
    #[arg(long, default_value_t = 9)]
    pub window: usize,
}

impl SelectionArgs {
    pub fn budget(&self) -> Result<usize> {
        self.budget
            .or_else(|| self.dataset.map(Dataset::budget))
            .ok_or_else(|| Error::InvalidConfig("give --budget or --dataset".into()))
    }

    pub fn config(&self) -> Result<SelectionConfig> {
        let cfg = SelectionConfig {
            n: self.n,
            beam: self.beam,
            window: self.window,
            budget: self.budget()?,
            mode: self.mode.into(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SummarizeArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long, value_enum, default_value = "mean-pool")]
    pub source: CentroidSource,
    /// Required for the cera and cerai sources.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
    /// Optional JSON-lines selection trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub selection: SelectionArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train_corpus: PathBuf,
    #[arg(long)]
    pub train_embeddings: PathBuf,
    #[arg(long)]
    pub val_corpus: PathBuf,
    #[arg(long)]
    pub val_embeddings: PathBuf,
    /// Where the best checkpoint is written.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Tab-separated per-epoch log.
    #[arg(long)]
    pub history: PathBuf,
    #[arg(long, default_value = "cera")]
    pub variant: Variant,
    #[arg(long, default_value_t = 5e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 2)]
    pub batch_size: usize,
    /// Epochs between learning-rate decays.
    #[arg(long, default_value_t = 3)]
    pub step: usize,
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    #[arg(long, default_value_t = 30)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 3)]
    pub patience: usize,
    #[arg(long, default_value = "rouge2-recall")]
    pub val_metric: ValidationMetric,
    #[arg(long, default_value_t = cera::DEFAULT_POSITIONS)]
    pub positions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub selection: SelectionArgs,
}

impl TrainArgs {
    pub fn config(&self) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            lr: self.lr,
            batch_size: self.batch_size,
            schedule_step: self.step,
            gamma: self.gamma,
            max_epochs: self.max_epochs,
            patience: self.patience,
            variant: self.variant,
            validation: self.val_metric,
            selection: self.selection.config()?,
            n_positions: self.positions,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AggregationArg {
    Average,
    Best,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Summary file written by `summarize`.
    #[arg(long, requires = "corpus", conflicts_with = "batch")]
    pub summaries: Option<PathBuf>,
    /// Cluster metadata holding the references.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Tab-separated `cluster_id, candidate, references...` rows.
    #[arg(long)]
    pub batch: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "average")]
    pub aggregation: AggregationArg,
    #[arg(long, default_value_t = 1000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON report path; the table always goes to stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AdaptArgs {
    /// Two-column file of paired document ids.
    #[arg(long)]
    pub pairs: PathBuf,
    /// JSON-lines source documents with their summaries.
    #[arg(long)]
    pub documents: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub output_dir: PathBuf,
    /// Word limit of the interleaved references.
    #[arg(long, default_value_t = 100)]
    pub limit: usize,
    #[arg(long, value_delimiter = ',', default_value = "en,es,fr")]
    pub train_langs: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "pt,ru,tr")]
    pub zero_shot_langs: Vec<String>,
    #[arg(long, default_value_t = 0.1)]
    pub val_fraction: f64,
    #[arg(long, default_value_t = 0.1)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantChoice {
    Cera,
    Cerai,
    Both,
}

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 5)]
    pub instances: usize,
    #[arg(long, default_value_t = 6)]
    pub sentences: usize,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub eps: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "both")]
    pub variant: VariantChoice,
    /// Negative control: corrupt one analytic gradient.
    #[arg(long, hide = true)]
    pub corrupt: bool,
}

/// One line of summarize output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub cluster_id: String,
    /// Global sentence indices of the preprocessed cluster, in source order.
    pub chosen: Vec<usize>,
    /// (doc_index, pos_in_doc) of each chosen sentence.
    pub positions: Vec<(usize, usize)>,
    pub text: String,
    pub words: usize,
    pub score: f64,
}

fn write_lines<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in rows {
        let line = serde_json::to_string(&r).expect("record serializes");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn preprocess_all(clusters: &[Cluster], budget: usize) -> Result<Vec<Cluster>> {
    clusters
        .par_iter()
        .map(|c| corpus::preprocess_cluster(c, budget))
        .collect()
}

pub fn cmd_summarize(args: &SummarizeArgs) -> Result<Vec<SummaryRecord>> {
    let config = args.selection.config()?;
    let clusters = corpus::load_split(&args.corpus, &args.embeddings)?;
    let clusters = preprocess_all(&clusters, config.budget)?;
    let model = match args.source {
        CentroidSource::Cera | CentroidSource::Cerai => {
            let path = args.checkpoint.as_ref().ok_or_else(|| {
                Error::InvalidConfig("--checkpoint is required for model centroids".into())
            })?;
            let variant = if args.source == CentroidSource::Cera {
                Variant::Cera
            } else {
                Variant::Cerai
            };
            let dim = clusters.iter().find_map(Cluster::dim).unwrap_or(0);
            Some(cera::load_checkpoint(path)?.expect(variant, dim)?)
        }
        _ => None,
    };

    let results = clusters
        .par_iter()
        .map(|c| {
            let centroid = match args.source {
                CentroidSource::MeanPool => corpus::mean_pool_cluster(c)?,
                CentroidSource::Oracle => corpus::cluster_gold_centroid(c)?,
                CentroidSource::Cera | CentroidSource::Cerai => {
                    cera::predict_centroid(c, model.as_ref().expect("model loaded"))?
                }
            };
            let (state, trace) = if args.trace.is_some() {
                let (s, t) = selection::select_summary_traced(c, &centroid, &config)?;
                (s, Some(t))
            } else {
                (selection::select_summary(c, &centroid, &config)?, None)
            };
            Ok((summary_record(c, &state), trace))
        })
        .collect::<Result<Vec<(SummaryRecord, Option<SelectionTrace>)>>>()?;

    let (records, traces): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    write_lines(&args.output, &records)?;
    if let Some(path) = &args.trace {
        #[derive(Serialize)]
        struct TraceLine<'a> {
            cluster_id: &'a str,
            #[serde(flatten)]
            trace: &'a SelectionTrace,
        }
        write_lines(
            path,
            records.iter().zip(&traces).map(|(r, t)| TraceLine {
                cluster_id: &r.cluster_id,
                trace: t.as_ref().expect("traced"),
            }),
        )?;
    }
    Ok(records)
}

pub fn summary_record(cluster: &Cluster, state: &selection::SummaryState) -> SummaryRecord {
    let sentences: Vec<&corpus::Sentence> = cluster.sentences().collect();
    let chosen = state.source_order();
    SummaryRecord {
        cluster_id: cluster.id.clone(),
        positions: chosen
            .iter()
            .map(|&i| (sentences[i].doc_index, sentences[i].pos_in_doc))
            .collect(),
        text: selection::render(cluster, state),
        words: state.words,
        score: state.score,
        chosen,
    }
}

#[derive(Debug, Serialize)]
struct CheckpointMeta<'a> {
    variant: &'a str,
    best_epoch: usize,
    best_metric: f64,
    validation: ValidationMetric,
    lr: f64,
    batch_size: usize,
    step: usize,
    gamma: f64,
    seed: u64,
}

pub fn cmd_train(args: &TrainArgs) -> Result<cera::TrainOutcome> {
    let config = args.config()?;
    let budget = config.selection.budget;
    let train = preprocess_all(
        &corpus::load_split(&args.train_corpus, &args.train_embeddings)?,
        budget,
    )?;
    let val = preprocess_all(
        &corpus::load_split(&args.val_corpus, &args.val_embeddings)?,
        budget,
    )?;
    let outcome = cera::train(&train, &val, &config)?;
    let meta = CheckpointMeta {
        variant: config.variant.name(),
        best_epoch: outcome.best_epoch,
        best_metric: outcome.best_metric,
        validation: config.validation,
        lr: config.lr,
        batch_size: config.batch_size,
        step: config.schedule_step,
        gamma: config.gamma,
        seed: config.seed,
    };
    let meta = serde_json::to_string(&meta).expect("meta serializes");
    cera::save_checkpoint(&args.checkpoint, &outcome.params, &meta)?;
    cera::write_history(&args.history, &outcome.history)?;
    Ok(outcome)
}

fn aggregation(a: AggregationArg) -> Aggregation {
    match a {
        AggregationArg::Average => Aggregation::Average,
        AggregationArg::Best => Aggregation::Best,
    }
}

/// Pairs summaries with corpus references by cluster id. Both sides must
/// cover the same ids.
pub fn pair_with_references(
    summaries: &[SummaryRecord],
    records: &[corpus::MetadataRecord],
) -> Result<Vec<BatchItem>> {
    let refs: HashMap<&str, Vec<String>> = records
        .iter()
        .map(|r| {
            let texts = r
                .references
                .iter()
                .map(|sents| {
                    sents
                        .iter()
                        .map(|s| s.text.as_str())
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect();
            (r.id.as_str(), texts)
        })
        .collect();
    let summary_ids: HashSet<&str> = summaries.iter().map(|s| s.cluster_id.as_str()).collect();
    let mut missing: Vec<&str> = refs
        .keys()
        .copied()
        .filter(|id| !summary_ids.contains(id))
        .collect();
    missing.extend(
        summaries
            .iter()
            .map(|s| s.cluster_id.as_str())
            .filter(|id| !refs.contains_key(id)),
    );
    if !missing.is_empty() {
        missing.sort_unstable();
        return Err(Error::IdMismatch(format!(
            "clusters present on one side only: {}",
            missing.join(", ")
        )));
    }
    summaries
        .iter()
        .map(|s| {
            let references = refs[s.cluster_id.as_str()].clone();
            if references.is_empty() {
                return Err(Error::MissingReference(s.cluster_id.clone()));
            }
            Ok(BatchItem {
                cluster_id: s.cluster_id.clone(),
                candidate: s.text.clone(),
                references,
            })
        })
        .collect()
}

pub fn read_summaries(path: &Path) -> Result<Vec<SummaryRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::MalformedLine {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<rouge::EvaluationReport> {
    let items = match (&args.batch, &args.summaries, &args.corpus) {
        (Some(batch), None, _) => rouge::read_batch(batch)?,
        (None, Some(summaries), Some(corpus)) => {
            pair_with_references(&read_summaries(summaries)?, &corpus::read_metadata(corpus)?)?
        }
        _ => {
            return Err(Error::InvalidConfig(
                "give either --batch, or --summaries with --corpus".into(),
            ))
        }
    };
    if items.is_empty() {
        return Err(Error::EmptyInput("nothing to evaluate"));
    }
    let report = rouge::evaluate_batch(
        &items,
        aggregation(args.aggregation),
        args.iterations,
        args.confidence,
        args.seed,
    )?;
    if let Some(path) = &args.output {
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        std::fs::write(path, json).map_err(|e| Error::io(path, e))?;
    }
    Ok(report)
}

/// Cluster counts per written split.
pub type SplitCounts = BTreeMap<String, usize>;

pub fn cmd_adapt_crosssum(args: &AdaptArgs) -> Result<SplitCounts> {
    if args.limit == 0 {
        return Err(Error::InvalidConfig("--limit must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&(args.val_fraction + args.test_fraction))
        || args.val_fraction < 0.0
        || args.test_fraction < 0.0
    {
        return Err(Error::InvalidConfig("split fractions must lie in [0, 1]".into()));
    }
    let pairs = corpus::read_pairings(&args.pairs)?;
    let docs = SourceDocument::load_all(&args.documents, &args.embeddings)?;
    let known: HashSet<&str> = docs.iter().map(|d| d.id.as_str()).collect();
    if let Some((a, b)) = pairs
        .iter()
        .find(|(a, b)| !known.contains(a.as_str()) || !known.contains(b.as_str()))
    {
        let bad = if known.contains(a.as_str()) { b } else { a };
        return Err(Error::UnknownDocument(bad.clone()));
    }

    let in_group = |langs: &[String], d: &SourceDocument| match &d.language {
        Some(l) => langs.iter().any(|x| x == l),
        None => false,
    };
    let group_clusters = |langs: &[String], include_untagged: bool| -> Result<Vec<Cluster>> {
        let members: Vec<SourceDocument> = docs
            .iter()
            .filter(|d| in_group(langs, d) || (include_untagged && d.language.is_none()))
            .cloned()
            .collect();
        let ids: HashSet<&str> = members.iter().map(|d| d.id.as_str()).collect();
        let group_pairs: Vec<(String, String)> = pairs
            .iter()
            .filter(|(a, b)| ids.contains(a.as_str()) && ids.contains(b.as_str()))
            .cloned()
            .collect();
        corpus::build_crosssum_clusters(&group_pairs, &members, args.limit)
    };

    let main = group_clusters(&args.train_langs, true)?;
    let zero_shot = group_clusters(&args.zero_shot_langs, false)?;

    let mut order: Vec<usize> = (0..main.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(args.seed));
    let n_val = (main.len() as f64 * args.val_fraction).round() as usize;
    let n_test = ((main.len() as f64 * args.test_fraction).round() as usize).min(main.len() - n_val);
    let mut split_of = vec!["train"; main.len()];
    for &i in &order[..n_val] {
        split_of[i] = "val";
    }
    for &i in &order[n_val..n_val + n_test] {
        split_of[i] = "test";
    }

    std::fs::create_dir_all(&args.output_dir).map_err(|e| Error::io(&args.output_dir, e))?;
    let mut counts = SplitCounts::new();
    for split in ["train", "val", "test"] {
        let clusters: Vec<Cluster> = main
            .iter()
            .zip(&split_of)
            .filter(|(_, s)| **s == split)
            .map(|(c, _)| c.clone())
            .collect();
        write_split(&args.output_dir, split, &clusters)?;
        counts.insert(split.to_string(), clusters.len());
    }
    write_split(&args.output_dir, "test-zs", &zero_shot)?;
    counts.insert("test-zs".to_string(), zero_shot.len());
    Ok(counts)
}

fn write_split(dir: &Path, name: &str, clusters: &[Cluster]) -> Result<()> {
    corpus::save_split(
        clusters,
        dir.join(format!("{name}.jsonl")),
        dir.join(format!("{name}.cemb")),
    )
}

pub fn cmd_gradcheck(args: &GradcheckArgs) -> Result<gradcheck::GradcheckReport> {
    let variants = match args.variant {
        VariantChoice::Cera => vec![Variant::Cera],
        VariantChoice::Cerai => vec![Variant::Cerai],
        VariantChoice::Both => vec![Variant::Cera, Variant::Cerai],
    };
    gradcheck::run_gradcheck(&gradcheck::GradcheckConfig {
        instances: args.instances,
        sentences: args.sentences.max(1),
        dim: args.dim.max(2),
        eps: args.eps,
        tolerance: args.tolerance,
        seed: args.seed,
        variants,
        corrupt: args.corrupt,
    })
}

const SUBCOMMANDS: [&str; 6] = [
    "summarize",
    "oracle",
    "train",
    "evaluate",
    "adapt-crosssum",
    "gradcheck",
];

fn toml_to_args(table: &toml::Table, out: &mut Vec<OsString>) -> Result<()> {
    for (key, value) in table {
        let flag = format!("--{key}");
        match value {
            toml::Value::Boolean(true) => out.push(flag.into()),
            toml::Value::Boolean(false) | toml::Value::Table(_) => {}
            toml::Value::String(s) => out.extend([flag.into(), s.into()]),
            toml::Value::Integer(i) => out.extend([flag.into(), i.to_string().into()]),
            toml::Value::Float(f) => out.extend([flag.into(), f.to_string().into()]),
            toml::Value::Array(items) => {
                let joined = items
                    .iter()
                    .map(|v| match v {
                        toml::Value::String(s) => Ok(s.clone()),
                        toml::Value::Integer(i) => Ok(i.to_string()),
                        toml::Value::Float(f) => Ok(f.to_string()),
                        _ => Err(Error::InvalidConfig(format!("unsupported value for {key}"))),
                    })
                    .collect::<Result<Vec<_>>>()?
                    .join(",");
                out.extend([flag.into(), joined.into()]);
            }
            toml::Value::Datetime(_) => {
                return Err(Error::InvalidConfig(format!("unsupported value for {key}")))
            }
        }
    }
    Ok(())
}

/// Splices config-file values in front of the command-line flags so the
/// latter override them.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let strs: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let config_path = strs.iter().enumerate().find_map(|(i, a)| {
        if a == "--config" {
            strs.get(i + 1).cloned()
        } else {
            a.strip_prefix("--config=").map(str::to_string)
        }
    });
    let Some(config_path) = config_path else {
        return Ok(args);
    };
    let Some(sub_at) = strs.iter().position(|a| SUBCOMMANDS.contains(&a.as_str())) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&config_path).map_err(|e| Error::io(&config_path, e))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| Error::InvalidConfig(format!("{config_path}: {e}")))?;
    let mut injected = Vec::new();
    toml_to_args(&table, &mut injected)?;
    if let Some(toml::Value::Table(section)) = table.get(&strs[sub_at]) {
        toml_to_args(section, &mut injected)?;
    }
    let mut out = args[..=sub_at].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[sub_at + 1..]);
    Ok(out)
}

/// Runs the CLI and returns the process exit code.
pub fn run(args: Vec<OsString>) -> i32 {
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.kind().exit_code();
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.max(1))
        .build_global()
    {
        log::debug!("thread pool already initialized: {e}");
    }
    match dispatch(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.kind().exit_code()
        }
    }
}

fn dispatch(command: &Command) -> Result<i32> {
    match command {
        Command::Summarize(a) => {
            let records = cmd_summarize(a)?;
            eprintln!("wrote {} summaries to {}", records.len(), a.output.display());
        }
        Command::Oracle(a) => {
            let a = SummarizeArgs {
                source: CentroidSource::Oracle,
                ..a.clone()
            };
            let records = cmd_summarize(&a)?;
            eprintln!("wrote {} summaries to {}", records.len(), a.output.display());
        }
        Command::Train(a) => {
            let outcome = cmd_train(a)?;
            eprintln!(
                "best epoch {} (val {:.6}); checkpoint {}",
                outcome.best_epoch,
                outcome.best_metric,
                a.checkpoint.display()
            );
        }
        Command::Evaluate(a) => {
            let report = cmd_evaluate(a)?;
            print!("{}", report.table());
        }
        Command::AdaptCrosssum(a) => {
            for (split, n) in cmd_adapt_crosssum(a)? {
                println!("{split}\t{n}");
            }
        }
        Command::Gradcheck(a) => {
            let report = cmd_gradcheck(a)?;
            for c in &report.checks {
                println!(
                    "{}\t{}\t{:<12}\trel {:.3e}\tabs {:.3e}",
                    c.variant, c.instance, c.tensor, c.max_rel_error, c.max_abs_error
                );
            }
            let worst = report.worst().map_or(0.0, |w| w.max_rel_error);
            if report.passed() {
                println!("PASS max relative error {worst:.3e} < {:.1e}", report.tolerance);
            } else {
                println!("FAIL max relative error {worst:.3e} >= {:.1e}", report.tolerance);
                return Ok(crate::ErrorKind::Numeric.exit_code());
            }
        }
    }
    Ok(0)
}
