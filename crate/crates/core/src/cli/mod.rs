//! The `streetsense` command line.
//!
//! Each subcommand reads its inputs, writes artifacts under `--out-dir`
//! and finishes with `<command>.manifest.json` listing the config
//! snapshot, seed and content hashes of everything read and written. If a
//! command fails, the files it created are removed.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

mod commands;
pub mod config;
pub mod formats;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::baselines::BaselineKind;
use crate::error::{Error, ErrorClass, Result};

pub use config::{ClusterSpace, RunConfig};
pub use manifest::{RunContext, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "streetsense", version, about = "Street-view perception scoring from votes and captions")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON run configuration. Flags override its values, which override the defaults.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Global seed; every module derives its own seed from it [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel steps [default: all cores]
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for artifacts and the run manifest
    #[arg(long, global = true, default_value = "out", value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic street corpus: votes, captions, captioner pairs and a migration set
    Synth(SynthArgs),
    /// Validate votes and captions and summarize what joins
    Ingest(IngestArgs),
    /// Turn pairwise votes into per-image Q-scores
    Score(ScoreArgs),
    /// Train the LSTM caption decoder on (feature, caption) pairs
    TrainCaptioner(TrainCaptionerArgs),
    /// Greedy-decode captions for image features
    Caption(CaptionArgs),
    /// Split the scored corpus and train the perception model
    Train(TrainArgs),
    /// Predict Q-scores for caption documents
    Predict(PredictArgs),
    /// Sentence embeddings from a model or from imported hidden states
    Embed(EmbedArgs),
    /// t-SNE layout and HDBSCAN clusters of sentence embeddings
    Cluster(ClusterArgs),
    /// LDA topics over captions, with summary grid and correlations
    Topics(TopicsArgs),
    /// Fit tree baselines on sentence-embedding features and predict the test split
    Baseline(BaselineArgs),
    /// Score prediction files against Q-scores and compare them
    Eval(EvalArgs),
    /// Compare model predictions with manual ratings at new locations
    Migrate(MigrateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Ingest(_) => "ingest",
            Command::Score(_) => "score",
            Command::TrainCaptioner(_) => "train-captioner",
            Command::Caption(_) => "caption",
            Command::Train(_) => "train",
            Command::Predict(_) => "predict",
            Command::Embed(_) => "embed",
            Command::Cluster(_) => "cluster",
            Command::Topics(_) => "topics",
            Command::Baseline(_) => "baseline",
            Command::Eval(_) => "eval",
            Command::Migrate(_) => "migrate",
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Images in the street corpus
    #[arg(long, default_value_t = 300)]
    pub images: usize,
    /// Votes per image and dimension
    #[arg(long, default_value_t = 30)]
    pub votes_per_image: usize,
    /// Locations in the migration set
    #[arg(long, default_value_t = 71)]
    pub locations: usize,
    /// Raters per migration location
    #[arg(long, default_value_t = 15)]
    pub raters: u32,
    /// Standard deviation of one rater's noise on the 1 to 7 scale
    #[arg(long, default_value_t = 0.8)]
    pub rating_noise: f64,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long, value_name = "CSV")]
    pub votes: PathBuf,
    #[arg(long, value_name = "JSONL")]
    pub captions: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long, value_name = "CSV")]
    pub votes: PathBuf,
    /// Output file [default: <out-dir>/scores.csv]
    #[arg(long, value_name = "CSV")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainCaptionerArgs {
    /// JSONL of {"feature": [...], "caption": "..."}
    #[arg(long, value_name = "JSONL")]
    pub pairs: PathBuf,
    /// Full-batch epochs [default: 300]
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CaptionArgs {
    /// Captioner manifest; weights are read from the same path with a .pmte extension
    #[arg(long, value_name = "JSON")]
    pub model: PathBuf,
    /// JSONL of {"image_id": ..., "feature": [...]}
    #[arg(long, value_name = "JSONL")]
    pub features: PathBuf,
    /// Longest caption in tokens [default: 16]
    #[arg(long)]
    pub max_len: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_name = "CSV")]
    pub scores: PathBuf,
    #[arg(long, value_name = "JSONL")]
    pub captions: PathBuf,
    /// [default: 20]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// [default: 2e-5]
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// [default: 32]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Fraction of images held out for testing [default: 0.1]
    #[arg(long)]
    pub test_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model manifest; weights are read from the same path with a .pmte extension
    #[arg(long, value_name = "JSON")]
    pub model: PathBuf,
    #[arg(long, value_name = "JSONL")]
    pub captions: PathBuf,
    /// Predict only the test images of this split
    #[arg(long, value_name = "JSON")]
    pub split: Option<PathBuf>,
    /// Output file [default: <out-dir>/predictions.csv]
    #[arg(long, value_name = "CSV")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// Model manifest, used together with --captions
    #[arg(long, value_name = "JSON", requires = "captions", conflicts_with = "hidden")]
    pub model: Option<PathBuf>,
    #[arg(long, value_name = "JSONL")]
    pub captions: Option<PathBuf>,
    /// PMTE container of externally computed hidden states
    #[arg(long, value_name = "PMTE", required_unless_present = "model")]
    pub hidden: Option<PathBuf>,
    /// Sidecar index for --hidden [default: container path with .jsonl]
    #[arg(long, value_name = "JSONL", requires = "hidden")]
    pub index: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long, value_name = "CSV")]
    pub embeddings: PathBuf,
    /// Cluster the t-SNE layout or the raw embeddings [default: tsne]
    #[arg(long, value_enum)]
    pub space: Option<ClusterSpace>,
    /// [default: 30]
    #[arg(long)]
    pub perplexity: Option<f64>,
    /// [default: 1000]
    #[arg(long)]
    pub iterations: Option<usize>,
    /// [default: 15]
    #[arg(long)]
    pub min_cluster_size: Option<usize>,
    /// [default: 10]
    #[arg(long)]
    pub min_samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TopicsArgs {
    #[arg(long, value_name = "JSONL")]
    pub captions: PathBuf,
    /// Q-scores for the topic/perception correlation
    #[arg(long, value_name = "CSV")]
    pub scores: Option<PathBuf>,
    /// Number of topics [default: 9]
    #[arg(long)]
    pub topics: Option<usize>,
    /// Take the number of topics from the cluster count of a scene CSV
    #[arg(long, value_name = "CSV", conflicts_with = "topics")]
    pub clusters: Option<PathBuf>,
    /// Gibbs sweeps [default: 1000]
    #[arg(long)]
    pub iterations: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long, value_name = "CSV")]
    pub scores: PathBuf,
    #[arg(long, value_name = "JSONL")]
    pub captions: PathBuf,
    /// Split written by `train`
    #[arg(long, value_name = "JSON")]
    pub split: PathBuf,
    /// Model whose sentence embeddings are the features [default: an untrained encoder]
    #[arg(long, value_name = "JSON")]
    pub model: Option<PathBuf>,
    /// decision_tree, random_forest or gbdt [default: all three]
    #[arg(long)]
    pub kind: Option<BaselineKind>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "CSV")]
    pub scores: PathBuf,
    /// Named predictions, NAME=FILE; repeat for each model
    #[arg(long = "predictions", value_name = "NAME=CSV", required = true)]
    pub predictions: Vec<String>,
    /// Restrict targets to the test images of this split
    #[arg(long, value_name = "JSON")]
    pub split: Option<PathBuf>,
    /// Model whose MSE improvement over the others is reported
    #[arg(long)]
    pub reference: Option<String>,
}

#[derive(Debug, Args)]
pub struct MigrateArgs {
    #[arg(long, value_name = "JSON")]
    pub model: PathBuf,
    /// JSONL migration set with a rating-scale header line
    #[arg(long, value_name = "JSONL")]
    pub set: PathBuf,
}

fn resolve_config(global: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = global.seed {
        cfg.seed = s;
    }
    if let Some(t) = global.threads {
        cfg.threads = Some(t);
    }
    cfg.fan_out_seeds();
    Ok(cfg)
}

/// Parse, run, and report; returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ErrorClass::Usage.exit_code() } else { 0 };
        }
    };
    let recorded: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(cli, recorded) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.class().exit_code()
        }
    }
}

pub fn execute(cli: Cli, args: Vec<String>) -> Result<()> {
    let mut cfg = resolve_config(&cli.global)?;
    commands::apply_overrides(&cli.command, &mut cfg);
    cfg.validate()?;
    if let Some(n) = cfg.threads {
        // A pool can only be installed once per process; a second call keeps the first.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut ctx = RunContext::new(cli.command.name(), args, cfg, cli.global.out_dir.clone())?;
    match commands::dispatch(&mut ctx, &cli.command) {
        Ok(()) => {
            ctx.finish()?;
            Ok(())
        }
        Err(e) => {
            ctx.abort();
            Err(e)
        }
    }
}

impl From<clap::Error> for Error {
    fn from(e: clap::Error) -> Self {
        Error::Usage(e.to_string())
    }
}
