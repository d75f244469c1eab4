//! The `svs` command line: fit-embedding → build-corpus → tessellate →
//! evaluate, plus predictor training and synthetic data generation.
//!
//! Exit codes: 0 success, 2 usage error, 3 data or format error, 4 numeric
//! failure. Errors go to standard error as one JSON line.

mod commands;
mod config;
mod formats;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

pub use config::{load_config, ConfigError, RunConfig, RUN_CONFIG_VERSION};
pub use formats::*;

use crate::corpus::Task;
use crate::error::Error;
use crate::predictor::BatchPolicy;
use crate::synth::SynthKind;
use crate::tessellate::Mode;
use crate::transfer::{ApInterpolation, CentroidWindow};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// Parses values through their serde names, so flags and config files
/// accept the same spellings.
fn parse_name<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(Value::String(s.to_owned())).map_err(|e| e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "svs",
    about = "Semantic transfer by tessellation in a joint semantics-video space",
    disable_version_flag = true
)]
struct Cli {
    /// Print the tool and file-format versions as JSON and exit.
    #[arg(long)]
    version: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit PCA/CCA on reference clips and save the embedding.
    FitEmbedding(FitEmbeddingArgs),
    /// Embed reference clips into a corpus file.
    BuildCorpus(BuildCorpusArgs),
    /// Assign reference clips to every query clip.
    Tessellate(TessellateArgs),
    /// Train the LSTM semantics predictor on a corpus.
    TrainPredictor(TrainPredictorArgs),
    /// Score tessellation output against ground truth.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic corpus with known hidden states.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// JSON run config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FitEmbeddingArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Reference clip manifest (JSON lines).
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_parser = parse_name::<Task>)]
    task: Option<Task>,
    #[arg(long)]
    pca_dim: Option<usize>,
    #[arg(long)]
    svs_dim: Option<usize>,
    #[arg(long)]
    lambda_scale: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BuildCorpusArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    embedding: PathBuf,
    #[arg(long, value_parser = parse_name::<Task>)]
    task: Option<Task>,
    #[arg(long)]
    out: PathBuf,
}

/// A built corpus file, or a manifest together with an embedding and task.
#[derive(Debug, Args)]
struct CorpusArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Embedding model; required when `--corpus` is a manifest.
    #[arg(long)]
    embedding: Option<PathBuf>,
    #[arg(long, value_parser = parse_name::<Task>)]
    task: Option<Task>,
}

#[derive(Debug, Args)]
struct TessellateArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long, value_parser = parse_name::<Mode>)]
    mode: Option<Mode>,
    /// Query clip manifest.
    #[arg(long)]
    query: PathBuf,
    /// Nearest-neighbour candidates per clip (r′).
    #[arg(long)]
    topk: Option<usize>,
    #[arg(long)]
    rel_threshold: Option<f64>,
    /// Trained predictor checkpoint, for `--mode supervised`.
    #[arg(long)]
    predictor: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainPredictorArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    clip_norm: Option<f64>,
    #[arg(long, value_parser = parse_name::<BatchPolicy>)]
    batch: Option<BatchPolicy>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long, value_parser = parse_name::<Task>)]
    task: Option<Task>,
    /// Output of `tessellate`.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    budget: Option<f64>,
    /// Comma-separated IoU thresholds.
    #[arg(long, value_delimiter = ',')]
    iou_thresholds: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_name::<ApInterpolation>)]
    ap_interpolation: Option<ApInterpolation>,
    #[arg(long)]
    min_len: Option<f64>,
    #[arg(long, value_parser = parse_name::<CentroidWindow>)]
    centroid_window: Option<CentroidWindow>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, value_parser = parse_name::<SynthKind>)]
    kind: SynthKind,
    /// JSON synthesis spec.
    #[arg(long)]
    spec: PathBuf,
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,
}

/// Failure of a subcommand, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Run(Error::NumericFailure { .. }) => EXIT_NUMERIC,
            CliError::Run(_) => EXIT_DATA,
        }
    }

    pub fn to_json(&self) -> Value {
        let mut v = match self {
            CliError::Usage(m) => json!({ "error": "usage", "message": m }),
            CliError::Run(e) => json!({ "error": e.kind(), "message": e.to_string() }),
        };
        if let CliError::Run(e) = self {
            match e {
                Error::Io { path, .. } => v["path"] = json!(path.display().to_string()),
                Error::Format { path, offset, .. } => {
                    v["path"] = json!(path);
                    v["offset"] = json!(offset);
                }
                Error::Json { path, .. } => v["path"] = json!(path),
                Error::NumericFailure {
                    condition_number: Some(c),
                    ..
                } => v["condition_number"] = json!(c),
                _ => {}
            }
        }
        v["exit_code"] = json!(self.exit_code());
        v
    }
}

/// Tool and file-format versions, as printed by `--version`.
pub fn version_info() -> Value {
    json!({
        "name": "svs",
        "version": env!("CARGO_PKG_VERSION"),
        "formats": {
            "feature_matrix": crate::matrix::FMAT_VERSION,
            "container": crate::embedding::container::CONTAINER_VERSION,
            "embedding": crate::embedding::EMBEDDING_FORMAT_VERSION,
            "manifest": crate::corpus::MANIFEST_VERSION,
            "corpus": crate::corpus::CORPUS_FORMAT_VERSION,
            "predictor": crate::predictor::PREDICTOR_FORMAT_VERSION,
            "run_config": RUN_CONFIG_VERSION,
            "output": OUTPUT_FORMAT_VERSION,
        }
    })
}

/// Runs one invocation and returns its exit code. The first element of
/// `args` is the program name.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            return report(&CliError::Usage(first_line(&e.to_string())));
        }
    };
    if cli.version {
        println!("{}", version_info());
        return 0;
    }
    let Some(command) = cli.command else {
        return report(&CliError::Usage("no subcommand given; see --help".into()));
    };
    let result = match command {
        Command::FitEmbedding(a) => commands::fit_embedding(a),
        Command::BuildCorpus(a) => commands::build_corpus(a),
        Command::Tessellate(a) => commands::tessellate(a),
        Command::TrainPredictor(a) => commands::train_predictor(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Synth(a) => commands::synth(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => report(&e),
    }
}

fn first_line(s: &str) -> String {
    s.lines()
        .find(|l| !l.trim().is_empty())
        .unwrap_or_default()
        .trim_start_matches("error: ")
        .to_owned()
}

fn report(e: &CliError) -> i32 {
    eprintln!("{}", e.to_json());
    e.exit_code()
}

/// Entry point for the binary.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .try_init()
        .ok();
    run(args)
}
