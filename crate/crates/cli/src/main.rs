//! `catm`: generate, quantize, train, infer, segment, patch and evaluate.
//!
//! Exit codes: 0 success, 2 usage, 3 bad input, 4 internal failure.

mod commands;
mod files;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use catm::CatmError;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "catm",
    version,
    about = "Causal topic model for unsupervised action segmentation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a synthetic corpus with ground truth.
    Gen(GenArgs),
    /// Clipify joint streams and compute skeleton features.
    Skelfeat(SkelfeatArgs),
    /// Quantize feature clips into a word corpus.
    Quantize(QuantizeArgs),
    /// Fit the model on a corpus.
    Train(TrainArgs),
    /// Infer assignments for new documents under a trained model.
    Infer(InferArgs),
    /// Merge assignments into action segments.
    Segment(SegmentArgs),
    /// Detect forgotten actions.
    Patch(PatchArgs),
    /// Score assignments (and patch decisions) against ground truth.
    Eval(EvalArgs),
}

#[derive(Args, Serialize)]
pub struct GenArgs {
    #[arg(long)]
    pub docs: usize,
    #[arg(long)]
    pub clips: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub seed: u64,
    /// Training corpus path; companion files share its stem.
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub human_words: usize,
    #[arg(long, default_value_t = 50)]
    pub object_words: usize,
    /// Symmetric Dirichlet concentration of the word distributions.
    #[arg(long, default_value_t = 0.01)]
    pub concentration: f64,
    #[arg(long, default_value_t = 0.05)]
    pub prior_variance: f64,
    /// Also write a held-out test corpus; every other test document has
    /// one interior segment removed.
    #[arg(long, default_value_t = 0)]
    pub test_docs: usize,
    /// Also write synthetic clip features for every document.
    #[arg(long)]
    pub features: bool,
}

#[derive(Args, Serialize)]
pub struct SkelfeatArgs {
    #[arg(long)]
    pub joints: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub clip_len: usize,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct QuantizeArgs {
    #[arg(long)]
    pub features: PathBuf,
    /// Existing human-word dictionary; built by k-means when absent.
    #[arg(long)]
    pub dict_h: Option<PathBuf>,
    /// Existing object-word dictionary; built by k-means when absent.
    #[arg(long)]
    pub dict_o: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    pub human_words: usize,
    #[arg(long, default_value_t = 500)]
    pub object_words: usize,
    /// Seeds k-means; required when a dictionary is built.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub p: usize,
    /// One of tm, ctm, tm-at, ctm-at, tm-rt, catm-a, catm-ao.
    #[arg(long, default_value = "catm-ao")]
    pub preset: String,
    #[arg(long, default_value_t = 200)]
    pub iters: usize,
    #[arg(long, default_value_t = 100)]
    pub burnin: usize,
    #[arg(long)]
    pub seed: u64,
    /// Output directory for checkpoint, assignments, trace and manifest.
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct InferArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub iters: usize,
    #[arg(long, default_value_t = 25)]
    pub burnin: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct SegmentArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub assignments: PathBuf,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct PatchArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub train_corpus: PathBuf,
    #[arg(long)]
    pub train_assignments: PathBuf,
    /// Query documents.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Inferred assignments of the query documents.
    #[arg(long)]
    pub assignments: PathBuf,
    /// Clip features of training and query documents; word-only mode
    /// without them.
    #[arg(long)]
    pub features: Vec<PathBuf>,
    /// Overrides the threshold learned from the training segments.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct EvalArgs {
    /// Documents with ground-truth labels.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub assignments: PathBuf,
    /// Number of action-topics; defaults to the largest assigned topic + 1.
    #[arg(long)]
    pub k: Option<usize>,
    /// Reuse a topic-to-class mapping instead of solving for one.
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    /// Patch report to score; needs --truth.
    #[arg(long, requires = "truth")]
    pub patch: Option<PathBuf>,
    /// Ground-truth file naming the forgotten action of each document.
    #[arg(long, requires = "patch")]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value_t = catm::eval::SEG_OVERLAP)]
    pub overlap: f64,
    /// Count frames globally instead of averaging per class.
    #[arg(long)]
    pub micro: bool,
    /// Metrics CSV; the mapping is written next to it.
    #[arg(short, long)]
    pub out: PathBuf,
}

/// A failure with its exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Input(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Input(_) => 3,
            Failure::Internal(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Input(m) | Failure::Internal(m) => m,
        }
    }
}

impl From<CatmError> for Failure {
    fn from(e: CatmError) -> Self {
        let msg = e.to_string();
        match e {
            CatmError::Config(_) => Failure::Usage(msg),
            CatmError::RejectionBudget { .. } | CatmError::Internal(_) => Failure::Internal(msg),
            _ => Failure::Input(msg),
        }
    }
}

pub type Outcome<T = ()> = Result<T, Failure>;

/// Creates the directory that will hold the command's output.
fn prepare_output(cmd: &Command) -> Outcome {
    let out = match cmd {
        Command::Gen(a) => &a.out,
        Command::Skelfeat(a) => &a.out,
        Command::Quantize(a) => &a.out,
        Command::Train(a) => &a.out,
        Command::Infer(a) => &a.out,
        Command::Segment(a) => &a.out,
        Command::Patch(a) => &a.out,
        Command::Eval(a) => &a.out,
    };
    match out.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir)
            .map_err(|e| Failure::Input(format!("cannot create {}: {e}", dir.display()))),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(f) = prepare_output(&cli.command) {
        eprintln!("catm: {}", f.message());
        return ExitCode::from(f.code());
    }
    let result = match cli.command {
        Command::Gen(a) => commands::gen(&a),
        Command::Skelfeat(a) => commands::skelfeat(&a),
        Command::Quantize(a) => commands::quantize(&a),
        Command::Train(a) => commands::train(&a),
        Command::Infer(a) => commands::infer(&a),
        Command::Segment(a) => commands::segment(&a),
        Command::Patch(a) => commands::patch(&a),
        Command::Eval(a) => commands::eval(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("catm: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
