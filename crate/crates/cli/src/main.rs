//! `susing`: prepare a toy corpus, train, synthesize, evaluate and
//! gradient-check from the command line.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] susing_core::Error),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) | CliError::Failed(_) => 2,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "susing",
    version,
    about = "Stripe-pooling U-net singing voice synthesis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate the seeded toy corpus and cache its spectra.
    Prepare(PrepareArgs),
    /// Teacher-forced training on a prepared corpus.
    Train(TrainArgs),
    /// Synthesize a score, or every test utterance of a corpus, to WAV.
    Synth(SynthArgs),
    /// Compare synthesized test utterances against the corpus audio.
    Eval(EvalArgs),
    /// Finite-difference check of every differentiable operator.
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Debug)]
pub struct PrepareArgs {
    /// Corpus directory to create.
    #[arg(long, visible_alias = "corpus")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overwrite a non-empty directory.
    #[arg(long)]
    pub force: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Run directory for checkpoints and the loss log.
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
    /// Resume from this checkpoint.
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub segment_frames: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    /// Drop the stripe-pooling modules.
    #[arg(long)]
    pub ablate_stripe: bool,
    /// Drop the U-net skip connections.
    #[arg(long)]
    pub ablate_skips: bool,
    /// Start over in a run directory that already holds a model.
    #[arg(long)]
    pub force: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Output WAV, or a directory when synthesizing a corpus.
    #[arg(long)]
    pub out: PathBuf,
    /// Note label file.
    #[arg(long, requires = "phones", conflicts_with = "corpus")]
    pub score: Option<PathBuf>,
    /// Phoneme label file.
    #[arg(long, requires = "score")]
    pub phones: Option<PathBuf>,
    /// Synthesize every test utterance of this corpus.
    #[arg(long, required_unless_present = "score")]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub gl_iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Directory holding `<utt>.wav` for every test utterance; the report
    /// and mel matrices are written here.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 3)]
    pub seed: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
