mod commands;
mod config;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;
use vfrtok::tadpc::ClusterParams;

/// Variable-frame-rate speech tokenizer.
#[derive(Debug, Parser)]
#[command(name = "vfrtok", version)]
pub struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true, env = "VFRTOK_CONFIG")]
    pub config: Option<PathBuf>,
    /// Worker threads for per-file work (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ClusterArgs {
    /// Expansion threshold.
    #[arg(long)]
    pub tau: Option<f32>,
    /// Peak-score penalty.
    #[arg(long)]
    pub beta: Option<f32>,
    /// Neighbour count for local density.
    #[arg(long)]
    pub m: Option<usize>,
    /// Maximum cluster duration in frames.
    #[arg(long)]
    pub smax: Option<usize>,
}

impl ClusterArgs {
    pub fn apply(&self, mut p: ClusterParams) -> ClusterParams {
        if let Some(v) = self.tau {
            p.tau = v;
        }
        if let Some(v) = self.beta {
            p.beta = v;
        }
        if let Some(v) = self.m {
            p.m = v;
        }
        if let Some(v) = self.smax {
            p.s_max = v;
        }
        p
    }
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// WAV files, or embedding files (VSEB binary or CSV).
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Frame rate of CSV embeddings, e.g. "75" or "24000/320".
    #[arg(long)]
    pub embedding_rate: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn a codebook from the pooled cluster embeddings of a corpus.
    TrainCodebook {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        codebook_size: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        decay: Option<f32>,
        #[arg(long)]
        awaken_fraction: Option<f64>,
        #[command(flatten)]
        cluster: ClusterArgs,
        /// Write the training report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Turn audio or embeddings into token-stream files.
    Tokenize {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, env = "VFRTOK_CODEBOOK")]
        codebook: Option<PathBuf>,
        #[command(flatten)]
        cluster: ClusterArgs,
        /// Directory for `<stem>.vstk` outputs.
        #[arg(long, conflicts_with = "out")]
        out_dir: Option<PathBuf>,
        /// Output path when there is a single input.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Expand a token stream back to frame-rate embeddings.
    Detokenize {
        stream: PathBuf,
        #[arg(long, env = "VFRTOK_CODEBOOK")]
        codebook: Option<PathBuf>,
        /// Output embeddings; `.csv` writes CSV, anything else VSEB.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Token rate, bitrate and duration statistics for token streams.
    Stats {
        streams: Vec<PathBuf>,
        /// Report bitrate for this frame rate instead of measuring it.
        #[arg(long)]
        frame_rate: Option<f64>,
        /// Codebook size used with --frame-rate when no stream is given.
        #[arg(long)]
        codebook_size: Option<u32>,
        /// s_max used with --frame-rate when no stream is given.
        #[arg(long)]
        smax: Option<u32>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
        #[arg(long)]
        histogram_csv: Option<PathBuf>,
        #[arg(long)]
        utterance_csv: Option<PathBuf>,
    },
    /// Token boundary timestamps of a stream.
    Boundaries {
        stream: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Frame rate and bitrate over a grid of tau and s_max values.
    Sweep {
        #[command(flatten)]
        input: InputArgs,
        /// Codebook; without one only segmentation runs and K comes from --codebook-size.
        #[arg(long, env = "VFRTOK_CODEBOOK")]
        codebook: Option<PathBuf>,
        #[arg(long)]
        codebook_size: Option<u32>,
        #[arg(long, value_delimiter = ',', default_value = "0.6,0.7,0.8")]
        tau: Vec<f32>,
        #[arg(long, value_delimiter = ',', default_value = "4")]
        smax: Vec<usize>,
        #[arg(long)]
        beta: Option<f32>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Fit an n-gram model over extended token IDs; optionally sample from it.
    Lm {
        #[arg(required = true)]
        streams: Vec<PathBuf>,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Write the n-gram count table.
        #[arg(long)]
        model_out: Option<PathBuf>,
        /// Number of tokens to sample.
        #[arg(long, default_value_t = 0)]
        generate: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write sampled tokens as a stream file instead of printing IDs.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Write a seeded synthetic corpus of WAV files.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 16)]
        utterances: usize,
        #[arg(long, default_value_t = 4.0)]
        seconds: f64,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, module) = commands::classify(&err);
            eprintln!("vfrtok: {module}: {err:#}");
            ExitCode::from(code)
        }
    }
}
