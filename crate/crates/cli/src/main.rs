//! `emphasis`: command-line front end for the emphasis prediction toolkit.
//!
//! Exit codes: 0 on success, 1 on an internal error, 2 on bad input
//! (unreadable or malformed files, invalid configs).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use emphasis_core::corpus::CorpusFormat;
use emphasis_core::models::{Architecture, LossKind};

/// An input problem found by the CLI itself rather than the core library.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct InputError(pub String);

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Tsv,
    Json,
}

impl From<FormatArg> for CorpusFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Tsv => CorpusFormat::Tsv,
            FormatArg::Json => CorpusFormat::Json,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LossArg {
    Bce,
    Kld,
}

impl From<LossArg> for LossKind {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::Bce => LossKind::Bce,
            LossArg::Kld => LossKind::Kld,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ArchArg {
    CharWord,
    ExternalEmb,
}

impl From<ArchArg> for Architecture {
    fn from(a: ArchArg) -> Self {
        match a {
            ArchArg::CharWord => Architecture::CharWord,
            ArchArg::ExternalEmb => Architecture::ExternalEmb,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "emphasis", version, about = "Emphasis prediction for slide text")]
struct Cli {
    /// JSON run config; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output format for corpora and reports; defaults to the `--out`
    /// extension, then to the config, then to tsv.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file, or output directory for `train`. Defaults to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Slide, sentence and token counts with the length distribution.
    Stats { corpus: Option<PathBuf> },
    /// Gold emphasis score file from an annotated corpus.
    Aggregate { corpus: Option<PathBuf> },
    /// One instance per sentence, ids `<slide>#<sentence>`.
    SplitSentences { corpus: Option<PathBuf> },
    /// Per-token features, or mean emphasis per feature with `--report`.
    Features {
        corpus: Option<PathBuf>,
        #[arg(long)]
        keyphrases: Option<PathBuf>,
        #[arg(long)]
        report: bool,
    },
    /// Train a model; writes checkpoints, the training log and the config.
    Train {
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        keyphrases: Option<PathBuf>,
        #[arg(long, value_enum)]
        architecture: Option<ArchArg>,
        #[arg(long, value_enum)]
        loss: Option<LossArg>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
    },
    /// Score a corpus with a trained checkpoint.
    Predict {
        model: Option<PathBuf>,
        corpus: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        keyphrases: Option<PathBuf>,
    },
    /// Match_m scores of predictions against gold (score file or annotated corpus).
    Evaluate {
        gold: Option<PathBuf>,
        pred: Option<PathBuf>,
        /// Use m in {1, 2, 3, 4}.
        #[arg(long)]
        sentence_level: bool,
    },
    /// Weighted mean of several score files.
    Ensemble {
        members: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
    },
    /// Length-bucket and part-of-speech tables for a scored corpus.
    Analyze {
        corpus: Option<PathBuf>,
        scores: Option<PathBuf>,
        #[arg(long)]
        sentence_level: bool,
    },
    /// Static HTML heatmap of token scores.
    Heatmap {
        corpus: Option<PathBuf>,
        scores: Option<PathBuf>,
        /// Gold and predicted heatmaps side by side.
        #[arg(long)]
        compare: bool,
    },
    /// Finite-difference checks of every primitive, layer and model.
    Gradcheck,
    /// Synthetic annotated corpus.
    Synth {
        #[arg(long, default_value_t = 100)]
        slides: usize,
        #[arg(long, default_value_t = 20)]
        tokens: usize,
    },
}

fn is_input_error(err: &anyhow::Error) -> bool {
    err.chain().any(|cause| {
        if let Some(e) = cause.downcast_ref::<emphasis_core::Error>() {
            return e.is_input_error();
        }
        cause.is::<InputError>() || cause.is::<std::io::Error>() || cause.is::<serde_json::Error>()
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if is_input_error(&err) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
