//! `synergy`: ingest, code, model and compare collaborative-discourse corpora.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "synergy", version, about = "Synergy degree analysis of coded group discourse")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML run configuration; flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Utterances file (.csv, or .jsonl/.ndjson).
    #[arg(long, global = true)]
    pub utterances: Option<PathBuf>,
    /// Group profiles CSV.
    #[arg(long, global = true)]
    pub groups: Option<PathBuf>,
    /// Codebook CSV; the built-in codebook is used otherwise.
    #[arg(long, global = true)]
    pub codebook: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub code_source: Option<SourceArg>,
    #[arg(long, global = true, value_enum)]
    pub normalization: Option<NormArg>,
    #[arg(long, global = true, value_enum)]
    pub scope: Option<ScopeArg>,
    #[arg(long, global = true, value_enum)]
    pub sign: Option<SignArg>,
    /// How synergy links a week to the previous observed week of its group.
    #[arg(long, global = true, value_enum)]
    pub linking: Option<LinkArg>,
    /// Emit every profiled group-week, zero where nothing task-relevant was said.
    #[arg(long, global = true)]
    pub zero_fill: bool,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Permutation iterations.
    #[arg(long, global = true)]
    pub iterations: Option<usize>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Holm-adjust post-hoc p values.
    #[arg(long, global = true)]
    pub holm: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceArg {
    Human,
    Pred,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    PerMember,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScopeArg {
    Global,
    PerGroup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SignArg {
    Prose,
    PaperLiteral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LinkArg {
    Consecutive,
    BridgeGaps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShotArg {
    Zero,
    Few,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FactorArg {
    ProblemType,
    Quality,
    Homogeneity,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and cross-check the corpus; writes validation_report.json.
    Ingest,
    /// Label utterances with a chat-completion model; writes the coded file and coding_report.json.
    Code {
        #[arg(long, value_enum, default_value = "zero")]
        shot: ShotArg,
        /// Coded utterances file; defaults to <out-dir>/utterances_coded.csv.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Order parameters, synergy degrees and weights for one code source.
    Analyze,
    /// Permutation tests of human against predicted coding on every outcome.
    Validate,
    /// Omnibus tests of outcomes across group factors.
    Compare {
        #[arg(long, value_enum, value_delimiter = ',', default_values = ["problem-type", "quality"])]
        factor: Vec<FactorArg>,
        /// Outcomes among u_O, u_W, u_S, u_C, synergy; all by default.
        #[arg(long, value_delimiter = ',')]
        outcome: Vec<String>,
    },
    /// Score an external predictions file against the corpus.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
    },
    /// Export stratified cross-validation folds to folds.csv.
    Folds {
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Write the bundled synthetic corpus and run every stage on it.
    Demo {
        /// Share of predicted codes that disagree with the human code.
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
    },
}

/// How a subcommand finished when it did not fail outright.
#[derive(Debug, Default)]
pub struct Status {
    pub warnings: Vec<String>,
}

impl Status {
    pub fn warn(&mut self, w: impl Into<String>) {
        self.warnings.push(w.into());
    }

    pub fn extend<'a>(&mut self, ws: impl IntoIterator<Item = &'a String>) {
        self.warnings.extend(ws.into_iter().cloned());
    }
}

fn run(cli: Cli) -> anyhow::Result<Status> {
    let cfg = RunConfig::resolve(&cli.common)?;
    match cli.command {
        Command::Ingest => commands::ingest(&cfg),
        Command::Code { shot, output } => commands::code(&cfg, shot, output),
        Command::Analyze => commands::analyze(&cfg),
        Command::Validate => commands::validate(&cfg),
        Command::Compare { factor, outcome } => commands::compare(&cfg, &factor, &outcome),
        Command::Evaluate { predictions } => commands::evaluate(&cfg, &predictions),
        Command::Folds { k } => commands::folds(&cfg, k),
        Command::Demo { noise } => commands::demo(&cfg, noise),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(status) if status.warnings.is_empty() => ExitCode::SUCCESS,
        Ok(status) => {
            for w in &status.warnings {
                eprintln!("warning: {w}");
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
