//! `oodkit` command-line tool.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use oodkit::metrics::ScoreKind;
use oodkit::Error;

/// Out-of-distribution aware training and evaluation on the synthetic benchmark.
///
/// Exit codes: 0 success, 1 I/O or internal error, 2 configuration error,
/// 3 data error, 4 training divergence.
#[derive(Debug, Parser)]
#[command(name = "oodkit", version, about, long_about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample the benchmark and write one CSV per split.
    GenData(GenDataArgs),
    /// Train a model on a dataset directory.
    Train(TrainArgs),
    /// Score a trained model and export AUCs, histograms and decision grids.
    Eval(EvalArgs),
    /// Error table and mCE of a trained model under the corruption suite.
    CorruptEval(CorruptEvalArgs),
    /// Train every point of a hyperparameter grid and keep the best model.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct OutArg {
    /// Output directory. Defaults to `$OODKIT_OUT/<command>`, or `oodkit-out/<command>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenDataArgs {
    /// Run configuration (TOML). Omitted sections take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `data_seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory written by `gen-data`.
    #[arg(long)]
    data: PathBuf,
    /// Overrides `train.seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScoreArg {
    Confidence,
    Entropy,
    #[value(name = "mutual_information", alias = "mi")]
    MutualInformation,
}

impl From<ScoreArg> for ScoreKind {
    fn from(s: ScoreArg) -> Self {
        match s {
            ScoreArg::Confidence => ScoreKind::Confidence,
            ScoreArg::Entropy => ScoreKind::Entropy,
            ScoreArg::MutualInformation => ScoreKind::MutualInformation,
        }
    }
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Model file written by `train` or `sweep`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Supplies the `[eval]` section; other sections are ignored.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated subset of predictive scores to report. Default: all.
    #[arg(long, value_delimiter = ',', value_enum)]
    scores: Vec<ScoreArg>,
    #[arg(long)]
    mc_passes: Option<usize>,
    /// Include the Mahalanobis detector (`true` or `false`).
    #[arg(long)]
    mahalanobis: Option<bool>,
    /// Overrides `eval.mc_seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Args)]
struct CorruptEvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `eval.corruption_seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Grid file (TOML) with `[[point]]` overrides and/or an `[axes]` table.
    #[arg(long)]
    grid: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    out: OutArg,
}

fn out_dir(arg: &OutArg, command: &str) -> PathBuf {
    arg.out.clone().unwrap_or_else(|| {
        std::env::var_os("OODKIT_OUT")
            .map_or_else(|| PathBuf::from("oodkit-out"), PathBuf::from)
            .join(command)
    })
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) => 2,
        Error::Parse { .. } | Error::MissingInput(_) | Error::Shape(_) | Error::Singular(_) => 3,
        Error::Divergence { .. } | Error::NonFinite(_) => 4,
        Error::Io(_) | Error::Json(_) => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenData(a) => {
            commands::gen_data(a.config.as_deref(), a.seed, &out_dir(&a.out, "gen-data"))
        }
        Command::Train(a) => commands::train(
            a.config.as_deref(),
            &a.data,
            a.seed,
            &out_dir(&a.out, "train"),
        ),
        Command::Eval(a) => commands::eval(
            &a.model,
            &a.data,
            a.config.as_deref(),
            &commands::EvalOverrides {
                scores: a.scores.iter().map(|&s| s.into()).collect(),
                mc_passes: a.mc_passes,
                mahalanobis: a.mahalanobis,
                seed: a.seed,
            },
            &out_dir(&a.out, "eval"),
        ),
        Command::CorruptEval(a) => commands::corrupt_eval(
            &a.model,
            &a.data,
            a.config.as_deref(),
            a.seed,
            &out_dir(&a.out, "corrupt-eval"),
        ),
        Command::Sweep(a) => commands::sweep(
            a.config.as_deref(),
            &a.grid,
            &a.data,
            &out_dir(&a.out, "sweep"),
        ),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
