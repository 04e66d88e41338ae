//! `plaque`: batch entry points for the synthetic-plaque engine.
//!
//! Exit codes: 0 success, 1 runtime or data error, 2 usage or config error.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "plaque", version, about = "Synthetic-plaque CT data engine and evaluation tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate phantom volume/mask CVOL pairs.
    Phantom {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// Grid size as X,Y,Z.
        #[arg(long, value_parser = parse_dims, default_value = "96,96,96")]
        dims: [usize; 3],
    },
    /// Sample patches from paired volumes into a CSHD shard.
    Shard {
        #[arg(long)]
        volumes: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        count: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Dice, clDice and mean surface distance per case.
    EvalSeg {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Lesion-level precision, recall and F1 per case.
    EvalDet {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = plaque_engine::metrics::DEFAULT_MIN_OVERLAP)]
        min_overlap: usize,
        #[arg(long)]
        report: PathBuf,
    },
    /// AUROC with a percentile bootstrap interval.
    Roc {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = 500)]
        resamples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the result as JSON here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Check an architecture spec against the reference shape table.
    ArchCheck {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Dump mid-slices of one shard record as PGM images.
    Inspect {
        #[arg(long)]
        shard: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_dims(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected X,Y,Z, got {s:?}"));
    }
    let mut dims = [0usize; 3];
    for (d, p) in dims.iter_mut().zip(&parts) {
        *d = p.parse().map_err(|e| format!("bad extent {p:?}: {e}"))?;
    }
    Ok(dims)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::Phantom { out, seed, count, dims } => commands::phantom(&out, seed, count, dims),
        Command::Shard { volumes, config, count, out, workers } => {
            commands::shard(&volumes, &config, count, &out, workers)
        }
        Command::EvalSeg { pred, gt, report } => commands::eval_seg(&pred, &gt, &report),
        Command::EvalDet { pred, gt, min_overlap, report } => commands::eval_det(&pred, &gt, min_overlap, &report),
        Command::Roc { scores, labels, resamples, seed, report } => {
            commands::roc(&scores, &labels, resamples, seed, report.as_deref())
        }
        Command::ArchCheck { spec, report } => commands::arch_check(spec.as_deref(), report.as_deref()),
        Command::Inspect { shard, index, out } => commands::inspect(&shard, index, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
