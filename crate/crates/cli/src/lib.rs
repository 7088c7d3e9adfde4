// SPDX-License-Identifier: MIT OR Apache-2.0

//! The `netloc` command line: localization, cross-validation, ablation
//! planning and effect analysis over the on-disk store formats.
//!
//! Exit codes: 0 success, 2 usage, 3 data validation, 4 statistical
//! procedure failure (including a failed bench check or a missed
//! `--min-folds`).

use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod config;
pub mod oracles;

use config::{CommonArgs, RunConfig};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Failure {
    Usage(String),
    Data(String),
    Statistical(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 3,
            Failure::Statistical(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Statistical(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for Failure {}

impl From<netloc_core::Error> for Failure {
    fn from(e: netloc_core::Error) -> Self {
        if e.is_statistical() {
            Failure::Statistical(e.to_string())
        } else {
            Failure::Data(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "netloc", version, about = "Localize, cross-validate and ablate unit-level subnetworks")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchScale {
    Quick,
    Full,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select the target and least-active masks of one localizer.
    Localize {
        #[arg(long)]
        localizer: String,
        #[arg(long)]
        model: String,
    },
    /// k-fold generalization of a localizer.
    Crossval {
        #[arg(long)]
        localizer: String,
        #[arg(long)]
        model: String,
        /// Exit with status 4 when fewer folds are significant.
        #[arg(long)]
        min_folds: Option<usize>,
        /// Also report the share of mask units significant on held-out data.
        #[arg(long)]
        per_unit: bool,
    },
    /// Check mask pairs and list the ablation runs for the model adapter.
    AblatePlan {
        #[arg(long)]
        model: String,
        /// Localizers to include; defaults to every one with masks.
        #[arg(long = "localizer")]
        localizers: Vec<String>,
        /// Plan file; defaults to <masks>/<model>/ablation_plan.jsonl.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ablation and behavioral predictions from an accuracy log.
    Effects {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        models: PathBuf,
        /// Dataset metadata; enables the behavioral predictions.
        #[arg(long)]
        datasets: Option<PathBuf>,
        /// Also rank ATOMS predictor subsets for ToM accuracy.
        #[arg(long, requires = "datasets")]
        atoms: bool,
    },
    /// Run the synthetic ground-truth checks.
    Bench {
        #[arg(long, value_enum, default_value = "quick")]
        scale: BenchScale,
    },
    /// Plain-text summary of report CSV files.
    Report {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = RunConfig::resolve(&cli.common)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(format!("cannot start {n} threads: {e}")))?;
    }
    let out = match cli.command {
        Command::Localize { localizer, model } => commands::localize(&cfg, &localizer, &model)?,
        Command::Crossval { localizer, model, min_folds, per_unit } => {
            commands::crossval(&cfg, &localizer, &model, min_folds, per_unit)?
        }
        Command::AblatePlan { model, localizers, out } => commands::ablate_plan(&cfg, &model, &localizers, out)?,
        Command::Effects { log, models, datasets, atoms } => {
            commands::effects(&cfg, &log, &models, datasets.as_deref(), atoms)?
        }
        Command::Bench { scale } => commands::bench(&cfg, scale)?,
        Command::Report { files } => commands::report(&files)?,
    };
    print!("{}", out.text);
    out.failure.map_or(Ok(()), Err)
}
