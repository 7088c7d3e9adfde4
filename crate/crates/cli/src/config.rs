// SPDX-License-Identifier: MIT OR Apache-2.0

//! Run configuration. Each setting is taken from the first of: command-line
//! flag, `NETLOC_*` environment variable, `--config` TOML file, default.
//! clap resolves the first two; this module layers the file and defaults
//! underneath.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use netloc_core::localizer::ConjunctionP;
use netloc_core::stats::FdrMethod;
use serde::Deserialize;

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FdrArg {
    BhModelWide,
    BhPerLayer,
    Uncorrected,
}

impl From<FdrArg> for FdrMethod {
    fn from(a: FdrArg) -> Self {
        match a {
            FdrArg::BhModelWide => FdrMethod::BhModelWide,
            FdrArg::BhPerLayer => FdrMethod::BhPerLayer,
            FdrArg::Uncorrected => FdrMethod::Uncorrected,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConjunctionPArg {
    MinimizingPair,
    MaxP,
}

impl From<ConjunctionPArg> for ConjunctionP {
    fn from(a: ConjunctionPArg) -> Self {
        match a {
            ConjunctionPArg::MinimizingPair => ConjunctionP::MinimizingPair,
            ConjunctionPArg::MaxP => ConjunctionP::MaxP,
        }
    }
}

/// Settings shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML file with defaults for any of these settings.
    #[arg(long, global = true, env = "NETLOC_CONFIG")]
    pub config: Option<PathBuf>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true, env = "NETLOC_THREADS")]
    pub threads: Option<usize>,
    /// Directory of localizer suite files (*.jsonl).
    #[arg(long, global = true, env = "NETLOC_SUITES")]
    pub suites: Option<PathBuf>,
    /// Root of the activation store.
    #[arg(long, global = true, env = "NETLOC_ACTIVATIONS")]
    pub activations: Option<PathBuf>,
    /// Directory masks are written to and read from.
    #[arg(long, global = true, env = "NETLOC_MASKS")]
    pub masks: Option<PathBuf>,
    /// Directory reports are written to.
    #[arg(long, global = true, env = "NETLOC_REPORTS")]
    pub reports: Option<PathBuf>,
    #[arg(long, global = true, env = "NETLOC_ALPHA")]
    pub alpha: Option<f64>,
    /// Largest mask as a fraction of all units.
    #[arg(long, global = true, env = "NETLOC_CAP_FRACTION")]
    pub cap_fraction: Option<f64>,
    #[arg(long, global = true, value_enum, env = "NETLOC_FDR")]
    pub fdr: Option<FdrArg>,
    #[arg(long, global = true, value_enum, env = "NETLOC_CONJUNCTION_P")]
    pub conjunction_p: Option<ConjunctionPArg>,
    /// Pair targets and controls across member suites of a union localizer.
    #[arg(long, global = true, env = "NETLOC_CROSS_SUITE_PAIRS", num_args = 0..=1, default_missing_value = "true")]
    pub cross_suite_pairs: Option<bool>,
    #[arg(long, global = true, env = "NETLOC_K_FOLDS")]
    pub k_folds: Option<usize>,
    #[arg(long, global = true, env = "NETLOC_SEED")]
    pub seed: Option<u64>,
}

/// Contents of a `--config` file. Unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub threads: Option<usize>,
    pub suites: Option<PathBuf>,
    pub activations: Option<PathBuf>,
    pub masks: Option<PathBuf>,
    pub reports: Option<PathBuf>,
    pub alpha: Option<f64>,
    pub cap_fraction: Option<f64>,
    pub fdr: Option<FdrArg>,
    pub conjunction_p: Option<ConjunctionPArg>,
    pub cross_suite_pairs: Option<bool>,
    pub k_folds: Option<usize>,
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Data(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::Usage(format!("config {}: {e}", path.display())))
    }
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub threads: Option<usize>,
    pub suites: PathBuf,
    pub activations: PathBuf,
    pub masks: PathBuf,
    pub reports: PathBuf,
    pub alpha: f64,
    pub cap_fraction: f64,
    pub fdr: FdrMethod,
    pub conjunction_p: ConjunctionP,
    pub cross_suite_pairs: bool,
    pub k_folds: usize,
    pub seed: u64,
}

impl RunConfig {
    pub fn resolve(args: &CommonArgs) -> Result<Self, Failure> {
        let file = match &args.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let path = |a: &Option<PathBuf>, f: Option<PathBuf>, d: &str| a.clone().or(f).unwrap_or_else(|| d.into());
        let cfg = RunConfig {
            threads: args.threads.or(file.threads),
            suites: path(&args.suites, file.suites, "suites"),
            activations: path(&args.activations, file.activations, "activations"),
            masks: path(&args.masks, file.masks, "masks"),
            reports: path(&args.reports, file.reports, "reports"),
            alpha: args.alpha.or(file.alpha).unwrap_or(0.05),
            cap_fraction: args.cap_fraction.or(file.cap_fraction).unwrap_or(0.01),
            fdr: args.fdr.or(file.fdr).map_or(FdrMethod::BhModelWide, Into::into),
            conjunction_p: args.conjunction_p.or(file.conjunction_p).map_or(ConjunctionP::MinimizingPair, Into::into),
            cross_suite_pairs: args.cross_suite_pairs.or(file.cross_suite_pairs).unwrap_or(false),
            k_folds: args.k_folds.or(file.k_folds).unwrap_or(10),
            seed: args.seed.or(file.seed).unwrap_or(0),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), Failure> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Failure::Usage(format!("alpha must be in (0, 1), got {}", self.alpha)));
        }
        if !(self.cap_fraction > 0.0 && self.cap_fraction <= 1.0) {
            return Err(Failure::Usage(format!("cap fraction must be in (0, 1], got {}", self.cap_fraction)));
        }
        if self.k_folds < 2 {
            return Err(Failure::Usage(format!("k-folds must be at least 2, got {}", self.k_folds)));
        }
        if self.threads == Some(0) {
            return Err(Failure::Usage("threads must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let cfg = RunConfig::resolve(&CommonArgs::default()).unwrap();
        assert_eq!((cfg.alpha, cfg.cap_fraction, cfg.k_folds), (0.05, 0.01, 10));
        assert_eq!(cfg.fdr, FdrMethod::BhModelWide);
        assert!(!cfg.cross_suite_pairs);
    }

    #[test]
    fn file_fills_gaps_flags_win() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("netloc.toml");
        std::fs::write(&path, "alpha = 0.01\nk_folds = 5\nfdr = \"bh-per-layer\"\n").unwrap();
        let args = CommonArgs { config: Some(path), alpha: Some(0.02), ..CommonArgs::default() };
        let cfg = RunConfig::resolve(&args).unwrap();
        assert_eq!((cfg.alpha, cfg.k_folds, cfg.fdr), (0.02, 5, FdrMethod::BhPerLayer));
    }

    #[test]
    fn bad_values_are_usage_errors() {
        let args = CommonArgs { alpha: Some(1.5), ..CommonArgs::default() };
        assert!(matches!(RunConfig::resolve(&args), Err(Failure::Usage(_))));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        std::fs::write(&path, "alhpa = 0.01\n").unwrap();
        let args = CommonArgs { config: Some(path), ..CommonArgs::default() };
        assert!(matches!(RunConfig::resolve(&args), Err(Failure::Usage(_))));
    }
}
