// SPDX-License-Identifier: MIT OR Apache-2.0

//! Effect analyses on accuracy data: beta regression with sum-coded
//! designs, Wald contrasts, exact leave-one-out comparison, and the
//! ablation and behavioral predictions built on them.
//!
//! Accuracies are proportions, so exact 0 and 1 are smoothed with
//! `(y (n - 1) + 0.5) / n` before fitting.

mod ablation;
mod behavioral;
mod beta;
mod contrast;
mod correlation;
pub mod design;
mod loo;

pub use ablation::{evaluate_ablation_predictions, AblationReport, RawEffect, ABLATION_PREDICTIONS, INTACT_LEVEL};
pub use behavioral::{
    atoms_design, cell_accuracies, evaluate_behavioral_predictions, BehavioralReport, CellAccuracy, CorrelationResult,
    GainResult, MIN_GAIN_MODELS,
};
pub use beta::{beta_log_density, beta_regression_fit, cluster_robust, BetaLikelihood, RegressionFit};
pub use contrast::{contrast, ContrastResult, Direction, Z95};
pub use correlation::{pearson_r, smooth_response};
pub use design::{DesignMatrix, Frame, RowSpec, Term};
pub use loo::{
    atoms_csv, atoms_subset_search, loo_compare, loo_elpd, paired_difference, AtomsModel, LooComparison, LooResult,
};
