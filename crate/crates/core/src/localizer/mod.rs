// SPDX-License-Identifier: MIT OR Apache-2.0

//! Unit-level localization: statistics, mask selection and reporting.
//!
//! A localizer contrasts target and control activations at every unit.
//! The simple method runs one test on the union of all target sets
//! against the union of all control sets; the conjunctive method takes the
//! signed minimum of the t-statistic over every target/control set pair,
//! so a unit only scores high when every pair agrees. For a suite with a
//! single target and a single control set the two coincide exactly.
//!
//! Significance is decided by the configured FDR rule on two-sided
//! p-values. Masks are canonical: ranking ties fall back to unit
//! coordinates, and all reductions run in a fixed order regardless of
//! the execution mode.

mod config;
mod report;
mod select;
mod statistic;

pub use config::{
    enumerate_localizers, LocalizerConfig, SuiteRoles, COMMUNICATIVE_INTENT, GAME_BELIEFS, LATENT_BELIEFS,
    LOCALIZER_NAMES, MORAL_INTENT, STANDARD_SUITES,
};
pub use report::{layer_distribution, layer_distribution_csv, LayerCount};
pub use select::{select_least_active, select_target_subnetwork};
pub use statistic::{
    condition_summaries, conjunctive_statistic, localizer_statistic, simple_statistic, ConjunctionP, StatOptions,
    UnitStatMap,
};

use crate::error::Result;
use crate::store::{ActivationSet, SubnetworkMask};

/// Target mask and its equally sized least-active control.
#[derive(Debug, Clone, PartialEq)]
pub struct Localization {
    pub stats: UnitStatMap,
    pub target: SubnetworkMask,
    pub control: SubnetworkMask,
}

/// Statistic, target mask and least-active mask in one call.
pub fn localize(
    tensors: &ActivationSet,
    cfg: &LocalizerConfig,
    opts: &StatOptions,
    cap_fraction: f64,
) -> Result<Localization> {
    let stats = localizer_statistic(tensors, cfg, opts)?;
    let target = select_target_subnetwork(&stats, opts.alpha, cap_fraction)?;
    let mut control = select_least_active(&stats, target.len())?;
    control.meta.cap_fraction = cap_fraction;
    Ok(Localization { stats, target, control })
}

#[cfg(test)]
mod tests;
