// SPDX-License-Identifier: MIT OR Apache-2.0

//! # netloc-core
//!
//! Functional localization of unit subnetworks in transformer language
//! models. Activations recorded at the last prompt token for target and
//! control stimuli are contrasted unit by unit with Welch or paired
//! t-statistics, either over the union of all sets (simple localization)
//! or as the minimum over every target/control set pair (conjunctive
//! localization). Significant units, capped at a fraction of the model,
//! form the target subnetwork; an equally sized set of the least active
//! non-significant units forms the control subnetwork.
//!
//! Around that core sit:
//!
//! - [`store`]: the on-disk formats every stage exchanges (suites,
//!   pooled activation tensors, masks, accuracy logs).
//! - [`stats`]: t-tests, Student-t tail probabilities and FDR control.
//! - [`localizer`]: unit statistics, mask selection, the eight standard
//!   localizer configurations.
//! - [`generalization`]: k-fold held-out checks of a localization.
//! - [`effects`]: beta regression, contrasts and leave-one-out model
//!   comparison for behavioral and ablation accuracy data.
//! - [`synthetic`]: planted-signal generators used as ground truth.
//!
//! Per-unit statistics, cross-validation folds and leave-one-out refits
//! fan out over rayon when the `parallel` feature is enabled (the
//! default); every reduction runs in a fixed order so results do not
//! depend on the thread count.

pub mod effects;
pub mod error;
pub mod generalization;
pub mod localizer;
pub mod par;
pub mod stats;
pub mod store;
pub mod synthetic;

pub use error::{Error, Result};
pub use par::Execution;
