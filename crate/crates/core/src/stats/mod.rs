// SPDX-License-Identifier: MIT OR Apache-2.0

//! Scalar statistical kernels.
//!
//! All functions are pure; p-values are two-sided throughout.

mod fdr;
pub mod special;
pub(crate) mod ttest;

pub use fdr::{apply_fdr, bh_fdr, FdrMethod};
pub use special::student_t_sf;
pub use ttest::{paired_t, two_sided_p, welch_from_summaries, welch_t, Summary, TestResult};
