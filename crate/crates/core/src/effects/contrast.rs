// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fmt;

use serde::Serialize;

use super::beta::RegressionFit;
use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// What a contrast has to show to count as support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Interval entirely above zero.
    Greater,
    /// Interval entirely below zero.
    Less,
    /// Interval excludes zero.
    TwoSided,
    /// Interval not entirely above zero ("does not decrease" readings).
    NotGreater,
    /// Interval covers zero ("no difference" readings).
    CoversZero,
}

impl Direction {
    pub fn supported(self, ci_low: f64, ci_high: f64) -> bool {
        match self {
            Direction::Greater => ci_low > 0.0,
            Direction::Less => ci_high < 0.0,
            Direction::TwoSided => ci_low > 0.0 || ci_high < 0.0,
            Direction::NotGreater => ci_low <= 0.0,
            Direction::CoversZero => ci_low <= 0.0 && ci_high >= 0.0,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Greater => "greater",
            Direction::Less => "less",
            Direction::TwoSided => "two_sided",
            Direction::NotGreater => "not_greater",
            Direction::CoversZero => "covers_zero",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContrastResult {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub direction: Direction,
    pub supported: bool,
    /// Zero-width interval: no information about the contrast.
    pub degenerate: bool,
}

impl ContrastResult {
    /// A contrast with no information, reported as 0 with interval [0, 0].
    pub fn degenerate(name: &str, direction: Direction) -> Self {
        ContrastResult {
            name: name.into(),
            estimate: 0.0,
            std_error: 0.0,
            ci_low: 0.0,
            ci_high: 0.0,
            direction,
            supported: direction.supported(0.0, 0.0),
            degenerate: true,
        }
    }

    pub const CSV_HEADER: &'static str = "contrast,estimate,std_error,ci_low,ci_high,direction,supported,degenerate";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.10},{:.10},{:.10},{:.10},{},{},{}",
            self.name,
            self.estimate,
            self.std_error,
            self.ci_low,
            self.ci_high,
            self.direction,
            self.supported,
            self.degenerate
        )
    }
}

/// `w' beta` with a 95% Wald interval.
pub fn contrast(fit: &RegressionFit, name: &str, weights: &[f64], direction: Direction) -> Result<ContrastResult> {
    let p = fit.coefficients.len();
    if weights.len() != p {
        return Err(Error::Precondition(format!("contrast {name} has {} weights for {p} coefficients", weights.len())));
    }
    if weights.iter().all(|w| *w == 0.0) {
        return Ok(ContrastResult::degenerate(name, direction));
    }
    let estimate: f64 = weights.iter().zip(&fit.coefficients).map(|(w, b)| w * b).sum();
    let mut var = 0.0;
    for (i, wi) in weights.iter().enumerate() {
        for (j, wj) in weights.iter().enumerate() {
            var += wi * fit.covariance[(i, j)] * wj;
        }
    }
    let se = var.max(0.0).sqrt();
    let (ci_low, ci_high) = (estimate - Z95 * se, estimate + Z95 * se);
    Ok(ContrastResult {
        name: name.into(),
        estimate,
        std_error: se,
        ci_low,
        ci_high,
        direction,
        supported: direction.supported(ci_low, ci_high),
        degenerate: se == 0.0,
    })
}
