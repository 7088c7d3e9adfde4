// SPDX-License-Identifier: MIT OR Apache-2.0

use super::special::student_t_sf;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub t: f64,
    pub df: f64,
    pub p_two_sided: f64,
}

impl TestResult {
    fn new(t: f64, df: f64) -> Self {
        TestResult { t, df, p_two_sided: two_sided_p(t, df) }
    }
}

/// `2 * P(T > |t|)`, capped at 1.
pub fn two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    (2.0 * student_t_sf(t.abs(), df)).min(1.0)
}

/// Count, mean and sum of squared deviations of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub m2: f64,
}

impl Summary {
    pub fn of<I>(values: I) -> Summary
    where
        I: IntoIterator<Item = f64>,
        I::IntoIter: Clone,
    {
        let it = values.into_iter();
        let (n, sum) = it.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
        if n == 0 {
            return Summary { n: 0, mean: 0.0, m2: 0.0 };
        }
        let mean = sum / n as f64;
        let m2 = it.map(|v| (v - mean) * (v - mean)).sum();
        Summary { n, mean, m2 }
    }

    pub fn variance(&self) -> f64 {
        self.m2 / (self.n as f64 - 1.0)
    }

    /// Summary of the concatenated samples.
    pub fn merge(&self, other: &Summary) -> Summary {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        Summary { n, mean, m2 }
    }
}

/// Welch's unequal-variance t-test of `mean(x) - mean(y)`.
///
/// When both samples have zero variance the statistic is 0 (equal means)
/// or ±∞ (different means) with `df = n_x + n_y - 2`.
pub fn welch_t(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::Precondition(format!(
            "welch_t needs at least 2 observations per sample, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(welch_from_summaries(&Summary::of(x.iter().copied()), &Summary::of(y.iter().copied())))
}

pub fn welch_from_summaries(a: &Summary, b: &Summary) -> TestResult {
    let (na, nb) = (a.n as f64, b.n as f64);
    let qa = a.variance() / na;
    let qb = b.variance() / nb;
    let se2 = qa + qb;
    let diff = a.mean - b.mean;
    if se2 == 0.0 {
        let df = na + nb - 2.0;
        return degenerate(diff, df);
    }
    let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    TestResult::new(diff / se2.sqrt(), df)
}

fn degenerate(diff: f64, df: f64) -> TestResult {
    if diff == 0.0 {
        TestResult { t: 0.0, df, p_two_sided: 1.0 }
    } else {
        TestResult { t: f64::INFINITY.copysign(diff), df, p_two_sided: 0.0 }
    }
}

/// Paired t-test: a one-sample test of `x_i - y_i` against zero.
pub fn paired_t(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(Error::Precondition(format!(
            "paired_t needs aligned samples, got lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Precondition("paired_t needs at least 2 pairs".into()));
    }
    Ok(paired_from_summary(&Summary::of(x.iter().zip(y).map(|(a, b)| a - b))))
}

pub(crate) fn paired_from_summary(d: &Summary) -> TestResult {
    let n = d.n as f64;
    let df = n - 1.0;
    let se2 = d.variance() / n;
    if se2 == 0.0 {
        return degenerate(d.mean, df);
    }
    TestResult::new(d.mean / se2.sqrt(), df)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples() {
        let r = welch_t(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p_two_sided, 1.0);
    }

    #[test]
    fn hand_computed_welch() {
        // means 4 and 2, variances 4 and 1: t = 2 / sqrt(5/3), df = (5/3)^2 / (16/18 + 1/18)
        let r = welch_t(&[2.0, 4.0, 6.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((r.t - 2.0 / (5.0f64 / 3.0).sqrt()).abs() < 1e-14);
        assert!((r.t - 1.549_193_338_482_966_8).abs() < 1e-12);
        assert!((r.df - 50.0 / 17.0).abs() < 1e-13);
    }

    #[test]
    fn constant_samples() {
        let r = welch_t(&[1.0, 1.0, 1.0], &[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(r.t, f64::NEG_INFINITY);
        assert_eq!(r.p_two_sided, 0.0);
        assert_eq!(r.df, 4.0);
        let r = welch_t(&[5.0, 5.0], &[5.0, 5.0, 5.0]).unwrap();
        assert_eq!((r.t, r.p_two_sided, r.df), (0.0, 1.0, 3.0));
    }

    #[test]
    fn too_small() {
        assert!(welch_t(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn paired_cases() {
        let r = paired_t(&[3.0, 5.0, 7.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((r.t - 3.0 * 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.df, 2.0);
        let r = paired_t(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!((r.t, r.p_two_sided), (0.0, 1.0));
        assert!(paired_t(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn merge_matches_concatenation() {
        let a = [1.0, 4.0, 2.5, 8.0];
        let b = [3.0, -1.0, 0.5];
        let all: Vec<f64> = a.iter().chain(&b).copied().collect();
        let m = Summary::of(a.iter().copied()).merge(&Summary::of(b.iter().copied()));
        let d = Summary::of(all.iter().copied());
        assert_eq!(m.n, d.n);
        assert!((m.mean - d.mean).abs() < 1e-14);
        assert!((m.m2 - d.m2).abs() < 1e-12);
    }
}
