// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::Serialize;

use super::beta::{beta_regression_fit, maximize, BetaLikelihood};
use super::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::store::{Atoms, ATOMS_NAMES};

/// Exact leave-one-out log predictive densities.
#[derive(Debug, Clone, PartialEq)]
pub struct LooResult {
    pub elpd: f64,
    pub pointwise: Vec<f64>,
}

/// Refits the model once per observation, each time without that
/// observation, and scores the held-out point. Refits start from the
/// full-data optimum.
pub fn loo_elpd(d: &DesignMatrix, exec: Execution) -> Result<LooResult> {
    let full = beta_regression_fit(d)?;
    let start = full.theta();
    let lik = BetaLikelihood::new(&d.x, &d.y);
    let pointwise = exec
        .map_range(d.n_rows(), |i| {
            let held_out = lik.without(i);
            let opt = maximize(&held_out, &start)
                .map_err(|e| Error::procedure("leave-one-out", format!("refit without observation {i}: {e}")))?;
            Ok(lik.pointwise(&opt.theta, i))
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    Ok(LooResult { elpd: pointwise.iter().sum(), pointwise })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LooComparison {
    pub elpd0: f64,
    pub elpd1: f64,
    /// `sum(lpd1 - lpd0)`; positive favors the second model.
    pub elpd_diff: f64,
    pub se_diff: f64,
}

/// `sum(a - b)` and `sqrt(n) * sd(a - b)`.
pub fn paired_difference(a: &[f64], b: &[f64]) -> (f64, f64) {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diff.len() as f64;
    let sum: f64 = diff.iter().sum();
    if diff.len() < 2 {
        return (sum, 0.0);
    }
    let mean = sum / n;
    let var = diff.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (sum, (n * var).sqrt())
}

fn compare_results(r0: &LooResult, r1: &LooResult) -> LooComparison {
    let (elpd_diff, se_diff) = paired_difference(&r1.pointwise, &r0.pointwise);
    LooComparison { elpd0: r0.elpd, elpd1: r1.elpd, elpd_diff, se_diff }
}

/// Compares two models of the same response by exact leave-one-out.
pub fn loo_compare(m0: &DesignMatrix, m1: &DesignMatrix, exec: Execution) -> Result<LooComparison> {
    if m0.y != m1.y {
        return Err(Error::Precondition("models compared by leave-one-out must share the response".into()));
    }
    Ok(compare_results(&loo_elpd(m0, exec)?, &loo_elpd(m1, exec)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomsModel {
    /// Bit `k` set when `ATOMS_NAMES[k]` is a predictor.
    pub subset: u8,
    pub predictors: Vec<&'static str>,
    pub elpd: f64,
    /// Difference to the best model (zero for the best, negative otherwise).
    pub elpd_diff: f64,
    pub se_diff: f64,
    pub rank: usize,
}

impl AtomsModel {
    pub fn contains(&self, atom: usize) -> bool {
        self.subset & (1 << atom) != 0
    }

    pub fn label(&self) -> String {
        if self.predictors.is_empty() {
            "base".into()
        } else {
            format!("base+{}", self.predictors.join("+"))
        }
    }
}

/// Scores every subset of the seven ATOMS flags added to `base` (coded
/// +1/-1) by exact leave-one-out and ranks them, best first. Ties keep
/// subset order.
pub fn atoms_subset_search(base: &DesignMatrix, flags: &[Atoms], exec: Execution) -> Result<Vec<AtomsModel>> {
    if flags.len() != base.n_rows() {
        return Err(Error::Precondition(format!("{} ATOMS rows for {} observations", flags.len(), base.n_rows())));
    }
    let coded: Vec<Vec<f64>> =
        (0..7).map(|k| flags.iter().map(|a| if a.flags()[k] { 1.0 } else { -1.0 }).collect()).collect();
    let results = exec
        .map_range(128, |subset| {
            let mut d = base.clone();
            for (k, col) in coded.iter().enumerate() {
                if subset & (1 << k) != 0 {
                    d = d.with_column(ATOMS_NAMES[k], col)?;
                }
            }
            // leave-one-out is sequential inside; the subsets carry the parallelism
            loo_elpd(&d, Execution::Sequential).map_err(|e| {
                Error::procedure("ATOMS subset search", format!("subset {}: {e}", subset_label(subset as u8)))
            })
        })
        .into_iter()
        .collect::<Result<Vec<LooResult>>>()?;

    let mut order: Vec<usize> = (0..128).collect();
    order.sort_by(|&a, &b| results[b].elpd.total_cmp(&results[a].elpd).then(a.cmp(&b)));
    let best = &results[order[0]];
    Ok(order
        .iter()
        .enumerate()
        .map(|(rank, &s)| {
            let (elpd_diff, se_diff) = paired_difference(&results[s].pointwise, &best.pointwise);
            AtomsModel {
                subset: s as u8,
                predictors: (0..7).filter(|k| s & (1 << k) != 0).map(|k| ATOMS_NAMES[k]).collect(),
                elpd: results[s].elpd,
                elpd_diff,
                se_diff,
                rank: rank + 1,
            }
        })
        .collect())
}

fn subset_label(subset: u8) -> String {
    let names: Vec<&str> = (0..7).filter(|k| subset & (1 << k) != 0).map(|k| ATOMS_NAMES[k]).collect();
    if names.is_empty() {
        "base".into()
    } else {
        format!("base+{}", names.join("+"))
    }
}

pub fn atoms_csv(models: &[AtomsModel]) -> String {
    let mut out = String::from("rank,model,elpd,elpd_diff,se_diff\n");
    for m in models {
        out.push_str(&format!("{},{},{:.6},{:.6},{:.6}\n", m.rank, m.label(), m.elpd, m.elpd_diff, m.se_diff));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effects::design::{Frame, Term};
    use crate::stats::special::inv_logit;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Beta, Distribution, StandardNormal};

    /// Response driven by `x` with slope `slope`; `noise` is an unrelated
    /// column.
    fn data(n: usize, slope: f64, seed: u64) -> (DesignMatrix, DesignMatrix, DesignMatrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let noise: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| {
                let mu = inv_logit(0.3 + slope * v);
                Beta::new(mu * 30.0, (1.0 - mu) * 30.0).unwrap().sample(&mut rng)
            })
            .collect();
        let frame = Frame::new(n).numeric("x", &x).unwrap().numeric("noise", &noise).unwrap();
        let base = DesignMatrix::build(&frame, &[Term::Intercept], &y).unwrap();
        let with_x = DesignMatrix::build(&frame, &[Term::Intercept, Term::numeric("x")], &y).unwrap();
        let with_noise = DesignMatrix::build(&frame, &[Term::Intercept, Term::numeric("noise")], &y).unwrap();
        (base, with_x, with_noise)
    }

    #[test]
    fn identical_designs_tie_exactly() {
        let (base, with_x, _) = data(60, 0.4, 1);
        for d in [&base, &with_x] {
            let c = loo_compare(d, d, Execution::Sequential).unwrap();
            assert_eq!((c.elpd_diff, c.se_diff), (0.0, 0.0));
        }
    }

    #[test]
    fn swapping_models_flips_the_sign() {
        let (base, with_x, _) = data(60, 0.2, 2);
        let a = loo_compare(&base, &with_x, Execution::Sequential).unwrap();
        let b = loo_compare(&with_x, &base, Execution::Sequential).unwrap();
        assert_eq!(a.elpd_diff, -b.elpd_diff);
        assert_eq!(a.se_diff, b.se_diff);
    }

    #[test]
    fn refits_match_fits_on_reduced_data() {
        let (_, with_x, _) = data(30, 0.4, 3);
        let loo = loo_elpd(&with_x, Execution::Sequential).unwrap();
        let i = 11;
        let keep: Vec<usize> = (0..30).filter(|r| *r != i).collect();
        let mut reduced = with_x.clone();
        reduced.x = with_x.x.select_rows(keep.iter());
        reduced.y = keep.iter().map(|r| with_x.y[*r]).collect();
        let fit = beta_regression_fit(&reduced).unwrap();
        let lpd = BetaLikelihood::new(&with_x.x, &with_x.y).pointwise(&fit.theta(), i);
        assert!((lpd - loo.pointwise[i]).abs() < 1e-8);
    }

    #[test]
    fn execution_modes_agree() {
        let (_, with_x, _) = data(40, 0.4, 4);
        assert_eq!(loo_elpd(&with_x, Execution::Sequential).unwrap(), loo_elpd(&with_x, Execution::Parallel).unwrap());
    }

    #[test]
    fn true_predictor_wins() {
        let wins = (0..20)
            .filter(|s| {
                let (base, with_x, _) = data(100, 0.5, 100 + s);
                loo_compare(&base, &with_x, Execution::Sequential).unwrap().elpd_diff > 0.0
            })
            .count();
        assert_eq!(wins, 20);
    }

    #[test]
    fn pure_noise_column_rarely_helps() {
        // an extra useless coefficient helps out of sample only when its
        // in-sample gain beats the one-parameter penalty (about 16% of runs)
        let losses = (0..100)
            .filter(|s| {
                let (base, _, with_noise) = data(200, 0.0, 1000 + s);
                loo_compare(&base, &with_noise, Execution::Parallel).unwrap().elpd_diff <= 0.0
            })
            .count();
        assert!(losses >= 75, "{losses}/100");
    }

    #[test]
    fn mismatched_responses_rejected() {
        let (base, _, _) = data(20, 0.0, 5);
        let (other, _, _) = data(20, 0.0, 6);
        assert!(loo_compare(&base, &other, Execution::Sequential).is_err());
    }
}
