// SPDX-License-Identifier: MIT OR Apache-2.0

//! k-fold check that a localization carries over to held-out stimuli.
//!
//! Each condition's stimuli are shuffled with a seed and dealt into `k`
//! folds (paired suites shuffle target and control together so pairs stay
//! intact). For every fold the localizer runs on the remaining stimuli;
//! on the held-out stimuli each stimulus is scored by its mean activation
//! over the selected units, with every unit's sign aligned to its
//! training statistic, and target scores are compared with control scores
//! by one two-sided Welch test.

use std::collections::BTreeMap;
use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::localizer::{localizer_statistic, select_target_subnetwork, LocalizerConfig, StatOptions};
use crate::stats::welch_t;
use crate::store::{ActivationSet, ActivationTensor, ConditionKey};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralizationOptions {
    pub stat: StatOptions,
    pub cap_fraction: f64,
    /// Also report the share of mask units individually significant on
    /// the held-out split.
    pub per_unit: bool,
}

impl Default for GeneralizationOptions {
    fn default() -> Self {
        GeneralizationOptions { stat: StatOptions::default(), cap_fraction: 0.01, per_unit: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldReport {
    pub fold_index: usize,
    pub mask_size: usize,
    pub test_t: f64,
    pub test_p: f64,
    pub significant: bool,
    pub unit_fraction_significant: Option<f64>,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizationReport {
    pub localizer_name: String,
    pub k: usize,
    pub folds: Vec<FoldReport>,
}

impl GeneralizationReport {
    pub fn n_significant(&self) -> usize {
        self.folds.iter().filter(|f| f.significant).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("localizer,fold,mask_size,test_t,test_p,significant,unit_fraction_significant,diagnostic\n");
        for f in &self.folds {
            let _ = writeln!(
                out,
                "{},{},{},{:.10},{:.10e},{},{},{}",
                self.localizer_name,
                f.fold_index,
                f.mask_size,
                f.test_t,
                f.test_p,
                f.significant,
                f.unit_fraction_significant.map_or(String::new(), |v| format!("{v:.6}")),
                f.diagnostic.as_deref().unwrap_or("").replace(',', ";"),
            );
        }
        out
    }
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Fold index of every stimulus of every condition the localizer reads.
pub fn fold_assignment(
    tensors: &ActivationSet,
    cfg: &LocalizerConfig,
    k: usize,
    seed: u64,
) -> Result<BTreeMap<ConditionKey, Vec<usize>>> {
    if k < 2 {
        return Err(Error::Precondition(format!("k={k} must be at least 2")));
    }
    let mut out = BTreeMap::new();
    for m in &cfg.members {
        for key in m.target_keys().chain(m.control_keys()) {
            if out.contains_key(&key) {
                continue;
            }
            let t = tensors
                .get(&key.suite, &key.condition)
                .ok_or_else(|| Error::Missing(format!("activations for {key}")))?;
            let n = t.n_stimuli();
            if n < k {
                return Err(Error::Precondition(format!("condition {key} has {n} stimuli, fewer than k={k} folds")));
            }
            let group = if cfg.paired && m.paired { m.suite.clone() } else { key.to_string() };
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ fnv1a(&group)));
            let mut folds = vec![0usize; n];
            for (pos, &i) in order.iter().enumerate() {
                folds[i] = pos % k;
            }
            out.insert(key, folds);
        }
    }
    Ok(out)
}

fn split(t: &ActivationTensor, folds: &[usize], fold: usize) -> (ActivationTensor, ActivationTensor) {
    let (test, train): (Vec<usize>, Vec<usize>) = (0..t.n_stimuli()).partition(|&i| folds[i] == fold);
    (t.select_rows(&train), t.select_rows(&test))
}

/// Runs the localizer `k` times on `(k-1)/k` of the stimuli and tests the
/// selected units on the rest.
pub fn kfold_generalization(
    tensors: &ActivationSet,
    cfg: &LocalizerConfig,
    k: usize,
    seed: u64,
    opts: &GeneralizationOptions,
) -> Result<GeneralizationReport> {
    cfg.validate()?;
    let assignment = fold_assignment(tensors, cfg, k, seed)?;
    let target_keys = cfg.target_keys();
    let control_keys = cfg.control_keys();
    let folds = opts
        .stat
        .exec
        .map_range(k, |fold| run_fold(tensors, cfg, &assignment, &target_keys, &control_keys, fold, opts));
    Ok(GeneralizationReport { localizer_name: cfg.name.clone(), k, folds: folds.into_iter().collect::<Result<_>>()? })
}

fn run_fold(
    tensors: &ActivationSet,
    cfg: &LocalizerConfig,
    assignment: &BTreeMap<ConditionKey, Vec<usize>>,
    target_keys: &[ConditionKey],
    control_keys: &[ConditionKey],
    fold: usize,
    opts: &GeneralizationOptions,
) -> Result<FoldReport> {
    let mut train = ActivationSet::new();
    let mut test: BTreeMap<ConditionKey, ActivationTensor> = BTreeMap::new();
    for (key, folds) in assignment {
        let t = tensors.get(&key.suite, &key.condition).expect("assigned keys exist");
        let (tr, te) = split(t, folds, fold);
        train.insert(tr)?;
        test.insert(key.clone(), te);
    }
    let stats = localizer_statistic(&train, cfg, &opts.stat)?;
    let mask = select_target_subnetwork(&stats, opts.stat.alpha, opts.cap_fraction)?;
    let mut report = FoldReport {
        fold_index: fold,
        mask_size: mask.len(),
        test_t: 0.0,
        test_p: 1.0,
        significant: false,
        unit_fraction_significant: None,
        diagnostic: None,
    };
    if mask.is_empty() {
        report.diagnostic = Some("empty mask on training split".into());
        return Ok(report);
    }
    let d = stats.hidden_dim;
    let signed: Vec<(usize, f64)> = mask
        .units
        .iter()
        .map(|u| {
            let f = u.flat(d);
            (f, if stats.m[f] < 0.0 { -1.0 } else { 1.0 })
        })
        .collect();
    let scores = |keys: &[ConditionKey]| -> Vec<f64> {
        let mut out = Vec::new();
        for key in keys {
            let t = &test[key];
            for s in 0..t.n_stimuli() {
                let row = t.row(s);
                let sum: f64 = signed.iter().map(|&(f, sign)| sign * row[f] as f64).sum();
                out.push(sum / signed.len() as f64);
            }
        }
        out
    };
    let (target_scores, control_scores) = (scores(target_keys), scores(control_keys));
    match welch_t(&target_scores, &control_scores) {
        Ok(r) => {
            report.test_t = r.t;
            report.test_p = r.p_two_sided;
            report.significant = r.p_two_sided < opts.stat.alpha;
        }
        Err(e) => report.diagnostic = Some(e.to_string()),
    }
    if opts.per_unit {
        let column = |keys: &[ConditionKey], f: usize| -> Vec<f64> {
            keys.iter()
                .flat_map(|key| {
                    let t = &test[key];
                    (0..t.n_stimuli()).map(move |s| t.row(s)[f] as f64)
                })
                .collect()
        };
        let hits = signed
            .iter()
            .filter(|&&(f, _)| {
                welch_t(&column(target_keys, f), &column(control_keys, f))
                    .is_ok_and(|r| r.p_two_sided < opts.stat.alpha)
            })
            .count();
        report.unit_fraction_significant = Some(hits as f64 / signed.len() as f64);
    }
    Ok(report)
}
