// SPDX-License-Identifier: MIT OR Apache-2.0

use super::config::LocalizerConfig;
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::stats::ttest::paired_from_summary;
use crate::stats::{apply_fdr, welch_from_summaries, FdrMethod, Summary, TestResult};
use crate::store::{ActivationSet, ActivationTensor, ConditionKey, Method};

const UNIT_CHUNK: usize = 256;

/// How a p-value is attached to the conjunctive minimum statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConjunctionP {
    /// Two-sided p of the pair that attains the minimum.
    #[default]
    MinimizingPair,
    /// Largest two-sided p over all pairs; 1 when the pairs disagree in sign.
    MaxP,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatOptions {
    pub alpha: f64,
    pub fdr: FdrMethod,
    pub conjunction_p: ConjunctionP,
    /// Pair targets of one member suite with controls of another.
    pub cross_suite_pairs: bool,
    pub exec: Execution,
}

impl Default for StatOptions {
    fn default() -> Self {
        StatOptions {
            alpha: 0.05,
            fdr: FdrMethod::BhModelWide,
            conjunction_p: ConjunctionP::MinimizingPair,
            cross_suite_pairs: false,
            exec: Execution::Parallel,
        }
    }
}

/// Per-unit localizer statistic over a model, flat `[L, d]` arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitStatMap {
    pub model_id: String,
    pub localizer_name: String,
    pub method: Method,
    pub paired: bool,
    pub n_layers: usize,
    pub hidden_dim: usize,
    pub m: Vec<f64>,
    pub df: Vec<f64>,
    pub p: Vec<f64>,
    pub significant: Vec<bool>,
    pub alpha: f64,
    pub fdr: FdrMethod,
}

impl UnitStatMap {
    pub fn n_units(&self) -> usize {
        self.n_layers * self.hidden_dim
    }

    pub fn n_significant(&self) -> usize {
        self.significant.iter().filter(|s| **s).count()
    }

    /// Significance flags at another level under the same FDR rule.
    pub fn significance_at(&self, alpha: f64) -> Result<Vec<bool>> {
        if alpha == self.alpha {
            return Ok(self.significant.clone());
        }
        apply_fdr(&self.p, self.hidden_dim, self.fdr, alpha)
    }
}

/// Per-unit summaries of one condition.
pub fn condition_summaries(t: &ActivationTensor, exec: Execution) -> Vec<Summary> {
    let n = t.n_stimuli();
    let mut out = vec![Summary { n: 0, mean: 0.0, m2: 0.0 }; t.n_units()];
    exec.for_each_chunk_mut(&mut out, UNIT_CHUNK, |c, slot| {
        let (start, len) = (c * UNIT_CHUNK, slot.len());
        summarize_rows(slot, n, |s| &t.row(s)[start..start + len], |v, _| v as f64);
    });
    out
}

/// Per-unit summaries of `target - control` over aligned stimuli.
fn difference_summaries(target: &ActivationTensor, control: &ActivationTensor, exec: Execution) -> Vec<Summary> {
    let n = target.n_stimuli();
    let mut out = vec![Summary { n: 0, mean: 0.0, m2: 0.0 }; target.n_units()];
    exec.for_each_chunk_mut(&mut out, UNIT_CHUNK, |c, slot| {
        let start = c * UNIT_CHUNK;
        let len = slot.len();
        summarize_rows(
            slot,
            n,
            |s| &target.row(s)[start..start + len],
            |v, (s, k)| v as f64 - control.row(s)[start + k] as f64,
        );
    });
    out
}

// Two passes over the stimuli: sums, then squared deviations.
fn summarize_rows<'a, R, V>(slot: &mut [Summary], n: usize, row: R, value: V)
where
    R: Fn(usize) -> &'a [f32],
    V: Fn(f32, (usize, usize)) -> f64,
{
    let len = slot.len();
    let mut sum = vec![0.0f64; len];
    for s in 0..n {
        for (k, (acc, v)) in sum.iter_mut().zip(row(s)).enumerate() {
            *acc += value(*v, (s, k));
        }
    }
    let nf = n as f64;
    let mean: Vec<f64> = sum.iter().map(|v| v / nf).collect();
    let mut m2 = vec![0.0f64; len];
    for s in 0..n {
        for (k, (acc, v)) in m2.iter_mut().zip(row(s)).enumerate() {
            let d = value(*v, (s, k)) - mean[k];
            *acc += d * d;
        }
    }
    for (k, out) in slot.iter_mut().enumerate() {
        *out = Summary { n, mean: mean[k], m2: m2[k] };
    }
}

fn fetch<'a>(tensors: &'a ActivationSet, keys: &[ConditionKey]) -> Result<Vec<&'a ActivationTensor>> {
    let mut found = Vec::with_capacity(keys.len());
    let mut missing = Vec::new();
    for k in keys {
        match tensors.get(&k.suite, &k.condition) {
            Some(t) => found.push(t),
            None => missing.push(k.to_string()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Missing(format!("activations for {}", missing.join(", "))));
    }
    if let Some(t) = found.iter().find(|t| t.n_stimuli() < 2) {
        return Err(Error::Precondition(format!(
            "condition {} has {} stimuli, need at least 2",
            t.key(),
            t.n_stimuli()
        )));
    }
    Ok(found)
}

fn check_aligned(a: &ActivationTensor, b: &ActivationTensor) -> Result<()> {
    if a.stimulus_ids != b.stimulus_ids {
        let at = a
            .stimulus_ids
            .iter()
            .zip(&b.stimulus_ids)
            .position(|(x, y)| x != y)
            .unwrap_or(a.n_stimuli().min(b.n_stimuli()));
        return Err(Error::Invalid(format!(
            "paired conditions {} and {} are not aligned (first mismatch at item {at})",
            a.key(),
            b.key()
        )));
    }
    Ok(())
}

fn finish(
    tensors: &ActivationSet,
    cfg: &LocalizerConfig,
    opts: &StatOptions,
    results: Vec<TestResult>,
) -> Result<UnitStatMap> {
    let (n_layers, hidden_dim) = tensors.shape().expect("non-empty set checked by fetch");
    let m: Vec<f64> = results.iter().map(|r| r.t).collect();
    let df: Vec<f64> = results.iter().map(|r| r.df).collect();
    let p: Vec<f64> = results.iter().map(|r| r.p_two_sided).collect();
    let significant = apply_fdr(&p, hidden_dim, opts.fdr, opts.alpha)?;
    Ok(UnitStatMap {
        model_id: tensors.model_id().unwrap_or_default().to_string(),
        localizer_name: cfg.name.clone(),
        method: cfg.method,
        paired: cfg.paired,
        n_layers,
        hidden_dim,
        m,
        df,
        p,
        significant,
        alpha: opts.alpha,
        fdr: opts.fdr,
    })
}

/// t-statistic of the union of all target conditions against the union of
/// all control conditions, per unit.
pub fn simple_statistic(tensors: &ActivationSet, cfg: &LocalizerConfig, opts: &StatOptions) -> Result<UnitStatMap> {
    cfg.validate()?;
    if cfg.method != Method::Simple {
        return Err(Error::Precondition(format!("localizer {} is not simple", cfg.name)));
    }
    let targets = fetch(tensors, &cfg.target_keys())?;
    let controls = fetch(tensors, &cfg.control_keys())?;
    let exec = opts.exec;

    if cfg.paired {
        if targets.len() != 1 || controls.len() != 1 {
            return Err(Error::Precondition(format!(
                "paired localizer {} needs one target and one control condition",
                cfg.name
            )));
        }
        check_aligned(targets[0], controls[0])?;
        let diffs = difference_summaries(targets[0], controls[0], exec);
        let results = exec.map_slice(&diffs, paired_from_summary);
        return finish(tensors, cfg, opts, results);
    }

    let union = |ts: &[&ActivationTensor]| -> Vec<Summary> {
        let mut acc = condition_summaries(ts[0], exec);
        for t in &ts[1..] {
            let next = condition_summaries(t, exec);
            for (a, b) in acc.iter_mut().zip(&next) {
                *a = a.merge(b);
            }
        }
        acc
    };
    let t_sum = union(&targets);
    let c_sum = union(&controls);
    let results = exec.map_range(t_sum.len(), |u| welch_from_summaries(&t_sum[u], &c_sum[u]));
    finish(tensors, cfg, opts, results)
}

enum PairStats {
    Unpaired(usize, usize),
    Paired(Vec<Summary>),
}

/// Signed minimum over all target/control set pairs of the per-unit
/// t-statistic.
pub fn conjunctive_statistic(
    tensors: &ActivationSet,
    cfg: &LocalizerConfig,
    opts: &StatOptions,
) -> Result<UnitStatMap> {
    cfg.validate()?;
    if cfg.method != Method::Conjunctive {
        return Err(Error::Precondition(format!("localizer {} is not conjunctive", cfg.name)));
    }
    let exec = opts.exec;
    let keys = cfg.condition_keys();
    let all = fetch(tensors, &keys)?;
    let summaries: Vec<Vec<Summary>> = all.iter().map(|t| condition_summaries(t, exec)).collect();
    let index_of = |k: &ConditionKey| keys.iter().position(|x| x == k).expect("key from config");

    let mut pairs = Vec::new();
    if opts.cross_suite_pairs {
        for t in cfg.target_keys() {
            for c in cfg.control_keys() {
                pairs.push(PairStats::Unpaired(index_of(&t), index_of(&c)));
            }
        }
    } else {
        for m in &cfg.members {
            for t in m.target_keys() {
                for c in m.control_keys() {
                    let (ti, ci) = (index_of(&t), index_of(&c));
                    if cfg.paired && m.paired {
                        check_aligned(all[ti], all[ci])?;
                        pairs.push(PairStats::Paired(difference_summaries(all[ti], all[ci], exec)));
                    } else {
                        pairs.push(PairStats::Unpaired(ti, ci));
                    }
                }
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::Precondition(format!("localizer {} yields no target/control pairs", cfg.name)));
    }

    let conj_p = opts.conjunction_p;
    let n_units = summaries[0].len();
    let results = exec.map_range(n_units, |u| {
        let mut best: Option<TestResult> = None;
        let mut max_p = 0.0f64;
        let mut signs = (false, false);
        for pair in &pairs {
            let r = match pair {
                PairStats::Unpaired(t, c) => welch_from_summaries(&summaries[*t][u], &summaries[*c][u]),
                PairStats::Paired(d) => paired_from_summary(&d[u]),
            };
            max_p = max_p.max(r.p_two_sided);
            signs.0 |= r.t > 0.0;
            signs.1 |= r.t < 0.0;
            if best.is_none_or(|b| r.t < b.t) {
                best = Some(r);
            }
        }
        let mut best = best.expect("at least one pair");
        if conj_p == ConjunctionP::MaxP {
            best.p_two_sided = if signs.0 && signs.1 { 1.0 } else { max_p };
        }
        best
    });
    finish(tensors, cfg, opts, results)
}

/// Dispatches on the configured method.
pub fn localizer_statistic(tensors: &ActivationSet, cfg: &LocalizerConfig, opts: &StatOptions) -> Result<UnitStatMap> {
    match cfg.method {
        Method::Simple => simple_statistic(tensors, cfg, opts),
        Method::Conjunctive => conjunctive_statistic(tensors, cfg, opts),
    }
}
