// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::Serialize;

use super::beta::{beta_regression_fit, cluster_robust};
use super::contrast::{contrast, ContrastResult, Direction, Z95};
use super::correlation::{pearson_r, smooth_response};
use super::design::{DesignMatrix, Frame, RowSpec, Term};
use super::loo::{loo_compare, LooComparison};
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::store::{AccuracyRecord, Atoms, Condition, DatasetInfo, Domain, ModelInfo};

/// The P3 designs carry five coefficients and a precision; with fewer
/// models a leave-one-out refit can interpolate its data.
pub const MIN_GAIN_MODELS: usize = 8;

/// Mean accuracy of one model on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellAccuracy {
    pub model_id: String,
    pub dataset_id: String,
    pub accuracy: f64,
    pub n_items: usize,
}

/// Per-(model, dataset) accuracy of the intact runs in a log.
pub fn cell_accuracies(records: &[AccuracyRecord]) -> Vec<CellAccuracy> {
    let mut cells: BTreeMap<(&str, &str), (usize, usize)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.condition == Condition::Intact) {
        let c = cells.entry((&r.model_id, &r.dataset_id)).or_default();
        c.0 += r.correct as usize;
        c.1 += 1;
    }
    cells
        .into_iter()
        .map(|((m, d), (k, n))| CellAccuracy {
            model_id: m.into(),
            dataset_id: d.into(),
            accuracy: k as f64 / n as f64,
            n_items: n,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationResult {
    pub r: f64,
    pub p: f64,
    pub n_models: usize,
    pub supported: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainResult {
    pub comparison: LooComparison,
    pub supported: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BehavioralReport {
    /// Per-model ToM and pragmatics accuracy correlate positively.
    pub p1: CorrelationResult,
    /// Domain does not matter once model and dataset predictors are known.
    pub p2: ContrastResult,
    /// ToM accuracy predicts pragmatics better than syntax accuracy does.
    pub p3: Option<GainResult>,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

impl BehavioralReport {
    pub fn csv(&self) -> String {
        let mut out = String::from("prediction,statistic,value,low,high,supported\n");
        let _ = writeln!(out, "P1,pearson_r,{:.10},{:.10e},,{}", self.p1.r, self.p1.p, self.p1.supported);
        let _ = writeln!(
            out,
            "P2,domain_contrast,{:.10},{:.10},{:.10},{}",
            self.p2.estimate, self.p2.ci_low, self.p2.ci_high, self.p2.supported
        );
        if let Some(g) = &self.p3 {
            let c = &g.comparison;
            let _ = writeln!(out, "P3,elpd_diff,{:.10},{:.10},,{}", c.elpd_diff, c.se_diff, g.supported);
        }
        out
    }

    pub fn verdict(&self) -> String {
        let word = |b: bool| if b { "supported" } else { "not supported" };
        let mut out = String::new();
        let _ = writeln!(
            out,
            "P1 {}: r = {:.3}, p = {:.3e} over {} models",
            word(self.p1.supported),
            self.p1.r,
            self.p1.p,
            self.p1.n_models
        );
        let _ = writeln!(
            out,
            "P2 {}: ToM minus pragmatics {:.3} on the logit scale, 95% CI [{:.3}, {:.3}]",
            word(self.p2.supported),
            self.p2.estimate,
            self.p2.ci_low,
            self.p2.ci_high
        );
        match &self.p3 {
            Some(g) => {
                let _ = writeln!(
                    out,
                    "P3 {}: elpd difference {:.2} (se {:.2}) for the ToM model over the syntax model",
                    word(g.supported),
                    g.comparison.elpd_diff,
                    g.comparison.se_diff
                );
            }
            None => out.push_str("P3 not evaluated\n"),
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }
}

struct Lookup<'a> {
    models: BTreeMap<&'a str, &'a ModelInfo>,
    datasets: BTreeMap<&'a str, &'a DatasetInfo>,
}

impl<'a> Lookup<'a> {
    fn new(cells: &[CellAccuracy], models: &'a [ModelInfo], datasets: &'a [DatasetInfo]) -> Result<Self> {
        let l = Lookup {
            models: models.iter().map(|m| (m.model_id.as_str(), m)).collect(),
            datasets: datasets.iter().map(|d| (d.dataset_id.as_str(), d)).collect(),
        };
        for c in cells {
            if !l.models.contains_key(c.model_id.as_str()) {
                return Err(Error::Missing(format!("model metadata for {}", c.model_id)));
            }
            if !l.datasets.contains_key(c.dataset_id.as_str()) {
                return Err(Error::Missing(format!("dataset metadata for {}", c.dataset_id)));
            }
            if !(0.0..=1.0).contains(&c.accuracy) {
                return Err(Error::Invalid(format!("accuracy {} for {}/{}", c.accuracy, c.model_id, c.dataset_id)));
            }
        }
        Ok(l)
    }

    fn domain(&self, c: &CellAccuracy) -> Domain {
        self.datasets[c.dataset_id.as_str()].domain
    }

    fn model(&self, c: &CellAccuracy) -> &ModelInfo {
        self.models[c.model_id.as_str()]
    }
}

fn domain_means(cells: &[CellAccuracy], lookup: &Lookup, domain: Domain) -> BTreeMap<String, f64> {
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for c in cells.iter().filter(|c| lookup.domain(c) == domain) {
        let e = acc.entry(c.model_id.clone()).or_default();
        e.0 += c.accuracy;
        e.1 += 1;
    }
    acc.into_iter().map(|(m, (s, n))| (m, s / n as f64)).collect()
}

/// P1 to P3 from intact accuracies.
pub fn evaluate_behavioral_predictions(
    cells: &[CellAccuracy],
    models: &[ModelInfo],
    datasets: &[DatasetInfo],
    exec: Execution,
) -> Result<BehavioralReport> {
    let lookup = Lookup::new(cells, models, datasets)?;
    let mut warnings = Vec::new();
    let mut notes = vec![
        "P2 has no dataset effects (domain and dataset type are constant within a dataset); standard errors are clustered by dataset instead".to_string(),
    ];

    let tom = domain_means(cells, &lookup, Domain::Tom);
    let prag = domain_means(cells, &lookup, Domain::Pragmatics);
    let both: Vec<&String> = tom.keys().filter(|m| prag.contains_key(*m)).collect();
    if both.len() < 3 {
        return Err(Error::Precondition(format!(
            "{} models have both ToM and pragmatics accuracies; at least 3 are needed",
            both.len()
        )));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = both.iter().map(|m| (tom[*m], prag[*m])).unzip();
    let (r, p) = pearson_r(&x, &y)?;
    let p1 = CorrelationResult { r, p, n_models: both.len(), supported: r > 0.0 && p < 0.05 };

    for domain in [Domain::Tom, Domain::Pragmatics] {
        let ds: BTreeSet<&str> =
            cells.iter().filter(|c| lookup.domain(c) == domain).map(|c| c.dataset_id.as_str()).collect();
        if ds.len() == 1 {
            warnings.push(format!("domain {domain} has a single dataset; its random intercept is degenerate"));
        }
    }
    let p2 = domain_contrast(cells, &lookup)?;

    let syntax = domain_means(cells, &lookup, Domain::Syntax);
    let p3 = if syntax.is_empty() {
        notes.push("P3 needs syntax accuracies; none were given".into());
        None
    } else {
        let keep: Vec<&String> = both.iter().copied().filter(|m| syntax.contains_key(*m)).collect();
        if keep.len() < MIN_GAIN_MODELS {
            notes.push(format!(
                "P3 needs at least {MIN_GAIN_MODELS} models with all three domains; {} given",
                keep.len()
            ));
            None
        } else {
            match predictive_gain(&keep, &tom, &prag, &syntax, &lookup, exec) {
                Ok(g) => Some(g),
                Err(e) if e.is_statistical() => {
                    notes.push(format!("P3 not evaluated: {e}"));
                    None
                }
                Err(e) => return Err(e),
            }
        }
    };
    Ok(BehavioralReport { p1, p2, p3, warnings, notes })
}

fn domain_contrast(cells: &[CellAccuracy], lookup: &Lookup) -> Result<ContrastResult> {
    let rows: Vec<&CellAccuracy> =
        cells.iter().filter(|c| matches!(lookup.domain(c), Domain::Tom | Domain::Pragmatics)).collect();
    let n = rows.len();
    let col = |f: &dyn Fn(&CellAccuracy) -> String| -> Vec<String> { rows.iter().map(|c| f(c)).collect() };
    let frame = Frame::new(n)
        .factor("family", &col(&|c| lookup.model(c).family.clone()))?
        .factor("size", &col(&|c| lookup.model(c).size().to_string()))?
        .factor("model_type", &col(&|c| lookup.model(c).model_type.to_string()))?
        .factor("ds_type", &col(&|c| lookup.datasets[c.dataset_id.as_str()].ds_type.clone()))?
        .factor("domain", &col(&|c| lookup.domain(c).to_string()))?;
    let terms = [
        Term::Intercept,
        Term::factor("family"),
        Term::factor("size"),
        Term::factor("model_type"),
        Term::interaction("size", "model_type"),
        Term::factor("ds_type"),
        Term::factor("domain"),
    ];
    let acc: Vec<f64> = rows.iter().map(|c| c.accuracy).collect();
    let d = DesignMatrix::build(&frame, &terms, &smooth_response(&acc, n.max(2))?)?;
    let clusters: Vec<&str> = rows.iter().map(|c| c.dataset_id.as_str()).collect();
    let fit = cluster_robust(&d, &beta_regression_fit(&d)?, &clusters)?;
    let tom = d.encode(&RowSpec::new().level("domain", Domain::Tom.as_str()))?;
    let prag = d.encode(&RowSpec::new().level("domain", Domain::Pragmatics.as_str()))?;
    let w: Vec<f64> = tom.iter().zip(&prag).map(|(a, b)| a - b).collect();
    contrast(&fit, "P2", &w, Direction::CoversZero)
}

fn predictive_gain(
    models: &[&String],
    tom: &BTreeMap<String, f64>,
    prag: &BTreeMap<String, f64>,
    syntax: &BTreeMap<String, f64>,
    lookup: &Lookup,
    exec: Execution,
) -> Result<GainResult> {
    let n = models.len();
    let info = |m: &String| lookup.models[m.as_str()];
    let sizes: Vec<String> = models.iter().map(|m| info(m).size().to_string()).collect();
    let types: Vec<String> = models.iter().map(|m| info(m).model_type.to_string()).collect();
    let frame = Frame::new(n)
        .factor("size", &sizes)?
        .factor("model_type", &types)?
        .numeric("syntax_accuracy", &models.iter().map(|m| syntax[*m]).collect::<Vec<_>>())?
        .numeric("tom_accuracy", &models.iter().map(|m| tom[*m]).collect::<Vec<_>>())?;
    let y = smooth_response(&models.iter().map(|m| prag[*m]).collect::<Vec<_>>(), n.max(2))?;
    let base = [Term::Intercept, Term::factor("size"), Term::factor("model_type")];
    let with = |extra: &str| {
        let mut t = base.to_vec();
        t.push(Term::numeric(extra));
        DesignMatrix::build(&frame, &t, &y)
    };
    let comparison = loo_compare(&with("syntax_accuracy")?, &with("tom_accuracy")?, exec)?;
    Ok(GainResult { comparison, supported: comparison.elpd_diff > Z95 * comparison.se_diff })
}

/// Base design for the ATOMS search: ToM cells regressed on family, size,
/// model type and dataset type. Returns the flags row-aligned with it.
pub fn atoms_design(
    cells: &[CellAccuracy],
    models: &[ModelInfo],
    datasets: &[DatasetInfo],
) -> Result<(DesignMatrix, Vec<Atoms>)> {
    let lookup = Lookup::new(cells, models, datasets)?;
    let rows: Vec<&CellAccuracy> = cells.iter().filter(|c| lookup.domain(c) == Domain::Tom).collect();
    let mut flags = Vec::with_capacity(rows.len());
    for c in &rows {
        let a = lookup.datasets[c.dataset_id.as_str()]
            .atoms
            .ok_or_else(|| Error::Missing(format!("ATOMS annotation for dataset {}", c.dataset_id)))?;
        flags.push(a);
    }
    let n = rows.len();
    let col = |f: &dyn Fn(&CellAccuracy) -> String| -> Vec<String> { rows.iter().map(|c| f(c)).collect() };
    let frame = Frame::new(n)
        .factor("family", &col(&|c| lookup.model(c).family.clone()))?
        .factor("size", &col(&|c| lookup.model(c).size().to_string()))?
        .factor("model_type", &col(&|c| lookup.model(c).model_type.to_string()))?
        .factor("ds_type", &col(&|c| lookup.datasets[c.dataset_id.as_str()].ds_type.clone()))?;
    let terms = [
        Term::Intercept,
        Term::factor("family"),
        Term::factor("size"),
        Term::factor("model_type"),
        Term::factor("ds_type"),
    ];
    let acc: Vec<f64> = rows.iter().map(|c| c.accuracy).collect();
    let d = DesignMatrix::build(&frame, &terms, &smooth_response(&acc, n.max(2))?)?;
    Ok((d, flags))
}
