// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use super::beta::{beta_regression_fit, RegressionFit};
use super::contrast::{contrast, ContrastResult, Direction};
use super::correlation::smooth_response;
use super::design::{DesignMatrix, Frame, RowSpec, Term};
use crate::error::{Error, Result};
use crate::store::{AccuracyRecord, Condition, Domain, ModelInfo};

pub const INTACT_LEVEL: &str = "intact";

/// The six ablation predictions, in report order.
pub const ABLATION_PREDICTIONS: [(&str, &str); 6] = [
    ("P1.1", "ToM-network ablation decreases ToM performance"),
    ("P1.2", "causal effect on ToM is larger for ToM ablation than for control ablation"),
    ("P2.1", "ToM-network ablation decreases pragmatics performance"),
    ("P2.2", "causal effect on pragmatics is larger for ToM ablation than for control ablation"),
    ("P3.1", "ToM-network ablation does not decrease syntax performance"),
    ("P3.2", "causal effect is larger on pragmatics than on syntax"),
];

fn ablation_level(condition: Condition, localizer: &str) -> String {
    match condition {
        Condition::Intact => INTACT_LEVEL.into(),
        Condition::TargetAblation => format!("target:{localizer}"),
        Condition::ControlAblation => format!("control:{localizer}"),
    }
}

/// Observed accuracies of one model, dataset and localizer.
#[derive(Debug, Clone, PartialEq)]
pub struct RawEffect {
    pub model_id: String,
    pub dataset_id: String,
    pub domain: Domain,
    pub localizer_name: String,
    pub intact: f64,
    pub target: f64,
    pub control: f64,
}

impl RawEffect {
    /// Accuracy lost under target ablation.
    pub fn target_effect(&self) -> f64 {
        self.intact - self.target
    }

    pub fn control_effect(&self) -> f64 {
        self.intact - self.control
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub contrasts: Vec<ContrastResult>,
    pub raw_effects: Vec<RawEffect>,
    pub fit: Option<RegressionFit>,
    pub n_cells: usize,
    pub localizers: Vec<String>,
    pub notes: Vec<String>,
}

impl AblationReport {
    pub fn supported(&self, name: &str) -> bool {
        self.contrasts.iter().any(|c| c.name == name && c.supported)
    }

    pub fn contrast_csv(&self) -> String {
        let mut out = format!("{}\n", ContrastResult::CSV_HEADER);
        for c in &self.contrasts {
            out.push_str(&c.csv_row());
            out.push('\n');
        }
        out
    }

    pub fn raw_effects_csv(&self) -> String {
        let mut out =
            String::from("model_id,dataset_id,domain,localizer,intact,target,control,target_effect,control_effect\n");
        for r in &self.raw_effects {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
                r.model_id,
                r.dataset_id,
                r.domain,
                r.localizer_name,
                r.intact,
                r.target,
                r.control,
                r.target_effect(),
                r.control_effect()
            );
        }
        out
    }

    /// Plain-text verdict block.
    pub fn verdict(&self) -> String {
        let mut out = String::new();
        for (c, (_, text)) in self.contrasts.iter().zip(ABLATION_PREDICTIONS) {
            let _ = writeln!(
                out,
                "{} {}: {} (logit estimate {:.3}, 95% CI [{:.3}, {:.3}])",
                c.name,
                if c.supported { "supported" } else { "not supported" },
                text,
                c.estimate,
                c.ci_low,
                c.ci_high
            );
        }
        let supported: Vec<&str> = self.contrasts.iter().filter(|c| c.supported).map(|c| c.name.as_str()).collect();
        let _ = writeln!(out, "supported: {}", if supported.is_empty() { "none".into() } else { supported.join(", ") });
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }
}

type CellKey = (String, String, String);

struct Cell {
    domain: Domain,
    correct: usize,
    total: usize,
}

/// Fits `accuracy ~ model_type + model_size + ablation_localizer * domain`
/// to per-cell mean accuracies and evaluates the six predictions,
/// averaging over localizers.
pub fn evaluate_ablation_predictions(records: &[AccuracyRecord], models: &[ModelInfo]) -> Result<AblationReport> {
    if records.is_empty() {
        return Err(Error::Precondition("accuracy log is empty".into()));
    }
    let mut cells: BTreeMap<CellKey, Cell> = BTreeMap::new();
    let mut dataset_domain: BTreeMap<&str, Domain> = BTreeMap::new();
    let mut localizers = BTreeSet::new();
    for r in records {
        r.validate()?;
        if let Some(d) = dataset_domain.insert(&r.dataset_id, r.domain) {
            if d != r.domain {
                return Err(Error::Invalid(format!(
                    "dataset {} logged under domains {d} and {}",
                    r.dataset_id, r.domain
                )));
            }
        }
        if r.condition != Condition::Intact {
            localizers.insert(r.localizer_name.clone());
        }
        let key = (r.model_id.clone(), r.dataset_id.clone(), ablation_level(r.condition, &r.localizer_name));
        let cell = cells.entry(key).or_insert(Cell { domain: r.domain, correct: 0, total: 0 });
        cell.correct += r.correct as usize;
        cell.total += 1;
    }
    let localizers: Vec<String> = localizers.into_iter().collect();
    if localizers.is_empty() {
        return Err(Error::Missing("ablation records (log holds intact runs only)".into()));
    }
    let pairs: BTreeSet<(String, String)> = cells.keys().map(|(m, d, _)| (m.clone(), d.clone())).collect();
    let mut gaps = Vec::new();
    let needed: Vec<String> = std::iter::once(INTACT_LEVEL.to_string())
        .chain(localizers.iter().flat_map(|l| {
            [ablation_level(Condition::TargetAblation, l), ablation_level(Condition::ControlAblation, l)]
        }))
        .collect();
    for (m, d) in &pairs {
        for level in &needed {
            if !cells.contains_key(&(m.clone(), d.clone(), level.clone())) {
                gaps.push(format!("{m}/{d}/{level}"));
            }
        }
    }
    if !gaps.is_empty() {
        let shown = gaps.iter().take(20).cloned().collect::<Vec<_>>().join(", ");
        let more = if gaps.len() > 20 { format!(" and {} more", gaps.len() - 20) } else { String::new() };
        return Err(Error::Missing(format!("{} condition cells: {shown}{more}", gaps.len())));
    }
    let present: BTreeSet<Domain> = dataset_domain.values().copied().collect();
    let absent: Vec<&str> = Domain::ALL.iter().filter(|d| !present.contains(d)).map(|d| d.as_str()).collect();
    if !absent.is_empty() {
        return Err(Error::Missing(format!("datasets for domains {}", absent.join(", "))));
    }
    let model_info: BTreeMap<&str, &ModelInfo> = models.iter().map(|m| (m.model_id.as_str(), m)).collect();
    if let Some((m, _)) = pairs.iter().find(|(m, _)| !model_info.contains_key(m.as_str())) {
        return Err(Error::Missing(format!("model metadata for {m}")));
    }

    let raw_effects = raw_table(&cells, &pairs, &localizers);
    let n = cells.len();
    let mut types = Vec::with_capacity(n);
    let mut sizes = Vec::with_capacity(n);
    let mut levels = Vec::with_capacity(n);
    let mut domains = Vec::with_capacity(n);
    let mut acc = Vec::with_capacity(n);
    for ((m, _, level), cell) in &cells {
        let info = model_info[m.as_str()];
        types.push(info.model_type.to_string());
        sizes.push(info.size().to_string());
        levels.push(level.clone());
        domains.push(cell.domain.as_str().to_string());
        acc.push(cell.correct as f64 / cell.total as f64);
    }
    let y = smooth_response(&acc, n.max(2))?;
    let frame = Frame::new(n)
        .factor("model_type", &types)?
        .factor("model_size", &sizes)?
        .factor("ablation_localizer", &levels)?
        .factor("domain", &domains)?;
    let terms = [
        Term::Intercept,
        Term::factor("model_type"),
        Term::factor("model_size"),
        Term::factor("ablation_localizer"),
        Term::factor("domain"),
        Term::interaction("ablation_localizer", "domain"),
    ];
    let design = DesignMatrix::build(&frame, &terms, &y)?;
    let mut notes = vec![
        "P3.1 is a no-decrease reading: support means the interval does not exclude zero from above, not evidence that the effect is absent".to_string(),
    ];

    if y.iter().all(|v| *v == y[0]) {
        notes.push("all cell accuracies are identical; contrasts are reported as 0 with empty intervals".into());
        let contrasts =
            ABLATION_PREDICTIONS.iter().map(|(name, _)| ContrastResult::degenerate(name, direction_of(name))).collect();
        return Ok(AblationReport { contrasts, raw_effects, fit: None, n_cells: n, localizers, notes });
    }

    let fit = beta_regression_fit(&design)?;
    let weights = prediction_weights(&design, &localizers)?;
    let contrasts =
        weights.iter().map(|(name, w)| contrast(&fit, name, w, direction_of(name))).collect::<Result<Vec<_>>>()?;
    Ok(AblationReport { contrasts, raw_effects, fit: Some(fit), n_cells: n, localizers, notes })
}

fn direction_of(name: &str) -> Direction {
    if name == "P3.1" {
        Direction::NotGreater
    } else {
        Direction::Greater
    }
}

/// Contrast weights on the logit scale; model factors are averaged out.
fn prediction_weights(design: &DesignMatrix, localizers: &[String]) -> Result<Vec<(&'static str, Vec<f64>)>> {
    let row = |level: &str, domain: Domain| {
        design.encode(&RowSpec::new().level("ablation_localizer", level).level("domain", domain.as_str()))
    };
    let mean_over = |condition: Condition, domain: Domain| -> Result<Vec<f64>> {
        let mut acc = vec![0.0; design.n_cols()];
        for l in localizers {
            for (a, v) in acc.iter_mut().zip(row(&ablation_level(condition, l), domain)?) {
                *a += v;
            }
        }
        Ok(acc.into_iter().map(|v| v / localizers.len() as f64).collect())
    };
    let sub = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x - y).collect() };
    let intact = |d| row(INTACT_LEVEL, d);
    let target = |d| mean_over(Condition::TargetAblation, d);
    let control = |d| mean_over(Condition::ControlAblation, d);

    let ce_tom = sub(&intact(Domain::Tom)?, &target(Domain::Tom)?);
    let ce_prag = sub(&intact(Domain::Pragmatics)?, &target(Domain::Pragmatics)?);
    let ce_syntax = sub(&intact(Domain::Syntax)?, &target(Domain::Syntax)?);
    Ok(vec![
        ("P1.1", ce_tom),
        ("P1.2", sub(&control(Domain::Tom)?, &target(Domain::Tom)?)),
        ("P2.1", ce_prag.clone()),
        ("P2.2", sub(&control(Domain::Pragmatics)?, &target(Domain::Pragmatics)?)),
        ("P3.1", ce_syntax.clone()),
        ("P3.2", sub(&ce_prag, &ce_syntax)),
    ])
}

fn raw_table(
    cells: &BTreeMap<CellKey, Cell>,
    pairs: &BTreeSet<(String, String)>,
    localizers: &[String],
) -> Vec<RawEffect> {
    let acc = |m: &str, d: &str, level: String| {
        let c = &cells[&(m.to_string(), d.to_string(), level)];
        c.correct as f64 / c.total as f64
    };
    let mut out = Vec::new();
    for (m, d) in pairs {
        let intact = acc(m, d, INTACT_LEVEL.into());
        let domain = cells[&(m.clone(), d.clone(), INTACT_LEVEL.to_string())].domain;
        for l in localizers {
            out.push(RawEffect {
                model_id: m.clone(),
                dataset_id: d.clone(),
                domain,
                localizer_name: l.clone(),
                intact,
                target: acc(m, d, ablation_level(Condition::TargetAblation, l)),
                control: acc(m, d, ablation_level(Condition::ControlAblation, l)),
            });
        }
    }
    out
}
