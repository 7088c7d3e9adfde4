// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use netloc_core::effects::{
    atoms_csv, atoms_design, atoms_subset_search, cell_accuracies, evaluate_ablation_predictions,
    evaluate_behavioral_predictions, ContrastResult, ABLATION_PREDICTIONS,
};
use netloc_core::generalization::{kfold_generalization, GeneralizationOptions};
use netloc_core::localizer::{
    enumerate_localizers, layer_distribution, layer_distribution_csv, localize as select_masks, LocalizerConfig,
    StatOptions, LOCALIZER_NAMES, STANDARD_SUITES,
};
use netloc_core::stats::FdrMethod;
use netloc_core::store::{
    read_accuracy_log, read_datasets, read_mask, read_models, read_suite, write_mask, ActivationSet, Condition,
    LocalizerSuite, Method, SelectionKind, SubnetworkMask,
};
use netloc_core::Execution;
use serde::Serialize;

use crate::config::RunConfig;
use crate::oracles::{run_all, Scale};
use crate::{BenchScale, Failure};

pub const TARGET_MASK_FILE: &str = "target.jsonl";
pub const LEAST_ACTIVE_MASK_FILE: &str = "least_active.jsonl";
pub const PLAN_FILE: &str = "ablation_plan.jsonl";

/// Text for stdout, plus a failure to report after printing it.
#[derive(Debug, Default)]
pub struct Output {
    pub text: String,
    pub failure: Option<Failure>,
}

impl From<String> for Output {
    fn from(text: String) -> Self {
        Output { text, failure: None }
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Failure::Data(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))
}

fn fdr_name(f: FdrMethod) -> &'static str {
    match f {
        FdrMethod::BhModelWide => "bh-model-wide",
        FdrMethod::BhPerLayer => "bh-per-layer",
        FdrMethod::Uncorrected => "uncorrected",
    }
}

/// Every `*.jsonl` suite file in `dir`, in file-name order.
pub fn load_suites(dir: &Path) -> Result<Vec<LocalizerSuite>> {
    let entries = fs::read_dir(dir).map_err(|e| Failure::Data(format!("suite directory {}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    let suites = paths.iter().map(|p| read_suite(p)).collect::<netloc_core::Result<Vec<_>>>()?;
    Ok(suites)
}

/// One of the eight standard localizers, or `<suite>-simple` /
/// `<suite>-conjunctive` for any loaded suite.
pub fn resolve_localizer(name: &str, suites: &[LocalizerSuite]) -> Result<LocalizerConfig> {
    let have_standard = STANDARD_SUITES.iter().all(|n| suites.iter().any(|s| s.name == *n));
    if have_standard {
        if let Some(c) = enumerate_localizers(suites)?.into_iter().find(|c| c.name == name) {
            return Ok(c);
        }
    }
    if let Some((suite, method)) = name.rsplit_once('-') {
        let method = match method {
            "simple" => Some(Method::Simple),
            "conjunctive" => Some(Method::Conjunctive),
            _ => None,
        };
        if let (Some(method), Some(s)) = (method, suites.iter().find(|s| s.name == suite)) {
            let mut cfg = LocalizerConfig::for_suite(name, s, method);
            // only the paired suites' simple localizers use paired tests
            cfg.paired &= method == Method::Simple;
            return Ok(cfg);
        }
    }
    if LOCALIZER_NAMES.contains(&name) {
        let missing: Vec<&str> =
            STANDARD_SUITES.iter().copied().filter(|n| !suites.iter().any(|s| s.name == *n)).collect();
        return Err(Failure::Data(format!("localizer {name} needs suites that are missing: {}", missing.join(", "))));
    }
    Err(Failure::Usage(format!(
        "unknown localizer {name:?}; expected one of {} or <suite>-simple / <suite>-conjunctive",
        LOCALIZER_NAMES.join(", ")
    )))
}

fn stat_options(cfg: &RunConfig) -> StatOptions {
    StatOptions {
        alpha: cfg.alpha,
        fdr: cfg.fdr,
        conjunction_p: cfg.conjunction_p,
        cross_suite_pairs: cfg.cross_suite_pairs,
        exec: Execution::Parallel,
    }
}

fn load_inputs(cfg: &RunConfig, localizer: &str, model: &str) -> Result<(LocalizerConfig, ActivationSet)> {
    let suites = load_suites(&cfg.suites)?;
    let lcfg = resolve_localizer(localizer, &suites)?;
    let tensors = ActivationSet::load(&cfg.activations, model, &lcfg.condition_keys())?;
    Ok((lcfg, tensors))
}

pub fn mask_dir(cfg: &RunConfig, model: &str, localizer: &str) -> PathBuf {
    cfg.masks.join(model).join(localizer)
}

pub fn report_dir(cfg: &RunConfig, model: &str, localizer: &str) -> PathBuf {
    cfg.reports.join(model).join(localizer)
}

pub fn localize(cfg: &RunConfig, localizer: &str, model: &str) -> Result<Output> {
    let (lcfg, tensors) = load_inputs(cfg, localizer, model)?;
    let loc = select_masks(&tensors, &lcfg, &stat_options(cfg), cfg.cap_fraction)?;
    let masks = mask_dir(cfg, model, localizer);
    fs::create_dir_all(&masks).map_err(|e| Failure::Data(format!("cannot create {}: {e}", masks.display())))?;
    write_mask(&loc.target, &masks.join(TARGET_MASK_FILE))?;
    write_mask(&loc.control, &masks.join(LEAST_ACTIVE_MASK_FILE))?;

    let mut text = String::new();
    let stats = &loc.stats;
    let _ = writeln!(
        text,
        "localizer {localizer} ({:?}{}) on {model}",
        lcfg.method,
        if lcfg.paired { ", paired" } else { "" }
    );
    let _ = writeln!(
        text,
        "{} units in {} layers; {} significant ({}, alpha {})",
        stats.n_units(),
        stats.n_layers,
        stats.n_significant(),
        fdr_name(cfg.fdr),
        cfg.alpha
    );
    let _ = writeln!(
        text,
        "target mask {} units (cap {}); least-active mask {} units",
        loc.target.len(),
        loc.target.capacity(),
        loc.control.len()
    );
    for row in layer_distribution(&loc.target).iter().filter(|r| r.count > 0) {
        let _ = writeln!(text, "  layer {:>3}: {:>5} units ({:.3}%)", row.layer, row.count, row.percent);
    }
    let reports = report_dir(cfg, model, localizer);
    write_file(&reports.join("layer_distribution.csv"), &layer_distribution_csv(&[&loc.target, &loc.control]))?;
    write_file(&reports.join("localize.txt"), &text)?;
    Ok(text.into())
}

pub fn crossval(
    cfg: &RunConfig,
    localizer: &str,
    model: &str,
    min_folds: Option<usize>,
    per_unit: bool,
) -> Result<Output> {
    if min_folds.is_some_and(|m| m > cfg.k_folds) {
        return Err(Failure::Usage(format!("--min-folds exceeds k-folds ({})", cfg.k_folds)));
    }
    let (lcfg, tensors) = load_inputs(cfg, localizer, model)?;
    let opts = GeneralizationOptions { stat: stat_options(cfg), cap_fraction: cfg.cap_fraction, per_unit };
    let report = kfold_generalization(&tensors, &lcfg, cfg.k_folds, cfg.seed, &opts)?;
    let n = report.n_significant();
    let mut text = format!("{localizer} on {model}: {n}/{} folds significant\n", report.k);
    for f in report.folds.iter().filter(|f| f.diagnostic.is_some()) {
        let _ = writeln!(text, "  fold {}: {}", f.fold_index, f.diagnostic.as_deref().unwrap_or_default());
    }
    let reports = report_dir(cfg, model, localizer);
    write_file(&reports.join("crossval.csv"), &report.to_csv())?;
    write_file(&reports.join("crossval.txt"), &text)?;
    let failure = min_folds
        .filter(|m| n < *m)
        .map(|m| Failure::Statistical(format!("{n} significant folds, fewer than the required {m}")));
    Ok(Output { text, failure })
}

#[derive(Debug, Serialize)]
struct PlannedRun {
    model_id: String,
    condition: Condition,
    localizer: String,
    mask: Option<String>,
    mask_size: usize,
}

fn check_pair(target: &SubnetworkMask, control: &SubnetworkMask, model: &str) -> Result<()> {
    let name = &target.localizer_name;
    if target.selection_kind != SelectionKind::Target || control.selection_kind != SelectionKind::LeastActive {
        return Err(Failure::Data(format!("{name}: mask files hold the wrong selection kinds")));
    }
    if target.model_id != model || control.model_id != model {
        return Err(Failure::Data(format!("{name}: masks belong to another model")));
    }
    if target.len() != control.len() {
        return Err(Failure::Data(format!(
            "{name}: target mask has {} units but the least-active mask has {}",
            target.len(),
            control.len()
        )));
    }
    if !target.is_disjoint(control) {
        return Err(Failure::Data(format!("{name}: target and least-active masks overlap")));
    }
    Ok(())
}

pub fn ablate_plan(cfg: &RunConfig, model: &str, localizers: &[String], out: Option<PathBuf>) -> Result<Output> {
    let root = cfg.masks.join(model);
    let names: Vec<String> = if localizers.is_empty() {
        let entries =
            fs::read_dir(&root).map_err(|e| Failure::Data(format!("mask directory {}: {e}", root.display())))?;
        let mut v: Vec<String> = entries
            .filter_map(|e| e.ok())
            .filter(|e| e.path().join(TARGET_MASK_FILE).exists())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        v.sort();
        v
    } else {
        localizers.to_vec()
    };
    if names.is_empty() {
        return Err(Failure::Data(format!("no masks under {}", root.display())));
    }
    let mut runs = vec![PlannedRun {
        model_id: model.into(),
        condition: Condition::Intact,
        localizer: String::new(),
        mask: None,
        mask_size: 0,
    }];
    for name in &names {
        let dir = root.join(name);
        let (tpath, cpath) = (dir.join(TARGET_MASK_FILE), dir.join(LEAST_ACTIVE_MASK_FILE));
        let (target, control) = (read_mask(&tpath)?, read_mask(&cpath)?);
        check_pair(&target, &control, model)?;
        for (condition, path) in [(Condition::TargetAblation, &tpath), (Condition::ControlAblation, &cpath)] {
            runs.push(PlannedRun {
                model_id: model.into(),
                condition,
                localizer: name.clone(),
                mask: Some(path.display().to_string()),
                mask_size: target.len(),
            });
        }
    }
    let mut body = String::new();
    for r in &runs {
        body.push_str(&serde_json::to_string(r).map_err(|e| Failure::Data(e.to_string()))?);
        body.push('\n');
    }
    let path = out.unwrap_or_else(|| root.join(PLAN_FILE));
    write_file(&path, &body)?;
    Ok(format!("{} runs for {model} over {} localizers written to {}\n", runs.len(), names.len(), path.display())
        .into())
}

pub fn effects(cfg: &RunConfig, log: &Path, models: &Path, datasets: Option<&Path>, atoms: bool) -> Result<Output> {
    let records = read_accuracy_log(log)?;
    let models = read_models(models)?;
    let out = cfg.reports.join("effects");
    let mut text = String::new();
    let mut ran = false;
    if records.iter().any(|r| r.condition != Condition::Intact) {
        let report = evaluate_ablation_predictions(&records, &models)?;
        write_file(&out.join("ablation_contrasts.csv"), &report.contrast_csv())?;
        write_file(&out.join("raw_effects.csv"), &report.raw_effects_csv())?;
        write_file(&out.join("ablation_verdict.txt"), &report.verdict())?;
        text.push_str("ablation predictions\n");
        text.push_str(&report.verdict());
        ran = true;
    }
    if let Some(dpath) = datasets {
        let datasets = read_datasets(dpath)?;
        let cells = cell_accuracies(&records);
        let report = evaluate_behavioral_predictions(&cells, &models, &datasets, Execution::Parallel)?;
        write_file(&out.join("behavioral.csv"), &report.csv())?;
        write_file(&out.join("behavioral_verdict.txt"), &report.verdict())?;
        text.push_str("behavioral predictions\n");
        text.push_str(&report.verdict());
        if atoms {
            let (base, flags) = atoms_design(&cells, &models, &datasets)?;
            let ranked = atoms_subset_search(&base, &flags, Execution::Parallel)?;
            write_file(&out.join("atoms_ranking.csv"), &atoms_csv(&ranked))?;
            text.push_str("ATOMS subsets, best first\n");
            for m in ranked.iter().take(5) {
                let _ =
                    writeln!(text, "  {}. {} (elpd diff {:.2}, se {:.2})", m.rank, m.label(), m.elpd_diff, m.se_diff);
            }
        }
        ran = true;
    }
    if !ran {
        return Err(Failure::Usage(
            "the log has no ablation runs and no --datasets were given; nothing to analyze".into(),
        ));
    }
    Ok(text.into())
}

pub fn bench(cfg: &RunConfig, scale: BenchScale) -> Result<Output> {
    let scale = match scale {
        BenchScale::Quick => Scale::QUICK,
        BenchScale::Full => Scale::FULL,
    };
    // empty masks on null data are expected here
    let level = log::max_level();
    log::set_max_level(log::LevelFilter::Error);
    let outcomes = run_all(&scale);
    log::set_max_level(level);
    let width = outcomes.iter().map(|o| o.name.len()).max().unwrap_or(0);
    let mut text = String::new();
    let mut csv = String::from("check,passed,detail\n");
    for o in &outcomes {
        let _ = writeln!(text, "{:<width$}  {}  {}", o.name, if o.passed { "PASS" } else { "FAIL" }, o.detail);
        let _ = writeln!(csv, "{},{},\"{}\"", o.name, o.passed, o.detail);
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    let _ = writeln!(text, "{}/{} checks passed", outcomes.len() - failed, outcomes.len());
    write_file(&cfg.reports.join("bench.csv"), &csv)?;
    let failure = (failed > 0).then(|| Failure::Statistical(format!("{failed} bench checks failed")));
    Ok(Output { text, failure })
}

type Row = BTreeMap<String, String>;

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Row>)> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap_or_default().split(',').map(str::to_owned).collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, l)| {
            let cells: Vec<&str> = l.split(',').collect();
            if cells.len() != header.len() {
                return Err(Failure::Data(format!(
                    "{} line {}: {} fields, expected {}",
                    path.display(),
                    i + 2,
                    cells.len(),
                    header.len()
                )));
            }
            Ok(header.iter().cloned().zip(cells.into_iter().map(str::to_owned)).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((header, rows))
}

fn render_contrasts(rows: &[Row], out: &mut String) {
    for r in rows {
        let name = r["contrast"].as_str();
        let text = ABLATION_PREDICTIONS.iter().find(|(n, _)| *n == name).map_or("", |(_, t)| *t);
        let verdict = if r["supported"] == "true" { "supported" } else { "not supported" };
        let _ = writeln!(
            out,
            "{name} {verdict}: {text} (estimate {}, 95% CI [{}, {}])",
            r["estimate"], r["ci_low"], r["ci_high"]
        );
    }
}

fn render_folds(rows: &[Row], out: &mut String) {
    let mut by_loc: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for r in rows {
        let e = by_loc.entry(r["localizer"].as_str()).or_default();
        e.0 += (r["significant"] == "true") as usize;
        e.1 += 1;
    }
    for (loc, (sig, k)) in by_loc {
        let _ = writeln!(out, "{loc}: {sig}/{k} folds significant");
    }
}

/// Renders report CSVs written by the other subcommands as text.
pub fn report(files: &[PathBuf]) -> Result<Output> {
    let mut text = String::new();
    for path in files {
        let (header, rows) = read_table(path)?;
        let _ = writeln!(text, "== {}", path.display());
        let first = header.first().map(String::as_str).unwrap_or_default();
        match first {
            "contrast" if header.join(",") == ContrastResult::CSV_HEADER => render_contrasts(&rows, &mut text),
            "localizer" if header.contains(&"fold".to_string()) => render_folds(&rows, &mut text),
            "prediction" => {
                for r in &rows {
                    let verdict = if r["supported"] == "true" { "supported" } else { "not supported" };
                    let _ = writeln!(text, "{} {verdict}: {} = {}", r["prediction"], r["statistic"], r["value"]);
                }
            }
            "rank" => {
                for r in rows.iter().take(10) {
                    let _ = writeln!(text, "{}. {} (elpd diff {})", r["rank"], r["model"], r["elpd_diff"]);
                }
            }
            "model_id" if header.contains(&"layer".to_string()) => {
                for r in rows.iter().filter(|r| r["count"] != "0") {
                    let _ = writeln!(
                        text,
                        "{} {} layer {}: {} units ({}%)",
                        r["localizer"], r["selection_kind"], r["layer"], r["count"], r["percent"]
                    );
                }
            }
            _ => return Err(Failure::Data(format!("{}: not a recognized report table", path.display()))),
        }
    }
    Ok(text.into())
}
