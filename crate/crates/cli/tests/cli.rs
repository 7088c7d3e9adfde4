// SPDX-License-Identifier: MIT OR Apache-2.0

mod common;

use std::fs;

use common::{netloc, standard_fixture, stderr, stdout, MODEL};
use netloc_core::localizer::LOCALIZER_NAMES;
use netloc_core::store::{read_mask, SelectionKind};

#[test]
fn localize_then_plan_then_report() {
    let fx = standard_fixture();
    for loc in ["GameBeliefs-simple", "LB+CI-conjunctive"] {
        let o = fx.run("out", &["localize", "--localizer", loc, "--model", MODEL]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("target mask"), "{}", stdout(&o));
        let dir = fx.path("out/masks").join(MODEL).join(loc);
        let target = read_mask(&dir.join("target.jsonl")).unwrap();
        let control = read_mask(&dir.join("least_active.jsonl")).unwrap();
        assert_eq!(target.selection_kind, SelectionKind::Target);
        assert!(!target.is_empty() && target.len() == control.len());
        assert!(target.is_disjoint(&control));
    }

    let o = fx.run("out", &["ablate-plan", "--model", MODEL]);
    assert!(o.status.success(), "{}", stderr(&o));
    let plan = fs::read_to_string(fx.path("out/masks").join(MODEL).join("ablation_plan.jsonl")).unwrap();
    let runs: Vec<serde_json::Value> = plan.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(runs.len(), 5);
    assert_eq!(runs[0]["condition"], "intact");
    assert_eq!(runs.iter().filter(|r| r["condition"] == "control_ablation").count(), 2);

    let csv = fx.path("out/reports").join(MODEL).join("GameBeliefs-simple").join("layer_distribution.csv");
    let o = fx.run("out", &["report", csv.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("GameBeliefs-simple target layer"), "{}", stdout(&o));
}

#[test]
fn crossval_and_min_folds() {
    let fx = standard_fixture();
    let args = ["crossval", "--localizer", "MoralIntent-simple", "--model", MODEL, "--k-folds", "5"];
    let o = fx.run("out", &args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("5/5 folds significant"), "{}", stdout(&o));

    let csv = fx.path("out/reports").join(MODEL).join("MoralIntent-simple").join("crossval.csv");
    let o = fx.run("out", &["report", csv.to_str().unwrap()]);
    assert!(stdout(&o).contains("MoralIntent-simple: 5/5 folds significant"), "{}", stdout(&o));

    // nothing survives this alpha, so no fold can be significant
    let mut strict = args.to_vec();
    strict.extend(["--alpha", "1e-300", "--min-folds", "4"]);
    let o = fx.run("out", &strict);
    assert_eq!(o.status.code(), Some(4), "{}{}", stdout(&o), stderr(&o));
}

#[test]
fn unknown_localizer_is_a_usage_error() {
    let fx = standard_fixture();
    let o = fx.run("out", &["localize", "--localizer", "ToM-simple", "--model", MODEL]);
    assert_eq!(o.status.code(), Some(2));
    for name in LOCALIZER_NAMES {
        assert!(stderr(&o).contains(name), "{}", stderr(&o));
    }
}

#[test]
fn data_problems_exit_3() {
    let fx = standard_fixture();
    let o = fx.run("out", &["localize", "--localizer", "All-simple", "--model", "other-model"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));

    let o = fx.run("out", &["ablate-plan", "--model", MODEL]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));

    let bogus = fx.path("bogus.csv");
    fs::write(&bogus, "a,b\n1,2\n").unwrap();
    let o = fx.run("out", &["report", bogus.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn usage_problems_exit_2() {
    let fx = standard_fixture();
    assert_eq!(netloc().arg("--bogus").output().unwrap().status.code(), Some(2));
    assert_eq!(netloc().arg("--help").output().unwrap().status.code(), Some(0));
    let o = fx.run("out", &["--alpha", "2", "bench"]);
    assert_eq!(o.status.code(), Some(2));
    let o = fx.run("out", &["effects", "--log", "behavior.jsonl", "--models", "models.jsonl", "--atoms"]);
    assert_eq!(o.status.code(), Some(2), "--atoms needs --datasets");
    let o = fx.run("out", &["effects", "--log", "behavior.jsonl", "--models", "models.jsonl"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn flags_beat_environment_beat_config_file() {
    let fx = standard_fixture();
    let cfg = fx.path("netloc.toml");
    fs::write(&cfg, "k_folds = 3\n").unwrap();
    let base = ["crossval", "--localizer", "GameBeliefs-simple", "--model", MODEL];
    let with_cfg = |extra: &[&str], env: Option<&str>| {
        let mut cmd = netloc();
        cmd.current_dir(fx.root()).args(["--suites", "suites", "--activations", "activations"]);
        cmd.args(["--masks", "out/masks", "--reports", "out/reports", "--config", cfg.to_str().unwrap()]);
        if let Some(k) = env {
            cmd.env("NETLOC_K_FOLDS", k);
        }
        stdout(&cmd.args(base).args(extra).output().unwrap())
    };
    assert!(with_cfg(&[], None).contains("/3 folds"));
    assert!(with_cfg(&[], Some("4")).contains("/4 folds"));
    assert!(with_cfg(&["--k-folds", "6"], Some("4")).contains("/6 folds"));
}

#[test]
fn effects_writes_both_analyses() {
    let fx = standard_fixture();
    let o = fx.run("out", &["effects", "--log", "ablation.jsonl", "--models", "ablation_models.jsonl"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("P3.2 supported"), "{}", stdout(&o));
    let contrasts = fx.path("out/reports/effects/ablation_contrasts.csv");
    let o = fx.run("out", &["report", contrasts.to_str().unwrap()]);
    assert!(stdout(&o).contains("P1.1 supported"), "{}", stdout(&o));

    let args = ["effects", "--log", "behavior.jsonl", "--models", "models.jsonl", "--datasets", "datasets.jsonl"];
    let o = fx.run("out", &[&args[..], &["--atoms"]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("P1 supported"), "{}", stdout(&o));
    let ranking = fs::read_to_string(fx.path("out/reports/effects/atoms_ranking.csv")).unwrap();
    assert_eq!(ranking.lines().count(), 129);
    assert!(ranking.lines().nth(1).unwrap().contains("percepts"), "{ranking}");
}
