// SPDX-License-Identifier: MIT OR Apache-2.0

//! On-disk fixtures for driving the `netloc` binary.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use netloc_core::effects::CellAccuracy;
use netloc_core::localizer::STANDARD_SUITES;
use netloc_core::store::{
    tensor_dir, write_accuracy_log, write_activation_tensor, write_jsonl, write_suite, AccuracyRecord, Condition,
    DatasetInfo, UnitId,
};
use netloc_core::synthetic::{
    generate_behavior, generate_effect_log, generate_planted_suite, BehaviorSpec, EffectLogSpec, PlantSpec,
};

pub use netloc_core::synthetic::SYNTHETIC_MODEL as MODEL;

pub struct Fixture {
    pub dir: tempfile::TempDir,
}

impl Fixture {
    pub fn root(&self) -> &Path {
        self.dir.path()
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    /// Runs the binary from the fixture root with `--masks` and `--reports`
    /// under the relative directory `out`, so written paths do not depend
    /// on where the fixture lives.
    pub fn run(&self, out: &str, args: &[&str]) -> Output {
        netloc()
            .current_dir(self.root())
            .args(["--suites", "suites", "--activations", "activations"])
            .arg("--masks")
            .arg(Path::new(out).join("masks"))
            .arg("--reports")
            .arg(Path::new(out).join("reports"))
            .args(args)
            .output()
            .expect("run netloc")
    }
}

pub fn netloc() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_netloc"));
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("NETLOC_")) {
        cmd.env_remove(k);
    }
    cmd
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Per-item records reproducing each cell's accuracy.
pub fn records_from_cells(cells: &[CellAccuracy], datasets: &[DatasetInfo]) -> Vec<AccuracyRecord> {
    let mut out = Vec::new();
    for c in cells {
        let domain = datasets.iter().find(|d| d.dataset_id == c.dataset_id).expect("dataset").domain;
        let correct = (c.accuracy * c.n_items as f64).round() as usize;
        for i in 0..c.n_items {
            out.push(AccuracyRecord {
                model_id: c.model_id.clone(),
                dataset_id: c.dataset_id.clone(),
                domain,
                condition: Condition::Intact,
                localizer_name: String::new(),
                item_id: format!("item-{i:04}"),
                correct: i < correct,
            });
        }
    }
    out
}

/// Four standard suites sharing six planted units (the last two paired), an
/// ablation log and a behavioral log with ATOMS annotations.
pub fn standard_fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    std::fs::create_dir_all(root.join("suites")).unwrap();
    for (i, name) in STANDARD_SUITES.iter().enumerate() {
        let paired = i >= 2;
        let sets = if paired { 1 } else { 2 };
        let mut spec = PlantSpec::new(4, 64, 40, 2.0, 100 + i as u64);
        spec.planted_units =
            [(0, 3), (1, 17), (1, 40), (2, 8), (3, 33), (3, 63)].map(|(l, k)| UnitId::new(l, k)).to_vec();
        let mut planted = generate_planted_suite(&spec, sets, sets).unwrap();
        planted.suite.name = (*name).into();
        planted.suite.paired = paired;
        write_suite(&planted.suite, &root.join("suites").join(format!("{name}.jsonl"))).unwrap();
        for t in planted.tensors.iter() {
            let mut t = t.clone();
            t.suite_name = (*name).into();
            let dir = tensor_dir(&root.join("activations"), &t.model_id, name, &t.condition_name);
            write_activation_tensor(&t, &dir).unwrap();
        }
    }

    let log = generate_effect_log(&EffectLogSpec::new(0.8, 0.15, 0.15, 0.0, 0.03, 6, 4, 11)).unwrap();
    write_accuracy_log(&root.join("ablation.jsonl"), &log.records).unwrap();
    write_jsonl(&root.join("ablation_models.jsonl"), &log.models).unwrap();

    let mut spec = BehaviorSpec::new(6, 12, true, 12);
    spec.atoms = true;
    spec.percepts_effect = 1.5;
    let data = generate_behavior(&spec).unwrap();
    write_accuracy_log(&root.join("behavior.jsonl"), &records_from_cells(&data.cells, &data.datasets)).unwrap();
    write_jsonl(&root.join("models.jsonl"), &data.models).unwrap();
    write_jsonl(&root.join("datasets.jsonl"), &data.datasets).unwrap();
    Fixture { dir }
}
