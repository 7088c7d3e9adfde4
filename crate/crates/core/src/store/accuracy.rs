// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fmt;
use std::fs::OpenOptions;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::jsonl::{read_jsonl, write_jsonl, write_lines};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Tom,
    Pragmatics,
    Syntax,
}

impl Domain {
    pub const ALL: [Domain; 3] = [Domain::Tom, Domain::Pragmatics, Domain::Syntax];

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Tom => "tom",
            Domain::Pragmatics => "pragmatics",
            Domain::Syntax => "syntax",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Intact,
    TargetAblation,
    ControlAblation,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Intact => "intact",
            Condition::TargetAblation => "target_ablation",
            Condition::ControlAblation => "control_ablation",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One scored evaluation item under one (model, dataset, condition,
/// localizer) cell. `localizer_name` is empty for intact runs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AccuracyRecord {
    pub model_id: String,
    pub dataset_id: String,
    pub domain: Domain,
    pub condition: Condition,
    #[serde(default)]
    pub localizer_name: String,
    pub item_id: String,
    pub correct: bool,
}

impl AccuracyRecord {
    pub fn validate(&self) -> Result<()> {
        let intact = self.condition == Condition::Intact;
        if intact != self.localizer_name.is_empty() {
            return Err(Error::Invalid(format!(
                "record {}/{}/{}: localizer_name must be empty exactly for intact runs",
                self.model_id, self.dataset_id, self.item_id
            )));
        }
        Ok(())
    }
}

/// Appends records to a log, creating it if needed.
pub fn append_accuracy_log(path: &Path, records: &[AccuracyRecord]) -> Result<()> {
    for r in records {
        r.validate()?;
    }
    let file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_lines(&mut w, records).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_accuracy_log(path: &Path, records: &[AccuracyRecord]) -> Result<()> {
    for r in records {
        r.validate()?;
    }
    write_jsonl(path, records)
}

pub fn read_accuracy_log(path: &Path) -> Result<Vec<AccuracyRecord>> {
    let records: Vec<AccuracyRecord> = read_jsonl(path)?;
    for r in &records {
        r.validate()?;
    }
    Ok(records)
}
