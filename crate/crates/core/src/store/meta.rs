// SPDX-License-Identifier: MIT OR Apache-2.0

//! Model and dataset descriptors consumed by the regression analyses.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::accuracy::Domain;
use super::jsonl::read_jsonl;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelType {
    Base,
    FineTuned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeBucket {
    Small,
    Medium,
    Large,
}

impl ModelType {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelType::Base => "base",
            ModelType::FineTuned => "fine_tuned",
        }
    }
}

impl fmt::Display for ModelType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl SizeBucket {
    pub fn as_str(self) -> &'static str {
        match self {
            SizeBucket::Small => "small",
            SizeBucket::Medium => "medium",
            SizeBucket::Large => "large",
        }
    }
}

impl fmt::Display for SizeBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Small up to 8B parameters, medium up to 32B, large above.
pub fn size_bucket(params_billions: f64) -> SizeBucket {
    if params_billions <= 8.0 {
        SizeBucket::Small
    } else if params_billions <= 32.0 {
        SizeBucket::Medium
    } else {
        SizeBucket::Large
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub model_id: String,
    pub family: String,
    pub params_b: f64,
    pub model_type: ModelType,
}

impl ModelInfo {
    pub fn size(&self) -> SizeBucket {
        size_bucket(self.params_b)
    }
}

pub const ATOMS_NAMES: [&str; 7] =
    ["beliefs", "intentions", "desires", "emotions", "knowledge", "percepts", "non_literal"];

/// ATOMS annotation of an evaluation dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Atoms {
    pub beliefs: bool,
    pub intentions: bool,
    pub desires: bool,
    pub emotions: bool,
    pub knowledge: bool,
    pub percepts: bool,
    pub non_literal: bool,
}

impl Atoms {
    pub fn flags(&self) -> [bool; 7] {
        [self.beliefs, self.intentions, self.desires, self.emotions, self.knowledge, self.percepts, self.non_literal]
    }

    pub fn from_flags(f: [bool; 7]) -> Self {
        Atoms {
            beliefs: f[0],
            intentions: f[1],
            desires: f[2],
            emotions: f[3],
            knowledge: f[4],
            percepts: f[5],
            non_literal: f[6],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub dataset_id: String,
    pub domain: Domain,
    /// Whether instructions or answer options are in context.
    pub ds_type: String,
    #[serde(default)]
    pub atoms: Option<Atoms>,
}

pub fn read_models(path: &Path) -> Result<Vec<ModelInfo>> {
    read_jsonl(path)
}

pub fn read_datasets(path: &Path) -> Result<Vec<DatasetInfo>> {
    read_jsonl(path)
}
