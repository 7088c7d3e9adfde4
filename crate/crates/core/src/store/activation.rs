// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest";
pub const ACTIVATIONS_FILE: &str = "activations.bin";
pub const DEFAULT_PROVENANCE: &str = "transformer block output (post-residual), last prompt token";

const FORMAT: &str = "netloc-activations";
const DTYPE: &str = "f32le";

/// Coordinates of one unit: a block index and a position in its output
/// vector. Ordered by layer, then index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UnitId {
    pub layer: usize,
    pub index: usize,
}

impl UnitId {
    pub fn new(layer: usize, index: usize) -> Self {
        UnitId { layer, index }
    }

    pub fn flat(self, hidden_dim: usize) -> usize {
        self.layer * hidden_dim + self.index
    }

    pub fn from_flat(flat: usize, hidden_dim: usize) -> Self {
        UnitId { layer: flat / hidden_dim, index: flat % hidden_dim }
    }
}

impl fmt::Display for UnitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.layer, self.index)
    }
}

/// Last-token activations of one stimulus set, shape `[n_stimuli, L, d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTensor {
    pub model_id: String,
    pub suite_name: String,
    pub condition_name: String,
    pub stimulus_ids: Vec<String>,
    pub n_layers: usize,
    pub hidden_dim: usize,
    pub values: Vec<f32>,
    /// Free-text note on where the activations were read from.
    pub provenance: String,
}

impl ActivationTensor {
    pub fn n_stimuli(&self) -> usize {
        self.stimulus_ids.len()
    }

    pub fn n_units(&self) -> usize {
        self.n_layers * self.hidden_dim
    }

    /// All `L * d` values of one stimulus.
    pub fn row(&self, stimulus: usize) -> &[f32] {
        let u = self.n_units();
        &self.values[stimulus * u..(stimulus + 1) * u]
    }

    pub fn get(&self, stimulus: usize, unit: UnitId) -> f32 {
        self.values[stimulus * self.n_units() + unit.flat(self.hidden_dim)]
    }

    pub fn key(&self) -> ConditionKey {
        ConditionKey::new(&self.suite_name, &self.condition_name)
    }

    /// Keeps the listed stimuli, in the listed order.
    pub fn select_rows(&self, rows: &[usize]) -> ActivationTensor {
        let mut values = Vec::with_capacity(rows.len() * self.n_units());
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        ActivationTensor {
            stimulus_ids: rows.iter().map(|&r| self.stimulus_ids[r].clone()).collect(),
            values,
            ..self.clone_header()
        }
    }

    fn clone_header(&self) -> ActivationTensor {
        ActivationTensor {
            model_id: self.model_id.clone(),
            suite_name: self.suite_name.clone(),
            condition_name: self.condition_name.clone(),
            stimulus_ids: Vec::new(),
            n_layers: self.n_layers,
            hidden_dim: self.hidden_dim,
            values: Vec::new(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 || self.hidden_dim == 0 {
            return Err(Error::Invalid(format!(
                "tensor {}/{}: L={} and d={} must both be at least 1",
                self.suite_name, self.condition_name, self.n_layers, self.hidden_dim
            )));
        }
        let expected = self.n_stimuli() * self.n_units();
        if self.values.len() != expected {
            return Err(Error::Invalid(format!(
                "tensor {}/{}: {} values for shape [{}, {}, {}] ({} expected)",
                self.suite_name,
                self.condition_name,
                self.values.len(),
                self.n_stimuli(),
                self.n_layers,
                self.hidden_dim,
                expected
            )));
        }
        if let Some(pos) = self.values.iter().position(|v| !v.is_finite()) {
            let u = self.n_units();
            let unit = UnitId::from_flat(pos % u, self.hidden_dim);
            return Err(Error::NonFinite { stimulus: pos / u, layer: unit.layer, unit: unit.index });
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    model_id: String,
    suite: String,
    condition: String,
    stimulus_ids: Vec<String>,
    n_layers: usize,
    hidden_dim: usize,
    dtype: String,
    element_count: usize,
    provenance: String,
}

pub fn write_activation_tensor(t: &ActivationTensor, dir: &Path) -> Result<()> {
    t.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = Manifest {
        format: FORMAT.into(),
        model_id: t.model_id.clone(),
        suite: t.suite_name.clone(),
        condition: t.condition_name.clone(),
        stimulus_ids: t.stimulus_ids.clone(),
        n_layers: t.n_layers,
        hidden_dim: t.hidden_dim,
        dtype: DTYPE.into(),
        element_count: t.values.len(),
        provenance: t.provenance.clone(),
    };
    let mpath = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Invalid(e.to_string()))?;
    text.push('\n');
    fs::write(&mpath, text).map_err(|e| Error::io(&mpath, e))?;

    let bpath = dir.join(ACTIVATIONS_FILE);
    let file = File::create(&bpath).map_err(|e| Error::io(&bpath, e))?;
    let mut w = BufWriter::new(file);
    for v in &t.values {
        w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(&bpath, e))?;
    }
    w.flush().map_err(|e| Error::io(&bpath, e))
}

pub fn read_activation_tensor(dir: &Path) -> Result<ActivationTensor> {
    let mpath = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: mpath.clone(),
        line: e.line(),
        message: e.to_string(),
    })?;
    if m.format != FORMAT {
        return Err(Error::Invalid(format!("{}: unknown format {:?}", mpath.display(), m.format)));
    }
    if m.dtype != DTYPE {
        return Err(Error::Invalid(format!("{}: unknown dtype {:?}", mpath.display(), m.dtype)));
    }
    if m.n_layers == 0 || m.hidden_dim == 0 {
        return Err(Error::Invalid(format!(
            "{}: L={} and d={} must both be at least 1",
            mpath.display(),
            m.n_layers,
            m.hidden_dim
        )));
    }
    let shape_count = m.stimulus_ids.len() * m.n_layers * m.hidden_dim;
    if shape_count != m.element_count {
        return Err(Error::Invalid(format!(
            "{}: element_count {} disagrees with shape [{}, {}, {}]",
            mpath.display(),
            m.element_count,
            m.stimulus_ids.len(),
            m.n_layers,
            m.hidden_dim
        )));
    }

    let bpath = dir.join(ACTIVATIONS_FILE);
    let mut bytes = Vec::new();
    File::open(&bpath).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(|e| Error::io(&bpath, e))?;
    let expected = m.element_count * 4;
    if bytes.len() != expected {
        return Err(Error::Invalid(format!("{}: expected {} bytes, found {}", bpath.display(), expected, bytes.len())));
    }
    let values = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    let t = ActivationTensor {
        model_id: m.model_id,
        suite_name: m.suite,
        condition_name: m.condition,
        stimulus_ids: m.stimulus_ids,
        n_layers: m.n_layers,
        hidden_dim: m.hidden_dim,
        values,
        provenance: m.provenance,
    };
    t.validate()?;
    Ok(t)
}

/// Conventional location of one tensor under an activation store root.
pub fn tensor_dir(root: &Path, model_id: &str, suite: &str, condition: &str) -> PathBuf {
    root.join(model_id).join(suite).join(condition)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConditionKey {
    pub suite: String,
    pub condition: String,
}

impl ConditionKey {
    pub fn new(suite: &str, condition: &str) -> Self {
        ConditionKey { suite: suite.into(), condition: condition.into() }
    }
}

impl fmt::Display for ConditionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.suite, self.condition)
    }
}

/// Tensors of one model keyed by (suite, condition); all share `L` and `d`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActivationSet {
    tensors: BTreeMap<ConditionKey, ActivationTensor>,
}

impl ActivationSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, t: ActivationTensor) -> Result<()> {
        t.validate()?;
        if let Some(first) = self.tensors.values().next() {
            if first.model_id != t.model_id || first.n_layers != t.n_layers || first.hidden_dim != t.hidden_dim {
                return Err(Error::Invalid(format!(
                    "tensor {} has (model {}, L={}, d={}) but the set holds (model {}, L={}, d={})",
                    t.key(),
                    t.model_id,
                    t.n_layers,
                    t.hidden_dim,
                    first.model_id,
                    first.n_layers,
                    first.hidden_dim
                )));
            }
        }
        self.tensors.insert(t.key(), t);
        Ok(())
    }

    pub fn get(&self, suite: &str, condition: &str) -> Option<&ActivationTensor> {
        self.tensors.get(&ConditionKey::new(suite, condition))
    }

    pub fn iter(&self) -> impl Iterator<Item = &ActivationTensor> {
        self.tensors.values()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// `(L, d)` of the set, if non-empty.
    pub fn shape(&self) -> Option<(usize, usize)> {
        self.tensors.values().next().map(|t| (t.n_layers, t.hidden_dim))
    }

    pub fn model_id(&self) -> Option<&str> {
        self.tensors.values().next().map(|t| t.model_id.as_str())
    }

    /// Loads the listed conditions of one model; missing tensors are
    /// reported together.
    pub fn load(root: &Path, model_id: &str, keys: &[ConditionKey]) -> Result<Self> {
        let mut set = ActivationSet::new();
        let mut missing = Vec::new();
        for key in keys {
            let dir = tensor_dir(root, model_id, &key.suite, &key.condition);
            if !dir.join(MANIFEST_FILE).exists() {
                missing.push(dir.display().to_string());
                continue;
            }
            set.insert(read_activation_tensor(&dir)?)?;
        }
        if !missing.is_empty() {
            return Err(Error::Missing(format!("activation stores: {}", missing.join(", "))));
        }
        Ok(set)
    }

    pub fn write(&self, root: &Path) -> Result<()> {
        for t in self.tensors.values() {
            write_activation_tensor(t, &tensor_dir(root, &t.model_id, &t.suite_name, &t.condition_name))?;
        }
        Ok(())
    }
}
