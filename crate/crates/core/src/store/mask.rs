// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::activation::UnitId;
use super::jsonl::parse_line;
use crate::error::{Error, Result};
use crate::stats::FdrMethod;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionKind {
    Target,
    LeastActive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Simple,
    Conjunctive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskMeta {
    pub alpha: f64,
    pub cap_fraction: f64,
    pub method: Method,
    pub paired: bool,
    pub fdr_method: FdrMethod,
}

/// A set of units selected by one localizer for one model.
///
/// `units` is kept sorted and free of duplicates so that two masks over the
/// same units serialize identically.
#[derive(Debug, Clone, PartialEq)]
pub struct SubnetworkMask {
    pub model_id: String,
    pub localizer_name: String,
    pub selection_kind: SelectionKind,
    pub n_layers: usize,
    pub hidden_dim: usize,
    pub units: Vec<UnitId>,
    pub meta: MaskMeta,
}

impl SubnetworkMask {
    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn capacity(&self) -> usize {
        cap_size(self.meta.cap_fraction, self.n_layers * self.hidden_dim)
    }

    pub fn contains(&self, unit: UnitId) -> bool {
        self.units.binary_search(&unit).is_ok()
    }

    pub fn is_disjoint(&self, other: &SubnetworkMask) -> bool {
        !self.units.iter().any(|u| other.contains(*u))
    }

    pub fn validate(&self) -> Result<()> {
        if self.units.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid(format!("mask {}: units must be sorted and unique", self.localizer_name)));
        }
        if let Some(u) = self.units.iter().find(|u| u.layer >= self.n_layers || u.index >= self.hidden_dim) {
            return Err(Error::Invalid(format!(
                "mask {}: unit {u} outside L={}, d={}",
                self.localizer_name, self.n_layers, self.hidden_dim
            )));
        }
        if self.units.len() > self.capacity() {
            return Err(Error::Invalid(format!(
                "mask {}: {} units exceed the cap of {}",
                self.localizer_name,
                self.units.len(),
                self.capacity()
            )));
        }
        Ok(())
    }
}

/// `ceil(fraction * n_units)`, the largest admissible mask.
pub(crate) fn cap_size(fraction: f64, n_units: usize) -> usize {
    let raw = fraction * n_units as f64;
    // 0.01 * 1000 lands a hair above 10.0; snap before ceil
    let snapped = raw.round();
    if (raw - snapped).abs() < 1e-9 {
        snapped as usize
    } else {
        raw.ceil() as usize
    }
}

#[derive(Serialize, Deserialize)]
struct MaskHeader {
    record: String,
    model_id: String,
    localizer: String,
    selection_kind: SelectionKind,
    n_layers: usize,
    hidden_dim: usize,
    n_units: usize,
    #[serde(flatten)]
    meta: MaskMeta,
}

pub fn write_mask(mask: &SubnetworkMask, path: &Path) -> Result<()> {
    mask.validate()?;
    let header = MaskHeader {
        record: "mask".into(),
        model_id: mask.model_id.clone(),
        localizer: mask.localizer_name.clone(),
        selection_kind: mask.selection_kind,
        n_layers: mask.n_layers,
        hidden_dim: mask.hidden_dim,
        n_units: mask.units.len(),
        meta: mask.meta.clone(),
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    serde_json::to_writer(&mut w, &header).map_err(|e| Error::Invalid(e.to_string()))?;
    w.write_all(b"\n").map_err(io)?;
    for u in &mask.units {
        writeln!(w, "{{\"layer\":{},\"index\":{}}}", u.layer, u.index).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_mask(path: &Path) -> Result<SubnetworkMask> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header: Option<MaskHeader> = None;
    let mut units = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if header.is_none() {
            let h: MaskHeader = parse_line(path, i + 1, &line)?;
            if h.record != "mask" {
                return Err(Error::Parse {
                    path: path.to_owned(),
                    line: i + 1,
                    message: format!("expected mask header, found record {:?}", h.record),
                });
            }
            header = Some(h);
        } else {
            units.push(parse_line::<UnitId>(path, i + 1, &line)?);
        }
    }
    let h = header.ok_or_else(|| Error::Invalid(format!("{}: empty mask file", path.display())))?;
    if h.n_units != units.len() {
        return Err(Error::Invalid(format!(
            "{}: header announces {} units, file lists {}",
            path.display(),
            h.n_units,
            units.len()
        )));
    }
    let mask = SubnetworkMask {
        model_id: h.model_id,
        localizer_name: h.localizer,
        selection_kind: h.selection_kind,
        n_layers: h.n_layers,
        hidden_dim: h.hidden_dim,
        units,
        meta: h.meta,
    };
    mask.validate()?;
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(units: Vec<UnitId>) -> SubnetworkMask {
        SubnetworkMask {
            model_id: "toy".into(),
            localizer_name: "LatentBeliefs-simple".into(),
            selection_kind: SelectionKind::Target,
            n_layers: 4,
            hidden_dim: 100,
            units,
            meta: MaskMeta {
                alpha: 0.05,
                cap_fraction: 0.01,
                method: Method::Simple,
                paired: false,
                fdr_method: FdrMethod::BhModelWide,
            },
        }
    }

    #[test]
    fn cap_uses_ceiling() {
        assert_eq!(cap_size(0.01, 1000), 10);
        assert_eq!(cap_size(0.01, 1024), 11);
        assert_eq!(cap_size(0.01, 1), 1);
        assert_eq!(cap_size(1.0, 7), 7);
    }

    #[test]
    fn round_trip_and_canonical_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let units = vec![UnitId::new(0, 3), UnitId::new(1, 0), UnitId::new(3, 99)];
        let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
        write_mask(&mask(units.clone()), &a).unwrap();
        let back = read_mask(&a).unwrap();
        assert_eq!(back, mask(units));
        write_mask(&back, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn unsorted_or_oversized_rejected() {
        assert!(mask(vec![UnitId::new(1, 0), UnitId::new(0, 3)]).validate().is_err());
        assert!(mask(vec![UnitId::new(1, 0), UnitId::new(1, 0)]).validate().is_err());
        assert!(mask(vec![UnitId::new(4, 0)]).validate().is_err());
        let too_many = (0..5).map(|i| UnitId::new(0, i)).collect();
        assert!(mask(too_many).validate().is_err());
    }
}
