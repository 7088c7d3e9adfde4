// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Multiple-comparison rule applied to per-unit p-values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FdrMethod {
    /// Benjamini–Hochberg over all `L * d` units of a model.
    #[default]
    BhModelWide,
    /// Benjamini–Hochberg separately within each layer.
    BhPerLayer,
    /// Plain `p < alpha` per unit.
    Uncorrected,
}

impl std::str::FromStr for FdrMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bh-model-wide" => Ok(FdrMethod::BhModelWide),
            "bh-per-layer" => Ok(FdrMethod::BhPerLayer),
            "uncorrected" => Ok(FdrMethod::Uncorrected),
            other => Err(Error::Precondition(format!(
                "unknown FDR method {other:?} (expected bh-model-wide, bh-per-layer or uncorrected)"
            ))),
        }
    }
}

/// Benjamini–Hochberg step-up rejections at level `q`.
///
/// Rejects the `k` smallest p-values where `k` is the largest rank with
/// `p_(k) <= k q / m`. The result is aligned with the input.
pub fn bh_fdr(p_values: &[f64], q: f64) -> Result<Vec<bool>> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Precondition(format!("FDR level q={q} must lie in (0, 1)")));
    }
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Precondition(format!("p-value {p} outside [0, 1]")));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let mf = m as f64;
    let cutoff = order
        .iter()
        .enumerate()
        .rev()
        .find(|(rank, &i)| p_values[i] <= (*rank as f64 + 1.0) * q / mf)
        .map_or(0, |(rank, _)| rank + 1);
    let mut out = vec![false; m];
    for &i in &order[..cutoff] {
        out[i] = true;
    }
    Ok(out)
}

/// Significance flags for a flat `[L, d]` array of p-values.
pub fn apply_fdr(p: &[f64], hidden_dim: usize, method: FdrMethod, alpha: f64) -> Result<Vec<bool>> {
    match method {
        FdrMethod::BhModelWide => bh_fdr(p, alpha),
        FdrMethod::BhPerLayer => {
            let mut out = Vec::with_capacity(p.len());
            for layer in p.chunks(hidden_dim) {
                out.extend(bh_fdr(layer, alpha)?);
            }
            Ok(out)
        }
        FdrMethod::Uncorrected => {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::Precondition(format!("alpha={alpha} must lie in (0, 1)")));
            }
            Ok(p.iter().map(|&v| v < alpha).collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_up_by_hand() {
        let r = bh_fdr(&[0.01, 0.02, 0.03, 0.5], 0.05).unwrap();
        assert_eq!(r, vec![true, true, true, false]);
        // order of input does not matter
        let r = bh_fdr(&[0.5, 0.03, 0.01, 0.02], 0.05).unwrap();
        assert_eq!(r, vec![false, true, true, true]);
    }

    #[test]
    fn step_up_not_step_down() {
        // p_(1) = 0.04 > 0.05/3 but p_(3) = 0.05 <= 0.05, so all three go
        let r = bh_fdr(&[0.04, 0.045, 0.05], 0.05).unwrap();
        assert_eq!(r, vec![true, true, true]);
    }

    #[test]
    fn edge_cases() {
        assert_eq!(bh_fdr(&[1.0; 5], 0.05).unwrap(), vec![false; 5]);
        assert_eq!(bh_fdr(&[0.04], 0.05).unwrap(), vec![true]);
        assert!(bh_fdr(&[], 0.05).unwrap().is_empty());
        assert!(bh_fdr(&[0.2], 1.0).is_err());
        assert!(bh_fdr(&[1.2], 0.05).is_err());
    }

    #[test]
    fn per_layer_differs_from_model_wide() {
        let p = [0.001, 0.9, 0.9, 0.02, 0.03, 0.9];
        let (t, f) = (true, false);
        assert_eq!(apply_fdr(&p, 3, FdrMethod::BhModelWide, 0.05).unwrap(), vec![t, f, f, f, f, f]);
        assert_eq!(apply_fdr(&p, 3, FdrMethod::BhPerLayer, 0.05).unwrap(), vec![t, f, f, t, t, f]);
    }
}
