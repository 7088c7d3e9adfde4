// SPDX-License-Identifier: MIT OR Apache-2.0

use super::statistic::UnitStatMap;
use crate::error::{Error, Result};
use crate::store::mask::cap_size;
use crate::store::{MaskMeta, SelectionKind, SubnetworkMask, UnitId};

fn mask_from(
    stats: &UnitStatMap,
    kind: SelectionKind,
    alpha: f64,
    cap_fraction: f64,
    mut flat: Vec<usize>,
) -> SubnetworkMask {
    flat.sort_unstable();
    SubnetworkMask {
        model_id: stats.model_id.clone(),
        localizer_name: stats.localizer_name.clone(),
        selection_kind: kind,
        n_layers: stats.n_layers,
        hidden_dim: stats.hidden_dim,
        units: flat.into_iter().map(|u| UnitId::from_flat(u, stats.hidden_dim)).collect(),
        meta: MaskMeta { alpha, cap_fraction, method: stats.method, paired: stats.paired, fdr_method: stats.fdr },
    }
}

/// Significant units, keeping at most `ceil(cap_fraction * L * d)` of them
/// ranked by `|m|` (ties go to the lower layer, then the lower index).
pub fn select_target_subnetwork(stats: &UnitStatMap, alpha: f64, cap_fraction: f64) -> Result<SubnetworkMask> {
    if !(cap_fraction > 0.0 && cap_fraction <= 1.0) {
        return Err(Error::Precondition(format!("cap_fraction={cap_fraction} must lie in (0, 1]")));
    }
    let significant = stats.significance_at(alpha)?;
    let mut candidates: Vec<usize> = (0..stats.n_units()).filter(|&u| significant[u]).collect();
    let cap = cap_size(cap_fraction, stats.n_units());
    if candidates.len() > cap {
        candidates.sort_by(|&a, &b| stats.m[b].abs().total_cmp(&stats.m[a].abs()).then(a.cmp(&b)));
        candidates.truncate(cap);
    }
    if candidates.is_empty() {
        log::warn!(
            "localizer {} on {}: no significant units at alpha={alpha}; target mask is empty",
            stats.localizer_name,
            stats.model_id
        );
    }
    Ok(mask_from(stats, SelectionKind::Target, alpha, cap_fraction, candidates))
}

/// The `size` non-significant units with the smallest `|m|`.
pub fn select_least_active(stats: &UnitStatMap, size: usize) -> Result<SubnetworkMask> {
    let mut candidates: Vec<usize> = (0..stats.n_units()).filter(|&u| !stats.significant[u]).collect();
    if candidates.len() < size {
        return Err(Error::Precondition(format!(
            "least-active mask of {size} units requested but only {} units are non-significant (short by {})",
            candidates.len(),
            size - candidates.len()
        )));
    }
    candidates.sort_by(|&a, &b| stats.m[a].abs().total_cmp(&stats.m[b].abs()).then(a.cmp(&b)));
    candidates.truncate(size);
    // least-active masks are sized by their target mask; record a cap that admits it
    let cap_fraction = (size.max(1) as f64 / stats.n_units() as f64).min(1.0);
    Ok(mask_from(stats, SelectionKind::LeastActive, stats.alpha, cap_fraction, candidates))
}
