// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fmt::Write;

use crate::store::SubnetworkMask;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerCount {
    pub layer: usize,
    pub count: usize,
    /// Share of the layer's units selected, in percent.
    pub percent: f64,
}

/// Number and percentage of selected units in every layer.
pub fn layer_distribution(mask: &SubnetworkMask) -> Vec<LayerCount> {
    let mut counts = vec![0usize; mask.n_layers];
    for u in &mask.units {
        counts[u.layer] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(layer, count)| LayerCount { layer, count, percent: 100.0 * count as f64 / mask.hidden_dim as f64 })
        .collect()
}

/// CSV with one row per (mask, layer).
pub fn layer_distribution_csv(masks: &[&SubnetworkMask]) -> String {
    let mut out = String::from("model_id,localizer,selection_kind,layer,count,percent\n");
    for mask in masks {
        let kind = match mask.selection_kind {
            crate::store::SelectionKind::Target => "target",
            crate::store::SelectionKind::LeastActive => "least_active",
        };
        for row in layer_distribution(mask) {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.6}",
                mask.model_id, mask.localizer_name, kind, row.layer, row.count, row.percent
            );
        }
    }
    out
}
