//! Mask construction from weight statistics and sparsity accounting.
//!
//! Two rules are provided: the standard-deviation threshold, which prunes every
//! unmasked weight with `|w| < alpha * sigma`, and a per-layer magnitude target
//! that removes the smallest weights until a sparsity level is reached.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{DenseLayer, Network};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerStats {
    pub layer: usize,
    /// Population standard deviation of the unmasked weights.
    pub sigma: f64,
    pub unmasked: usize,
    pub total: usize,
}

/// Standard deviation over the currently unmasked weights of a layer.
///
/// Masked zeros are excluded; otherwise sigma would shrink with every round of
/// pruning and later rounds would barely prune anything.
pub fn layer_std(layer: &DenseLayer, index: usize) -> Result<LayerStats> {
    let total = layer.weights().len();
    let unmasked = total - layer.pruned_count();
    if unmasked == 0 {
        return Err(Error::DegenerateLayer(index));
    }
    let n = unmasked as f64;
    let mean = layer.unmasked_weights().sum::<f64>() / n;
    let var = layer.unmasked_weights().map(|w| (w - mean).powi(2)).sum::<f64>() / n;
    Ok(LayerStats {
        layer: index,
        sigma: var.sqrt(),
        unmasked,
        total,
    })
}

/// Prunes every unmasked weight with `|w| < alpha * sigma`, sigma taken before
/// this call masks anything. Returns the number of newly pruned weights.
pub fn prune_by_std(layer: &mut DenseLayer, index: usize, alpha: f64) -> Result<usize> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::config(format!(
            "alpha must be finite and nonnegative, got {alpha}"
        )));
    }
    let stats = layer_std(layer, index)?;
    let threshold = alpha * stats.sigma;
    let doomed: Vec<usize> = layer
        .weights()
        .as_slice()
        .iter()
        .zip(layer.mask())
        .enumerate()
        .filter(|&(_, (&w, &keep))| keep && w.abs() < threshold)
        .map(|(i, _)| i)
        .collect();
    for &i in &doomed {
        layer.prune(i);
    }
    Ok(doomed.len())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MagnitudeOutcome {
    Pruned(usize),
    /// The layer was already sparser than the target; nothing changed.
    BelowCurrent {
        current: f64,
        target: f64,
    },
}

/// Removes the smallest-magnitude unmasked weights until layer sparsity reaches
/// `target`. Ties go to the lowest flat index.
pub fn prune_by_magnitude_target(layer: &mut DenseLayer, target: f64) -> Result<MagnitudeOutcome> {
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::config(format!("target sparsity {target} outside [0, 1]")));
    }
    let total = layer.weights().len();
    let pruned = layer.pruned_count();
    let current = pruned as f64 / total as f64;
    if target < current {
        return Ok(MagnitudeOutcome::BelowCurrent { current, target });
    }
    let reaches = |k: usize| k as f64 / total as f64 >= target;
    let mut needed = ((target * total as f64).ceil() as usize).min(total);
    while needed > 0 && reaches(needed - 1) {
        needed -= 1;
    }
    while needed < total && !reaches(needed) {
        needed += 1;
    }
    let extra = needed.saturating_sub(pruned);
    let mut candidates: Vec<(f64, usize)> = layer
        .weights()
        .as_slice()
        .iter()
        .zip(layer.mask())
        .enumerate()
        .filter_map(|(i, (&w, &keep))| keep.then_some((w.abs(), i)))
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for &(_, i) in candidates.iter().take(extra) {
        layer.prune(i);
    }
    Ok(MagnitudeOutcome::Pruned(extra))
}

/// Per-layer and global fraction of pruned weights. Biases are not counted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityReport {
    pub per_layer: Vec<f64>,
    pub pruned: Vec<usize>,
    pub totals: Vec<usize>,
    pub global: f64,
}

impl SparsityReport {
    pub fn pruned_total(&self) -> usize {
        self.pruned.iter().sum()
    }

    pub fn weight_total(&self) -> usize {
        self.totals.iter().sum()
    }
}

pub fn sparsity_report(net: &Network) -> SparsityReport {
    let pruned: Vec<usize> = net.layers().iter().map(DenseLayer::pruned_count).collect();
    let totals: Vec<usize> = net.layers().iter().map(|l| l.weights().len()).collect();
    let per_layer = pruned.iter().zip(&totals).map(|(&p, &t)| p as f64 / t as f64).collect();
    let global = pruned.iter().sum::<usize>() as f64 / totals.iter().sum::<usize>() as f64;
    SparsityReport {
        per_layer,
        pruned,
        totals,
        global,
    }
}
