//! χ² feature ranking over min-max scaled features.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::features::FeatureVector;
use crate::error::{usage_err, Result};
use crate::label::{Label, NUM_CLASSES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSelectionMask {
    /// Sorted, unique indices into the full feature vector.
    pub kept_indices: Vec<usize>,
    /// χ² score of every original feature.
    pub scores: Vec<f64>,
    /// Set when every label was identical and scoring carried no information.
    pub degenerate: bool,
}

impl FeatureSelectionMask {
    pub fn identity(dim: usize) -> Self {
        FeatureSelectionMask { kept_indices: (0..dim).collect(), scores: vec![0.0; dim], degenerate: false }
    }

    pub fn input_dim(&self) -> usize {
        self.scores.len()
    }

    pub fn output_dim(&self) -> usize {
        self.kept_indices.len()
    }

    pub fn apply(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.input_dim() {
            return Err(usage_err(format!(
                "mask expects {} features, vector has {}",
                self.input_dim(),
                values.len()
            )));
        }
        Ok(self.kept_indices.iter().map(|&i| values[i]).collect())
    }
}

/// Per-feature χ² statistic. Each feature is min-max scaled to `[0, 1]` over
/// the given rows; the observed table is the per-class sum of the scaled
/// feature and the expected table is the class frequency times the feature
/// total. Sums are taken over sorted values, so row order does not matter.
pub fn chi2_scores<R: AsRef<[f64]>>(rows: &[R], labels: &[Label]) -> Result<Vec<f64>> {
    if rows.is_empty() {
        return Err(usage_err("χ² scoring needs at least one row"));
    }
    if rows.len() != labels.len() {
        return Err(usage_err(format!("{} rows but {} labels", rows.len(), labels.len())));
    }
    let dim = rows[0].as_ref().len();
    if let Some(bad) = rows.iter().position(|r| r.as_ref().len() != dim) {
        return Err(usage_err(format!("row {bad} has {} features, expected {dim}", rows[bad].as_ref().len())));
    }
    let n = rows.len() as f64;
    let mut class_count = [0usize; NUM_CLASSES];
    for l in labels {
        class_count[l.index()] += 1;
    }

    let mut scores = Vec::with_capacity(dim);
    let mut by_class: [Vec<f64>; NUM_CLASSES] = Default::default();
    for j in 0..dim {
        let column = rows.iter().map(|r| r.as_ref()[j]);
        let (lo, hi) = column.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let range = hi - lo;
        if !(range > 0.0 && range.is_finite()) {
            scores.push(0.0);
            continue;
        }
        for bucket in by_class.iter_mut() {
            bucket.clear();
        }
        for (r, l) in rows.iter().zip(labels) {
            by_class[l.index()].push((r.as_ref()[j] - lo) / range);
        }
        let observed: Vec<f64> = by_class
            .iter_mut()
            .map(|bucket| {
                bucket.sort_by(f64::total_cmp);
                bucket.iter().sum()
            })
            .collect();
        let total: f64 = observed.iter().sum();
        let mut chi2 = 0.0;
        for (c, &o) in observed.iter().enumerate() {
            let expected = class_count[c] as f64 / n * total;
            if expected > 0.0 {
                chi2 += (o - expected).powi(2) / expected;
            }
        }
        scores.push(chi2);
    }
    Ok(scores)
}

/// Keeps the `keep` highest-scoring features; equal scores prefer the lower
/// index. With a single class present, falls back to the first `keep`
/// features and flags the mask as degenerate.
pub fn chi2_select<R: AsRef<[f64]>>(rows: &[R], labels: &[Label], keep: usize) -> Result<FeatureSelectionMask> {
    if keep == 0 {
        return Err(usage_err("must keep at least one feature"));
    }
    if rows.is_empty() {
        return Err(usage_err("χ² selection needs at least one row"));
    }
    let dim = rows[0].as_ref().len();
    if keep > dim {
        return Err(usage_err(format!("cannot keep {keep} of {dim} features")));
    }
    let single_class = labels.windows(2).all(|w| w[0] == w[1]);
    if single_class {
        if rows.len() != labels.len() {
            return Err(usage_err(format!("{} rows but {} labels", rows.len(), labels.len())));
        }
        log::warn!("all labels identical; χ² selection keeps the first {keep} features");
        return Ok(FeatureSelectionMask { kept_indices: (0..keep).collect(), scores: vec![0.0; dim], degenerate: true });
    }
    let scores = chi2_scores(rows, labels)?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut kept_indices = order[..keep].to_vec();
    kept_indices.sort_unstable();
    Ok(FeatureSelectionMask { kept_indices, scores, degenerate: false })
}

/// Projects a feature vector onto the kept features, preserving their order.
pub fn apply_mask(fv: &FeatureVector, mask: &FeatureSelectionMask) -> Result<FeatureVector> {
    let values = mask.apply(&fv.values)?;
    let names: Arc<[String]> = mask.kept_indices.iter().map(|&i| fv.names[i].clone()).collect();
    FeatureVector::new(values, names)
}
