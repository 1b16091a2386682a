use super::distance::squared_distance;
use super::graph::ProximityGraph;
use crate::error::{usage_err, Result};
use crate::label::{Instance, Label, LabelDistribution, NUM_CLASSES};

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: Label,
    pub distribution: LabelDistribution,
}

impl Prediction {
    fn from_distribution(distribution: LabelDistribution) -> Self {
        Prediction { label: distribution.argmax(), distribution }
    }
}

impl ProximityGraph {
    /// Predicts an out-of-graph point as the affinity-weighted average of its
    /// nearest graph nodes. Points that coincide with nodes take the average
    /// of those nodes only.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        if self.nodes.is_empty() {
            return Err(usage_err("cannot predict with an empty graph"));
        }
        if let Some(dim) = self.dim() {
            if dim != x.len() {
                return Err(usage_err(format!("query has {} features, graph has {dim}", x.len())));
            }
        }
        let mut near: Vec<(f64, usize)> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, node)| (squared_distance(x, &node.features), i))
            .collect();
        let exact: Vec<usize> = near.iter().filter(|(d2, _)| *d2 == 0.0).map(|&(_, i)| i).collect();
        if !exact.is_empty() {
            return Ok(Prediction::from_distribution(self.mean_distribution(exact.iter().map(|&i| (i, 1.0)))));
        }

        let k = self.predict_k.clamp(1, near.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| {
            a.0.total_cmp(&b.0).then(self.nodes[a.1].id.cmp(&self.nodes[b.1].id))
        };
        if near.len() > k {
            near.select_nth_unstable_by(k - 1, cmp);
            near.truncate(k);
        }
        near.sort_by(cmp);

        // Weights relative to the nearest node: identical ratios to the raw
        // Gaussian affinities, without underflow for far-away queries.
        let sigma = self.sigma.filter(|s| *s > 0.0).unwrap_or(1.0);
        let d2_min = near[0].0;
        let weighted = near.iter().map(|&(d2, i)| (i, (-(d2 - d2_min) / (2.0 * sigma * sigma)).exp()));
        Ok(Prediction::from_distribution(self.mean_distribution(weighted)))
    }

    /// Uses the node's own distribution when `x` is already in the graph.
    pub fn predict_instance(&self, x: &Instance) -> Result<Prediction> {
        match self.node(x.id) {
            Some(node) => Ok(Prediction::from_distribution(node.distribution.clone())),
            None => self.predict(&x.features),
        }
    }

    fn mean_distribution(&self, weighted: impl Iterator<Item = (usize, f64)>) -> LabelDistribution {
        let mut acc = [0.0; NUM_CLASSES];
        for (i, w) in weighted {
            for (a, p) in acc.iter_mut().zip(self.nodes[i].distribution.probabilities()) {
                *a += w * p;
            }
        }
        LabelDistribution::from_weights(&acc)
    }
}
