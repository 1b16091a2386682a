//! Iterative label propagation with clamped labeled nodes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::graph::ProximityGraph;
use crate::error::{config_err, usage_err, Result};
use crate::label::{InstanceId, LabelDistribution, NUM_CLASSES};

const PARALLEL_SWEEP_MIN_NODES: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationConfig {
    pub max_iterations: usize,
    /// Stop once no probability moves by more than this in one sweep.
    pub tolerance: f64,
    /// Start from the current distributions instead of the class prior.
    #[serde(default)]
    pub warm_start: bool,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig { max_iterations: 1000, tolerance: 1e-6, warm_start: false }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(config_err("propagation needs max_iterations >= 1"));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(config_err(format!("propagation tolerance must be positive, got {}", self.tolerance)));
        }
        Ok(())
    }

    pub fn warm(self, max_iterations: usize) -> Self {
        PropagationConfig { max_iterations, warm_start: true, ..self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationReport {
    pub iterations: usize,
    pub converged: bool,
    pub max_change: f64,
    /// Unlabeled nodes without incident weight; they were given the prior.
    pub isolated: Vec<InstanceId>,
}

/// Class frequencies among clamped nodes.
pub fn labeled_prior(graph: &ProximityGraph) -> Option<LabelDistribution> {
    let mut counts = [0.0; NUM_CLASSES];
    let mut any = false;
    for node in &graph.nodes {
        if let Some(l) = node.clamped {
            counts[l.index()] += 1.0;
            any = true;
        }
    }
    any.then(|| LabelDistribution::from_weights(&counts))
}

/// Jacobi-style propagation: every unlabeled node becomes the edge-weighted
/// average of its neighbours' distributions from the previous sweep, while
/// labeled nodes stay one-hot. Sweeps stop when the largest change drops
/// below the tolerance or after `max_iterations`.
pub fn propagate_labels(graph: &mut ProximityGraph, config: &PropagationConfig) -> Result<PropagationReport> {
    config.validate()?;
    let Some(prior) = labeled_prior(graph) else {
        return Err(usage_err("label propagation needs at least one labeled node"));
    };
    let n = graph.nodes.len();
    let free: Vec<usize> = (0..n).filter(|&i| !graph.nodes[i].is_labeled()).collect();

    let mut isolated = Vec::new();
    let mut active = Vec::with_capacity(free.len());
    for &i in &free {
        let node = &mut graph.nodes[i];
        let degree: f64 = graph.adjacency[i].iter().map(|&(_, w)| w).sum();
        if degree > 0.0 {
            node.isolated = false;
            if !config.warm_start {
                node.distribution = prior.clone();
            }
            active.push(i);
        } else {
            node.isolated = true;
            node.distribution = prior.clone();
            isolated.push(node.id);
        }
    }
    if !isolated.is_empty() {
        log::debug!("{} unlabeled nodes have no neighbours; using class prior", isolated.len());
    }
    if active.is_empty() {
        return Ok(PropagationReport { iterations: 0, converged: true, max_change: 0.0, isolated });
    }

    let mut current: Vec<[f64; NUM_CLASSES]> = graph
        .nodes
        .iter()
        .map(|node| {
            let mut p = [0.0; NUM_CLASSES];
            p.copy_from_slice(node.distribution.probabilities());
            p
        })
        .collect();

    let sweep = |current: &[[f64; NUM_CLASSES]], i: usize| -> [f64; NUM_CLASSES] {
        let mut acc = [0.0; NUM_CLASSES];
        let mut total = 0.0;
        for &(j, w) in &graph.adjacency[i] {
            total += w;
            for c in 0..NUM_CLASSES {
                acc[c] += w * current[j][c];
            }
        }
        let sum: f64 = acc.iter().sum();
        if sum > 0.0 {
            acc.iter_mut().for_each(|a| *a /= sum);
        } else {
            acc = current[i];
        }
        debug_assert!(total > 0.0);
        acc
    };

    let mut iterations = 0;
    let mut max_change = f64::INFINITY;
    while iterations < config.max_iterations {
        let updates: Vec<[f64; NUM_CLASSES]> = if active.len() >= PARALLEL_SWEEP_MIN_NODES {
            active.par_iter().map(|&i| sweep(&current, i)).collect()
        } else {
            active.iter().map(|&i| sweep(&current, i)).collect()
        };
        iterations += 1;
        max_change = 0.0;
        for (&i, new) in active.iter().zip(updates) {
            for c in 0..NUM_CLASSES {
                max_change = f64::max(max_change, (new[c] - current[i][c]).abs());
            }
            current[i] = new;
        }
        if max_change < config.tolerance {
            break;
        }
    }

    for &i in &active {
        let p: Vec<f64> = current[i].iter().map(|v| v.clamp(0.0, 1.0)).collect();
        graph.nodes[i].distribution = LabelDistribution::from_weights(&p);
    }
    Ok(PropagationReport { iterations, converged: max_change < config.tolerance, max_change, isolated })
}
