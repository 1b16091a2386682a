//! Proximity graph over labeled and unlabeled instances, label propagation
//! and graph-based prediction.

mod distance;
mod graph;
mod model;
mod predict;
mod propagate;

pub use distance::{pairwise_distance, Standardizer};
pub use graph::{GraphNode, Kernel, ProximityGraph, DEFAULT_K, GRAPH_FORMAT_VERSION};
pub use model::ProximityModel;
pub use predict::Prediction;
pub use propagate::{labeled_prior, propagate_labels, PropagationConfig, PropagationReport};

pub(crate) use distance::squared_distance;

use crate::error::Result;
use crate::label::Instance;

/// kNN graph with self-tuned affinities; see [`ProximityGraph::build_knn`].
pub fn build_knn_graph(instances: &[Instance], k: usize) -> Result<ProximityGraph> {
    ProximityGraph::build_knn(instances, k)
}

/// Dense Gaussian graph; see [`ProximityGraph::build_rbf`].
pub fn build_rbf_graph(instances: &[Instance], sigma: f64) -> Result<ProximityGraph> {
    ProximityGraph::build_rbf(instances, sigma)
}
