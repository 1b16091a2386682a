use serde::{Deserialize, Serialize};

use super::distance::Standardizer;
use super::graph::{Kernel, ProximityGraph};
use super::predict::Prediction;
use super::propagate::{propagate_labels, PropagationConfig, PropagationReport};
use crate::error::Result;
use crate::label::{Instance, Label};

/// A proximity graph over standardized features. Callers pass raw feature
/// vectors; the model standardizes with statistics fitted on its build pool.
#[derive(Debug, Clone)]
pub struct ProximityModel {
    pub standardizer: Standardizer,
    pub graph: ProximityGraph,
    pub propagation: PropagationConfig,
}

#[derive(Serialize, Deserialize)]
struct ModelDump {
    standardizer: Standardizer,
    propagation: PropagationConfig,
    graph: serde_json::Value,
}

impl ProximityModel {
    /// Fits the standardizer on `pool`, builds the graph and propagates.
    pub fn fit(pool: &[Instance], kernel: Kernel, propagation: PropagationConfig) -> Result<Self> {
        let rows: Vec<&[f64]> = pool.iter().map(|i| i.features.as_slice()).collect();
        let standardizer = Standardizer::fit(&rows)?;
        let scaled = pool
            .iter()
            .map(|inst| Ok(Instance { features: standardizer.transform(&inst.features)?, ..inst.clone() }))
            .collect::<Result<Vec<_>>>()?;
        let graph = ProximityGraph::build(&scaled, kernel)?;
        let mut model = ProximityModel { standardizer, graph, propagation };
        model.propagate()?;
        Ok(model)
    }

    pub fn propagate(&mut self) -> Result<PropagationReport> {
        propagate_labels(&mut self.graph, &self.propagation)
    }

    /// Warm-started propagation capped at `max_iterations` sweeps.
    pub fn repropagate(&mut self, max_iterations: usize) -> Result<PropagationReport> {
        propagate_labels(&mut self.graph, &self.propagation.warm(max_iterations))
    }

    pub fn scale(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.standardizer.transform(features)
    }

    pub fn predict(&self, features: &[f64]) -> Result<Prediction> {
        self.graph.predict(&self.scale(features)?)
    }

    pub fn predict_instance(&self, x: &Instance) -> Result<Prediction> {
        if self.graph.contains(x.id) {
            return self.graph.predict_instance(x);
        }
        self.predict(&x.features)
    }

    /// Adds (or clamps) a labeled instance given in raw feature space.
    pub fn add_labeled(&mut self, x: &Instance, label: Label) -> Result<()> {
        let scaled = Instance { features: self.scale(&x.features)?, ..x.clone() };
        self.graph.add_labeled_node(&scaled, label)
    }

    /// Adds an instance whose features are already standardized.
    pub fn add_labeled_scaled(&mut self, x: &Instance, label: Label) -> Result<()> {
        self.graph.add_labeled_node(x, label)
    }

    pub fn to_json(&self) -> String {
        let dump = ModelDump {
            standardizer: self.standardizer.clone(),
            propagation: self.propagation,
            graph: serde_json::from_str(&self.graph.to_json()).expect("graph dump is JSON"),
        };
        serde_json::to_string_pretty(&dump).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dump: ModelDump = serde_json::from_str(text)?;
        Ok(ProximityModel {
            standardizer: dump.standardizer,
            propagation: dump.propagation,
            graph: ProximityGraph::from_json(&dump.graph.to_string())?,
        })
    }
}
