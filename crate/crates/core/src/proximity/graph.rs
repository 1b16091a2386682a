use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::distance::squared_distance;
use crate::error::{config_err, usage_err, Result};
use crate::label::{Instance, InstanceId, Label, LabelDistribution};

/// Neighbourhood size used when nothing else is configured. Odd, to reduce
/// voting ties.
pub const DEFAULT_K: usize = 7;

/// Version tag written into serialized graphs.
pub const GRAPH_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    /// Union-of-neighbourhoods graph with self-tuned Gaussian edge affinities.
    Knn { k: usize },
    /// Dense Gaussian graph of fixed width.
    Rbf { sigma: f64 },
}

impl Kernel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Kernel::Knn { k } if k == 0 => Err(config_err("kNN kernel needs k >= 1")),
            Kernel::Rbf { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                Err(config_err(format!("RBF width must be positive, got {sigma}")))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Knn { .. } => "knn",
            Kernel::Rbf { .. } => "rbf",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: InstanceId,
    pub features: Vec<f64>,
    /// Known label; clamped nodes keep a one-hot distribution.
    pub clamped: Option<Label>,
    pub distribution: LabelDistribution,
    /// Set by propagation when the node has no incident weight and fell back
    /// to the class prior.
    #[serde(default)]
    pub isolated: bool,
}

impl GraphNode {
    pub fn is_labeled(&self) -> bool {
        self.clamped.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Neighbor {
    pub node: usize,
    pub dist: f64,
}

/// Weighted proximity graph over labeled and unlabeled instances.
#[derive(Debug, Clone)]
pub struct ProximityGraph {
    pub(crate) kernel: Kernel,
    /// Width of the Gaussian affinity; for kNN graphs it is fixed the first
    /// time the graph has two nodes.
    pub(crate) sigma: Option<f64>,
    pub(crate) predict_k: usize,
    pub(crate) nodes: Vec<GraphNode>,
    pub(crate) index: HashMap<InstanceId, usize>,
    /// kNN lists `κ(i)` ordered by (distance, id); empty for RBF graphs.
    pub(crate) knn: Vec<Vec<Neighbor>>,
    /// Symmetric adjacency, each row sorted by node index.
    pub(crate) adjacency: Vec<Vec<(usize, f64)>>,
}

fn affinity(dist: f64, sigma: Option<f64>) -> f64 {
    match sigma {
        Some(s) if s > 0.0 && s.is_finite() => {
            (-(dist * dist) / (2.0 * s * s)).exp().max(f64::MIN_POSITIVE)
        }
        _ => 1.0,
    }
}

/// `(dist, id)` lexicographic order used for every neighbour ranking.
fn rank(a: (f64, InstanceId), b: (f64, InstanceId)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

impl ProximityGraph {
    /// An empty graph that grows through [`ProximityGraph::insert`].
    pub fn empty(kernel: Kernel) -> Result<Self> {
        kernel.validate()?;
        let sigma = match kernel {
            Kernel::Rbf { sigma } => Some(sigma),
            Kernel::Knn { .. } => None,
        };
        let predict_k = match kernel {
            Kernel::Knn { k } => k,
            Kernel::Rbf { .. } => DEFAULT_K,
        };
        Ok(ProximityGraph {
            kernel,
            sigma,
            predict_k,
            nodes: Vec::new(),
            index: HashMap::new(),
            knn: Vec::new(),
            adjacency: Vec::new(),
        })
    }

    fn with_nodes(kernel: Kernel, instances: &[Instance]) -> Result<Self> {
        let mut g = ProximityGraph::empty(kernel)?;
        let dim = instances.first().map_or(0, Instance::dim);
        for inst in instances {
            if inst.dim() != dim {
                return Err(usage_err(format!(
                    "instance {} has {} features, expected {dim}",
                    inst.id,
                    inst.dim()
                )));
            }
            if g.index.insert(inst.id, g.nodes.len()).is_some() {
                return Err(usage_err(format!("duplicate instance id {}", inst.id)));
            }
            g.nodes.push(new_node(inst.id, inst.features.clone(), inst.label));
        }
        g.knn = vec![Vec::new(); g.nodes.len()];
        g.adjacency = vec![Vec::new(); g.nodes.len()];
        Ok(g)
    }

    /// Builds the union-of-neighbourhoods kNN graph: `i` and `j` are joined iff
    /// `i ∈ κ(j)` or `j ∈ κ(i)`. Edge weights are Gaussian affinities whose
    /// width is the mean distance to the k-th neighbour.
    pub fn build_knn(instances: &[Instance], k: usize) -> Result<Self> {
        Self::build_knn_inner(instances, k, None)
    }

    /// Same as [`ProximityGraph::build_knn`] with an explicit affinity width.
    pub fn build_knn_with_sigma(instances: &[Instance], k: usize, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(config_err(format!("affinity width must be positive, got {sigma}")));
        }
        Self::build_knn_inner(instances, k, Some(sigma))
    }

    fn build_knn_inner(instances: &[Instance], k: usize, sigma: Option<f64>) -> Result<Self> {
        if k == 0 || k >= instances.len() {
            return Err(usage_err(format!(
                "kNN graph needs 1 <= k < n, got k = {k}, n = {}",
                instances.len()
            )));
        }
        let mut g = Self::with_nodes(Kernel::Knn { k }, instances)?;
        g.rebuild_knn(sigma);
        Ok(g)
    }

    /// Dense graph with `e_ij = exp(-|x_i - x_j|^2 / (2 sigma^2))`.
    pub fn build_rbf(instances: &[Instance], sigma: f64) -> Result<Self> {
        let mut g = Self::with_nodes(Kernel::Rbf { sigma }, instances)?;
        let n = g.nodes.len();
        for i in 0..n {
            let row: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let d = squared_distance(&g.nodes[i].features, &g.nodes[j].features).sqrt();
                    (j, affinity(d, Some(sigma)))
                })
                .collect();
            g.adjacency[i] = row;
        }
        Ok(g)
    }

    /// Builds a graph for either kernel.
    pub fn build(instances: &[Instance], kernel: Kernel) -> Result<Self> {
        match kernel {
            Kernel::Knn { k } => Self::build_knn(instances, k),
            Kernel::Rbf { sigma } => Self::build_rbf(instances, sigma),
        }
    }

    fn k(&self) -> usize {
        match self.kernel {
            Kernel::Knn { k } => k,
            Kernel::Rbf { .. } => 0,
        }
    }

    fn nearest_excluding(&self, features: &[f64], exclude: Option<usize>, k: usize) -> Vec<Neighbor> {
        let mut all: Vec<Neighbor> = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(j, _)| Some(*j) != exclude)
            .map(|(j, node)| Neighbor { node: j, dist: squared_distance(features, &node.features).sqrt() })
            .collect();
        let cmp = |a: &Neighbor, b: &Neighbor| {
            rank((a.dist, self.nodes[a.node].id), (b.dist, self.nodes[b.node].id))
        };
        if all.len() > k && k > 0 {
            all.select_nth_unstable_by(k - 1, cmp);
            all.truncate(k);
        }
        all.sort_by(cmp);
        all.truncate(k);
        all
    }

    /// Recomputes every κ list and all edges from scratch.
    fn rebuild_knn(&mut self, sigma: Option<f64>) {
        let k = self.k();
        let n = self.nodes.len();
        self.knn = (0..n).map(|i| self.nearest_excluding(&self.nodes[i].features, Some(i), k)).collect();
        self.sigma = match sigma {
            Some(s) => Some(s),
            None if n >= 2 => {
                let total: f64 = self.knn.iter().filter_map(|l| l.last()).map(|nb| nb.dist).sum();
                let s = total / n as f64;
                Some(if s > 0.0 && s.is_finite() { s } else { 1.0 })
            }
            None => None,
        };
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for i in 0..n {
            for nb in &self.knn[i] {
                let w = affinity(nb.dist, self.sigma);
                rows[i].push((nb.node, w));
                rows[nb.node].push((i, w));
            }
        }
        for row in rows.iter_mut() {
            row.sort_by_key(|&(j, _)| j);
            row.dedup_by_key(|&mut (j, _)| j);
        }
        self.adjacency = rows;
    }

    fn set_edge(&mut self, i: usize, j: usize, w: f64) {
        for (a, b) in [(i, j), (j, i)] {
            let row = &mut self.adjacency[a];
            match row.binary_search_by_key(&b, |&(n, _)| n) {
                Ok(pos) => row[pos].1 = w,
                Err(pos) => row.insert(pos, (b, w)),
            }
        }
    }

    fn remove_edge(&mut self, i: usize, j: usize) {
        for (a, b) in [(i, j), (j, i)] {
            let row = &mut self.adjacency[a];
            if let Ok(pos) = row.binary_search_by_key(&b, |&(n, _)| n) {
                row.remove(pos);
            }
        }
    }

    /// Adds `x` as a node. A labeled instance becomes a clamped node. kNN
    /// edges are updated locally: `x` gets its own κ list and may displace the
    /// farthest neighbour of nodes it is now closer to.
    pub fn insert(&mut self, x: &Instance) -> Result<()> {
        if self.index.contains_key(&x.id) {
            return Err(usage_err(format!("instance {} is already in the graph", x.id)));
        }
        if let Some(first) = self.nodes.first() {
            if first.features.len() != x.dim() {
                return Err(usage_err(format!(
                    "instance {} has {} features, graph has {}",
                    x.id,
                    x.dim(),
                    first.features.len()
                )));
            }
        }
        let m = self.nodes.len();
        self.index.insert(x.id, m);
        self.nodes.push(new_node(x.id, x.features.clone(), x.label));
        self.adjacency.push(Vec::new());
        self.knn.push(Vec::new());

        match self.kernel {
            Kernel::Rbf { sigma } => {
                for j in 0..m {
                    let d = squared_distance(&x.features, &self.nodes[j].features).sqrt();
                    self.set_edge(m, j, affinity(d, Some(sigma)));
                }
            }
            Kernel::Knn { .. } if self.sigma.is_none() => self.rebuild_knn(None),
            Kernel::Knn { k } => self.insert_knn_local(m, k),
        }
        Ok(())
    }

    fn insert_knn_local(&mut self, m: usize, k: usize) {
        let own = self.nearest_excluding(&self.nodes[m].features.clone(), Some(m), k);
        let x_id = self.nodes[m].id;
        for j in 0..m {
            let d = squared_distance(&self.nodes[m].features, &self.nodes[j].features).sqrt();
            let list = &self.knn[j];
            let enters = list.len() < k || {
                let last = list[list.len() - 1];
                rank((d, x_id), (last.dist, self.nodes[last.node].id)) == Ordering::Less
            };
            if !enters {
                continue;
            }
            let pos = list
                .iter()
                .position(|nb| rank((d, x_id), (nb.dist, self.nodes[nb.node].id)) == Ordering::Less)
                .unwrap_or(list.len());
            self.knn[j].insert(pos, Neighbor { node: m, dist: d });
            if self.knn[j].len() > k {
                let evicted = self.knn[j].pop().expect("list longer than k");
                if !self.knn[evicted.node].iter().any(|nb| nb.node == j) {
                    self.remove_edge(j, evicted.node);
                }
            }
            self.set_edge(j, m, affinity(d, self.sigma));
        }
        for nb in &own {
            self.set_edge(m, nb.node, affinity(nb.dist, self.sigma));
        }
        self.knn[m] = own;
    }

    /// Records the label of `x`: clamps the existing node or inserts a new
    /// clamped node. Re-adding with the same label is a no-op.
    pub fn add_labeled_node(&mut self, x: &Instance, label: Label) -> Result<()> {
        match self.index.get(&x.id) {
            Some(&i) => match self.nodes[i].clamped {
                Some(existing) if existing == label => Ok(()),
                Some(existing) => Err(usage_err(format!(
                    "instance {} is clamped to {existing}, cannot relabel as {label}",
                    x.id
                ))),
                None => {
                    let node = &mut self.nodes[i];
                    node.clamped = Some(label);
                    node.distribution = LabelDistribution::one_hot(label);
                    node.isolated = false;
                    Ok(())
                }
            },
            None => self.insert(&x.clone().with_label(Some(label))),
        }
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn sigma(&self) -> Option<f64> {
        self.sigma
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.nodes.first().map(|n| n.features.len())
    }

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn node(&self, id: InstanceId) -> Option<&GraphNode> {
        self.index.get(&id).map(|&i| &self.nodes[i])
    }

    pub fn contains(&self, id: InstanceId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn labeled_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_labeled()).count()
    }

    /// Weight of edge `a–b`, zero if absent.
    pub fn edge_weight(&self, a: InstanceId, b: InstanceId) -> f64 {
        let (Some(&i), Some(&j)) = (self.index.get(&a), self.index.get(&b)) else {
            return 0.0;
        };
        self.adjacency[i]
            .binary_search_by_key(&j, |&(n, _)| n)
            .map_or(0.0, |pos| self.adjacency[i][pos].1)
    }

    /// Every undirected edge once, as `(lower index id, higher index id, weight)`.
    pub fn edges(&self) -> Vec<(InstanceId, InstanceId, f64)> {
        let mut out = Vec::new();
        for (i, row) in self.adjacency.iter().enumerate() {
            for &(j, w) in row {
                if i < j {
                    out.push((self.nodes[i].id, self.nodes[j].id, w));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// κ(id): the node's own nearest neighbours, nearest first. Empty for RBF
    /// graphs.
    pub fn nearest_neighbors(&self, id: InstanceId) -> Vec<InstanceId> {
        self.index
            .get(&id)
            .and_then(|&i| self.knn.get(i))
            .map(|l| l.iter().map(|nb| self.nodes[nb.node].id).collect())
            .unwrap_or_default()
    }

    /// Multiplies every edge weight by `factor`.
    pub fn rescale_weights(&mut self, factor: f64) -> Result<()> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(usage_err(format!("rescale factor must be positive, got {factor}")));
        }
        for row in self.adjacency.iter_mut() {
            for (_, w) in row.iter_mut() {
                *w *= factor;
            }
        }
        Ok(())
    }

    /// Ids of unlabeled nodes, in insertion order.
    pub fn unlabeled_ids(&self) -> Vec<InstanceId> {
        self.nodes.iter().filter(|n| !n.is_labeled()).map(|n| n.id).collect()
    }

    /// Checks symmetry, zero diagonal, kernel-specific weight ranges and
    /// distribution validity. Intended for tests and debug assertions.
    pub fn check_invariants(&self) -> Result<()> {
        for (i, row) in self.adjacency.iter().enumerate() {
            for &(j, w) in row {
                if i == j {
                    return Err(usage_err(format!("self loop on {}", self.nodes[i].id)));
                }
                if !(w > 0.0 && w.is_finite()) {
                    return Err(usage_err(format!("edge weight {w} out of range")));
                }
                let back = self.adjacency[j].binary_search_by_key(&i, |&(n, _)| n);
                match back {
                    Ok(pos) if self.adjacency[j][pos].1 == w => {}
                    _ => return Err(usage_err("adjacency is not symmetric")),
                }
            }
        }
        if let Kernel::Knn { .. } = self.kernel {
            let expected: HashSet<(usize, usize)> = self
                .knn
                .iter()
                .enumerate()
                .flat_map(|(i, l)| l.iter().map(move |nb| (i.min(nb.node), i.max(nb.node))))
                .collect();
            let actual: HashSet<(usize, usize)> = self
                .adjacency
                .iter()
                .enumerate()
                .flat_map(|(i, row)| row.iter().map(move |&(j, _)| (i.min(j), i.max(j))))
                .collect();
            if expected != actual {
                return Err(usage_err("edge set differs from the union of κ lists"));
            }
        }
        for node in &self.nodes {
            node.distribution.validate()?;
            if let Some(l) = node.clamped {
                if !node.distribution.is_one_hot(l) {
                    return Err(usage_err(format!("clamped node {} is not one-hot", node.id)));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let dump = GraphDump {
            format_version: GRAPH_FORMAT_VERSION,
            kernel: self.kernel,
            sigma: self.sigma,
            predict_k: self.predict_k,
            nodes: self.nodes.clone(),
            edges: self.edges(),
        };
        serde_json::to_string_pretty(&dump).expect("graph serializes")
    }

    /// Restores a dumped graph. Edges come from the dump; kNN lists are
    /// recomputed from the node features.
    pub fn from_json(text: &str) -> Result<Self> {
        let dump: GraphDump = serde_json::from_str(text)?;
        if dump.format_version != GRAPH_FORMAT_VERSION {
            return Err(usage_err(format!(
                "unsupported graph format version {} (expected {GRAPH_FORMAT_VERSION})",
                dump.format_version
            )));
        }
        dump.kernel.validate()?;
        let mut g = ProximityGraph::empty(dump.kernel)?;
        g.sigma = dump.sigma;
        g.predict_k = dump.predict_k;
        for node in dump.nodes {
            if g.index.insert(node.id, g.nodes.len()).is_some() {
                return Err(usage_err(format!("duplicate node id {}", node.id)));
            }
            g.nodes.push(node);
        }
        let n = g.nodes.len();
        g.adjacency = vec![Vec::new(); n];
        g.knn = vec![Vec::new(); n];
        for (a, b, w) in dump.edges {
            let (Some(&i), Some(&j)) = (g.index.get(&a), g.index.get(&b)) else {
                return Err(usage_err(format!("edge {a}-{b} references an unknown node")));
            };
            g.set_edge(i, j, w);
        }
        if let Kernel::Knn { k } = g.kernel {
            g.knn = (0..n).map(|i| g.nearest_excluding(&g.nodes[i].features, Some(i), k)).collect();
        }
        Ok(g)
    }
}

fn new_node(id: InstanceId, features: Vec<f64>, label: Option<Label>) -> GraphNode {
    GraphNode {
        id,
        features,
        clamped: label,
        distribution: label.map_or_else(LabelDistribution::uniform, LabelDistribution::one_hot),
        isolated: false,
    }
}

#[derive(Serialize, Deserialize)]
struct GraphDump {
    format_version: u32,
    kernel: Kernel,
    sigma: Option<f64>,
    predict_k: usize,
    nodes: Vec<GraphNode>,
    edges: Vec<(InstanceId, InstanceId, f64)>,
}
