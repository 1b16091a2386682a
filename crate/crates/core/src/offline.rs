//! Pool-based active learning: propagate, score, query, rebalance, repeat.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, usage_err, PalsError, Result};
use crate::label::{Instance, InstanceId, Label, LabelDistribution};
use crate::oracle::{Oracle, QueryRequest};
use crate::proximity::{
    propagate_labels, squared_distance, Kernel, PropagationConfig, PropagationReport, ProximityGraph,
    ProximityModel, Standardizer, DEFAULT_K,
};
use crate::selection::{
    derive_seed, entropy_unchecked, select_top, smote_balance, uniform_select, InformativenessScore,
    DEFAULT_SMOTE_NEIGHBORS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStrategy {
    Entropy,
    Uniform,
}

impl SelectionStrategy {
    pub fn name(self) -> &'static str {
        match self {
            SelectionStrategy::Entropy => "entropy",
            SelectionStrategy::Uniform => "uniform",
        }
    }
}

impl std::str::FromStr for SelectionStrategy {
    type Err = PalsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entropy" => Ok(SelectionStrategy::Entropy),
            "uniform" => Ok(SelectionStrategy::Uniform),
            other => Err(usage_err(format!("unknown selection strategy {other:?} (expected entropy or uniform)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OfflineConfig {
    /// Total query budget Δ.
    pub budget: usize,
    /// Number of model updates k.
    pub iterations: usize,
    pub kernel: Kernel,
    pub propagation: PropagationConfig,
    pub smote_k: usize,
    pub selection: SelectionStrategy,
    pub seed: u64,
}

impl OfflineConfig {
    pub fn new(budget: usize, iterations: usize, seed: u64) -> Self {
        OfflineConfig {
            budget,
            iterations,
            kernel: Kernel::Knn { k: DEFAULT_K },
            propagation: PropagationConfig::default(),
            smote_k: DEFAULT_SMOTE_NEIGHBORS,
            selection: SelectionStrategy::Entropy,
            seed,
        }
    }

    /// Queries per iteration, δ = Δ / k.
    pub fn per_iteration(&self) -> usize {
        self.budget / self.iterations.max(1)
    }

    /// Every problem found, reported together.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.iterations == 0 {
            out.push("iterations must be >= 1".to_string());
        } else if self.budget < self.iterations {
            out.push(format!("budget {} is smaller than iterations {}", self.budget, self.iterations));
        } else if self.budget % self.iterations != 0 {
            out.push(format!("budget {} is not divisible by iterations {}", self.budget, self.iterations));
        }
        if self.smote_k == 0 {
            out.push("smote_k must be >= 1".to_string());
        }
        for check in [self.kernel.validate(), self.propagation.validate()] {
            if let Err(e) = check {
                out.push(e.to_string());
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(config_err(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryLogEntry {
    pub iteration: usize,
    pub instance_id: InstanceId,
    pub entropy: f64,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub queried: usize,
    /// Real labeled instances after this iteration.
    pub labeled: usize,
    /// Synthetic instances in the pool after this iteration.
    pub synthetic: usize,
    pub bootstrap: bool,
    pub propagation_sweeps: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct OfflineRun {
    pub model: ProximityModel,
    pub log: Vec<QueryLogEntry>,
    pub iterations: Vec<IterationStats>,
    pub warnings: Vec<String>,
}

/// A run that stopped early. `log` holds every query answered before the
/// failure.
#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct OfflineAbort {
    #[source]
    pub error: PalsError,
    pub log: Vec<QueryLogEntry>,
}

impl From<OfflineAbort> for PalsError {
    fn from(abort: OfflineAbort) -> Self {
        abort.error
    }
}

impl From<PalsError> for OfflineAbort {
    fn from(error: PalsError) -> Self {
        OfflineAbort { error, log: Vec::new() }
    }
}

/// Distributions of every unlabeled node, in graph order.
pub fn infer_unlabeled(graph: &ProximityGraph) -> Vec<(InstanceId, LabelDistribution)> {
    graph.nodes().iter().filter(|n| !n.is_labeled()).map(|n| (n.id, n.distribution.clone())).collect()
}

/// Runs the pool-based loop. `labeled` instances carry their labels;
/// `unlabeled` instances are answered by `oracle`.
pub fn run_offline(
    labeled: &[Instance],
    unlabeled: &[Instance],
    oracle: &mut dyn Oracle,
    config: &OfflineConfig,
) -> std::result::Result<OfflineRun, OfflineAbort> {
    run_offline_observed(labeled, unlabeled, oracle, config, |_, _| {})
}

/// Like [`run_offline`], calling `observer(iteration, model)` after every
/// model update (iteration 0 is the initial model, if it could be built).
pub fn run_offline_observed(
    labeled: &[Instance],
    unlabeled: &[Instance],
    oracle: &mut dyn Oracle,
    config: &OfflineConfig,
    mut observer: impl FnMut(usize, &ProximityModel),
) -> std::result::Result<OfflineRun, OfflineAbort> {
    config.validate()?;
    if unlabeled.is_empty() {
        return Err(usage_err("the unlabeled pool is empty").into());
    }
    if config.budget > unlabeled.len() {
        return Err(config_err(format!(
            "budget {} exceeds the unlabeled pool size {}",
            config.budget,
            unlabeled.len()
        ))
        .into());
    }
    if let Some(bad) = labeled.iter().find(|i| i.label.is_none()) {
        return Err(usage_err(format!("labeled instance {} has no label", bad.id)).into());
    }

    let rows: Vec<&[f64]> = labeled.iter().chain(unlabeled).map(|i| i.features.as_slice()).collect();
    let standardizer = Standardizer::fit(&rows)?;
    let scale = |i: &Instance, label| -> Result<Instance> {
        Ok(Instance { id: i.id, features: standardizer.transform(&i.features)?, label })
    };
    let mut pool: Vec<Instance> = labeled.iter().map(|i| scale(i, i.label)).collect::<Result<_>>()?;
    let scaled_unlabeled: Vec<Instance> = unlabeled.iter().map(|i| scale(i, None)).collect::<Result<_>>()?;
    let by_id: HashMap<InstanceId, usize> = scaled_unlabeled.iter().enumerate().map(|(i, x)| (x.id, i)).collect();

    let all: Vec<Instance> = pool.iter().chain(&scaled_unlabeled).cloned().collect();
    let graph = ProximityGraph::build(&all, config.kernel)?;
    let mut model = ProximityModel { standardizer: standardizer.clone(), graph, propagation: config.propagation };
    let full = config.propagation;
    let warm = PropagationConfig { warm_start: true, ..full };
    if !pool.is_empty() {
        propagate_labels(&mut model.graph, &full)?;
        observer(0, &model);
    }

    let delta = config.per_iteration();
    let mut log = Vec::with_capacity(config.budget);
    let mut stats = Vec::with_capacity(config.iterations);
    let mut warnings = Vec::new();
    let mut next_synthetic = 0u64;
    let mut propagated = !pool.is_empty();

    for iteration in 1..=config.iterations {
        let candidates = infer_unlabeled(&model.graph);
        let bootstrap = config.selection == SelectionStrategy::Entropy && missing_class(&pool);
        let scores: Vec<InformativenessScore> = candidates
            .iter()
            .map(|(id, p)| InformativenessScore { id: *id, score: entropy_unchecked(p.probabilities()) })
            .collect();
        let chosen: Vec<InstanceId> = if bootstrap {
            let cands: Vec<&Instance> = candidates.iter().map(|(id, _)| &scaled_unlabeled[by_id[id]]).collect();
            farthest_point_sample(&cands, &pool, delta)
        } else {
            match config.selection {
                SelectionStrategy::Entropy => select_top(&scores, delta),
                SelectionStrategy::Uniform => {
                    let ids: Vec<InstanceId> = candidates.iter().map(|(id, _)| *id).collect();
                    uniform_select(&ids, delta, derive_seed(config.seed, iteration as u64))?
                }
            }
        };
        let score_of: HashMap<InstanceId, f64> = scores.iter().map(|s| (s.id, s.score)).collect();

        for id in chosen {
            let x = &scaled_unlabeled[by_id[&id]];
            let label = match oracle.query(&QueryRequest::new(id)) {
                Ok(label) => label,
                Err(e) => return Err(OfflineAbort { error: e.into(), log }),
            };
            let entropy = if propagated { score_of[&id] } else { f64::NAN };
            log.push(QueryLogEntry { iteration, instance_id: id, entropy, label });
            let abort = |error, log| OfflineAbort { error, log };
            if let Err(e) = model.graph.add_labeled_node(x, label) {
                return Err(abort(e, log));
            }
            pool.push(Instance { label: Some(label), ..x.clone() });
        }

        let smote_seed = derive_seed(config.seed, 1 << 32 | iteration as u64);
        let outcome = match smote_balance(&pool, config.smote_k, smote_seed, &mut next_synthetic) {
            Ok(o) => o,
            Err(e) => return Err(OfflineAbort { error: e, log }),
        };
        if let Some(w) = outcome.warning {
            warnings.push(format!("iteration {iteration}: {w}"));
        }
        let fresh = outcome.instances.len() - pool.len();
        for synth in outcome.instances.into_iter().skip(pool.len()).take(fresh).collect::<Vec<_>>() {
            let label = synth.label.expect("SMOTE output is labeled");
            if let Err(e) = model.graph.add_labeled_node(&synth, label) {
                return Err(OfflineAbort { error: e, log });
            }
            pool.push(synth);
        }

        let report: PropagationReport = match propagate_labels(&mut model.graph, if propagated { &warm } else { &full }) {
            Ok(r) => r,
            Err(e) => return Err(OfflineAbort { error: e, log }),
        };
        propagated = true;
        observer(iteration, &model);
        stats.push(IterationStats {
            iteration,
            queried: delta,
            labeled: pool.iter().filter(|i| !i.id.is_synthetic()).count(),
            synthetic: pool.iter().filter(|i| i.id.is_synthetic()).count(),
            bootstrap,
            propagation_sweeps: report.iterations,
            converged: report.converged,
        });
    }

    Ok(OfflineRun { model, log, iterations: stats, warnings })
}

fn missing_class(pool: &[Instance]) -> bool {
    Label::ALL.iter().any(|&l| !pool.iter().any(|i| i.label == Some(l)))
}

/// Greedy max-min selection: each pick is the candidate farthest from
/// everything already labeled or picked. With nothing labeled the first
/// pick is the candidate farthest from the candidates' centroid. Ties go to
/// the lower id.
pub fn farthest_point_sample(candidates: &[&Instance], labeled: &[Instance], count: usize) -> Vec<InstanceId> {
    if candidates.is_empty() || count == 0 {
        return Vec::new();
    }
    let mut nearest: Vec<f64> = candidates
        .iter()
        .map(|c| labeled.iter().map(|l| squared_distance(&c.features, &l.features)).fold(f64::INFINITY, f64::min))
        .collect();
    if labeled.is_empty() {
        let dim = candidates[0].features.len();
        let mut centroid = vec![0.0; dim];
        for c in candidates {
            for (a, v) in centroid.iter_mut().zip(&c.features) {
                *a += v / candidates.len() as f64;
            }
        }
        nearest = candidates.iter().map(|c| squared_distance(&c.features, &centroid)).collect();
    }
    let mut taken = vec![false; candidates.len()];
    let mut out = Vec::with_capacity(count.min(candidates.len()));
    while out.len() < count.min(candidates.len()) {
        let best = (0..candidates.len())
            .filter(|&i| !taken[i])
            .max_by(|&a, &b| nearest[a].total_cmp(&nearest[b]).then(candidates[b].id.cmp(&candidates[a].id)))
            .expect("an untaken candidate remains");
        taken[best] = true;
        out.push(candidates[best].id);
        for i in 0..candidates.len() {
            let d = squared_distance(&candidates[i].features, &candidates[best].features);
            if labeled.is_empty() && out.len() == 1 {
                nearest[i] = d;
            } else {
                nearest[i] = nearest[i].min(d);
            }
        }
    }
    out
}
