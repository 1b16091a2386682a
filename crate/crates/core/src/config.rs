//! Run configuration: every tunable in one TOML file.
//!
//! Missing sections and keys take their defaults; unknown keys are
//! rejected. [`RunConfig::problems`] checks everything at once.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{config_err, usage_err, Result};
use crate::evaluation::{
    DriftSchedule, ExperimentConfig, StreamSettings, SyntheticStreamSpec, DEFAULT_SWEEP_BUDGETS,
};
use crate::offline::{OfflineConfig, SelectionStrategy};
use crate::pipeline::{DEFAULT_CUTOFF_HZ, DEFAULT_WINDOW_SECONDS};
use crate::proximity::{Kernel, PropagationConfig, DEFAULT_K};
use crate::selection::DEFAULT_SMOTE_NEIGHBORS;
use crate::streaming::{LambdaPolicy, StreamConfig, DEFAULT_INTERVAL_MS, DEFAULT_UPDATE_SWEEPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Knn,
    Rbf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub window_seconds: f64,
    pub cutoff_hz: f64,
    /// Features kept by χ² selection; half of them when unset.
    pub chi2_keep: Option<usize>,
}

impl Default for PipelineSection {
    fn default() -> Self {
        PipelineSection { window_seconds: DEFAULT_WINDOW_SECONDS, cutoff_hz: DEFAULT_CUTOFF_HZ, chi2_keep: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphSection {
    pub kernel: KernelKind,
    pub knn_k: usize,
    pub rbf_sigma: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for GraphSection {
    fn default() -> Self {
        let p = PropagationConfig::default();
        GraphSection {
            kernel: KernelKind::Knn,
            knn_k: DEFAULT_K,
            rbf_sigma: 1.0,
            tolerance: p.tolerance,
            max_iterations: p.max_iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfflineSection {
    pub budget: usize,
    pub iterations: usize,
    pub smote_k: usize,
    pub selection: SelectionStrategy,
}

impl Default for OfflineSection {
    fn default() -> Self {
        OfflineSection { budget: 40, iterations: 10, smote_k: DEFAULT_SMOTE_NEIGHBORS, selection: SelectionStrategy::Entropy }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreamingSection {
    pub policy: LambdaPolicy,
    /// Queries per interval.
    pub budget: usize,
    pub interval_ms: f64,
    pub update_sweeps: usize,
    /// Fixed threshold for the static policy; derived from the seed model
    /// when unset.
    pub static_lambda: Option<f64>,
    pub two_pass: bool,
    pub speedup: Option<f64>,
    /// Per-query oracle timeout in interactive mode.
    pub oracle_timeout_secs: Option<f64>,
}

impl Default for StreamingSection {
    fn default() -> Self {
        StreamingSection {
            policy: LambdaPolicy::Adaptive,
            budget: 60,
            interval_ms: DEFAULT_INTERVAL_MS,
            update_sweeps: DEFAULT_UPDATE_SWEEPS,
            static_lambda: None,
            two_pass: false,
            speedup: None,
            oracle_timeout_secs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub seeds: Vec<u64>,
    pub budgets: Vec<usize>,
    pub train_fraction: f64,
    pub offline_pool_size: usize,
    pub offline_positive_rate: f64,
    pub drift: DriftSchedule,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        let e = ExperimentConfig::default();
        ExperimentSection {
            seeds: e.seeds,
            budgets: DEFAULT_SWEEP_BUDGETS.to_vec(),
            train_fraction: e.train_fraction,
            offline_pool_size: e.offline_pool_size,
            offline_positive_rate: e.offline_positive_rate,
            drift: e.drift,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Dataset root; `PALS_DATA_DIR` fills it when unset.
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed of single runs; required before anything stochastic starts.
    pub seed: Option<u64>,
    pub pipeline: PipelineSection,
    pub graph: GraphSection,
    pub offline: OfflineSection,
    pub streaming: StreamingSection,
    pub experiment: ExperimentSection,
    pub synthetic: SyntheticStreamSpec,
    pub data: DataSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_err(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage_err(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// The fully resolved configuration as TOML.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err(format!("cannot serialize config: {e}")))
    }

    pub fn kernel(&self) -> Kernel {
        match self.graph.kernel {
            KernelKind::Knn => Kernel::Knn { k: self.graph.knn_k },
            KernelKind::Rbf => Kernel::Rbf { sigma: self.graph.rbf_sigma },
        }
    }

    pub fn propagation(&self) -> PropagationConfig {
        PropagationConfig {
            max_iterations: self.graph.max_iterations,
            tolerance: self.graph.tolerance,
            warm_start: false,
        }
    }

    pub fn offline_config(&self) -> OfflineConfig {
        OfflineConfig {
            budget: self.offline.budget,
            iterations: self.offline.iterations,
            kernel: self.kernel(),
            propagation: self.propagation(),
            smote_k: self.offline.smote_k,
            selection: self.offline.selection,
            seed: self.seed.unwrap_or_default(),
        }
    }

    pub fn stream_config(&self) -> StreamConfig {
        let s = &self.streaming;
        StreamConfig {
            policy: s.policy,
            budget: s.budget,
            interval_ms: s.interval_ms,
            static_lambda: s.static_lambda,
            two_pass: s.two_pass,
            update_sweeps: s.update_sweeps,
            speedup: s.speedup,
        }
    }

    pub fn stream_settings(&self) -> StreamSettings {
        StreamSettings {
            budget: self.streaming.budget,
            interval_ms: self.streaming.interval_ms,
            update_sweeps: self.streaming.update_sweeps,
            kernel: self.kernel(),
            propagation: self.propagation(),
        }
    }

    pub fn experiment_config(&self, synthetic: bool) -> ExperimentConfig {
        let e = &self.experiment;
        ExperimentConfig {
            seeds: e.seeds.clone(),
            synthetic,
            data_dir: self.data.dir.clone(),
            spec: self.synthetic.clone(),
            drift: e.drift,
            offline_pool_size: e.offline_pool_size,
            offline_positive_rate: e.offline_positive_rate,
            train_fraction: e.train_fraction,
            offline: self.offline_config(),
            rbf_sigma: self.graph.rbf_sigma,
            stream: self.stream_settings(),
            budgets: e.budgets.clone(),
            window_seconds: self.pipeline.window_seconds,
            cutoff_hz: self.pipeline.cutoff_hz,
            chi2_keep: self.pipeline.chi2_keep,
        }
    }

    /// Every problem in the file, independent of which command runs.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let p = &self.pipeline;
        if !(p.window_seconds > 0.0 && p.window_seconds.is_finite()) {
            out.push(format!("pipeline.window_seconds must be positive, got {}", p.window_seconds));
        }
        if !(p.cutoff_hz > 0.0 && p.cutoff_hz.is_finite()) {
            out.push(format!("pipeline.cutoff_hz must be positive, got {}", p.cutoff_hz));
        }
        if p.chi2_keep == Some(0) {
            out.push("pipeline.chi2_keep must be >= 1".into());
        }
        if !(self.graph.rbf_sigma > 0.0 && self.graph.rbf_sigma.is_finite()) {
            out.push(format!("graph.rbf_sigma must be positive, got {}", self.graph.rbf_sigma));
        }
        if self.graph.knn_k == 0 {
            out.push("graph.knn_k must be >= 1".into());
        }
        out.extend(self.offline_config().problems().into_iter().map(|m| format!("offline: {m}")));
        let mut stream = self.stream_config();
        if stream.policy == LambdaPolicy::Static && stream.static_lambda.is_none() {
            // Derived from the seed model at run time.
            stream.static_lambda = Some(0.0);
        }
        out.extend(stream.problems().into_iter().map(|m| format!("streaming: {m}")));
        if self.streaming.oracle_timeout_secs.is_some_and(|t| !(t > 0.0 && t.is_finite())) {
            out.push("streaming.oracle_timeout_secs must be positive".into());
        }
        let e = &self.experiment;
        if e.seeds.is_empty() {
            out.push("experiment.seeds must not be empty".into());
        }
        if e.budgets.is_empty() {
            out.push("experiment.budgets must not be empty".into());
        }
        if !(e.train_fraction > 0.0 && e.train_fraction < 1.0) {
            out.push(format!("experiment.train_fraction must be in (0, 1), got {}", e.train_fraction));
        }
        if !(e.offline_positive_rate > 0.0 && e.offline_positive_rate < 1.0) {
            out.push(format!("experiment.offline_positive_rate must be in (0, 1), got {}", e.offline_positive_rate));
        }
        if let Err(err) = self.synthetic.validate() {
            out.push(format!("synthetic: {err}"));
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c, RunConfig::default());
        c.validate().unwrap();
        assert_eq!(c.kernel(), Kernel::Knn { k: 7 });
    }

    #[test]
    fn snapshot_round_trips() {
        let mut c = RunConfig::default();
        c.seed = Some(9);
        c.graph.kernel = KernelKind::Rbf;
        c.streaming.policy = LambdaPolicy::Best;
        c.streaming.two_pass = true;
        c.data.dir = Some("/data".into());
        let text = c.to_toml().unwrap();
        assert_eq!(RunConfig::parse(&text).unwrap(), c);
    }

    #[test]
    fn partial_sections_keep_defaults() {
        let c = RunConfig::parse("[offline]\nbudget = 10\niterations = 5\n\n[synthetic]\noverlap = 0.3\n").unwrap();
        assert_eq!(c.offline_config().per_iteration(), 2);
        assert_eq!(c.offline.smote_k, DEFAULT_SMOTE_NEIGHBORS);
        assert_eq!(c.synthetic.overlap, 0.3);
        assert_eq!(c.synthetic.dim, SyntheticStreamSpec::default().dim);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("[offline]\nbudjet = 3\n").unwrap_err().is_usage());
    }

    #[test]
    fn all_problems_reported_together() {
        let c = RunConfig::parse(
            "[offline]\nbudget = 7\niterations = 5\n[graph]\nrbf_sigma = -1.0\n[streaming]\npolicy = \"best\"\n",
        )
        .unwrap();
        let problems = c.problems();
        assert_eq!(problems.len(), 3, "{problems:?}");
        assert!(problems.iter().any(|p| p.contains("divisible")));
        assert!(problems.iter().any(|p| p.contains("two-pass")));
    }
}
