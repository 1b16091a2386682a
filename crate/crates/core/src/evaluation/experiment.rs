use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{stratified_split, Dataset};
use super::metrics::{mean, std_dev, Metrics};
use super::report::{ExperimentReport, RunStatus, Table};
use super::synthetic::{generate_pool, generate_synthetic, DriftSchedule, SyntheticStreamSpec};
use super::{fmt_metric, load_session};
use crate::error::{config_err, usage_err, PalsError, Result};
use crate::label::{Instance, InstanceId, Label};
use crate::offline::{run_offline_observed, IterationStats, OfflineConfig, QueryLogEntry, SelectionStrategy};
use crate::oracle::ReplayOracle;
use crate::pipeline::{chi2_select, session_features, FeatureSelectionMask, SegmentFeatures};
use crate::proximity::{Kernel, PropagationConfig, ProximityModel, DEFAULT_K};
use crate::selection::entropy_unchecked;
use crate::streaming::{
    run_stream, static_lambda, Decision, LambdaPolicy, StreamConfig, StreamEvent, StreamItem,
    DEFAULT_INTERVAL_MS, DEFAULT_UPDATE_SWEEPS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipe {
    KernelCompare,
    EntropyVsUniform,
    BudgetSweep,
    LambdaCompare,
    OfflineEval,
}

impl Recipe {
    pub const ALL: [Recipe; 5] = [
        Recipe::KernelCompare,
        Recipe::EntropyVsUniform,
        Recipe::BudgetSweep,
        Recipe::LambdaCompare,
        Recipe::OfflineEval,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Recipe::KernelCompare => "kernel_compare",
            Recipe::EntropyVsUniform => "entropy_vs_uniform",
            Recipe::BudgetSweep => "budget_sweep",
            Recipe::LambdaCompare => "lambda_compare",
            Recipe::OfflineEval => "offline_eval",
        }
    }
}

impl std::str::FromStr for Recipe {
    type Err = PalsError;

    fn from_str(s: &str) -> Result<Self> {
        Recipe::ALL.into_iter().find(|r| r.name() == s).ok_or_else(|| {
            let valid: Vec<&str> = Recipe::ALL.iter().map(|r| r.name()).collect();
            usage_err(format!("unknown recipe {s:?}; valid recipes: {}", valid.join(", ")))
        })
    }
}

impl std::fmt::Display for Recipe {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub const DEFAULT_SWEEP_BUDGETS: [usize; 12] = [5, 10, 15, 20, 25, 30, 35, 40, 45, 50, 55, 60];

/// Streaming tunables shared by the streaming recipes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamSettings {
    /// Queries per interval.
    pub budget: usize,
    pub interval_ms: f64,
    pub update_sweeps: usize,
    pub kernel: Kernel,
    pub propagation: PropagationConfig,
}

impl Default for StreamSettings {
    fn default() -> Self {
        StreamSettings {
            budget: 60,
            interval_ms: DEFAULT_INTERVAL_MS,
            update_sweeps: DEFAULT_UPDATE_SWEEPS,
            kernel: Kernel::Knn { k: DEFAULT_K },
            propagation: PropagationConfig::default(),
        }
    }
}

/// Everything a recipe needs. Seeds are listed explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    /// Use generated data instead of datasets under `data_dir`.
    pub synthetic: bool,
    pub data_dir: Option<PathBuf>,
    pub spec: SyntheticStreamSpec,
    /// Class-prior change used by `lambda_compare` on generated streams.
    pub drift: DriftSchedule,
    pub offline_pool_size: usize,
    pub offline_positive_rate: f64,
    pub train_fraction: f64,
    pub offline: OfflineConfig,
    pub rbf_sigma: f64,
    pub stream: StreamSettings,
    pub budgets: Vec<usize>,
    pub window_seconds: f64,
    pub cutoff_hz: f64,
    /// Features kept by χ² selection on real data; half of them by default.
    pub chi2_keep: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut offline = OfflineConfig::new(40, 10, 0);
        offline.kernel = Kernel::Knn { k: DEFAULT_K };
        ExperimentConfig {
            seeds: (0..10).collect(),
            synthetic: true,
            data_dir: None,
            spec: SyntheticStreamSpec::default(),
            drift: DriftSchedule::default(),
            offline_pool_size: 1500,
            offline_positive_rate: 0.067,
            train_fraction: 0.2,
            offline,
            rbf_sigma: 1.0,
            stream: StreamSettings::default(),
            budgets: DEFAULT_SWEEP_BUDGETS.to_vec(),
            window_seconds: crate::pipeline::DEFAULT_WINDOW_SECONDS,
            cutoff_hz: crate::pipeline::DEFAULT_CUTOFF_HZ,
            chi2_keep: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = self.offline.problems();
        if self.seeds.is_empty() {
            problems.push("at least one seed is required".into());
        }
        if self.budgets.is_empty() {
            problems.push("budget sweep needs at least one budget".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            problems.push(format!("train_fraction must be in (0, 1), got {}", self.train_fraction));
        }
        if !(self.rbf_sigma > 0.0) {
            problems.push(format!("rbf_sigma must be positive, got {}", self.rbf_sigma));
        }
        if let Err(e) = self.spec.validate() {
            problems.push(e.to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(config_err(problems.join("; ")))
        }
    }
}

/// Predicts every test instance and scores the eating class.
pub fn evaluate(model: &ProximityModel, test: &[Instance]) -> Result<Metrics> {
    let pairs = test
        .par_iter()
        .map(|x| {
            let truth = x.label.ok_or_else(|| usage_err(format!("test instance {} has no label", x.id)))?;
            if x.id.is_synthetic() {
                return Err(usage_err(format!("synthetic instance {} in an evaluation set", x.id)));
            }
            Ok((truth, model.predict(&x.features)?.label))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Metrics::from_counts(super::ConfusionCounts::from_pairs(pairs)))
}

/// The majority-class predictor's score on `test`, with the majority taken
/// from `train`.
pub fn majority_baseline(train: &[Label], test: &[Label]) -> Metrics {
    let eating = train.iter().filter(|l| l.is_eating()).count();
    let majority = Label::from_bool(2 * eating > train.len());
    Metrics::from_counts(super::ConfusionCounts::from_pairs(test.iter().map(|&t| (t, majority))))
}

/// A pool to query and a disjoint labeled test set.
#[derive(Debug, Clone)]
pub struct OfflineScenario {
    /// Unlabeled pool; the oracle knows the labels.
    pub pool: Vec<Instance>,
    pub pool_truth: Vec<Label>,
    pub test: Vec<Instance>,
}

impl OfflineScenario {
    /// Stratified split of labeled instances into a train pool (labels
    /// hidden behind the oracle) and a test set.
    pub fn split(all: &[Instance], train_fraction: f64, seed: u64) -> Result<Self> {
        let labels = all
            .iter()
            .map(|x| x.label.ok_or_else(|| usage_err(format!("instance {} has no label", x.id))))
            .collect::<Result<Vec<_>>>()?;
        let (train, test) = stratified_split(&labels, train_fraction, seed)?;
        Ok(OfflineScenario {
            pool: train.iter().map(|&i| all[i].clone().with_label(None)).collect(),
            pool_truth: train.iter().map(|&i| labels[i]).collect(),
            test: test.iter().map(|&i| all[i].clone()).collect(),
        })
    }

    pub fn oracle(&self) -> ReplayOracle {
        ReplayOracle::new(self.pool.iter().map(|x| x.id).zip(self.pool_truth.iter().copied()))
    }
}

#[derive(Debug, Clone)]
pub struct OfflineTrial {
    /// Test metrics after each model update; entry 0 is the initial model
    /// when one exists.
    pub per_iteration: Vec<(usize, Metrics)>,
    pub final_metrics: Metrics,
    pub log: Vec<QueryLogEntry>,
    pub iterations: Vec<IterationStats>,
}

pub fn offline_trial(scenario: &OfflineScenario, config: &OfflineConfig) -> Result<OfflineTrial> {
    let mut oracle = scenario.oracle();
    let mut per_iteration = Vec::new();
    let mut failure = None;
    let run = run_offline_observed(&[], &scenario.pool, &mut oracle, config, |it, model| {
        match evaluate(model, &scenario.test) {
            Ok(m) => per_iteration.push((it, m)),
            Err(e) => failure = failure.take().or(Some(e)),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let final_metrics = per_iteration.last().map(|(_, m)| *m).expect("at least one iteration ran");
    Ok(OfflineTrial { per_iteration, final_metrics, log: run.log, iterations: run.iterations })
}

/// A seed model's data, one subject's stream and that subject's held-out
/// windows.
#[derive(Debug, Clone)]
pub struct StreamScenario {
    pub lab: Vec<Instance>,
    pub stream: Vec<StreamItem>,
    pub stream_truth: Vec<Label>,
    pub test: Vec<Instance>,
}

impl From<super::SyntheticData> for StreamScenario {
    fn from(d: super::SyntheticData) -> Self {
        StreamScenario { lab: d.pool, stream: d.stream, stream_truth: d.stream_truth, test: d.test }
    }
}

#[derive(Debug, Clone)]
pub struct StreamTrial {
    pub policy: LambdaPolicy,
    pub budget: usize,
    /// Held-out metrics of the model after the stream.
    pub metrics: Metrics,
    /// Metrics of the per-arrival predictions made during the stream.
    pub prequential: Metrics,
    pub events: Vec<StreamEvent>,
}

impl StreamTrial {
    pub fn query_times(&self) -> Vec<f64> {
        self.events.iter().filter(|e| e.decision == Decision::Queried).map(|e| e.t_ms).collect()
    }
}

/// Entropies of the seed model's unlabeled lab nodes: the training-time
/// informativeness distribution the static threshold is drawn from.
pub fn training_entropies(model: &ProximityModel) -> Vec<f64> {
    model
        .graph
        .nodes()
        .iter()
        .filter(|n| !n.is_labeled())
        .map(|n| entropy_unchecked(n.distribution.probabilities()))
        .collect()
}

/// The static threshold for a stream: the seed model's training entropies
/// cut at the share of the first interval's arrivals the budget can cover.
pub fn static_threshold(model: &ProximityModel, stream: &[StreamItem], budget: usize, interval_ms: f64) -> Result<f64> {
    if budget == 0 {
        return Ok(f64::INFINITY);
    }
    let per_interval = match stream.first() {
        Some(first) => stream.iter().filter(|s| s.t_ms < first.t_ms + interval_ms).count(),
        None => 0,
    };
    let ratio = (budget as f64 / per_interval.max(1) as f64).min(1.0);
    static_lambda(&training_entropies(model), ratio)
}

pub fn stream_trial(scenario: &StreamScenario, policy: LambdaPolicy, settings: &StreamSettings) -> Result<StreamTrial> {
    let mut model = ProximityModel::fit(&scenario.lab, settings.kernel, settings.propagation)?;
    let mut config = StreamConfig::new(policy, settings.budget);
    config.interval_ms = settings.interval_ms;
    config.update_sweeps = settings.update_sweeps;
    if policy == LambdaPolicy::Static {
        config.static_lambda = Some(static_threshold(&model, &scenario.stream, settings.budget, settings.interval_ms)?);
    }
    let mut oracle = ReplayOracle::new(
        scenario.stream.iter().map(|s| s.instance.id).zip(scenario.stream_truth.iter().copied()),
    );
    let run = run_stream(&mut model, &scenario.stream, &mut oracle, &config)?;
    let prequential = Metrics::from_counts(super::ConfusionCounts::from_pairs(
        scenario.stream_truth.iter().copied().zip(run.events.iter().map(|e| e.predicted)),
    ));
    Ok(StreamTrial {
        policy,
        budget: settings.budget,
        metrics: evaluate(&model, &scenario.test)?,
        prequential,
        events: run.events,
    })
}

fn metric_row(m: &Metrics) -> [String; 3] {
    [fmt_metric(m.precision), fmt_metric(m.recall), fmt_metric(m.f_score)]
}

/// Runs one recipe. Recipes on real data return a skipped report when the
/// datasets are missing.
pub fn run_experiment(recipe: Recipe, config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let mut report = ExperimentReport::new(recipe, config)?;
    match recipe {
        Recipe::BudgetSweep => budget_sweep(config, &mut report)?,
        Recipe::LambdaCompare => lambda_compare(config, &mut report)?,
        Recipe::EntropyVsUniform => selection_compare(config, &mut report)?,
        Recipe::KernelCompare => kernel_compare(config, &mut report)?,
        Recipe::OfflineEval => offline_eval(config, &mut report)?,
    }
    Ok(report)
}

/// Per-seed streaming scenarios: generated, or one per subject session of
/// the free-living dataset.
fn stream_scenarios(config: &ExperimentConfig, drift: bool) -> Result<std::result::Result<Vec<(String, StreamScenario)>, String>> {
    if config.synthetic {
        let scenarios = config
            .seeds
            .par_iter()
            .map(|&seed| {
                let spec = SyntheticStreamSpec { seed, drift: drift.then_some(config.drift), ..config.spec.clone() };
                Ok((format!("seed-{seed}"), StreamScenario::from(generate_synthetic(&spec)?)))
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(Ok(scenarios));
    }
    let Some(root) = &config.data_dir else {
        return Ok(Err("data unavailable: no data directory configured".into()));
    };
    let (Some(lab), Some(wild)) = (Dataset::open(&root.join("SW3S"))?, Dataset::open(&root.join("SW3U"))?) else {
        return Ok(Err(format!("data unavailable: SW3S and SW3U are required under {}", root.display())));
    };
    let lab_windows = labeled_windows(&lab, config)?;
    let labels: Vec<Label> = lab_windows.iter().filter_map(|w| w.label).collect();
    let rows: Vec<&[f64]> = lab_windows.iter().map(|w| w.features.values.as_slice()).collect();
    let keep = config.chi2_keep.unwrap_or(rows.first().map_or(0, |r| r.len().div_ceil(2)));
    let mask = chi2_select(&rows, &labels, keep)?;
    let labeled_count = (config.spec.lab_labeled_fraction * lab_windows.len() as f64).round() as usize;
    let lab_instances = lab_windows
        .iter()
        .enumerate()
        .map(|(i, w)| {
            Ok(Instance {
                id: InstanceId(i as u64),
                features: mask.apply(&w.features.values)?,
                label: if i < labeled_count { w.label } else { None },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    let mut next_id = lab_instances.len() as u64;
    for path in &wild.sessions {
        let windows = session_windows(path, &wild, config)?;
        let windows: Vec<SegmentFeatures> = windows.into_iter().filter(|w| w.label.is_some()).collect();
        let cut = (windows.len() as f64 * 0.8).round() as usize;
        let mut scenario = StreamScenario { lab: lab_instances.clone(), stream: Vec::new(), stream_truth: Vec::new(), test: Vec::new() };
        for (i, w) in windows.iter().enumerate() {
            let x = Instance::new(next_id, mask.apply(&w.features.values)?);
            next_id += 1;
            let label = w.label.expect("filtered to labeled windows");
            if i < cut {
                scenario.stream.push(StreamItem { t_ms: w.start_ms, end_ms: w.end_ms, instance: x });
                scenario.stream_truth.push(label);
            } else {
                scenario.test.push(x.with_label(Some(label)));
            }
        }
        let name = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        out.push((name, scenario));
    }
    Ok(Ok(out))
}

fn session_windows(path: &Path, dataset: &Dataset, config: &ExperimentConfig) -> Result<Vec<SegmentFeatures>> {
    let stream = load_session(path, &dataset.manifest)?;
    session_features(&stream, &dataset.manifest, config.window_seconds, config.cutoff_hz)
}

fn labeled_windows(dataset: &Dataset, config: &ExperimentConfig) -> Result<Vec<SegmentFeatures>> {
    let mut out = Vec::new();
    for path in &dataset.sessions {
        out.extend(session_windows(path, dataset, config)?.into_iter().filter(|w| w.label.is_some()));
    }
    Ok(out)
}

fn skip(report: &mut ExperimentReport, reason: String) {
    log::warn!("{}: {reason}", report.recipe);
    report.status = RunStatus::Skipped { reason };
}

fn budget_sweep(config: &ExperimentConfig, report: &mut ExperimentReport) -> Result<()> {
    let scenarios = match stream_scenarios(config, false)? {
        Ok(s) => s,
        Err(reason) => return Ok(skip(report, reason)),
    };
    let trials: Vec<Vec<StreamTrial>> = scenarios
        .par_iter()
        .map(|(_, scn)| {
            config
                .budgets
                .iter()
                .map(|&b| stream_trial(scn, LambdaPolicy::Adaptive, &StreamSettings { budget: b, ..config.stream }))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut runs = Table::new("budget_sweep", &["subject", "budget", "queries", "precision", "recall", "f_score"]);
    let mut times = Table::new("query_times", &["subject", "budget", "t_ms"]);
    for ((name, _), row) in scenarios.iter().zip(&trials) {
        for t in row {
            let q = t.query_times();
            runs.push([name.clone(), t.budget.to_string(), q.len().to_string()].into_iter().chain(metric_row(&t.metrics)));
            for tq in q {
                times.push([name.clone(), t.budget.to_string(), tq.to_string()]);
            }
        }
    }
    let mut means = Table::new("budget_sweep_mean", &["budget", "mean_precision", "mean_recall", "mean_f_score", "std_f_score"]);
    for (j, &b) in config.budgets.iter().enumerate() {
        let col = |f: fn(&Metrics) -> f64| trials.iter().map(|row| f(&row[j].metrics)).collect::<Vec<_>>();
        let fs = col(|m| m.f_score);
        means.push([
            b.to_string(),
            fmt_metric(mean(&col(|m| m.precision))),
            fmt_metric(mean(&col(|m| m.recall))),
            fmt_metric(mean(&fs)),
            fmt_metric(std_dev(&fs)),
        ]);
        report.summary.push(format!("budget {b}: mean f-score {:.4}", mean(&fs)));
    }
    report.tables.extend([means, runs, times]);
    Ok(())
}

fn lambda_compare(config: &ExperimentConfig, report: &mut ExperimentReport) -> Result<()> {
    let scenarios = match stream_scenarios(config, true)? {
        Ok(s) => s,
        Err(reason) => return Ok(skip(report, reason)),
    };
    let trials: Vec<Vec<StreamTrial>> = scenarios
        .par_iter()
        .map(|(_, scn)| {
            LambdaPolicy::ALL.iter().map(|&p| stream_trial(scn, p, &config.stream)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut runs = Table::new("lambda_compare", &["subject", "policy", "queries", "precision", "recall", "f_score"]);
    let mut times = Table::new("query_times", &["subject", "policy", "t_ms"]);
    for ((name, _), row) in scenarios.iter().zip(&trials) {
        for t in row {
            let q = t.query_times();
            runs.push([name.clone(), t.policy.name().into(), q.len().to_string()].into_iter().chain(metric_row(&t.metrics)));
            for tq in q {
                times.push([name.clone(), t.policy.name().to_string(), tq.to_string()]);
            }
        }
    }
    let mut means = Table::new("lambda_compare_mean", &["policy", "mean_precision", "mean_recall", "mean_f_score", "std_f_score"]);
    for (j, p) in LambdaPolicy::ALL.iter().enumerate() {
        let col = |f: fn(&Metrics) -> f64| trials.iter().map(|row| f(&row[j].metrics)).collect::<Vec<_>>();
        let fs = col(|m| m.f_score);
        means.push([
            p.name().to_string(),
            fmt_metric(mean(&col(|m| m.precision))),
            fmt_metric(mean(&col(|m| m.recall))),
            fmt_metric(mean(&fs)),
            fmt_metric(std_dev(&fs)),
        ]);
        report.summary.push(format!("{} lambda: mean f-score {:.4}", p.name(), mean(&fs)));
    }
    report.tables.extend([means, runs, times]);
    Ok(())
}

/// Labeled offline data sets, one per dataset name: generated per seed, or
/// the semi-controlled recordings.
fn offline_sources(config: &ExperimentConfig) -> Result<Vec<(String, std::result::Result<Vec<Instance>, String>)>> {
    if config.synthetic {
        return Ok(vec![("synthetic".to_string(), Ok(Vec::new()))]);
    }
    let Some(root) = &config.data_dir else {
        return Ok(vec![("SW3S".into(), Err("data unavailable".into())), ("SW6S".into(), Err("data unavailable".into()))]);
    };
    let mut out = Vec::new();
    for name in ["SW3S", "SW6S"] {
        match Dataset::open(&root.join(name))? {
            None => out.push((name.to_string(), Err("data unavailable".to_string()))),
            Some(ds) => {
                let windows = labeled_windows(&ds, config)?;
                let instances = windows
                    .iter()
                    .enumerate()
                    .map(|(i, w)| Instance { id: InstanceId(i as u64), features: w.features.values.clone(), label: w.label })
                    .collect();
                out.push((name.to_string(), Ok(instances)));
            }
        }
    }
    Ok(out)
}

/// The seed's scenario for a source; real data gets χ² selection fitted on
/// the train part only.
fn offline_scenario(config: &ExperimentConfig, data: &[Instance], seed: u64) -> Result<OfflineScenario> {
    if config.synthetic {
        let all = generate_pool(&config.spec, config.offline_pool_size, config.offline_positive_rate, seed)?;
        return OfflineScenario::split(&all, config.train_fraction, seed);
    }
    let mut scn = OfflineScenario::split(data, config.train_fraction, seed)?;
    let rows: Vec<&[f64]> = scn.pool.iter().map(|x| x.features.as_slice()).collect();
    let keep = config.chi2_keep.unwrap_or(rows.first().map_or(0, |r| r.len().div_ceil(2)));
    let mask: FeatureSelectionMask = chi2_select(&rows, &scn.pool_truth, keep)?;
    for x in scn.pool.iter_mut().chain(scn.test.iter_mut()) {
        x.features = mask.apply(&x.features)?;
    }
    Ok(scn)
}

/// Paired runs of several offline configurations on the same scenarios.
fn offline_grid(
    config: &ExperimentConfig,
    variants: &[(&str, OfflineConfig)],
) -> Result<Vec<(String, std::result::Result<Vec<(u64, Vec<OfflineTrial>, Metrics)>, String>)>> {
    let mut out = Vec::new();
    for (dataset, source) in offline_sources(config)? {
        let data = match source {
            Ok(d) => d,
            Err(reason) => {
                out.push((dataset, Err(reason)));
                continue;
            }
        };
        let per_seed = config
            .seeds
            .par_iter()
            .map(|&seed| {
                let scn = offline_scenario(config, &data, seed)?;
                let test_labels: Vec<Label> = scn.test.iter().filter_map(|x| x.label).collect();
                let baseline = majority_baseline(&scn.pool_truth, &test_labels);
                let trials = variants
                    .iter()
                    .map(|(_, v)| offline_trial(&scn, &OfflineConfig { seed, ..*v }))
                    .collect::<Result<Vec<_>>>()?;
                Ok((seed, trials, baseline))
            })
            .collect::<Result<Vec<_>>>()?;
        out.push((dataset, Ok(per_seed)));
    }
    Ok(out)
}

fn curves_and_means(
    report: &mut ExperimentReport,
    name: &str,
    label_column: &str,
    variants: &[(&str, OfflineConfig)],
    grid: Vec<(String, std::result::Result<Vec<(u64, Vec<OfflineTrial>, Metrics)>, String>)>,
) {
    let mut curves = Table::new(name, &["dataset", "seed", label_column, "iteration", "precision", "recall", "f_score"]);
    let mut finals = Table::new(&format!("{name}_final"), &["dataset", "seed", label_column, "precision", "recall", "f_score"]);
    let mut means = Table::new(&format!("{name}_mean"), &["dataset", label_column, "mean_precision", "mean_recall", "mean_f_score", "std_f_score"]);
    let mut missing = Vec::new();
    let mut any = false;
    for (dataset, result) in grid {
        let per_seed = match result {
            Ok(p) => p,
            Err(reason) => {
                report.summary.push(format!("{dataset}: skipped ({reason})"));
                missing.push(dataset);
                continue;
            }
        };
        any = true;
        let mut finals_by_variant: HashMap<&str, Vec<Metrics>> = HashMap::new();
        for (seed, trials, baseline) in &per_seed {
            for ((vname, _), t) in variants.iter().zip(trials) {
                for (it, m) in &t.per_iteration {
                    curves.push([dataset.clone(), seed.to_string(), vname.to_string(), it.to_string()].into_iter().chain(metric_row(m)));
                }
                finals.push([dataset.clone(), seed.to_string(), vname.to_string()].into_iter().chain(metric_row(&t.final_metrics)));
                finals_by_variant.entry(vname).or_default().push(t.final_metrics);
            }
            finals.push([dataset.clone(), seed.to_string(), "majority".into()].into_iter().chain(metric_row(baseline)));
            finals_by_variant.entry("majority").or_default().push(*baseline);
        }
        for vname in variants.iter().map(|(n, _)| *n).chain(["majority"]) {
            let ms = &finals_by_variant[vname];
            let col = |f: fn(&Metrics) -> f64| ms.iter().map(f).collect::<Vec<_>>();
            let fs = col(|m| m.f_score);
            means.push([
                dataset.clone(),
                vname.to_string(),
                fmt_metric(mean(&col(|m| m.precision))),
                fmt_metric(mean(&col(|m| m.recall))),
                fmt_metric(mean(&fs)),
                fmt_metric(std_dev(&fs)),
            ]);
            report.summary.push(format!("{dataset} {vname}: mean f-score {:.4}, mean recall {:.4}", mean(&fs), mean(&col(|m| m.recall))));
        }
    }
    if !any {
        report.status = RunStatus::Skipped { reason: format!("data unavailable: {}", missing.join(", ")) };
    }
    report.tables.extend([means, finals, curves]);
}

fn selection_compare(config: &ExperimentConfig, report: &mut ExperimentReport) -> Result<()> {
    let variants = [
        ("entropy", OfflineConfig { selection: SelectionStrategy::Entropy, ..config.offline }),
        ("uniform", OfflineConfig { selection: SelectionStrategy::Uniform, ..config.offline }),
    ];
    let grid = offline_grid(config, &variants)?;
    curves_and_means(report, "entropy_vs_uniform", "strategy", &variants, grid);
    Ok(())
}

fn kernel_compare(config: &ExperimentConfig, report: &mut ExperimentReport) -> Result<()> {
    let knn = match config.offline.kernel {
        k @ Kernel::Knn { .. } => k,
        Kernel::Rbf { .. } => Kernel::Knn { k: DEFAULT_K },
    };
    let variants = [
        ("knn", OfflineConfig { kernel: knn, ..config.offline }),
        ("rbf", OfflineConfig { kernel: Kernel::Rbf { sigma: config.rbf_sigma }, ..config.offline }),
    ];
    let grid = offline_grid(config, &variants)?;
    curves_and_means(report, "kernel_compare", "kernel", &variants, grid);
    Ok(())
}

fn offline_eval(config: &ExperimentConfig, report: &mut ExperimentReport) -> Result<()> {
    let variants = [
        ("entropy", OfflineConfig { selection: SelectionStrategy::Entropy, ..config.offline }),
        ("uniform", OfflineConfig { selection: SelectionStrategy::Uniform, ..config.offline }),
    ];
    let grid = offline_grid(config, &variants)?;
    curves_and_means(report, "offline_eval", "method", &variants, grid);
    Ok(())
}
