//! Metrics, data loading, synthetic data and experiment recipes.

mod data;
mod experiment;
mod metrics;
mod report;
mod synthetic;

pub use data::{load_session, parse_session, stratified_split, Dataset, FeatureRow, FeatureTable};
pub use experiment::{
    evaluate, majority_baseline, offline_trial, run_experiment, static_threshold, stream_trial, training_entropies,
    ExperimentConfig, OfflineScenario, OfflineTrial, Recipe, StreamScenario, StreamSettings, StreamTrial,
    DEFAULT_SWEEP_BUDGETS,
};
pub use metrics::{f_score, mean, precision, recall, std_dev, ConfusionCounts, Metrics, Rate};
pub use report::{create_run_dir, ExperimentReport, RunStatus, Table};
pub use synthetic::{
    generate_pool, generate_synthetic, DriftSchedule, SyntheticData, SyntheticStreamSpec, NOISE_BOUND,
    STREAM_ID_BASE, TEST_ID_BASE,
};

/// Fixed-precision rendering used in every metric CSV.
pub fn fmt_metric(v: f64) -> String {
    format!("{v:.6}")
}
