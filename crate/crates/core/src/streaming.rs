//! Single-pass stream learning under a per-interval query budget.

use std::io::Write;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, data_err, usage_err, PalsError, Result};
use crate::label::{Instance, InstanceId, Label};
use crate::oracle::{Oracle, QueryRequest};
use crate::proximity::ProximityModel;
use crate::selection::{entropy_unchecked, QueryBudget};

/// λ before any budget has accrued: no entropy clears it.
pub const LAMBDA_SENTINEL: f64 = f64::INFINITY;
pub const DEFAULT_INTERVAL_MS: f64 = 3_600_000.0;
/// Warm-started propagation sweeps after each streaming query.
pub const DEFAULT_UPDATE_SWEEPS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaPolicy {
    Static,
    Adaptive,
    Best,
}

impl LambdaPolicy {
    pub const ALL: [LambdaPolicy; 3] = [LambdaPolicy::Static, LambdaPolicy::Adaptive, LambdaPolicy::Best];

    pub fn name(self) -> &'static str {
        match self {
            LambdaPolicy::Static => "static",
            LambdaPolicy::Adaptive => "adaptive",
            LambdaPolicy::Best => "best",
        }
    }
}

impl std::str::FromStr for LambdaPolicy {
    type Err = PalsError;

    fn from_str(s: &str) -> Result<Self> {
        LambdaPolicy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| usage_err(format!("unknown lambda policy {s:?} (expected static, adaptive or best)")))
    }
}

/// ⌊(t/T)·Δ⌋, with t clamped to the interval.
pub fn adaptive_index(elapsed_ms: f64, interval_ms: f64, budget: usize) -> usize {
    let frac = (elapsed_ms / interval_ms).clamp(0.0, 1.0);
    (frac * budget as f64).floor() as usize
}

/// The `index`-th largest entry (1-based) of a descending list, the
/// sentinel for index 0 and the minimum past the end.
pub fn lambda_at(descending: &[f64], index: usize) -> f64 {
    match (index, descending.last()) {
        (0, _) | (_, None) => LAMBDA_SENTINEL,
        (i, Some(&min)) if i > descending.len() => min,
        (i, _) => descending[i - 1],
    }
}

/// The ⌈ratio·n⌉-th largest training entropy.
pub fn static_lambda(training_entropies: &[f64], budget_ratio: f64) -> Result<f64> {
    if training_entropies.is_empty() {
        return Err(config_err("static lambda needs at least one training entropy"));
    }
    if !(budget_ratio > 0.0 && budget_ratio <= 1.0) {
        return Err(config_err(format!("budget ratio must be in (0, 1], got {budget_ratio}")));
    }
    let sorted = sort_descending(training_entropies);
    let rank = (budget_ratio * sorted.len() as f64).ceil() as usize;
    Ok(lambda_at(&sorted, rank.max(1)))
}

/// The `delta`-th largest entropy of the interval; the sentinel for
/// `delta == 0`.
pub fn best_lambda(interval_entropies: &[f64], delta: usize) -> f64 {
    lambda_at(&sort_descending(interval_entropies), delta)
}

fn sort_descending(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Threshold bookkeeping for one policy within the current interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdState {
    pub policy: LambdaPolicy,
    lambda: f64,
    /// Entropies seen this interval, largest first.
    history: Vec<f64>,
    interval_ms: f64,
    budget: usize,
    elapsed_ms: f64,
}

impl ThresholdState {
    /// Adaptive policy: starts at the sentinel.
    pub fn adaptive(interval_ms: f64, budget: usize) -> Self {
        Self::with_lambda(LambdaPolicy::Adaptive, LAMBDA_SENTINEL, interval_ms, budget)
    }

    /// Static or best policy with a given threshold.
    pub fn fixed(policy: LambdaPolicy, lambda: f64, interval_ms: f64, budget: usize) -> Self {
        Self::with_lambda(policy, lambda, interval_ms, budget)
    }

    fn with_lambda(policy: LambdaPolicy, lambda: f64, interval_ms: f64, budget: usize) -> Self {
        ThresholdState { policy, lambda, history: Vec::new(), interval_ms, budget, elapsed_ms: 0.0 }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn history(&self) -> &[f64] {
        &self.history
    }

    pub fn elapsed_ms(&self) -> f64 {
        self.elapsed_ms
    }

    pub fn interval_ms(&self) -> f64 {
        self.interval_ms
    }

    /// Records an evaluated entropy at `elapsed_ms` into the interval and
    /// updates λ. Call after the query decision.
    pub fn observe(&mut self, entropy: f64, elapsed_ms: f64) -> f64 {
        let pos = self.history.partition_point(|&h| h >= entropy);
        self.history.insert(pos, entropy);
        self.elapsed_ms = elapsed_ms.clamp(0.0, self.interval_ms);
        if self.policy == LambdaPolicy::Adaptive {
            let index = adaptive_index(self.elapsed_ms, self.interval_ms, self.budget);
            self.lambda = lambda_at(&self.history, index);
        }
        self.lambda
    }

    /// Decides on one entropy without an oracle: query iff `entropy >= λ`
    /// and budget remains, then updates λ.
    pub fn offer(&mut self, entropy: f64, elapsed_ms: f64, budget: &mut QueryBudget) -> bool {
        let queried = entropy >= self.lambda && budget.try_spend();
        self.observe(entropy, elapsed_ms);
        queried
    }

    /// Starts a new interval. `lambda` replaces the threshold for the best
    /// policy; the adaptive policy returns to the sentinel.
    pub fn reset(&mut self, lambda: Option<f64>) {
        self.history.clear();
        self.elapsed_ms = 0.0;
        match self.policy {
            LambdaPolicy::Adaptive => self.lambda = LAMBDA_SENTINEL,
            _ => {
                if let Some(l) = lambda {
                    self.lambda = l;
                }
            }
        }
    }
}

/// Runs [`ThresholdState::observe`] and returns the new λ.
pub fn adaptive_lambda(state: &mut ThresholdState, new_entropy: f64) -> f64 {
    let t = state.elapsed_ms;
    state.observe(new_entropy, t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Queried,
    Skipped,
}

impl Decision {
    pub fn name(self) -> &'static str {
        match self {
            Decision::Queried => "queried",
            Decision::Skipped => "skipped",
        }
    }
}

/// One arrival: its features and time span.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamItem {
    pub t_ms: f64,
    pub end_ms: f64,
    pub instance: Instance,
}

impl StreamItem {
    pub fn new(t_ms: f64, instance: Instance) -> Self {
        StreamItem { t_ms, end_ms: t_ms, instance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamEvent {
    pub t_ms: f64,
    pub id: InstanceId,
    pub entropy: f64,
    pub lambda: f64,
    pub decision: Decision,
    pub true_label: Option<Label>,
    pub predicted: Label,
    /// Why a query became a skip, or the oracle's raw answer.
    pub oracle_flag: Option<String>,
}

/// Processes one arrival: predict, maybe query, update the model, then
/// update λ.
pub fn step(
    model: &mut ProximityModel,
    item: &StreamItem,
    elapsed_ms: f64,
    state: &mut ThresholdState,
    budget: &mut QueryBudget,
    oracle: &mut dyn Oracle,
    update_sweeps: usize,
) -> Result<StreamEvent> {
    step_scored(model, item, None, elapsed_ms, state, budget, oracle, update_sweeps)
}

/// [`step`] with the decision made on `score` instead of the current
/// model's entropy. The best policy passes entropies fixed at interval
/// start.
#[allow(clippy::too_many_arguments)]
pub fn step_scored(
    model: &mut ProximityModel,
    item: &StreamItem,
    score: Option<f64>,
    elapsed_ms: f64,
    state: &mut ThresholdState,
    budget: &mut QueryBudget,
    oracle: &mut dyn Oracle,
    update_sweeps: usize,
) -> Result<StreamEvent> {
    let prediction = model.predict(&item.instance.features)?;
    let entropy = score.unwrap_or_else(|| entropy_unchecked(prediction.distribution.probabilities()));
    let lambda = state.lambda();
    let mut event = StreamEvent {
        t_ms: item.t_ms,
        id: item.instance.id,
        entropy,
        lambda,
        decision: Decision::Skipped,
        true_label: None,
        predicted: prediction.label,
        oracle_flag: None,
    };
    if entropy >= lambda && budget.try_spend() {
        let request = QueryRequest::new(item.instance.id).with_span(item.t_ms, item.end_ms);
        match oracle.query(&request) {
            Ok(label) => {
                model.add_labeled(&item.instance, label)?;
                model.repropagate(update_sweeps)?;
                event.decision = Decision::Queried;
                event.true_label = Some(label);
                event.oracle_flag = oracle.last_response().map(str::to_string);
            }
            Err(e) => {
                budget.refund();
                log::info!("query for {} not answered: {e}", item.instance.id);
                event.oracle_flag = Some(oracle_flag(&e).to_string());
            }
        }
    }
    state.observe(entropy, elapsed_ms);
    Ok(event)
}

fn oracle_flag(e: &crate::OracleError) -> &'static str {
    use crate::OracleError::*;
    match e {
        Declined(_) => "declined",
        Timeout(_) => "timeout",
        Unknown(_) => "unknown",
        Unavailable(_) => "unavailable",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub policy: LambdaPolicy,
    /// Queries allowed per interval.
    pub budget: usize,
    pub interval_ms: f64,
    /// Threshold for the static policy.
    pub static_lambda: Option<f64>,
    /// Permits the best policy, which looks at each interval in advance.
    pub two_pass: bool,
    pub update_sweeps: usize,
    /// Replay pacing; `None` runs as fast as possible.
    pub speedup: Option<f64>,
}

impl StreamConfig {
    pub fn new(policy: LambdaPolicy, budget: usize) -> Self {
        StreamConfig {
            policy,
            budget,
            interval_ms: DEFAULT_INTERVAL_MS,
            static_lambda: None,
            two_pass: policy == LambdaPolicy::Best,
            update_sweeps: DEFAULT_UPDATE_SWEEPS,
            speedup: None,
        }
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.interval_ms > 0.0 && self.interval_ms.is_finite()) {
            out.push(format!("interval must be positive, got {} ms", self.interval_ms));
        }
        if self.update_sweeps == 0 {
            out.push("update_sweeps must be >= 1".into());
        }
        match (self.policy, self.static_lambda) {
            (LambdaPolicy::Static, None) => out.push("static policy needs a lambda".into()),
            (LambdaPolicy::Static, Some(l)) if !(l >= 0.0) => out.push(format!("static lambda must be >= 0, got {l}")),
            _ => {}
        }
        if self.policy == LambdaPolicy::Best && !self.two_pass {
            out.push("best lambda needs two-pass replay".into());
        }
        if let Some(s) = self.speedup {
            if !(s > 0.0 && s.is_finite()) {
                out.push(format!("speedup must be positive, got {s}"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(config_err(p.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalStats {
    pub interval: usize,
    pub start_ms: f64,
    pub events: usize,
    pub queries: usize,
    pub lambda_at_start: f64,
}

#[derive(Debug, Clone)]
pub struct StreamRun {
    pub events: Vec<StreamEvent>,
    pub intervals: Vec<IntervalStats>,
}

impl StreamRun {
    pub fn queries(&self) -> usize {
        self.events.iter().filter(|e| e.decision == Decision::Queried).count()
    }
}

/// Replays `items` through the model. Intervals of `config.interval_ms`
/// start at the first arrival; each restarts the budget.
pub fn run_stream(
    model: &mut ProximityModel,
    items: &[StreamItem],
    oracle: &mut dyn Oracle,
    config: &StreamConfig,
) -> Result<StreamRun> {
    config.validate()?;
    if model.graph.is_empty() {
        return Err(usage_err("the stream model needs a seed graph"));
    }
    for w in items.windows(2) {
        if w[1].t_ms <= w[0].t_ms {
            return Err(data_err(format!("stream timestamps must increase ({} after {})", w[1].t_ms, w[0].t_ms)));
        }
    }
    let Some(first) = items.first() else {
        return Ok(StreamRun { events: Vec::new(), intervals: Vec::new() });
    };
    let t0 = first.t_ms;
    let interval_of = |t: f64| ((t - t0) / config.interval_ms).floor() as usize;

    let mut state = match config.policy {
        LambdaPolicy::Adaptive => ThresholdState::adaptive(config.interval_ms, config.budget),
        policy => ThresholdState::fixed(
            policy,
            config.static_lambda.unwrap_or(LAMBDA_SENTINEL),
            config.interval_ms,
            config.budget,
        ),
    };
    let mut budget = QueryBudget::new(config.budget);
    let mut events = Vec::with_capacity(items.len());
    let mut intervals: Vec<IntervalStats> = Vec::new();
    let mut start = 0;
    while start < items.len() {
        let interval = interval_of(items[start].t_ms);
        let end = start + items[start..].partition_point(|it| interval_of(it.t_ms) == interval);
        let interval_start = t0 + interval as f64 * config.interval_ms;
        let mut fixed = Vec::new();
        if config.policy == LambdaPolicy::Best {
            for it in &items[start..end] {
                let p = model.predict(&it.instance.features)?;
                fixed.push(entropy_unchecked(p.distribution.probabilities()));
            }
        }
        state.reset((!fixed.is_empty()).then(|| best_lambda(&fixed, config.budget)));
        budget.reset();
        let mut stats = IntervalStats {
            interval,
            start_ms: interval_start,
            events: end - start,
            queries: 0,
            lambda_at_start: state.lambda(),
        };
        for (n, it) in items[start..end].iter().enumerate() {
            if let (Some(speed), Some(prev)) = (config.speedup, n.checked_sub(1).map(|p| &items[start + p])) {
                std::thread::sleep(Duration::from_secs_f64((it.t_ms - prev.t_ms).max(0.0) / 1000.0 / speed));
            }
            let score = fixed.get(n).copied();
            let ev = step_scored(model, it, score, it.t_ms - interval_start, &mut state, &mut budget, oracle, config.update_sweeps)?;
            if ev.decision == Decision::Queried {
                stats.queries += 1;
            }
            events.push(ev);
        }
        intervals.push(stats);
        start = end;
    }
    Ok(StreamRun { events, intervals })
}

pub const EVENT_LOG_HEADER: [&str; 7] =
    ["t_ms", "entropy", "lambda", "decision", "true_label_if_queried", "predicted_label", "oracle_flag"];

/// Writes the event log as CSV.
pub fn write_event_log<W: Write>(events: &[StreamEvent], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EVENT_LOG_HEADER)?;
    for e in events {
        w.write_record([
            e.t_ms.to_string(),
            e.entropy.to_string(),
            e.lambda.to_string(),
            e.decision.name().to_string(),
            e.true_label.map(|l| l.as_digit().to_string()).unwrap_or_default(),
            e.predicted.as_digit().to_string(),
            e.oracle_flag.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
