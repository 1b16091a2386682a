use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::label::{Instance, InstanceId, Label};
use crate::selection::derive_seed;
use crate::streaming::StreamItem;

pub const STREAM_ID_BASE: u64 = 1 << 40;
pub const TEST_ID_BASE: u64 = 1 << 41;

/// Noise is standard normal per coordinate, truncated to this bound.
pub const NOISE_BOUND: f64 = 3.0;
const NON_EATING_CLUSTERS: usize = 4;

/// Positive-rate change at a point in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftSchedule {
    /// Offset of the change, from stream start or from each period start.
    pub at_ms: f64,
    pub positive_rate: f64,
    /// Repeat the change every period (the rate reverts at period start).
    #[serde(default)]
    pub period_ms: Option<f64>,
}

impl Default for DriftSchedule {
    /// Eating becomes three times as common in the second half of each hour.
    fn default() -> Self {
        DriftSchedule { at_ms: 1_800_000.0, positive_rate: 0.2, period_ms: Some(3_600_000.0) }
    }
}

/// A desk-scale stand-in for lab and free-living recordings.
///
/// Non-eating windows come from four clusters at `±cluster_spread` on the
/// first two axes. Eating windows come from one cluster displaced from the
/// first non-eating cluster by [`SyntheticStreamSpec::class_gap`] along the
/// third axis; at `overlap = 0` the gap exceeds twice the noise bound and the
/// classes are separable. For the subject the displacement is rotated by
/// `subject_angle_deg` towards the fourth axis, so a lab-trained model has
/// not seen the subject's way of eating. Remaining axes are noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticStreamSpec {
    pub positive_rate: f64,
    pub dim: usize,
    pub overlap: f64,
    /// Distance of the non-eating clusters from the origin.
    pub cluster_spread: f64,
    pub subject_angle_deg: f64,
    pub duration_ms: f64,
    /// Time between consecutive stream windows.
    pub period_ms: f64,
    pub window_ms: f64,
    pub drift: Option<DriftSchedule>,
    pub lab_size: usize,
    pub lab_positive_rate: f64,
    /// Share of the lab pool that carries labels.
    pub lab_labeled_fraction: f64,
    pub test_size: usize,
    pub seed: u64,
}

impl Default for SyntheticStreamSpec {
    fn default() -> Self {
        SyntheticStreamSpec {
            positive_rate: 0.067,
            dim: 8,
            overlap: 0.5,
            cluster_spread: 4.0,
            subject_angle_deg: 90.0,
            duration_ms: 10_800_000.0,
            period_ms: 3_000.0,
            window_ms: 6_000.0,
            drift: None,
            lab_size: 400,
            lab_positive_rate: 0.25,
            lab_labeled_fraction: 0.25,
            test_size: 2000,
            seed: 0,
        }
    }
}

impl SyntheticStreamSpec {
    pub fn validate(&self) -> Result<()> {
        let rate_ok = |r: f64| r > 0.0 && r < 1.0;
        let mut problems = Vec::new();
        if !rate_ok(self.positive_rate) {
            problems.push(format!("positive_rate must be in (0, 1), got {}", self.positive_rate));
        }
        if !rate_ok(self.lab_positive_rate) {
            problems.push(format!("lab_positive_rate must be in (0, 1), got {}", self.lab_positive_rate));
        }
        if !(0.0..=1.0).contains(&self.lab_labeled_fraction) {
            problems.push(format!("lab_labeled_fraction must be in [0, 1], got {}", self.lab_labeled_fraction));
        }
        if self.dim < 4 {
            problems.push(format!("dim must be >= 4, got {}", self.dim));
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            problems.push(format!("overlap must be in [0, 1], got {}", self.overlap));
        }
        if !(self.duration_ms > 0.0) {
            problems.push(format!("duration must be positive, got {} ms", self.duration_ms));
        }
        if !(self.period_ms > 0.0 && self.window_ms > 0.0) {
            problems.push("period_ms and window_ms must be positive".into());
        }
        if let Some(d) = self.drift {
            if !rate_ok(d.positive_rate) {
                problems.push(format!("drift positive_rate must be in (0, 1), got {}", d.positive_rate));
            }
            if d.period_ms.is_some_and(|p| !(p > 0.0)) {
                problems.push("drift period must be positive".into());
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(config_err(problems.join("; ")))
        }
    }

    pub fn stream_len(&self) -> usize {
        (self.duration_ms / self.period_ms).floor() as usize
    }

    /// Positive rate in force at `t_ms`.
    pub fn rate_at(&self, t_ms: f64) -> f64 {
        match self.drift {
            None => self.positive_rate,
            Some(d) => {
                let offset = d.period_ms.map_or(t_ms, |p| t_ms.rem_euclid(p));
                if offset >= d.at_ms {
                    d.positive_rate
                } else {
                    self.positive_rate
                }
            }
        }
    }

    pub fn class_gap(&self) -> f64 {
        2.0 * NOISE_BOUND * 1.08 * (1.0 - self.overlap)
    }

    fn center(&self, label: Label, cluster: usize, subject: bool) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        match label {
            Label::Eating => {
                let angle = if subject { self.subject_angle_deg.to_radians() } else { 0.0 };
                c[0] = self.cluster_spread;
                c[2] = self.class_gap() * angle.cos();
                c[3] = self.class_gap() * angle.sin();
            }
            Label::NonEating => {
                let sign = if cluster % 2 == 0 { 1.0 } else { -1.0 };
                c[cluster / 2 % 2] = sign * self.cluster_spread;
            }
        }
        c
    }

    fn sample(&self, rng: &mut ChaCha8Rng, label: Label, subject: bool) -> Vec<f64> {
        let cluster = match label {
            Label::Eating => 0,
            Label::NonEating => rng.random_range(0..NON_EATING_CLUSTERS),
        };
        self.center(label, cluster, subject).into_iter().map(|m| m + truncated_normal(rng)).collect()
    }
}

fn truncated_normal(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= NOISE_BOUND {
            return z;
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    /// Lab recordings; the labeled share carries labels.
    pub pool: Vec<Instance>,
    pub pool_truth: Vec<Label>,
    /// The subject's stream; instances carry no labels.
    pub stream: Vec<StreamItem>,
    pub stream_truth: Vec<Label>,
    /// Held-out subject windows with labels, drawn at the base positive rate.
    pub test: Vec<Instance>,
}

/// `n` labeled lab windows at `positive_rate`, independent of the stream.
pub fn generate_pool(spec: &SyntheticStreamSpec, n: usize, positive_rate: f64, seed: u64) -> Result<Vec<Instance>> {
    spec.validate()?;
    if !(positive_rate > 0.0 && positive_rate < 1.0) {
        return Err(config_err(format!("positive rate must be in (0, 1), got {positive_rate}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 4));
    Ok((0..n)
        .map(|i| {
            let label = Label::from_bool(rng.random_bool(positive_rate));
            Instance::labeled(i as u64, spec.sample(&mut rng, label, false), label)
        })
        .collect())
}

pub fn generate_synthetic(spec: &SyntheticStreamSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut lab_rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 1));
    let mut pool = Vec::with_capacity(spec.lab_size);
    let mut pool_truth = Vec::with_capacity(spec.lab_size);
    let labeled_count = (spec.lab_labeled_fraction * spec.lab_size as f64).round() as usize;
    for i in 0..spec.lab_size {
        let label = Label::from_bool(lab_rng.random_bool(spec.lab_positive_rate));
        let x = spec.sample(&mut lab_rng, label, false);
        pool_truth.push(label);
        pool.push(Instance { id: InstanceId(i as u64), features: x, label: (i < labeled_count).then_some(label) });
    }

    let mut stream_rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 2));
    let n = spec.stream_len();
    let mut stream = Vec::with_capacity(n);
    let mut stream_truth = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 * spec.period_ms;
        let label = Label::from_bool(stream_rng.random_bool(spec.rate_at(t)));
        let x = spec.sample(&mut stream_rng, label, true);
        stream_truth.push(label);
        stream.push(StreamItem { t_ms: t, end_ms: t + spec.window_ms, instance: Instance::new(STREAM_ID_BASE + i as u64, x) });
    }

    let mut test_rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 3));
    let test = (0..spec.test_size)
        .map(|i| {
            let label = Label::from_bool(test_rng.random_bool(spec.positive_rate));
            Instance::labeled(TEST_ID_BASE + i as u64, spec.sample(&mut test_rng, label, true), label)
        })
        .collect();

    Ok(SyntheticData { pool, pool_truth, stream, stream_truth, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positive_count_matches_rate() {
        let spec = SyntheticStreamSpec { duration_ms: 10_000.0 * 3_000.0, test_size: 0, ..Default::default() };
        let data = generate_synthetic(&spec).unwrap();
        assert_eq!(data.stream.len(), 10_000);
        let positives = data.stream_truth.iter().filter(|l| l.is_eating()).count();
        assert!((570..=770).contains(&positives), "{positives}");
    }

    #[test]
    fn same_seed_same_data() {
        let spec = SyntheticStreamSpec { seed: 11, ..Default::default() };
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a.pool, b.pool);
        assert_eq!(a.stream, b.stream);
        assert_eq!(a.test, b.test);
        let c = generate_synthetic(&SyntheticStreamSpec { seed: 12, ..spec }).unwrap();
        assert_ne!(a.stream, c.stream);
    }

    #[test]
    fn drift_changes_the_rate() {
        let spec = SyntheticStreamSpec {
            drift: Some(DriftSchedule { at_ms: 1_800_000.0, positive_rate: 0.3, period_ms: Some(3_600_000.0) }),
            ..Default::default()
        };
        assert_eq!(spec.rate_at(0.0), 0.067);
        assert_eq!(spec.rate_at(2_000_000.0), 0.3);
        assert_eq!(spec.rate_at(3_700_000.0), 0.067);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(generate_synthetic(&SyntheticStreamSpec { positive_rate: 0.0, ..Default::default() }).is_err());
        assert!(generate_synthetic(&SyntheticStreamSpec { dim: 2, ..Default::default() }).is_err());
    }
}
