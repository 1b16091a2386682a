//! Labels, label distributions and instances shared by every stage.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{usage_err, Result};

/// Number of classes in the eating / non-eating label space.
pub const NUM_CLASSES: usize = 2;

const DISTRIBUTION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    NonEating,
    Eating,
}

impl Label {
    pub const ALL: [Label; NUM_CLASSES] = [Label::NonEating, Label::Eating];

    pub fn index(self) -> usize {
        match self {
            Label::NonEating => 0,
            Label::Eating => 1,
        }
    }

    pub fn from_index(index: usize) -> Option<Label> {
        Label::ALL.get(index).copied()
    }

    pub fn from_bool(eating: bool) -> Label {
        if eating {
            Label::Eating
        } else {
            Label::NonEating
        }
    }

    pub fn is_eating(self) -> bool {
        self == Label::Eating
    }

    /// `0` / `1`, as written in feature and log CSVs.
    pub fn as_digit(self) -> &'static str {
        match self {
            Label::NonEating => "0",
            Label::Eating => "1",
        }
    }

    pub fn parse_digit(s: &str) -> Option<Label> {
        match s.trim() {
            "0" => Some(Label::NonEating),
            "1" => Some(Label::Eating),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::NonEating => "non-eating",
            Label::Eating => "eating",
        })
    }
}

/// Probability of each label, indexed by [`Label::index`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDistribution(Vec<f64>);

impl LabelDistribution {
    /// Validates that every entry is in `[0, 1]` and the entries sum to one.
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        let dist = LabelDistribution(probabilities);
        dist.validate()?;
        Ok(dist)
    }

    pub fn one_hot(label: Label) -> Self {
        let mut p = vec![0.0; NUM_CLASSES];
        p[label.index()] = 1.0;
        LabelDistribution(p)
    }

    pub fn uniform() -> Self {
        LabelDistribution(vec![1.0 / NUM_CLASSES as f64; NUM_CLASSES])
    }

    /// Builds a distribution from non-negative weights, normalizing them.
    /// All-zero weights yield the uniform distribution.
    pub fn from_weights(weights: &[f64]) -> Self {
        let total: f64 = weights.iter().sum();
        if total <= 0.0 || !total.is_finite() {
            return LabelDistribution(vec![1.0 / weights.len() as f64; weights.len()]);
        }
        LabelDistribution(weights.iter().map(|w| w / total).collect())
    }

    #[cfg(test)]
    pub(crate) fn from_raw(probabilities: Vec<f64>) -> Self {
        LabelDistribution(probabilities)
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.is_empty() {
            return Err(usage_err("label distribution is empty"));
        }
        let mut sum = 0.0;
        for &p in &self.0 {
            if !(0.0..=1.0).contains(&p) {
                return Err(usage_err(format!("probability {p} outside [0, 1]")));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > DISTRIBUTION_TOLERANCE {
            return Err(usage_err(format!("probabilities sum to {sum}, expected 1")));
        }
        Ok(())
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_ok()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.0
    }

    pub fn probability(&self, label: Label) -> f64 {
        self.0[label.index()]
    }

    /// Most probable label; ties resolve toward the lower index (non-eating).
    pub fn argmax(&self) -> Label {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate().skip(1) {
            if p > self.0[best] {
                best = i;
            }
        }
        Label::from_index(best).unwrap_or(Label::NonEating)
    }

    pub fn is_one_hot(&self, label: Label) -> bool {
        self.0
            .iter()
            .enumerate()
            .all(|(i, &p)| if i == label.index() { p == 1.0 } else { p == 0.0 })
    }
}

/// Instances drawn from data get ids below `2^63`; synthetic (SMOTE) ids set the
/// top bit so they can never collide with, or be mistaken for, real data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InstanceId(pub u64);

const SYNTHETIC_BIT: u64 = 1 << 63;

impl InstanceId {
    pub fn synthetic(sequence: u64) -> Self {
        InstanceId(SYNTHETIC_BIT | sequence)
    }

    pub fn is_synthetic(self) -> bool {
        self.0 & SYNTHETIC_BIT != 0
    }
}

impl fmt::Display for InstanceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_synthetic() {
            write!(f, "s{}", self.0 & !SYNTHETIC_BIT)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// A feature vector plus whatever is known about its label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: InstanceId,
    pub features: Vec<f64>,
    /// Ground truth, when known to the learner.
    pub label: Option<Label>,
}

impl Instance {
    pub fn new(id: u64, features: Vec<f64>) -> Self {
        Instance { id: InstanceId(id), features, label: None }
    }

    pub fn labeled(id: u64, features: Vec<f64>, label: Label) -> Self {
        Instance { id: InstanceId(id), features, label: Some(label) }
    }

    pub fn with_label(mut self, label: Option<Label>) -> Self {
        self.label = label;
        self
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_ties_go_to_non_eating() {
        let d = LabelDistribution::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(d.argmax(), Label::NonEating);
        let d = LabelDistribution::new(vec![0.4, 0.6]).unwrap();
        assert_eq!(d.argmax(), Label::Eating);
    }

    #[test]
    fn rejects_invalid_distributions() {
        assert!(LabelDistribution::new(vec![0.7, 0.7]).is_err());
        assert!(LabelDistribution::new(vec![-0.1, 1.1]).is_err());
        assert!(LabelDistribution::new(vec![]).is_err());
    }

    #[test]
    fn zero_weights_fall_back_to_uniform() {
        let d = LabelDistribution::from_weights(&[0.0, 0.0]);
        assert_eq!(d.probabilities(), &[0.5, 0.5]);
    }

    #[test]
    fn synthetic_ids_are_disjoint_from_data_ids() {
        let s = InstanceId::synthetic(3);
        assert!(s.is_synthetic());
        assert!(!InstanceId(3).is_synthetic());
        assert_ne!(s, InstanceId(3));
        assert_eq!(s.to_string(), "s3");
    }
}
