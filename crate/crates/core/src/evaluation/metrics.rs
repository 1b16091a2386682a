use serde::{Deserialize, Serialize};

use crate::error::{usage_err, Result};
use crate::label::Label;

/// Binary confusion counts with eating as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Label, Label)>) -> Self {
        let mut c = ConfusionCounts::default();
        for (truth, predicted) in pairs {
            c.record(truth, predicted);
        }
        c
    }

    pub fn from_labels(truth: &[Label], predicted: &[Label]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(usage_err(format!("{} true labels but {} predictions", truth.len(), predicted.len())));
        }
        Ok(Self::from_pairs(truth.iter().copied().zip(predicted.iter().copied())))
    }

    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Eating, Label::Eating) => self.tp += 1,
            (Label::NonEating, Label::Eating) => self.fp += 1,
            (Label::NonEating, Label::NonEating) => self.tn += 1,
            (Label::Eating, Label::NonEating) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// A ratio that is 0 with `zero_support` set when its denominator is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub value: f64,
    pub zero_support: bool,
}

fn ratio(num: u64, den: u64) -> Rate {
    if den == 0 {
        Rate { value: 0.0, zero_support: true }
    } else {
        Rate { value: num as f64 / den as f64, zero_support: false }
    }
}

/// tp / (tp + fn).
pub fn recall(c: &ConfusionCounts) -> Rate {
    ratio(c.tp, c.tp + c.fn_)
}

/// tp / (tp + fp).
pub fn precision(c: &ConfusionCounts) -> Rate {
    ratio(c.tp, c.tp + c.fp)
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f_score(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub counts: ConfusionCounts,
}

impl Metrics {
    pub fn from_counts(counts: ConfusionCounts) -> Self {
        let p = precision(&counts).value;
        let r = recall(&counts).value;
        Metrics { precision: p, recall: r, f_score: f_score(p, r), counts }
    }

    pub fn from_labels(truth: &[Label], predicted: &[Label]) -> Result<Self> {
        Ok(Self::from_counts(ConfusionCounts::from_labels(truth, predicted)?))
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Population standard deviation.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64).sqrt()
}
