use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, data_err, Result};
use crate::label::Label;

/// One timestamped multichannel sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorRecord {
    /// Milliseconds since stream start.
    pub t_ms: f64,
    pub channels: Vec<f64>,
    /// Free-form activity string, if annotated.
    pub label: Option<String>,
}

impl SensorRecord {
    pub fn new(t_ms: f64, channels: Vec<f64>) -> Self {
        SensorRecord { t_ms, channels, label: None }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }
}

/// Maps free-form activity strings onto the binary label space.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelMap {
    pub eating: BTreeSet<String>,
    #[serde(default)]
    pub non_eating: BTreeSet<String>,
}

impl LabelMap {
    pub fn new<I, J, S, T>(eating: I, non_eating: J) -> Self
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = T>,
        S: Into<String>,
        T: Into<String>,
    {
        LabelMap {
            eating: eating.into_iter().map(Into::into).collect(),
            non_eating: non_eating.into_iter().map(Into::into).collect(),
        }
    }

    /// `None` for strings the map does not know.
    pub fn classify(&self, activity: &str) -> Option<Label> {
        if self.eating.contains(activity) {
            Some(Label::Eating)
        } else if self.non_eating.contains(activity) {
            Some(Label::NonEating)
        } else {
            None
        }
    }
}

/// Per-session metadata, stored as TOML next to the session CSVs:
///
/// ```toml
/// sampling_rate_hz = 50.0
/// channels = ["ax", "ay", "az"]
///
/// [labels]
/// eating = ["eating"]
/// non_eating = ["walking", "talking"]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub sampling_rate_hz: f64,
    pub channels: Vec<String>,
    pub labels: LabelMap,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self> {
        let manifest: Manifest =
            toml::from_str(text).map_err(|e| config_err(format!("invalid manifest: {e}")))?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read manifest {}: {e}", path.display())))?;
        Manifest::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sampling_rate_hz.is_finite() && self.sampling_rate_hz > 0.0) {
            return Err(config_err(format!(
                "sampling_rate_hz must be positive, got {}",
                self.sampling_rate_hz
            )));
        }
        if self.channels.is_empty() {
            return Err(config_err("manifest declares no channels"));
        }
        if let Some(both) = self.labels.eating.intersection(&self.labels.non_eating).next() {
            return Err(config_err(format!("label {both:?} is both eating and non-eating")));
        }
        Ok(())
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }
}

/// Checks the stream invariants: strictly increasing timestamps and a
/// constant channel count.
pub(crate) fn validate_stream(stream: &[SensorRecord]) -> Result<()> {
    let Some(first) = stream.first() else {
        return Ok(());
    };
    let width = first.channels.len();
    for (i, pair) in stream.windows(2).enumerate() {
        if pair[1].channels.len() != width {
            return Err(data_err(format!(
                "record {} has {} channels, expected {width}",
                i + 1,
                pair[1].channels.len()
            )));
        }
        if pair[1].t_ms <= pair[0].t_ms {
            return Err(data_err(format!(
                "non-increasing timestamp at record {}: {} after {}",
                i + 1,
                pair[1].t_ms,
                pair[0].t_ms
            )));
        }
    }
    Ok(())
}
