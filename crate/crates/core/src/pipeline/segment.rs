use super::session::{validate_stream, LabelMap, SensorRecord};
use crate::error::{config_err, Result};
use crate::label::Label;

/// Sliding-window geometry. Only 50% overlap is supported.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec {
    pub window_seconds: f64,
    pub overlap_fraction: f64,
    pub sampling_rate_hz: f64,
}

impl WindowSpec {
    pub fn new(window_seconds: f64, sampling_rate_hz: f64) -> Self {
        WindowSpec { window_seconds, overlap_fraction: 0.5, sampling_rate_hz }
    }

    /// Samples per window, `W = window_seconds * sampling_rate`.
    pub fn window_len(&self) -> usize {
        (self.window_seconds * self.sampling_rate_hz).round() as usize
    }

    pub fn stride(&self) -> usize {
        self.window_len() / 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.overlap_fraction != 0.5 {
            return Err(config_err(format!(
                "only 50% window overlap is supported, got {}",
                self.overlap_fraction
            )));
        }
        if !(self.window_seconds.is_finite() && self.window_seconds > 0.0) {
            return Err(config_err(format!(
                "window length must be positive, got {} s",
                self.window_seconds
            )));
        }
        if !(self.sampling_rate_hz.is_finite() && self.sampling_rate_hz > 0.0) {
            return Err(config_err(format!(
                "sampling rate must be positive, got {}",
                self.sampling_rate_hz
            )));
        }
        if self.window_len() < 2 {
            return Err(config_err(format!(
                "window of {} s at {} Hz holds fewer than 2 samples",
                self.window_seconds, self.sampling_rate_hz
            )));
        }
        Ok(())
    }

    /// Number of full windows in a stream of `n` samples.
    pub fn segment_count(&self, n: usize) -> usize {
        let w = self.window_len();
        if n < w {
            0
        } else {
            (n - w) / self.stride() + 1
        }
    }
}

/// A fixed-length window borrowed from a stream.
#[derive(Debug, Clone, Copy)]
pub struct SignalSegment<'a> {
    pub samples: &'a [SensorRecord],
    /// Binary window label, `None` when no sample carries a known label.
    pub label: Option<Label>,
}

impl SignalSegment<'_> {
    pub fn start_ms(&self) -> f64 {
        self.samples.first().map_or(0.0, |r| r.t_ms)
    }

    pub fn end_ms(&self) -> f64 {
        self.samples.last().map_or(0.0, |r| r.t_ms)
    }

    pub fn channel_count(&self) -> usize {
        self.samples.first().map_or(0, |r| r.channels.len())
    }

    /// Values of one channel across the window.
    pub fn channel(&self, index: usize) -> Vec<f64> {
        self.samples.iter().map(|r| r.channels[index]).collect()
    }
}

/// Majority vote over the window: eating iff strictly more than half of the
/// samples carry an eating activity; ties go to non-eating.
pub fn window_label(samples: &[SensorRecord], labels: &LabelMap) -> Option<Label> {
    let mut known = 0usize;
    let mut eating = 0usize;
    for record in samples {
        if let Some(label) = record.label.as_deref().and_then(|a| labels.classify(a)) {
            known += 1;
            if label.is_eating() {
                eating += 1;
            }
        }
    }
    if known == 0 {
        None
    } else {
        Some(Label::from_bool(2 * eating > samples.len()))
    }
}

/// Splits a stream into windows of `W` samples with stride `W/2`; the trailing
/// partial window is dropped.
pub fn segment<'a>(
    stream: &'a [SensorRecord],
    spec: &WindowSpec,
    labels: &LabelMap,
) -> Result<Vec<SignalSegment<'a>>> {
    spec.validate()?;
    validate_stream(stream)?;
    let w = spec.window_len();
    let stride = spec.stride();
    let count = spec.segment_count(stream.len());
    Ok((0..count)
        .map(|i| {
            let samples = &stream[i * stride..i * stride + w];
            SignalSegment { samples, label: window_label(samples, labels) }
        })
        .collect())
}
