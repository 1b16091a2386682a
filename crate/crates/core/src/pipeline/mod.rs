//! Raw inertial stream to feature vectors: filter, segment, extract, select.

mod chi2;
mod features;
mod filter;
mod segment;
mod session;

pub use chi2::{apply_mask, chi2_scores, chi2_select, FeatureSelectionMask};
pub use features::{
    extract_features, feature_names, ChannelFeatures, FeatureVector, FEATURES_PER_CHANNEL,
    FEATURE_NAMES,
};
pub use filter::{low_pass_filter, smoothing_factor, DEFAULT_CUTOFF_HZ};
pub use segment::{segment, window_label, SignalSegment, WindowSpec};
pub use session::{LabelMap, Manifest, SensorRecord};

use crate::error::Result;
use crate::label::Label;

pub const DEFAULT_WINDOW_SECONDS: f64 = 6.0;

/// Features of one window together with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentFeatures {
    pub features: FeatureVector,
    pub label: Option<Label>,
    pub start_ms: f64,
    pub end_ms: f64,
}

/// Runs filter, segmentation and extraction over one session. The window
/// length is derived from the manifest's sampling rate.
pub fn session_features(
    stream: &[SensorRecord],
    manifest: &Manifest,
    window_seconds: f64,
    cutoff_hz: f64,
) -> Result<Vec<SegmentFeatures>> {
    let filtered = low_pass_filter(stream, cutoff_hz, manifest.sampling_rate_hz)?;
    let spec = WindowSpec::new(window_seconds, manifest.sampling_rate_hz);
    segment(&filtered, &spec, &manifest.labels)?
        .iter()
        .map(|seg| {
            Ok(SegmentFeatures {
                features: extract_features(seg, &manifest.channels)?,
                label: seg.label,
                start_ms: seg.start_ms(),
                end_ms: seg.end_ms(),
            })
        })
        .collect()
}
