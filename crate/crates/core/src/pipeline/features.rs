//! Per-channel statistical and morphological features.
//!
//! Every channel contributes the same fifteen values, in this order:
//!
//! | # | name                 | definition                                              |
//! |---|----------------------|---------------------------------------------------------|
//! | 0 | median               | middle value, mean of the two middle values if even     |
//! | 1 | mean                 | arithmetic mean                                         |
//! | 2 | max                  |                                                         |
//! | 3 | min                  |                                                         |
//! | 4 | p2p                  | max - min                                               |
//! | 5 | skew                 | `m3 / m2^1.5` (population moments), 0 if variance is 0  |
//! | 6 | kurtosis             | excess kurtosis `m4 / m2^2 - 3`, 0 if variance is 0     |
//! | 7 | variance             | population variance                                     |
//! | 8 | peaks_count          | strict local maxima (greater than both neighbours)      |
//! | 9 | mean_peak_amplitude  | mean value at peaks                                     |
//! |10 | max_peak_amplitude   | largest value at a peak                                 |
//! |11 | mean_peak_distance   | mean gap between consecutive peaks, in samples          |
//! |12 | min_peak_distance    | smallest gap                                            |
//! |13 | std_peak_distance    | population standard deviation of the gaps               |
//! |14 | zero_crossings       | sign changes of `x - mean`; exact zeros keep the previous sign |
//!
//! With fewer than two peaks, features 9-13 are all 0.

use std::sync::Arc;

use super::segment::SignalSegment;
use crate::error::{usage_err, Result};

pub const FEATURES_PER_CHANNEL: usize = 15;

pub const FEATURE_NAMES: [&str; FEATURES_PER_CHANNEL] = [
    "median",
    "mean",
    "max",
    "min",
    "p2p",
    "skew",
    "kurtosis",
    "variance",
    "peaks_count",
    "mean_peak_amplitude",
    "max_peak_amplitude",
    "mean_peak_distance",
    "min_peak_distance",
    "std_peak_distance",
    "zero_crossings",
];

/// Feature values with their column names (`<channel>_<feature>`).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub names: Arc<[String]>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, names: Arc<[String]>) -> Result<Self> {
        if values.len() != names.len() {
            return Err(usage_err(format!(
                "{} feature values but {} names",
                values.len(),
                names.len()
            )));
        }
        Ok(FeatureVector { values, names })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Column names for the given channels, channel-major.
pub fn feature_names(channels: &[String]) -> Vec<String> {
    channels
        .iter()
        .flat_map(|c| FEATURE_NAMES.iter().map(move |f| format!("{c}_{f}")))
        .collect()
}

/// The fifteen features of one channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelFeatures(pub [f64; FEATURES_PER_CHANNEL]);

impl ChannelFeatures {
    pub fn compute(x: &[f64]) -> Self {
        let mut out = [0.0; FEATURES_PER_CHANNEL];
        if x.is_empty() {
            return ChannelFeatures(out);
        }
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = x.iter().copied().fold(f64::INFINITY, f64::min);

        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for &v in x {
            let d = v - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        m2 /= n;
        m3 /= n;
        m4 /= n;
        // Rounding in the mean leaves ~eps^2 residue on constant input.
        let scale = max.abs().max(min.abs()).max(1.0);
        let degenerate = m2 <= (1e-12 * scale).powi(2);
        let (skew, kurtosis) =
            if degenerate { (0.0, 0.0) } else { (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0) };

        let peaks: Vec<usize> =
            (1..x.len().saturating_sub(1)).filter(|&i| x[i] > x[i - 1] && x[i] > x[i + 1]).collect();
        let (mean_amp, max_amp, mean_gap, min_gap, std_gap) = if peaks.len() < 2 {
            (0.0, 0.0, 0.0, 0.0, 0.0)
        } else {
            let amps: Vec<f64> = peaks.iter().map(|&i| x[i]).collect();
            let gaps: Vec<f64> = peaks.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
            let g = gaps.len() as f64;
            let mean_gap = gaps.iter().sum::<f64>() / g;
            let var_gap = gaps.iter().map(|d| (d - mean_gap).powi(2)).sum::<f64>() / g;
            (
                amps.iter().sum::<f64>() / amps.len() as f64,
                amps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean_gap,
                gaps.iter().copied().fold(f64::INFINITY, f64::min),
                var_gap.sqrt(),
            )
        };

        out[0] = median(x);
        out[1] = mean;
        out[2] = max;
        out[3] = min;
        out[4] = max - min;
        out[5] = skew;
        out[6] = kurtosis;
        out[7] = if degenerate { 0.0 } else { m2 };
        out[8] = peaks.len() as f64;
        out[9] = mean_amp;
        out[10] = max_amp;
        out[11] = mean_gap;
        out[12] = min_gap;
        out[13] = std_gap;
        out[14] = zero_crossings(x, mean) as f64;
        ChannelFeatures(out)
    }
}

fn median(x: &[f64]) -> f64 {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 0 {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    } else {
        sorted[mid]
    }
}

fn zero_crossings(x: &[f64], mean: f64) -> usize {
    let mut previous: Option<bool> = None;
    let mut count = 0;
    for &v in x {
        let d = v - mean;
        if d == 0.0 {
            continue;
        }
        let positive = d > 0.0;
        if previous.is_some_and(|p| p != positive) {
            count += 1;
        }
        previous = Some(positive);
    }
    count
}

/// Features of every channel of a segment, channel-major.
pub fn extract_features(segment: &SignalSegment<'_>, channel_names: &[String]) -> Result<FeatureVector> {
    let channels = segment.channel_count();
    if segment.samples.is_empty() {
        return Err(usage_err("cannot extract features from an empty segment"));
    }
    if channel_names.len() != channels {
        return Err(usage_err(format!(
            "segment has {channels} channels but {} names were given",
            channel_names.len()
        )));
    }
    let mut values = Vec::with_capacity(channels * FEATURES_PER_CHANNEL);
    for c in 0..channels {
        values.extend_from_slice(&ChannelFeatures::compute(&segment.channel(c)).0);
    }
    let names: Arc<[String]> = feature_names(channel_names).into();
    FeatureVector::new(values, names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::SensorRecord;

    fn idx(name: &str) -> usize {
        FEATURE_NAMES.iter().position(|n| *n == name).unwrap()
    }

    #[test]
    fn constant_segment() {
        let f = ChannelFeatures::compute(&[1.0; 300]).0;
        assert_eq!(f[idx("mean")], 1.0);
        assert_eq!(f[idx("median")], 1.0);
        assert_eq!(f[idx("max")], 1.0);
        assert_eq!(f[idx("min")], 1.0);
        assert_eq!(f[idx("p2p")], 0.0);
        assert_eq!(f[idx("variance")], 0.0);
        assert_eq!(f[idx("skew")], 0.0);
        assert_eq!(f[idx("kurtosis")], 0.0);
        assert_eq!(f[idx("zero_crossings")], 0.0);
        assert_eq!(f[idx("peaks_count")], 0.0);
    }

    #[test]
    fn near_constant_gravity_channel_has_zero_moments() {
        let f = ChannelFeatures::compute(&[9.8; 300]).0;
        assert_eq!(f[idx("skew")], 0.0);
        assert_eq!(f[idx("kurtosis")], 0.0);
        assert_eq!(f[idx("variance")], 0.0);
    }

    #[test]
    fn square_wave_hand_trace() {
        let x = [0.0, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0];
        let f = ChannelFeatures::compute(&x).0;
        assert_eq!(f[idx("p2p")], 2.0);
        assert_eq!(f[idx("mean")], 0.0);
        assert_eq!(f[idx("median")], 0.0);
        // signs after mean removal: ., +, +, -, -, +, +, -  -> 3 changes
        assert_eq!(f[idx("zero_crossings")], 3.0);
        // peaks at indices 1 and 5
        assert_eq!(f[idx("peaks_count")], 2.0);
        assert_eq!(f[idx("mean_peak_amplitude")], 1.0);
        assert_eq!(f[idx("max_peak_amplitude")], 1.0);
        assert_eq!(f[idx("mean_peak_distance")], 4.0);
        assert_eq!(f[idx("min_peak_distance")], 4.0);
        assert_eq!(f[idx("std_peak_distance")], 0.0);
        assert_eq!(f[idx("variance")], 0.5);
        assert_eq!(f[idx("skew")], 0.0);
        // m4 / m2^2 = 0.5 / 0.25 = 2
        assert!((f[idx("kurtosis")] - (-1.0)).abs() < 1e-12);
    }

    #[test]
    fn single_peak_zeroes_peak_statistics() {
        let f = ChannelFeatures::compute(&[0.0, 3.0, 0.0, 0.0]).0;
        assert_eq!(f[idx("peaks_count")], 1.0);
        for name in [
            "mean_peak_amplitude",
            "max_peak_amplitude",
            "mean_peak_distance",
            "min_peak_distance",
            "std_peak_distance",
        ] {
            assert_eq!(f[idx(name)], 0.0, "{name}");
        }
    }

    #[test]
    fn plateaus_are_not_peaks() {
        let f = ChannelFeatures::compute(&[0.0, 2.0, 2.0, 0.0, 1.0, 0.0, 3.0, 1.0]).0;
        assert_eq!(f[idx("peaks_count")], 2.0);
        assert_eq!(f[idx("mean_peak_distance")], 2.0);
        assert_eq!(f[idx("max_peak_amplitude")], 3.0);
    }

    #[test]
    fn three_channel_segment_has_45_features() {
        let s: Vec<_> = (0..300)
            .map(|i| {
                let t = i as f64;
                SensorRecord::new(t * 20.0, vec![t.sin(), (t / 3.0).cos(), 9.8])
            })
            .collect();
        let seg = SignalSegment { samples: &s, label: None };
        let names: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
        let fv = extract_features(&seg, &names).unwrap();
        assert_eq!(fv.len(), 45);
        assert_eq!(fv.names[0], "x_median");
        assert_eq!(fv.names[44], "z_zero_crossings");
        assert!(fv.values.iter().all(|v| v.is_finite()));
    }
}
