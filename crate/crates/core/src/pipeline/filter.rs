//! First-order single-pole low-pass filter.

use super::session::{validate_stream, SensorRecord};
use crate::error::{config_err, Result};

pub const DEFAULT_CUTOFF_HZ: f64 = 5.0;

/// Smoothing factor `alpha` of the discrete RC filter
/// `y[n] = y[n-1] + alpha * (x[n] - y[n-1])`.
pub fn smoothing_factor(cutoff_hz: f64, sampling_rate_hz: f64) -> f64 {
    let dt = 1.0 / sampling_rate_hz;
    let rc = 1.0 / (2.0 * std::f64::consts::PI * cutoff_hz);
    dt / (rc + dt)
}

/// Filters each channel independently. The state starts at the first
/// sample, so constant signals pass through unchanged.
pub fn low_pass_filter(
    stream: &[SensorRecord],
    cutoff_hz: f64,
    sampling_rate_hz: f64,
) -> Result<Vec<SensorRecord>> {
    if !(sampling_rate_hz.is_finite() && sampling_rate_hz > 0.0) {
        return Err(config_err(format!("sampling rate must be positive, got {sampling_rate_hz}")));
    }
    let nyquist = sampling_rate_hz / 2.0;
    if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) {
        return Err(config_err(format!(
            "cutoff {cutoff_hz} Hz must lie in (0, {nyquist}) for {sampling_rate_hz} Hz sampling"
        )));
    }
    validate_stream(stream)?;

    let alpha = smoothing_factor(cutoff_hz, sampling_rate_hz);
    let mut out = stream.to_vec();
    let Some(first) = stream.first() else {
        return Ok(out);
    };
    let mut state = first.channels.clone();
    for record in out.iter_mut() {
        for (y, x) in state.iter_mut().zip(record.channels.iter_mut()) {
            *y += alpha * (*x - *y);
            *x = *y;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream_of(values: &[f64], rate: f64) -> Vec<SensorRecord> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| SensorRecord::new(i as f64 * 1000.0 / rate, vec![v]))
            .collect()
    }

    #[test]
    fn constant_signal_passes_unchanged() {
        let s = stream_of(&[9.8; 100], 50.0);
        let out = low_pass_filter(&s, 5.0, 50.0).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn preserves_length_and_timestamps() {
        let s = stream_of(&[1.0, -2.0, 3.0, 0.5, 0.0, 4.0, 1.0, 1.0, 2.0, 9.0], 50.0);
        let out = low_pass_filter(&s, 5.0, 50.0).unwrap();
        assert_eq!(out.len(), 10);
        for (a, b) in out.iter().zip(&s) {
            assert_eq!(a.t_ms, b.t_ms);
        }
    }

    #[test]
    fn rejects_cutoff_outside_band() {
        let s = stream_of(&[1.0; 4], 50.0);
        assert!(low_pass_filter(&s, 0.0, 50.0).unwrap_err().is_usage());
        assert!(low_pass_filter(&s, 25.0, 50.0).unwrap_err().is_usage());
        assert!(low_pass_filter(&s, -1.0, 50.0).is_err());
    }

    #[test]
    fn channels_are_filtered_independently() {
        let s: Vec<_> = (0..50)
            .map(|i| SensorRecord::new(i as f64 * 20.0, vec![(i % 2) as f64, 3.0]))
            .collect();
        let out = low_pass_filter(&s, 5.0, 50.0).unwrap();
        assert!(out.iter().all(|r| r.channels[1] == 3.0));
    }
}
