//! Loading, resampling and segmenting raw sensor recordings.

mod geocsv;
mod resample;
mod wav;

use serde::{Deserialize, Serialize};

pub use geocsv::{read_geophone_csv, write_geophone_csv};
pub use resample::{resample, resample_with, ResampleConfig};
pub use wav::{load_wav, save_wav, WavFormat};

use crate::error::{Error, Result};
use crate::Real;

/// Default microphone sample rate in Hz.
pub const DEFAULT_AUDIO_RATE: f64 = 44_100.0;
/// Default geophone sample rate in Hz.
pub const DEFAULT_GEOPHONE_RATE: f64 = 1_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Audio,
    Geophone,
}

impl Modality {
    pub fn default_rate(self) -> f64 {
        match self {
            Modality::Audio => DEFAULT_AUDIO_RATE,
            Modality::Geophone => DEFAULT_GEOPHONE_RATE,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Audio => "audio",
            Modality::Geophone => "geophone",
        }
    }
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Uniformly sampled real time series.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal<R> {
    samples: Vec<R>,
    sample_rate: f64,
    modality: Modality,
    source: u64,
}

impl<R: Real> Signal<R> {
    pub fn new(samples: Vec<R>, sample_rate: f64, modality: Modality) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample at index {i}")));
        }
        Ok(Signal {
            samples,
            sample_rate,
            modality,
            source: 0,
        })
    }

    /// Tag the signal with an opaque source id, copied into its segments.
    pub fn with_source(mut self, source: u64) -> Self {
        self.source = source;
        self
    }

    pub fn samples(&self) -> &[R] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<R> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn source(&self) -> u64 {
        self.source
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }
}

/// Analysis window length and hop, both in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentConfig {
    pub tau: f64,
    pub step: f64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            tau: 1.5,
            step: 0.25,
        }
    }
}

/// Average stride period of normal walking, in seconds.
pub const GAIT_PERIOD: f64 = 1.22;

impl SegmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.step > 0.0 && self.step <= self.tau) {
            return Err(Error::invalid(format!(
                "segment config requires 0 < step <= tau, got tau={} step={}",
                self.tau, self.step
            )));
        }
        if self.tau <= GAIT_PERIOD {
            log::warn!(
                "segment duration {} s does not cover a full gait period ({GAIT_PERIOD} s)",
                self.tau
            );
        }
        Ok(())
    }

    pub fn segment_len(&self, sample_rate: f64) -> usize {
        (self.tau * sample_rate).round() as usize
    }

    pub fn hop_len(&self, sample_rate: f64) -> usize {
        ((self.step * sample_rate).round() as usize).max(1)
    }
}

/// Fixed-length window cut from a [`Signal`].
#[derive(Debug, Clone, PartialEq)]
pub struct Segment<R> {
    pub samples: Vec<R>,
    pub start_time: f64,
    pub sample_rate: f64,
    pub modality: Modality,
    pub parent: u64,
}

impl<R: Real> Segment<R> {
    /// Treat a whole sample buffer as one segment.
    pub fn from_samples(samples: Vec<R>, sample_rate: f64, modality: Modality) -> Self {
        Segment {
            samples,
            start_time: 0.0,
            sample_rate,
            modality,
            parent: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Cut overlapping full-length windows; a trailing partial window is dropped.
pub fn segment_signal<R: Real>(signal: &Signal<R>, cfg: &SegmentConfig) -> Result<Vec<Segment<R>>> {
    cfg.validate()?;
    let sr = signal.sample_rate();
    let len = cfg.segment_len(sr);
    let hop = cfg.hop_len(sr);
    if len == 0 {
        return Err(Error::invalid("segment length rounds to zero samples"));
    }
    if signal.len() < len {
        return Err(Error::TooShort {
            needed: len,
            available: signal.len(),
        });
    }
    let count = (signal.len() - len) / hop + 1;
    Ok((0..count)
        .map(|k| {
            let start = k * hop;
            Segment {
                samples: signal.samples()[start..start + len].to_vec(),
                start_time: start as f64 / sr,
                sample_rate: sr,
                modality: signal.modality(),
                parent: signal.source(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize, sr: f64) -> Signal<f64> {
        Signal::new((0..n).map(|i| i as f64).collect(), sr, Modality::Audio).unwrap()
    }

    #[test]
    fn six_seconds_gives_nineteen_segments() {
        let s = ramp(6 * 1000, 1000.0);
        let segs = segment_signal(&s, &SegmentConfig::default()).unwrap();
        assert_eq!(segs.len(), 19);
        for (k, seg) in segs.iter().enumerate() {
            assert_eq!(seg.len(), 1500);
            assert!((seg.start_time - 0.25 * k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn duration_equal_to_tau_gives_one_segment() {
        let s = ramp(1500, 1000.0);
        assert_eq!(
            segment_signal(&s, &SegmentConfig::default()).unwrap().len(),
            1
        );
    }

    #[test]
    fn non_overlapping_segments_tile_the_signal() {
        let s = ramp(4500, 1000.0);
        let cfg = SegmentConfig {
            tau: 1.5,
            step: 1.5,
        };
        let segs = segment_signal(&s, &cfg).unwrap();
        assert_eq!(segs.len(), 3);
        let joined: Vec<f64> = segs.iter().flat_map(|s| s.samples.clone()).collect();
        assert_eq!(joined, s.samples());
    }

    #[test]
    fn short_signal_is_rejected() {
        let s = ramp(1499, 1000.0);
        assert!(matches!(
            segment_signal(&s, &SegmentConfig::default()),
            Err(Error::TooShort { .. })
        ));
    }

    #[test]
    fn bad_config_is_rejected() {
        let s = ramp(3000, 1000.0);
        let cfg = SegmentConfig {
            tau: 1.0,
            step: 1.5,
        };
        assert!(segment_signal(&s, &cfg).is_err());
    }

    #[test]
    fn signal_rejects_nan_and_bad_rate() {
        assert!(Signal::new(vec![0.0, f64::NAN], 100.0, Modality::Audio).is_err());
        assert!(Signal::new(vec![0.0f64], 0.0, Modality::Audio).is_err());
        assert!(Signal::new(vec![0.0f64], -5.0, Modality::Audio).is_err());
    }
}
