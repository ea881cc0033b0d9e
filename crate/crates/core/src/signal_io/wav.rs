use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{Modality, Signal};
use crate::error::{Error, Result};
use crate::Real;

/// On-disk sample encoding for [`save_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WavFormat {
    Int8,
    #[default]
    Int16,
    Int24,
    Float32,
}

impl WavFormat {
    fn spec(self, channels: u16, sample_rate: u32) -> WavSpec {
        let (bits_per_sample, sample_format) = match self {
            WavFormat::Int8 => (8, SampleFormat::Int),
            WavFormat::Int16 => (16, SampleFormat::Int),
            WavFormat::Int24 => (24, SampleFormat::Int),
            WavFormat::Float32 => (32, SampleFormat::Float),
        };
        WavSpec {
            channels,
            sample_rate,
            bits_per_sample,
            sample_format,
        }
    }
}

fn wav_err(path: &Path) -> impl FnOnce(hound::Error) -> Error + '_ {
    move |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    }
}

/// Read a PCM or IEEE-float WAV file. Integer samples are scaled by
/// `2^(bits-1)`; multi-channel files keep channel 0 only.
pub fn load_wav<R: Real>(path: impl AsRef<Path>, modality: Modality) -> Result<Signal<R>> {
    let path = path.as_ref();
    let reader = WavReader::open(path).map_err(wav_err(path))?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;
    if channels > 1 {
        log::warn!(
            "{}: {} channels, using channel 0 only",
            path.display(),
            channels
        );
    }

    let samples: Vec<R> = match spec.sample_format {
        SampleFormat::Float => {
            if spec.bits_per_sample != 32 {
                return Err(Error::format(format!(
                    "{}: unsupported float width {}",
                    path.display(),
                    spec.bits_per_sample
                )));
            }
            reader
                .into_samples::<f32>()
                .step_by(channels)
                .map(|s| s.map(|v| R::lit(v as f64)))
                .collect::<std::result::Result<_, _>>()
                .map_err(wav_err(path))?
        }
        SampleFormat::Int => {
            let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .into_samples::<i32>()
                .step_by(channels)
                .map(|s| s.map(|v| R::lit(v as f64 * scale)))
                .collect::<std::result::Result<_, _>>()
                .map_err(wav_err(path))?
        }
    };

    if samples.is_empty() {
        return Err(Error::format(format!(
            "{}: empty audio payload",
            path.display()
        )));
    }
    Signal::new(samples, spec.sample_rate as f64, modality)
}

/// Write a mono WAV file. Integer encodings quantize `round(x * 2^(bits-1))`
/// with saturation, so a reload differs by at most one quantization step.
pub fn save_wav<R: Real>(
    path: impl AsRef<Path>,
    signal: &Signal<R>,
    format: WavFormat,
) -> Result<()> {
    let path = path.as_ref();
    let rate = signal.sample_rate();
    if rate.fract() != 0.0 || rate > u32::MAX as f64 {
        return Err(Error::invalid(format!(
            "WAV needs an integral sample rate, got {rate}"
        )));
    }
    let spec = format.spec(1, rate as u32);
    let mut writer = WavWriter::create(path, spec).map_err(wav_err(path))?;
    match format {
        WavFormat::Float32 => {
            for &v in signal.samples() {
                writer
                    .write_sample(v.to_f64_lossy() as f32)
                    .map_err(wav_err(path))?;
            }
        }
        _ => {
            let bits = spec.bits_per_sample as u32;
            let full = (1i64 << (bits - 1)) as f64;
            for &v in signal.samples() {
                let q = quantize(v.to_f64_lossy(), full);
                match format {
                    WavFormat::Int8 => writer.write_sample(q as i8),
                    WavFormat::Int16 => writer.write_sample(q as i16),
                    _ => writer.write_sample(q),
                }
                .map_err(wav_err(path))?;
            }
        }
    }
    writer.finalize().map_err(wav_err(path))
}

fn quantize(x: f64, full: f64) -> i32 {
    (x * full).round().clamp(-full, full - 1.0) as i32
}
