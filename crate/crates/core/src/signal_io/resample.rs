//! Band-limited resampling by Kaiser-windowed sinc interpolation.
//!
//! Each output sample at input position `p` is `sum_k x[k] h(p - k)` with
//! `h(d) = c sinc(c d) w(c d / H)`, where `c` is the cutoff as a fraction of
//! the input Nyquist frequency and `H` the half-width in zero crossings.
//! Longer kernels narrow the transition band (better accuracy near Nyquist)
//! at proportionally higher cost.
//!
//! Downsampling places the transition band centred on the output Nyquist
//! frequency. Upsampling keeps the passband flat up to the input Nyquist
//! frequency and rolls off just above it, so an up/down round trip recovers
//! the original to within the stopband ripple.

use super::Signal;
use crate::dsp::{kaiser, sinc};
use crate::error::{Error, Result};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResampleConfig {
    /// Zero crossings of the sinc kept on each side of the centre tap.
    pub half_width: usize,
    /// Kaiser window shape parameter.
    pub beta: f64,
}

impl Default for ResampleConfig {
    fn default() -> Self {
        ResampleConfig {
            half_width: 64,
            beta: 8.6,
        }
    }
}

impl ResampleConfig {
    /// Half the transition band width, as a fraction of the cutoff.
    fn transition_half_width(&self) -> f64 {
        let atten_db = self.beta / 0.1102 + 8.7;
        (atten_db - 7.95) / (28.72 * self.half_width as f64)
    }
}

pub fn resample<R: Real>(signal: &Signal<R>, target_rate: f64) -> Result<Signal<R>> {
    resample_with(signal, target_rate, &ResampleConfig::default())
}

pub fn resample_with<R: Real>(
    signal: &Signal<R>,
    target_rate: f64,
    cfg: &ResampleConfig,
) -> Result<Signal<R>> {
    if !(target_rate > 0.0 && target_rate.is_finite()) {
        return Err(Error::invalid(format!(
            "target rate must be positive, got {target_rate}"
        )));
    }
    if cfg.half_width == 0 {
        return Err(Error::invalid("resampler half width must be >= 1"));
    }
    let src_rate = signal.sample_rate();
    if target_rate == src_rate {
        return Ok(signal.clone());
    }

    let ratio = target_rate / src_rate;
    let cutoff = if ratio > 1.0 {
        (1.0 + 2.2 * cfg.transition_half_width()).min(ratio)
    } else {
        ratio
    };
    let kernel = Kernel {
        cutoff,
        reach: cfg.half_width as f64 / cutoff,
        beta: cfg.beta,
    };

    let x = signal.samples();
    let out_len = (x.len() as f64 * ratio).round() as usize;
    let out = match integral_ratio(src_rate, target_rate) {
        Some((num, den)) if den <= 8192 => polyphase(x, out_len, num, den, &kernel),
        _ => direct(x, out_len, src_rate / target_rate, &kernel),
    };
    Ok(Signal::new(out, target_rate, signal.modality())?.with_source(signal.source()))
}

struct Kernel {
    cutoff: f64,
    /// Support half-length in input samples.
    reach: f64,
    beta: f64,
}

impl Kernel {
    fn eval(&self, d: f64) -> f64 {
        if d.abs() >= self.reach {
            return 0.0;
        }
        self.cutoff * sinc(self.cutoff * d) * kaiser(d / self.reach, self.beta)
    }

    fn taps(&self) -> isize {
        self.reach.ceil() as isize
    }
}

/// `src / tgt` reduced to lowest terms when both rates are integers.
fn integral_ratio(src: f64, tgt: f64) -> Option<(u64, u64)> {
    if src.fract() != 0.0 || tgt.fract() != 0.0 || src > 1e12 || tgt > 1e12 {
        return None;
    }
    let (s, t) = (src as u64, tgt as u64);
    let g = gcd(s, t);
    Some((s / g, t / g))
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn accumulate<R: Real>(x: &[R], k0: isize, taps: isize, weights: &[f64]) -> R {
    let mut acc = 0.0;
    for (idx, j) in (-taps + 1..=taps).enumerate() {
        let k = k0 + j;
        if k >= 0 && (k as usize) < x.len() {
            acc += x[k as usize].to_f64_lossy() * weights[idx];
        }
    }
    R::lit(acc)
}

/// Output `m` sits at input position `m * num / den`; the fractional part
/// cycles through `den` phases, each with its own cached tap set.
fn polyphase<R: Real>(x: &[R], out_len: usize, num: u64, den: u64, kernel: &Kernel) -> Vec<R> {
    let taps = kernel.taps();
    let bank: Vec<Vec<f64>> = (0..den)
        .map(|phase| {
            let frac = phase as f64 / den as f64;
            (-taps + 1..=taps)
                .map(|j| kernel.eval(frac - j as f64))
                .collect()
        })
        .collect();
    (0..out_len as u64)
        .map(|m| {
            let pos = m * num;
            let k0 = (pos / den) as isize;
            accumulate(x, k0, taps, &bank[(pos % den) as usize])
        })
        .collect()
}

fn direct<R: Real>(x: &[R], out_len: usize, step: f64, kernel: &Kernel) -> Vec<R> {
    let taps = kernel.taps();
    let mut weights = vec![0.0; (2 * taps) as usize];
    (0..out_len)
        .map(|m| {
            let p = m as f64 * step;
            let k0 = p.floor();
            let frac = p - k0;
            for (idx, j) in (-taps + 1..=taps).enumerate() {
                weights[idx] = kernel.eval(frac - j as f64);
            }
            accumulate(x, k0 as isize, taps, &weights)
        })
        .collect()
}
