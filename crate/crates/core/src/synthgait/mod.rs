//! Synthetic bimodal gait recordings with known walker identities.
//!
//! A walker is a footstep pulse repeated at a jittered gait period. The
//! resulting impact velocity `v` is pushed through two propagation paths:
//! a wideband air path to the microphone and a lowpass floor path to the
//! geophone. Both modalities of a walk are rendered from the same `v`.

mod channel;
mod corpus;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

pub use channel::{audio_channel, geophone_channel};
pub use corpus::{generate_dataset, read_corpus, write_corpus, Corpus, Walk};

use crate::dsp::fft_convolve;
use crate::error::{Error, Result};
use crate::signal_io::{resample, Modality, Signal};
use crate::Real;

/// Default microphone rate of the synthetic corpus.
pub const SYNTH_AUDIO_RATE: f64 = 8_000.0;
/// Default geophone rate of the synthetic corpus.
pub const SYNTH_GEOPHONE_RATE: f64 = 1_000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkerSignature {
    /// Seconds between successive footfalls of the modeled train.
    pub gait_period: f64,
    /// Impact velocity of one step, sampled at `pulse_rate`.
    pub footstep_pulse: Vec<f64>,
    pub pulse_rate: f64,
    pub period_jitter: f64,
    pub amplitude_jitter: f64,
    /// dB/octave shaping already baked into `footstep_pulse`.
    pub spectral_tilt: f64,
    /// Relative gain of a second foot striking half a period later.
    pub second_foot: Option<f64>,
}

impl WalkerSignature {
    pub fn validate(&self) -> Result<()> {
        if !(self.gait_period > 0.0 && self.gait_period.is_finite()) {
            return Err(Error::invalid(format!(
                "gait period must be positive, got {}",
                self.gait_period
            )));
        }
        if !(self.pulse_rate > 0.0 && self.pulse_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "pulse rate must be positive, got {}",
                self.pulse_rate
            )));
        }
        if self.footstep_pulse.is_empty() || self.footstep_pulse.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "footstep pulse must be non-empty and finite",
            ));
        }
        for (name, j) in [
            ("period", self.period_jitter),
            ("amplitude", self.amplitude_jitter),
        ] {
            if !(0.0..0.5).contains(&j) {
                return Err(Error::invalid(format!(
                    "{name} jitter must lie in [0, 0.5), got {j}"
                )));
            }
        }
        if let Some(g) = self.second_foot {
            if !(g.is_finite() && g >= 0.0) {
                return Err(Error::invalid(format!(
                    "second foot gain must be >= 0, got {g}"
                )));
            }
        }
        Ok(())
    }
}

/// Damped sinusoid component of a footstep pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub freq: f64,
    /// Amplitude e-folding time in seconds.
    pub decay: f64,
    pub gain: f64,
    /// Start time within the pulse in seconds.
    pub onset: f64,
}

/// Sum of damped resonances with a `tilt` dB/octave slope around 1 kHz,
/// scaled to unit peak amplitude.
pub fn synthesize_pulse(
    resonances: &[Resonance],
    tilt: f64,
    rate: f64,
    length: f64,
) -> Result<Vec<f64>> {
    let n = (length * rate).round() as usize;
    if n < 2 {
        return Err(Error::invalid(format!(
            "pulse of {length} s is too short at {rate} Hz"
        )));
    }
    let mut p = vec![0.0; n];
    for r in resonances {
        let start = (r.onset * rate).round() as usize;
        for (i, v) in p.iter_mut().enumerate().skip(start) {
            let t = (i - start) as f64 / rate;
            // 1 ms attack avoids a step discontinuity
            let attack = 1.0 - (-t / 1e-3).exp();
            *v += r.gain
                * attack
                * (-t / r.decay).exp()
                * (2.0 * std::f64::consts::PI * r.freq * t).sin();
        }
    }
    if tilt != 0.0 {
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let mut buf: Vec<Complex<f64>> = p.iter().map(|&v| Complex::new(v, 0.0)).collect();
        fwd.process(&mut buf);
        for (k, c) in buf.iter_mut().enumerate() {
            let kk = k.min(n - k);
            let f = (kk as f64 * rate / n as f64).max(10.0);
            *c *= 10f64.powf(tilt * (f / 1000.0).log2() / 20.0) / n as f64;
        }
        inv.process(&mut buf);
        for (v, c) in p.iter_mut().zip(&buf) {
            *v = c.re;
        }
    }
    let peak = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        p.iter_mut().for_each(|v| *v /= peak);
    }
    Ok(p)
}

/// Draw a walker: a low floor thump plus three higher shoe/floor resonances.
pub fn random_walker<G: Rng>(rng: &mut G, rate: f64) -> Result<WalkerSignature> {
    let log_uniform = |rng: &mut G, lo: f64, hi: f64| (rng.random_range(lo.ln()..hi.ln())).exp();
    let mut res = vec![Resonance {
        freq: rng.random_range(18.0..60.0),
        decay: rng.random_range(0.015..0.040),
        gain: 1.0,
        onset: 0.0,
    }];
    for _ in 0..3 {
        res.push(Resonance {
            freq: log_uniform(rng, 400.0, 3500.0),
            decay: rng.random_range(0.003..0.012),
            gain: rng.random_range(0.2..0.8),
            onset: rng.random_range(0.003..0.012),
        });
    }
    let tilt = rng.random_range(-3.0..3.0);
    Ok(WalkerSignature {
        gait_period: rng.random_range(1.0..1.45),
        footstep_pulse: synthesize_pulse(&res, tilt, rate, 0.25)?,
        pulse_rate: rate,
        period_jitter: rng.random_range(0.01..0.04),
        amplitude_jitter: rng.random_range(0.05..0.15),
        spectral_tilt: tilt,
        second_foot: None,
    })
}

/// `count` walkers drawn from one seed.
pub fn random_walkers(count: usize, rate: f64, seed: u64) -> Result<Vec<WalkerSignature>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_walker(&mut rng, rate)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthGaitParams {
    /// Composite air path and microphone response at `audio_rate`.
    pub h_aud: Vec<f64>,
    /// Floor path times geophone sensitivity at `geo_rate`.
    pub h_geo: Vec<f64>,
    /// Fractional impulse response change per second.
    pub drift_rate: f64,
    pub noise_aud: f64,
    pub noise_geo: f64,
    /// Seconds per walk.
    pub duration: f64,
    pub audio_rate: f64,
    pub geo_rate: f64,
    /// Recording days; walk `i` of `n` falls on day `i * days / n`.
    pub days: usize,
    /// Strength of the per-day shoe changes to pulse shape and tempo.
    pub session_variation: f64,
}

impl Default for SynthGaitParams {
    fn default() -> Self {
        let audio_rate = SYNTH_AUDIO_RATE;
        let geo_rate = SYNTH_GEOPHONE_RATE;
        SynthGaitParams {
            h_aud: audio_channel(
                audio_rate,
                150.0,
                &[(0.0031, 0.35), (0.0072, -0.2), (0.0125, 0.12)],
            )
            .expect("valid default audio channel"),
            h_geo: geophone_channel(geo_rate, 90.0, 6, 1.0)
                .expect("valid default geophone channel"),
            drift_rate: 0.02,
            noise_aud: 0.02,
            noise_geo: 0.002,
            duration: 4.0,
            audio_rate,
            geo_rate,
            days: 3,
            session_variation: 0.6,
        }
    }
}

impl SynthGaitParams {
    pub fn validate(&self) -> Result<()> {
        for (name, h) in [("audio", &self.h_aud), ("geophone", &self.h_geo)] {
            if h.is_empty() || h.iter().all(|&v| v == 0.0) || h.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "{name} impulse response must be finite and nonzero"
                )));
            }
        }
        let nonneg = [
            ("drift rate", self.drift_rate),
            ("audio noise", self.noise_aud),
            ("geophone noise", self.noise_geo),
            ("session variation", self.session_variation),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be >= 0, got {v}")));
            }
        }
        for (name, v) in [
            ("duration", self.duration),
            ("audio rate", self.audio_rate),
            ("geophone rate", self.geo_rate),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.days == 0 {
            return Err(Error::invalid("need at least one recording day"));
        }
        Ok(())
    }
}

/// Jittered footfall train convolved with the walker's pulse.
pub fn generate_impact_velocity<R: Real>(
    sig: &WalkerSignature,
    duration: f64,
    rate: f64,
    seed: u64,
) -> Result<Signal<R>> {
    sig.validate()?;
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::invalid(format!("rate must be positive, got {rate}")));
    }
    if !(duration >= sig.gait_period) {
        return Err(Error::invalid(format!(
            "duration {duration} s is shorter than the gait period {} s",
            sig.gait_period
        )));
    }
    let pulse = if sig.pulse_rate == rate {
        sig.footstep_pulse.clone()
    } else {
        let p = Signal::new(sig.footstep_pulse.clone(), sig.pulse_rate, Modality::Audio)?;
        resample(&p, rate)?.into_samples()
    };

    let n = (duration * rate).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = move || -> f64 { rng.sample(StandardNormal) };
    let mut v = vec![0.0; n];
    // footfalls are sparse, so stamp the pulse directly
    let mut place = |t: f64, a: f64| {
        let start = (t * rate).round() as usize;
        for (o, &p) in v.iter_mut().skip(start).zip(&pulse) {
            *o += a * p;
        }
    };
    let mut t = 0.0;
    while t < duration {
        let a = (1.0 + sig.amplitude_jitter * normal()).max(0.0);
        place(t, a);
        if let Some(g) = sig.second_foot {
            let a2 = (1.0 + sig.amplitude_jitter * normal()).max(0.0);
            let half = 0.5 * sig.gait_period * (1.0 + sig.period_jitter * normal()).max(0.1);
            place(t + half, g * a2);
        }
        t += sig.gait_period * (1.0 + sig.period_jitter * normal()).max(0.1);
    }
    Signal::new(v.into_iter().map(R::lit).collect(), rate, Modality::Audio)
}

/// Pass `v` through `h`, letting the response drift linearly towards a
/// second random FIR, then add Gaussian noise of standard deviation
/// `noise_std`. Audio noise is white. Geophone noise is shaped by `h`,
/// since the sensor band-limits its own noise too.
///
/// The drifted response at sample `n` is `h + drift_rate * (n / rate) * g`,
/// where `g` is `h` coloured by a short random kernel and rescaled to the
/// energy of `h`.
pub fn render_modality<R: Real>(
    v: &Signal<R>,
    h: &[f64],
    drift_rate: f64,
    noise_std: f64,
    seed: u64,
) -> Result<Signal<R>> {
    if h.is_empty() {
        return Err(Error::invalid("empty impulse response"));
    }
    if !(drift_rate >= 0.0 && noise_std >= 0.0) {
        return Err(Error::invalid("drift rate and noise std must be >= 0"));
    }
    let rate = v.sample_rate();
    let x: Vec<f64> = v.samples().iter().map(|s| s.to_f64_lossy()).collect();
    let n = x.len();
    let mut y = fft_convolve(&x, h);
    y.resize(n, 0.0);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if drift_rate > 0.0 && n > 0 {
        let w: Vec<f64> = (0..5).map(|_| rng.sample(StandardNormal)).collect();
        let mut g = fft_convolve(h, &w);
        g.truncate(h.len());
        let (eh, eg) = (norm(h), norm(&g));
        if eg > 0.0 {
            g.iter_mut().for_each(|v| *v *= eh / eg);
            let yg = fft_convolve(&x, &g);
            for (i, (o, d)) in y.iter_mut().zip(yg).enumerate() {
                *o += drift_rate * (i as f64 / rate) * d;
            }
        }
    }
    if noise_std > 0.0 {
        let mut e: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let mut scale = noise_std;
        if v.modality() == Modality::Geophone {
            e = fft_convolve(&e, h);
            e.truncate(n);
            scale /= norm(h);
        }
        for (o, e) in y.iter_mut().zip(e) {
            *o += scale * e;
        }
    }
    Ok(
        Signal::new(y.into_iter().map(R::lit).collect(), rate, v.modality())?
            .with_source(v.source()),
    )
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
