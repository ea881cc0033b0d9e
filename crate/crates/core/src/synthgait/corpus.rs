use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{
    generate_impact_velocity, render_modality, synthesize_pulse, Resonance, SynthGaitParams,
    WalkerSignature,
};
use crate::dsp::fft_convolve;
use crate::error::{Error, Result};
use crate::seed::derive;
use crate::signal_io::{
    load_wav, read_geophone_csv, resample, save_wav, Modality, Signal, WavFormat,
};
use crate::Real;

/// One walk recorded by both sensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Walk<R> {
    pub id: u32,
    pub walker: u32,
    pub day: u32,
    pub audio: Signal<R>,
    pub geophone: Signal<R>,
}

impl<R> Walk<R> {
    pub fn signal(&self, m: Modality) -> &Signal<R> {
        match m {
            Modality::Audio => &self.audio,
            Modality::Geophone => &self.geophone,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus<R> {
    pub walks: Vec<Walk<R>>,
}

impl<R> Corpus<R> {
    /// Sorted distinct walker labels.
    pub fn walkers(&self) -> Vec<u32> {
        let mut w: Vec<u32> = self.walks.iter().map(|w| w.walker).collect();
        w.sort_unstable();
        w.dedup();
        w
    }

    pub fn len(&self) -> usize {
        self.walks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walks.is_empty()
    }
}

const SHOE_TAPS: usize = 4;

/// Per-day changes to a walker: a shoe resonance added to the pulse,
/// footwear colouring (an FIR with unit DC gain) and a small tempo change.
fn session_variant(sig: &WalkerSignature, strength: f64, seed: u64) -> Result<WalkerSignature> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shoe_mode = Resonance {
        freq: rng.random_range(400f64.ln()..3500f64.ln()).exp(),
        decay: rng.random_range(0.003..0.012),
        gain: 1.0,
        onset: rng.random_range(0.003..0.012),
    };
    let len = sig.footstep_pulse.len() as f64 / sig.pulse_rate;
    let squeak = synthesize_pulse(&[shoe_mode], 0.0, sig.pulse_rate, len)?;
    let mut normal = || -> f64 { rng.sample(StandardNormal) };
    let taps: Vec<f64> = (0..SHOE_TAPS).map(|_| 0.5 * strength * normal()).collect();
    let mut shoe = vec![1.0 - taps.iter().sum::<f64>()];
    shoe.extend(taps);
    let mut pulse = fft_convolve(&sig.footstep_pulse, &shoe);
    pulse.truncate(sig.footstep_pulse.len());
    for (p, q) in pulse.iter_mut().zip(&squeak) {
        *p += strength * q;
    }
    let tempo = (1.0 + 0.1 * strength * normal()).clamp(0.8, 1.2);
    Ok(WalkerSignature {
        gait_period: sig.gait_period * tempo,
        footstep_pulse: pulse,
        ..sig.clone()
    })
}

/// Render `walks_per_walker` walks for each walker. Walk ids run in
/// walker-major order; walker labels are the indices into `walkers`.
pub fn generate_dataset<R: Real>(
    walkers: &[WalkerSignature],
    params: &SynthGaitParams,
    walks_per_walker: usize,
    seed: u64,
) -> Result<Corpus<R>> {
    if walkers.len() < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 walkers, got {}",
            walkers.len()
        )));
    }
    if walks_per_walker == 0 {
        return Err(Error::invalid("need at least one walk per walker"));
    }
    params.validate()?;
    for w in walkers {
        w.validate()?;
    }
    let mut walks = Vec::with_capacity(walkers.len() * walks_per_walker);
    for (wi, sig) in walkers.iter().enumerate() {
        let days: Vec<WalkerSignature> = (0..params.days)
            .map(|d| {
                session_variant(
                    sig,
                    params.session_variation,
                    derive(seed, &[1, wi as u64, d as u64]),
                )
            })
            .collect::<Result<_>>()?;
        for k in 0..walks_per_walker {
            let day = k * params.days / walks_per_walker;
            let id = (wi * walks_per_walker + k) as u32;
            let s = |tag: u64| derive(seed, &[tag, wi as u64, k as u64]);
            let v = generate_impact_velocity::<f64>(
                &days[day],
                params.duration,
                params.audio_rate,
                s(2),
            )?
            .with_source(id as u64);
            let audio =
                render_modality(&v, &params.h_aud, params.drift_rate, params.noise_aud, s(3))?;
            let v_geo = resample(&v, params.geo_rate)?;
            let v_geo = Signal::new(v_geo.into_samples(), params.geo_rate, Modality::Geophone)?
                .with_source(id as u64);
            let geo = render_modality(
                &v_geo,
                &params.h_geo,
                params.drift_rate,
                params.noise_geo,
                s(4),
            )?;
            walks.push(Walk {
                id,
                walker: wi as u32,
                day: day as u32,
                audio: cast(&audio, Modality::Audio)?,
                geophone: cast(&geo, Modality::Geophone)?,
            });
        }
    }
    Ok(Corpus { walks })
}

fn cast<R: Real>(s: &Signal<f64>, m: Modality) -> Result<Signal<R>> {
    Ok(Signal::new(
        s.samples().iter().map(|&v| R::lit(v)).collect(),
        s.sample_rate(),
        m,
    )?
    .with_source(s.source()))
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    walk: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    id: u32,
    walker: u32,
    day: u32,
    audio: String,
    geophone: String,
    /// Needed only when `geophone` is a CSV file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    geophone_rate: Option<f64>,
}

/// Write every walk as two float WAV files plus `manifest.toml` into `dir`.
/// Returns the manifest path.
pub fn write_corpus<R: Real>(dir: impl AsRef<Path>, corpus: &Corpus<R>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut walk = Vec::with_capacity(corpus.len());
    for w in &corpus.walks {
        let audio = format!("walk_{:04}_audio.wav", w.id);
        let geophone = format!("walk_{:04}_geophone.wav", w.id);
        save_wav(dir.join(&audio), &w.audio, WavFormat::Float32)?;
        save_wav(dir.join(&geophone), &w.geophone, WavFormat::Float32)?;
        walk.push(ManifestEntry {
            id: w.id,
            walker: w.walker,
            day: w.day,
            audio,
            geophone,
            geophone_rate: None,
        });
    }
    let text = toml::to_string(&Manifest { walk }).map_err(|e| Error::format(e.to_string()))?;
    let path = dir.join("manifest.toml");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Load a corpus from a manifest; relative paths resolve against the
/// manifest's directory. A geophone file ending in `.csv` is read as one
/// sample per line at the entry's `geophone_rate`.
pub fn read_corpus<R: Real>(manifest: impl AsRef<Path>) -> Result<Corpus<R>> {
    let path = manifest.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let m: Manifest =
        toml::from_str(&text).map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let walks = m
        .walk
        .into_iter()
        .map(|e| {
            Ok(Walk {
                id: e.id,
                walker: e.walker,
                day: e.day,
                audio: load_wav::<R>(base.join(&e.audio), Modality::Audio)?
                    .with_source(e.id as u64),
                geophone: load_geophone::<R>(&base.join(&e.geophone), e.geophone_rate)?
                    .with_source(e.id as u64),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus { walks })
}

fn load_geophone<R: Real>(path: &Path, rate: Option<f64>) -> Result<Signal<R>> {
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
    {
        let rate = rate.ok_or_else(|| {
            Error::format(format!(
                "{}: CSV geophone needs geophone_rate",
                path.display()
            ))
        })?;
        read_geophone_csv(path, rate)
    } else {
        load_wav(path, Modality::Geophone)
    }
}
