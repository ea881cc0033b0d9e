use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ExtractConfig, ModelConfig, PartitionSpec, SweepSpec};
use crate::error::{Error, Result};
use crate::synthgait::{
    audio_channel, generate_dataset, geophone_channel, random_walkers, Corpus, SynthGaitParams,
    WalkerSignature,
};
use crate::Real;

/// Synthetic corpus settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub walkers: usize,
    pub walks_per_walker: usize,
    pub duration: f64,
    pub audio_rate: f64,
    pub geo_rate: f64,
    pub drift_rate: f64,
    pub noise_aud: f64,
    pub noise_geo: f64,
    pub days: usize,
    pub session_variation: f64,
    pub audio_highpass_hz: f64,
    /// `(delay seconds, gain)` pairs.
    pub audio_reflections: Vec<(f64, f64)>,
    pub geo_lowpass_hz: f64,
    pub geo_order: usize,
    pub geo_sensitivity: f64,
    /// Gain of a second footfall train half a period later.
    pub second_foot: Option<f64>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let p = SynthGaitParams::default();
        SynthConfig {
            seed: 0,
            walkers: 12,
            walks_per_walker: 10,
            duration: p.duration,
            audio_rate: p.audio_rate,
            geo_rate: p.geo_rate,
            drift_rate: p.drift_rate,
            noise_aud: p.noise_aud,
            noise_geo: p.noise_geo,
            days: p.days,
            session_variation: p.session_variation,
            audio_highpass_hz: 150.0,
            audio_reflections: vec![(0.0031, 0.35), (0.0072, -0.2), (0.0125, 0.12)],
            geo_lowpass_hz: 90.0,
            geo_order: 6,
            geo_sensitivity: 1.0,
            second_foot: None,
        }
    }
}

impl SynthConfig {
    pub fn params(&self) -> Result<SynthGaitParams> {
        let p = SynthGaitParams {
            h_aud: audio_channel(
                self.audio_rate,
                self.audio_highpass_hz,
                &self.audio_reflections,
            )?,
            h_geo: geophone_channel(
                self.geo_rate,
                self.geo_lowpass_hz,
                self.geo_order,
                self.geo_sensitivity,
            )?,
            drift_rate: self.drift_rate,
            noise_aud: self.noise_aud,
            noise_geo: self.noise_geo,
            duration: self.duration,
            audio_rate: self.audio_rate,
            geo_rate: self.geo_rate,
            days: self.days,
            session_variation: self.session_variation,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn walkers(&self) -> Result<Vec<WalkerSignature>> {
        let mut w = random_walkers(self.walkers, self.audio_rate, self.seed)?;
        for s in &mut w {
            s.second_foot = self.second_foot;
        }
        Ok(w)
    }

    /// Generate the synthetic corpus these settings describe.
    pub fn corpus<R: Real>(&self) -> Result<Corpus<R>> {
        generate_dataset(
            &self.walkers()?,
            &self.params()?,
            self.walks_per_walker,
            self.seed,
        )
    }
}

/// Every tunable default of the pipeline, loadable from TOML.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub synth: SynthConfig,
    pub extract: ExtractConfig,
    pub model: ModelConfig,
    pub partition: PartitionSpec,
    pub sweep: SweepSpec,
}

impl HarnessConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::format(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::format(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::format(e.to_string()))
    }

    /// Use one seed for corpus generation and partitioning.
    pub fn set_seed(&mut self, seed: u64) {
        self.synth.seed = seed;
        self.partition.base_seed = seed;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_partial_override() {
        let c = HarnessConfig::default();
        assert_eq!(HarnessConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
        let c =
            HarnessConfig::from_toml("[partition]\nrepeats = 3\n[sweep]\nfeatures = [\"geo\"]\n")
                .unwrap();
        assert_eq!(c.partition.repeats, 3);
        assert_eq!(c.partition.ubm_count, 6);
        assert_eq!(c.sweep.features, vec![super::super::FeatureType::Geophone]);
        assert!(HarnessConfig::from_toml("[partition]\nrepets = 3\n").is_err());
    }

    #[test]
    fn default_synth_config_matches_params() {
        assert_eq!(
            SynthConfig::default().params().unwrap(),
            SynthGaitParams::default()
        );
    }
}
