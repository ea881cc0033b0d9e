//! Experimental protocol: walker partitions, end-to-end experiments and
//! the (feature type, T, N) sweep.

mod config;
mod partition;
mod sweep;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

pub use config::{HarnessConfig, SynthConfig};
pub use partition::{partition, shuffle_labels, test_day, Partition, PartitionSpec, Recording};
pub use sweep::{sweep, sweep_descriptors, BoxStats, CellKey, CellResult, ResultsTable, SweepSpec};

use crate::error::{Error, Result, StageContext};
use crate::features::{
    fuse, log_spectrum, single_rows, FeatureSet, PostprocessConfig, Postprocessor, Reduction,
};
use crate::openset::{
    compute_eer, em_fit, map_adapt, score_llr, EmConfig, GmmModel, ScoreSet, Trial, RELEVANCE,
    VARIANCE_FLOOR,
};
use crate::scattering::{
    build_filterbank, normalize_scattering, Epsilon, ScatterPlan, ScatteringConfig,
};
use crate::seed::derive;
use crate::signal_io::{resample, segment_signal, Modality, SegmentConfig, Signal};
use crate::synthgait::Corpus;
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureType {
    Audio,
    #[serde(alias = "geo")]
    Geophone,
    Fused,
}

impl FeatureType {
    pub const ALL: [FeatureType; 3] = [
        FeatureType::Audio,
        FeatureType::Geophone,
        FeatureType::Fused,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureType::Audio => "audio",
            FeatureType::Geophone => "geophone",
            FeatureType::Fused => "fused",
        }
    }

    fn code(self) -> u64 {
        self as u64
    }
}

impl std::fmt::Display for FeatureType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for FeatureType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "audio" | "aud" => Ok(FeatureType::Audio),
            "geo" | "geophone" => Ok(FeatureType::Geophone),
            "fused" => Ok(FeatureType::Fused),
            _ => Err(Error::invalid(format!("unknown feature type {s:?}"))),
        }
    }
}

/// Segmentation and scattering settings shared by every cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractConfig {
    pub segment: SegmentConfig,
    /// Wavelets per octave for audio and fused features.
    pub q: usize,
    /// Wavelets per octave for geophone-only features.
    pub q_geophone: usize,
    pub epsilon: Epsilon,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            segment: SegmentConfig::default(),
            q: 8,
            q_geophone: 8,
            epsilon: Epsilon::default(),
        }
    }
}

impl ExtractConfig {
    pub fn scattering(&self, t: f64, feature: FeatureType) -> ScatteringConfig {
        let q = match feature {
            FeatureType::Geophone => self.q_geophone,
            _ => self.q,
        };
        ScatteringConfig {
            epsilon: self.epsilon,
            ..ScatteringConfig::new(t, q)
        }
    }
}

/// Postprocessing, UBM and enrollment settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub reduction: ReductionName,
    pub components: usize,
    pub max_iters: usize,
    pub tolerance: f64,
    pub relevance: f64,
}

/// Serializable mirror of [`Reduction`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReductionName {
    #[default]
    Dct,
    Pca,
}

impl From<ReductionName> for Reduction {
    fn from(r: ReductionName) -> Self {
        match r {
            ReductionName::Dct => Reduction::Dct,
            ReductionName::Pca => Reduction::Pca,
        }
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        let em = EmConfig::default();
        ModelConfig {
            reduction: ReductionName::Dct,
            components: em.components,
            max_iters: em.max_iters,
            tolerance: em.tolerance,
            relevance: RELEVANCE,
        }
    }
}

impl ModelConfig {
    pub fn em(&self, seed: u64) -> EmConfig {
        EmConfig {
            components: self.components,
            max_iters: self.max_iters,
            tolerance: self.tolerance,
            variance_floor: VARIANCE_FLOOR,
            seed,
        }
    }

    pub fn postprocess(&self, n: usize) -> PostprocessConfig {
        PostprocessConfig {
            n,
            reduction: self.reduction.into(),
        }
    }
}

const EM_SEED_TAG: u64 = 0x454d;

/// Seed of the UBM fit for one (cell, repeat) job.
pub fn job_seed(base_seed: u64, feature: FeatureType, t: f64, n: usize, repeat: usize) -> u64 {
    derive(
        base_seed,
        &[
            EM_SEED_TAG,
            feature.code(),
            t.to_bits(),
            n as u64,
            repeat as u64,
        ],
    )
}

/// Log-spectrum descriptors (before standardization) of every segment of
/// every walk, one [`FeatureSet`] per requested feature type.
///
/// Fused descriptors scatter the geophone after upsampling it to the audio
/// rate, so both modalities share the audio filterbank; the audio
/// scattering is computed once and reused for audio and fused output.
pub fn extract_descriptors<R: Real>(
    corpus: &Corpus<R>,
    t: f64,
    types: &[FeatureType],
    cfg: &ExtractConfig,
) -> Result<Vec<FeatureSet<R>>> {
    if corpus.is_empty() {
        return Err(Error::invalid("empty corpus"));
    }
    let scfg = cfg.scattering(t, FeatureType::Audio);
    let gcfg = cfg.scattering(t, FeatureType::Geophone);
    let want = |f: FeatureType| types.contains(&f);
    let need_audio = want(FeatureType::Audio) || want(FeatureType::Fused);
    let audio_rate = corpus.walks[0].audio.sample_rate();
    let geo_rate = corpus.walks[0].geophone.sample_rate();
    for w in &corpus.walks {
        if w.audio.sample_rate() != audio_rate || w.geophone.sample_rate() != geo_rate {
            return Err(Error::invalid(format!(
                "walk {} has a different sample rate",
                w.id
            )));
        }
    }

    let audio_plan = if need_audio {
        let fb = build_filterbank::<R>(&scfg, audio_rate).stage("filterbank")?;
        let len = cfg.segment.segment_len(audio_rate);
        let geo = if want(FeatureType::Fused) {
            Some(ScatterPlan::with_filterbank(
                fb.clone(),
                &scfg,
                len,
                Modality::Geophone,
            )?)
        } else {
            None
        };
        Some((
            ScatterPlan::with_filterbank(fb, &scfg, len, Modality::Audio)?,
            geo,
        ))
    } else {
        None
    };
    let geo_plan = if want(FeatureType::Geophone) {
        Some(
            ScatterPlan::<R>::new(
                &gcfg,
                geo_rate,
                cfg.segment.segment_len(geo_rate),
                Modality::Geophone,
            )
            .stage("filterbank")?,
        )
    } else {
        None
    };

    let mut rows: Vec<Vec<Vec<R>>> = vec![Vec::new(); types.len()];
    let mut meta: Vec<(u32, u32, u32)> = Vec::new();
    let slot = |f: FeatureType| types.iter().position(|&x| x == f);
    for w in &corpus.walks {
        let audio_segs = if need_audio {
            segment_signal(&w.audio, &cfg.segment).stage("segment")?
        } else {
            Vec::new()
        };
        let geo_segs = if want(FeatureType::Geophone) {
            segment_signal(&w.geophone, &cfg.segment).stage("segment")?
        } else {
            Vec::new()
        };
        let up_segs = if want(FeatureType::Fused) {
            let up = resample(&w.geophone, audio_rate).stage("upsample")?;
            let up = Signal::new(up.into_samples(), audio_rate, Modality::Geophone)?;
            segment_signal(&up, &cfg.segment).stage("segment")?
        } else {
            Vec::new()
        };
        let count = [audio_segs.len(), geo_segs.len(), up_segs.len()]
            .into_iter()
            .filter(|&c| c > 0)
            .min()
            .unwrap_or(0);
        for k in 0..count {
            let mut sa = None;
            if let Some((plan, _)) = &audio_plan {
                let x = &audio_segs[k].samples;
                sa = Some(normalize_scattering(&plan.transform(x)?, x, &scfg).stage("scatter")?);
            }
            if let (Some(i), Some(s)) = (slot(FeatureType::Audio), &sa) {
                rows[i].push(log_spectrum(
                    single_rows(s).view(),
                    crate::features::LOG_DELTA,
                )?);
            }
            if let (Some(i), Some(plan)) = (slot(FeatureType::Geophone), &geo_plan) {
                let x = &geo_segs[k].samples;
                let s = normalize_scattering(&plan.transform(x)?, x, &gcfg).stage("scatter")?;
                rows[i].push(log_spectrum(
                    single_rows(&s).view(),
                    crate::features::LOG_DELTA,
                )?);
            }
            if let (Some(i), Some((_, Some(plan))), Some(a)) =
                (slot(FeatureType::Fused), &audio_plan, &sa)
            {
                let x = &up_segs[k].samples;
                let g = normalize_scattering(&plan.transform(x)?, x, &scfg).stage("scatter")?;
                let f = fuse(a, &g).stage("fuse")?;
                rows[i].push(log_spectrum(f.rows().view(), crate::features::LOG_DELTA)?);
            }
            meta.push((w.walker, w.id, w.day));
        }
    }
    rows.into_iter()
        .map(|r| {
            let d = r.first().map_or(0, Vec::len);
            let flat: Vec<R> = r.into_iter().flatten().collect();
            let data = Array2::from_shape_vec((meta.len(), d), flat)
                .map_err(|e| Error::shape(e.to_string()))?;
            Ok(FeatureSet {
                data,
                labels: meta.iter().map(|m| m.0).collect(),
                recordings: meta.iter().map(|m| m.1).collect(),
                days: meta.iter().map(|m| m.2).collect(),
            })
        })
        .collect()
}

/// Postprocessor, UBM and enrolled walker models of one experiment.
#[derive(Debug, Clone)]
pub struct TrainedModels<R: Real> {
    pub post: Postprocessor<R>,
    pub ubm: GmmModel<R>,
    /// `(walker, adapted model)` in enrollment order.
    pub enrolled: Vec<(u32, GmmModel<R>)>,
    /// Recording ids that touched any fitted quantity.
    pub training_recordings: Vec<u32>,
}

fn rows_where<R: Real>(data: ArrayView2<R>, keep: impl Fn(usize) -> bool) -> Array2<R> {
    let idx: Vec<usize> = (0..data.nrows()).filter(|&i| keep(i)).collect();
    data.select(Axis(0), &idx)
}

fn ubm_from_reduced<R: Real>(
    reduced: ArrayView2<R>,
    meta: &FeatureSet<R>,
    part: &Partition,
    cfg: &ModelConfig,
    seed: u64,
) -> Result<GmmModel<R>> {
    let ubm_rows = rows_where(reduced, |i| {
        meta.days[i] != part.test_day && part.ubm.contains(&meta.labels[i])
    });
    let (ubm, _) = em_fit(ubm_rows.view(), &cfg.em(seed)).stage("UBM training")?;
    Ok(ubm)
}

fn enroll_from_reduced<R: Real>(
    reduced: ArrayView2<R>,
    meta: &FeatureSet<R>,
    part: &Partition,
    ubm: &GmmModel<R>,
    relevance: f64,
) -> Result<Vec<(u32, GmmModel<R>)>> {
    part.enroll
        .iter()
        .map(|&w| {
            let rows = rows_where(reduced, |i| {
                meta.days[i] != part.test_day && meta.labels[i] == w
            });
            Ok((
                w,
                map_adapt(ubm, rows.view(), relevance).stage("enrollment")?,
            ))
        })
        .collect()
}

/// Adapted model of each enrolled walker.
pub type Enrolled<R> = Vec<(u32, GmmModel<R>)>;

/// Fit the UBM and enroll walkers on already reduced vectors (`reduced`
/// rows align with `meta`).
fn fit_gmms<R: Real>(
    reduced: ArrayView2<R>,
    meta: &FeatureSet<R>,
    part: &Partition,
    cfg: &ModelConfig,
    seed: u64,
) -> Result<(GmmModel<R>, Enrolled<R>)> {
    let ubm = ubm_from_reduced(reduced, meta, part, cfg, seed)?;
    let enrolled = enroll_from_reduced(reduced, meta, part, &ubm, cfg.relevance)?;
    Ok((ubm, enrolled))
}

/// Postprocessor and UBM fitted on training-day rows of the UBM walkers.
pub fn fit_ubm<R: Real>(
    desc: &FeatureSet<R>,
    n: usize,
    part: &Partition,
    cfg: &ModelConfig,
    seed: u64,
) -> Result<(Postprocessor<R>, GmmModel<R>)> {
    let ubm_raw = rows_where(desc.data.view(), |i| {
        desc.days[i] != part.test_day && part.ubm.contains(&desc.labels[i])
    });
    let post = Postprocessor::fit(ubm_raw.view(), cfg.postprocess(n)).stage("postprocess")?;
    let reduced = post.apply_rows(desc.data.view())?;
    let ubm = ubm_from_reduced(reduced.view(), desc, part, cfg, seed)?;
    Ok((post, ubm))
}

/// MAP-adapt `ubm` to the training-day rows of every enrolled walker.
pub fn enroll_walkers<R: Real>(
    desc: &FeatureSet<R>,
    post: &Postprocessor<R>,
    ubm: &GmmModel<R>,
    part: &Partition,
    relevance: f64,
) -> Result<Vec<(u32, GmmModel<R>)>> {
    let reduced = post.apply_rows(desc.data.view())?;
    enroll_from_reduced(reduced.view(), desc, part, ubm, relevance)
}

/// Fit everything an experiment learns from training-day data.
pub fn train_models<R: Real>(
    desc: &FeatureSet<R>,
    n: usize,
    part: &Partition,
    cfg: &ModelConfig,
    seed: u64,
) -> Result<TrainedModels<R>> {
    let train_ubm = |i: usize| desc.days[i] != part.test_day && part.ubm.contains(&desc.labels[i]);
    let ubm_raw = rows_where(desc.data.view(), train_ubm);
    let post = Postprocessor::fit(ubm_raw.view(), cfg.postprocess(n)).stage("postprocess")?;
    let reduced = post.apply_rows(desc.data.view())?;
    let (ubm, enrolled) = fit_gmms(reduced.view(), desc, part, cfg, seed)?;
    let mut training_recordings: Vec<u32> = (0..desc.len())
        .filter(|&i| {
            desc.days[i] != part.test_day
                && (part.ubm.contains(&desc.labels[i]) || part.enroll.contains(&desc.labels[i]))
        })
        .map(|i| desc.recordings[i])
        .collect();
    training_recordings.sort_unstable();
    training_recordings.dedup();
    Ok(TrainedModels {
        post,
        ubm,
        enrolled,
        training_recordings,
    })
}

/// Score every test-day recording of enrolled and unknown walkers against
/// every enrolled model. Rows of `reduced` align with `meta`.
fn score_reduced<R: Real>(
    reduced: ArrayView2<R>,
    meta: &FeatureSet<R>,
    part: &Partition,
    ubm: &GmmModel<R>,
    enrolled: &[(u32, GmmModel<R>)],
) -> Result<ScoreSet> {
    let mut trials: Vec<(u32, u32)> = (0..meta.len())
        .filter(|&i| {
            meta.days[i] == part.test_day
                && (part.enroll.contains(&meta.labels[i]) || part.unknown.contains(&meta.labels[i]))
        })
        .map(|i| (meta.recordings[i], meta.labels[i]))
        .collect();
    trials.sort_unstable();
    trials.dedup();
    let mut scores = ScoreSet::default();
    for (rec, truth) in trials {
        let rows = rows_where(reduced, |i| meta.recordings[i] == rec);
        for (claimed, model) in enrolled {
            let score = score_llr(rows.view(), model, ubm).stage("scoring")?;
            scores.push(Trial {
                trial: rec,
                claimed: *claimed,
                truth,
                score,
            });
        }
    }
    Ok(scores)
}

/// Score trials with models from [`train_models`].
pub fn score_trials<R: Real>(
    desc: &FeatureSet<R>,
    models: &TrainedModels<R>,
    part: &Partition,
) -> Result<ScoreSet> {
    let reduced = models.post.apply_rows(desc.data.view())?;
    score_reduced(reduced.view(), desc, part, &models.ubm, &models.enrolled)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub eer: f64,
    pub scores: ScoreSet,
}

/// One cell and repeat of the protocol, starting from descriptors.
pub fn run_experiment<R: Real>(
    desc: &FeatureSet<R>,
    n: usize,
    part: &Partition,
    cfg: &ModelConfig,
    seed: u64,
) -> Result<Experiment> {
    let models = train_models(desc, n, part, cfg, seed)?;
    let scores = score_trials(desc, &models, part)?;
    let eer = compute_eer(&scores).stage("EER")?;
    Ok(Experiment { eer, scores })
}

/// GMM stage on the first `n` columns of vectors reduced to a larger size.
/// Truncated DCT and PCA outputs are prefixes of longer ones, so this
/// matches [`run_experiment`] with the same `n`.
fn run_prefix<R: Real>(
    reduced: ArrayView2<R>,
    n: usize,
    meta: &FeatureSet<R>,
    part: &Partition,
    cfg: &ModelConfig,
    seed: u64,
) -> Result<Experiment> {
    let view = reduced.slice(ndarray::s![.., ..n]);
    let (ubm, enrolled) = fit_gmms(view, meta, part, cfg, seed)?;
    let scores = score_reduced(view, meta, part, &ubm, &enrolled)?;
    let eer = compute_eer(&scores).stage("EER")?;
    Ok(Experiment { eer, scores })
}
