// `!(x >= 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod blob;
pub mod dsp;
pub mod error;
pub mod features;
pub mod harness;
pub mod openset;
mod scalar;
pub mod scattering;
pub mod seed;
pub mod signal_io;
pub mod synthgait;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision instantiations.
pub type Signal = signal_io::Signal<f64>;
pub type Segment = signal_io::Segment<f64>;
pub type Filterbank = scattering::Filterbank<f64>;
pub type ScatterPlan = scattering::ScatterPlan<f64>;
pub type ScatteringMatrix = scattering::ScatteringMatrix<f64>;
pub type FeatureSet = features::FeatureSet<f64>;
pub type Postprocessor = features::Postprocessor<f64>;
pub type GmmModel = openset::GmmModel<f64>;
pub type Corpus = synthgait::Corpus<f64>;

/// Single-precision instantiations.
pub type Signal32 = signal_io::Signal<f32>;
pub type Segment32 = signal_io::Segment<f32>;
pub type Filterbank32 = scattering::Filterbank<f32>;
pub type ScatterPlan32 = scattering::ScatterPlan<f32>;
pub type ScatteringMatrix32 = scattering::ScatteringMatrix<f32>;
pub type FeatureSet32 = features::FeatureSet<f32>;
pub type Postprocessor32 = features::Postprocessor<f32>;
pub type GmmModel32 = openset::GmmModel<f32>;
pub type Corpus32 = synthgait::Corpus<f32>;
