//! First-order wavelet scattering: `S1 x(t, l) = (|x * psi_l| * phi)(t)`,
//! sampled every `T/2`, plus the order-zero row `x * phi` and the envelope
//! `|x| * phi` used for normalization.

mod filterbank;
mod io;

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

pub use filterbank::{
    build_filterbank, morlet_hat, negative_frequency_energy, wavelet_count, Filterbank, Wavelet,
};
pub use io::{
    read_scattering, read_scattering_csv, scattering_from_bytes, scattering_to_bytes,
    write_scattering, write_scattering_csv,
};

use crate::dsp::{fast_len, reflect_index};
use crate::error::{Error, Result};
use crate::signal_io::{Modality, Segment};
use crate::Real;

/// Stabilizer added to the normalization envelope.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Epsilon {
    /// Multiple of the segment's peak magnitude.
    Relative(f64),
    Absolute(f64),
}

impl Default for Epsilon {
    fn default() -> Self {
        Epsilon::Relative(1e-6)
    }
}

impl Epsilon {
    pub fn resolve<R: Real>(self, x: &[R]) -> f64 {
        match self {
            Epsilon::Absolute(v) => v,
            Epsilon::Relative(c) => {
                // lowpass taps sum to one, so |x| * phi <= max |x|
                let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs().to_f64_lossy()));
                c * peak
            }
        }
    }
}

/// Shape knobs of the filterbank design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterShape {
    /// Lower bound on `centre / bandwidth` for the widened low-frequency
    /// wavelets, applied at the lowest centre `pi/T`.
    pub min_center_ratio: f64,
    /// Kernels are truncated at this many time-domain standard deviations.
    pub support_sigmas: f64,
}

impl Default for FilterShape {
    fn default() -> Self {
        FilterShape {
            min_center_ratio: 2.5,
            support_sigmas: 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringConfig {
    /// Invariance scale in seconds.
    pub t: f64,
    /// Wavelets per octave.
    pub q: usize,
    pub epsilon: Epsilon,
    /// Frame spacing in seconds; `None` means `T/2`.
    pub frame_hop: Option<f64>,
    pub shape: FilterShape,
}

impl Default for ScatteringConfig {
    fn default() -> Self {
        ScatteringConfig {
            t: 0.186,
            q: 8,
            epsilon: Epsilon::default(),
            frame_hop: None,
            shape: FilterShape::default(),
        }
    }
}

impl ScatteringConfig {
    pub fn new(t: f64, q: usize) -> Self {
        ScatteringConfig {
            t,
            q,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::invalid(format!(
                "T must be positive, got {}",
                self.t
            )));
        }
        if self.q == 0 {
            return Err(Error::invalid("Q must be at least 1"));
        }
        if let Some(h) = self.frame_hop {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::invalid(format!(
                    "frame hop must be positive, got {h}"
                )));
            }
        }
        match self.epsilon {
            Epsilon::Relative(v) | Epsilon::Absolute(v) if !(v >= 0.0 && v.is_finite()) => {
                Err(Error::invalid(format!("epsilon must be >= 0, got {v}")))
            }
            _ if !(self.shape.min_center_ratio > 0.0 && self.shape.support_sigmas >= 2.0) => {
                Err(Error::invalid("degenerate filter shape"))
            }
            _ => Ok(()),
        }
    }

    /// Frame spacing in samples: the 7-smooth integer nearest to the
    /// requested hop, which keeps every FFT size in the plan smooth.
    pub fn hop_samples(&self, sample_rate: f64) -> usize {
        let h = self.frame_hop.unwrap_or(self.t / 2.0) * sample_rate;
        nearest_smooth(h)
    }
}

fn nearest_smooth(x: f64) -> usize {
    let lo = x.floor().max(1.0) as usize;
    let mut below = lo;
    while below > 1 && fast_len(below) != below {
        below -= 1;
    }
    let above = fast_len(lo + 1);
    if x - below as f64 <= above as f64 - x {
        below
    } else {
        above
    }
}

/// Scattering coefficients of one segment. `order1` has one row per wavelet
/// (highest centre first) and one column per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringMatrix<R> {
    pub order0: Vec<R>,
    pub order1: Array2<R>,
    /// `|x| * phi` at the frame positions.
    pub envelope: Vec<R>,
    /// Wavelet centres, rad/s.
    pub centers: Vec<f64>,
    pub frame_times: Vec<f64>,
    pub t: f64,
    pub q: usize,
    pub sample_rate: f64,
    pub segment_len: usize,
    pub modality: Modality,
    /// Stabilizer used by [`normalize_scattering`], `None` before.
    pub epsilon: Option<f64>,
}

impl<R: Real> ScatteringMatrix<R> {
    pub fn paths(&self) -> usize {
        self.order1.nrows()
    }

    pub fn frames(&self) -> usize {
        self.order1.ncols()
    }

    pub fn is_normalized(&self) -> bool {
        self.epsilon.is_some()
    }
}

/// Precomputed transforms for segments of one fixed length.
///
/// Segments are reflect-padded by the half support of the longest wavelet
/// plus that of the lowpass, so every retained output sample is free of
/// circular wrap-around. The wavelet convolutions run in the frequency
/// domain on the exact DFTs of the sampled kernels. Lowpass filtering and
/// subsampling by the frame hop are fused: the spectrum is folded onto
/// `M / hop` bins and inverted at that size.
pub struct ScatterPlan<R: Real> {
    fb: Filterbank<R>,
    modality: Modality,
    seg_len: usize,
    hop: usize,
    frames: usize,
    /// Wavelets grouped by support; each group has its own FFT size.
    bands: Vec<Band<R>>,
    scratch_len: usize,
}

/// FFT workspace for wavelets whose support fits within `pad`.
struct Band<R: Real> {
    pad: usize,
    m: usize,
    m_small: usize,
    fwd: Arc<dyn Fft<R>>,
    inv: Arc<dyn Fft<R>>,
    inv_small: Arc<dyn Fft<R>>,
    /// `(path index, DFT / m)`
    wavelets: Vec<(usize, Vec<Complex<R>>)>,
    lowpass_hat: Vec<Complex<R>>,
}

impl<R: Real> std::fmt::Debug for ScatterPlan<R> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScatterPlan")
            .field("paths", &self.fb.len())
            .field("seg_len", &self.seg_len)
            .field("hop", &self.hop)
            .field("frames", &self.frames)
            .field("pad", &self.pad())
            .field(
                "fft_lens",
                &self.bands.iter().map(|b| b.m).collect::<Vec<_>>(),
            )
            .finish()
    }
}

fn czero<R: Real>() -> Complex<R> {
    Complex::new(R::zero(), R::zero())
}

/// Smallest multiple of `hop` that is 7-smooth and holds `needed` samples.
fn band_len(needed: usize, hop: usize) -> (usize, usize) {
    let base = needed.div_ceil(hop);
    let m_small = (base..base + 64)
        .find(|&k| fast_len(k * hop) == k * hop)
        .unwrap_or(base);
    (m_small * hop, m_small)
}

/// A new band starts once the FFT would grow by more than this factor.
const BAND_GROWTH: f64 = 1.2;

impl<R: Real> Band<R> {
    fn new(fb: &Filterbank<R>, pad: usize, seg_len: usize, hop: usize, paths: &[usize]) -> Self {
        let (m, m_small) = band_len(seg_len + 2 * pad, hop);
        let mut planner = FftPlanner::<R>::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let inv_small = planner.plan_fft_inverse(m_small);
        let mut scratch = vec![czero(); fwd.get_inplace_scratch_len()];

        let inv_m = R::one() / R::from_usize_lossy(m);
        let wrapped = |taps: &mut dyn Iterator<Item = (isize, Complex<R>)>| {
            let mut buf = vec![czero::<R>(); m];
            for (d, v) in taps {
                buf[d.rem_euclid(m as isize) as usize] += v;
            }
            buf
        };
        let wavelets = paths
            .iter()
            .map(|&j| {
                let w = &fb.wavelets()[j];
                let h = w.half as isize;
                let mut buf =
                    wrapped(&mut w.taps.iter().enumerate().map(|(i, &c)| (i as isize - h, c)));
                fwd.process_with_scratch(&mut buf, &mut scratch);
                buf.iter_mut().for_each(|c| *c *= inv_m);
                (j, buf)
            })
            .collect();

        let h = fb.lowpass_half() as isize;
        let mut lowpass_hat = wrapped(
            &mut fb
                .lowpass()
                .iter()
                .enumerate()
                .map(|(i, &v)| (i as isize - h, Complex::new(v, R::zero()))),
        );
        fwd.process_with_scratch(&mut lowpass_hat, &mut scratch);
        // advance by `pad` so frame 0 lands on the first segment sample
        for (k, c) in lowpass_hat.iter_mut().enumerate() {
            let ang = 2.0 * std::f64::consts::PI * ((k * pad) % m) as f64 / m as f64;
            let shift = Complex::new(R::lit(ang.cos()), R::lit(ang.sin()));
            *c = *c * shift * inv_m;
        }
        Band {
            pad,
            m,
            m_small,
            fwd,
            inv,
            inv_small,
            wavelets,
            lowpass_hat,
        }
    }

    fn scratch_len(&self) -> usize {
        self.fwd
            .get_inplace_scratch_len()
            .max(self.inv.get_inplace_scratch_len())
            .max(self.inv_small.get_inplace_scratch_len())
    }

    /// Reflect-pad `x` into `spectrum.re` and `pair` as `x + i|x|`.
    fn load(&self, x: &[R], spectrum: &mut [Complex<R>], pair: &mut [Complex<R>]) {
        let n = x.len();
        spectrum.iter_mut().for_each(|c| *c = czero());
        pair.iter_mut().for_each(|c| *c = czero());
        for i in 0..n + 2 * self.pad {
            let v = x[reflect_index(i as isize - self.pad as isize, n)];
            spectrum[i].re = v;
            pair[i] = Complex::new(v, v.abs());
        }
    }

    /// Lowpass and subsample two real sequences packed as `re + i im`.
    fn lowpass_pair(
        &self,
        buf: &mut [Complex<R>],
        scratch: &mut [Complex<R>],
        frames: usize,
    ) -> (Vec<R>, Vec<R>) {
        self.fwd.process_with_scratch(buf, scratch);
        let ms = self.m_small;
        let mut small = vec![czero::<R>(); ms];
        for (chunk, lp) in buf.chunks(ms).zip(self.lowpass_hat.chunks(ms)) {
            for ((s, &b), &l) in small.iter_mut().zip(chunk).zip(lp) {
                *s += b * l;
            }
        }
        self.inv_small.process_with_scratch(&mut small, scratch);
        small.iter().take(frames).map(|c| (c.re, c.im)).unzip()
    }
}

impl<R: Real> ScatterPlan<R> {
    pub fn new(
        cfg: &ScatteringConfig,
        sample_rate: f64,
        seg_len: usize,
        modality: Modality,
    ) -> Result<Self> {
        let fb = build_filterbank(cfg, sample_rate)?;
        Self::with_filterbank(fb, cfg, seg_len, modality)
    }

    pub fn with_filterbank(
        fb: Filterbank<R>,
        cfg: &ScatteringConfig,
        seg_len: usize,
        modality: Modality,
    ) -> Result<Self> {
        cfg.validate()?;
        if seg_len == 0 {
            return Err(Error::invalid("empty segment"));
        }
        if (fb.t() - cfg.t).abs() > 1e-12 || fb.q() != cfg.q {
            return Err(Error::invalid(
                "filterbank was built for a different T or Q",
            ));
        }
        let hop = cfg.hop_samples(fb.sample_rate());
        let frames = seg_len.div_ceil(hop);
        let lp = fb.lowpass_half();

        // the first band always exists; it also carries order 0 and the envelope
        let mut order: Vec<usize> = (0..fb.len()).collect();
        order.sort_by_key(|&j| fb.wavelets()[j].half);
        let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
        let mut current = (lp, Vec::new(), band_len(seg_len + 2 * lp, hop).0);
        for j in order {
            let pad = fb.wavelets()[j].half + lp;
            let m = band_len(seg_len + 2 * pad, hop).0;
            if m as f64 > BAND_GROWTH * current.2 as f64 && !current.1.is_empty() {
                groups.push((current.0, std::mem::take(&mut current.1)));
                current.2 = m;
            }
            current.0 = current.0.max(pad);
            current.1.push(j);
        }
        groups.push((current.0, current.1));

        let bands: Vec<Band<R>> = groups
            .iter()
            .map(|(pad, paths)| Band::new(&fb, *pad, seg_len, hop, paths))
            .collect();
        let scratch_len = bands.iter().map(Band::scratch_len).max().unwrap_or(0);
        Ok(ScatterPlan {
            fb,
            modality,
            seg_len,
            hop,
            frames,
            bands,
            scratch_len,
        })
    }

    pub fn filterbank(&self) -> &Filterbank<R> {
        &self.fb
    }

    pub fn segment_len(&self) -> usize {
        self.seg_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    /// Largest reflection padding applied on each side.
    pub fn pad(&self) -> usize {
        self.bands.iter().map(|b| b.pad).max().unwrap_or(0)
    }

    /// Largest FFT size in the plan.
    pub fn fft_len(&self) -> usize {
        self.bands.iter().map(|b| b.m).max().unwrap_or(0)
    }

    /// Unnormalized scattering of one segment.
    pub fn transform(&self, x: &[R]) -> Result<ScatteringMatrix<R>> {
        if x.len() != self.seg_len {
            return Err(Error::shape(format!(
                "plan expects {} samples, got {}",
                self.seg_len,
                x.len()
            )));
        }
        let frames = self.frames;
        let mut scratch = vec![czero(); self.scratch_len];
        let mut order1 = Array2::zeros((self.fb.len(), frames));
        let mut order0 = Vec::new();
        let mut envelope = Vec::new();

        for (bi, band) in self.bands.iter().enumerate() {
            let m = band.m;
            let mut spectrum = vec![czero::<R>(); m];
            let mut pair = vec![czero::<R>(); m];
            band.load(x, &mut spectrum, &mut pair);
            if bi == 0 {
                (order0, envelope) = band.lowpass_pair(&mut pair, &mut scratch, frames);
            }
            band.fwd.process_with_scratch(&mut spectrum, &mut scratch);

            let mut y = vec![czero::<R>(); m];
            for chunk in band.wavelets.chunks(2) {
                for (slot, (_, hat)) in chunk.iter().enumerate() {
                    for ((o, &a), &b) in y.iter_mut().zip(&spectrum).zip(hat) {
                        *o = a * b;
                    }
                    band.inv.process_with_scratch(&mut y, &mut scratch);
                    for (p, c) in pair.iter_mut().zip(&y) {
                        let mag = (c.re * c.re + c.im * c.im).sqrt();
                        if slot == 0 {
                            p.re = mag;
                        } else {
                            p.im = mag;
                        }
                    }
                }
                if chunk.len() == 1 {
                    pair.iter_mut().for_each(|c| c.im = R::zero());
                }
                let (a, b) = band.lowpass_pair(&mut pair, &mut scratch, frames);
                order1
                    .row_mut(chunk[0].0)
                    .assign(&ndarray::ArrayView1::from(&a));
                if let Some((j, _)) = chunk.get(1) {
                    order1.row_mut(*j).assign(&ndarray::ArrayView1::from(&b));
                }
            }
        }

        let sr = self.fb.sample_rate();
        Ok(ScatteringMatrix {
            order0,
            order1,
            envelope,
            centers: self.fb.centers(),
            frame_times: (0..frames).map(|k| (k * self.hop) as f64 / sr).collect(),
            t: self.fb.t(),
            q: self.fb.q(),
            sample_rate: sr,
            segment_len: self.seg_len,
            modality: self.modality,
            epsilon: None,
        })
    }
}

/// Scatter one segment with a freshly planned transform.
pub fn scatter_order1<R: Real>(
    segment: &Segment<R>,
    fb: &Filterbank<R>,
    cfg: &ScatteringConfig,
) -> Result<ScatteringMatrix<R>> {
    if (segment.sample_rate - fb.sample_rate()).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "segment rate {} Hz does not match filterbank rate {} Hz",
            segment.sample_rate,
            fb.sample_rate()
        )));
    }
    let plan = ScatterPlan::with_filterbank(fb.clone(), cfg, segment.len(), segment.modality)?;
    plan.transform(&segment.samples)
}

/// Divide each first-order coefficient by the local envelope plus epsilon.
/// `x` must be the segment `s` was computed from.
pub fn normalize_scattering<R: Real>(
    s: &ScatteringMatrix<R>,
    x: &[R],
    cfg: &ScatteringConfig,
) -> Result<ScatteringMatrix<R>> {
    if s.is_normalized() {
        return Err(Error::invalid("scattering matrix is already normalized"));
    }
    if x.len() != s.segment_len || s.envelope.len() != s.frames() {
        return Err(Error::shape(format!(
            "segment of {} samples with {} envelope values for a {}x{} matrix",
            x.len(),
            s.envelope.len(),
            s.paths(),
            s.frames()
        )));
    }
    let eps = cfg.epsilon.resolve(x);
    let eps_r = R::lit(eps);
    let mut out = s.clone();
    for (mut col, &e) in out.order1.columns_mut().into_iter().zip(&s.envelope) {
        let den = e + eps_r;
        col.mapv_inplace(|v| if den > R::zero() { v / den } else { R::zero() });
    }
    out.epsilon = Some(eps);
    Ok(out)
}
