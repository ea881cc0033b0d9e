//! Turning scattering matrices into fixed-length descriptors: modality
//! fusion, temporal Fourier modulus, log compression, standardization and
//! DCT (or PCA) truncation.

mod dct;
mod io;
mod pca;

use ndarray::{Array2, ArrayView2, Axis};
use num_complex::Complex;
use rustfft::FftPlanner;

pub use dct::{dct2, dct_reduce, idct2, Dct};
pub use io::{
    pca_from_bytes, pca_to_bytes, read_features_csv, read_pca, read_standardizer,
    standardizer_from_bytes, standardizer_to_bytes, write_features_csv, write_pca,
    write_standardizer,
};
pub use pca::Pca;

use crate::error::{Error, Result};
use crate::scattering::ScatteringMatrix;
use crate::Real;

/// Guard added before taking logs.
pub const LOG_DELTA: f64 = 1e-10;
/// Smallest standard deviation a standardizer will divide by.
pub const STD_FLOOR: f64 = 1e-8;

/// Audio and geophone scattering combined on a shared filterbank.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedMatrix<R> {
    /// Audio order-0 row followed by the geophone one.
    pub order0: Array2<R>,
    pub order1: Array2<R>,
    pub alpha_audio: f64,
    pub alpha_geo: f64,
}

/// `1 / max(order1)`, or 0 for an all-zero matrix.
pub fn modality_weight<R: Real>(s: &ScatteringMatrix<R>) -> f64 {
    let peak = s
        .order1
        .iter()
        .fold(R::zero(), |m, &v| m.max(v))
        .to_f64_lossy();
    if peak > 0.0 {
        1.0 / peak
    } else {
        0.0
    }
}

pub fn fuse<R: Real>(
    audio: &ScatteringMatrix<R>,
    geo: &ScatteringMatrix<R>,
) -> Result<FusedMatrix<R>> {
    if audio.order1.dim() != geo.order1.dim() {
        return Err(Error::shape(format!(
            "audio scattering is {:?}, geophone {:?}",
            audio.order1.dim(),
            geo.order1.dim()
        )));
    }
    if audio
        .centers
        .iter()
        .zip(&geo.centers)
        .any(|(a, b)| (a - b).abs() > 1e-6 * a.abs())
    {
        return Err(Error::shape(
            "modalities were scattered with different filterbanks",
        ));
    }
    let alpha_audio = modality_weight(audio);
    let alpha_geo = modality_weight(geo);
    if alpha_audio == 0.0 && alpha_geo == 0.0 {
        return Err(Error::invalid("both modalities are all zero"));
    }
    let (aa, ag) = (R::lit(alpha_audio), R::lit(alpha_geo));
    let order1 = ndarray::Zip::from(&audio.order1)
        .and(&geo.order1)
        .map_collect(|&a, &g| aa * a + ag * g);
    let frames = audio.frames();
    let mut order0 = Array2::zeros((2, frames));
    order0
        .row_mut(0)
        .assign(&ndarray::ArrayView1::from(&audio.order0));
    order0
        .row_mut(1)
        .assign(&ndarray::ArrayView1::from(&geo.order0));
    Ok(FusedMatrix {
        order0,
        order1,
        alpha_audio,
        alpha_geo,
    })
}

impl<R: Real> FusedMatrix<R> {
    /// Order-0 rows stacked above order-1 rows.
    pub fn rows(&self) -> Array2<R> {
        ndarray::concatenate(Axis(0), &[self.order0.view(), self.order1.view()])
            .expect("equal frame counts")
    }
}

/// Order-0 row stacked above the order-1 rows of a single modality.
pub fn single_rows<R: Real>(s: &ScatteringMatrix<R>) -> Array2<R> {
    let mut out = Array2::zeros((s.paths() + 1, s.frames()));
    out.row_mut(0).assign(&ndarray::ArrayView1::from(&s.order0));
    out.slice_mut(ndarray::s![1.., ..]).assign(&s.order1);
    out
}

/// Number of frame-spectrum bins kept for `frames` columns.
pub fn spectrum_bins(frames: usize) -> usize {
    frames / 2 + 1
}

/// Magnitude of each row's DFT over frames, non-negative bins only.
pub fn temporal_fourier_modulus<R: Real>(m: ArrayView2<R>) -> Result<Array2<R>> {
    let (rows, frames) = m.dim();
    if rows == 0 || frames == 0 {
        return Err(Error::shape("empty scattering matrix"));
    }
    let bins = spectrum_bins(frames);
    let fft = FftPlanner::<R>::new().plan_fft_forward(frames);
    let mut out = Array2::zeros((rows, bins));
    let mut buf = vec![Complex::new(R::zero(), R::zero()); frames];
    for (row, mut dst) in m.rows().into_iter().zip(out.rows_mut()) {
        for (b, &v) in buf.iter_mut().zip(row.iter()) {
            *b = Complex::new(v, R::zero());
        }
        fft.process(&mut buf);
        for (d, c) in dst.iter_mut().zip(&buf) {
            *d = c.norm();
        }
    }
    Ok(out)
}

/// `log(v + delta)` of the Fourier modulus, flattened path-major.
pub fn log_spectrum<R: Real>(m: ArrayView2<R>, delta: f64) -> Result<Vec<R>> {
    let tfm = temporal_fourier_modulus(m)?;
    let d = R::lit(delta);
    Ok(tfm.iter().map(|&v| (v + d).ln()).collect())
}

/// Per-dimension centring and scaling learned from training vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer<R> {
    pub mean: Vec<R>,
    pub std: Vec<R>,
}

impl<R: Real> Standardizer<R> {
    /// Rows of `data` are observations. Standard deviations use the
    /// population (1/n) convention and are floored at [`STD_FLOOR`].
    pub fn fit(data: ArrayView2<R>) -> Result<Self> {
        let n = data.nrows();
        if n == 0 {
            return Err(Error::invalid("cannot fit a standardizer on zero vectors"));
        }
        let nr = R::from_usize_lossy(n);
        let mean: Vec<R> = data
            .columns()
            .into_iter()
            .map(|c| c.iter().copied().sum::<R>() / nr)
            .collect();
        let std = data
            .columns()
            .into_iter()
            .zip(&mean)
            .map(|(c, &mu)| {
                let var = c.iter().map(|&v| (v - mu) * (v - mu)).sum::<R>() / nr;
                var.sqrt().max(R::lit(STD_FLOOR))
            })
            .collect();
        Ok(Standardizer { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, v: &[R]) -> Result<Vec<R>> {
        if v.len() != self.dim() {
            return Err(Error::shape(format!(
                "standardizer has {} dims, vector has {}",
                self.dim(),
                v.len()
            )));
        }
        Ok(v.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((&x, &m), &s)| (x - m) / s)
            .collect())
    }

    pub fn apply_rows(&self, data: ArrayView2<R>) -> Result<Array2<R>> {
        let mut out = data.to_owned();
        if data.ncols() != self.dim() {
            return Err(Error::shape(format!(
                "standardizer has {} dims, data has {}",
                self.dim(),
                data.ncols()
            )));
        }
        for mut row in out.rows_mut() {
            for ((x, &m), &s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *x = (*x - m) / s;
            }
        }
        Ok(out)
    }
}

/// Fit statistics on `train`, then standardize it.
pub fn standardize_fit<R: Real>(train: ArrayView2<R>) -> Result<(Array2<R>, Standardizer<R>)> {
    let st = Standardizer::fit(train)?;
    Ok((st.apply_rows(train)?, st))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reduction {
    #[default]
    Dct,
    Pca,
}

impl std::str::FromStr for Reduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dct" => Ok(Reduction::Dct),
            "pca" => Ok(Reduction::Pca),
            _ => Err(Error::invalid(format!("unknown reduction {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PostprocessConfig {
    /// Coefficients kept per segment vector.
    pub n: usize,
    pub reduction: Reduction,
}

/// Training-set standardizer followed by DCT or PCA truncation.
#[derive(Debug, Clone)]
pub struct Postprocessor<R: Real> {
    pub standardizer: Standardizer<R>,
    pub pca: Option<Pca<R>>,
    n: usize,
    dct: Option<Dct<R>>,
}

impl<R: Real> Postprocessor<R> {
    /// Rows of `train` are log-spectrum descriptors.
    pub fn fit(train: ArrayView2<R>, cfg: PostprocessConfig) -> Result<Self> {
        let d = train.ncols();
        if cfg.n == 0 || cfg.n > d {
            return Err(Error::invalid(format!("N = {} outside [1, {d}]", cfg.n)));
        }
        let (z, standardizer) = standardize_fit(train)?;
        let (pca, dct, n) = match cfg.reduction {
            Reduction::Dct => (None, Some(Dct::new(d)?), cfg.n),
            Reduction::Pca => {
                let pca = Pca::fit(z.view())?;
                let n = cfg.n.min(pca.rank());
                if n < cfg.n {
                    log::warn!(
                        "PCA rank {} below N = {}; keeping {n} components",
                        pca.rank(),
                        cfg.n
                    );
                }
                (Some(pca), None, n)
            }
        };
        Ok(Postprocessor {
            standardizer,
            pca,
            n,
            dct,
        })
    }

    /// Rebuild from stored statistics.
    pub fn from_parts(
        standardizer: Standardizer<R>,
        pca: Option<Pca<R>>,
        n: usize,
    ) -> Result<Self> {
        let d = standardizer.dim();
        let limit = pca.as_ref().map_or(d, |p| p.rank());
        if n == 0 || n > limit {
            return Err(Error::invalid(format!("N = {n} outside [1, {limit}]")));
        }
        if let Some(p) = &pca {
            if p.dim() != d {
                return Err(Error::shape(format!(
                    "standardizer has {d} dims, PCA {}",
                    p.dim()
                )));
            }
        }
        let dct = if pca.is_none() {
            Some(Dct::new(d)?)
        } else {
            None
        };
        Ok(Postprocessor {
            standardizer,
            pca,
            n,
            dct,
        })
    }

    /// Output dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn apply(&self, v: &[R]) -> Result<Vec<R>> {
        let z = self.standardizer.apply(v)?;
        match (&self.pca, &self.dct) {
            (Some(p), _) => p.reduce(&z, self.n),
            (None, Some(dct)) => {
                let mut c = dct.forward(&z)?;
                c.truncate(self.n);
                Ok(c)
            }
            (None, None) => unreachable!("one reduction is always set"),
        }
    }

    pub fn apply_rows(&self, data: ArrayView2<R>) -> Result<Array2<R>> {
        let mut out = Array2::zeros((data.nrows(), self.n));
        for (row, mut dst) in data.rows().into_iter().zip(out.rows_mut()) {
            let v = self.apply(&row.to_vec())?;
            dst.assign(&ndarray::ArrayView1::from(&v));
        }
        Ok(out)
    }
}

/// Labelled descriptors, one row per segment.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet<R> {
    pub data: Array2<R>,
    /// Walker id of each row.
    pub labels: Vec<u32>,
    /// Recording each row was cut from.
    pub recordings: Vec<u32>,
    pub days: Vec<u32>,
}

impl<R: Real> FeatureSet<R> {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    /// Rows whose index satisfies `keep`, in order.
    pub fn select(&self, keep: impl Fn(usize) -> bool) -> FeatureSet<R> {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        FeatureSet {
            data: self.data.select(Axis(0), &idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            recordings: idx.iter().map(|&i| self.recordings[i]).collect(),
            days: idx.iter().map(|&i| self.days[i]).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_io::Modality;
    use ndarray::array;

    fn matrix(order1: Array2<f64>) -> ScatteringMatrix<f64> {
        let frames = order1.ncols();
        let paths = order1.nrows();
        ScatteringMatrix {
            order0: vec![0.5; frames],
            order1,
            envelope: vec![1.0; frames],
            centers: (0..paths).map(|j| 1000.0 / (j + 1) as f64).collect(),
            frame_times: (0..frames).map(|k| k as f64 * 0.05).collect(),
            t: 0.1,
            q: 1,
            sample_rate: 1000.0,
            segment_len: 100,
            modality: Modality::Audio,
            epsilon: Some(0.0),
        }
    }

    #[test]
    fn fusing_a_matrix_with_itself_doubles_its_normalized_form() {
        let m = array![[1.0, 4.0], [2.0, 0.5]];
        let s = matrix(m.clone());
        let f = fuse(&s, &s).unwrap();
        assert_eq!(f.order1, m.mapv(|v| 2.0 * v / 4.0));
        assert_eq!(f.order0.nrows(), 2);
    }

    #[test]
    fn zero_modality_gets_zero_weight() {
        let a = matrix(array![[1.0, 4.0], [2.0, 0.5]]);
        let g = matrix(Array2::zeros((2, 2)));
        let f = fuse(&a, &g).unwrap();
        assert_eq!(f.alpha_geo, 0.0);
        assert_eq!(f.order1, a.order1.mapv(|v| v / 4.0));
        assert!(fuse(&g, &g).is_err());
    }

    #[test]
    fn disjoint_supports_each_peak_at_one() {
        let a = matrix(array![[3.0, 6.0], [0.0, 0.0]]);
        let g = matrix(array![[0.0, 0.0], [0.2, 0.1]]);
        let f = fuse(&a, &g).unwrap();
        let top = f.order1.row(0).iter().cloned().fold(0.0, f64::max);
        let bottom = f.order1.row(1).iter().cloned().fold(0.0, f64::max);
        assert_eq!((top, bottom), (1.0, 1.0));
    }

    #[test]
    fn fuse_rejects_shape_mismatch() {
        let a = matrix(Array2::ones((2, 3)));
        let g = matrix(Array2::ones((2, 4)));
        assert!(fuse(&a, &g).is_err());
    }

    #[test]
    fn constant_row_has_dc_only_spectrum() {
        let m = Array2::from_elem((1, 7), 0.25f64);
        let t = temporal_fourier_modulus(m.view()).unwrap();
        assert_eq!(t.ncols(), 4);
        assert!((t[[0, 0]] - 0.25 * 7.0).abs() < 1e-12);
        assert!(t.iter().skip(1).all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn fourier_modulus_matches_naive_dft() {
        let m = Array2::from_shape_fn((3, 10), |(i, j)| {
            ((i * 13 + j * 7) % 11) as f64 * 0.1 + 0.01
        });
        let t = temporal_fourier_modulus(m.view()).unwrap();
        for i in 0..3 {
            for k in 0..t.ncols() {
                let mut acc = Complex::new(0.0, 0.0);
                for n in 0..10 {
                    let ang = -2.0 * std::f64::consts::PI * (k * n) as f64 / 10.0;
                    acc += Complex::from_polar(m[[i, n]], ang);
                }
                assert!((t[[i, k]] - acc.norm()).abs() <= 1e-9 * acc.norm().max(1.0));
            }
        }
    }

    #[test]
    fn empty_matrix_errors() {
        assert!(temporal_fourier_modulus(Array2::<f64>::zeros((0, 3)).view()).is_err());
        assert!(temporal_fourier_modulus(Array2::<f64>::zeros((2, 0)).view()).is_err());
    }

    #[test]
    fn standardizer_centres_and_scales() {
        let data = Array2::from_shape_fn((50, 3), |(i, j)| {
            (i as f64).sin() * (j + 1) as f64 + j as f64
        });
        let (z, _) = standardize_fit(data.view()).unwrap();
        for c in z.columns() {
            let mean = c.sum() / 50.0;
            let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 50.0;
            assert!(mean.abs() < 1e-9);
            assert!((var - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_dimension_maps_to_zero() {
        let mut data = Array2::from_shape_fn((10, 2), |(i, _)| i as f64);
        data.column_mut(1).fill(3.0);
        let (z, st) = standardize_fit(data.view()).unwrap();
        assert!(z.column(1).iter().all(|&v| v == 0.0));
        assert!(st.std[1] > 0.0);
        assert!(st.apply(&[1.0]).is_err());
    }
}
