//! Orthonormal DCT-II and its inverse through one complex FFT of the same
//! length (even/odd reordering).

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::Real;

#[derive(Clone)]
pub struct Dct<R: Real> {
    n: usize,
    fwd: Arc<dyn Fft<R>>,
    inv: Arc<dyn Fft<R>>,
    /// `exp(-i pi k / 2n)`
    twiddle: Vec<Complex<R>>,
    scale0: R,
    scale: R,
}

impl<R: Real> std::fmt::Debug for Dct<R> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dct").field("n", &self.n).finish()
    }
}

impl<R: Real> Dct<R> {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("DCT length must be positive"));
        }
        let mut planner = FftPlanner::new();
        let twiddle = (0..n)
            .map(|k| {
                let ang = -std::f64::consts::PI * k as f64 / (2 * n) as f64;
                Complex::new(R::lit(ang.cos()), R::lit(ang.sin()))
            })
            .collect();
        Ok(Dct {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            twiddle,
            scale0: R::lit((1.0 / n as f64).sqrt()),
            scale: R::lit((2.0 / n as f64).sqrt()),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn check(&self, x: &[R]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::shape(format!(
                "DCT of length {} given {} values",
                self.n,
                x.len()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[R]) -> Result<Vec<R>> {
        self.check(x)?;
        let n = self.n;
        let mut v = vec![Complex::new(R::zero(), R::zero()); n];
        for i in 0..n.div_ceil(2) {
            v[i].re = x[2 * i];
        }
        for i in 0..n / 2 {
            v[n - 1 - i].re = x[2 * i + 1];
        }
        self.fwd.process(&mut v);
        Ok(v.iter()
            .zip(&self.twiddle)
            .enumerate()
            .map(|(k, (c, w))| {
                let s = if k == 0 { self.scale0 } else { self.scale };
                (c * w).re * s
            })
            .collect())
    }

    pub fn inverse(&self, y: &[R]) -> Result<Vec<R>> {
        self.check(y)?;
        let n = self.n;
        let unscaled = |k: usize| -> R {
            if k == 0 {
                y[0] / self.scale0
            } else if k < n {
                y[k] / self.scale
            } else {
                R::zero()
            }
        };
        let mut v: Vec<Complex<R>> = (0..n)
            .map(|k| {
                let w = Complex::new(unscaled(k), -unscaled(n - k));
                w * self.twiddle[k].conj()
            })
            .collect();
        self.inv.process(&mut v);
        let inv_n = R::one() / R::from_usize_lossy(n);
        let mut x = vec![R::zero(); n];
        for i in 0..n.div_ceil(2) {
            x[2 * i] = v[i].re * inv_n;
        }
        for i in 0..n / 2 {
            x[2 * i + 1] = v[n - 1 - i].re * inv_n;
        }
        Ok(x)
    }
}

pub fn dct2<R: Real>(x: &[R]) -> Result<Vec<R>> {
    Dct::new(x.len())?.forward(x)
}

pub fn idct2<R: Real>(y: &[R]) -> Result<Vec<R>> {
    Dct::new(y.len())?.inverse(y)
}

/// First `n` orthonormal DCT-II coefficients of `v`.
pub fn dct_reduce<R: Real>(v: &[R], n: usize) -> Result<Vec<R>> {
    if n == 0 || n > v.len() {
        return Err(Error::invalid(format!(
            "cannot keep {n} coefficients of a {}-dim vector",
            v.len()
        )));
    }
    let mut y = dct2(v)?;
    y.truncate(n);
    Ok(y)
}
