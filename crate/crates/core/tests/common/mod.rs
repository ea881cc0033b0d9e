#![allow(dead_code)]

use gaitscat::scattering::{Filterbank, ScatterPlan};
use ndarray::Array2;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
}

pub fn rel_frobenius(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let num: f64 = (a - b).mapv(|v| v * v).sum();
    let den: f64 = b.mapv(|v| v * v).sum();
    (num / den).sqrt()
}

/// Order-1 scattering by reflect extension, direct complex convolution
/// with every wavelet and direct lowpass filtering at each frame.
pub fn naive_order1(plan: &ScatterPlan<f64>, x: &[f64]) -> Array2<f64> {
    let n = x.len() as isize;
    let refl = |i: isize| -> f64 {
        let mut k = i;
        loop {
            if k < 0 {
                k = -k;
            } else if k >= n {
                k = 2 * (n - 1) - k;
            } else {
                return x[k as usize];
            }
        }
    };
    let fb: &Filterbank<f64> = plan.filterbank();
    let hl = fb.lowpass_half() as isize;
    let hop = plan.hop() as isize;
    let frames = plan.frames();
    let first = -hl;
    let last = (frames as isize - 1) * hop + hl;
    let hmax = fb
        .wavelets()
        .iter()
        .map(|w| w.half as isize)
        .max()
        .unwrap_or(0);
    // reflect-extended input covering every tap of every output sample
    let origin = first - hmax;
    let ext: Vec<f64> = (origin..=last + hmax).map(refl).collect();
    let mut out = Array2::zeros((fb.len(), frames));
    for (j, w) in fb.wavelets().iter().enumerate() {
        let h = w.half as isize;
        // taps reversed so each output is a plain dot product with `ext`
        let re: Vec<f64> = w.taps.iter().rev().map(|t| t.re).collect();
        let im: Vec<f64> = w.taps.iter().rev().map(|t| t.im).collect();
        let u: Vec<f64> = (first..=last)
            .map(|c| {
                let lo = (c - h - origin) as usize;
                let win = &ext[lo..lo + re.len()];
                Complex::new(dot(&re, win), dot(&im, win)).norm()
            })
            .collect();
        for f in 0..frames {
            let c = f as isize * hop;
            out[[j, f]] = (-hl..=hl)
                .map(|d| fb.lowpass()[(d + hl) as usize] * u[(c - d - first) as usize])
                .sum();
        }
    }
    out
}

/// Dot product with four running sums.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for ((s, p), q) in acc.iter_mut().zip(x).zip(y) {
            *s += p * q;
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// EER by scanning every threshold and interpolating the first sign change
/// of FAR - FRR, written without sorting tricks.
pub fn exhaustive_eer(genuine: &[f64], impostor: &[f64]) -> f64 {
    let mut ts: Vec<f64> = genuine.iter().chain(impostor).copied().collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts.push(f64::INFINITY);
    let rates = |t: f64| {
        let far = impostor.iter().filter(|&&s| s >= t).count() as f64 / impostor.len() as f64;
        let frr = genuine.iter().filter(|&&s| s < t).count() as f64 / genuine.len() as f64;
        (far, frr)
    };
    let mut prev: Option<(f64, f64)> = None;
    for t in ts {
        let (far, frr) = rates(t);
        let d = far - frr;
        if d == 0.0 {
            return far;
        }
        if d < 0.0 {
            let (pfar, pd) = prev.unwrap();
            return pfar + pd / (pd - d) * (far - pfar);
        }
        prev = Some((far, d));
    }
    unreachable!()
}

/// Per-row Gaussian blobs around `centres` with unit-ish spread.
pub fn blobs(centres: &[Vec<f64>], per: usize, spread: f64, seed: u64) -> Array2<f64> {
    use rand_distr::StandardNormal;
    let mut r = rng(seed);
    let d = centres[0].len();
    let mut out = Array2::zeros((centres.len() * per, d));
    for (c, centre) in centres.iter().enumerate() {
        for i in 0..per {
            for j in 0..d {
                let z: f64 = r.sample(StandardNormal);
                out[[c * per + i, j]] = centre[j] + spread * z;
            }
        }
    }
    out
}
