//! Morlet wavelet filterbank with a Gaussian lowpass.
//!
//! Centre frequencies form a geometric grid `omega_nyq * 2^(-j/Q)` reaching
//! down to `pi/T`. Above a crossover frequency each wavelet is constant-Q with
//! neighbours crossing at half power. Below it the constant-Q bandwidth would
//! make the wavelet longer than the invariance scale, so the bandwidth is held
//! at `pi / (T * min_center_ratio)`; the gain of those overlapping wavelets is
//! reduced so the filter density, and therefore the Littlewood-Paley sum,
//! stays flat. Wavelets inside the lowpass band are further attenuated by
//! `sqrt(1 - |phi|^2)` at their centre, and a final common scale puts the
//! maximum of `|phi|^2 + sum |psi|^2` at just under one.
//!
//! All filters are finite sampled kernels; the transform's FFT path uses
//! their exact DFTs, so direct and FFT convolution agree to rounding error.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex;

use super::ScatteringConfig;
use crate::error::{Error, Result};
use crate::Real;

/// One analytic Morlet wavelet.
#[derive(Debug, Clone)]
pub struct Wavelet<R> {
    /// Centre frequency, rad/s.
    pub center: f64,
    /// Gaussian bandwidth parameter, rad/s.
    pub sigma: f64,
    pub gain: f64,
    /// Kernel taps for offsets `-half..=half`.
    pub taps: Vec<Complex<R>>,
    pub half: usize,
}

impl<R: Real> Wavelet<R> {
    /// Continuous-frequency response (gain included).
    pub fn response(&self, omega: f64) -> f64 {
        self.gain * morlet_hat(omega, self.center, self.sigma)
    }

    /// Discrete-time Fourier transform of the taps at `omega` (rad/s).
    pub fn dtft(&self, omega: f64, sample_rate: f64) -> Complex<f64> {
        let taps: Vec<Complex<f64>> = self
            .taps
            .iter()
            .map(|c| Complex::new(c.re.to_f64_lossy(), c.im.to_f64_lossy()))
            .collect();
        dtft_centered(&taps, self.half, omega / sample_rate)
    }
}

#[derive(Debug, Clone)]
pub struct Filterbank<R> {
    sample_rate: f64,
    t: f64,
    q: usize,
    lowpass_sigma: f64,
    lowpass: Vec<R>,
    lowpass_half: usize,
    wavelets: Vec<Wavelet<R>>,
}

/// Morlet spectrum with the DC-correcting term: zero at `omega = 0`.
pub fn morlet_hat(omega: f64, center: f64, sigma: f64) -> f64 {
    let s2 = 2.0 * sigma * sigma;
    let kappa = (-center * center / s2).exp();
    (-(omega - center).powi(2) / s2).exp() - kappa * (-(omega * omega) / s2).exp()
}

fn gaussian_hat(omega: f64, sigma: f64) -> f64 {
    (-(omega * omega) / (2.0 * sigma * sigma)).exp()
}

/// DTFT at normalized angular frequency `w` (rad/sample) of taps indexed
/// `-half..=half`, evaluated by direct summation.
fn dtft_centered(taps: &[Complex<f64>], half: usize, w: f64) -> Complex<f64> {
    // phasor recurrence, re-anchored every block to bound drift
    const BLOCK: usize = 512;
    let mut acc = Complex::new(0.0, 0.0);
    let step = Complex::from_polar(1.0, -w);
    for (b, chunk) in taps.chunks(BLOCK).enumerate() {
        let n0 = (b * BLOCK) as f64 - half as f64;
        let mut ph = Complex::from_polar(1.0, -w * n0);
        for &h in chunk {
            acc += h * ph;
            ph *= step;
        }
    }
    acc
}

impl<R: Real> Filterbank<R> {
    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn wavelets(&self) -> &[Wavelet<R>] {
        &self.wavelets
    }

    pub fn len(&self) -> usize {
        self.wavelets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavelets.is_empty()
    }

    /// Wavelet centre frequencies in rad/s, highest first.
    pub fn centers(&self) -> Vec<f64> {
        self.wavelets.iter().map(|w| w.center).collect()
    }

    /// Lowpass taps for offsets `-half..=half`; they sum to one.
    pub fn lowpass(&self) -> &[R] {
        &self.lowpass
    }

    pub fn lowpass_half(&self) -> usize {
        self.lowpass_half
    }

    pub fn lowpass_sigma(&self) -> f64 {
        self.lowpass_sigma
    }

    /// Continuous lowpass response.
    pub fn lowpass_response(&self, omega: f64) -> f64 {
        gaussian_hat(omega, self.lowpass_sigma)
    }

    /// Frequency (rad/s) where the lowpass power falls to one half.
    pub fn lowpass_cutoff(&self) -> f64 {
        self.lowpass_sigma * LN_2.sqrt()
    }

    pub fn max_wavelet_half(&self) -> usize {
        self.wavelets.iter().map(|w| w.half).max().unwrap_or(0)
    }

    /// Littlewood-Paley sum from the continuous filter responses.
    pub fn littlewood_paley(&self, omega: f64) -> f64 {
        self.lowpass_response(omega).powi(2)
            + self
                .wavelets
                .iter()
                .map(|w| w.response(omega).powi(2))
                .sum::<f64>()
    }

    /// Littlewood-Paley sum of the sampled kernels, evaluated by direct
    /// DTFT summation at each frequency in `omegas` (rad/s). Filters whose
    /// passband lies more than `10 sigma` away contribute below 1e-40 and are
    /// skipped.
    pub fn littlewood_paley_discrete(&self, omegas: &[f64]) -> Vec<f64> {
        let lp: Vec<Complex<f64>> = self
            .lowpass
            .iter()
            .map(|&v| Complex::new(v.to_f64_lossy(), 0.0))
            .collect();
        let wavelet_taps: Vec<Vec<Complex<f64>>> = self
            .wavelets
            .iter()
            .map(|w| {
                w.taps
                    .iter()
                    .map(|c| Complex::new(c.re.to_f64_lossy(), c.im.to_f64_lossy()))
                    .collect()
            })
            .collect();
        omegas
            .iter()
            .map(|&om| {
                let w = om / self.sample_rate;
                let mut sum = 0.0;
                if om.abs() < 10.0 * self.lowpass_sigma {
                    sum += dtft_centered(&lp, self.lowpass_half, w).norm_sqr();
                }
                for (wav, taps) in self.wavelets.iter().zip(&wavelet_taps) {
                    if (om - wav.center).abs() < 10.0 * wav.sigma {
                        sum += dtft_centered(taps, wav.half, w).norm_sqr();
                    }
                }
                sum
            })
            .collect()
    }
}

/// Number of centres `omega_nyq * 2^(-j/Q)` needed to reach `pi/T`.
pub fn wavelet_count(t: f64, q: usize, sample_rate: f64) -> usize {
    let ratio = (PI * sample_rate) / (PI / t);
    ((q as f64 * ratio.log2()) - 1e-9).ceil().max(1.0) as usize
}

pub fn build_filterbank<R: Real>(
    cfg: &ScatteringConfig,
    sample_rate: f64,
) -> Result<Filterbank<R>> {
    cfg.validate()?;
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return Err(Error::invalid(format!("bad sample rate {sample_rate}")));
    }
    let t = cfg.t;
    let q = cfg.q;
    let omega_nyq = PI * sample_rate;
    let omega_min = PI / t;
    if omega_nyq < 2.0 * omega_min {
        return Err(Error::invalid(format!(
            "T = {t} s leaves less than one octave below Nyquist at {sample_rate} Hz"
        )));
    }

    let ratio = 2f64.powf(1.0 / q as f64);
    let count = wavelet_count(t, q, sample_rate);
    let half_power = 2.0 * LN_2.sqrt();
    let sigma_floor = omega_min / cfg.shape.min_center_ratio;
    let lowpass_sigma = (2.0 * PI / t) / LN_2.sqrt();

    // (center, sigma, gain before the common scale)
    let mut design: Vec<(f64, f64, f64)> = (0..count)
        .map(|j| {
            let center = omega_nyq * ratio.powi(-(j as i32));
            let sigma_cq = center * (1.0 - 1.0 / ratio) / half_power;
            let sigma = sigma_cq.max(sigma_floor);
            let density = (sigma_cq / sigma).sqrt();
            let complement = (1.0 - gaussian_hat(center, lowpass_sigma).powi(2))
                .max(0.0)
                .sqrt();
            (center, sigma, density * complement)
        })
        .collect();

    // common scale: largest s with |phi|^2 + s * sum |psi|^2 <= 1 on a dense grid
    let grid = design_grid(omega_nyq, sigma_floor.min(lowpass_sigma));
    let mut scale = f64::INFINITY;
    for &om in &grid {
        let w: f64 = design
            .iter()
            .filter(|(c, s, _)| (om - c).abs() < 12.0 * s)
            .map(|&(c, s, g)| (g * morlet_hat(om, c, s)).powi(2))
            .sum();
        if w > 1e-12 {
            let room = 1.0 - gaussian_hat(om, lowpass_sigma).powi(2);
            scale = scale.min(room / w);
        }
    }
    // headroom for kernel truncation ripple
    let scale = scale * (1.0 - 2e-3);
    for d in &mut design {
        d.2 *= scale.sqrt();
    }

    let fs = sample_rate;
    let support = cfg.shape.support_sigmas;
    let lowpass_half = ((support / lowpass_sigma) * fs).ceil() as usize;
    let mut lowpass: Vec<f64> = (-(lowpass_half as isize)..=lowpass_half as isize)
        .map(|n| {
            let tt = n as f64 / fs;
            (-(lowpass_sigma * tt).powi(2) / 2.0).exp()
        })
        .collect();
    let total: f64 = lowpass.iter().sum();
    lowpass.iter_mut().for_each(|v| *v /= total);

    let wavelets = design
        .into_iter()
        .map(|(center, sigma, gain)| {
            let half = ((support / sigma) * fs).ceil() as usize;
            let kappa = (-center * center / (2.0 * sigma * sigma)).exp();
            let amp = gain * sigma / ((2.0 * PI).sqrt() * fs);
            let taps = (-(half as isize)..=half as isize)
                .map(|n| {
                    let tt = n as f64 / fs;
                    let env = amp * (-(sigma * tt).powi(2) / 2.0).exp();
                    let (s, c) = (center * tt).sin_cos();
                    Complex::new(R::lit(env * (c - kappa)), R::lit(env * s))
                })
                .collect();
            Wavelet {
                center,
                sigma,
                gain,
                taps,
                half,
            }
        })
        .collect();

    Ok(Filterbank {
        sample_rate,
        t,
        q,
        lowpass_sigma,
        lowpass: lowpass.into_iter().map(R::lit).collect(),
        lowpass_half,
        wavelets,
    })
}

/// Frequencies from 0 to Nyquist: uniform at low frequency, then
/// logarithmic with 0.2% steps.
fn design_grid(omega_nyq: f64, finest_sigma: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut om = 0.0;
    while om < omega_nyq {
        out.push(om);
        om += (finest_sigma / 40.0).max(om * 0.002);
    }
    out.push(omega_nyq);
    out
}

/// Share of a wavelet's continuous spectral energy at negative frequencies.
pub fn negative_frequency_energy(center: f64, sigma: f64) -> f64 {
    let lo = center - 12.0 * sigma;
    let hi = center + 12.0 * sigma;
    let n = 20_000;
    let dw = (hi - lo) / n as f64;
    let (mut neg, mut total) = (0.0, 0.0);
    for i in 0..=n {
        let om = lo + i as f64 * dw;
        let e = morlet_hat(om, center, sigma).powi(2);
        total += e;
        if om < 0.0 {
            neg += e;
        }
    }
    neg / total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(t: f64, q: usize) -> ScatteringConfig {
        ScatteringConfig {
            t,
            q,
            ..ScatteringConfig::default()
        }
    }

    #[test]
    fn count_matches_explicit_grid_enumeration() {
        let fs = 44_100.0;
        let fb: Filterbank<f64> = build_filterbank(&cfg(0.093, 8), fs).unwrap();
        // enumerate the geometric grid by repeated division
        let (top, bottom) = (PI * fs, PI / 0.093);
        let mut n = 0;
        let mut w = top;
        while w >= bottom {
            n += 1;
            w /= 2f64.powf(1.0 / 8.0);
        }
        assert_eq!(fb.len(), n);
        assert_eq!(fb.len(), (8.0 * (top / bottom).log2()).ceil() as usize);
        for (a, b) in fb.centers().windows(2).map(|p| (p[0], p[1])) {
            assert!((a / b - 2f64.powf(1.0 / 8.0)).abs() < 1e-12);
        }
        assert!((fb.centers()[0] - top).abs() < 1e-9);
        assert!(*fb.centers().last().unwrap() >= bottom);
    }

    #[test]
    fn doubling_t_halves_lowpass_cutoff() {
        let a: Filterbank<f64> = build_filterbank(&cfg(0.1, 8), 8000.0).unwrap();
        let b: Filterbank<f64> = build_filterbank(&cfg(0.2, 8), 8000.0).unwrap();
        assert!((a.lowpass_cutoff() - 2.0 * PI / 0.1).abs() < 1e-9);
        assert!((a.lowpass_cutoff() / b.lowpass_cutoff() - 2.0).abs() < 1e-12);
        // the sampled kernel has half power at the same place
        let h = |fb: &Filterbank<f64>, om: f64| {
            let taps: Vec<Complex<f64>> =
                fb.lowpass().iter().map(|&v| Complex::new(v, 0.0)).collect();
            dtft_centered(&taps, fb.lowpass_half(), om / fb.sample_rate()).norm_sqr()
        };
        // up to kernel truncation ripple
        assert!((h(&a, a.lowpass_cutoff()) - 0.5).abs() < 1e-3);
        assert!((h(&b, b.lowpass_cutoff()) - 0.5).abs() < 1e-3);
    }

    #[test]
    fn lowpass_sums_to_one() {
        let fb: Filterbank<f64> = build_filterbank(&cfg(0.186, 2), 1000.0).unwrap();
        let s: f64 = fb.lowpass().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wavelets_are_analytic_and_unit_bounded() {
        for q in [1, 2, 8] {
            let fb: Filterbank<f64> = build_filterbank(&cfg(0.046, q), 8000.0).unwrap();
            for w in fb.wavelets() {
                assert!(negative_frequency_energy(w.center, w.sigma) <= 1e-3);
                assert!(w.response(w.center) <= 1.0);
                assert!(w.gain > 0.0);
            }
        }
    }

    #[test]
    fn continuous_littlewood_paley_is_tight() {
        for t in [0.046, 0.093, 0.186, 0.371] {
            let fb: Filterbank<f64> = build_filterbank(&cfg(t, 8), 8000.0).unwrap();
            let lo = PI / t;
            let hi = PI * 8000.0;
            let n = 4000;
            let (mut mn, mut mx) = (f64::INFINITY, 0.0f64);
            for i in 0..=n {
                let om = lo * (hi / lo).powf(i as f64 / n as f64);
                let v = fb.littlewood_paley(om);
                mn = mn.min(v);
                mx = mx.max(v);
            }
            assert!(mx <= 1.0 && mn >= 0.5, "T={t}: [{mn}, {mx}]");
        }
    }

    #[test]
    fn too_coarse_t_is_rejected() {
        assert!(build_filterbank::<f64>(&cfg(0.001, 8), 1000.0).is_err());
    }
}
