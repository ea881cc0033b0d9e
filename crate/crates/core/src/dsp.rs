//! Low-level signal helpers shared across modules.

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::Real;

/// Smallest `n >= min` whose prime factors are all in {2, 3, 5, 7}.
pub fn fast_len(min: usize) -> usize {
    let mut n = min.max(1);
    loop {
        let mut m = n;
        for p in [2, 3, 5, 7] {
            while m.is_multiple_of(p) {
                m /= p;
            }
        }
        if m == 1 {
            return n;
        }
        n += 1;
    }
}

/// Full linear convolution via FFT, `len = a.len() + b.len() - 1`.
pub fn fft_convolve<R: Real>(a: &[R], b: &[R]) -> Vec<R> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let n = fast_len(out_len);
    let mut planner = FftPlanner::<R>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);

    // pack both real inputs into one complex transform
    let mut buf = vec![Complex::new(R::zero(), R::zero()); n];
    for (i, &v) in a.iter().enumerate() {
        buf[i].re = v;
    }
    for (i, &v) in b.iter().enumerate() {
        buf[i].im = v;
    }
    fwd.process(&mut buf);
    let half = R::lit(0.5);
    let mut prod = vec![Complex::new(R::zero(), R::zero()); n];
    for k in 0..n {
        let z = buf[k];
        let zc = buf[(n - k) % n].conj();
        let fa = (z + zc) * half;
        let fb = (z - zc) * Complex::new(R::zero(), -half);
        prod[k] = fa * fb;
    }
    inv.process(&mut prod);
    let scale = R::one() / R::from_usize_lossy(n);
    prod.iter().take(out_len).map(|c| c.re * scale).collect()
}

/// Direct O(N·L) linear convolution.
pub fn direct_convolve<R: Real>(a: &[R], b: &[R]) -> Vec<R> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![R::zero(); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &h) in b.iter().enumerate() {
            out[i + j] += x * h;
        }
    }
    out
}

/// Zeroth-order modified Bessel function of the first kind (power series).
pub fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if term < sum * 1e-17 {
            return sum;
        }
        k += 1.0;
    }
}

/// Kaiser window evaluated at `u` in [-1, 1]; zero outside.
pub fn kaiser(u: f64, beta: f64) -> f64 {
    if u.abs() > 1.0 {
        return 0.0;
    }
    bessel_i0(beta * (1.0 - u * u).sqrt()) / bessel_i0(beta)
}

/// Normalized sinc, `sin(pi x) / (pi x)`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Fraction of signal energy at frequencies strictly above `cutoff_hz`,
/// measured on the full-length periodogram.
pub fn energy_fraction_above<R: Real>(x: &[R], sample_rate: f64, cutoff_hz: f64) -> f64 {
    let n = x.len();
    if n == 0 {
        return 0.0;
    }
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .map(|&v| Complex::new(v.to_f64_lossy(), 0.0))
        .collect();
    fft.process(&mut buf);
    let mut total = 0.0;
    let mut above = 0.0;
    for (k, c) in buf.iter().enumerate() {
        let kk = if k <= n / 2 { k } else { n - k };
        let f = kk as f64 * sample_rate / n as f64;
        let e = c.norm_sqr();
        total += e;
        if f > cutoff_hz {
            above += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        above / total
    }
}

/// Index in `[0, n)` of the whole-sample symmetric extension of a length-`n`
/// sequence evaluated at `i` (numpy `reflect` mode, repeated as needed).
pub fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut m = i.rem_euclid(period);
    if m >= n as isize {
        m = period - m;
    }
    m as usize
}
