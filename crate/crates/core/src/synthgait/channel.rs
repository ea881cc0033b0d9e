//! Default propagation channels, realized as truncated impulse responses of
//! biquad cascades.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    /// Cookbook second-order section; `high` selects highpass.
    fn new(cutoff_hz: f64, q: f64, rate: f64, high: bool) -> Self {
        let w0 = 2.0 * PI * cutoff_hz / rate;
        let (s, c) = w0.sin_cos();
        let alpha = s / (2.0 * q);
        let a0 = 1.0 + alpha;
        let b = if high {
            [(1.0 + c) / 2.0, -(1.0 + c), (1.0 + c) / 2.0]
        } else {
            [(1.0 - c) / 2.0, 1.0 - c, (1.0 - c) / 2.0]
        };
        Biquad {
            b: [b[0] / a0, b[1] / a0, b[2] / a0],
            a: [-2.0 * c / a0, (1.0 - alpha) / a0],
        }
    }

    fn run(&self, x: &[f64]) -> Vec<f64> {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        x.iter()
            .map(|&x0| {
                let y0 = self.b[0] * x0 + self.b[1] * x1 + self.b[2] * x2
                    - self.a[0] * y1
                    - self.a[1] * y2;
                (x2, x1, y2, y1) = (x1, x0, y1, y0);
                y0
            })
            .collect()
    }
}

/// Even-order Butterworth as cascaded biquads.
fn butterworth(order: usize, cutoff_hz: f64, rate: f64, high: bool) -> Result<Vec<Biquad>> {
    if order == 0 || !order.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "Butterworth order must be even, got {order}"
        )));
    }
    if !(cutoff_hz > 0.0 && cutoff_hz < rate / 2.0) {
        return Err(Error::invalid(format!(
            "cutoff {cutoff_hz} Hz outside (0, {}) Hz",
            rate / 2.0
        )));
    }
    Ok((1..=order / 2)
        .map(|k| {
            let theta = PI * (2 * k - 1) as f64 / (2 * order) as f64;
            Biquad::new(cutoff_hz, 1.0 / (2.0 * theta.cos()), rate, high)
        })
        .collect())
}

fn impulse_response(sections: &[Biquad], len: usize) -> Vec<f64> {
    let mut h = vec![0.0; len];
    h[0] = 1.0;
    for s in sections {
        h = s.run(&h);
    }
    h
}

/// Microphone path: highpass (poor low-frequency pickup) followed by a
/// few discrete air reflections `(delay seconds, gain)`.
pub fn audio_channel(rate: f64, highpass_hz: f64, reflections: &[(f64, f64)]) -> Result<Vec<f64>> {
    let hp = butterworth(2, highpass_hz, rate, true)?;
    let longest = reflections.iter().map(|r| r.0).fold(0.0, f64::max);
    let len = ((longest + 0.02) * rate).ceil() as usize;
    let base = impulse_response(&hp, len);
    let mut h = base.clone();
    for &(delay, gain) in reflections {
        let shift = (delay * rate).round() as usize;
        for (i, &v) in base.iter().enumerate() {
            if i + shift < len {
                h[i + shift] += gain * v;
            }
        }
    }
    Ok(h)
}

/// Floor path: Butterworth lowpass with sensitivity gain.
pub fn geophone_channel(
    rate: f64,
    lowpass_hz: f64,
    order: usize,
    sensitivity: f64,
) -> Result<Vec<f64>> {
    let lp = butterworth(order, lowpass_hz, rate, false)?;
    // long enough for the slowest pole to decay below 1e-8
    let len = ((20.0 * order as f64 / (2.0 * PI * lowpass_hz)) * rate).ceil() as usize;
    Ok(impulse_response(&lp, len.max(8))
        .into_iter()
        .map(|v| v * sensitivity)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;

    fn gain_at(h: &[f64], hz: f64, rate: f64) -> f64 {
        let w = 2.0 * PI * hz / rate;
        h.iter()
            .enumerate()
            .map(|(n, &v)| Complex::from_polar(v, -w * n as f64))
            .sum::<Complex<f64>>()
            .norm()
    }

    #[test]
    fn butterworth_is_3db_at_cutoff() {
        let h = geophone_channel(1000.0, 90.0, 6, 1.0).unwrap();
        assert!((gain_at(&h, 0.0, 1000.0) - 1.0).abs() < 1e-6);
        assert!((gain_at(&h, 90.0, 1000.0) - 0.5f64.sqrt()).abs() < 0.02);
        assert!(gain_at(&h, 250.0, 1000.0) < 1e-3);
    }

    #[test]
    fn audio_channel_blocks_dc() {
        let h = audio_channel(8000.0, 150.0, &[(0.003, 0.4)]).unwrap();
        assert!(gain_at(&h, 0.0, 8000.0) < 1e-6);
        assert!(gain_at(&h, 2000.0, 8000.0) > 0.5);
    }

    #[test]
    fn bad_designs_error() {
        assert!(geophone_channel(1000.0, 600.0, 6, 1.0).is_err());
        assert!(geophone_channel(1000.0, 90.0, 3, 1.0).is_err());
    }
}
