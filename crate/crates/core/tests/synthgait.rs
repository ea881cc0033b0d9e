use gaitscat::dsp::energy_fraction_above;
use gaitscat::signal_io::{resample, Modality, Signal};
use gaitscat::synthgait::{
    generate_dataset, random_walkers, render_modality, synthesize_pulse, Resonance,
    SynthGaitParams, WalkerSignature,
};
use proptest::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

fn small_params() -> SynthGaitParams {
    SynthGaitParams {
        duration: 3.0,
        ..SynthGaitParams::default()
    }
}

#[test]
fn band_energy_of_default_renders() {
    let walkers = random_walkers(12, 8000.0, 3).unwrap();
    let c = generate_dataset::<f64>(&walkers, &small_params(), 2, 5).unwrap();
    for w in &c.walks {
        let high = energy_fraction_above(w.audio.samples(), 8000.0, 500.0);
        let leak = energy_fraction_above(w.geophone.samples(), 1000.0, 120.0);
        assert!(high >= 0.3, "walk {} audio above 500 Hz {high}", w.id);
        assert!(leak <= 0.01, "walk {} geophone above 120 Hz {leak}", w.id);
    }
}

/// Short-time energy smoothed over about 20 ms.
fn envelope(x: &[f64], block: usize) -> Vec<f64> {
    let e: Vec<f64> = x
        .chunks(block)
        .map(|c| c.iter().map(|v| v * v).sum::<f64>())
        .collect();
    (0..e.len())
        .map(|i| e[i.saturating_sub(10)..(i + 10).min(e.len())].iter().sum())
        .collect()
}

#[test]
fn modality_envelopes_align_without_drift() {
    let params = SynthGaitParams {
        drift_rate: 0.0,
        ..small_params()
    };
    let walkers = random_walkers(4, 8000.0, 8).unwrap();
    let c = generate_dataset::<f64>(&walkers, &params, 2, 2).unwrap();
    for w in &c.walks {
        // 1 ms blocks at both rates
        let a = envelope(w.audio.samples(), 8);
        let g = envelope(w.geophone.samples(), 1);
        let n = a.len().min(g.len()) as i64;
        let score = |lag: i64| -> f64 {
            (0..n)
                .filter(|i| (0..n).contains(&(i + lag)))
                .map(|i| a[i as usize] * g[(i + lag) as usize])
                .sum()
        };
        let best = (-50..=50)
            .max_by(|&x, &y| score(x).total_cmp(&score(y)))
            .unwrap();
        assert!(best.abs() <= 10, "walk {} envelope lag {best} ms", w.id);
    }
}

fn tone_walker(freq: f64, period: f64) -> WalkerSignature {
    let res = Resonance {
        freq,
        decay: 0.03,
        gain: 1.0,
        onset: 0.0,
    };
    WalkerSignature {
        gait_period: period,
        footstep_pulse: synthesize_pulse(&[res], 0.0, 8000.0, 0.25).unwrap(),
        pulse_rate: 8000.0,
        period_jitter: 0.02,
        amplitude_jitter: 0.1,
        spectral_tilt: 0.0,
        second_foot: None,
    }
}

fn band_profile(x: &[f64], rate: f64, edges: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mut bands = vec![0.0; edges.len() - 1];
    for (k, c) in buf.iter().enumerate().take(n / 2 + 1) {
        let f = k as f64 * rate / n as f64;
        if let Some(b) = edges.windows(2).position(|e| f >= e[0] && f < e[1]) {
            bands[b] += c.norm_sqr();
        }
    }
    let total: f64 = bands.iter().sum();
    bands.iter().map(|v| v / total).collect()
}

#[test]
fn disjoint_spectra_separate_by_nearest_centroid() {
    let freqs = [300.0, 700.0, 1300.0, 2300.0];
    let walkers: Vec<WalkerSignature> = freqs.iter().map(|&f| tone_walker(f, 1.2)).collect();
    let c = generate_dataset::<f64>(&walkers, &small_params(), 8, 4).unwrap();
    let edges: Vec<f64> = (0..=40).map(|i| i as f64 * 100.0).collect();
    let profiles: Vec<(u32, usize, Vec<f64>)> = c
        .walks
        .iter()
        .map(|w| {
            (
                w.walker,
                (w.id % 8) as usize,
                band_profile(w.audio.samples(), 8000.0, &edges),
            )
        })
        .collect();
    let centroid = |walker: u32| -> Vec<f64> {
        let train: Vec<&Vec<f64>> = profiles
            .iter()
            .filter(|p| p.0 == walker && p.1 < 4)
            .map(|p| &p.2)
            .collect();
        (0..edges.len() - 1)
            .map(|b| train.iter().map(|p| p[b]).sum::<f64>() / train.len() as f64)
            .collect()
    };
    let centroids: Vec<Vec<f64>> = (0..walkers.len() as u32).map(centroid).collect();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    let test: Vec<_> = profiles.iter().filter(|p| p.1 >= 4).collect();
    let correct = test
        .iter()
        .filter(|p| {
            let guess = (0..centroids.len())
                .min_by(|&i, &j| dist(&p.2, &centroids[i]).total_cmp(&dist(&p.2, &centroids[j])));
            guess == Some(p.0 as usize)
        })
        .count();
    assert!(
        correct as f64 >= 0.95 * test.len() as f64,
        "{correct} of {}",
        test.len()
    );
}

#[test]
fn corpus_is_seeded_and_sized() {
    let walkers = random_walkers(12, 8000.0, 0).unwrap();
    let p = SynthGaitParams {
        duration: 1.5,
        ..SynthGaitParams::default()
    };
    let a = generate_dataset::<f32>(&walkers, &p, 10, 9).unwrap();
    let b = generate_dataset::<f32>(&walkers, &p, 10, 9).unwrap();
    assert_eq!(a.len(), 120);
    assert_eq!(a.walkers().len(), 12);
    assert_eq!(a, b);
    let other = generate_dataset::<f32>(&walkers, &p, 10, 10).unwrap();
    assert_ne!(a.walks[0].audio, other.walks[0].audio);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn render_is_shift_invariant_without_drift(
        v in prop::collection::vec(-1.0f64..1.0, 20..200),
        h in prop::collection::vec(-1.0f64..1.0, 1..30),
        k in 0usize..50,
    ) {
        prop_assume!(h.iter().any(|&x| x != 0.0));
        let sig = |x: Vec<f64>| Signal::new(x, 1000.0, Modality::Geophone).unwrap();
        let mut shifted = vec![0.0; k];
        shifted.extend(&v);
        let y = render_modality(&sig(v.clone()), &h, 0.0, 0.0, 1).unwrap();
        let ys = render_modality(&sig(shifted), &h, 0.0, 0.0, 1).unwrap();
        let scale = y.samples().iter().fold(1e-12f64, |m, x| m.max(x.abs()));
        prop_assert!(ys.samples()[..k].iter().all(|&x| x.abs() <= 1e-12 * scale));
        for (a, b) in ys.samples()[k..].iter().zip(y.samples()) {
            prop_assert!((a - b).abs() <= 1e-10 * scale, "{a} vs {b}");
        }
    }

    #[test]
    fn render_is_linear_without_drift(
        x in prop::collection::vec(-1.0f64..1.0, 64),
        y in prop::collection::vec(-1.0f64..1.0, 64),
        a in -3.0f64..3.0,
    ) {
        let h = [0.5, -0.25, 0.125, 0.3];
        let sig = |v: Vec<f64>| Signal::new(v, 1000.0, Modality::Audio).unwrap();
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + q).collect();
        let rx = render_modality(&sig(x), &h, 0.0, 0.0, 0).unwrap();
        let ry = render_modality(&sig(y), &h, 0.0, 0.0, 0).unwrap();
        let rm = render_modality(&sig(mix), &h, 0.0, 0.0, 0).unwrap();
        for i in 0..64 {
            let want = a * rx.samples()[i] + ry.samples()[i];
            prop_assert!((rm.samples()[i] - want).abs() <= 1e-10 * (1.0 + want.abs()));
        }
    }
}

#[test]
fn geophone_is_rendered_from_the_same_velocity() {
    // with no noise and unit channels both outputs are the same velocity at two rates
    let walkers = random_walkers(2, 8000.0, 1).unwrap();
    let p = SynthGaitParams {
        h_aud: vec![1.0],
        h_geo: vec![1.0],
        drift_rate: 0.0,
        noise_aud: 0.0,
        noise_geo: 0.0,
        ..small_params()
    };
    let c = generate_dataset::<f64>(&walkers, &p, 1, 0).unwrap();
    for w in &c.walks {
        let down = resample(&w.audio, 1000.0).unwrap();
        assert_eq!(down.len(), w.geophone.len());
        for (a, b) in down.samples().iter().zip(w.geophone.samples()) {
            assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        }
    }
}
