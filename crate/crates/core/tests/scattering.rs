mod common;

use gaitscat::scattering::{
    build_filterbank, normalize_scattering, read_scattering_csv, scattering_from_bytes,
    scattering_to_bytes, wavelet_count, write_scattering_csv, Epsilon, Filterbank, ScatterPlan,
    ScatteringConfig,
};
use gaitscat::signal_io::Modality;
use proptest::prelude::*;

use common::{naive_order1, rel_frobenius, uniform};

fn plan(t: f64, q: usize, rate: f64, len: usize) -> ScatterPlan<f64> {
    ScatterPlan::new(&ScatteringConfig::new(t, q), rate, len, Modality::Audio).unwrap()
}

#[test]
fn tone_at_a_centre_peaks_in_its_row_and_matches_the_oracle() {
    let p = plan(0.05, 4, 2000.0, 2000);
    let fb = p.filterbank();
    for k in [2, 5, 9] {
        let omega = fb.wavelets()[k].center;
        let x: Vec<f64> = (0..2000)
            .map(|i| (omega * i as f64 / 2000.0).cos())
            .collect();
        let s = p.transform(&x).unwrap();
        let energy: Vec<f64> = s
            .order1
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|v| v * v).sum())
            .collect();
        let peak = (0..energy.len())
            .max_by(|&a, &b| energy[a].total_cmp(&energy[b]))
            .unwrap();
        assert_eq!(peak, k);
        assert!(rel_frobenius(&s.order1, &naive_order1(&p, &x)) <= 1e-6);
    }
}

#[test]
fn wavelet_count_matches_grid_enumeration_at_44k() {
    let fb: Filterbank<f64> = build_filterbank(&ScatteringConfig::new(0.093, 8), 44_100.0).unwrap();
    let (top, bottom) = (
        std::f64::consts::PI * 44_100.0,
        std::f64::consts::PI / 0.093,
    );
    let mut n = 0;
    while top * 2f64.powf(-(n as f64) / 8.0) > bottom {
        n += 1;
    }
    assert_eq!(fb.len(), n);
    assert_eq!(wavelet_count(0.093, 8, 44_100.0), n);
}

#[test]
fn zero_and_constant_inputs() {
    let p = plan(0.1, 4, 1000.0, 1500);
    let z = p.transform(&vec![0.0; 1500]).unwrap();
    assert!(z.order1.iter().chain(&z.order0).all(|&v| v == 0.0));
    let c = p.transform(&vec![0.7; 1500]).unwrap();
    let e0: f64 = c.order0.iter().map(|v| v * v).sum();
    let e1: f64 = c.order1.iter().map(|v| v * v).sum();
    assert!(e1 <= 1e-4 * e0, "{e1} vs {e0}");
}

#[test]
fn single_precision_tracks_double() {
    let x = uniform(3000, 5);
    let cfg = ScatteringConfig::new(0.05, 4);
    let p64 = ScatterPlan::<f64>::new(&cfg, 2000.0, 3000, Modality::Audio).unwrap();
    let p32 = ScatterPlan::<f32>::new(&cfg, 2000.0, 3000, Modality::Audio).unwrap();
    let a = p64.transform(&x).unwrap().order1;
    let xs: Vec<f32> = x.iter().map(|&v| v as f32).collect();
    let b = p32.transform(&xs).unwrap().order1.mapv(|v| v as f64);
    assert!(rel_frobenius(&b, &a) < 1e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exact_scale_invariance_without_epsilon(seed in any::<u64>(), c in 1e-3f64..1e3) {
        let cfg = ScatteringConfig { epsilon: Epsilon::Absolute(0.0), ..ScatteringConfig::new(0.05, 4) };
        let p = ScatterPlan::<f64>::new(&cfg, 1000.0, 800, Modality::Geophone).unwrap();
        let x = uniform(800, seed);
        let y: Vec<f64> = x.iter().map(|v| c * v).collect();
        let a = normalize_scattering(&p.transform(&x).unwrap(), &x, &cfg).unwrap().order1;
        let b = normalize_scattering(&p.transform(&y).unwrap(), &y, &cfg).unwrap().order1;
        prop_assert!(rel_frobenius(&b, &a) <= 1e-9);
    }

    #[test]
    fn coefficients_are_nonnegative_and_shaped(seed in any::<u64>(), len in 600usize..1500) {
        let p = plan(0.05, 2, 1000.0, len);
        let s = p.transform(&uniform(len, seed)).unwrap();
        prop_assert!(s.order1.iter().all(|&v| v >= 0.0));
        prop_assert_eq!(s.order1.ncols(), s.order0.len());
        prop_assert_eq!(s.frames(), p.frames());
    }

    #[test]
    fn binary_and_csv_round_trips(seed in any::<u64>()) {
        let cfg = ScatteringConfig::new(0.05, 2);
        let p = ScatterPlan::<f64>::new(&cfg, 1000.0, 700, Modality::Geophone).unwrap();
        let x = uniform(700, seed);
        let s = normalize_scattering(&p.transform(&x).unwrap(), &x, &cfg).unwrap();
        prop_assert_eq!(&scattering_from_bytes::<f64>(&scattering_to_bytes(&s)).unwrap(), &s);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_scattering_csv(&path, &s).unwrap();
        let back = read_scattering_csv::<f64>(&path).unwrap();
        prop_assert_eq!(back.order1, s.order1);
    }
}
