use gaitscat::features::standardizer_to_bytes;
use gaitscat::harness::{
    extract_descriptors, partition, run_experiment, sweep, train_models, BoxStats, ExtractConfig,
    FeatureType, ModelConfig, PartitionSpec, Recording, SweepSpec,
};
use gaitscat::openset::gmm_to_bytes;
use gaitscat::synthgait::{
    generate_dataset, random_walkers, synthesize_pulse, Corpus, Resonance, SynthGaitParams,
    WalkerSignature,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_spec() -> PartitionSpec {
    PartitionSpec {
        ubm_count: 2,
        enroll_count: 2,
        unknown_count: 2,
        repeats: 5,
        base_seed: 3,
    }
}

fn small_model() -> ModelConfig {
    ModelConfig {
        components: 4,
        ..ModelConfig::default()
    }
}

fn small_corpus(walkers: &[WalkerSignature], session_variation: f64) -> Corpus<f64> {
    let p = SynthGaitParams {
        duration: 2.5,
        session_variation,
        ..SynthGaitParams::default()
    };
    generate_dataset(walkers, &p, 6, 11).unwrap()
}

/// Walkers whose thump and ring frequencies are far apart from each other.
fn distinct_walkers() -> Vec<WalkerSignature> {
    let thumps = [20.0, 28.0, 38.0, 50.0, 64.0, 80.0];
    let rings = [450.0, 700.0, 1100.0, 1600.0, 2300.0, 3200.0];
    thumps
        .iter()
        .zip(&rings)
        .enumerate()
        .map(|(i, (&thump, &ring))| {
            let res = [
                Resonance {
                    freq: thump,
                    decay: 0.03,
                    gain: 1.0,
                    onset: 0.0,
                },
                Resonance {
                    freq: ring,
                    decay: 0.008,
                    gain: 0.6,
                    onset: 0.005,
                },
            ];
            WalkerSignature {
                gait_period: 1.0 + 0.08 * i as f64,
                footstep_pulse: synthesize_pulse(&res, 0.0, 8000.0, 0.25).unwrap(),
                pulse_rate: 8000.0,
                period_jitter: 0.02,
                amplitude_jitter: 0.1,
                spectral_tilt: 0.0,
                second_foot: None,
            }
        })
        .collect()
}

#[test]
fn repeats_draw_different_partitions() {
    let recs: Vec<Recording> = (0..120)
        .map(|i| Recording {
            id: i,
            walker: i / 10,
            day: (i % 10) * 3 / 10,
        })
        .collect();
    let spec = PartitionSpec::default();
    let first = partition(&recs, &spec, 0).unwrap();
    let parts: Vec<_> = (1..=100)
        .map(|r| partition(&recs, &spec, r).unwrap())
        .collect();
    let differ = parts.iter().filter(|p| **p != first).count();
    assert!(differ >= 95, "{differ} of 100");
    for w in 0..12 {
        assert!(
            parts.iter().any(|p| p.ubm.contains(&w)),
            "walker {w} never in the UBM set"
        );
    }
}

#[test]
fn test_day_data_never_reaches_training() {
    let corpus = small_corpus(&random_walkers(6, 8000.0, 2).unwrap(), 0.6);
    let cfg = ExtractConfig::default();
    let desc = extract_descriptors(&corpus, 0.186, &[FeatureType::Audio], &cfg)
        .unwrap()
        .pop()
        .unwrap();
    let part = partition(&Recording::from_features(&desc), &small_spec(), 0).unwrap();
    let model = small_model();
    let clean = train_models(&desc, 20, &part, &model, 5).unwrap();

    let mut poisoned = desc.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut touched = 0;
    for (i, mut row) in poisoned.data.rows_mut().into_iter().enumerate() {
        if desc.days[i] == part.test_day {
            row.mapv_inplace(|_| rng.random_range(-1e3..1e3));
            touched += 1;
        }
    }
    assert!(touched > 0);
    let dirty = train_models(&poisoned, 20, &part, &model, 5).unwrap();

    assert_eq!(
        standardizer_to_bytes(&clean.post.standardizer),
        standardizer_to_bytes(&dirty.post.standardizer)
    );
    assert_eq!(gmm_to_bytes(&clean.ubm), gmm_to_bytes(&dirty.ubm));
    assert_eq!(clean.enrolled.len(), dirty.enrolled.len());
    for ((wa, a), (wb, b)) in clean.enrolled.iter().zip(&dirty.enrolled) {
        assert_eq!(wa, wb);
        assert_eq!(gmm_to_bytes(a), gmm_to_bytes(b));
    }
    let test_ids: Vec<u32> = corpus
        .walks
        .iter()
        .filter(|w| w.day == part.test_day)
        .map(|w| w.id)
        .collect();
    assert!(clean
        .training_recordings
        .iter()
        .all(|r| !test_ids.contains(r)));
    assert!(part.unknown.iter().all(|w| corpus
        .walks
        .iter()
        .filter(|x| x.walker == *w)
        .all(|x| !clean.training_recordings.contains(&x.id))));
}

#[test]
fn distinct_walkers_are_easy_with_fused_features() {
    let corpus = small_corpus(&distinct_walkers(), 0.0);
    let desc = extract_descriptors(
        &corpus,
        0.093,
        &[FeatureType::Fused],
        &ExtractConfig::default(),
    )
    .unwrap()
    .pop()
    .unwrap();
    let recs = Recording::from_features(&desc);
    let eers: Vec<f64> = (0..5)
        .map(|r| {
            let part = partition(&recs, &small_spec(), r).unwrap();
            run_experiment(&desc, 30, &part, &small_model(), r as u64)
                .unwrap()
                .eer
        })
        .collect();
    let median = BoxStats::of(&eers).unwrap().median;
    assert!(median <= 0.05, "median {median}, eers {eers:?}");
}

#[test]
fn sweep_cells_hold_every_repeat_in_range() {
    let corpus = small_corpus(&distinct_walkers(), 0.3);
    let spec = SweepSpec {
        t_values: vec![0.093],
        n_values: vec![10, 30, 100_000],
        features: vec![FeatureType::Audio, FeatureType::Fused],
    };
    let part = PartitionSpec {
        repeats: 4,
        ..small_spec()
    };
    let table = sweep(
        &corpus,
        &spec,
        &part,
        &ExtractConfig::default(),
        &small_model(),
    )
    .unwrap();
    assert_eq!(table.cells.len(), 6);
    for c in &table.cells {
        assert_eq!(c.outcomes.len(), 4);
        if c.key.n == 100_000 {
            // a failing cell is recorded and the sweep carries on
            assert!(c.outcomes.iter().all(|o| o.is_err()));
            assert!(c.median().is_none());
            continue;
        }
        for e in c.eers() {
            assert!((0.0..=1.0).contains(&e));
        }
        let m = c.median().unwrap();
        assert!((0.0..=0.5).contains(&m), "{:?} median {m}", c.key);
    }
    assert!(table
        .results_csv()
        .lines()
        .skip(1)
        .all(|l| l.split(',').count() >= 7));
}

proptest! {
    #[test]
    fn box_stats_ignore_repeat_order(mut v in prop::collection::vec(0.0f64..1.0, 1..40), seed in any::<u64>()) {
        let a = BoxStats::of(&v).unwrap();
        v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let b = BoxStats::of(&v).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(a.min <= a.q1 && a.q1 <= a.median && a.median <= a.q3 && a.q3 <= a.max);
    }
}
