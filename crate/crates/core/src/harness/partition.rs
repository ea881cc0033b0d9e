use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::seed::derive;
use crate::synthgait::Corpus;
use crate::Real;

/// Identity of one walk recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Recording {
    pub id: u32,
    pub walker: u32,
    pub day: u32,
}

impl Recording {
    pub fn from_corpus<R>(c: &Corpus<R>) -> Vec<Recording> {
        c.walks
            .iter()
            .map(|w| Recording {
                id: w.id,
                walker: w.walker,
                day: w.day,
            })
            .collect()
    }

    /// Distinct recordings behind the rows of a feature set.
    pub fn from_features<R: Real>(f: &FeatureSet<R>) -> Vec<Recording> {
        let mut out: Vec<Recording> = (0..f.len())
            .map(|i| Recording {
                id: f.recordings[i],
                walker: f.labels[i],
                day: f.days[i],
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionSpec {
    pub ubm_count: usize,
    pub enroll_count: usize,
    pub unknown_count: usize,
    pub repeats: usize,
    pub base_seed: u64,
}

impl Default for PartitionSpec {
    fn default() -> Self {
        PartitionSpec {
            ubm_count: 6,
            enroll_count: 3,
            unknown_count: 3,
            repeats: 10,
            base_seed: 0,
        }
    }
}

/// Walker roles for one repeat. Each list is sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub ubm: Vec<u32>,
    pub enroll: Vec<u32>,
    pub unknown: Vec<u32>,
    /// Recordings from this day are trials; all others are training data.
    pub test_day: u32,
}

/// The last recorded day.
pub fn test_day(recs: &[Recording]) -> Result<u32> {
    recs.iter()
        .map(|r| r.day)
        .max()
        .ok_or_else(|| Error::invalid("no recordings"))
}

const PARTITION_TAG: u64 = 0x5041;

/// Randomly assign walkers to UBM, enrolled and unknown roles.
pub fn partition(recs: &[Recording], spec: &PartitionSpec, repeat: usize) -> Result<Partition> {
    let day = test_day(recs)?;
    let mut by_walker: BTreeMap<u32, (bool, bool)> = BTreeMap::new();
    for r in recs {
        let e = by_walker.entry(r.walker).or_default();
        if r.day == day {
            e.1 = true;
        } else {
            e.0 = true;
        }
    }
    let need = spec.ubm_count + spec.enroll_count + spec.unknown_count;
    if spec.ubm_count == 0 || spec.enroll_count == 0 {
        return Err(Error::invalid(
            "need at least one UBM and one enrolled walker",
        ));
    }
    if by_walker.len() < need {
        return Err(Error::invalid(format!(
            "partition needs {need} walkers, corpus has {}",
            by_walker.len()
        )));
    }
    for (w, &(train, test)) in &by_walker {
        if !test {
            return Err(Error::invalid(format!(
                "walker {w} has no test-day (day {day}) recording"
            )));
        }
        if !train {
            return Err(Error::invalid(format!(
                "walker {w} has no training-day recording"
            )));
        }
    }
    let mut walkers: Vec<u32> = by_walker.keys().copied().collect();
    let mut rng =
        ChaCha8Rng::seed_from_u64(derive(spec.base_seed, &[PARTITION_TAG, repeat as u64]));
    walkers.shuffle(&mut rng);
    let take = |from: usize, n: usize| {
        let mut v = walkers[from..from + n].to_vec();
        v.sort_unstable();
        v
    };
    Ok(Partition {
        ubm: take(0, spec.ubm_count),
        enroll: take(spec.ubm_count, spec.enroll_count),
        unknown: take(spec.ubm_count + spec.enroll_count, spec.unknown_count),
        test_day: day,
    })
}

/// Permute walker labels among the recordings of each day, keeping every
/// recording's segments together. Per-day label counts are unchanged.
pub fn shuffle_labels<R: Real>(f: &FeatureSet<R>, seed: u64) -> FeatureSet<R> {
    let recs = Recording::from_features(f);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut relabel: BTreeMap<u32, u32> = BTreeMap::new();
    let mut days: Vec<u32> = recs.iter().map(|r| r.day).collect();
    days.sort_unstable();
    days.dedup();
    for d in days {
        let ids: Vec<u32> = recs.iter().filter(|r| r.day == d).map(|r| r.id).collect();
        let mut labels: Vec<u32> = recs
            .iter()
            .filter(|r| r.day == d)
            .map(|r| r.walker)
            .collect();
        labels.shuffle(&mut rng);
        relabel.extend(ids.into_iter().zip(labels));
    }
    let mut out = f.clone();
    for (l, r) in out.labels.iter_mut().zip(&f.recordings) {
        *l = relabel[r];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn recs(walkers: u32, walks: u32) -> Vec<Recording> {
        (0..walkers)
            .flat_map(|w| {
                (0..walks).map(move |k| Recording {
                    id: w * walks + k,
                    walker: w,
                    day: k * 3 / walks,
                })
            })
            .collect()
    }

    #[test]
    fn twelve_walkers_split_six_three_three() {
        let p = partition(&recs(12, 10), &PartitionSpec::default(), 0).unwrap();
        assert_eq!((p.ubm.len(), p.enroll.len(), p.unknown.len()), (6, 3, 3));
        let mut all: Vec<u32> = p
            .ubm
            .iter()
            .chain(&p.enroll)
            .chain(&p.unknown)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..12).collect::<Vec<_>>());
        assert_eq!(p.test_day, 2);
    }

    #[test]
    fn deterministic_per_repeat() {
        let r = recs(12, 10);
        let spec = PartitionSpec::default();
        assert_eq!(
            partition(&r, &spec, 4).unwrap(),
            partition(&r, &spec, 4).unwrap()
        );
        let other = PartitionSpec {
            base_seed: 1,
            ..spec
        };
        assert_ne!(
            partition(&r, &spec, 4).unwrap(),
            partition(&r, &other, 4).unwrap()
        );
    }

    #[test]
    fn too_few_walkers_or_missing_test_day() {
        assert!(partition(&recs(11, 10), &PartitionSpec::default(), 0).is_err());
        let mut r = recs(12, 10);
        r.retain(|x| !(x.walker == 5 && x.day == 2));
        assert!(partition(&r, &PartitionSpec::default(), 0).is_err());
    }

    #[test]
    fn shuffle_keeps_day_counts() {
        let r = recs(4, 6);
        let n = r.len();
        let f = FeatureSet {
            data: ndarray::Array2::<f64>::zeros((n * 2, 1)),
            labels: r.iter().flat_map(|x| [x.walker, x.walker]).collect(),
            recordings: r.iter().flat_map(|x| [x.id, x.id]).collect(),
            days: r.iter().flat_map(|x| [x.day, x.day]).collect(),
        };
        let s = shuffle_labels(&f, 3);
        assert_ne!(s.labels, f.labels);
        for d in 0..3 {
            let count = |fs: &FeatureSet<f64>, w: u32| {
                (0..fs.len())
                    .filter(|&i| fs.days[i] == d && fs.labels[i] == w)
                    .count()
            };
            for w in 0..4 {
                assert_eq!(count(&s, w), count(&f, w));
            }
        }
        for pair in s.labels.chunks(2) {
            assert_eq!(pair[0], pair[1]);
        }
    }
}
