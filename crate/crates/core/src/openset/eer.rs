use crate::error::{Error, Result};

/// One scored (trial, claimed identity) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trial {
    pub trial: u32,
    pub claimed: u32,
    pub truth: u32,
    pub score: f64,
}

impl Trial {
    pub fn is_genuine(&self) -> bool {
        self.claimed == self.truth
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreSet {
    pub trials: Vec<Trial>,
}

impl ScoreSet {
    pub fn push(&mut self, t: Trial) {
        self.trials.push(t);
    }

    pub fn genuine(&self) -> Vec<f64> {
        self.trials
            .iter()
            .filter(|t| t.is_genuine())
            .map(|t| t.score)
            .collect()
    }

    pub fn impostor(&self) -> Vec<f64> {
        self.trials
            .iter()
            .filter(|t| !t.is_genuine())
            .map(|t| t.score)
            .collect()
    }
}

pub fn compute_eer(scores: &ScoreSet) -> Result<f64> {
    eer_from_scores(&scores.genuine(), &scores.impostor())
}

/// Equal error rate with acceptance `score >= t`.
///
/// Thresholds are every distinct score plus one above all of them. FAR
/// falls and FRR rises with the threshold; the first threshold where they
/// tie gives the EER directly, otherwise the two curves are linearly
/// interpolated between the last threshold with FAR > FRR and the next.
pub fn eer_from_scores(genuine: &[f64], impostor: &[f64]) -> Result<f64> {
    if genuine.is_empty() || impostor.is_empty() {
        return Err(Error::invalid("EER needs both genuine and impostor scores"));
    }
    if genuine.iter().chain(impostor).any(|s| s.is_nan()) {
        return Err(Error::invalid("NaN score"));
    }
    let mut g = genuine.to_vec();
    let mut im = impostor.to_vec();
    g.sort_by(f64::total_cmp);
    im.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = g.iter().chain(&im).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    thresholds.push(f64::INFINITY);

    let (ng, ni) = (g.len() as f64, im.len() as f64);
    let (mut gi, mut ii) = (0usize, 0usize);
    let mut prev: Option<(f64, f64)> = None;
    for &t in &thresholds {
        // genuine below t, impostors below t
        while gi < g.len() && g[gi] < t {
            gi += 1;
        }
        while ii < im.len() && im[ii] < t {
            ii += 1;
        }
        let far = (im.len() - ii) as f64 / ni;
        let frr = gi as f64 / ng;
        let d = far - frr;
        if d == 0.0 {
            return Ok(far);
        }
        if d < 0.0 {
            let (pfar, pd) = prev.expect("FAR >= FRR at the lowest threshold");
            let f = pd / (pd - d);
            return Ok(pfar + f * (far - pfar));
        }
        prev = Some((far, d));
    }
    unreachable!("FRR reaches 1 at the sentinel threshold")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        let e = eer_from_scores(&[0.9, 0.8, 0.7, 0.3], &[0.6, 0.2, 0.1, 0.05]).unwrap();
        assert_eq!(e, 0.25);
    }

    #[test]
    fn perfect_separation_is_zero() {
        assert_eq!(eer_from_scores(&[3.0, 4.0], &[1.0, 2.0, 2.5]).unwrap(), 0.0);
    }

    #[test]
    fn identical_lists_are_chance() {
        let s = [0.1, 0.4, 0.2, 0.9, 0.5];
        assert!((eer_from_scores(&s, &s).unwrap() - 0.5).abs() < 1e-12);
        let s = [1.0, 2.0, 3.0, 4.0];
        assert!((eer_from_scores(&s, &s).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn reversed_separation_is_one() {
        assert_eq!(eer_from_scores(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 1.0);
    }

    #[test]
    fn empty_and_nan_rejected() {
        assert!(eer_from_scores(&[], &[1.0]).is_err());
        assert!(eer_from_scores(&[1.0], &[]).is_err());
        assert!(eer_from_scores(&[f64::NAN], &[1.0]).is_err());
    }

    #[test]
    fn scoreset_splits_by_claim() {
        let mut s = ScoreSet::default();
        for (trial, claimed, truth, score) in [
            (0, 1, 1, 0.9),
            (0, 2, 1, 0.1),
            (1, 2, 2, 0.8),
            (1, 1, 2, 0.3),
        ] {
            s.push(Trial {
                trial,
                claimed,
                truth,
                score,
            });
        }
        assert_eq!(s.genuine(), vec![0.9, 0.8]);
        assert_eq!(s.impostor(), vec![0.1, 0.3]);
        assert_eq!(compute_eer(&s).unwrap(), 0.0);
    }
}
