//! GMM-UBM open-set verification: diagonal Gaussian mixtures trained by EM,
//! MAP mean adaptation for enrolled walkers, log-likelihood-ratio scoring
//! and equal error rate.

mod eer;
mod em;
mod io;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

pub use eer::{compute_eer, eer_from_scores, ScoreSet, Trial};
pub use em::{em_fit, EmConfig, EmTrace};
pub use io::{
    gmm_from_bytes, gmm_to_bytes, read_gmm, read_scores_csv, write_gmm, write_scores_csv,
};

use crate::error::{Error, Result};
use crate::Real;

/// Variances never drop below this (features are standardized).
pub const VARIANCE_FLOOR: f64 = 1e-6;
/// Default MAP relevance factor.
pub const RELEVANCE: f64 = 16.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel<R> {
    pub weights: Array1<R>,
    /// `K x d`
    pub means: Array2<R>,
    /// `K x d` diagonal covariances.
    pub variances: Array2<R>,
}

impl<R: Real> GmmModel<R> {
    pub fn new(weights: Array1<R>, means: Array2<R>, variances: Array2<R>) -> Result<Self> {
        let k = weights.len();
        if k == 0 || means.nrows() != k || variances.dim() != means.dim() {
            return Err(Error::shape(format!(
                "{} weights, means {:?}, variances {:?}",
                k,
                means.dim(),
                variances.dim()
            )));
        }
        if weights.iter().any(|&w| !(w >= R::zero())) {
            return Err(Error::invalid("mixture weights must be non-negative"));
        }
        let total = weights.iter().map(|w| w.to_f64_lossy()).sum::<f64>();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!("mixture weights sum to {total}")));
        }
        if variances.iter().any(|&v| !(v > R::zero())) {
            return Err(Error::invalid("variances must be positive"));
        }
        Ok(GmmModel {
            weights,
            means,
            variances,
        })
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    /// Per-component constants for fast density evaluation.
    pub fn scorer(&self) -> Scorer<'_, R> {
        let half_log_2pi = R::lit(0.5 * (2.0 * std::f64::consts::PI).ln());
        let d = R::from_usize_lossy(self.dim());
        let consts = self
            .weights
            .iter()
            .zip(self.variances.rows())
            .map(|(&w, var)| {
                let log_det: R = var.iter().map(|v| v.ln()).sum();
                w.ln() - d * half_log_2pi - R::lit(0.5) * log_det
            })
            .collect();
        Scorer {
            model: self,
            consts,
            precision: self.variances.mapv(|v| R::one() / v),
        }
    }
}

/// Cached normalizers and precisions of one model.
pub struct Scorer<'a, R> {
    model: &'a GmmModel<R>,
    /// `log w_k - (d/2) log 2pi - (1/2) sum log var_k`
    consts: Vec<R>,
    precision: Array2<R>,
}

impl<R: Real> Scorer<'_, R> {
    /// `log w_k + log N(v; mu_k, var_k)` for every component.
    pub fn component_logs(&self, v: ArrayView1<R>, out: &mut [R]) {
        let half = R::lit(0.5);
        for (k, o) in out.iter_mut().enumerate() {
            let mu = self.model.means.row(k);
            let p = self.precision.row(k);
            let mut q = R::zero();
            for ((&x, &m), &pr) in v.iter().zip(mu.iter()).zip(p.iter()) {
                let z = x - m;
                q += z * z * pr;
            }
            *o = self.consts[k] - half * q;
        }
    }

    pub fn log_likelihood(&self, v: ArrayView1<R>) -> Result<R> {
        if v.len() != self.model.dim() {
            return Err(Error::shape(format!(
                "model has {} dims, vector has {}",
                self.model.dim(),
                v.len()
            )));
        }
        let mut buf = vec![R::zero(); self.model.components()];
        self.component_logs(v, &mut buf);
        Ok(log_sum_exp(&buf))
    }
}

pub fn log_sum_exp<R: Real>(xs: &[R]) -> R {
    let m = xs.iter().copied().fold(R::neg_infinity(), R::max);
    if m == R::neg_infinity() {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<R>().ln()
}

pub fn log_likelihood<R: Real>(model: &GmmModel<R>, v: ArrayView1<R>) -> Result<R> {
    model.scorer().log_likelihood(v)
}

/// Means-only MAP adaptation of `ubm` towards the enrollment vectors.
pub fn map_adapt<R: Real>(
    ubm: &GmmModel<R>,
    enroll: ArrayView2<R>,
    relevance: f64,
) -> Result<GmmModel<R>> {
    if enroll.nrows() == 0 {
        return Err(Error::invalid("empty enrollment set"));
    }
    if enroll.ncols() != ubm.dim() {
        return Err(Error::shape(format!(
            "UBM has {} dims, enrollment data {}",
            ubm.dim(),
            enroll.ncols()
        )));
    }
    if !(relevance >= 0.0) {
        return Err(Error::invalid(format!(
            "relevance factor must be >= 0, got {relevance}"
        )));
    }
    let (counts, sums) = sufficient_stats(ubm, enroll);
    let r = R::lit(relevance);
    let mut adapted = ubm.clone();
    for (k, mut mean) in adapted.means.rows_mut().into_iter().enumerate() {
        let n = counts[k];
        if n <= R::zero() {
            continue;
        }
        let alpha = n / (n + r);
        for (m, &s) in mean.iter_mut().zip(sums.row(k).iter()) {
            let e = s / n;
            *m = alpha * e + (R::one() - alpha) * *m;
        }
    }
    Ok(adapted)
}

/// Soft counts `n_k` and first-order sums `sum_t gamma_tk x_t` under `model`.
pub fn sufficient_stats<R: Real>(model: &GmmModel<R>, data: ArrayView2<R>) -> (Vec<R>, Array2<R>) {
    let scorer = model.scorer();
    let k = model.components();
    let mut counts = vec![R::zero(); k];
    let mut sums = Array2::zeros((k, model.dim()));
    let mut buf = vec![R::zero(); k];
    for row in data.rows() {
        scorer.component_logs(row, &mut buf);
        let total = log_sum_exp(&buf);
        for (j, &l) in buf.iter().enumerate() {
            let g = (l - total).exp();
            if g == R::zero() {
                continue;
            }
            counts[j] += g;
            sums.row_mut(j).scaled_add(g, &row);
        }
    }
    (counts, sums)
}

/// Mean over trial segments of `log p(v | walker) - log p(v | ubm)`.
pub fn score_llr<R: Real>(
    trial: ArrayView2<R>,
    walker: &GmmModel<R>,
    ubm: &GmmModel<R>,
) -> Result<f64> {
    if trial.nrows() == 0 {
        return Err(Error::invalid("empty trial"));
    }
    let (ws, us) = (walker.scorer(), ubm.scorer());
    let mut total = 0.0;
    for row in trial.rows() {
        total += (ws.log_likelihood(row)? - us.log_likelihood(row)?).to_f64_lossy();
    }
    Ok(total / trial.nrows() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn two_component() -> GmmModel<f64> {
        GmmModel::new(
            array![0.3, 0.7],
            array![[0.0, 1.0], [2.0, -1.0]],
            array![[1.0, 0.5], [2.0, 0.25]],
        )
        .unwrap()
    }

    #[test]
    fn density_at_mean_of_unit_gaussian() {
        let d = 5;
        let m = GmmModel::new(array![1.0], Array2::zeros((1, d)), Array2::ones((1, d))).unwrap();
        let ll = log_likelihood(&m, Array1::zeros(d).view()).unwrap();
        let expect = -(d as f64 / 2.0) * (2.0 * std::f64::consts::PI).ln();
        assert!((ll - expect).abs() < 1e-12);
    }

    #[test]
    fn matches_direct_mixture_sum() {
        let m = two_component();
        for v in [array![0.1, 0.2], array![3.0, -2.0], array![-1.0, 1.5]] {
            let mut p = 0.0;
            for k in 0..2 {
                let mut dens = m.weights[k];
                for j in 0..2 {
                    let var = m.variances[[k, j]];
                    let z = v[j] - m.means[[k, j]];
                    dens *=
                        (-z * z / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
                }
                p += dens;
            }
            let ll = log_likelihood(&m, v.view()).unwrap();
            assert!((ll - p.ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn translation_invariance() {
        let m = two_component();
        let shift = array![10.0, -3.5];
        let mut moved = m.clone();
        for mut row in moved.means.rows_mut() {
            row += &shift;
        }
        let v = array![0.7, 0.1];
        let a = log_likelihood(&m, v.view()).unwrap();
        let b = log_likelihood(&moved, (&v + &shift).view()).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_errors() {
        assert!(log_likelihood(&two_component(), array![1.0].view()).is_err());
        assert!(map_adapt(&two_component(), Array2::zeros((3, 4)).view(), 16.0).is_err());
        assert!(map_adapt(&two_component(), Array2::zeros((0, 2)).view(), 16.0).is_err());
    }

    #[test]
    fn llr_of_ubm_against_itself_is_zero() {
        let m = two_component();
        let trial = array![[0.0, 0.0], [1.0, 2.0], [5.0, -5.0]];
        assert_eq!(score_llr(trial.view(), &m, &m).unwrap(), 0.0);
        assert!(score_llr(Array2::zeros((0, 2)).view(), &m, &m).is_err());
    }

    #[test]
    fn llr_is_a_segment_mean() {
        let ubm = two_component();
        let spk = map_adapt(&ubm, array![[2.5, -1.0], [2.0, -0.5]].view(), 4.0).unwrap();
        let trial = array![[2.2, -0.8], [0.0, 1.0]];
        let doubled =
            ndarray::concatenate(ndarray::Axis(0), &[trial.view(), trial.view()]).unwrap();
        let reversed = array![[0.0, 1.0], [2.2, -0.8]];
        let s = score_llr(trial.view(), &spk, &ubm).unwrap();
        assert!((s - score_llr(doubled.view(), &spk, &ubm).unwrap()).abs() < 1e-12);
        assert!((s - score_llr(reversed.view(), &spk, &ubm).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn untouched_component_keeps_ubm_mean() {
        // component 1 is so far away that it gets exactly zero posterior
        let ubm =
            GmmModel::new(array![0.5, 0.5], array![[0.0], [1e4]], array![[1.0], [1.0]]).unwrap();
        let a = map_adapt(&ubm, array![[0.5], [-0.2]].view(), 16.0).unwrap();
        assert_eq!(a.means[[1, 0]], 1e4);
        assert_ne!(a.means[[0, 0]], 0.0);
        assert_eq!(a.weights, ubm.weights);
        assert_eq!(a.variances, ubm.variances);
    }

    #[test]
    fn constructor_validates() {
        assert!(GmmModel::new(
            array![0.5, 0.4],
            Array2::zeros((2, 1)),
            Array2::ones((2, 1))
        )
        .is_err());
        assert!(GmmModel::new(array![1.0], Array2::zeros((1, 1)), Array2::zeros((1, 1))).is_err());
        assert!(GmmModel::new(array![1.0], Array2::zeros((2, 1)), Array2::ones((2, 1))).is_err());
    }
}
