use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{log_sum_exp, GmmModel, VARIANCE_FLOOR};
use crate::error::{Error, Result};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmConfig {
    pub components: usize,
    pub max_iters: usize,
    /// Stop once the relative log-likelihood gain falls below this.
    pub tolerance: f64,
    pub variance_floor: f64,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            components: 64,
            max_iters: 100,
            tolerance: 1e-6,
            variance_floor: VARIANCE_FLOOR,
            seed: 0,
        }
    }
}

/// Total data log-likelihood before each M-step, and how many components
/// had to be re-seeded.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmTrace {
    pub log_likelihoods: Vec<f64>,
    pub reseeded: usize,
}

/// Diagonal-covariance EM from a k-means++ start.
pub fn em_fit<R: Real>(data: ArrayView2<R>, cfg: &EmConfig) -> Result<(GmmModel<R>, EmTrace)> {
    let (n, d) = data.dim();
    let k = cfg.components;
    if k == 0 {
        return Err(Error::invalid("need at least one component"));
    }
    if n < k {
        return Err(Error::invalid(format!(
            "{k} components but only {n} vectors"
        )));
    }
    if d == 0 {
        return Err(Error::invalid("zero-dimensional data"));
    }
    let floor = R::lit(cfg.variance_floor);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = kmeans_pp_init(data, k, floor, &mut rng);
    let mut trace = EmTrace::default();

    let mut resp = Array2::<R>::zeros((n, k));
    let mut buf = vec![R::zero(); k];
    for _ in 0..cfg.max_iters {
        // E-step
        let scorer = model.scorer();
        let mut total = 0.0;
        for (row, mut r) in data.rows().into_iter().zip(resp.rows_mut()) {
            scorer.component_logs(row, &mut buf);
            let lse = log_sum_exp(&buf);
            total += lse.to_f64_lossy();
            for (dst, &l) in r.iter_mut().zip(&buf) {
                *dst = (l - lse).exp();
            }
        }
        let prev = trace.log_likelihoods.last().copied();
        trace.log_likelihoods.push(total);
        if let Some(p) = prev {
            if (total - p) <= cfg.tolerance * p.abs() {
                break;
            }
        }

        // M-step
        let counts: Vec<R> = resp.columns().into_iter().map(|c| c.sum()).collect();
        let mut means = resp.t().dot(&data);
        let mut vars = Array2::<R>::zeros((k, d));
        let tiny = R::lit(1e-10);
        let mut reseed = Vec::new();
        for (j, &c) in counts.iter().enumerate() {
            if c <= tiny {
                reseed.push(j);
                continue;
            }
            let inv = R::one() / c;
            means.row_mut(j).mapv_inplace(|v| v * inv);
        }
        for (row, r) in data.rows().into_iter().zip(resp.rows()) {
            for j in 0..k {
                let g = r[j];
                if g == R::zero() {
                    continue;
                }
                let mu = means.row(j);
                let mut var = vars.row_mut(j);
                for ((v, &x), &m) in var.iter_mut().zip(row.iter()).zip(mu.iter()) {
                    let z = x - m;
                    *v += g * z * z;
                }
            }
        }
        for (j, &c) in counts.iter().enumerate() {
            if c > tiny {
                let inv = R::one() / c;
                vars.row_mut(j).mapv_inplace(|v| (v * inv).max(floor));
            }
        }
        let nr = R::from_usize_lossy(n);
        let mut weights: Array1<R> = counts.iter().map(|&c| c / nr).collect();

        if !reseed.is_empty() {
            reseed_components(data, &reseed, &mut weights, &mut means, &mut vars, floor);
            trace.reseeded += reseed.len();
            log::warn!(
                "EM: re-seeded {} empty component(s) from farthest points",
                reseed.len()
            );
        }
        model = GmmModel {
            weights,
            means,
            variances: vars,
        };
    }
    Ok((model, trace))
}

fn sq_dist<R: Real>(a: ndarray::ArrayView1<R>, b: ndarray::ArrayView1<R>) -> R {
    a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum()
}

fn data_variance<R: Real>(data: ArrayView2<R>, floor: R) -> Array1<R> {
    let n = R::from_usize_lossy(data.nrows());
    data.columns()
        .into_iter()
        .map(|c| {
            let mean = c.sum() / n;
            (c.iter().map(|&v| (v - mean) * (v - mean)).sum::<R>() / n).max(floor)
        })
        .collect()
}

/// Centres by k-means++ seeding; weights, means and variances from the
/// resulting hard assignment.
fn kmeans_pp_init<R: Real>(
    data: ArrayView2<R>,
    k: usize,
    floor: R,
    rng: &mut ChaCha8Rng,
) -> GmmModel<R> {
    let (n, d) = data.dim();
    let mut centers = vec![rng.random_range(0..n)];
    let mut dist: Vec<f64> = data
        .rows()
        .into_iter()
        .map(|r| sq_dist(r, data.row(centers[0])).to_f64_lossy())
        .collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (i, &w) in dist.iter().enumerate() {
                if u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        } else {
            // all remaining points coincide with a centre
            (0..n).find(|i| !centers.contains(i)).unwrap_or(0)
        };
        centers.push(next);
        for (i, row) in data.rows().into_iter().enumerate() {
            dist[i] = dist[i].min(sq_dist(row, data.row(next)).to_f64_lossy());
        }
    }

    let mut counts = vec![0usize; k];
    let mut sums = Array2::<R>::zeros((k, d));
    let mut sq = Array2::<R>::zeros((k, d));
    for row in data.rows() {
        let best = (0..k)
            .min_by(|&a, &b| {
                sq_dist(row, data.row(centers[a]))
                    .partial_cmp(&sq_dist(row, data.row(centers[b])))
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        counts[best] += 1;
        sums.row_mut(best).scaled_add(R::one(), &row);
        sq.row_mut(best).zip_mut_with(&row, |s, &x| *s += x * x);
    }
    let global = data_variance(data, floor);
    let mut means = Array2::zeros((k, d));
    let mut vars = Array2::zeros((k, d));
    for j in 0..k {
        if counts[j] < 2 {
            means.row_mut(j).assign(&data.row(centers[j]));
            vars.row_mut(j).assign(&global);
            continue;
        }
        let c = R::from_usize_lossy(counts[j]);
        for i in 0..d {
            let m = sums[[j, i]] / c;
            means[[j, i]] = m;
            vars[[j, i]] = (sq[[j, i]] / c - m * m).max(floor);
        }
    }
    let total = counts.iter().map(|&c| c.max(1)).sum::<usize>();
    let weights = counts
        .iter()
        .map(|&c| R::from_usize_lossy(c.max(1)) / R::from_usize_lossy(total))
        .collect();
    GmmModel {
        weights,
        means,
        variances: vars,
    }
}

/// Move each empty component onto the point farthest from every live mean.
fn reseed_components<R: Real>(
    data: ArrayView2<R>,
    empty: &[usize],
    weights: &mut Array1<R>,
    means: &mut Array2<R>,
    vars: &mut Array2<R>,
    floor: R,
) {
    let global = data_variance(data, floor);
    let mut live: Vec<usize> = (0..weights.len()).filter(|j| !empty.contains(j)).collect();
    let n = R::from_usize_lossy(data.nrows());
    for &j in empty {
        let far = data
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                let d = live
                    .iter()
                    .map(|&l| sq_dist(r, means.row(l)))
                    .fold(R::infinity(), R::min);
                (i, d)
            })
            .fold((0, R::neg_infinity()), |best, cur| {
                if cur.1 > best.1 {
                    cur
                } else {
                    best
                }
            })
            .0;
        means.row_mut(j).assign(&data.row(far));
        vars.row_mut(j).assign(&global);
        weights[j] = R::one() / n;
        live.push(j);
    }
    let total: R = weights.sum();
    weights.mapv_inplace(|w| w / total);
}
