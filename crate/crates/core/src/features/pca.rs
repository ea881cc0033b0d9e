use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::Real;

/// Principal axes of a training set, strongest first.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca<R> {
    pub mean: Vec<R>,
    /// One unit-norm component per row.
    pub components: Array2<R>,
    /// Sample variance along each component.
    pub variances: Vec<R>,
}

impl<R: Real> Pca<R> {
    /// Fit on the rows of `data`. Directions with (numerically) zero
    /// variance are dropped, so fewer than `dim` components may come back.
    /// When there are fewer samples than dimensions the eigenproblem is
    /// solved on the `n x n` Gram matrix instead of the covariance.
    pub fn fit(data: ArrayView2<R>) -> Result<Self> {
        let (n, d) = data.dim();
        if n < 2 || d == 0 {
            return Err(Error::invalid(format!(
                "PCA needs at least 2 samples, got {n}x{d}"
            )));
        }
        let mean: Vec<f64> = data
            .columns()
            .into_iter()
            .map(|c| c.iter().map(|v| v.to_f64_lossy()).sum::<f64>() / n as f64)
            .collect();
        let x = DMatrix::from_fn(n, d, |i, j| data[[i, j]].to_f64_lossy() - mean[j]);
        let denom = (n - 1) as f64;

        let (values, vectors) = if d <= n {
            let cov = x.transpose() * &x / denom;
            let eig = SymmetricEigen::new(cov);
            (eig.eigenvalues, eig.eigenvectors)
        } else {
            let gram = &x * x.transpose() / denom;
            let eig = SymmetricEigen::new(gram);
            // u is an eigenvector of X X^T; X^T u / |X^T u| is the matching
            // covariance eigenvector with the same eigenvalue
            let mut v = x.transpose() * &eig.eigenvectors;
            for mut col in v.column_iter_mut() {
                let norm = col.norm();
                if norm > 0.0 {
                    col /= norm;
                }
            }
            (eig.eigenvalues, v)
        };

        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
        let top = values[order[0]].max(0.0);
        let keep: Vec<usize> = order
            .into_iter()
            .filter(|&i| values[i] > top * 1e-12 && values[i] > 0.0)
            .take(d.min(n - 1))
            .collect();
        if keep.is_empty() {
            return Err(Error::invalid("training data has zero variance"));
        }

        let mut components = Array2::zeros((keep.len(), d));
        for (r, &i) in keep.iter().enumerate() {
            let col = vectors.column(i);
            // fix the sign so the largest-magnitude entry is positive
            let pivot = col
                .iter()
                .copied()
                .fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
            for j in 0..d {
                components[[r, j]] = R::lit(sign * col[j]);
            }
        }
        Ok(Pca {
            mean: mean.into_iter().map(R::lit).collect(),
            components,
            variances: keep.iter().map(|&i| R::lit(values[i])).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn rank(&self) -> usize {
        self.components.nrows()
    }

    /// Coordinates of `v` on the first `n` components.
    pub fn reduce(&self, v: &[R], n: usize) -> Result<Vec<R>> {
        if v.len() != self.dim() {
            return Err(Error::shape(format!(
                "PCA has {} dims, vector has {}",
                self.dim(),
                v.len()
            )));
        }
        if n == 0 || n > self.rank() {
            return Err(Error::invalid(format!(
                "cannot keep {n} components of a rank-{} basis",
                self.rank()
            )));
        }
        Ok(self
            .components
            .rows()
            .into_iter()
            .take(n)
            .map(|c| {
                c.iter()
                    .zip(v)
                    .zip(&self.mean)
                    .map(|((&w, &x), &m)| w * (x - m))
                    .sum()
            })
            .collect())
    }

    /// Map `n` coordinates back to the input space.
    pub fn reconstruct(&self, coords: &[R]) -> Vec<R> {
        let mut out = self.mean.clone();
        for (c, row) in coords.iter().zip(self.components.rows()) {
            for (o, &w) in out.iter_mut().zip(row.iter()) {
                *o += *c * w;
            }
        }
        out
    }
}
