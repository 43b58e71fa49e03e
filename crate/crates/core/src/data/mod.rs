//! Datasets: the toy generators, the IDX (MNIST) reader and CSV files.

mod idx;
mod table;

pub use idx::{load_idx, read_idx_images, read_idx_labels, write_idx_images, write_idx_labels, IdxImages};
pub use table::{load_csv, write_csv, LabelColumn};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, check_labels, EcoError, Result};

/// Points with optional ±1 labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub points: Vec<Vec<f64>>,
    pub labels: Option<Vec<f64>>,
}

impl Dataset {
    pub fn labeled(points: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        check_dim(points.len(), labels.len())?;
        check_labels(&labels)?;
        check_rows(&points)?;
        Ok(Dataset {
            points,
            labels: Some(labels),
        })
    }

    pub fn unlabeled(points: Vec<Vec<f64>>) -> Result<Self> {
        check_rows(&points)?;
        Ok(Dataset { points, labels: None })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    /// The labels, or an error for an unlabeled set.
    pub fn labels(&self) -> Result<&[f64]> {
        self.labels
            .as_deref()
            .ok_or_else(|| EcoError::Config("this task needs a labeled dataset".into()))
    }

    fn pick(&self, idx: &[usize]) -> Dataset {
        Dataset {
            points: idx.iter().map(|&i| self.points[i].clone()).collect(),
            labels: self.labels.as_ref().map(|l| idx.iter().map(|&i| l[i]).collect()),
        }
    }

    /// Seeded permutation of the rows.
    pub fn shuffled(&self, seed: u64) -> Dataset {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        self.pick(&idx)
    }

    /// The first `n` rows of a seeded shuffle (all rows if `n ≥ len`).
    pub fn subsample(&self, n: usize, seed: u64) -> Dataset {
        let mut s = self.shuffled(seed);
        s.truncate(n);
        s
    }

    pub fn truncate(&mut self, n: usize) {
        self.points.truncate(n);
        if let Some(l) = &mut self.labels {
            l.truncate(n);
        }
    }

    /// Rows `[0, at)` and `[at, len)`.
    pub fn split_at(&self, at: usize) -> (Dataset, Dataset) {
        let at = at.min(self.len());
        let head: Vec<usize> = (0..at).collect();
        let tail: Vec<usize> = (at..self.len()).collect();
        (self.pick(&head), self.pick(&tail))
    }
}

fn check_rows(points: &[Vec<f64>]) -> Result<()> {
    let p = points.first().map_or(0, Vec::len);
    for x in points {
        check_dim(p, x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(EcoError::Degenerate("non-finite feature value".into()));
        }
    }
    Ok(())
}

fn sign(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn uniform_points(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..p).map(|_| rng.random::<f64>()).collect()).collect()
}

/// `+1` iff `x₁ ≥ ½`.
pub fn toy_linear_label(x: &[f64]) -> f64 {
    sign(x[0] - 0.5)
}

/// `x₁ = ½ + (1/10) sin(2πx₂)⋯sin(2πx_p)`
pub fn toy_nonlinear_boundary(x: &[f64]) -> f64 {
    let tau = std::f64::consts::TAU;
    0.5 + 0.1 * x[1..].iter().map(|v| (tau * v).sin()).product::<f64>()
}

pub fn toy_nonlinear_label(x: &[f64]) -> f64 {
    sign(x[0] - toy_nonlinear_boundary(x))
}

/// Uniform points on `[0,1]^p` split by the plane `x₁ = ½`.
pub fn gen_toy_linear(n: usize, p: usize, seed: u64) -> Result<Dataset> {
    if n == 0 || p == 0 {
        return Err(EcoError::Config("toy data needs n ≥ 1 and p ≥ 1".into()));
    }
    let points = uniform_points(&mut ChaCha8Rng::seed_from_u64(seed), n, p);
    let labels = points.iter().map(|x| toy_linear_label(x)).collect();
    Dataset::labeled(points, labels)
}

/// Uniform points on `[0,1]^p` split by a sinusoidal surface.
pub fn gen_toy_nonlinear(n: usize, p: usize, seed: u64) -> Result<Dataset> {
    if n == 0 || p < 2 {
        return Err(EcoError::Config("nonlinear toy data needs n ≥ 1 and p ≥ 2".into()));
    }
    let points = uniform_points(&mut ChaCha8Rng::seed_from_u64(seed), n, p);
    let labels = points.iter().map(|x| toy_nonlinear_label(x)).collect();
    Dataset::labeled(points, labels)
}

/// Mean of [`gen_gaussian_blob`] for the same `(p, seed)`.
pub fn blob_mean(p: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..p).map(|_| rng.random::<f64>()).collect()
}

/// Unit-covariance Gaussian cloud around a mean drawn uniformly from `[0,1]^p`.
pub fn gen_gaussian_blob(n: usize, p: usize, seed: u64) -> Result<Dataset> {
    if n == 0 || p == 0 {
        return Err(EcoError::Config("blob needs n ≥ 1 and p ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean: Vec<f64> = (0..p).map(|_| rng.random::<f64>()).collect();
    let points = (0..n)
        .map(|_| {
            mean.iter()
                .map(|m| m + rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    Dataset::unlabeled(points)
}
