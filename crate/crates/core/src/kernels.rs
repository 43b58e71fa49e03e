//! Kernel functions and Gram matrices.
//!
//! The kernel measures similarity between two points in an implicit feature
//! space. In the ecological reading it is the niche overlap between two
//! species: the stronger the overlap, the stronger their interaction.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, EcoError, Result};

/// Kernel family and parameters.
///
/// Serializes as a tagged JSON object, e.g. `{"family":"rbf","sigma":4.0}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum KernelSpec {
    /// `K(x, y) = x·y`
    Linear,
    /// `K(x, y) = exp(-|x - y|² / (2σ²))`
    Rbf { sigma: f64 },
    /// `K(x, y) = (x·y + offset)^degree`
    Polynomial { degree: u32, offset: f64 },
}

impl KernelSpec {
    pub fn rbf(sigma: f64) -> Self {
        KernelSpec::Rbf { sigma }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Rbf { sigma } if sigma > 0.0 && sigma.is_finite() => Ok(()),
            KernelSpec::Rbf { sigma } => Err(EcoError::InvalidKernel(format!(
                "rbf sigma must be positive and finite, got {sigma}"
            ))),
            KernelSpec::Polynomial { degree, offset } if degree >= 1 && offset.is_finite() => {
                Ok(())
            }
            KernelSpec::Polynomial { degree, offset } => Err(EcoError::InvalidKernel(format!(
                "polynomial needs degree >= 1 and finite offset, got degree {degree}, offset {offset}"
            ))),
        }
    }

    /// Kernel value without dimension checks.
    ///
    /// Every branch is symmetric in its arguments bit for bit: the dot
    /// product and squared distance accumulate in the same order either way.
    #[inline]
    pub(crate) fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        match *self {
            KernelSpec::Linear => dot(x, y),
            KernelSpec::Rbf { sigma } => {
                let d2: f64 = x
                    .iter()
                    .zip(y)
                    .map(|(a, b)| {
                        let d = a - b;
                        d * d
                    })
                    .sum();
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
            KernelSpec::Polynomial { degree, offset } => (dot(x, y) + offset).powi(degree as i32),
        }
    }

    /// `K(x, x)`; identically 1 for RBF.
    #[inline]
    pub(crate) fn self_similarity(&self, x: &[f64]) -> f64 {
        match self {
            KernelSpec::Rbf { .. } => 1.0,
            _ => self.eval(x, x),
        }
    }

    /// Kernel values between `x` and every point in `points`.
    pub(crate) fn row(&self, x: &[f64], points: &[Vec<f64>]) -> Vec<f64> {
        points.iter().map(|p| self.eval(x, p)).collect()
    }
}

#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Checked kernel evaluation.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    spec.validate()?;
    check_dim(x.len(), y.len())?;
    Ok(spec.eval(x, y))
}

/// Dense, row-major symmetric kernel matrix over a point set.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    n: usize,
    entries: Vec<f64>,
    kernel: KernelSpec,
}

impl GramMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Builds a Gram matrix from raw entries. Used when a caller already
    /// holds the kernel values (e.g. a sub-block of a larger matrix).
    pub fn from_entries(kernel: KernelSpec, n: usize, entries: Vec<f64>) -> Result<Self> {
        check_dim(n * n, entries.len())?;
        Ok(GramMatrix { n, entries, kernel })
    }

    /// Grows the matrix by one point, given its kernel row against the
    /// existing points and its self-similarity.
    pub(crate) fn push(&mut self, row: &[f64], diag: f64) {
        debug_assert_eq!(row.len(), self.n);
        let m = self.n + 1;
        let mut entries = Vec::with_capacity(m * m);
        for i in 0..self.n {
            entries.extend_from_slice(self.row(i));
            entries.push(row[i]);
        }
        entries.extend_from_slice(row);
        entries.push(diag);
        self.n = m;
        self.entries = entries;
    }

    /// Keeps only the listed indices (in the given order).
    pub(crate) fn select(&self, keep: &[usize]) -> GramMatrix {
        let m = keep.len();
        let mut entries = Vec::with_capacity(m * m);
        for &i in keep {
            let row = self.row(i);
            entries.extend(keep.iter().map(|&j| row[j]));
        }
        GramMatrix {
            n: m,
            entries,
            kernel: self.kernel,
        }
    }
}

/// Kernel matrix `K[i][j] = K(points[i], points[j])`.
pub fn gram_matrix(spec: &KernelSpec, points: &[Vec<f64>]) -> Result<GramMatrix> {
    spec.validate()?;
    let first = points.first().ok_or(EcoError::Empty("gram matrix needs points"))?;
    for p in points {
        check_dim(first.len(), p.len())?;
    }
    let n = points.len();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = spec.eval(&points[i], &points[j]);
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
    }
    Ok(GramMatrix {
        n,
        entries,
        kernel: *spec,
    })
}
