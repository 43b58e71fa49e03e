//! Pairwise coordinate ascent for the SVM and SVDD duals.
//!
//! Both duals have the form
//!
//! ```text
//! minimize   ½ aᵀQa + pᵀa
//! subject to Σ yᵢaᵢ = const,  0 ≤ aᵢ ≤ U
//! ```
//!
//! with `Qᵢⱼ = scale · yᵢyⱼK(xᵢ,xⱼ)`. Each iteration picks the most violating
//! pair by second-order working-set selection and solves the two-variable
//! subproblem in closed form. Moving a pair along `(yᵢ, −yⱼ)` leaves the
//! equality constraint untouched, so it holds exactly at every iterate.

use log::trace;

use super::check_two_classes;
use crate::error::{check_dim, EcoError, Result};
use crate::kernels::GramMatrix;

/// Default stopping gap for the oracle (maximal KKT violation pair).
pub const ORACLE_TOL: f64 = 1e-10;

const TAU: f64 = 1e-12;

pub(crate) struct PairwiseQp<'a> {
    pub gram: &'a GramMatrix,
    pub signs: &'a [f64],
    pub scale: f64,
    pub linear: &'a [f64],
    pub upper: f64,
    /// Abort with [`EcoError::Unbounded`] if a multiplier exceeds this.
    pub cap: f64,
    pub max_iter: usize,
}

pub(crate) struct PairwiseSolution {
    pub a: Vec<f64>,
    pub iterations: usize,
}

impl PairwiseQp<'_> {
    #[inline]
    fn q(&self, i: usize, j: usize) -> f64 {
        self.scale * self.signs[i] * self.signs[j] * self.gram.get(i, j)
    }

    fn gradient(&self, a: &[f64]) -> Vec<f64> {
        let mut g = self.linear.to_vec();
        for (j, &aj) in a.iter().enumerate() {
            if aj == 0.0 {
                continue;
            }
            let w = self.scale * self.signs[j] * aj;
            for (i, (gi, k)) in g.iter_mut().zip(self.gram.row(j)).enumerate() {
                *gi += w * self.signs[i] * k;
            }
        }
        g
    }

    fn in_up(&self, t: usize, a: &[f64]) -> bool {
        if self.signs[t] > 0.0 {
            a[t] < self.upper
        } else {
            a[t] > 0.0
        }
    }

    fn in_low(&self, t: usize, a: &[f64]) -> bool {
        if self.signs[t] > 0.0 {
            a[t] > 0.0
        } else {
            a[t] < self.upper
        }
    }

    /// Returns the working pair, or `None` when the violation gap is below `tol`.
    fn select(&self, a: &[f64], g: &[f64], tol: f64) -> Option<(usize, usize)> {
        let n = a.len();
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if self.in_up(t, a) {
                let v = -self.signs[t] * g[t];
                if v >= gmax {
                    gmax = v;
                    i = t;
                }
            }
        }
        if i == usize::MAX {
            return None;
        }

        let mut gmin = f64::INFINITY;
        let mut best = f64::INFINITY;
        let mut j = usize::MAX;
        let qii = self.q(i, i);
        for t in 0..n {
            if !self.in_low(t, a) {
                continue;
            }
            let v = -self.signs[t] * g[t];
            gmin = gmin.min(v);
            let b = gmax - v;
            if b > 0.0 {
                let mut curv = qii + self.q(t, t) - 2.0 * self.signs[i] * self.signs[t] * self.q(i, t);
                if curv <= 0.0 {
                    curv = TAU;
                }
                let obj = -(b * b) / curv;
                if obj <= best {
                    best = obj;
                    j = t;
                }
            }
        }
        if gmax - gmin < tol || j == usize::MAX {
            None
        } else {
            Some((i, j))
        }
    }

    fn update_pair(&self, a: &mut [f64], g: &[f64], i: usize, j: usize) {
        let c = self.upper;
        let (yi, yj) = (self.signs[i], self.signs[j]);
        if yi != yj {
            let mut curv = self.q(i, i) + self.q(j, j) + 2.0 * self.q(i, j);
            if curv <= 0.0 {
                curv = TAU;
            }
            let delta = (-g[i] - g[j]) / curv;
            let diff = a[i] - a[j];
            a[i] += delta;
            a[j] += delta;
            if diff > 0.0 {
                if a[j] < 0.0 {
                    a[j] = 0.0;
                    a[i] = diff;
                }
            } else if a[i] < 0.0 {
                a[i] = 0.0;
                a[j] = -diff;
            }
            if diff > 0.0 {
                if a[i] > c {
                    a[i] = c;
                    a[j] = c - diff;
                }
            } else if a[j] > c {
                a[j] = c;
                a[i] = c + diff;
            }
        } else {
            let mut curv = self.q(i, i) + self.q(j, j) - 2.0 * self.q(i, j);
            if curv <= 0.0 {
                curv = TAU;
            }
            let delta = (g[i] - g[j]) / curv;
            let sum = a[i] + a[j];
            a[i] -= delta;
            a[j] += delta;
            if sum > c {
                if a[i] > c {
                    a[i] = c;
                    a[j] = sum - c;
                }
            } else if a[j] < 0.0 {
                a[j] = 0.0;
                a[i] = sum;
            }
            if sum > c {
                if a[j] > c {
                    a[j] = c;
                    a[i] = sum - c;
                }
            } else if a[i] < 0.0 {
                a[i] = 0.0;
                a[j] = sum;
            }
        }
    }

    /// Runs pairwise ascent from a feasible starting point.
    pub fn solve(&self, mut a: Vec<f64>, tol: f64) -> Result<PairwiseSolution> {
        let n = a.len();
        let mut g = self.gradient(&a);
        let refresh = (10 * n).max(1000);
        let mut iter = 0;
        loop {
            let Some((i, j)) = self.select(&a, &g, tol) else {
                // Accumulated rank-two updates drift; confirm on a fresh gradient.
                let fresh = self.gradient(&a);
                if self.select(&a, &fresh, tol).is_none() {
                    trace!("pairwise solver converged in {iter} iterations");
                    return Ok(PairwiseSolution { a, iterations: iter });
                }
                g = fresh;
                continue;
            };
            if iter >= self.max_iter {
                let fresh = self.gradient(&a);
                return Err(EcoError::NotConverged {
                    steps: iter,
                    residual: self.violation_gap(&a, &fresh),
                });
            }
            let (old_i, old_j) = (a[i], a[j]);
            self.update_pair(&mut a, &g, i, j);
            let (di, dj) = (a[i] - old_i, a[j] - old_j);
            let (wi, wj) = (self.scale * self.signs[i] * di, self.scale * self.signs[j] * dj);
            let (ri, rj) = (self.gram.row(i), self.gram.row(j));
            for (k, gk) in g.iter_mut().enumerate() {
                *gk += self.signs[k] * (wi * ri[k] + wj * rj[k]);
            }
            for idx in [i, j] {
                if a[idx] > self.cap {
                    return Err(EcoError::Unbounded {
                        index: idx,
                        cap: self.cap,
                    });
                }
            }
            iter += 1;
            if iter % refresh == 0 {
                g = self.gradient(&a);
            }
        }
    }

    fn violation_gap(&self, a: &[f64], g: &[f64]) -> f64 {
        let up = (0..a.len())
            .filter(|&t| self.in_up(t, a))
            .map(|t| -self.signs[t] * g[t])
            .fold(f64::NEG_INFINITY, f64::max);
        let low = (0..a.len())
            .filter(|&t| self.in_low(t, a))
            .map(|t| -self.signs[t] * g[t])
            .fold(f64::INFINITY, f64::min);
        (up - low).max(0.0)
    }
}

fn svm_problem<'a>(
    labels: &'a [f64],
    gram: &'a GramMatrix,
    slack_bound: Option<f64>,
    linear: &'a [f64],
) -> Result<PairwiseQp<'a>> {
    check_dim(labels.len(), gram.len())?;
    check_two_classes(labels)?;
    if let Some(c) = slack_bound {
        if !(c > 0.0 && c.is_finite()) {
            return Err(EcoError::InvalidState(format!(
                "slack bound must be positive and finite, got {c}"
            )));
        }
    }
    Ok(PairwiseQp {
        gram,
        signs: labels,
        scale: 1.0,
        linear,
        upper: slack_bound.unwrap_or(f64::INFINITY),
        cap: 1e6,
        max_iter: 20_000_000,
    })
}

/// Maximizes the SVM dual by pairwise coordinate ascent, starting from `a = 0`.
///
/// The result satisfies the KKT system to within `tol` in the maximal
/// violating-pair sense. Single-class input is rejected, and in separable mode a
/// multiplier exceeding `1e6` is reported as [`EcoError::Unbounded`].
pub fn qp_solve(
    labels: &[f64],
    gram: &GramMatrix,
    slack_bound: Option<f64>,
    tol: f64,
) -> Result<Vec<f64>> {
    qp_solve_warm(labels, gram, slack_bound, tol, vec![0.0; labels.len()])
}

/// [`qp_solve`] from a caller-supplied feasible start (`Σ aᵢtᵢ = 0`, inside the box).
pub fn qp_solve_warm(
    labels: &[f64],
    gram: &GramMatrix,
    slack_bound: Option<f64>,
    tol: f64,
    start: Vec<f64>,
) -> Result<Vec<f64>> {
    check_dim(labels.len(), start.len())?;
    let linear = vec![-1.0; labels.len()];
    let problem = svm_problem(labels, gram, slack_bound, &linear)?;
    let balance: f64 = start.iter().zip(labels).map(|(a, t)| a * t).sum();
    let scale = start.iter().map(|a| a.abs()).sum::<f64>().max(1.0);
    if balance.abs() > 1e-9 * scale || start.iter().any(|&a| !(a >= 0.0 && a <= problem.upper)) {
        return Err(EcoError::InvalidState(
            "warm start must satisfy Σ aᵢtᵢ = 0 and the box constraints".into(),
        ));
    }
    Ok(problem.solve(start, tol)?.a)
}
