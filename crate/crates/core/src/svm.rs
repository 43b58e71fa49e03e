//! Batch support vector machine: fit, bias, decision, slack diagnostics.
//!
//! Only support vectors survive a fit. The weight vector
//! `w = Σ aᵢtᵢφ(xᵢ)` is never materialized; the decision function is
//! `y(x) = Σᵢ tᵢaᵢK(x, xᵢ) + b`.

use log::info;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    self, check_two_classes, dual_objective, extinction_threshold, integrate_to_steady_with,
    qp_solve, signed_scores, EcoState, IntegratorOptions, ORACLE_TOL,
};
use crate::error::{check_dim, check_labels, EcoError, Result};
use crate::kernels::{gram_matrix, GramMatrix, KernelSpec};

/// How the dual is solved.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    /// Integrate the Lotka–Volterra flow to its steady state.
    Dynamics,
    /// Pairwise coordinate ascent.
    #[default]
    Oracle,
}

/// Tolerance for the active-set test `ε < aᵢ < C − ε`: `1e-6·C`
/// in slack mode, the extinction threshold otherwise.
pub fn active_epsilon(slack_bound: Option<f64>) -> f64 {
    match slack_bound {
        Some(c) => 1e-6 * c,
        None => extinction_threshold(None),
    }
}

pub(crate) fn is_active(a: f64, slack_bound: Option<f64>) -> bool {
    let eps = active_epsilon(slack_bound);
    match slack_bound {
        Some(c) => a > eps && a < c - eps,
        None => a > eps,
    }
}

/// Bias averaged over the active set, given bias-free scores `sᵢ` at the
/// training points. `None` when the active set is empty.
fn averaged_bias(scores: &[f64], labels: &[f64], a: &[f64], slack_bound: Option<f64>) -> Option<f64> {
    let (sum, count) = a
        .iter()
        .zip(labels)
        .zip(scores)
        .filter(|((&ai, _), _)| is_active(ai, slack_bound))
        .fold((0.0, 0usize), |(s, n), ((_, &t), &score)| (s + t - score, n + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Midpoint of the interval of biases satisfying every margin condition when
/// no multiplier is free: points at zero need `tᵢy(xᵢ) ≥ 1`, saturated points
/// `tᵢy(xᵢ) ≤ 1`. `None` if the interval is empty or unbounded on both sides.
fn interval_bias(scores: &[f64], labels: &[f64], a: &[f64], slack_bound: Option<f64>) -> Option<f64> {
    let eps = active_epsilon(slack_bound);
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for ((&ai, &t), &s) in a.iter().zip(labels).zip(scores) {
        let target = t - s;
        let saturated = slack_bound.is_some_and(|c| ai >= c - eps);
        // b ≥ target for (+1, zero) and (−1, saturated); b ≤ target otherwise.
        if (t > 0.0) != saturated {
            lo = lo.max(target);
        } else {
            hi = hi.min(target);
        }
    }
    let slop = 1e-9 * (1.0 + lo.abs().min(hi.abs()));
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) if lo <= hi + slop => Some(0.5 * (lo + hi)),
        (true, false) => Some(lo),
        (false, true) => Some(hi),
        _ => None,
    }
}

/// Places the boundary halfway between the highest-scoring `−1` point and the
/// lowest-scoring `+1` point.
fn midpoint_bias(scores: &[f64], labels: &[f64]) -> f64 {
    let max_neg = labels
        .iter()
        .zip(scores)
        .filter(|(&t, _)| t < 0.0)
        .map(|(_, &s)| s)
        .fold(f64::NEG_INFINITY, f64::max);
    let min_pos = labels
        .iter()
        .zip(scores)
        .filter(|(&t, _)| t > 0.0)
        .map(|(_, &s)| s)
        .fold(f64::INFINITY, f64::min);
    match (max_neg.is_finite(), min_pos.is_finite()) {
        (true, true) => -0.5 * (max_neg + min_pos),
        (true, false) => -max_neg,
        (false, true) => -min_pos,
        (false, false) => 0.0,
    }
}

/// Bias over the active set, else the margin-consistent interval midpoint,
/// else the score midpoint.
pub(crate) fn bias_or_fallback(scores: &[f64], labels: &[f64], a: &[f64], slack_bound: Option<f64>) -> f64 {
    averaged_bias(scores, labels, a, slack_bound)
        .or_else(|| interval_bias(scores, labels, a, slack_bound))
        .unwrap_or_else(|| midpoint_bias(scores, labels))
}

/// `b = (1/|M|) Σ_{i∈M} [tᵢ − Σⱼ aⱼtⱼK(xᵢ,xⱼ)]` over the active set `M`
/// (all support vectors in separable mode, `0 < aᵢ < C` in slack mode).
///
/// Fails with [`EcoError::NoActiveSupport`] when `M` is empty.
pub fn compute_bias(
    kernel: &KernelSpec,
    points: &[Vec<f64>],
    labels: &[f64],
    multipliers: &[f64],
    slack_bound: Option<f64>,
) -> Result<f64> {
    check_dim(points.len(), labels.len())?;
    check_dim(points.len(), multipliers.len())?;
    check_labels(labels)?;
    let gram = gram_matrix(kernel, points)?;
    let scores = signed_scores(multipliers, labels, &gram);
    averaged_bias(&scores, labels, multipliers, slack_bound).ok_or(EcoError::NoActiveSupport)
}

/// A fitted classifier holding only its support vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: KernelSpec,
    pub support_points: Vec<Vec<f64>>,
    #[serde(rename = "labels")]
    pub support_labels: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub bias: f64,
    #[serde(rename = "c")]
    pub slack_bound: Option<f64>,
}

impl SvmModel {
    /// Assembles a model from a full multiplier vector over `points`,
    /// dropping extinct points and computing the bias (with a fallback when
    /// no multiplier is active).
    pub(crate) fn from_multipliers(
        kernel: KernelSpec,
        points: &[Vec<f64>],
        labels: &[f64],
        gram: &GramMatrix,
        a: &[f64],
        slack_bound: Option<f64>,
    ) -> SvmModel {
        let scores = signed_scores(a, labels, gram);
        if averaged_bias(&scores, labels, a, slack_bound).is_none() {
            info!("no active support vector; placing the bias between the margins");
        }
        let bias = bias_or_fallback(&scores, labels, a, slack_bound);
        let threshold = extinction_threshold(slack_bound);
        let keep: Vec<usize> = (0..a.len()).filter(|&i| a[i] >= threshold).collect();
        SvmModel {
            kernel,
            support_points: keep.iter().map(|&i| points[i].clone()).collect(),
            support_labels: keep.iter().map(|&i| labels[i]).collect(),
            multipliers: keep.iter().map(|&i| a[i]).collect(),
            bias,
            slack_bound,
        }
    }

    pub fn dim(&self) -> usize {
        self.support_points.first().map_or(0, Vec::len)
    }

    pub fn support_count(&self) -> usize {
        self.support_points.len()
    }

    /// Support vectors strictly inside the box (all of them in separable mode).
    pub fn active_count(&self) -> usize {
        self.multipliers
            .iter()
            .filter(|&&a| is_active(a, self.slack_bound))
            .count()
    }

    pub(crate) fn score(&self, x: &[f64]) -> f64 {
        self.support_points
            .iter()
            .zip(&self.support_labels)
            .zip(&self.multipliers)
            .map(|((p, t), a)| t * a * self.kernel.eval(x, p))
            .sum::<f64>()
            + self.bias
    }

    /// `y(x) = Σ tᵢaᵢK(x, xᵢ) + b`
    ///
    /// A model without support vectors has no defined bias and is an error.
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if self.support_points.is_empty() {
            return Err(EcoError::NoActiveSupport);
        }
        check_dim(self.dim(), x.len())?;
        Ok(self.score(x))
    }

    /// `sign(y(x))`, with `y(x) = 0` classified as `+1`.
    pub fn classify(&self, x: &[f64]) -> Result<f64> {
        Ok(if self.decision(x)? >= 0.0 { 1.0 } else { -1.0 })
    }

    /// Fraction of correct predictions, `1 − (1/N) Σ ½|t̂ − t|`.
    pub fn accuracy(&self, points: &[Vec<f64>], labels: &[f64]) -> Result<f64> {
        check_dim(points.len(), labels.len())?;
        if points.is_empty() {
            return Err(EcoError::Empty("accuracy needs a test set"));
        }
        let mut wrong = 0.0;
        for (x, &t) in points.iter().zip(labels) {
            wrong += 0.5 * (self.classify(x)? - t).abs();
        }
        Ok(1.0 - wrong / points.len() as f64)
    }

    /// KKT residual of the stored (surviving) system.
    pub fn kkt_residual(&self) -> Result<f64> {
        let gram = gram_matrix(&self.kernel, &self.support_points)?;
        let state = EcoState {
            abundances: self.multipliers.clone(),
            lambda: -self.bias,
            slack_bound: self.slack_bound,
        };
        Ok(dynamics::kkt_residual(&state, &self.support_labels, &gram))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: SvmModel = serde_json::from_str(s)?;
        model.kernel.validate()?;
        check_dim(model.support_points.len(), model.support_labels.len())?;
        check_dim(model.support_points.len(), model.multipliers.len())?;
        check_labels(&model.support_labels)?;
        Ok(model)
    }
}

/// `ζᵢ = max(0, 1 − tᵢy(xᵢ))` for each point.
pub fn slack_values(model: &SvmModel, points: &[Vec<f64>], labels: &[f64]) -> Result<Vec<f64>> {
    check_dim(points.len(), labels.len())?;
    points
        .iter()
        .zip(labels)
        .map(|(x, &t)| Ok((1.0 - t * model.decision(x)?).max(0.0)))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions {
    pub solver: Solver,
    pub integrator: IntegratorOptions,
    pub oracle_tol: f64,
    /// Largest batch the dense solver accepts.
    pub max_batch: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            solver: Solver::Oracle,
            integrator: IntegratorOptions::default(),
            oracle_tol: ORACLE_TOL,
            max_batch: 5000,
        }
    }
}

impl FitOptions {
    pub fn with_solver(solver: Solver) -> Self {
        FitOptions {
            solver,
            ..FitOptions::default()
        }
    }
}

/// A batch fit together with its full-length diagnostics.
#[derive(Clone, Debug)]
pub struct BatchFit {
    pub model: SvmModel,
    /// One multiplier per training point (zeros included).
    pub multipliers: Vec<f64>,
    pub dual_objective: f64,
    /// KKT residual over the whole training set.
    pub kkt_residual: f64,
}

pub fn fit_batch(
    points: &[Vec<f64>],
    labels: &[f64],
    kernel: KernelSpec,
    slack_bound: Option<f64>,
    solver: Solver,
) -> Result<SvmModel> {
    fit_batch_with(points, labels, kernel, slack_bound, &FitOptions::with_solver(solver)).map(|f| f.model)
}

pub fn fit_batch_with(
    points: &[Vec<f64>],
    labels: &[f64],
    kernel: KernelSpec,
    slack_bound: Option<f64>,
    opts: &FitOptions,
) -> Result<BatchFit> {
    check_dim(points.len(), labels.len())?;
    check_two_classes(labels)?;
    if points.len() > opts.max_batch {
        return Err(EcoError::TooLarge {
            n: points.len(),
            limit: opts.max_batch,
        });
    }
    let gram = gram_matrix(&kernel, points)?;
    fit_gram(points, labels, &gram, slack_bound, opts)
}

pub(crate) fn fit_gram(
    points: &[Vec<f64>],
    labels: &[f64],
    gram: &GramMatrix,
    slack_bound: Option<f64>,
    opts: &FitOptions,
) -> Result<BatchFit> {
    let a = match opts.solver {
        Solver::Oracle => qp_solve(labels, gram, slack_bound, opts.oracle_tol)?,
        Solver::Dynamics => {
            let init = EcoState::initial(labels.len(), slack_bound);
            integrate_to_steady_with(&init, labels, gram, &opts.integrator, &mut |_, _, _| {})?
                .state
                .abundances
        }
    };
    let model = SvmModel::from_multipliers(*gram.kernel(), points, labels, gram, &a, slack_bound);
    let state = EcoState {
        abundances: a,
        lambda: -model.bias,
        slack_bound,
    };
    let kkt_residual = dynamics::kkt_residual(&state, labels, gram);
    Ok(BatchFit {
        dual_objective: dual_objective(&state.abundances, labels, gram),
        multipliers: state.abundances,
        model,
        kkt_residual,
    })
}
