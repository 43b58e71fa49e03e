//! Generalized Lotka–Volterra dynamics whose steady states solve the SVM dual.
//!
//! Each training point is a species with abundance `aᵢ` (its KKT multiplier).
//! Species interact through `αᵢⱼ = tᵢtⱼK(xᵢ,xⱼ)`: same-class points compete,
//! opposite-class points are mutualistic. An environmental factor `λ`
//! enforces `Σ aᵢtᵢ = 0`. Steady states maximize the dual Lagrangian
//!
//! ```text
//! L(a) = Σ aᵢ − ½ Σᵢⱼ aᵢaⱼtᵢtⱼK(xᵢ,xⱼ)
//! ```
//!
//! subject to `0 ≤ aᵢ (≤ C)`. [`integrate_to_steady`] follows the flow and
//! [`qp_solve`] is an independent pairwise-ascent solver of the same program.

mod integrate;
mod oracle;

pub use integrate::{integrate_to_steady, integrate_to_steady_with, IntegratorOptions, SteadyState};
pub use oracle::{qp_solve, qp_solve_warm, ORACLE_TOL};
pub(crate) use oracle::PairwiseQp;

use crate::error::{check_dim, check_labels, EcoError, Result};
use crate::kernels::GramMatrix;

/// Default bound on `|Σ aᵢtᵢ|` at steady state.
pub const EQUALITY_TOL: f64 = 1e-8;

/// Abundances below this are numerically extinct: `1e-8 · max(1, C)`.
pub fn extinction_threshold(slack_bound: Option<f64>) -> f64 {
    1e-8 * slack_bound.unwrap_or(1.0).max(1.0)
}

/// Species abundances plus the environmental factor.
#[derive(Clone, Debug, PartialEq)]
pub struct EcoState {
    pub abundances: Vec<f64>,
    pub lambda: f64,
    /// Carrying capacity `C`; `None` is the separable (hard-margin) mode.
    pub slack_bound: Option<f64>,
}

impl EcoState {
    /// Class-symmetric interior start: `aᵢ = min(1, C) / (2N)`, `λ = 0`.
    pub fn initial(n: usize, slack_bound: Option<f64>) -> Self {
        let scale = slack_bound.unwrap_or(1.0).min(1.0);
        EcoState {
            abundances: vec![scale / (2.0 * n as f64); n],
            lambda: 0.0,
            slack_bound,
        }
    }

    pub fn len(&self) -> usize {
        self.abundances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abundances.is_empty()
    }

    /// `Σ aᵢtᵢ`
    pub fn label_balance(&self, labels: &[f64]) -> f64 {
        self.abundances.iter().zip(labels).map(|(a, t)| a * t).sum()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if let Some(c) = self.slack_bound {
            if !(c > 0.0 && c.is_finite()) {
                return Err(EcoError::InvalidState(format!(
                    "slack bound must be positive and finite, got {c}"
                )));
            }
        }
        let upper = self.slack_bound.unwrap_or(f64::INFINITY);
        if let Some((i, a)) = self
            .abundances
            .iter()
            .enumerate()
            .find(|(_, &a)| !(a >= 0.0 && a <= upper))
        {
            return Err(EcoError::InvalidState(format!(
                "abundance {i} = {a} outside [0, {upper}]"
            )));
        }
        if !self.lambda.is_finite() {
            return Err(EcoError::InvalidState("lambda is not finite".into()));
        }
        Ok(())
    }
}

/// `αᵢⱼ = tᵢtⱼK(xᵢ,xⱼ)`: positive entries are competition, negative mutualism.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl InteractionMatrix {
    pub fn new(labels: &[f64], gram: &GramMatrix) -> Result<Self> {
        check_dim(gram.len(), labels.len())?;
        check_labels(labels)?;
        let n = labels.len();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            entries.extend(gram.row(i).iter().zip(labels).map(|(k, tj)| labels[i] * tj * k));
        }
        Ok(InteractionMatrix { n, entries })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }
}

/// `sᵢ = Σⱼ tⱼK(xᵢ,xⱼ)aⱼ`, the bias-free decision value at each training point.
pub(crate) fn signed_scores(a: &[f64], labels: &[f64], gram: &GramMatrix) -> Vec<f64> {
    let mut s = vec![0.0; a.len()];
    for (j, (&aj, &tj)) in a.iter().zip(labels).enumerate() {
        if aj == 0.0 {
            continue;
        }
        let w = aj * tj;
        for (si, k) in s.iter_mut().zip(gram.row(j)) {
            *si += w * k;
        }
    }
    s
}

fn check_problem(state: &EcoState, labels: &[f64], gram: &GramMatrix) -> Result<()> {
    check_dim(labels.len(), state.len())?;
    check_dim(labels.len(), gram.len())?;
    check_labels(labels)
}

/// Exact right-hand side of the flow.
///
/// ```text
/// daᵢ/dt = aᵢ [(C − aᵢ)] (1 + λtᵢ − Σⱼ tᵢtⱼK(xᵢ,xⱼ)aⱼ)
/// dλ/dt  = −Σᵢ aᵢtᵢ
/// ```
///
/// The `(C − aᵢ)` factor is present only in slack mode.
pub fn svm_flow(state: &EcoState, labels: &[f64], gram: &GramMatrix) -> Result<(Vec<f64>, f64)> {
    check_problem(state, labels, gram)?;
    let s = signed_scores(&state.abundances, labels, gram);
    let da = state
        .abundances
        .iter()
        .zip(labels)
        .zip(&s)
        .map(|((&a, &t), &si)| {
            let growth = 1.0 + state.lambda * t - t * si;
            match state.slack_bound {
                Some(c) => a * (c - a) * growth,
                None => a * growth,
            }
        })
        .collect();
    Ok((da, -state.label_balance(labels)))
}

/// Dual SVM Lagrangian `Σ aᵢ − ½ Σᵢⱼ aᵢaⱼtᵢtⱼK(xᵢ,xⱼ)`.
///
/// # Panics
/// If the three inputs disagree in length.
pub fn dual_objective(a: &[f64], labels: &[f64], gram: &GramMatrix) -> f64 {
    assert_eq!(a.len(), labels.len(), "multipliers and labels differ in length");
    assert_eq!(a.len(), gram.len(), "multipliers and gram differ in size");
    let s = signed_scores(a, labels, gram);
    a.iter()
        .zip(labels)
        .zip(&s)
        .map(|((&ai, &ti), &si)| ai - 0.5 * ai * ti * si)
        .sum()
}

/// Largest violation of the KKT system at `state`.
///
/// The bias is recovered from the state itself (average over the active
/// set, midpoint fallback when no multiplier is active), then the result
/// is the maximum of: margin violations, box violations, per-point
/// complementary slackness `|aᵢ(tᵢy(xᵢ) − 1 + ζᵢ)|`, and `|Σ aᵢtᵢ|`.
///
/// In slack mode `ζᵢ = max(0, 1 − tᵢy(xᵢ))` is allowed only for saturated
/// points (`aᵢ = C`); for every other point `μᵢ = C − aᵢ > 0` forces `ζᵢ = 0`.
pub fn kkt_residual(state: &EcoState, labels: &[f64], gram: &GramMatrix) -> f64 {
    assert_eq!(state.len(), labels.len(), "state and labels differ in length");
    assert_eq!(state.len(), gram.len(), "state and gram differ in size");
    let a = &state.abundances;
    let c = state.slack_bound;
    let s = signed_scores(a, labels, gram);
    let bias = crate::svm::bias_or_fallback(&s, labels, a, c);
    let saturated = |ai: f64| c.is_some_and(|c| ai >= c - crate::svm::active_epsilon(Some(c)));

    let mut worst = state.label_balance(labels).abs();
    for ((&ai, &ti), &si) in a.iter().zip(labels).zip(&s) {
        let margin = ti * (si + bias);
        let zeta = if saturated(ai) { (1.0 - margin).max(0.0) } else { 0.0 };
        let primal = (1.0 - margin - zeta).max(0.0);
        let dual = (-ai).max(0.0).max(c.map_or(0.0, |c| (ai - c).max(0.0)));
        let slackness = (ai * (margin - 1.0 + zeta)).abs();
        worst = worst.max(primal).max(dual).max(slackness);
    }
    worst
}

/// Rejects problems the dual cannot handle: too few points, one class only.
pub(crate) fn check_two_classes(labels: &[f64]) -> Result<()> {
    check_labels(labels)?;
    if labels.len() < 2 {
        return Err(EcoError::Degenerate(format!(
            "need at least 2 points, got {}",
            labels.len()
        )));
    }
    let pos = labels.iter().any(|&t| t > 0.0);
    let neg = labels.iter().any(|&t| t < 0.0);
    if !(pos && neg) {
        return Err(EcoError::Degenerate(
            "both classes must be present (Σ aᵢtᵢ = 0 forces a = 0 otherwise)".into(),
        ));
    }
    Ok(())
}
