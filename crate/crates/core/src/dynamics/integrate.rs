//! Steady-state integration of the Lotka–Volterra flow.
//!
//! Abundances are advanced in the coordinates where the flow is
//! multiplicative: `uᵢ = ln aᵢ` in separable mode, `uᵢ = ln(aᵢ / (C − aᵢ))`
//! in slack mode. An explicit Euler step in `u` is
//!
//! ```text
//! uᵢ ← uᵢ + h·sᵢ·(gᵢ + λtᵢ),   gᵢ = 1 − tᵢΣⱼ tⱼK(xᵢ,xⱼ)aⱼ
//! ```
//!
//! with `sᵢ = 1` (separable) or `C` (slack), so abundances never leave
//! `[0, C]` and extinct species stay extinct. The environmental factor is
//! treated as fast: every step solves for the `λ` that keeps `Σ aᵢtᵢ = 0`,
//! so after the first step the trajectory lives on the feasible manifold
//! and the dual objective is a Lyapunov function. A step that lowers the
//! objective is retried at half the size.

use log::debug;

use super::{check_problem, check_two_classes, extinction_threshold, signed_scores, EcoState};
use crate::error::{EcoError, Result};
use crate::kernels::GramMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorOptions {
    /// The flow has stalled once `|rᵢ|·min(aᵢ, C − aᵢ)` and `|Σ aᵢtᵢ|` are
    /// below this (`rᵢ` the per-capita rate); steady-state rates must then
    /// be within `10·tol` of their sign conditions.
    pub tol: f64,
    pub max_steps: usize,
    pub initial_step: f64,
    pub max_step: f64,
    /// Separable mode only: abundance growth past this signals non-separable data.
    pub divergence_cap: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            tol: 1e-8,
            max_steps: 200_000,
            initial_step: 0.1,
            max_step: 1e8,
            divergence_cap: 1e6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SteadyState {
    pub state: EcoState,
    /// Accepted steps taken.
    pub steps: usize,
    pub residual: f64,
}

/// Follows the flow from `initial` until it stops moving.
///
/// Whenever the flow stalls, species still drifting towards `0` (or `C`) are
/// placed on that boundary and species that could invade from a boundary
/// are reseeded; integration then resumes with a tighter tolerance. At the
/// end, coordinates below the extinction threshold are set to exactly zero
/// (and, in slack mode, those within it of `C` are set to `C`).
pub fn integrate_to_steady(
    initial: &EcoState,
    labels: &[f64],
    gram: &GramMatrix,
    tol: f64,
    max_steps: usize,
) -> Result<EcoState> {
    let opts = IntegratorOptions {
        tol,
        max_steps,
        ..IntegratorOptions::default()
    };
    integrate_to_steady_with(initial, labels, gram, &opts, &mut |_, _, _| {}).map(|s| s.state)
}

/// Like [`integrate_to_steady`], calling `observer(step, abundances, λ)` after
/// every accepted step.
pub fn integrate_to_steady_with(
    initial: &EcoState,
    labels: &[f64],
    gram: &GramMatrix,
    opts: &IntegratorOptions,
    observer: &mut dyn FnMut(usize, &[f64], f64),
) -> Result<SteadyState> {
    check_problem(initial, labels, gram)?;
    check_two_classes(labels)?;
    initial.validate()?;
    let upper = initial.slack_bound.unwrap_or(f64::INFINITY);
    if let Some(i) = initial.abundances.iter().position(|&a| !(a > 0.0 && a < upper)) {
        return Err(EcoError::InvalidState(format!(
            "initial abundance {i} must lie strictly inside (0, {upper})"
        )));
    }

    let seed = initial.slack_bound.unwrap_or(1.0).min(1.0) / (2.0 * labels.len() as f64);
    let rate_tol = 10.0 * opts.tol;
    let mut flow = Flow::new(labels, gram, initial.slack_bound, &initial.abundances);
    let mut round_tol = opts.tol;
    let mut h = opts.initial_step;
    // Step size that recently overshot, relaxed slowly.
    let mut ceiling = opts.max_step;
    let mut steps = 0;
    for round in 0..MAX_ROUNDS {
        loop {
            let residual = flow.residual();
            if residual < round_tol {
                break;
            }
            if steps >= opts.max_steps {
                return Err(EcoError::NotConverged { steps, residual });
            }
            loop {
                if let Some(trial) = flow.trial(h) {
                    if !flow.feasible || trial.gain >= -trial.noise {
                        flow.accept(trial);
                        ceiling = (ceiling * 1.02).min(opts.max_step);
                        h = (h * 1.5).min(ceiling);
                        break;
                    }
                }
                ceiling = ceiling.min(0.5 * h);
                h *= 0.5;
                if h < 1e-300 {
                    return Err(EcoError::NotConverged { steps, residual });
                }
            }
            steps += 1;

            if initial.slack_bound.is_none() {
                if let Some(i) = flow.a.iter().position(|&a| a > opts.divergence_cap) {
                    return Err(EcoError::Unbounded {
                        index: i,
                        cap: opts.divergence_cap,
                    });
                }
            }
            observer(steps, &flow.a, flow.lambda);
        }

        match flow.settle(rate_tol, seed) {
            Settle::Done => {
                let residual = flow.residual();
                debug!("steady state after {steps} steps ({} rounds), residual {residual:e}", round + 1);
                return Ok(SteadyState {
                    state: flow.finish(),
                    steps,
                    residual,
                });
            }
            Settle::Moved(a) => {
                flow = Flow::new(labels, gram, initial.slack_bound, &a);
                h = opts.initial_step.min(ceiling);
            }
            Settle::Tighten => {}
        }
        round_tol = (0.1 * round_tol).max(1e-13);
    }
    Err(EcoError::NotConverged {
        steps,
        residual: flow.residual(),
    })
}

/// Bound on extinction/invasion rounds.
const MAX_ROUNDS: usize = 60;

enum Settle {
    Done,
    /// Species were pushed onto (or off) a boundary.
    Moved(Vec<f64>),
    /// Not yet settled, but nothing to move.
    Tighten,
}

struct Flow<'a> {
    labels: &'a [f64],
    gram: &'a GramMatrix,
    slack: Option<f64>,
    u: Vec<f64>,
    a: Vec<f64>,
    /// `gᵢ = 1 − tᵢsᵢ`, the per-capita growth rate without the λ term.
    growth: Vec<f64>,
    lambda: f64,
    objective: f64,
    feasible: bool,
}

struct Trial {
    u: Vec<f64>,
    a: Vec<f64>,
    growth: Vec<f64>,
    lambda: f64,
    objective: f64,
    /// Objective change, `Σ δᵢ((gᵢ + gᵢ')/2 + λtᵢ)`, exact for a quadratic.
    gain: f64,
    noise: f64,
}

fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl<'a> Flow<'a> {
    fn new(labels: &'a [f64], gram: &'a GramMatrix, slack: Option<f64>, a0: &[f64]) -> Self {
        let u = match slack {
            Some(c) => a0.iter().map(|&a| (a / (c - a)).ln()).collect(),
            None => a0.iter().map(|&a| a.ln()).collect(),
        };
        let a = a0.to_vec();
        let (growth, objective) = Self::evaluate(labels, gram, &a);
        let mut flow = Flow {
            labels,
            gram,
            slack,
            u,
            a,
            growth,
            lambda: 0.0,
            objective,
            feasible: false,
        };
        flow.lambda = flow.instantaneous_lambda();
        flow.feasible = flow.is_feasible();
        flow
    }

    fn evaluate(labels: &[f64], gram: &GramMatrix, a: &[f64]) -> (Vec<f64>, f64) {
        let s = signed_scores(a, labels, gram);
        let growth: Vec<f64> = labels.iter().zip(&s).map(|(t, si)| 1.0 - t * si).collect();
        let objective = a
            .iter()
            .zip(labels)
            .zip(&s)
            .map(|((&ai, &ti), &si)| ai - 0.5 * ai * ti * si)
            .sum();
        (growth, objective)
    }

    fn abundance(&self, u: f64) -> f64 {
        match self.slack {
            Some(c) => c * logistic(u),
            None => u.exp(),
        }
    }

    /// Weight `wᵢ` with `daᵢ/dt = wᵢ(gᵢ + λtᵢ)`.
    fn weight(&self, i: usize) -> f64 {
        match self.slack {
            Some(c) => c * c * logistic(self.u[i]) * logistic(-self.u[i]),
            None => self.a[i],
        }
    }

    /// The λ that keeps `d/dt Σ aᵢtᵢ = 0` at the current abundances.
    fn instantaneous_lambda(&self) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..self.a.len() {
            let w = self.weight(i);
            num += w * self.labels[i] * self.growth[i];
            den += w;
        }
        if den > 0.0 {
            -num / den
        } else {
            0.0
        }
    }

    fn is_feasible(&self) -> bool {
        let balance: f64 = self.a.iter().zip(self.labels).map(|(a, t)| a * t).sum();
        let mass: f64 = self.a.iter().sum();
        balance.abs() <= 1e-12 * mass.max(1.0)
    }

    /// Per-capita rates `rᵢ = gᵢ + λtᵢ` at the slaved `λ`.
    fn rates(&self) -> Vec<f64> {
        let lambda = self.instantaneous_lambda();
        self.growth
            .iter()
            .zip(self.labels)
            .map(|(g, t)| g + lambda * t)
            .collect()
    }

    /// Largest `|rᵢ|·min(aᵢ, C − aᵢ)` together with `|Σ aᵢtᵢ|`.
    fn residual(&self) -> f64 {
        let upper = self.slack.unwrap_or(f64::INFINITY);
        let balance = self.a.iter().zip(self.labels).map(|(a, t)| a * t).sum::<f64>();
        self.rates()
            .iter()
            .zip(&self.a)
            .map(|(r, &a)| (r * a.min(upper - a)).abs())
            .fold(balance.abs(), f64::max)
    }

    /// Checks the sign conditions of a steady state once the flow has stalled.
    ///
    /// Free species must have `|rᵢ| ≤ tol`, extinct ones `rᵢ ≤ tol`, saturated
    /// ones `rᵢ ≥ −tol`. A stalled free species with a clear rate is on its way
    /// to a boundary and is moved there; an extinct (saturated) species that
    /// would grow (shrink) is reintroduced at `seed` from the boundary.
    fn settle(&self, tol: f64, seed: f64) -> Settle {
        let upper = self.slack.unwrap_or(f64::INFINITY);
        let mut a = self.a.clone();
        let mut moved = false;
        let mut settled = true;
        for (ai, r) in a.iter_mut().zip(self.rates()) {
            if r.abs() <= tol {
                continue;
            }
            let lower_half = *ai <= upper - *ai;
            if r > 0.0 {
                if *ai >= upper {
                    continue;
                }
                settled = false;
                if !lower_half {
                    *ai = upper;
                    moved = true;
                } else if *ai < seed {
                    *ai = seed;
                    moved = true;
                }
            } else {
                if *ai <= 0.0 {
                    continue;
                }
                settled = false;
                if lower_half {
                    *ai = 0.0;
                    moved = true;
                } else if *ai > upper - seed {
                    *ai = upper - seed;
                    moved = true;
                }
            }
        }
        match (settled, moved) {
            (true, _) => Settle::Done,
            (false, true) => Settle::Moved(a),
            (false, false) => Settle::Tighten,
        }
    }

    /// One Euler step of size `h` with λ chosen to land on `Σ aᵢtᵢ = 0`.
    fn trial(&self, h: f64) -> Option<Trial> {
        let n = self.a.len();
        let (lambda, u) = match self.slack {
            None => {
                // Σ₊ aᵢe^{hgᵢ}e^{hλ} = Σ₋ aᵢe^{hgᵢ}e^{−hλ} has a closed-form root.
                let pos = log_sum_exp((0..n).filter(|&i| self.labels[i] > 0.0).map(|i| self.u[i] + h * self.growth[i]));
                let neg = log_sum_exp((0..n).filter(|&i| self.labels[i] < 0.0).map(|i| self.u[i] + h * self.growth[i]));
                let lambda = (neg - pos) / (2.0 * h);
                if !lambda.is_finite() {
                    return None;
                }
                let u: Vec<f64> = (0..n)
                    .map(|i| self.u[i] + h * (self.growth[i] + lambda * self.labels[i]))
                    .collect();
                (lambda, u)
            }
            Some(c) => {
                let lambda = self.solve_slack_lambda(h, c)?;
                let u: Vec<f64> = (0..n)
                    .map(|i| self.u[i] + h * c * (self.growth[i] + lambda * self.labels[i]))
                    .collect();
                (lambda, u)
            }
        };
        if u.iter().any(|v| v.is_nan()) {
            return None;
        }
        let a: Vec<f64> = u.iter().map(|&v| self.abundance(v)).collect();
        let (growth, objective) = Self::evaluate(self.labels, self.gram, &a);
        let mut gain = 0.0;
        let mut mass = 0.0;
        for i in 0..n {
            let m = 0.5 * (self.growth[i] + growth[i]) + lambda * self.labels[i];
            gain += (a[i] - self.a[i]) * m;
            mass += a[i] + self.a[i];
        }
        let noise = 1e-14 * (1.0 + lambda.abs()) * mass.max(1.0);
        (objective.is_finite() && gain.is_finite()).then_some(Trial {
            u,
            a,
            growth,
            lambda,
            objective,
            gain,
            noise,
        })
    }

    /// Root of the strictly increasing `φ(λ) = Σ tᵢ C σ(uᵢ + hC(gᵢ + λtᵢ))`.
    fn solve_slack_lambda(&self, h: f64, c: f64) -> Option<f64> {
        let n = self.a.len();
        let phi = |lambda: f64| -> (f64, f64) {
            let mut value = 0.0;
            let mut slope = 0.0;
            for i in 0..n {
                let z = self.u[i] + h * c * (self.growth[i] + lambda * self.labels[i]);
                let s = logistic(z);
                value += self.labels[i] * c * s;
                slope += h * c * c * s * logistic(-z);
            }
            (value, slope)
        };
        let mut lo = self.lambda - 1.0;
        let mut hi = self.lambda + 1.0;
        let mut width = 1.0;
        while phi(lo).0 > 0.0 {
            width *= 2.0;
            lo -= width;
            if !lo.is_finite() {
                return None;
            }
        }
        width = 1.0;
        while phi(hi).0 < 0.0 {
            width *= 2.0;
            hi += width;
            if !hi.is_finite() {
                return None;
            }
        }
        let mut x = self.lambda.clamp(lo, hi);
        for _ in 0..200 {
            let (v, d) = phi(x);
            if v == 0.0 {
                return Some(x);
            }
            if v > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let newton = x - v / d;
            x = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (hi - lo) <= 1e-15 * x.abs().max(1.0) {
                break;
            }
        }
        Some(x)
    }

    fn accept(&mut self, trial: Trial) {
        self.u = trial.u;
        self.a = trial.a;
        self.growth = trial.growth;
        self.lambda = trial.lambda;
        self.objective = trial.objective;
        self.feasible = self.is_feasible();
    }

    /// Rounds numerically extinct (saturated) species to 0 (`C`) and restores
    /// `Σ aᵢtᵢ = 0` by rescaling the free species of the heavier class.
    fn finish(mut self) -> EcoState {
        let lambda = self.instantaneous_lambda();
        let threshold = extinction_threshold(self.slack);
        let upper = self.slack.unwrap_or(f64::INFINITY);
        for a in self.a.iter_mut() {
            if *a < threshold {
                *a = 0.0;
            } else if *a > upper - threshold {
                *a = upper;
            }
        }
        let free = |a: f64| a > 0.0 && a < upper;
        let (mut pos, mut neg, mut pos_free, mut neg_free) = (0.0, 0.0, 0.0, 0.0);
        for (&a, &t) in self.a.iter().zip(self.labels) {
            if t > 0.0 {
                pos += a;
                pos_free += if free(a) { a } else { 0.0 };
            } else {
                neg += a;
                neg_free += if free(a) { a } else { 0.0 };
            }
        }
        let excess = pos - neg;
        let (class, pool) = if excess > 0.0 { (1.0, pos_free) } else { (-1.0, neg_free) };
        if excess != 0.0 && pool > excess.abs() {
            let factor = 1.0 - excess.abs() / pool;
            for (a, &t) in self.a.iter_mut().zip(self.labels) {
                if t == class && free(*a) {
                    *a *= factor;
                }
            }
        }
        EcoState {
            abundances: self.a,
            lambda,
            slack_bound: self.slack,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{dual_objective, kkt_residual, qp_solve, ORACLE_TOL};
    use crate::kernels::{gram_matrix, KernelSpec};
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_point_converges_to_analytic_optimum() {
        let g = gram_matrix(&KernelSpec::Linear, &[vec![-1.0], vec![1.0]]).unwrap();
        let t = [-1.0, 1.0];
        let init = EcoState {
            abundances: vec![0.1, 0.1],
            lambda: 0.0,
            slack_bound: None,
        };
        let s = integrate_to_steady(&init, &t, &g, 1e-10, 200_000).unwrap();
        assert_abs_diff_eq!(s.abundances[0], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(s.abundances[1], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(s.lambda, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn coincident_opposite_pair_is_symmetric() {
        // RBF: one +1 and one −1 at the same spot, plus a separated pair.
        let pts = vec![vec![0.0], vec![0.0], vec![3.0], vec![-3.0]];
        let t = [1.0, -1.0, 1.0, -1.0];
        let g = gram_matrix(&KernelSpec::rbf(1.0), &pts).unwrap();
        let init = EcoState::initial(4, Some(1.0));
        let s = integrate_to_steady(&init, &t, &g, 1e-9, 200_000).unwrap();
        assert_abs_diff_eq!(s.abundances[0], s.abundances[1], epsilon = 1e-9);
        assert!(s.label_balance(&t).abs() < 1e-9);
    }

    #[test]
    fn slack_mode_saturates() {
        let g = gram_matrix(&KernelSpec::Linear, &[vec![-1.0], vec![1.0]]).unwrap();
        let init = EcoState::initial(2, Some(0.1));
        let s = integrate_to_steady(&init, &[-1.0, 1.0], &g, 1e-10, 200_000).unwrap();
        assert_eq!(s.abundances, vec![0.1, 0.1]);
    }

    #[test]
    fn matches_oracle_on_random_separable_set() {
        let pts: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let x = ((i * 37 + 11) % 101) as f64 / 101.0;
                let y = ((i * 59 + 3) % 97) as f64 / 97.0;
                vec![x, y]
            })
            .collect();
        let t: Vec<f64> = pts.iter().map(|p| if p[0] >= 0.5 { 1.0 } else { -1.0 }).collect();
        let g = gram_matrix(&KernelSpec::Linear, &pts).unwrap();
        let s = integrate_to_steady(&EcoState::initial(20, None), &t, &g, 1e-8, 200_000).unwrap();
        let a = qp_solve(&t, &g, None, ORACLE_TOL).unwrap();
        let (ld, lq) = (dual_objective(&s.abundances, &t, &g), dual_objective(&a, &t, &g));
        assert!(((ld - lq) / lq).abs() < 1e-6, "{ld} vs {lq}");
        assert!(kkt_residual(&s, &t, &g) < 1e-6);
    }

    #[test]
    fn non_separable_hard_margin_diverges() {
        let pts = vec![vec![0.0], vec![1.0], vec![0.0], vec![1.0]];
        let t = [1.0, 1.0, -1.0, -1.0];
        let g = gram_matrix(&KernelSpec::Linear, &pts).unwrap();
        let err = integrate_to_steady(&EcoState::initial(4, None), &t, &g, 1e-8, 200_000).unwrap_err();
        assert!(matches!(err, EcoError::Unbounded { .. }), "{err}");
    }

    #[test]
    fn boundary_start_rejected() {
        let g = gram_matrix(&KernelSpec::Linear, &[vec![-1.0], vec![1.0]]).unwrap();
        let init = EcoState {
            abundances: vec![0.0, 0.1],
            lambda: 0.0,
            slack_bound: None,
        };
        assert!(matches!(
            integrate_to_steady(&init, &[-1.0, 1.0], &g, 1e-8, 10),
            Err(EcoError::InvalidState(_))
        ));
    }

    #[test]
    fn step_budget_exhaustion_reports_residual() {
        let g = gram_matrix(&KernelSpec::Linear, &[vec![-1.0], vec![1.0]]).unwrap();
        match integrate_to_steady(&EcoState::initial(2, None), &[-1.0, 1.0], &g, 1e-12, 1) {
            Err(EcoError::NotConverged { steps, residual }) => {
                assert_eq!(steps, 1);
                assert!(residual > 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn objective_is_monotone_on_feasible_manifold() {
        let pts: Vec<Vec<f64>> = (0..15)
            .map(|i| vec![((i * 13) % 17) as f64 / 17.0, ((i * 7) % 19) as f64 / 19.0])
            .collect();
        let t: Vec<f64> = pts.iter().map(|p| if p[0] + p[1] > 1.0 { 1.0 } else { -1.0 }).collect();
        let g = gram_matrix(&KernelSpec::rbf(0.5), &pts).unwrap();
        let mut last = f64::NEG_INFINITY;
        let mut checked = 0;
        integrate_to_steady_with(
            &EcoState::initial(15, None),
            &t,
            &g,
            &IntegratorOptions::default(),
            &mut |step, a, _| {
                if step % 10 == 0 {
                    let l = dual_objective(a, &t, &g);
                    assert!(l >= last - 1e-10, "step {step}: {l} < {last}");
                    last = l;
                    checked += 1;
                }
            },
        )
        .unwrap();
        assert!(checked > 0);
    }
}
