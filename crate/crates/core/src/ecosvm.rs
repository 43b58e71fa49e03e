//! Online SVM training by ecological invasion.
//!
//! Points arrive one at a time. A newcomer is introduced at vanishing
//! abundance; if its initial per-capita growth rate is positive it invades
//! and the community is re-equilibrated, otherwise it goes extinct at once
//! and is forgotten. Only support vectors are ever stored.

use log::{debug, info, warn};

use crate::dynamics::{
    extinction_threshold, integrate_to_steady_with, qp_solve_warm, EcoState, IntegratorOptions,
    ORACLE_TOL,
};
use crate::error::{check_dim, check_labels, EcoError, Result};
use crate::kernels::{GramMatrix, KernelSpec};
use crate::svm::{fit_batch_with, is_active, FitOptions, Solver, SvmModel};

#[derive(Clone, Debug, PartialEq)]
pub struct OnlineConfig {
    /// Number of seed points solved in batch before streaming (`N_s`).
    pub init_size: usize,
    pub slack_bound: Option<f64>,
    /// Solver used to re-equilibrate after a successful invasion.
    pub solver: Solver,
    /// A point invades only if its growth rate exceeds this.
    pub tol_inv: f64,
    pub oracle_tol: f64,
    pub integrator: IntegratorOptions,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        OnlineConfig {
            init_size: 10,
            slack_bound: None,
            solver: Solver::Oracle,
            tol_inv: 1e-10,
            oracle_tol: ORACLE_TOL,
            integrator: IntegratorOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Accepted,
    Rejected,
    /// The point invaded but re-equilibration failed; it was discarded.
    SolverFailed,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub outcome: Outcome,
    /// `None` when no rate could be computed (slack mode, empty active set).
    pub rate: Option<f64>,
}

impl Observation {
    pub fn accepted(&self) -> bool {
        self.outcome == Outcome::Accepted
    }
}

/// Metrics recorded after `seen` observations.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub seen: usize,
    pub accepted: usize,
    pub stored: usize,
    pub active: usize,
    pub model: SvmModel,
}

/// The surviving community and its bookkeeping.
#[derive(Clone, Debug)]
pub struct OnlineSvm {
    model: SvmModel,
    eco: EcoState,
    gram: GramMatrix,
    seen: usize,
    accepted: usize,
    config: OnlineConfig,
}

/// Solves the first `n_s` seed points in batch and keeps the survivors.
pub fn init_online(
    seed_points: &[Vec<f64>],
    seed_labels: &[f64],
    kernel: KernelSpec,
    slack_bound: Option<f64>,
    n_s: usize,
) -> Result<OnlineSvm> {
    let config = OnlineConfig {
        init_size: n_s,
        slack_bound,
        ..OnlineConfig::default()
    };
    OnlineSvm::new(seed_points, seed_labels, kernel, config)
}

impl OnlineSvm {
    pub fn new(seed_points: &[Vec<f64>], seed_labels: &[f64], kernel: KernelSpec, config: OnlineConfig) -> Result<Self> {
        check_dim(seed_points.len(), seed_labels.len())?;
        let n_s = config.init_size;
        if n_s < 2 {
            return Err(EcoError::Config(format!("init size must be at least 2, got {n_s}")));
        }
        if seed_points.len() < n_s {
            return Err(EcoError::Config(format!(
                "need {n_s} seed points, got {}",
                seed_points.len()
            )));
        }
        let (points, labels) = (&seed_points[..n_s], &seed_labels[..n_s]);
        let p = points[0].len();
        if n_s <= p {
            warn!("init size {n_s} does not exceed the input dimension {p}; the seed problem has flat directions");
        }
        let opts = FitOptions {
            solver: config.solver,
            integrator: config.integrator.clone(),
            oracle_tol: config.oracle_tol,
            ..FitOptions::default()
        };
        let fit = fit_batch_with(points, labels, kernel, config.slack_bound, &opts)?;
        let model = fit.model;
        let gram = crate::kernels::gram_matrix(&kernel, &model.support_points)?;
        let eco = EcoState {
            abundances: model.multipliers.clone(),
            lambda: -model.bias,
            slack_bound: config.slack_bound,
        };
        info!(
            "seeded with {n_s} points, {} survivors ({} active)",
            model.support_count(),
            model.active_count()
        );
        Ok(OnlineSvm {
            model,
            eco,
            gram,
            seen: n_s,
            accepted: 0,
            config,
        })
    }

    pub fn model(&self) -> &SvmModel {
        &self.model
    }

    pub fn eco(&self) -> &EcoState {
        &self.eco
    }

    pub fn config(&self) -> &OnlineConfig {
        &self.config
    }

    /// Points seen so far (`T`), seed included.
    pub fn seen_count(&self) -> usize {
        self.seen
    }

    /// Successful invasions after seeding.
    pub fn accepted_count(&self) -> usize {
        self.accepted
    }

    pub fn stored_count(&self) -> usize {
        self.model.support_count()
    }

    /// Active support vectors `N(T)`: `aᵢ > 0` (separable) or `0 < aᵢ < C`.
    pub fn active_count(&self) -> usize {
        self.model.active_count()
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            seen: self.seen,
            accepted: self.accepted,
            stored: self.stored_count(),
            active: self.active_count(),
            model: self.model.clone(),
        }
    }

    /// `Σⱼ tⱼK(x, xⱼ)aⱼ` over the survivors.
    fn score(&self, x: &[f64]) -> f64 {
        self.model.score(x) - self.model.bias
    }

    fn check_point(&self, x0: &[f64], t0: f64) -> Result<()> {
        check_dim(self.model.dim(), x0.len())?;
        check_labels(&[t0])
    }

    /// Growth rate of an invader using the stored environmental factor:
    /// `1 + λt₀ − t₀ Σⱼ tⱼK(x₀,xⱼ)aⱼ`.
    pub fn growth_rate_with_lambda(&self, x0: &[f64], t0: f64) -> Result<f64> {
        self.check_point(x0, t0)?;
        Ok(1.0 + self.eco.lambda * t0 - t0 * self.score(x0))
    }

    /// Growth rate with `λ` eliminated through the steady state of the stored
    /// point `k`: `1 − tₖt₀ + t₀ Σᵢ tᵢ(K(xᵢ,xₖ) − K(xᵢ,x₀))aᵢ`.
    pub fn invasion_rate_with_reference(&self, x0: &[f64], t0: f64, k: usize) -> Result<f64> {
        self.check_point(x0, t0)?;
        if k >= self.stored_count() {
            return Err(EcoError::DimensionMismatch {
                expected: self.stored_count(),
                found: k,
            });
        }
        let m = &self.model;
        let tk = m.support_labels[k];
        let sum: f64 = (0..m.support_count())
            .map(|i| m.support_labels[i] * m.multipliers[i] * (self.gram.get(i, k) - m.kernel.eval(&m.support_points[i], x0)))
            .sum();
        Ok(1.0 - tk * t0 + t0 * sum)
    }

    /// The active support vector whose multiplier is closest to `C/2`.
    fn reference_index(&self) -> Option<usize> {
        let c = self.config.slack_bound?;
        let m = &self.model;
        (0..m.support_count())
            .filter(|&i| is_active(m.multipliers[i], Some(c)))
            .min_by(|&i, &j| {
                let di = (m.multipliers[i] - 0.5 * c).abs();
                let dj = (m.multipliers[j] - 0.5 * c).abs();
                di.total_cmp(&dj)
            })
    }

    /// Initial per-capita growth rate of `(x₀, t₀)` introduced at vanishing
    /// abundance; the point invades iff this is positive.
    ///
    /// Slack mode eliminates `λ` through the most interior active support
    /// vector and fails with [`EcoError::NoActiveSupport`] when none exists.
    pub fn invasion_rate(&self, x0: &[f64], t0: f64) -> Result<f64> {
        match self.config.slack_bound {
            None => self.growth_rate_with_lambda(x0, t0),
            Some(_) => {
                self.check_point(x0, t0)?;
                let k = self.reference_index().ok_or(EcoError::NoActiveSupport)?;
                self.invasion_rate_with_reference(x0, t0, k)
            }
        }
    }

    /// Presents one point to the community.
    pub fn observe(&mut self, x0: &[f64], t0: f64) -> Result<Observation> {
        let rate = match self.invasion_rate(x0, t0) {
            Ok(r) => Some(r),
            Err(EcoError::NoActiveSupport) => {
                info!("no active support vector at T = {}; accepting and re-solving", self.seen + 1);
                None
            }
            Err(e) => return Err(e),
        };
        self.seen += 1;
        if rate.is_some_and(|r| r <= self.config.tol_inv) {
            return Ok(Observation {
                outcome: Outcome::Rejected,
                rate,
            });
        }
        match self.invade(x0, t0) {
            Ok(()) => {
                self.accepted += 1;
                Ok(Observation {
                    outcome: Outcome::Accepted,
                    rate,
                })
            }
            Err(e @ (EcoError::NotConverged { .. } | EcoError::Unbounded { .. })) => {
                warn!("point {} invaded but re-equilibration failed ({e}); discarded", self.seen);
                Ok(Observation {
                    outcome: Outcome::SolverFailed,
                    rate,
                })
            }
            Err(e) => Err(e),
        }
    }

    fn invade(&mut self, x0: &[f64], t0: f64) -> Result<()> {
        let kernel = self.model.kernel;
        let c = self.config.slack_bound;
        let mut gram = self.gram.clone();
        gram.push(&kernel.row(x0, &self.model.support_points), kernel.self_similarity(x0));
        let mut labels = self.model.support_labels.clone();
        labels.push(t0);
        let n = labels.len();

        let a = match self.config.solver {
            Solver::Oracle => {
                let mut start = self.eco.abundances.clone();
                start.push(0.0);
                qp_solve_warm(&labels, &gram, c, self.config.oracle_tol, start)?
            }
            Solver::Dynamics => {
                let upper = c.unwrap_or(f64::INFINITY);
                let a0 = c.unwrap_or(1.0).min(1.0) / (2.0 * n as f64);
                let nudge = 0.01 * a0;
                let mut start: Vec<f64> = self
                    .eco
                    .abundances
                    .iter()
                    .map(|&a| a.max(nudge).min(upper - nudge))
                    .collect();
                start.push(a0);
                let init = EcoState {
                    abundances: start,
                    lambda: self.eco.lambda,
                    slack_bound: c,
                };
                integrate_to_steady_with(&init, &labels, &gram, &self.config.integrator, &mut |_, _, _| {})?
                    .state
                    .abundances
            }
        };

        let mut points = self.model.support_points.clone();
        points.push(x0.to_vec());
        let model = SvmModel::from_multipliers(kernel, &points, &labels, &gram, &a, c);
        let threshold = extinction_threshold(c);
        let keep: Vec<usize> = (0..n).filter(|&i| a[i] >= threshold).collect();
        debug!(
            "T = {}: {} stored after invasion, {} went extinct",
            self.seen,
            keep.len(),
            n - keep.len()
        );
        self.gram = gram.select(&keep);
        self.eco = EcoState {
            abundances: model.multipliers.clone(),
            lambda: -model.bias,
            slack_bound: c,
        };
        self.model = model;
        Ok(())
    }

    /// Observes every point in order, calling `on_snapshot` every `every`
    /// observations and after the last one.
    pub fn stream(
        &mut self,
        points: &[Vec<f64>],
        labels: &[f64],
        every: usize,
        on_snapshot: &mut dyn FnMut(&Snapshot),
    ) -> Result<()> {
        check_dim(points.len(), labels.len())?;
        let every = every.max(1);
        for (i, (x, &t)) in points.iter().zip(labels).enumerate() {
            self.observe(x, t)?;
            if (i + 1) % every == 0 || i + 1 == points.len() {
                on_snapshot(&self.snapshot());
            }
        }
        Ok(())
    }
}

/// Accuracy `A(T)` of every snapshot on a labelled test set.
pub fn accuracy_curve(snapshots: &[Snapshot], points: &[Vec<f64>], labels: &[f64]) -> Result<Vec<(usize, f64)>> {
    if points.is_empty() {
        return Err(EcoError::Empty("accuracy curve needs a test set"));
    }
    snapshots
        .iter()
        .map(|s| Ok((s.seen, s.model.accuracy(points, labels)?)))
        .collect()
}
