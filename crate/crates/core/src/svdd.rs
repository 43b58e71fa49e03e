//! Support vector data description: the smallest feature-space sphere
//! enclosing the data, learned in batch or online by invasion.
//!
//! The dual maximizes `Σ aᵢKᵢᵢ − Σᵢⱼ aᵢaⱼKᵢⱼ` on the simplex `Σ aᵢ = 1`,
//! `aᵢ ≥ 0`. Its ecological form is a replicator equation
//!
//! ```text
//! daᵢ/dt = aᵢ (λ + ½Kᵢᵢ − Σⱼ Kᵢⱼaⱼ),   dλ/dt = 1 − Σ aₙ
//! ```
//!
//! where the `½Kᵢᵢ` term is the constant `½` of normalized kernels.

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::dynamics::{extinction_threshold, IntegratorOptions, PairwiseQp, ORACLE_TOL};
use crate::ecosvm::Outcome;
use crate::error::{check_dim, EcoError, Result};
use crate::kernels::{gram_matrix, GramMatrix, KernelSpec};
use crate::svm::{FitOptions, Solver};

/// `Σ aᵢKᵢᵢ − Σᵢⱼ aᵢaⱼKᵢⱼ`
pub fn svdd_dual_objective(a: &[f64], gram: &GramMatrix) -> f64 {
    assert_eq!(a.len(), gram.len(), "multipliers and gram differ in size");
    let ka = gram_times(gram, a);
    a.iter()
        .enumerate()
        .map(|(i, &ai)| ai * (gram.get(i, i) - ka[i]))
        .sum()
}

fn gram_times(gram: &GramMatrix, a: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    for (j, &aj) in a.iter().enumerate() {
        if aj == 0.0 {
            continue;
        }
        for (o, k) in out.iter_mut().zip(gram.row(j)) {
            *o += aj * k;
        }
    }
    out
}

/// Per-capita rates `½Kᵢᵢ − (Ka)ᵢ` before the `λ` term.
fn growth(gram: &GramMatrix, a: &[f64]) -> Vec<f64> {
    gram_times(gram, a)
        .iter()
        .enumerate()
        .map(|(i, ka)| 0.5 * gram.get(i, i) - ka)
        .collect()
}

/// Largest violation of the SVDD optimality conditions: `|Σ aᵢ − 1|`,
/// negativity, `aᵢ|rᵢ|` on the support and `max(rᵢ, 0)` off it, with
/// `rᵢ = λ + ½Kᵢᵢ − (Ka)ᵢ` and `λ` averaged over the support.
pub fn svdd_kkt_residual(a: &[f64], gram: &GramMatrix) -> f64 {
    assert_eq!(a.len(), gram.len(), "multipliers and gram differ in size");
    let g = growth(gram, a);
    let threshold = extinction_threshold(None);
    let support: Vec<usize> = (0..a.len()).filter(|&i| a[i] > threshold).collect();
    let lambda = if support.is_empty() {
        0.0
    } else {
        -support.iter().map(|&i| g[i]).sum::<f64>() / support.len() as f64
    };
    let mut worst = (a.iter().sum::<f64>() - 1.0).abs();
    for (i, (&ai, gi)) in a.iter().zip(&g).enumerate() {
        let r = gi + lambda;
        worst = worst.max((-ai).max(0.0));
        worst = worst.max(if support.contains(&i) { (ai * r).abs() } else { r.max(0.0) });
    }
    worst
}

/// A fitted sphere, holding only its support vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvddModel {
    pub kernel: KernelSpec,
    pub points: Vec<Vec<f64>>,
    pub multipliers: Vec<f64>,
    pub radius_sq: f64,
}

impl SvddModel {
    /// Keeps the points above the extinction threshold, renormalizes the
    /// multipliers onto the simplex and sets the radius.
    fn from_multipliers(kernel: KernelSpec, points: &[Vec<f64>], a: &[f64]) -> Result<(Self, Vec<usize>)> {
        let threshold = extinction_threshold(None);
        let keep: Vec<usize> = (0..a.len()).filter(|&i| a[i] >= threshold).collect();
        let total: f64 = keep.iter().map(|&i| a[i]).sum();
        if keep.is_empty() || total <= 0.0 {
            return Err(EcoError::Degenerate("every multiplier vanished".into()));
        }
        let mut model = SvddModel {
            kernel,
            points: keep.iter().map(|&i| points[i].clone()).collect(),
            multipliers: keep.iter().map(|&i| a[i] / total).collect(),
            radius_sq: 0.0,
        };
        model.radius_sq = model.radius_sq_from(&gram_matrix(&kernel, &model.points)?);
        Ok((model, keep))
    }

    fn radius_sq_from(&self, gram: &GramMatrix) -> f64 {
        let ka = gram_times(gram, &self.multipliers);
        let aka: f64 = self.multipliers.iter().zip(&ka).map(|(a, k)| a * k).sum();
        (0..self.points.len())
            .filter(|&i| self.multipliers[i] > 0.0)
            .map(|i| gram.get(i, i) - 2.0 * ka[i] + aka)
            .fold(0.0, f64::max)
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn support_count(&self) -> usize {
        self.points.len()
    }

    /// `μᵀμ = Σᵢⱼ aᵢaⱼK(xᵢ,xⱼ)`
    fn center_norm_sq(&self) -> f64 {
        let mut s = 0.0;
        for (xi, ai) in self.points.iter().zip(&self.multipliers) {
            for (xj, aj) in self.points.iter().zip(&self.multipliers) {
                s += ai * aj * self.kernel.eval(xi, xj);
            }
        }
        s
    }

    /// Squared feature-space distance from `x` to the center.
    fn distance_sq(&self, x: &[f64]) -> f64 {
        let cross: f64 = self
            .points
            .iter()
            .zip(&self.multipliers)
            .map(|(p, a)| a * self.kernel.eval(x, p))
            .sum();
        self.kernel.self_similarity(x) - 2.0 * cross + self.center_norm_sq()
    }

    /// Squared distance to the center minus `R²`; positive outside the sphere.
    pub fn outlier_score(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.distance_sq(x) - self.radius_sq)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: SvddModel = serde_json::from_str(s)?;
        model.kernel.validate()?;
        check_dim(model.points.len(), model.multipliers.len())?;
        Ok(model)
    }
}

/// Squared distance to the center minus `R²`; positive flags an outlier.
pub fn outlier_score(model: &SvddModel, x: &[f64]) -> Result<f64> {
    model.outlier_score(x)
}

/// `R = √R²`, `R² = maxᵢ [Kᵢᵢ − 2Σⱼ Kᵢⱼaⱼ + Σⱼₖ Kⱼₖaⱼaₖ]` over `aᵢ > 0`.
pub fn radius(model: &SvddModel) -> f64 {
    model.radius_sq.sqrt()
}

/// Growth rate of `x₀` with `λ` eliminated through stored point `k`:
/// `½(K(x₀,x₀) − Kₖₖ) + Σᵢ aᵢ[K(xₖ,xᵢ) − K(x₀,xᵢ)]`.
pub fn svdd_invasion_rate_with_reference(model: &SvddModel, x0: &[f64], k: usize) -> Result<f64> {
    check_dim(model.dim(), x0.len())?;
    if k >= model.support_count() {
        return Err(EcoError::DimensionMismatch {
            expected: model.support_count(),
            found: k,
        });
    }
    let kern = &model.kernel;
    let xk = &model.points[k];
    let sum: f64 = model
        .points
        .iter()
        .zip(&model.multipliers)
        .map(|(xi, ai)| ai * (kern.eval(xk, xi) - kern.eval(x0, xi)))
        .sum();
    Ok(0.5 * (kern.self_similarity(x0) - kern.self_similarity(xk)) + sum)
}

/// Growth rate of `x₀` introduced at vanishing abundance, referenced to the
/// stored point with the largest multiplier. Positive iff `x₀` lies outside
/// the sphere.
pub fn svdd_invasion_rate(model: &SvddModel, x0: &[f64]) -> Result<f64> {
    let k = (0..model.support_count())
        .max_by(|&i, &j| model.multipliers[i].total_cmp(&model.multipliers[j]))
        .ok_or(EcoError::Empty("model has no stored points"))?;
    svdd_invasion_rate_with_reference(model, x0, k)
}

/// Cosine of the angle between two sphere centers in feature space.
pub fn center_similarity(model: &SvddModel, reference: &SvddModel) -> Result<f64> {
    if model.kernel != reference.kernel {
        return Err(EcoError::InvalidKernel("models use different kernels".into()));
    }
    let (na, nb) = (model.center_norm_sq(), reference.center_norm_sq());
    if !(na > 0.0 && nb > 0.0) {
        return Err(EcoError::Degenerate("center has zero norm".into()));
    }
    let mut cross = 0.0;
    for (xi, ai) in model.points.iter().zip(&model.multipliers) {
        for (xj, aj) in reference.points.iter().zip(&reference.multipliers) {
            cross += ai * aj * model.kernel.eval(xi, xj);
        }
    }
    Ok(cross / (na * nb).sqrt())
}

#[derive(Clone, Debug)]
pub struct SvddFit {
    pub model: SvddModel,
    /// One multiplier per input point (zeros included).
    pub multipliers: Vec<f64>,
    pub dual_objective: f64,
    pub kkt_residual: f64,
}

pub fn fit_batch_svdd(points: &[Vec<f64>], kernel: KernelSpec, solver: Solver) -> Result<SvddModel> {
    fit_batch_svdd_with(points, kernel, &FitOptions::with_solver(solver)).map(|f| f.model)
}

pub fn fit_batch_svdd_with(points: &[Vec<f64>], kernel: KernelSpec, opts: &FitOptions) -> Result<SvddFit> {
    if points.is_empty() {
        return Err(EcoError::Empty("SVDD needs at least one point"));
    }
    if points.len() > opts.max_batch {
        return Err(EcoError::TooLarge {
            n: points.len(),
            limit: opts.max_batch,
        });
    }
    let gram = gram_matrix(&kernel, points)?;
    let n = points.len();
    let a = solve(&gram, vec![1.0 / n as f64; n], opts)?;
    let (model, _) = SvddModel::from_multipliers(kernel, points, &a)?;
    Ok(SvddFit {
        dual_objective: svdd_dual_objective(&a, &gram),
        kkt_residual: svdd_kkt_residual(&a, &gram),
        multipliers: a,
        model,
    })
}

fn solve(gram: &GramMatrix, start: Vec<f64>, opts: &FitOptions) -> Result<Vec<f64>> {
    let n = gram.len();
    if n == 1 {
        return Ok(vec![1.0]);
    }
    match opts.solver {
        Solver::Oracle => {
            let signs = vec![1.0; n];
            let linear: Vec<f64> = (0..n).map(|i| -gram.get(i, i)).collect();
            let qp = PairwiseQp {
                gram,
                signs: &signs,
                scale: 2.0,
                linear: &linear,
                upper: f64::INFINITY,
                cap: 1e6,
                max_iter: 20_000_000,
            };
            let sol = qp.solve(start, opts.oracle_tol)?;
            debug!("SVDD oracle converged in {} pair updates", sol.iterations);
            Ok(sol.a)
        }
        Solver::Dynamics => replicator(gram, &start, &opts.integrator),
    }
}

/// Integrates the replicator flow from an interior start.
///
/// Same scheme as the SVM integrator: Euler steps in `ln a` with `λ` slaved
/// to `Σ aᵢ = 1` (here a softmax normalization), steps that lower the
/// objective are halved, and stalled species are settled onto the boundary
/// or reseeded before integration resumes with a tighter tolerance.
fn replicator(gram: &GramMatrix, start: &[f64], opts: &IntegratorOptions) -> Result<Vec<f64>> {
    let n = gram.len();
    let seed = 0.5 / n as f64;
    let rate_tol = 10.0 * opts.tol;
    let total: f64 = start.iter().sum();
    let mut a: Vec<f64> = start.iter().map(|v| v / total).collect();
    let mut g = growth(gram, &a);
    let mut h = opts.initial_step;
    let mut ceiling = opts.max_step;
    let mut round_tol = opts.tol;
    let mut steps = 0;

    let lambda_of = |a: &[f64], g: &[f64]| -a.iter().zip(g).map(|(x, y)| x * y).sum::<f64>() / a.iter().sum::<f64>();
    let residual = |a: &[f64], g: &[f64]| {
        let lambda = lambda_of(a, g);
        a.iter().zip(g).map(|(x, y)| (x * (y + lambda)).abs()).fold(0.0, f64::max)
    };

    for _ in 0..60 {
        loop {
            let r = residual(&a, &g);
            if r < round_tol {
                break;
            }
            if steps >= opts.max_steps {
                return Err(EcoError::NotConverged { steps, residual: r });
            }
            loop {
                // aᵢ' ∝ aᵢ e^{h gᵢ}; the normalization is the slaved λ.
                let logs: Vec<f64> = a.iter().zip(&g).map(|(x, y)| x.ln() + h * y).collect();
                let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = logs.iter().map(|l| (l - m).exp()).sum();
                let trial: Vec<f64> = logs.iter().map(|l| (l - m).exp() / z).collect();
                let gt = growth(gram, &trial);
                let lambda = lambda_of(&trial, &gt);
                let (mut gain, mut mass) = (0.0, 0.0);
                for i in 0..n {
                    gain += (trial[i] - a[i]) * (g[i] + gt[i] + 2.0 * lambda);
                    mass += trial[i] + a[i];
                }
                let noise = 1e-14 * (1.0 + lambda.abs()) * mass;
                if gain.is_finite() && gain >= -noise {
                    a = trial;
                    g = gt;
                    ceiling = (ceiling * 1.02).min(opts.max_step);
                    h = (h * 1.5).min(ceiling);
                    break;
                }
                ceiling = ceiling.min(0.5 * h);
                h *= 0.5;
                if h < 1e-300 {
                    return Err(EcoError::NotConverged {
                        steps,
                        residual: residual(&a, &g),
                    });
                }
            }
            steps += 1;
        }

        let lambda = lambda_of(&a, &g);
        let mut settled = true;
        let mut moved = false;
        for (x, y) in a.iter_mut().zip(&g) {
            let r = y + lambda;
            if r > rate_tol && *x < seed {
                settled = false;
                moved = true;
                *x = seed;
            } else if r < -rate_tol && *x > 0.0 {
                settled = false;
                moved = true;
                *x = 0.0;
            } else if r.abs() > rate_tol && *x > 0.0 {
                settled = false;
            }
        }
        if settled {
            debug!("replicator steady state after {steps} steps");
            let threshold = extinction_threshold(None);
            for x in a.iter_mut() {
                if *x < threshold {
                    *x = 0.0;
                }
            }
            let total: f64 = a.iter().sum();
            return Ok(a.into_iter().map(|x| x / total).collect());
        }
        if moved {
            let total: f64 = a.iter().sum();
            a.iter_mut().for_each(|x| *x /= total);
            g = growth(gram, &a);
            h = opts.initial_step.min(ceiling);
        }
        round_tol = (0.1 * round_tol).max(1e-13);
    }
    Err(EcoError::NotConverged {
        steps,
        residual: residual(&a, &g),
    })
}

/// Online SVDD: the sphere grows only when a point lands outside it.
#[derive(Clone, Debug)]
pub struct OnlineSvdd {
    model: SvddModel,
    gram: GramMatrix,
    seen: usize,
    accepted: usize,
    opts: FitOptions,
    tol_inv: f64,
}

impl OnlineSvdd {
    /// Seeds with a batch fit of `points` (a single point is allowed).
    pub fn new(points: &[Vec<f64>], kernel: KernelSpec, opts: FitOptions) -> Result<Self> {
        let model = fit_batch_svdd_with(points, kernel, &opts)?.model;
        let gram = gram_matrix(&kernel, &model.points)?;
        info!("SVDD seeded with {} points, {} on the boundary", points.len(), model.support_count());
        Ok(OnlineSvdd {
            model,
            gram,
            seen: points.len(),
            accepted: 0,
            opts,
            tol_inv: 1e-10,
        })
    }

    pub fn with_oracle(points: &[Vec<f64>], kernel: KernelSpec) -> Result<Self> {
        Self::new(
            points,
            kernel,
            FitOptions {
                oracle_tol: ORACLE_TOL,
                ..FitOptions::default()
            },
        )
    }

    pub fn model(&self) -> &SvddModel {
        &self.model
    }

    pub fn seen_count(&self) -> usize {
        self.seen
    }

    pub fn accepted_count(&self) -> usize {
        self.accepted
    }

    /// Presents one point. A point that invades but whose re-equilibration
    /// fails is discarded and the model is left unchanged.
    pub fn observe(&mut self, x0: &[f64]) -> Result<Outcome> {
        let rate = svdd_invasion_rate(&self.model, x0)?;
        self.seen += 1;
        if rate <= self.tol_inv {
            return Ok(Outcome::Rejected);
        }
        let kernel = self.model.kernel;
        let mut gram = self.gram.clone();
        gram.push(&kernel.row(x0, &self.model.points), kernel.self_similarity(x0));
        let n = gram.len();
        let start = match self.opts.solver {
            Solver::Oracle => {
                let mut s = self.model.multipliers.clone();
                s.push(0.0);
                s
            }
            Solver::Dynamics => {
                let a0 = 0.5 / n as f64;
                let mut s: Vec<f64> = self.model.multipliers.iter().map(|a| a.max(0.01 * a0)).collect();
                s.push(a0);
                s
            }
        };
        let a = match solve(&gram, start, &self.opts) {
            Ok(a) => a,
            Err(e @ EcoError::NotConverged { .. }) => {
                warn!("point {} invaded the sphere but re-equilibration failed ({e}); discarded", self.seen);
                return Ok(Outcome::SolverFailed);
            }
            Err(e) => return Err(e),
        };
        let mut points = self.model.points.clone();
        points.push(x0.to_vec());
        let (model, keep) = SvddModel::from_multipliers(kernel, &points, &a)?;
        self.gram = gram.select(&keep);
        self.model = model;
        self.accepted += 1;
        Ok(Outcome::Accepted)
    }
}
