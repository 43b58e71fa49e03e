//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any criterion fails.
//!
//! MNIST is read from `ECOSVM_MNIST_DIR` (default `data/mnist` at the
//! workspace root); `ECOSVM_MNIST_FULL=1` runs the full 4-vs-9 task instead
//! of the 2000/2000 subsample.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use ecosvm::cli::{compare_regions, GridSpec};
use ecosvm::data::{gen_gaussian_blob, gen_toy_linear, gen_toy_nonlinear, load_idx, Dataset};
use ecosvm::dynamics::{
    dual_objective, integrate_to_steady_with, qp_solve, EcoState, IntegratorOptions, ORACLE_TOL,
};
use ecosvm::ecosvm::{OnlineConfig, OnlineSvm, Outcome};
use ecosvm::kernels::{gram_matrix, KernelSpec};
use ecosvm::svdd::{
    center_similarity, fit_batch_svdd, fit_batch_svdd_with, radius, svdd_invasion_rate_with_reference,
    svdd_kkt_residual, OnlineSvdd, SvddModel,
};
use ecosvm::svm::{fit_batch, fit_batch_with, FitOptions, Solver, SvmModel};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = std::result::Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_s: f64, detail: String) -> Check {
    let s = elapsed.as_secs_f64();
    ensure(s <= limit_s, format!("{detail}; {s:.1}s (limit {limit_s}s)"))
}

// ---------------------------------------------------------------- problems

struct Problem {
    points: Vec<Vec<f64>>,
    labels: Vec<f64>,
    kernel: KernelSpec,
    slack: Option<f64>,
}

/// Random problem in `[0,1]^p` split by a random hyperplane through the
/// centre; hard-margin sets keep a gap of 0.1, slack sets flip 15% of labels.
fn problem(seed: u64, n: usize, p: usize, rbf: bool, slack: Option<f64>) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    let score = |x: &[f64]| x.iter().zip(&w).map(|(a, b)| (a - 0.5) * b).sum::<f64>() / norm;
    let (mut points, mut labels) = (Vec::new(), Vec::new());
    while points.len() < n {
        let x: Vec<f64> = (0..p).map(|_| rng.random::<f64>()).collect();
        let s = score(&x);
        if slack.is_none() && s.abs() < 0.05 {
            continue;
        }
        let flip = slack.is_some() && rng.random::<f64>() < 0.15;
        labels.push(if (s >= 0.0) != flip { 1.0 } else { -1.0 });
        points.push(x);
    }
    labels[0] = 1.0;
    labels[1] = -1.0;
    points[0] = w.iter().map(|&v| if v >= 0.0 { 1.0 } else { 0.0 }).collect();
    points[1] = w.iter().map(|&v| if v >= 0.0 { 0.0 } else { 1.0 }).collect();
    Problem {
        points,
        labels,
        kernel: if rbf { KernelSpec::rbf(0.3) } else { KernelSpec::Linear },
        slack,
    }
}

fn unit_grid(p: usize) -> Vec<Vec<f64>> {
    let g = GridSpec { lo: 0.0, hi: 1.0, cells: 10 };
    let pts = g.points(p);
    if p == 1 {
        // 100 points on the line.
        return GridSpec { lo: 0.0, hi: 1.0, cells: 100 }.points(1);
    }
    pts
}

fn online(points: &[Vec<f64>], labels: &[f64], kernel: KernelSpec, c: Option<f64>, ns: usize) -> OnlineSvm {
    let config = OnlineConfig {
        init_size: ns,
        slack_bound: c,
        ..OnlineConfig::default()
    };
    let mut o = OnlineSvm::new(points, labels, kernel, config).expect("seed fit");
    for (x, &t) in points.iter().zip(labels).skip(ns) {
        o.observe(x, t).expect("observe");
    }
    o
}

struct Comparison {
    batch: SvmModel,
    online: SvmModel,
    batch_accuracy: f64,
    online_accuracy: f64,
}

fn compare_run(train: &Dataset, test: &Dataset, kernel: KernelSpec, c: Option<f64>, ns: usize) -> Comparison {
    let t = train.labels().unwrap();
    let tt = test.labels().unwrap();
    let batch = fit_batch(&train.points, t, kernel, c, Solver::Oracle).expect("batch fit");
    let online = online(&train.points, t, kernel, c, ns).model().clone();
    Comparison {
        batch_accuracy: batch.accuracy(&test.points, tt).unwrap(),
        online_accuracy: online.accuracy(&test.points, tt).unwrap(),
        batch,
        online,
    }
}

// ---------------------------------------------------------------- criteria

fn oracle_equivalence() -> Check {
    let start = Instant::now();
    let slacks = [None, Some(0.5), Some(10.0)];
    let (mut worst_rel, mut mismatches) = (0.0f64, 0);
    for k in 0..50u64 {
        let n = 4 + (k as usize * 7) % 27;
        let p = 1 + (k as usize) % 5;
        let pr = problem(1000 + k, n, p, k % 2 == 1, slacks[(k as usize / 2) % 3]);
        let g = gram_matrix(&pr.kernel, &pr.points).unwrap();
        let flow = integrate_to_steady_with(
            &EcoState::initial(n, pr.slack),
            &pr.labels,
            &g,
            &IntegratorOptions::default(),
            &mut |_, _, _| {},
        )
        .map_err(|e| format!("dataset {k}: {e}"))?;
        let exact = qp_solve(&pr.labels, &g, pr.slack, ORACLE_TOL).map_err(|e| format!("dataset {k}: {e}"))?;
        let lf = dual_objective(&flow.state.abundances, &pr.labels, &g);
        let lq = dual_objective(&exact, &pr.labels, &g);
        worst_rel = worst_rel.max((lf - lq).abs() / lq.abs().max(1e-12));
        let mf = fit_batch(&pr.points, &pr.labels, pr.kernel, pr.slack, Solver::Dynamics).unwrap();
        let mq = fit_batch(&pr.points, &pr.labels, pr.kernel, pr.slack, Solver::Oracle).unwrap();
        for x in unit_grid(p) {
            if mf.classify(&x).unwrap() != mq.classify(&x).unwrap() {
                mismatches += 1;
            }
        }
    }
    let detail = format!("50 datasets, worst relative objective gap {worst_rel:.1e}, {mismatches} grid mismatches");
    if worst_rel > 1e-6 || mismatches > 0 {
        return Err(detail);
    }
    within(start.elapsed(), 60.0, detail)
}

fn svdd_model_kkt(m: &SvddModel) -> f64 {
    let g = gram_matrix(&m.kernel, &m.points).unwrap();
    svdd_kkt_residual(&m.multipliers, &g)
}

fn kkt_certification() -> Check {
    let (mut worst, mut fits) = (0.0f64, 0);
    let mut note = |r: f64| {
        worst = worst.max(r);
        fits += 1;
    };
    let slacks = [None, Some(0.5), Some(10.0)];
    for k in 0..30u64 {
        let pr = problem(2000 + k, 5 + k as usize % 20, 1 + k as usize % 4, k % 2 == 0, slacks[k as usize % 3]);
        for solver in [Solver::Oracle, Solver::Dynamics] {
            let fit = fit_batch_with(&pr.points, &pr.labels, pr.kernel, pr.slack, &FitOptions::with_solver(solver))
                .map_err(|e| format!("batch {k}: {e}"))?;
            note(fit.kkt_residual);
            note(fit.model.kkt_residual().unwrap());
        }
    }
    // Every acceptance along online streams, both re-solvers.
    let streams: Vec<(Dataset, KernelSpec, Option<f64>)> = (0..4)
        .flat_map(|s| {
            [
                (gen_toy_linear(120, 2, s).unwrap(), KernelSpec::Linear, None),
                (gen_toy_nonlinear(120, 2, s).unwrap(), KernelSpec::rbf(0.2), Some(10.0)),
            ]
        })
        .collect();
    for (i, (d, kernel, c)) in streams.iter().enumerate() {
        let t = d.labels().unwrap();
        let solver = if i % 4 < 2 { Solver::Oracle } else { Solver::Dynamics };
        let config = OnlineConfig {
            init_size: 10,
            slack_bound: *c,
            solver,
            ..OnlineConfig::default()
        };
        let mut o = OnlineSvm::new(&d.points, t, *kernel, config).map_err(|e| format!("stream {i}: {e}"))?;
        note(o.model().kkt_residual().unwrap());
        for (x, &y) in d.points.iter().zip(t).skip(10) {
            if o.observe(x, y).unwrap().outcome == Outcome::Accepted {
                note(o.model().kkt_residual().unwrap());
            }
        }
    }
    for s in 0..4 {
        let d = gen_gaussian_blob(60, 3, s).unwrap();
        for solver in [Solver::Oracle, Solver::Dynamics] {
            let fit = fit_batch_svdd_with(&d.points, KernelSpec::rbf(2.0), &FitOptions::with_solver(solver)).unwrap();
            note(fit.kkt_residual);
            let mut o = OnlineSvdd::new(&d.points[..5], KernelSpec::rbf(2.0), FitOptions::with_solver(solver)).unwrap();
            for x in &d.points[5..] {
                if o.observe(x).unwrap() == Outcome::Accepted {
                    note(svdd_model_kkt(o.model()));
                }
            }
        }
    }
    ensure(worst < 1e-6, format!("{fits} fitted models, worst KKT residual {worst:.1e}"))
}

fn toy_linear() -> Check {
    let start = Instant::now();
    let (mut gap_sum, mut worst_gap, mut worst_dis) = (0.0, 0.0f64, 0.0f64);
    let runs = 25;
    for s in 0..runs {
        let train = gen_toy_linear(200, 2, s).unwrap();
        let test = gen_toy_linear(1000, 2, s + 1).unwrap();
        let r = compare_run(&train, &test, KernelSpec::Linear, None, 10);
        let gap = (r.batch_accuracy - r.online_accuracy).abs();
        gap_sum += gap;
        worst_gap = worst_gap.max(gap);
        let dis = compare_regions(&r.batch, &r.online, &GridSpec::default()).unwrap().fraction;
        worst_dis = worst_dis.max(dis);
    }
    let mean = gap_sum / runs as f64;
    let detail = format!(
        "{runs} realizations: mean |A_batch - A_online| {mean:.4} (worst {worst_gap:.3}), worst grid disagreement {worst_dis:.4}"
    );
    if mean > 0.02 || worst_dis > 0.05 {
        return Err(detail);
    }
    within(start.elapsed(), 10.0, detail)
}

fn toy_nonlinear() -> Check {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for s in 0..5 {
        let train = gen_toy_nonlinear(200, 2, s).unwrap();
        let test = gen_toy_nonlinear(1000, 2, s + 1).unwrap();
        let r = compare_run(&train, &test, KernelSpec::rbf(0.1), Some(10.0), 10);
        worst = worst.max((r.batch_accuracy - r.online_accuracy).abs());
    }
    let detail = format!("5 seeds, RBF sigma 0.1, C 10: worst |A_batch - A_online| {worst:.3}");
    if worst > 0.03 {
        return Err(detail);
    }
    within(start.elapsed(), 30.0, detail)
}

fn curve_behaviour() -> Check {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut ok = true;
    let setups: [(&str, fn(usize, usize, u64) -> ecosvm::error::Result<Dataset>, usize, KernelSpec, Option<f64>); 2] = [
        ("linear p=100", gen_toy_linear, 100, KernelSpec::Linear, None),
        ("nonlinear p=30", gen_toy_nonlinear, 30, KernelSpec::rbf(2.0), Some(10.0)),
    ];
    for (name, gen, p, kernel, c) in setups {
        let (mut gap, mut n_online, mut n_batch) = (0.0, 0.0, 0.0);
        for s in 0..5u64 {
            let train = gen(1000, p, s).unwrap();
            let test = gen(1000, p, s + 1).unwrap();
            let r = compare_run(&train, &test, kernel, c, 30);
            gap += (r.batch_accuracy - r.online_accuracy) / 5.0;
            n_online += r.online.active_count() as f64 / 5.0;
            n_batch += r.batch.active_count() as f64 / 5.0;
        }
        let rel = (n_online - n_batch).abs() / n_batch;
        ok &= gap.abs() <= 0.03 && rel <= 0.25;
        lines.push(format!(
            "{name}: mean A gap {gap:.3}, N(T) {n_online:.1} vs batch {n_batch:.1} ({:.0}%)",
            rel * 100.0
        ));
    }
    let detail = format!("N=1000, Ns=30, 5 seeds; {}", lines.join("; "));
    if !ok {
        return Err(detail);
    }
    within(start.elapsed(), 300.0, detail)
}

fn mnist_dir() -> PathBuf {
    std::env::var_os("ECOSVM_MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

fn mnist() -> Check {
    let dir = mnist_dir();
    let file = |n: &str| dir.join(n);
    let needed = ["train-images-idx3-ubyte", "train-labels-idx1-ubyte", "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"];
    if let Some(missing) = needed.iter().find(|n| !file(n).is_file()) {
        return Err(format!("MNIST not found ({} missing in {})", missing, dir.display()));
    }
    let full = std::env::var("ECOSVM_MNIST_FULL").is_ok_and(|v| v == "1");
    let load = |img: &str, lab: &str| load_idx(file(img), file(lab), 4, 9).map_err(|e| e.to_string());
    let mut train = load(needed[0], needed[1])?;
    let mut test = load(needed[2], needed[3])?;
    if !full {
        train = train.subsample(2000, 7);
        test = test.subsample(2000, 8);
    }
    let t = train.labels().unwrap().to_vec();
    // σ by hold-out on the last fifth of a shuffled copy of the training set.
    let shuffled = train.shuffled(9);
    let (fit_part, hold) = shuffled.split_at(shuffled.len() * 4 / 5);
    let opts = FitOptions {
        max_batch: 20_000,
        ..FitOptions::default()
    };
    let mut best = (0.0, f64::NEG_INFINITY);
    for sigma in [1.0, 2.0, 4.0, 8.0, 16.0] {
        if let Ok(fit) = fit_batch_with(&fit_part.points, fit_part.labels().unwrap(), KernelSpec::rbf(sigma), None, &opts) {
            let acc = fit.model.accuracy(&hold.points, hold.labels().unwrap()).unwrap();
            if acc > best.1 {
                best = (sigma, acc);
            }
        }
    }
    let kernel = KernelSpec::rbf(best.0);
    let batch = fit_batch_with(&train.points, &t, kernel, None, &opts).map_err(|e| e.to_string())?.model;
    let eco = online(&train.points, &t, kernel, None, 30);
    let tt = test.labels().unwrap();
    let ab = batch.accuracy(&test.points, tt).unwrap();
    let ae = eco.model().accuracy(&test.points, tt).unwrap();
    let active = eco.model().active_count();
    let detail = format!(
        "{} run, {} train / {} test, sigma {}: batch {ab:.4}, EcoSVM {ae:.4}, EcoSVM active {active}, batch active {}",
        if full { "full" } else { "subsample" },
        train.len(),
        test.len(),
        best.0,
        batch.active_count()
    );
    if full {
        ensure(ab >= 0.98 && (ae - ab).abs() <= 0.01 && (500..=1000).contains(&active), detail)
    } else {
        ensure(ab >= 0.96 && (ae - ab).abs() <= 0.02, detail)
    }
}

fn svdd_convergence() -> Check {
    let start = Instant::now();
    let (mut worst_r, mut worst_s) = (0.0f64, 0.0f64);
    let mut supports = Vec::new();
    for sigma in [1.0, 2.0] {
        let kernel = KernelSpec::rbf(sigma);
        for s in 0..5 {
            let d = gen_gaussian_blob(100, 15, s).unwrap();
            let batch = fit_batch_svdd(&d.points, kernel, Solver::Oracle).unwrap();
            let mut o = OnlineSvdd::with_oracle(&d.points[..30], kernel).unwrap();
            for x in &d.points[30..] {
                o.observe(x).unwrap();
            }
            worst_r = worst_r.max((radius(o.model()) - radius(&batch)).abs());
            worst_s = worst_s.max(1.0 - center_similarity(o.model(), &batch).unwrap());
            supports.push(batch.support_count());
        }
    }
    let detail = format!(
        "p=15, N=100, Ns=30, sigma 1 and 2 x 5 seeds: worst |R - R_batch| {worst_r:.1e}, worst 1 - S {worst_s:.1e}, batch support sizes {supports:?}"
    );
    if worst_r > 1e-3 || worst_s > 1e-6 {
        return Err(detail);
    }
    within(start.elapsed(), 60.0, detail)
}

fn runner(cases: u32, seed: u64) -> TestRunner {
    TestRunner::new(Config {
        cases,
        rng_seed: RngSeed::Fixed(seed),
        failure_persistence: None,
        ..Config::default()
    })
}

fn fisvdd_identity() -> Check {
    let kernels = prop_oneof![
        (0.2f64..3.0).prop_map(KernelSpec::rbf),
        Just(KernelSpec::Linear),
        Just(KernelSpec::Polynomial { degree: 2, offset: 1.0 }),
    ];
    let strategy = (1usize..=5)
        .prop_flat_map(move |p| {
            (
                prop::collection::vec(prop::collection::vec(0.0f64..1.0, p), 2..=20),
                prop::collection::vec(-0.5f64..1.5, p),
                kernels.clone(),
            )
        });
    let worst = std::cell::Cell::new(0.0f64);
    let result = runner(1000, 0x15dd).run(&strategy, |(points, query, kernel)| {
        let m = fit_batch_svdd(&points, kernel, Solver::Oracle).unwrap();
        let rates: Vec<f64> = (0..m.support_count())
            .map(|k| svdd_invasion_rate_with_reference(&m, &query, k).unwrap())
            .collect();
        let spread = rates.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - rates.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        worst.set(worst.get().max(spread));
        prop_assert!(spread <= 1e-8, "spread {spread:e} over {} references", rates.len());
        Ok(())
    });
    match result {
        Ok(()) => Ok(format!("1000 model/query pairs, worst spread over references {:.1e}", worst.get())),
        Err(e) => Err(format!("{e}")),
    }
}

fn invasion_soundness() -> Check {
    let (mut rejected, mut accepted, mut worst_rej, mut least_acc) = (0, 0, 0.0f64, f64::INFINITY);
    for s in 0..20u64 {
        let slack = s % 2 == 1;
        let (d, kernel, c) = if slack {
            (gen_toy_nonlinear(50, 2, 300 + s).unwrap(), KernelSpec::rbf(0.3), Some(1.0))
        } else {
            (gen_toy_linear(50, 2, 300 + s).unwrap(), KernelSpec::Linear, None)
        };
        let t = d.labels().unwrap();
        let config = OnlineConfig {
            init_size: 6,
            slack_bound: c,
            ..OnlineConfig::default()
        };
        let mut o = match OnlineSvm::new(&d.points, t, kernel, config) {
            Ok(o) => o,
            Err(e) => return Err(format!("stream {s}: {e}")),
        };
        for (x, &y) in d.points.iter().zip(t).skip(6) {
            let before = o.model().clone();
            match o.observe(x, y).unwrap().outcome {
                Outcome::Rejected => {
                    let mut pts = before.support_points.clone();
                    let mut lab = before.support_labels.clone();
                    pts.push(x.clone());
                    lab.push(y);
                    let g = gram_matrix(&kernel, &pts).unwrap();
                    let a = qp_solve(&lab, &g, c, ORACLE_TOL).unwrap();
                    worst_rej = worst_rej.max(a[a.len() - 1]);
                    rejected += 1;
                }
                Outcome::Accepted => {
                    let m = o.model();
                    let a0 = m
                        .support_points
                        .iter()
                        .position(|p| p == x)
                        .map_or(0.0, |i| m.multipliers[i]);
                    least_acc = least_acc.min(a0);
                    accepted += 1;
                }
                Outcome::SolverFailed => return Err(format!("stream {s}: re-solve failed")),
            }
        }
    }
    // SVDD streams.
    for s in 0..10u64 {
        let d = gen_gaussian_blob(50, 2, 400 + s).unwrap();
        let kernel = KernelSpec::rbf(1.0);
        let mut o = OnlineSvdd::with_oracle(&d.points[..3], kernel).unwrap();
        for x in &d.points[3..] {
            let before = o.model().clone();
            let outcome = o.observe(x).unwrap();
            if outcome == Outcome::SolverFailed {
                return Err(format!("SVDD stream {s}: re-solve failed"));
            }
            if outcome == Outcome::Accepted {
                let m = o.model();
                let a0 = m.points.iter().position(|p| p == x).map_or(0.0, |i| m.multipliers[i]);
                least_acc = least_acc.min(a0);
                accepted += 1;
            } else {
                let mut pts = before.points.clone();
                pts.push(x.clone());
                let fit = fit_batch_svdd_with(&pts, kernel, &FitOptions::default()).unwrap();
                worst_rej = worst_rej.max(fit.multipliers[pts.len() - 1]);
                rejected += 1;
            }
        }
    }
    ensure(
        worst_rej < 1e-6 && least_acc > 1e-6,
        format!(
            "20 SVM + 10 SVDD streams: {rejected} rejections (largest forced multiplier {worst_rej:.1e}), \
             {accepted} acceptances (smallest multiplier {least_acc:.1e})"
        ),
    )
}

fn lyapunov() -> Check {
    let mut samples = 0;
    let mut worst_drop = 0.0f64;
    for s in 0..20u64 {
        let pr = problem(500 + s, 10 + s as usize, 1 + s as usize % 4, s % 2 == 0, None);
        let g = gram_matrix(&pr.kernel, &pr.points).unwrap();
        let mut last = f64::NEG_INFINITY;
        integrate_to_steady_with(
            &EcoState::initial(pr.points.len(), None),
            &pr.labels,
            &g,
            &IntegratorOptions::default(),
            &mut |step, a, _| {
                if step % 10 == 0 {
                    let l = dual_objective(a, &pr.labels, &g);
                    worst_drop = worst_drop.max(last - l);
                    last = l;
                    samples += 1;
                }
            },
        )
        .map_err(|e| format!("trajectory {s}: {e}"))?;
    }
    ensure(
        worst_drop <= 1e-10,
        format!("20 trajectories, {samples} samples, largest objective decrease {worst_drop:.1e}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("oracle equivalence", oracle_equivalence),
        ("KKT certification", kkt_certification),
        ("toy linear reproduction", toy_linear),
        ("toy nonlinear reproduction", toy_nonlinear),
        ("curve behaviour", curve_behaviour),
        ("MNIST 4 vs 9", mnist),
        ("SVDD convergence", svdd_convergence),
        ("FISVDD identity", fisvdd_identity),
        ("invasion soundness", invasion_soundness),
        ("Lyapunov monotonicity", lyapunov),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        if filter.as_ref().is_some_and(|f| !name.contains(f.as_str())) {
            continue;
        }
        let (status, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("acceptance {:>2} {status} {name}: {detail}", k + 1);
    }
    if failed > 0 {
        println!("acceptance: {failed} criteria failed");
        std::process::exit(1);
    }
}
