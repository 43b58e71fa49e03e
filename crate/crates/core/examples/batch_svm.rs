//! Batch SVM on the toy linear problem with both solvers.

use ecosvm::data::gen_toy_linear;
use ecosvm::kernels::KernelSpec;
use ecosvm::svm::{fit_batch_with, FitOptions, Solver};

fn main() -> ecosvm::error::Result<()> {
    let train = gen_toy_linear(200, 2, 1)?;
    let test = gen_toy_linear(1000, 2, 2)?;
    for solver in [Solver::Oracle, Solver::Dynamics] {
        let fit = fit_batch_with(&train.points, train.labels()?, KernelSpec::Linear, Some(10.0), &FitOptions::with_solver(solver))?;
        let m = &fit.model;
        println!(
            "{solver:?}: stored {} active {} bias {:+.4} dual {:.6} kkt {:.1e} test accuracy {:.3}",
            m.support_count(),
            m.active_count(),
            m.bias,
            fit.dual_objective,
            fit.kkt_residual,
            m.accuracy(&test.points, test.labels()?)?
        );
    }
    Ok(())
}
