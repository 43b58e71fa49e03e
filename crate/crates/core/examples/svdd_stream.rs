//! Streaming SVDD on a Gaussian blob: the sphere grows by invasion and its
//! centre converges to the batch centre.

use ecosvm::data::gen_gaussian_blob;
use ecosvm::ecosvm::Outcome;
use ecosvm::kernels::KernelSpec;
use ecosvm::svdd::{center_similarity, fit_batch_svdd, radius, OnlineSvdd};
use ecosvm::svm::Solver;

fn main() -> ecosvm::error::Result<()> {
    let data = gen_gaussian_blob(200, 3, 4)?;
    let kernel = KernelSpec::rbf(2.0);
    let batch = fit_batch_svdd(&data.points, kernel, Solver::Oracle)?;

    let mut online = OnlineSvdd::with_oracle(&data.points[..10], kernel)?;
    for (i, x) in data.points.iter().enumerate().skip(10) {
        if online.observe(x)? == Outcome::Accepted && (i % 10 == 0 || i < 30) {
            println!(
                "t={:>3} support {:>2} R {:.4} S {:.6}",
                online.seen_count(),
                online.model().support_count(),
                radius(online.model()),
                center_similarity(online.model(), &batch)?
            );
        }
    }
    println!("online R {:.4} with {} points, batch R {:.4} with {}", radius(online.model()), online.model().support_count(), radius(&batch), batch.support_count());
    println!("final S {:.8}", center_similarity(online.model(), &batch)?);
    println!("outlier score of a far point {:.4}", online.model().outlier_score(&[10.0, 10.0, 10.0])?);
    Ok(())
}
