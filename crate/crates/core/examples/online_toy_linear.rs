//! Online learning by invasion on the toy linear problem, compared with the
//! batch solution on a decision-region grid.

use ecosvm::cli::{compare_regions, GridSpec};
use ecosvm::data::gen_toy_linear;
use ecosvm::ecosvm::{OnlineConfig, OnlineSvm};
use ecosvm::kernels::KernelSpec;
use ecosvm::svm::{fit_batch, Solver};

fn main() -> ecosvm::error::Result<()> {
    let train = gen_toy_linear(200, 2, 5)?;
    let test = gen_toy_linear(1000, 2, 6)?;
    let (x, t) = (&train.points, train.labels()?);

    let config = OnlineConfig { init_size: 10, ..OnlineConfig::default() };
    let mut online = OnlineSvm::new(x, t, KernelSpec::Linear, config)?;
    for (xi, &ti) in x.iter().zip(t).skip(10) {
        let obs = online.observe(xi, ti)?;
        if obs.accepted() {
            println!("t={:>3} accepted (rate {:+.3}) stored {}", online.seen_count(), obs.rate.unwrap_or(f64::NAN), online.stored_count());
        }
    }

    let batch = fit_batch(x, t, KernelSpec::Linear, None, Solver::Oracle)?;
    let model = online.model();
    let (yt, tt) = (&test.points, test.labels()?);
    println!("online accuracy {:.3}, batch {:.3}", model.accuracy(yt, tt)?, batch.accuracy(yt, tt)?);
    println!("accepted {} of {}", online.accepted_count(), online.seen_count());
    let regions = compare_regions(model, &batch, &GridSpec::default())?;
    println!("grid disagreement {:.4}", regions.fraction);
    Ok(())
}
