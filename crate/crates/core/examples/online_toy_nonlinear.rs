//! Online RBF SVM with slack on the toy nonlinear problem; prints the
//! accuracy curve.

use ecosvm::data::gen_toy_nonlinear;
use ecosvm::ecosvm::{accuracy_curve, OnlineConfig, OnlineSvm};
use ecosvm::kernels::KernelSpec;

fn main() -> ecosvm::error::Result<()> {
    let train = gen_toy_nonlinear(200, 2, 11)?;
    let test = gen_toy_nonlinear(1000, 2, 12)?;
    let kernel = KernelSpec::rbf(0.1);
    let config = OnlineConfig { init_size: 10, slack_bound: Some(10.0), ..OnlineConfig::default() };
    let (x, t) = (&train.points, train.labels()?);
    let mut online = OnlineSvm::new(x, t, kernel, config)?;

    let mut snaps = vec![online.snapshot()];
    online.stream(&x[10..], &t[10..], 20, &mut |s| snaps.push(s.clone()))?;
    for (seen, acc) in accuracy_curve(&snaps, &test.points, test.labels()?)? {
        println!("{seen:>4}  {acc:.3}");
    }
    println!("active {} stored {}", online.active_count(), online.stored_count());
    Ok(())
}
