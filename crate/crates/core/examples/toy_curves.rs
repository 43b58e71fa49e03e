//! Accuracy and support-vector curves averaged over seeds, written as CSV to
//! stdout.

use ecosvm::data::gen_toy_linear;
use ecosvm::ecosvm::{OnlineConfig, OnlineSvm};
use ecosvm::kernels::KernelSpec;

const SEEDS: u64 = 5;
const N: usize = 400;
const EVERY: usize = 20;

fn main() -> ecosvm::error::Result<()> {
    let rows = (N - 10) / EVERY + 1;
    let mut acc = vec![0.0; rows];
    let mut active = vec![0.0; rows];
    let mut seen = vec![0; rows];
    for seed in 0..SEEDS {
        let train = gen_toy_linear(N, 10, 2 * seed)?;
        let test = gen_toy_linear(1000, 10, 2 * seed + 1)?;
        let (x, t) = (&train.points, train.labels()?);
        let mut online = OnlineSvm::new(x, t, KernelSpec::Linear, OnlineConfig { init_size: 10, ..OnlineConfig::default() })?;
        let mut k = 0;
        online.stream(&x[10..], &t[10..], EVERY, &mut |s| {
            if k < rows {
                acc[k] += s.model.accuracy(&test.points, test.labels().unwrap()).unwrap() / SEEDS as f64;
                active[k] += s.active as f64 / SEEDS as f64;
                seen[k] = s.seen;
                k += 1;
            }
        })?;
    }
    println!("t,accuracy,active");
    for k in 0..rows {
        println!("{},{:.4},{:.1}", seen[k], acc[k], active[k]);
    }
    Ok(())
}
