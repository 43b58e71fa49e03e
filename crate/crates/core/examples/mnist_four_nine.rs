//! Fours against nines from IDX files.
//!
//!     cargo run --release --example mnist_four_nine -- <images-idx3> <labels-idx1> [n]
//!
//! Without arguments the bundled 120-image fixture is used.

use std::path::PathBuf;

use ecosvm::data::load_idx;
use ecosvm::ecosvm::{OnlineConfig, OnlineSvm};
use ecosvm::kernels::KernelSpec;
use ecosvm::svm::{fit_batch, Solver};

fn main() -> ecosvm::error::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let (images, labels) = match args.as_slice() {
        [i, l, ..] => (PathBuf::from(i), PathBuf::from(l)),
        _ => (fixtures.join("mnist200-images-idx3-ubyte"), fixtures.join("mnist200-labels-idx1-ubyte")),
    };
    let n = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let mut data = load_idx(&images, &labels, 4, 9)?.shuffled(1);
    data.truncate(n);
    let (train, test) = data.split_at(data.len() * 3 / 4);
    println!("{} training and {} test images", train.len(), test.len());

    let kernel = KernelSpec::rbf(8.0);
    let batch = fit_batch(&train.points, train.labels()?, kernel, None, Solver::Oracle)?;
    let mut online = OnlineSvm::new(&train.points, train.labels()?, kernel, OnlineConfig { init_size: 30, ..OnlineConfig::default() })?;
    for (x, &t) in train.points.iter().zip(train.labels()?).skip(30) {
        online.observe(x, t)?;
    }
    let (x, t) = (&test.points, test.labels()?);
    println!("batch  accuracy {:.3}, {} active", batch.accuracy(x, t)?, batch.active_count());
    println!("online accuracy {:.3}, {} active", online.model().accuracy(x, t)?, online.active_count());
    Ok(())
}
