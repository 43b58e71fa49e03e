//! RBF width selection through the library's run API; results land in
//! `out/grid_sigma/`.

use ecosvm::cli::{run, Generator, RunConfig, Task};

fn main() -> ecosvm::error::Result<()> {
    let config = RunConfig {
        task: Task::GridSigma,
        generator: Generator::ToyNonlinear,
        n: 300,
        c: Some(10.0),
        sigmas: vec![0.03, 0.1, 0.3, 1.0],
        out_dir: "out/grid_sigma".into(),
        ..RunConfig::default()
    };
    let summary = run(&config)?;
    print!("{}", std::fs::read_to_string(config.out_dir.join("metrics.csv"))?);
    println!("best sigma {}", summary["best_sigma"]);
    Ok(())
}
