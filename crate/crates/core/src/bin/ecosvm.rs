use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ecosvm::cli::{run, RunConfig};
use ecosvm::error::EcoError;
use serde::de::DeserializeOwned;

/// Parses a kebab/lowercase name through the config's serde names.
fn name<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn digits(s: &str) -> Result<(u8, u8), String> {
    let (a, b) = s.split_once(',').ok_or("expected two digits as a,b")?;
    let d = |v: &str| v.trim().parse::<u8>().map_err(|e| format!("{v:?}: {e}"));
    Ok((d(a)?, d(b)?))
}

/// Train SVMs and SVDD by Lotka-Volterra dynamics, batch or online.
#[derive(Parser, Debug)]
#[command(version)]
struct Args {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// gen | svm-batch | svm-online | svdd-batch | svdd-online | eval | grid-sigma | compare
    #[arg(long, value_parser = name::<ecosvm::cli::Task>)]
    task: Option<ecosvm::cli::Task>,
    /// linear | rbf | polynomial
    #[arg(long, value_parser = name::<ecosvm::cli::KernelName>)]
    kernel: Option<ecosvm::cli::KernelName>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    degree: Option<u32>,
    #[arg(long)]
    offset: Option<f64>,
    /// Slack bound C (omit for hard margin).
    #[arg(long)]
    c: Option<f64>,
    /// Seed points fitted in batch before streaming.
    #[arg(long)]
    ns: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// oracle | dynamics
    #[arg(long, value_parser = name::<ecosvm::svm::Solver>)]
    solver: Option<ecosvm::svm::Solver>,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    train_labels: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    test_labels: Option<PathBuf>,
    /// Two IDX digits as a,b; the first becomes +1.
    #[arg(long, value_parser = digits)]
    digits: Option<(u8, u8)>,
    /// auto | last | none
    #[arg(long, value_parser = name::<ecosvm::data::LabelColumn>)]
    label_column: Option<ecosvm::data::LabelColumn>,
    #[arg(long)]
    subsample: Option<usize>,
    #[arg(long)]
    snapshot_every: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// toy-linear | toy-nonlinear | blob (used without --train)
    #[arg(long, value_parser = name::<ecosvm::cli::Generator>)]
    generator: Option<ecosvm::cli::Generator>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    /// Comma-separated RBF widths for grid-sigma.
    #[arg(long, value_delimiter = ',')]
    sigmas: Option<Vec<f64>>,
    #[arg(long)]
    validation_fraction: Option<f64>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    model_b: Option<PathBuf>,
    /// Metrics files to average (eval).
    #[arg(long, value_delimiter = ',')]
    curves: Option<Vec<PathBuf>>,
    #[arg(long)]
    grid_lo: Option<f64>,
    #[arg(long)]
    grid_hi: Option<f64>,
    #[arg(long)]
    grid_cells: Option<usize>,
}

macro_rules! overlay {
    ($cfg:ident, $args:ident; $($field:ident),*) => {
        $(if let Some(v) = $args.$field { $cfg.$field = v; })*
    };
}

fn resolve(args: Args) -> Result<RunConfig, EcoError> {
    let mut cfg = match &args.config {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)
            .map_err(|e| EcoError::Config(format!("{}: {e}", p.display())))?,
        None => RunConfig::default(),
    };
    overlay!(cfg, args; task, kernel, sigma, degree, offset, ns, seed, solver, label_column,
        snapshot_every, out_dir, generator, n, p, n_test, sigmas, validation_fraction, curves,
        grid_lo, grid_hi, grid_cells);
    for (slot, v) in [
        (&mut cfg.train, args.train),
        (&mut cfg.train_labels, args.train_labels),
        (&mut cfg.test, args.test),
        (&mut cfg.test_labels, args.test_labels),
        (&mut cfg.model, args.model),
        (&mut cfg.model_b, args.model_b),
    ] {
        if v.is_some() {
            *slot = v;
        }
    }
    cfg.c = args.c.or(cfg.c);
    cfg.digits = args.digits.or(cfg.digits);
    cfg.subsample = args.subsample.or(cfg.subsample);
    cfg.tol = args.tol.or(cfg.tol);
    cfg.max_steps = args.max_steps.or(cfg.max_steps);
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ECOSVM_LOG", "warn")).init();
    let result = resolve(Args::parse()).and_then(|cfg| run(&cfg));
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
