//! Run orchestration behind the `ecosvm` binary.
//!
//! Every run writes `config.json` (the resolved configuration, defaults
//! included), `summary.json` and `timing.json` into the output directory,
//! plus task-specific files:
//!
//! | task          | files                                          | metrics columns |
//! |---------------|------------------------------------------------|-----------------|
//! | `gen`         | `train.csv`, `test.csv`                        |                 |
//! | `svm-batch`   | `model.json`, `metrics.csv`                    | `n,stored,active,train_accuracy,test_accuracy,dual_objective,kkt_residual` |
//! | `svm-online`  | `model.json`, `batch_model.json`, `metrics.csv`| `t,accepted,stored,active,test_accuracy,kkt_residual` |
//! | `svdd-batch`  | `model.json`, `metrics.csv`                    | `n,support,radius,dual_objective,kkt_residual,test_outlier_fraction` |
//! | `svdd-online` | `model.json`, `batch_model.json`, `metrics.csv`| `t,accepted,support,radius,similarity` |
//! | `eval`        | `metrics.csv`                                  | `metric,value`, or the averaged columns of `--curves` |
//! | `grid-sigma`  | `metrics.csv`                                  | `sigma,validation_accuracy,stored,active,status` |
//! | `compare`     | `regions.csv`                                  | `x1,x2,sign_a,sign_b,disagree` |
//!
//! Metrics files contain no timings, so identical configurations produce
//! byte-identical metrics.

mod regions;

pub use regions::{compare_decisions, compare_regions, GridSpec, RegionCell, Regions};

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::data::{
    gen_gaussian_blob, gen_toy_linear, gen_toy_nonlinear, load_csv, load_idx, write_csv, Dataset, LabelColumn,
};
use crate::ecosvm::{OnlineConfig, OnlineSvm};
use crate::error::{EcoError, Result};
use crate::kernels::KernelSpec;
use crate::svdd::{center_similarity, fit_batch_svdd_with, radius, OnlineSvdd, SvddModel};
use crate::svm::{fit_batch_with, FitOptions, Solver, SvmModel};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Gen,
    #[default]
    SvmBatch,
    SvmOnline,
    SvddBatch,
    SvddOnline,
    Eval,
    GridSigma,
    Compare,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelName {
    Linear,
    #[default]
    Rbf,
    Polynomial,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    #[default]
    ToyLinear,
    ToyNonlinear,
    Blob,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    pub kernel: KernelName,
    pub sigma: f64,
    pub degree: u32,
    pub offset: f64,
    /// Slack bound; absent means hard margin.
    pub c: Option<f64>,
    /// Seed points solved in batch before an online stream starts.
    pub ns: usize,
    pub seed: u64,
    pub snapshot_every: usize,
    pub solver: Solver,
    pub tol: Option<f64>,
    pub max_steps: Option<usize>,
    pub out_dir: PathBuf,
    /// CSV file, or IDX images when `digits` is set.
    pub train: Option<PathBuf>,
    /// IDX labels; derived from `train` by `images-idx3` → `labels-idx1` if absent.
    pub train_labels: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    pub digits: Option<(u8, u8)>,
    pub label_column: LabelColumn,
    /// Seeded subsample size applied to file data.
    pub subsample: Option<usize>,
    /// Synthetic data used when no `train` file is given.
    pub generator: Generator,
    pub n: usize,
    pub p: usize,
    pub n_test: usize,
    pub sigmas: Vec<f64>,
    pub validation_fraction: f64,
    pub model: Option<PathBuf>,
    pub model_b: Option<PathBuf>,
    pub curves: Vec<PathBuf>,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_cells: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: Task::default(),
            kernel: KernelName::default(),
            sigma: 1.0,
            degree: 3,
            offset: 1.0,
            c: None,
            ns: 10,
            seed: 0,
            snapshot_every: 10,
            solver: Solver::default(),
            tol: None,
            max_steps: None,
            out_dir: PathBuf::from("out"),
            train: None,
            train_labels: None,
            test: None,
            test_labels: None,
            digits: None,
            label_column: LabelColumn::default(),
            subsample: None,
            generator: Generator::default(),
            n: 200,
            p: 2,
            n_test: 1000,
            sigmas: vec![1.0, 2.0, 4.0, 8.0, 16.0],
            validation_fraction: 0.2,
            model: None,
            model_b: None,
            curves: Vec::new(),
            grid_lo: 0.0,
            grid_hi: 1.0,
            grid_cells: 100,
        }
    }
}

fn config_err(msg: impl Into<String>) -> EcoError {
    EcoError::Config(msg.into())
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(config_err(format!("{what} {} does not exist", path.display())))
    }
}

fn labels_path(images: &Path, given: &Option<PathBuf>) -> Result<PathBuf> {
    if let Some(p) = given {
        return Ok(p.clone());
    }
    let name = images.file_name().and_then(|n| n.to_str()).unwrap_or("");
    if !name.contains("images-idx3") {
        return Err(config_err(format!(
            "cannot derive an IDX labels file from {}; pass it explicitly",
            images.display()
        )));
    }
    Ok(images.with_file_name(name.replace("images-idx3", "labels-idx1")))
}

impl RunConfig {
    pub fn kernel_spec(&self) -> KernelSpec {
        match self.kernel {
            KernelName::Linear => KernelSpec::Linear,
            KernelName::Rbf => KernelSpec::rbf(self.sigma),
            KernelName::Polynomial => KernelSpec::Polynomial {
                degree: self.degree,
                offset: self.offset,
            },
        }
    }

    pub fn fit_options(&self) -> FitOptions {
        let mut opts = FitOptions::with_solver(self.solver);
        if let Some(tol) = self.tol {
            opts.integrator.tol = tol;
        }
        if let Some(steps) = self.max_steps {
            opts.integrator.max_steps = steps;
        }
        opts
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec {
            lo: self.grid_lo,
            hi: self.grid_hi,
            cells: self.grid_cells,
        }
    }

    /// Checks values and that every referenced input exists.
    pub fn validate(&self) -> Result<()> {
        self.kernel_spec().validate()?;
        if let Some(c) = self.c {
            if !(c > 0.0 && c.is_finite()) {
                return Err(config_err(format!("C must be positive, got {c}")));
            }
        }
        if self.tol.is_some_and(|t| !(t > 0.0)) {
            return Err(config_err("tol must be positive"));
        }
        if self.snapshot_every == 0 {
            return Err(config_err("snapshot interval must be at least 1"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(config_err("validation fraction must lie in (0, 1)"));
        }
        if self.sigmas.is_empty() || self.sigmas.iter().any(|s| !(*s > 0.0)) {
            return Err(config_err("sigma grid must be non-empty and positive"));
        }
        if let Some((a, b)) = self.digits {
            if a == b || a > 9 || b > 9 {
                return Err(config_err(format!("digits must be two distinct values 0-9, got {a},{b}")));
            }
        }
        for (path, labels, what) in [
            (&self.train, &self.train_labels, "training file"),
            (&self.test, &self.test_labels, "test file"),
        ] {
            if let Some(p) = path {
                require_file(p, what)?;
                if self.digits.is_some() {
                    require_file(&labels_path(p, labels)?, "IDX labels file")?;
                }
            }
        }
        for p in self.model.iter().chain(&self.model_b).chain(&self.curves) {
            require_file(p, "input")?;
        }
        let needs = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(config_err(msg)) };
        match self.task {
            Task::SvmOnline | Task::SvddOnline => needs(self.ns >= 1, "ns must be at least 1")?,
            Task::Eval => needs(
                self.model.is_some() || !self.curves.is_empty(),
                "eval needs --model or --curves",
            )?,
            Task::Compare => needs(self.model.is_some() && self.model_b.is_some(), "compare needs two models")?,
            _ => {}
        }
        if self.train.is_none() && (self.n == 0 || self.p == 0) {
            return Err(config_err("synthetic data needs n ≥ 1 and p ≥ 1"));
        }
        Ok(())
    }

    fn load_file(&self, path: &Path, labels: &Option<PathBuf>, seed: u64) -> Result<Dataset> {
        let data = match self.digits {
            Some((a, b)) => load_idx(path, labels_path(path, labels)?, a, b)?,
            None => load_csv(path, self.label_column)?,
        };
        Ok(match self.subsample {
            Some(n) => data.subsample(n, seed),
            None => data,
        })
    }

    fn generate(&self, n: usize, seed: u64) -> Result<Dataset> {
        match self.generator {
            Generator::ToyLinear => gen_toy_linear(n, self.p, seed),
            Generator::ToyNonlinear => gen_toy_nonlinear(n, self.p, seed),
            Generator::Blob => gen_gaussian_blob(n, self.p, seed),
        }
    }

    /// Training set and optional test set. Synthetic test sets use `seed + 1`.
    pub fn datasets(&self) -> Result<(Dataset, Option<Dataset>)> {
        let test_seed = self.seed.wrapping_add(1);
        let train = match &self.train {
            Some(p) => self.load_file(p, &self.train_labels, self.seed)?,
            None => self.generate(self.n, self.seed)?,
        };
        let test = match &self.test {
            Some(p) => Some(self.load_file(p, &self.test_labels, test_seed)?),
            None if self.train.is_none() && self.n_test > 0 => Some(self.generate(self.n_test, test_seed)?),
            None => None,
        };
        if let Some(t) = &test {
            if t.dim() != train.dim() {
                return Err(EcoError::DimensionMismatch {
                    expected: train.dim(),
                    found: t.dim(),
                });
            }
        }
        Ok((train, test))
    }
}

/// Executes one run and returns its summary (also written to `summary.json`).
pub fn run(config: &RunConfig) -> Result<Value> {
    config.validate()?;
    fs::create_dir_all(&config.out_dir)?;
    let out = config.out_dir.as_path();
    write_json(&out.join("config.json"), config)?;
    let start = Instant::now();
    info!("task {:?}, seed {}", config.task, config.seed);
    let mut summary = match config.task {
        Task::Gen => task_gen(config, out)?,
        Task::SvmBatch => task_svm_batch(config, out)?,
        Task::SvmOnline => task_svm_online(config, out)?,
        Task::SvddBatch => task_svdd_batch(config, out)?,
        Task::SvddOnline => task_svdd_online(config, out)?,
        Task::Eval => task_eval(config, out)?,
        Task::GridSigma => task_grid_sigma(config, out)?,
        Task::Compare => task_compare(config, out)?,
    };
    summary["seed"] = json!(config.seed);
    write_json(&out.join("summary.json"), &summary)?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    write_json(&out.join("timing.json"), &json!({ "wall_time_ms": ms }))?;
    Ok(summary)
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(fs::write(path, s)?)
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let wrap = |e: csv::Error| EcoError::Csv {
        path: path.into(),
        line: 0,
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    for r in rows {
        w.serialize(r).map_err(wrap)?;
    }
    w.flush()?;
    Ok(())
}

fn task_gen(config: &RunConfig, out: &Path) -> Result<Value> {
    let (train, test) = config.datasets()?;
    write_csv(out.join("train.csv"), &train)?;
    if let Some(t) = &test {
        write_csv(out.join("test.csv"), t)?;
    }
    Ok(json!({ "train": train.len(), "test": test.map_or(0, |t| t.len()), "dim": train.dim() }))
}

/// Test set, or the training set when none is given.
fn eval_set<'a>(train: &'a Dataset, test: &'a Option<Dataset>) -> &'a Dataset {
    test.as_ref().unwrap_or(train)
}

#[derive(Serialize)]
struct SvmBatchRow {
    n: usize,
    stored: usize,
    active: usize,
    train_accuracy: f64,
    test_accuracy: Option<f64>,
    dual_objective: f64,
    kkt_residual: f64,
}

fn task_svm_batch(config: &RunConfig, out: &Path) -> Result<Value> {
    let (train, test) = config.datasets()?;
    let fit = fit_batch_with(&train.points, train.labels()?, config.kernel_spec(), config.c, &config.fit_options())?;
    let m = &fit.model;
    let test_accuracy = match &test {
        Some(t) => Some(m.accuracy(&t.points, t.labels()?)?),
        None => None,
    };
    let row = SvmBatchRow {
        n: train.len(),
        stored: m.support_count(),
        active: m.active_count(),
        train_accuracy: m.accuracy(&train.points, train.labels()?)?,
        test_accuracy,
        dual_objective: fit.dual_objective,
        kkt_residual: fit.kkt_residual,
    };
    fs::write(out.join("model.json"), m.to_json()?)?;
    write_rows(&out.join("metrics.csv"), std::slice::from_ref(&row))?;
    Ok(serde_json::to_value(&row)?)
}

#[derive(Serialize)]
struct SvmOnlineRow {
    t: usize,
    accepted: usize,
    stored: usize,
    active: usize,
    test_accuracy: f64,
    kkt_residual: f64,
}

fn task_svm_online(config: &RunConfig, out: &Path) -> Result<Value> {
    let (train, test) = config.datasets()?;
    let labels = train.labels()?;
    let eval = eval_set(&train, &test);
    let eval_labels = eval.labels()?;
    let kernel = config.kernel_spec();
    let opts = config.fit_options();
    let online_config = OnlineConfig {
        init_size: config.ns,
        slack_bound: config.c,
        solver: config.solver,
        oracle_tol: opts.oracle_tol,
        integrator: opts.integrator.clone(),
        ..OnlineConfig::default()
    };
    let mut online = OnlineSvm::new(&train.points, labels, kernel, online_config)?;
    let mut rows = Vec::new();
    let mut record = |s: &crate::ecosvm::Snapshot| -> Result<()> {
        rows.push(SvmOnlineRow {
            t: s.seen,
            accepted: s.accepted,
            stored: s.stored,
            active: s.active,
            test_accuracy: s.model.accuracy(&eval.points, eval_labels)?,
            kkt_residual: s.model.kkt_residual()?,
        });
        Ok(())
    };
    record(&online.snapshot())?;
    let every = config.snapshot_every;
    let ns = config.ns.min(train.len());
    for (i, (x, &t)) in train.points.iter().zip(labels).enumerate().skip(ns) {
        online.observe(x, t)?;
        if (i + 1 - ns) % every == 0 || i + 1 == train.len() {
            record(&online.snapshot())?;
        }
    }
    write_rows(&out.join("metrics.csv"), &rows)?;
    let model = online.model();
    fs::write(out.join("model.json"), model.to_json()?)?;

    let batch = fit_batch_with(&train.points, labels, kernel, config.c, &opts)?.model;
    fs::write(out.join("batch_model.json"), batch.to_json()?)?;
    let online_accuracy = model.accuracy(&eval.points, eval_labels)?;
    let batch_accuracy = batch.accuracy(&eval.points, eval_labels)?;
    let mut differ = 0;
    for x in &eval.points {
        if model.classify(x)? != batch.classify(x)? {
            differ += 1;
        }
    }
    let grid_disagreement = if train.dim() <= 2 {
        Some(compare_regions(model, &batch, &config.grid())?.fraction)
    } else {
        None
    };
    Ok(json!({
        "seen": online.seen_count(),
        "accepted": online.accepted_count(),
        "online_accuracy": online_accuracy,
        "batch_accuracy": batch_accuracy,
        "online_active": model.active_count(),
        "batch_active": batch.active_count(),
        "online_stored": model.support_count(),
        "batch_stored": batch.support_count(),
        "test_disagreement": differ as f64 / eval.len() as f64,
        "grid_disagreement": grid_disagreement,
    }))
}

fn outlier_fraction(model: &SvddModel, data: &Dataset) -> Result<f64> {
    let mut outside = 0;
    for x in &data.points {
        if model.outlier_score(x)? > 1e-8 {
            outside += 1;
        }
    }
    Ok(outside as f64 / data.len().max(1) as f64)
}

#[derive(Serialize)]
struct SvddBatchRow {
    n: usize,
    support: usize,
    radius: f64,
    dual_objective: f64,
    kkt_residual: f64,
    test_outlier_fraction: Option<f64>,
}

fn task_svdd_batch(config: &RunConfig, out: &Path) -> Result<Value> {
    let (train, test) = config.datasets()?;
    let fit = fit_batch_svdd_with(&train.points, config.kernel_spec(), &config.fit_options())?;
    let row = SvddBatchRow {
        n: train.len(),
        support: fit.model.support_count(),
        radius: radius(&fit.model),
        dual_objective: fit.dual_objective,
        kkt_residual: fit.kkt_residual,
        test_outlier_fraction: test.as_ref().map(|t| outlier_fraction(&fit.model, t)).transpose()?,
    };
    fs::write(out.join("model.json"), fit.model.to_json()?)?;
    write_rows(&out.join("metrics.csv"), std::slice::from_ref(&row))?;
    Ok(serde_json::to_value(&row)?)
}

#[derive(Serialize)]
struct SvddOnlineRow {
    t: usize,
    accepted: usize,
    support: usize,
    radius: f64,
    similarity: f64,
}

fn task_svdd_online(config: &RunConfig, out: &Path) -> Result<Value> {
    let (train, _) = config.datasets()?;
    let kernel = config.kernel_spec();
    let opts = config.fit_options();
    // The reference sphere is fitted once on the whole stream.
    let batch = fit_batch_svdd_with(&train.points, kernel, &opts)?.model;
    let ns = config.ns.min(train.len());
    let mut online = OnlineSvdd::new(&train.points[..ns], kernel, opts)?;
    let mut rows = Vec::new();
    let mut record = |o: &OnlineSvdd| -> Result<()> {
        rows.push(SvddOnlineRow {
            t: o.seen_count(),
            accepted: o.accepted_count(),
            support: o.model().support_count(),
            radius: radius(o.model()),
            similarity: center_similarity(o.model(), &batch)?,
        });
        Ok(())
    };
    record(&online)?;
    for (i, x) in train.points.iter().enumerate().skip(ns) {
        online.observe(x)?;
        if (i + 1 - ns) % config.snapshot_every == 0 || i + 1 == train.len() {
            record(&online)?;
        }
    }
    write_rows(&out.join("metrics.csv"), &rows)?;
    fs::write(out.join("model.json"), online.model().to_json()?)?;
    fs::write(out.join("batch_model.json"), batch.to_json()?)?;
    let last = rows.last().expect("at least the seed snapshot");
    Ok(json!({
        "seen": online.seen_count(),
        "accepted": online.accepted_count(),
        "radius": last.radius,
        "batch_radius": radius(&batch),
        "similarity": last.similarity,
        "support": last.support,
        "batch_support": batch.support_count(),
    }))
}

#[derive(Serialize)]
struct MetricRow<'a> {
    metric: &'a str,
    value: f64,
}

fn task_eval(config: &RunConfig, out: &Path) -> Result<Value> {
    if !config.curves.is_empty() {
        return average_curves(&config.curves, &out.join("metrics.csv"));
    }
    let path = config.model.as_ref().expect("validated");
    let text = fs::read_to_string(path)?;
    let (train, test) = config.datasets()?;
    let data = eval_set(&train, &test);
    let metrics: Vec<(&str, f64)> = if let Ok(m) = SvmModel::from_json(&text) {
        vec![
            ("accuracy", m.accuracy(&data.points, data.labels()?)?),
            ("stored", m.support_count() as f64),
            ("active", m.active_count() as f64),
        ]
    } else {
        let m = SvddModel::from_json(&text)?;
        vec![
            ("outlier_fraction", outlier_fraction(&m, data)?),
            ("support", m.support_count() as f64),
            ("radius", radius(&m)),
        ]
    };
    let rows: Vec<MetricRow> = metrics.iter().map(|&(metric, value)| MetricRow { metric, value }).collect();
    write_rows(&out.join("metrics.csv"), &rows)?;
    Ok(Value::Object(metrics.iter().map(|(k, v)| (k.to_string(), json!(v))).collect()))
}

/// Column-wise mean of metrics files sharing a header and row count.
fn average_curves(paths: &[PathBuf], dest: &Path) -> Result<Value> {
    let mut header: Option<csv::StringRecord> = None;
    let mut sums: Vec<Vec<f64>> = Vec::new();
    for path in paths {
        let csv_err = |line: usize, message: String| EcoError::Csv {
            path: path.clone(),
            line,
            message,
        };
        let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(0, e.to_string()))?;
        let h = r.headers().map_err(|e| csv_err(1, e.to_string()))?.clone();
        match &header {
            None => header = Some(h),
            Some(first) if *first != h => return Err(csv_err(1, "header differs from the first curve".into())),
            _ => {}
        }
        let mut row_count = 0;
        for (k, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| csv_err(k + 2, e.to_string()))?;
            let vals = rec
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| csv_err(k + 2, format!("non-numeric field {f:?}"))))
                .collect::<Result<Vec<_>>>()?;
            if path == &paths[0] {
                sums.push(vals);
            } else if k >= sums.len() {
                return Err(csv_err(k + 2, "more rows than the first curve".into()));
            } else {
                sums[k].iter_mut().zip(vals).for_each(|(s, v)| *s += v);
            }
            row_count += 1;
        }
        if row_count != sums.len() {
            return Err(csv_err(row_count + 1, "fewer rows than the first curve".into()));
        }
    }
    let header = header.expect("at least one curve");
    let n = paths.len() as f64;
    let mut w = csv::Writer::from_path(dest).map_err(|e| EcoError::Csv {
        path: dest.into(),
        line: 0,
        message: e.to_string(),
    })?;
    let wrap = |e: csv::Error| EcoError::Csv {
        path: dest.into(),
        line: 0,
        message: e.to_string(),
    };
    w.write_record(&header).map_err(wrap)?;
    for row in &sums {
        w.write_record(row.iter().map(|s| (s / n).to_string())).map_err(wrap)?;
    }
    w.flush()?;
    Ok(json!({ "curves": paths.len(), "rows": sums.len() }))
}

#[derive(Serialize)]
struct GridRow {
    sigma: f64,
    validation_accuracy: Option<f64>,
    stored: Option<usize>,
    active: Option<usize>,
    status: &'static str,
}

fn task_grid_sigma(config: &RunConfig, out: &Path) -> Result<Value> {
    let (train, test) = config.datasets()?;
    let (fit_set, validation) = match test {
        Some(t) => (train, t),
        None => {
            let shuffled = train.shuffled(config.seed);
            let hold = ((shuffled.len() as f64) * config.validation_fraction).round() as usize;
            shuffled.split_at(shuffled.len() - hold.max(1))
        }
    };
    let opts = config.fit_options();
    let mut rows = Vec::new();
    for &sigma in &config.sigmas {
        let row = match fit_batch_with(&fit_set.points, fit_set.labels()?, KernelSpec::rbf(sigma), config.c, &opts) {
            Ok(fit) => GridRow {
                sigma,
                validation_accuracy: Some(fit.model.accuracy(&validation.points, validation.labels()?)?),
                stored: Some(fit.model.support_count()),
                active: Some(fit.model.active_count()),
                status: "ok",
            },
            Err(e @ (EcoError::Unbounded { .. } | EcoError::NotConverged { .. })) => {
                log::warn!("sigma {sigma}: {e}");
                GridRow {
                    sigma,
                    validation_accuracy: None,
                    stored: None,
                    active: None,
                    status: e.code(),
                }
            }
            Err(e) => return Err(e),
        };
        info!("sigma {sigma}: {:?}", row.validation_accuracy);
        rows.push(row);
    }
    write_rows(&out.join("metrics.csv"), &rows)?;
    let best = rows
        .iter()
        .filter_map(|r| r.validation_accuracy.map(|a| (r.sigma, a)))
        .fold(None, |best: Option<(f64, f64)>, (s, a)| match best {
            Some((_, b)) if b >= a => best,
            _ => Some((s, a)),
        });
    Ok(json!({
        "best_sigma": best.map(|b| b.0),
        "best_accuracy": best.map(|b| b.1),
        "validation_size": validation.len(),
    }))
}

fn task_compare(config: &RunConfig, out: &Path) -> Result<Value> {
    let read = |p: &PathBuf| -> Result<SvmModel> { SvmModel::from_json(&fs::read_to_string(p)?) };
    let a = read(config.model.as_ref().expect("validated"))?;
    let b = read(config.model_b.as_ref().expect("validated"))?;
    let regions = compare_regions(&a, &b, &config.grid())?;
    write_rows(&out.join("regions.csv"), &regions.cells)?;
    Ok(json!({ "disagreement": regions.fraction, "cells": regions.cells.len() }))
}
