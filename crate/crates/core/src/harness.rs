//! Grid-search experiment runner and report writer.
//!
//! A run loads one dataset, fits the chosen method at every grid point,
//! clusters the selected features and writes
//!
//! - `summary.csv`: one row per successful grid point,
//! - `best.csv`: the best row per `k` (ACC first, NMI breaks ties),
//! - `kernel_average.csv`: single-kernel runs only, best-per-kernel values
//!   averaged over the bank,
//! - `run.json`: the resolved configuration, seeds, kernel weights,
//!   failures and timings,
//! - `trace_<id>.csv`: the objective after every iteration of each fit.
//!
//! Every number in `summary.csv` is a function of `run.json` alone, so
//! [`replay`] reproduces it byte for byte.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datapipe::{format_real, load_csv, DatasetSpec};
use crate::error::{Error, Result};
use crate::evalmetrics::{evaluate_with_table, EvalReport, RedundancyTable};
use crate::kaufs::{fit, AlignmentScale, Divergence, SelectionResult, SolverConfig};
use crate::kernelspace::{center, gram, DataMatrix, GramMatrix, Kernel};
use crate::mkaufs::{fit_mk, KernelBank};

/// Overrides the worker count from the configuration.
pub const ENV_WORKERS: &str = "KAUFS_WORKERS";
/// Overrides the output directory from the configuration.
pub const ENV_OUTPUT_DIR: &str = "KAUFS_OUTPUT_DIR";

const RECORD_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Kaufs,
    Mkaufs,
    Baseline,
}

/// Solver options shared by every grid point. `alpha`, `beta` and the seed
/// come from the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub max_iter: usize,
    pub rel_tol: f64,
    pub eps_denom: f64,
    pub alignment_scale: AlignmentScale,
    pub divergence: Divergence,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            max_iter: d.max_iter,
            rel_tol: d.rel_tol,
            eps_denom: d.eps_denom,
            alignment_scale: d.alignment_scale,
            divergence: d.divergence,
        }
    }
}

impl SolverSettings {
    fn config(&self, alpha: f64, beta: f64, seed: u64) -> SolverConfig {
        SolverConfig {
            alpha,
            beta,
            max_iter: self.max_iter,
            rel_tol: self.rel_tol,
            eps_denom: self.eps_denom,
            seed,
            alignment_scale: self.alignment_scale,
            divergence: self.divergence,
            ..Default::default()
        }
    }
}

fn powers_of_ten() -> Vec<f64> {
    (-3..=3).map(|t| 10f64.powi(t)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub method: Method,
    /// For `kaufs` every kernel is fitted separately; for `mkaufs` the whole
    /// list forms one bank.
    pub kernel_bank: Vec<Kernel>,
    pub k_grid: Vec<usize>,
    pub alpha_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub repeats: usize,
    pub seed: u64,
    /// Number of k-means clusters; defaults to the number of classes.
    pub clusters: Option<usize>,
    pub workers: Option<usize>,
    pub output_dir: PathBuf,
    pub write_traces: bool,
    pub solver: SolverSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSpec::default(),
            method: Method::Kaufs,
            kernel_bank: Kernel::default_bank(),
            k_grid: (1..=10).map(|t| 10 * t).collect(),
            alpha_grid: powers_of_ten(),
            beta_grid: powers_of_ten(),
            gamma_grid: powers_of_ten(),
            repeats: 30,
            seed: 0,
            clusters: None,
            workers: None,
            output_dir: PathBuf::from("results"),
            write_traces: true,
            solver: SolverSettings::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses a TOML configuration. A relative dataset path is resolved
    /// against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.dataset.path.as_os_str().is_empty() {
            return Err(Error::Config("dataset.path is required".into()));
        }
        if cfg.dataset.path.is_relative() {
            cfg.dataset.path = base_dir.join(&cfg.dataset.path);
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml(&text, base)
    }

    /// Applies the worker-count and output-directory environment overrides.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(w) = std::env::var(ENV_WORKERS) {
            let w: usize = w
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{ENV_WORKERS}={w:?} is not a count")))?;
            self.workers = Some(w);
        }
        if let Ok(dir) = std::env::var(ENV_OUTPUT_DIR) {
            self.output_dir = PathBuf::from(dir);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let empty = |name: &str| Error::Config(format!("{name} is empty"));
        if self.dataset.path.as_os_str().is_empty() {
            return Err(empty("dataset.path"));
        }
        if self.method != Method::Baseline {
            if self.k_grid.is_empty() {
                return Err(empty("k_grid"));
            }
            if self.alpha_grid.is_empty() {
                return Err(empty("alpha_grid"));
            }
            if self.beta_grid.is_empty() {
                return Err(empty("beta_grid"));
            }
            if self.kernel_bank.is_empty() {
                return Err(empty("kernel_bank"));
            }
        }
        if self.method == Method::Mkaufs && self.gamma_grid.is_empty() {
            return Err(empty("gamma_grid"));
        }
        if self.k_grid.contains(&0) {
            return Err(Error::Config("k_grid entries must be positive".into()));
        }
        for (name, grid) in [("alpha_grid", &self.alpha_grid), ("beta_grid", &self.beta_grid)] {
            if let Some(v) = grid.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
                return Err(Error::Config(format!("{name} entry {v} must be >= 0")));
            }
        }
        if let Some(v) = self.gamma_grid.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("gamma_grid entry {v} must be > 0")));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.clusters == Some(0) {
            return Err(Error::Config("clusters must be at least 1".into()));
        }
        for k in &self.kernel_bank {
            k.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        self.solver
            .config(1.0, 1.0, 0)
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

/// Deterministic per-point seed from the run seed and the point id.
pub fn derive_seed(run_seed: u64, id: usize) -> u64 {
    let mut z = run_seed.wrapping_add((id as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One cell of the hyperparameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub id: usize,
    /// Kernel label, `bank` for the multiple-kernel method, `none` for the
    /// baseline.
    pub kernel: String,
    /// Index into `kernel_bank` for single-kernel fits.
    pub kernel_index: Option<usize>,
    pub k: usize,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub seed: u64,
}

/// Enumerates the grid in its fixed order: kernel, k, α, β, γ.
pub fn grid_points(cfg: &ExperimentConfig, n_features: usize) -> Vec<GridPoint> {
    let cell = |kernel: String, kernel_index, k, alpha, beta, gamma| GridPoint {
        id: 0,
        kernel,
        kernel_index,
        k,
        alpha,
        beta,
        gamma,
        seed: 0,
    };
    let mut cells = Vec::new();
    match cfg.method {
        Method::Baseline => cells.push(cell("none".into(), None, n_features, None, None, None)),
        Method::Kaufs => {
            for (ki, kernel) in cfg.kernel_bank.iter().enumerate() {
                for &k in &cfg.k_grid {
                    for &a in &cfg.alpha_grid {
                        for &b in &cfg.beta_grid {
                            cells.push(cell(kernel.to_string(), Some(ki), k, Some(a), Some(b), None));
                        }
                    }
                }
            }
        }
        Method::Mkaufs => {
            for &k in &cfg.k_grid {
                for &a in &cfg.alpha_grid {
                    for &b in &cfg.beta_grid {
                        for &g in &cfg.gamma_grid {
                            cells.push(cell("bank".into(), None, k, Some(a), Some(b), Some(g)));
                        }
                    }
                }
            }
        }
    }
    for (id, p) in cells.iter_mut().enumerate() {
        p.id = id;
        p.seed = derive_seed(cfg.seed, id);
    }
    cells
}

/// A grid point that produced a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSuccess {
    pub selected: Vec<usize>,
    pub report: EvalReport,
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
    pub eta: Option<Vec<f64>>,
    pub kernel_scores: Option<Vec<f64>>,
    pub trace_file: Option<String>,
    pub fit_seconds: f64,
    pub eval_seconds: f64,
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
    #[serde(skip)]
    pub eta_history: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum PointOutcome {
    Ok(Box<PointSuccess>),
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    #[serde(flatten)]
    pub point: GridPoint,
    pub outcome: PointOutcome,
}

impl PointRecord {
    pub fn success(&self) -> Option<&PointSuccess> {
        match &self.outcome {
            PointOutcome::Ok(s) => Some(s),
            PointOutcome::Failed { .. } => None,
        }
    }
}

/// Best grid point for one `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestRow {
    pub k: usize,
    pub id: usize,
    pub kernel: String,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub acc_mean: f64,
    pub acc_std: f64,
    pub nmi_mean: f64,
    pub nmi_std: f64,
    pub red: Option<f64>,
    /// Highest NMI at this `k` over all points, maximized independently.
    pub best_nmi: f64,
    pub best_nmi_id: usize,
}

/// Per-k mean over kernels of each kernel's best ACC and best NMI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelAverageRow {
    pub k: usize,
    pub kernels: usize,
    pub acc_mean: f64,
    pub nmi_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub path: PathBuf,
    pub n_samples: usize,
    pub n_features: usize,
    pub n_classes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub version: u32,
    pub config: ExperimentConfig,
    pub dataset: DatasetInfo,
    pub clusters: usize,
    pub std_convention: String,
    pub points: Vec<PointRecord>,
    pub failures: usize,
    pub best: Vec<BestRow>,
    pub kernel_average: Vec<KernelAverageRow>,
    /// Mean RED over the best-per-k subsets that have one.
    pub mean_red_of_best: Option<f64>,
    pub total_seconds: f64,
}

impl RunRecord {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

enum Prepared {
    Single(Vec<GramMatrix>),
    Multi(KernelBank),
    None,
}

fn prepare(cfg: &ExperimentConfig, data: &DataMatrix) -> Result<Prepared> {
    Ok(match cfg.method {
        Method::Baseline => Prepared::None,
        Method::Kaufs => Prepared::Single(
            cfg.kernel_bank
                .par_iter()
                .map(|k| center(&gram(data, k)?))
                .collect::<Result<Vec<_>>>()?,
        ),
        Method::Mkaufs => Prepared::Multi(KernelBank::from_specs(data, &cfg.kernel_bank)?),
    })
}

struct Fitted {
    selected: Vec<usize>,
    iterations: usize,
    converged: bool,
    diverged: bool,
    eta: Option<Vec<f64>>,
    scores: Option<Vec<f64>>,
    objective_trace: Vec<f64>,
    eta_history: Vec<Vec<f64>>,
    seconds: f64,
}

fn fit_point(
    cfg: &ExperimentConfig,
    data: &DataMatrix,
    prepared: &Prepared,
    p: &GridPoint,
) -> Result<Fitted> {
    let start = Instant::now();
    let solver = cfg
        .solver
        .config(p.alpha.unwrap_or(0.0), p.beta.unwrap_or(0.0), p.seed);
    let from_selection = |s: SelectionResult| Fitted {
        selected: s.ranked_indices,
        iterations: s.trace.iterations_run,
        converged: s.trace.converged,
        diverged: s.trace.diverged,
        eta: None,
        scores: None,
        objective_trace: s.trace.objective_per_iter,
        eta_history: Vec::new(),
        seconds: 0.0,
    };
    let mut fitted = match prepared {
        Prepared::None => Fitted {
            selected: (0..data.n_features()).collect(),
            iterations: 0,
            converged: true,
            diverged: false,
            eta: None,
            scores: None,
            objective_trace: Vec::new(),
            eta_history: Vec::new(),
            seconds: 0.0,
        },
        Prepared::Single(kernels) => {
            let kc = &kernels[p.kernel_index.expect("single-kernel point has a kernel")];
            from_selection(fit(data, kc, p.k, &solver)?)
        }
        Prepared::Multi(bank) => {
            let gamma = p.gamma.expect("multiple-kernel point has gamma");
            let mk = fit_mk(data, bank, p.k, &solver, gamma)?;
            let mut f = from_selection(mk.selection);
            f.eta = Some(mk.weights.eta);
            f.scores = Some(mk.weights.scores);
            f.eta_history = mk.eta_history;
            f
        }
    };
    fitted.seconds = start.elapsed().as_secs_f64();
    Ok(fitted)
}

/// Runs every grid point and assembles the record. Individual fit failures
/// are recorded; the run fails only when every point failed.
pub fn run(cfg: &ExperimentConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let start = Instant::now();
    let data = load_csv(&cfg.dataset).map_err(|e| match e {
        Error::Io { .. } | Error::Parse { .. } | Error::Format(_) | Error::Config(_) => e,
        other => Error::Config(format!("dataset: {other}")),
    })?;
    let labels = data
        .labels()
        .ok_or_else(|| Error::Config("the dataset needs a label column for evaluation".into()))?;
    let n_classes = data.n_classes().unwrap_or(0);
    let clusters = cfg.clusters.unwrap_or(n_classes);
    if clusters > data.n_samples() {
        return Err(Error::Config(format!(
            "{clusters} clusters for {} samples",
            data.n_samples()
        )));
    }
    debug_assert_eq!(labels.len(), data.n_samples());
    let d = data.n_features();
    if cfg.method != Method::Baseline {
        if let Some(k) = cfg.k_grid.iter().find(|&&k| k >= d) {
            return Err(Error::Config(format!(
                "k_grid entry {k} is not below the feature count {d}"
            )));
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let points = grid_points(cfg, d);
    let records = pool.install(|| -> Result<Vec<PointRecord>> {
        let prepared = prepare(cfg, &data)?;
        let fits: Vec<Result<Fitted>> = points
            .par_iter()
            .map(|p| fit_point(cfg, &data, &prepared, p))
            .collect();

        let mut union: Vec<usize> = fits
            .iter()
            .filter_map(|f| f.as_ref().ok())
            .flat_map(|f| f.selected.iter().copied())
            .collect();
        union.sort_unstable();
        union.dedup();
        let table = RedundancyTable::for_columns(data.values(), &union);

        Ok(points
            .par_iter()
            .zip(fits.into_par_iter())
            .map(|(p, fitted)| {
                let outcome = fitted.and_then(|f| {
                    let t = Instant::now();
                    let report =
                        evaluate_with_table(&data, &f.selected, clusters, cfg.repeats, p.seed, &table)?;
                    Ok(PointSuccess {
                        selected: f.selected,
                        report,
                        iterations: f.iterations,
                        converged: f.converged,
                        diverged: f.diverged,
                        eta: f.eta,
                        kernel_scores: f.scores,
                        trace_file: (cfg.write_traces && cfg.method != Method::Baseline)
                            .then(|| format!("trace_{}.csv", p.id)),
                        fit_seconds: f.seconds,
                        eval_seconds: t.elapsed().as_secs_f64(),
                        objective_trace: f.objective_trace,
                        eta_history: f.eta_history,
                    })
                });
                PointRecord {
                    point: p.clone(),
                    outcome: match outcome {
                        Ok(s) => PointOutcome::Ok(Box::new(s)),
                        Err(e) => PointOutcome::Failed {
                            error: e.to_string(),
                        },
                    },
                }
            })
            .collect())
    })?;

    let failures = records.iter().filter(|r| r.success().is_none()).count();
    if failures == records.len() {
        return Err(Error::AllGridPointsFailed(records.len()));
    }
    let best = best_per_k(&records);
    let reds: Vec<f64> = best.iter().filter_map(|b| b.red).collect();
    Ok(RunRecord {
        version: RECORD_VERSION,
        config: cfg.clone(),
        dataset: DatasetInfo {
            path: cfg.dataset.path.clone(),
            n_samples: data.n_samples(),
            n_features: d,
            n_classes,
        },
        clusters,
        std_convention: "population".into(),
        kernel_average: if cfg.method == Method::Kaufs {
            kernel_average(&records)
        } else {
            Vec::new()
        },
        points: records,
        failures,
        best,
        mean_red_of_best: (!reds.is_empty()).then(|| reds.iter().sum::<f64>() / reds.len() as f64),
        total_seconds: start.elapsed().as_secs_f64(),
    })
}

/// ACC first, then NMI, then the lower id.
fn better(a: &EvalReport, b: &EvalReport) -> bool {
    a.acc_mean > b.acc_mean || (a.acc_mean == b.acc_mean && a.nmi_mean > b.nmi_mean)
}

fn distinct_ks(records: &[PointRecord]) -> Vec<usize> {
    let mut ks: Vec<usize> = records.iter().map(|r| r.point.k).collect();
    ks.sort_unstable();
    ks.dedup();
    ks
}

pub fn best_per_k(records: &[PointRecord]) -> Vec<BestRow> {
    let mut out = Vec::new();
    for k in distinct_ks(records) {
        let mut best: Option<(&PointRecord, &PointSuccess)> = None;
        let mut best_nmi: Option<(usize, f64)> = None;
        for r in records.iter().filter(|r| r.point.k == k) {
            let Some(s) = r.success() else { continue };
            if best.is_none_or(|(_, b)| better(&s.report, &b.report)) {
                best = Some((r, s));
            }
            if best_nmi.is_none_or(|(_, v)| s.report.nmi_mean > v) {
                best_nmi = Some((r.point.id, s.report.nmi_mean));
            }
        }
        if let (Some((r, s)), Some((nmi_id, nmi))) = (best, best_nmi) {
            out.push(BestRow {
                k,
                id: r.point.id,
                kernel: r.point.kernel.clone(),
                alpha: r.point.alpha,
                beta: r.point.beta,
                gamma: r.point.gamma,
                acc_mean: s.report.acc_mean,
                acc_std: s.report.acc_std,
                nmi_mean: s.report.nmi_mean,
                nmi_std: s.report.nmi_std,
                red: s.report.red,
                best_nmi: nmi,
                best_nmi_id: nmi_id,
            });
        }
    }
    out
}

pub fn kernel_average(records: &[PointRecord]) -> Vec<KernelAverageRow> {
    let mut out = Vec::new();
    for k in distinct_ks(records) {
        let mut kernels: Vec<usize> = records
            .iter()
            .filter(|r| r.point.k == k && r.success().is_some())
            .filter_map(|r| r.point.kernel_index)
            .collect();
        kernels.sort_unstable();
        kernels.dedup();
        if kernels.is_empty() {
            continue;
        }
        let (mut acc, mut nmi) = (0.0, 0.0);
        for &ki in &kernels {
            let reports = records
                .iter()
                .filter(|r| r.point.k == k && r.point.kernel_index == Some(ki))
                .filter_map(|r| r.success().map(|s| &s.report));
            let (a, m) = reports.fold((f64::NEG_INFINITY, f64::NEG_INFINITY), |(a, m), r| {
                (a.max(r.acc_mean), m.max(r.nmi_mean))
            });
            acc += a;
            nmi += m;
        }
        let c = kernels.len() as f64;
        out.push(KernelAverageRow {
            k,
            kernels: kernels.len(),
            acc_mean: acc / c,
            nmi_mean: nmi / c,
        });
    }
    out
}

fn opt_real(v: Option<f64>) -> String {
    v.map(format_real).unwrap_or_default()
}

const SUMMARY_HEADER: [&str; 13] = [
    "id", "kernel", "k", "alpha", "beta", "gamma", "acc_mean", "acc_std", "nmi_mean", "nmi_std",
    "red", "iterations", "converged",
];

/// `summary.csv` contents.
pub fn summary_csv(record: &RunRecord) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_HEADER)?;
    for r in &record.points {
        let Some(s) = r.success() else { continue };
        let p = &r.point;
        w.write_record([
            p.id.to_string(),
            p.kernel.clone(),
            p.k.to_string(),
            opt_real(p.alpha),
            opt_real(p.beta),
            opt_real(p.gamma),
            format_real(s.report.acc_mean),
            format_real(s.report.acc_std),
            format_real(s.report.nmi_mean),
            format_real(s.report.nmi_std),
            opt_real(s.report.red),
            s.iterations.to_string(),
            s.converged.to_string(),
        ])?;
    }
    into_bytes(w)
}

fn into_bytes(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner()
        .map_err(|e| Error::Format(format!("csv buffer: {e}")))
}

pub fn best_csv(record: &RunRecord) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "k", "id", "kernel", "alpha", "beta", "gamma", "acc_mean", "acc_std", "nmi_mean",
        "nmi_std", "red", "best_nmi", "best_nmi_id",
    ])?;
    for b in &record.best {
        w.write_record([
            b.k.to_string(),
            b.id.to_string(),
            b.kernel.clone(),
            opt_real(b.alpha),
            opt_real(b.beta),
            opt_real(b.gamma),
            format_real(b.acc_mean),
            format_real(b.acc_std),
            format_real(b.nmi_mean),
            format_real(b.nmi_std),
            opt_real(b.red),
            format_real(b.best_nmi),
            b.best_nmi_id.to_string(),
        ])?;
    }
    into_bytes(w)
}

fn kernel_average_csv(record: &RunRecord) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["k", "kernels", "acc_mean", "nmi_mean"])?;
    for row in &record.kernel_average {
        w.write_record([
            row.k.to_string(),
            row.kernels.to_string(),
            format_real(row.acc_mean),
            format_real(row.nmi_mean),
        ])?;
    }
    into_bytes(w)
}

fn trace_csv(s: &PointSuccess) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let n_eta = s.eta_history.first().map_or(0, Vec::len);
    let mut header = vec!["iteration".to_string(), "objective".to_string()];
    header.extend((0..n_eta).map(|i| format!("eta_{i}")));
    w.write_record(&header)?;
    for (t, j) in s.objective_trace.iter().enumerate() {
        let mut row = vec![t.to_string(), format_real(*j)];
        if let Some(eta) = s.eta_history.get(t) {
            row.extend(eta.iter().map(|&e| format_real(e)));
        }
        w.write_record(&row)?;
    }
    into_bytes(w)
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes every report file into `out_dir`, creating it if needed.
pub fn report(record: &RunRecord, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_file(out_dir, "summary.csv", &summary_csv(record)?)?;
    write_file(out_dir, "best.csv", &best_csv(record)?)?;
    if record.config.method == Method::Kaufs {
        write_file(out_dir, "kernel_average.csv", &kernel_average_csv(record)?)?;
    }
    let mut json = serde_json::to_vec_pretty(record)?;
    json.push(b'\n');
    write_file(out_dir, "run.json", &json)?;
    for r in &record.points {
        if let Some(s) = r.success() {
            if let Some(name) = &s.trace_file {
                write_file(out_dir, name, &trace_csv(s)?)?;
            }
        }
    }
    Ok(())
}

/// Re-runs the configuration stored in a `run.json` and writes fresh
/// reports into `out_dir`.
pub fn replay(record_path: &Path, out_dir: &Path) -> Result<RunRecord> {
    let old = RunRecord::from_json_file(record_path)?;
    if old.version != RECORD_VERSION {
        return Err(Error::Config(format!(
            "record version {} is not supported",
            old.version
        )));
    }
    let record = run(&old.config)?;
    report(&record, out_dir)?;
    Ok(record)
}
