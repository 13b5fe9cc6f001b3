//! Single-kernel solver: alternating multiplicative updates of the feature
//! weight matrix `W` (d×k) and the representation matrix `H` (k×d) that
//! minimize
//!
//! ```text
//! J(W, H) = −½ Tr(K_c X W H Hᵀ Wᵀ Xᵀ)
//!           + α/2 [Tr(1 W Wᵀ) − Tr(W Wᵀ)]
//!           + β/2 [Tr(1 Hᵀ H) − Tr(Hᵀ H)]
//! ```
//!
//! subject to `W, H ≥ 0`. Features are ranked by the ℓ₂ norms of the rows
//! of the final `W`.
//!
//! The alignment term is quartic in the scale of `(W, H)` while both
//! regularizers are quadratic, so `J` is unbounded below and the updates
//! diverge when the alignment term dominates. [`AlignmentScale::Frobenius`]
//! (the default) divides the alignment term by the constant `‖XᵀK_cX‖_F`;
//! [`AlignmentScale::Unit`] keeps the raw form.

use ndarray::{Array1, Array2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernelspace::{projected_gram, sign_split, DataMatrix, GramMatrix, SignSplit};

/// Nonnegative factors: `w` is d×k, `h` is k×d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorPair {
    pub w: Array2<f64>,
    pub h: Array2<f64>,
}

impl FactorPair {
    pub fn new(w: Array2<f64>, h: Array2<f64>) -> Result<Self> {
        let (d, k) = w.dim();
        if h.dim() != (k, d) {
            return Err(Error::Input(format!(
                "W is {d}x{k} so H must be {k}x{d}, got {:?}",
                h.dim()
            )));
        }
        if w.iter().chain(h.iter()).any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Input(
                "factor entries must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { w, h })
    }

    /// Entries drawn independently from U(0.1, 1.0); `W` is filled first,
    /// row-major, then `H`.
    pub fn random(d: usize, k: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = Array2::from_shape_fn((d, k), |_| rng.random_range(0.1..1.0));
        let h = Array2::from_shape_fn((k, d), |_| rng.random_range(0.1..1.0));
        Self { w, h }
    }

    pub fn n_features(&self) -> usize {
        self.w.nrows()
    }

    pub fn rank(&self) -> usize {
        self.w.ncols()
    }

    pub fn min_entry(&self) -> f64 {
        self.w
            .iter()
            .chain(self.h.iter())
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Init {
    UniformRandom,
    Provided(FactorPair),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Weight of the inner-product regularizer on `W`.
    pub alpha: f64,
    /// Weight of the inner-product regularizer on `H`.
    pub beta: f64,
    pub max_iter: usize,
    pub rel_tol: f64,
    /// Added to every update denominator.
    pub eps_denom: f64,
    pub seed: u64,
    pub init: Init,
    pub alignment_scale: AlignmentScale,
    pub divergence: Divergence,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            max_iter: 300,
            rel_tol: 1e-6,
            eps_denom: 1e-12,
            seed: 0,
            init: Init::UniformRandom,
            alignment_scale: AlignmentScale::default(),
            divergence: Divergence::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Parameter(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Parameter(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::Parameter(format!("rel_tol must be > 0, got {}", self.rel_tol)));
        }
        if !(self.eps_denom > 0.0) {
            return Err(Error::Parameter(format!(
                "eps_denom must be > 0, got {}",
                self.eps_denom
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Parameter("max_iter must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn initial_factors(&self, d: usize, k: usize) -> Result<FactorPair> {
        match &self.init {
            Init::UniformRandom => Ok(FactorPair::random(d, k, self.seed)),
            Init::Provided(f) => {
                if f.w.dim() != (d, k) {
                    return Err(Error::Input(format!(
                        "provided W is {:?}, expected ({d}, {k})",
                        f.w.dim()
                    )));
                }
                FactorPair::new(f.w.clone(), f.h.clone())
            }
        }
    }
}

/// Objective history of one fit. Entry 0 is the objective at the initial
/// factors; entry `t` is the value after the `t`-th (W, H) iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub objective_per_iter: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
    /// Set when the run stopped on a non-finite value under
    /// [`Divergence::KeepLastFinite`].
    pub diverged: bool,
    pub final_factors: FactorPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Top-k feature indices, by descending row norm of `W`.
    pub ranked_indices: Vec<usize>,
    /// ℓ₂ norm of every row of `W`.
    pub row_norms: Vec<f64>,
    pub seed: u64,
    pub trace: SolverTrace,
}

/// `Tr(1 W Wᵀ) − Tr(W Wᵀ)`: squared column sums minus squared entries.
fn inner_product_reg_w(w: &Array2<f64>) -> f64 {
    let col_sums = w.sum_axis(Axis(0));
    col_sums.dot(&col_sums) - w.iter().map(|v| v * v).sum::<f64>()
}

/// `Tr(1 Hᵀ H) − Tr(Hᵀ H)`: squared row sums minus squared entries.
fn inner_product_reg_h(h: &Array2<f64>) -> f64 {
    let row_sums = h.sum_axis(Axis(1));
    row_sums.dot(&row_sums) - h.iter().map(|v| v * v).sum::<f64>()
}

pub(crate) fn regularization(f: &FactorPair, alpha: f64, beta: f64) -> f64 {
    0.5 * alpha * inner_product_reg_w(&f.w) + 0.5 * beta * inner_product_reg_h(&f.h)
}

fn check_shapes(data: &DataMatrix, kc: &GramMatrix, f: &FactorPair) -> Result<()> {
    if kc.dim() != data.n_samples() {
        return Err(Error::Input(format!(
            "kernel is {n}x{n} but data has {m} samples",
            n = kc.dim(),
            m = data.n_samples()
        )));
    }
    if f.n_features() != data.n_features() || f.h.dim() != (f.rank(), f.n_features()) {
        return Err(Error::Input(format!(
            "factor shapes W {:?}, H {:?} do not match {} features",
            f.w.dim(),
            f.h.dim(),
            data.n_features()
        )));
    }
    Ok(())
}

/// What `fit` does when an update or the objective stops being finite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Divergence {
    /// Fail with [`Error::NonFinite`].
    #[default]
    Error,
    /// Return the last finite iterate and mark the trace as diverged.
    KeepLastFinite,
}

/// Constant divisor applied to the alignment term. `Unit` leaves the
/// objective exactly as written above; `Frobenius` divides the alignment
/// term by `‖XᵀK_cX‖_F` so that α and β are comparable across datasets and
/// kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignmentScale {
    Unit,
    #[default]
    Frobenius,
}

impl AlignmentScale {
    /// The divisor for a given `XᵀK_cX`. A zero matrix gets divisor 1.
    pub fn divisor(self, projected: &Array2<f64>) -> f64 {
        match self {
            AlignmentScale::Unit => 1.0,
            AlignmentScale::Frobenius => {
                let norm = projected.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 && norm.is_finite() {
                    norm
                } else {
                    1.0
                }
            }
        }
    }
}

/// A prepared single-kernel problem: the scaled `XᵀK_cX`, its sign split
/// and the regularization weights. Lets callers drive the iteration one
/// step at a time.
#[derive(Debug, Clone)]
pub struct Problem {
    projected: Array2<f64>,
    split: SignSplit,
    divisor: f64,
    alpha: f64,
    beta: f64,
    eps_denom: f64,
}

impl Problem {
    pub fn new(data: &DataMatrix, kc: &GramMatrix, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let projected = projected_gram(data, kc)?;
        let divisor = cfg.alignment_scale.divisor(&projected);
        Ok(Self::from_projected(projected, divisor, cfg))
    }

    /// `projected` is the unscaled `XᵀK_cX`.
    pub(crate) fn from_projected(mut projected: Array2<f64>, divisor: f64, cfg: &SolverConfig) -> Self {
        if divisor != 1.0 {
            projected.mapv_inplace(|v| v / divisor);
        }
        let split = sign_split(&projected);
        Self {
            projected,
            split,
            divisor,
            alpha: cfg.alpha,
            beta: cfg.beta,
            eps_denom: cfg.eps_denom,
        }
    }

    pub fn n_features(&self) -> usize {
        self.projected.nrows()
    }

    /// The constant the alignment term is divided by.
    pub fn divisor(&self) -> f64 {
        self.divisor
    }

    /// Split of the scaled `XᵀK_cX`, as consumed by the update rules.
    pub fn split(&self) -> &SignSplit {
        &self.split
    }

    /// `Tr(XᵀK_cX W H Hᵀ Wᵀ)` divided by the scale divisor.
    pub fn alignment_term(&self, f: &FactorPair) -> f64 {
        let inner = f.w.t().dot(&self.projected.dot(&f.w));
        let hht = f.h.dot(&f.h.t());
        Zip::from(&inner).and(&hht).fold(0.0, |acc, a, b| acc + a * b)
    }

    pub fn objective(&self, f: &FactorPair) -> Result<f64> {
        self.check(f)?;
        Ok(-0.5 * self.alignment_term(f) + regularization(f, self.alpha, self.beta))
    }

    /// One full iteration: the `W` rule, then the `H` rule.
    pub fn step(&self, f: &mut FactorPair, iteration: usize) -> Result<()> {
        self.check(f)?;
        update_w_in_place(f, &self.split, self.alpha, self.eps_denom, iteration)?;
        update_h_in_place(f, &self.split, self.beta, self.eps_denom, iteration)
    }

    fn check(&self, f: &FactorPair) -> Result<()> {
        let d = self.n_features();
        if f.n_features() != d || f.h.dim() != (f.rank(), d) {
            return Err(Error::Input(format!(
                "factor shapes W {:?}, H {:?} do not match {d} features",
                f.w.dim(),
                f.h.dim()
            )));
        }
        Ok(())
    }
}

/// Regularized negative alignment `J(W, H)`, with the alignment term divided
/// by the divisor selected in `cfg.alignment_scale`.
pub fn objective(
    data: &DataMatrix,
    kc: &GramMatrix,
    f: &FactorPair,
    cfg: &SolverConfig,
) -> Result<f64> {
    check_shapes(data, kc, f)?;
    Problem::new(data, kc, cfg)?.objective(f)
}

fn check_split(f: &FactorPair, split: &SignSplit) -> Result<()> {
    let d = f.n_features();
    if split.pos.dim() != (d, d) || split.neg.dim() != (d, d) {
        return Err(Error::Input(format!(
            "split is {:?} but factors have {d} features",
            split.pos.dim()
        )));
    }
    Ok(())
}

/// In-place `m ← m ∘ sqrt(num / (den + eps))`.
fn apply_ratio(
    m: &mut Array2<f64>,
    num: &Array2<f64>,
    den: &Array2<f64>,
    eps: f64,
    iteration: usize,
    context: &'static str,
) -> Result<()> {
    Zip::from(&mut *m)
        .and(num)
        .and(den)
        .for_each(|v, &n, &d| *v *= (n / (d + eps)).sqrt());
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { iteration, context });
    }
    Ok(())
}

pub(crate) fn update_w_in_place(
    f: &mut FactorPair,
    split: &SignSplit,
    alpha: f64,
    eps: f64,
    iteration: usize,
) -> Result<()> {
    let wm = f.w.dot(&f.h.dot(&f.h.t()));
    let mut num = split.pos.dot(&wm);
    num.scaled_add(alpha, &f.w);
    let mut den = split.neg.dot(&wm);
    // (1_{d×d} W)_ij is the j-th column sum of W.
    let col_sums = f.w.sum_axis(Axis(0));
    den += &(col_sums * alpha);
    apply_ratio(&mut f.w, &num, &den, eps, iteration, "W update")
}

pub(crate) fn update_h_in_place(
    f: &mut FactorPair,
    split: &SignSplit,
    beta: f64,
    eps: f64,
    iteration: usize,
) -> Result<()> {
    let wt = f.w.t();
    let wpw = wt.dot(&split.pos.dot(&f.w));
    let wnw = wt.dot(&split.neg.dot(&f.w));
    let mut num = wpw.dot(&f.h);
    num.scaled_add(beta, &f.h);
    let mut den = wnw.dot(&f.h);
    // (H 1_{d×d})_ij is the i-th row sum of H.
    let row_sums: Array1<f64> = f.h.sum_axis(Axis(1)) * beta;
    den += &row_sums.insert_axis(Axis(1));
    apply_ratio(&mut f.h, &num, &den, eps, iteration, "H update")
}

/// One multiplicative step on `W` with `H` held fixed.
pub fn update_w(f: &FactorPair, split: &SignSplit, cfg: &SolverConfig) -> Result<FactorPair> {
    check_split(f, split)?;
    let mut next = f.clone();
    update_w_in_place(&mut next, split, cfg.alpha, cfg.eps_denom, 0)?;
    Ok(next)
}

/// One multiplicative step on `H` with `W` held fixed.
pub fn update_h(f: &FactorPair, split: &SignSplit, cfg: &SolverConfig) -> Result<FactorPair> {
    check_split(f, split)?;
    let mut next = f.clone();
    update_h_in_place(&mut next, split, cfg.beta, cfg.eps_denom, 0)?;
    Ok(next)
}

/// Row ℓ₂ norms of `W` and all row indices ordered by descending norm,
/// ties broken by ascending index.
pub fn rank_rows(w: &Array2<f64>) -> (Vec<usize>, Vec<f64>) {
    let norms: Vec<f64> = w
        .rows()
        .into_iter()
        .map(|r| r.dot(&r).sqrt())
        .collect();
    let mut order: Vec<usize> = (0..norms.len()).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    (order, norms)
}

pub(crate) fn validate_k(data: &DataMatrix, k: usize) -> Result<()> {
    let d = data.n_features();
    if k < 1 || k >= d {
        return Err(Error::Input(format!(
            "k must satisfy 1 <= k < d = {d}, got {k}"
        )));
    }
    Ok(())
}

pub(crate) fn validate_fit_inputs(
    data: &DataMatrix,
    kc: &GramMatrix,
    k: usize,
    cfg: &SolverConfig,
) -> Result<()> {
    cfg.validate()?;
    validate_k(data, k)?;
    if kc.dim() != data.n_samples() {
        return Err(Error::Input(format!(
            "kernel is {n}x{n} but data has {m} samples",
            n = kc.dim(),
            m = data.n_samples()
        )));
    }
    if !kc.is_centered() {
        return Err(Error::Input("fit expects a centered kernel".into()));
    }
    Ok(())
}

pub(crate) fn converged(prev: f64, current: f64, rel_tol: f64) -> bool {
    (current - prev).abs() <= rel_tol * prev.abs().max(1.0)
}

pub(crate) struct Outcome {
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
}

pub(crate) fn finish(f: FactorPair, k: usize, seed: u64, out: Outcome) -> SelectionResult {
    let (order, row_norms) = rank_rows(&f.w);
    SelectionResult {
        ranked_indices: order[..k].to_vec(),
        row_norms,
        seed,
        trace: SolverTrace {
            objective_per_iter: out.trace,
            iterations_run: out.iterations,
            converged: out.converged,
            diverged: out.diverged,
            final_factors: f,
        },
    }
}

/// Runs the single-kernel solver and selects the top `k` features.
pub fn fit(
    data: &DataMatrix,
    kc: &GramMatrix,
    k: usize,
    cfg: &SolverConfig,
) -> Result<SelectionResult> {
    validate_fit_inputs(data, kc, k, cfg)?;
    let mut f = cfg.initial_factors(data.n_features(), k)?;
    // XᵀK_cX does not change across iterations.
    let problem = Problem::new(data, kc, cfg)?;

    let mut prev = finite_objective(&problem, &f, 0)?;
    let mut out = Outcome {
        trace: vec![prev],
        iterations: 0,
        converged: false,
        diverged: false,
    };
    for t in 1..=cfg.max_iter {
        let before = f.clone();
        let j = match problem
            .step(&mut f, t)
            .and_then(|_| finite_objective(&problem, &f, t))
        {
            Ok(j) => j,
            Err(e @ Error::NonFinite { .. }) => {
                if cfg.divergence == Divergence::Error {
                    return Err(e);
                }
                f = before;
                out.diverged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        out.trace.push(j);
        out.iterations = t;
        if converged(prev, j, cfg.rel_tol) {
            out.converged = true;
            break;
        }
        prev = j;
    }
    Ok(finish(f, k, cfg.seed, out))
}

pub(crate) fn finite_objective(problem: &Problem, f: &FactorPair, iteration: usize) -> Result<f64> {
    let j = problem.objective(f)?;
    if !j.is_finite() {
        return Err(Error::NonFinite {
            iteration,
            context: "objective",
        });
    }
    Ok(j)
}
