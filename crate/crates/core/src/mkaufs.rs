//! Multiple-kernel solver: the single-kernel updates run on a consensus
//! kernel `Σ ηᵢ K⁽ⁱ⁾`, alternating with an exact solve of the kernel-weight
//! subproblem
//!
//! ```text
//! min_η  −½ Σ ηᵢ fᵢ + γ/2 ‖η‖²   s.t.  η ≥ 0, Σ ηᵢ = 1
//! ```
//!
//! where `fᵢ = Tr(K⁽ⁱ⁾ X W H Hᵀ Wᵀ Xᵀ)`. With the Hessian equal to `γI` the
//! minimizer is the Euclidean projection of `f / (2γ)` onto the simplex.

use ndarray::{Array2, Zip};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kaufs::{
    converged, finish, finite_objective, regularization, validate_k, Divergence, FactorPair,
    Outcome, Problem, SelectionResult, SolverConfig,
};
use crate::kernelspace::{
    center, cosine_normalize, gram, projected_gram, DataMatrix, GramMatrix, GramState, Kernel,
};

/// Candidate kernels, all centered and cosine-normalized, all n×n.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelBank {
    kernels: Vec<GramMatrix>,
}

impl KernelBank {
    pub fn new(kernels: Vec<GramMatrix>) -> Result<Self> {
        let first = kernels
            .first()
            .ok_or_else(|| Error::Input("kernel bank is empty".into()))?;
        let n = first.dim();
        for (i, k) in kernels.iter().enumerate() {
            if k.dim() != n {
                return Err(Error::Input(format!(
                    "kernel {i} is {m}x{m}, expected {n}x{n}",
                    m = k.dim()
                )));
            }
            if k.state() != GramState::CenteredNormalized {
                return Err(Error::Input(format!(
                    "kernel {i} is {:?}, bank entries must be centered and normalized",
                    k.state()
                )));
            }
        }
        Ok(Self { kernels })
    }

    /// Builds `cosine_normalize(center(gram(data, spec)))` for every spec.
    pub fn from_specs(data: &DataMatrix, specs: &[Kernel]) -> Result<Self> {
        let kernels = specs
            .par_iter()
            .map(|spec| standardized_kernel(data, spec))
            .collect::<Result<Vec<_>>>()?;
        Self::new(kernels)
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.kernels[0].dim()
    }

    pub fn kernels(&self) -> &[GramMatrix] {
        &self.kernels
    }
}

/// Gram matrix, centered, then cosine-normalized.
pub fn standardized_kernel(data: &DataMatrix, spec: &Kernel) -> Result<GramMatrix> {
    cosine_normalize(&center(&gram(data, spec)?)?)
}

/// Simplex weights over a bank, with the scores they were solved from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelWeights {
    pub eta: Vec<f64>,
    pub scores: Vec<f64>,
    pub gamma: f64,
}

impl KernelWeights {
    pub fn uniform(n: usize, gamma: f64) -> Self {
        Self {
            eta: vec![1.0 / n as f64; n],
            scores: vec![0.0; n],
            gamma,
        }
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &e) in self.eta.iter().enumerate() {
            if e > self.eta[best] {
                best = i;
            }
        }
        best
    }
}

fn check_simplex(eta: &[f64]) -> Result<()> {
    if eta.iter().any(|&e| !(e >= 0.0) || !e.is_finite()) {
        return Err(Error::Input("kernel weights must be finite and nonnegative".into()));
    }
    let total: f64 = eta.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::Input(format!("kernel weights sum to {total}, not 1")));
    }
    Ok(())
}

/// `Σ ηᵢ K⁽ⁱ⁾`. The result keeps the normalized state of the bank entries.
pub fn consensus(bank: &KernelBank, weights: &KernelWeights) -> Result<GramMatrix> {
    if weights.eta.len() != bank.len() {
        return Err(Error::Input(format!(
            "{} weights for {} kernels",
            weights.eta.len(),
            bank.len()
        )));
    }
    check_simplex(&weights.eta)?;
    let n = bank.dim();
    let mut sum = Array2::<f64>::zeros((n, n));
    for (k, &e) in bank.kernels.iter().zip(&weights.eta) {
        if e != 0.0 {
            sum.scaled_add(e, k.values());
        }
    }
    Ok(GramMatrix::new_unchecked(sum, GramState::CenteredNormalized))
}

/// `fᵢ = Tr(K⁽ⁱ⁾ X W H Hᵀ Wᵀ Xᵀ)` for every kernel in the bank.
pub fn kernel_scores(data: &DataMatrix, bank: &KernelBank, f: &FactorPair) -> Result<Vec<f64>> {
    if bank.dim() != data.n_samples() {
        return Err(Error::Input(format!(
            "bank kernels are {n}x{n} but data has {m} samples",
            n = bank.dim(),
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
    let xw = data.values().dot(&f.w);
    // (X W)(H Hᵀ), so that fᵢ = Σ (K⁽ⁱ⁾ X W) ∘ (X W H Hᵀ).
    let xwm = xw.dot(&f.h.dot(&f.h.t()));
    Ok(bank
        .kernels
        .par_iter()
        .map(|k| {
            let kxw = k.values().dot(&xw);
            Zip::from(&kxw).and(&xwm).fold(0.0, |acc, a, b| acc + a * b)
        })
        .collect())
}

/// Exact minimizer of `−½ Σ ηᵢ fᵢ + γ/2 ‖η‖²` over the probability simplex.
pub fn solve_eta(scores: &[f64], gamma: f64) -> Result<KernelWeights> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Parameter(format!("gamma must be > 0, got {gamma}")));
    }
    if scores.is_empty() {
        return Err(Error::Input("no scores".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Input("scores must be finite".into()));
    }
    let v: Vec<f64> = scores.iter().map(|s| s / (2.0 * gamma)).collect();
    Ok(KernelWeights {
        eta: project_simplex(&v),
        scores: scores.to_vec(),
        gamma,
    })
}

/// Euclidean projection onto `{η ≥ 0, Σ η = 1}` by sorting and thresholding.
/// The input is first shifted so its largest entry is 0, which leaves the
/// projection unchanged and keeps the threshold accurate for large inputs.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let top = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let v: Vec<f64> = v.iter().map(|x| x - top).collect();
    let mut u = v.clone();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Output of [`fit_mk`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MkSelection {
    pub selection: SelectionResult,
    pub weights: KernelWeights,
    /// η after every outer iteration; entry 0 is the uniform start.
    pub eta_history: Vec<Vec<f64>>,
}

fn full_objective(f: &FactorPair, w: &KernelWeights, cfg: &SolverConfig) -> f64 {
    let align: f64 = w.eta.iter().zip(&w.scores).map(|(e, s)| e * s).sum();
    let eta_sq: f64 = w.eta.iter().map(|e| e * e).sum();
    -0.5 * align + regularization(f, cfg.alpha, cfg.beta) + 0.5 * w.gamma * eta_sq
}

/// Runs the multiple-kernel solver. The alignment-scale divisor is fixed
/// from the uniform consensus so that the objective keeps one definition
/// across iterations; the scores stored in the returned weights are divided
/// by it.
pub fn fit_mk(
    data: &DataMatrix,
    bank: &KernelBank,
    k: usize,
    cfg: &SolverConfig,
    gamma: f64,
) -> Result<MkSelection> {
    cfg.validate()?;
    validate_k(data, k)?;
    if bank.dim() != data.n_samples() {
        return Err(Error::Input(format!(
            "bank kernels are {n}x{n} but data has {m} samples",
            n = bank.dim(),
            m = data.n_samples()
        )));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Parameter(format!("gamma must be > 0, got {gamma}")));
    }

    let mut weights = KernelWeights::uniform(bank.len(), gamma);
    let divisor = cfg
        .alignment_scale
        .divisor(&projected_gram(data, &consensus(bank, &weights)?)?);
    let scaled_scores = |f: &FactorPair| -> Result<Vec<f64>> {
        Ok(kernel_scores(data, bank, f)?
            .into_iter()
            .map(|s| s / divisor)
            .collect())
    };

    let mut f = cfg.initial_factors(data.n_features(), k)?;
    weights.scores = scaled_scores(&f)?;
    let mut prev = full_objective(&f, &weights, cfg);
    if !prev.is_finite() {
        return Err(Error::NonFinite {
            iteration: 0,
            context: "objective",
        });
    }
    let mut eta_history = vec![weights.eta.clone()];
    let mut out = Outcome {
        trace: vec![prev],
        iterations: 0,
        converged: false,
        diverged: false,
    };
    for t in 1..=cfg.max_iter {
        let before = (f.clone(), weights.clone());
        let step = (|| -> Result<f64> {
            let kc = consensus(bank, &weights)?;
            let problem = Problem::from_projected(projected_gram(data, &kc)?, divisor, cfg);
            problem.step(&mut f, t)?;
            finite_objective(&problem, &f, t)?;
            let scores = scaled_scores(&f)?;
            if scores.iter().any(|s| !s.is_finite()) {
                return Err(Error::NonFinite {
                    iteration: t,
                    context: "kernel scores",
                });
            }
            weights = solve_eta(&scores, gamma)?;
            let j = full_objective(&f, &weights, cfg);
            if !j.is_finite() {
                return Err(Error::NonFinite {
                    iteration: t,
                    context: "objective",
                });
            }
            Ok(j)
        })();
        let j = match step {
            Ok(j) => j,
            Err(e @ Error::NonFinite { .. }) => {
                if cfg.divergence == Divergence::Error {
                    return Err(e);
                }
                (f, weights) = before;
                out.diverged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        out.trace.push(j);
        out.iterations = t;
        eta_history.push(weights.eta.clone());
        if converged(prev, j, cfg.rel_tol) {
            out.converged = true;
            break;
        }
        prev = j;
    }
    Ok(MkSelection {
        selection: finish(f, k, cfg.seed, out),
        weights,
        eta_history,
    })
}
