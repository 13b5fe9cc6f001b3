//! Kernel (Gram) matrices: construction from data, double-centering, cosine
//! normalization, alignment and the positive/negative split used by the
//! multiplicative solvers.

use std::collections::HashSet;
use std::fmt;

use ndarray::{Array2, ArrayView1, Axis, Zip};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sample-by-feature matrix with feature names and optional class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Array2<f64>,
    feature_names: Vec<String>,
    labels: Option<Vec<usize>>,
}

impl DataMatrix {
    pub fn new(
        values: Array2<f64>,
        feature_names: Vec<String>,
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        let (n, d) = values.dim();
        if n < 2 {
            return Err(Error::Input(format!("need at least 2 samples, got {n}")));
        }
        if d < 1 {
            return Err(Error::Input("need at least 1 feature".into()));
        }
        if let Some(((i, j), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Input(format!("non-finite entry {v} at ({i}, {j})")));
        }
        if feature_names.len() != d {
            return Err(Error::Input(format!(
                "{} feature names for {d} columns",
                feature_names.len()
            )));
        }
        let mut seen = HashSet::with_capacity(d);
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Input(format!("duplicate feature name {name:?}")));
            }
        }
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(Error::Input(format!(
                    "{} labels for {n} samples",
                    labels.len()
                )));
            }
        }
        Ok(Self {
            values,
            feature_names,
            labels,
        })
    }

    /// Builds a matrix with generated feature names `f0, f1, ...`.
    pub fn from_values(values: Array2<f64>, labels: Option<Vec<usize>>) -> Result<Self> {
        let names = (0..values.ncols()).map(|j| format!("f{j}")).collect();
        Self::new(values, names, labels)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    /// Number of distinct classes among the labels, if present.
    pub fn n_classes(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().copied().collect::<HashSet<_>>().len())
    }

    /// Restricts the matrix to the given columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Self> {
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.n_features()) {
            return Err(Error::Input(format!(
                "feature index {bad} out of range for {} features",
                self.n_features()
            )));
        }
        let values = self.values.select(Axis(1), columns);
        let names = columns
            .iter()
            .map(|&c| self.feature_names[c].clone())
            .collect();
        Self::new(values, names, self.labels.clone())
    }

    pub(crate) fn with_values(&self, values: Array2<f64>) -> Self {
        debug_assert_eq!(values.dim(), self.values.dim());
        Self {
            values,
            feature_names: self.feature_names.clone(),
            labels: self.labels.clone(),
        }
    }
}

/// Kernel family and its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Kernel {
    /// `x·y`
    Linear,
    /// `(x·y + offset)^degree`
    Polynomial { offset: f64, degree: u32 },
    /// `exp(-‖x−y‖² / (2σ²))`
    Gaussian { sigma: f64 },
    /// `exp(-‖x−y‖₁ / σ)`
    Laplacian { sigma: f64 },
}

impl Kernel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Kernel::Linear => Ok(()),
            Kernel::Polynomial { offset, degree } => {
                if degree < 1 {
                    Err(Error::Parameter("polynomial degree must be >= 1".into()))
                } else if !offset.is_finite() {
                    Err(Error::Parameter("polynomial offset must be finite".into()))
                } else {
                    Ok(())
                }
            }
            Kernel::Gaussian { sigma } | Kernel::Laplacian { sigma } => {
                if sigma > 0.0 && sigma.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Parameter(format!(
                        "bandwidth must be positive and finite, got {sigma}"
                    )))
                }
            }
        }
    }

    /// Evaluates the kernel on a pair of samples.
    pub fn eval(&self, x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
        match *self {
            Kernel::Linear => x.dot(&y),
            Kernel::Polynomial { offset, degree } => (x.dot(&y) + offset).powi(degree as i32),
            Kernel::Gaussian { sigma } => {
                let sq: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                (-sq / (2.0 * sigma * sigma)).exp()
            }
            Kernel::Laplacian { sigma } => {
                let l1: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b).abs()).sum();
                (-l1 / sigma).exp()
            }
        }
    }

    /// The 14-kernel candidate set: linear, polynomial (c = 1, degree 2/4/6),
    /// and Gaussian and Laplacian with σ ∈ {0.01, 0.1, 1, 10, 100}.
    pub fn default_bank() -> Vec<Kernel> {
        let sigmas = [0.01, 0.1, 1.0, 10.0, 100.0];
        let mut bank = vec![Kernel::Linear];
        bank.extend([2, 4, 6].map(|degree| Kernel::Polynomial {
            offset: 1.0,
            degree,
        }));
        bank.extend(sigmas.map(|sigma| Kernel::Gaussian { sigma }));
        bank.extend(sigmas.map(|sigma| Kernel::Laplacian { sigma }));
        bank
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Linear => write!(f, "linear"),
            Kernel::Polynomial { offset, degree } => write!(f, "poly(c={offset},d={degree})"),
            Kernel::Gaussian { sigma } => write!(f, "gaussian(sigma={sigma})"),
            Kernel::Laplacian { sigma } => write!(f, "laplacian(sigma={sigma})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GramState {
    Raw,
    Centered,
    CenteredNormalized,
}

/// Symmetric n×n kernel matrix tagged with its preprocessing state.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    values: Array2<f64>,
    state: GramState,
    degenerate_rows: Vec<usize>,
}

impl GramMatrix {
    /// Wraps a user-supplied kernel matrix. The matrix is symmetrized.
    pub fn raw(values: Array2<f64>) -> Result<Self> {
        check_square_finite(&values)?;
        Ok(Self::new_unchecked(symmetrize(values), GramState::Raw))
    }

    /// Wraps a matrix that is already centered, verifying that every row sum
    /// vanishes relative to the largest entry.
    pub fn from_centered(values: Array2<f64>) -> Result<Self> {
        check_square_finite(&values)?;
        let values = symmetrize(values);
        let scale = max_abs(&values);
        let tol = 1e-8 * scale.max(f64::MIN_POSITIVE);
        if let Some((i, s)) = values
            .sum_axis(Axis(1))
            .iter()
            .enumerate()
            .find(|(_, s)| s.abs() > tol)
        {
            return Err(Error::Input(format!(
                "row {i} sums to {s}, matrix is not centered"
            )));
        }
        Ok(Self::new_unchecked(values, GramState::Centered))
    }

    pub(crate) fn new_unchecked(values: Array2<f64>, state: GramState) -> Self {
        Self {
            values,
            state,
            degenerate_rows: Vec::new(),
        }
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn state(&self) -> GramState {
        self.state
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    /// Rows zeroed by [`cosine_normalize`] because their diagonal vanished.
    pub fn degenerate_rows(&self) -> &[usize] {
        &self.degenerate_rows
    }

    pub fn is_centered(&self) -> bool {
        self.state != GramState::Raw
    }
}

/// Positive and negative parts of a matrix: `source = pos − neg`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignSplit {
    pub pos: Array2<f64>,
    pub neg: Array2<f64>,
}

fn check_square_finite(values: &Array2<f64>) -> Result<()> {
    let (r, c) = values.dim();
    if r != c || r == 0 {
        return Err(Error::Input(format!(
            "kernel matrix must be square and nonempty, got {r}x{c}"
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("kernel matrix has non-finite entries".into()));
    }
    Ok(())
}

pub(crate) fn max_abs(m: &Array2<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// `(m + mᵀ) / 2`.
pub(crate) fn symmetrize(mut m: Array2<f64>) -> Array2<f64> {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[[i, j]] + m[[j, i]]);
            m[[i, j]] = avg;
            m[[j, i]] = avg;
        }
    }
    m
}

/// Raw Gram matrix `K_ij = k(x_i, x_j)`.
pub fn gram(data: &DataMatrix, kernel: &Kernel) -> Result<GramMatrix> {
    kernel.validate()?;
    let x = data.values();
    let n = x.nrows();
    let values = match *kernel {
        Kernel::Linear => symmetrize(x.dot(&x.t())),
        Kernel::Polynomial { offset, degree } => {
            let mut g = symmetrize(x.dot(&x.t()));
            g.mapv_inplace(|v| (v + offset).powi(degree as i32));
            g
        }
        Kernel::Gaussian { .. } | Kernel::Laplacian { .. } => {
            let rows: Vec<Vec<f64>> = (0..n)
                .into_par_iter()
                .map(|i| {
                    (i + 1..n)
                        .map(|j| kernel.eval(x.row(i), x.row(j)))
                        .collect()
                })
                .collect();
            let mut g = Array2::<f64>::eye(n);
            for (i, row) in rows.into_iter().enumerate() {
                for (offset, v) in row.into_iter().enumerate() {
                    let j = i + 1 + offset;
                    g[[i, j]] = v;
                    g[[j, i]] = v;
                }
            }
            g
        }
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input(format!(
            "kernel {kernel} produced non-finite entries on this data"
        )));
    }
    Ok(GramMatrix::new_unchecked(values, GramState::Raw))
}

/// Double-centering: subtract row and column means, add back the grand mean.
/// Equivalent to `ΛKΛ` with `Λ = I − 11ᵀ/n`.
pub fn center(g: &GramMatrix) -> Result<GramMatrix> {
    if g.state == GramState::CenteredNormalized {
        return Err(Error::Input(
            "cannot re-center a cosine-normalized kernel".into(),
        ));
    }
    Ok(GramMatrix::new_unchecked(
        double_center(g.values()),
        GramState::Centered,
    ))
}

pub(crate) fn double_center(k: &Array2<f64>) -> Array2<f64> {
    let n = k.nrows() as f64;
    let row_means = k.sum_axis(Axis(1)) / n;
    let col_means = k.sum_axis(Axis(0)) / n;
    let grand = row_means.sum() / n;
    let mut out = k.clone();
    Zip::indexed(&mut out).for_each(|(i, j), v| {
        *v = *v - row_means[i] - col_means[j] + grand;
    });
    symmetrize(out)
}

/// Entrywise cosine normalization `K_ij / sqrt(K_ii K_jj)` on an arbitrary
/// square matrix. Rows whose diagonal is at most `1e-12 × max|K|` are zeroed;
/// their indices are returned.
pub fn cosine_normalize_entries(k: &Array2<f64>) -> (Array2<f64>, Vec<usize>) {
    let n = k.nrows();
    let tol = 1e-12 * max_abs(k);
    let diag: Vec<f64> = k.diag().to_vec();
    let degenerate: Vec<usize> = (0..n).filter(|&i| diag[i] <= tol).collect();
    let inv_sqrt: Vec<f64> = diag
        .iter()
        .map(|&v| if v > tol { 1.0 / v.sqrt() } else { 0.0 })
        .collect();
    let mut out = k.clone();
    Zip::indexed(&mut out).for_each(|(i, j), v| {
        *v *= inv_sqrt[i] * inv_sqrt[j];
    });
    let mut out = symmetrize(out);
    for i in 0..n {
        if inv_sqrt[i] > 0.0 {
            out[[i, i]] = 1.0;
        }
    }
    (out, degenerate)
}

/// Cosine-normalizes a centered kernel so every nondegenerate diagonal is 1.
pub fn cosine_normalize(g: &GramMatrix) -> Result<GramMatrix> {
    if g.state != GramState::Centered {
        return Err(Error::Input(format!(
            "cosine normalization expects a centered kernel, got {:?}",
            g.state
        )));
    }
    let (values, degenerate_rows) = cosine_normalize_entries(g.values());
    Ok(GramMatrix {
        values,
        state: GramState::CenteredNormalized,
        degenerate_rows,
    })
}

/// Centered kernel alignment. Raw inputs are centered first.
///
/// With `normalized` this is `Tr(A_c B_c) / (‖A_c‖_F ‖B_c‖_F)`; otherwise
/// `Tr(A_c B_c) / n²`.
pub fn alignment(a: &GramMatrix, b: &GramMatrix, normalized: bool) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Input(format!(
            "kernel dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let prepare = |g: &GramMatrix| -> (Array2<f64>, f64) {
        match g.state {
            GramState::Raw => (double_center(g.values()), max_abs(g.values())),
            _ => (g.values().clone(), max_abs(g.values())),
        }
    };
    let (ac, a_scale) = prepare(a);
    let (bc, b_scale) = prepare(b);
    // Tr(A B) for symmetric A, B is the entrywise inner product.
    let inner: f64 = Zip::from(&ac).and(&bc).fold(0.0, |acc, x, y| acc + x * y);
    let n = a.dim() as f64;
    if !normalized {
        return Ok(inner / (n * n));
    }
    let na = ac.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = bc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na <= 1e-12 * n * a_scale || nb <= 1e-12 * n * b_scale || na == 0.0 || nb == 0.0 {
        return Err(Error::DegenerateAlignment);
    }
    Ok((inner / (na * nb)).clamp(-1.0, 1.0))
}

/// Splits `m` into entrywise nonnegative parts with `m = pos − neg`.
pub fn sign_split(m: &Array2<f64>) -> SignSplit {
    debug_assert!(m.iter().all(|v| v.is_finite()));
    SignSplit {
        pos: m.mapv(|v| v.max(0.0)),
        neg: m.mapv(|v| (-v).max(0.0)),
    }
}

/// `Xᵀ K_c X`, symmetrized.
pub fn projected_gram(data: &DataMatrix, g: &GramMatrix) -> Result<Array2<f64>> {
    if g.dim() != data.n_samples() {
        return Err(Error::Input(format!(
            "kernel is {n}x{n} but data has {m} samples",
            n = g.dim(),
            m = data.n_samples()
        )));
    }
    if !g.is_centered() {
        return Err(Error::Input("projected_gram expects a centered kernel".into()));
    }
    let x = data.values();
    let kx = g.values().dot(x);
    Ok(symmetrize(x.t().dot(&kx)))
}

/// Eigenvalue summary used to flag kernels that are not positive semidefinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdDiagnostic {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub is_psd: bool,
}

/// Declares `g` PSD when its smallest eigenvalue is at least
/// `−1e-8 × largest`. Costs a full symmetric eigendecomposition.
pub fn psd_diagnostic(g: &GramMatrix) -> PsdDiagnostic {
    let n = g.dim();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| g.values[[i, j]]);
    let eig = m.symmetric_eigenvalues();
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    PsdDiagnostic {
        min_eigenvalue: min,
        max_eigenvalue: max,
        is_psd: min >= -1e-8 * max.abs().max(min.abs()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array1};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_data(n: usize, d: usize, seed: u64) -> DataMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0));
        DataMatrix::from_values(values, None).unwrap()
    }

    fn random_symmetric(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0));
        &m + &m.t()
    }

    #[test]
    fn data_matrix_rejects_bad_input() {
        assert!(DataMatrix::from_values(array![[1.0, 2.0]], None).is_err());
        assert!(DataMatrix::from_values(array![[1.0], [f64::NAN]], None).is_err());
        let dup = DataMatrix::new(
            array![[1.0, 2.0], [3.0, 4.0]],
            vec!["a".into(), "a".into()],
            None,
        );
        assert!(dup.is_err());
        assert!(DataMatrix::from_values(array![[1.0], [2.0]], Some(vec![0])).is_err());
    }

    #[test]
    fn kernel_formulas() {
        let x = array![1.0, 2.0];
        let y = array![3.0, 4.0];
        assert_eq!(Kernel::Linear.eval(x.view(), y.view()), 11.0);
        assert_eq!(
            Kernel::Gaussian { sigma: 0.3 }.eval(x.view(), x.view()),
            1.0
        );
        let a = array![1.0, 0.0];
        let b = array![0.0, 1.0];
        let poly = Kernel::Polynomial {
            offset: 1.0,
            degree: 2,
        };
        assert_eq!(poly.eval(a.view(), b.view()), 1.0);
        let lap = Kernel::Laplacian { sigma: 1.0 }.eval(array![0.0].view(), array![1.0].view());
        assert_abs_diff_eq!(lap, (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(lap, 0.367879, epsilon = 1e-6);
    }

    #[test]
    fn zero_bandwidth_is_rejected() {
        let data = random_data(3, 2, 0);
        assert!(matches!(
            gram(&data, &Kernel::Gaussian { sigma: 0.0 }),
            Err(Error::Parameter(_))
        ));
        assert!(gram(&data, &Kernel::Polynomial { offset: 1.0, degree: 0 }).is_err());
    }

    #[test]
    fn radial_grams_have_unit_diagonal() {
        let data = random_data(7, 3, 1);
        for kernel in [Kernel::Gaussian { sigma: 1.5 }, Kernel::Laplacian { sigma: 2.0 }] {
            let g = gram(&data, &kernel).unwrap();
            let v = g.values();
            for i in 0..7 {
                assert_eq!(v[[i, i]], 1.0);
                for j in 0..7 {
                    assert_eq!(v[[i, j]], v[[j, i]]);
                    assert!(v[[i, j]] > 0.0 && v[[i, j]] <= 1.0);
                }
            }
        }
    }

    #[test]
    fn center_small_cases() {
        let ones = GramMatrix::raw(Array2::ones((2, 2))).unwrap();
        let c = center(&ones).unwrap();
        assert!(c.values().iter().all(|&v| v == 0.0));

        let eye = GramMatrix::raw(Array2::eye(2)).unwrap();
        let c = center(&eye).unwrap();
        assert_eq!(c.values(), &array![[0.5, -0.5], [-0.5, 0.5]]);
        assert_eq!(c.state(), GramState::Centered);
    }

    #[test]
    fn center_matches_lambda_sandwich() {
        let n = 5;
        let k = random_symmetric(n, 3);
        let lambda = Array2::<f64>::eye(n) - Array2::<f64>::from_elem((n, n), 1.0 / n as f64);
        let expected = lambda.dot(&k).dot(&lambda);
        let got = center(&GramMatrix::raw(k).unwrap()).unwrap();
        for (a, b) in got.values().iter().zip(expected.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        let ones = Array1::<f64>::ones(n);
        for v in got.values().dot(&ones) {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn linear_kernel_centering_equals_centered_data_gram() {
        let data = random_data(6, 4, 9);
        let kc = center(&gram(&data, &Kernel::Linear).unwrap()).unwrap();
        let x = data.values();
        let xc = x - &x.mean_axis(Axis(0)).unwrap();
        let expected = xc.dot(&xc.t());
        for (a, b) in kc.values().iter().zip(expected.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn from_centered_checks_row_sums() {
        assert!(GramMatrix::from_centered(array![[0.5, -0.5], [-0.5, 0.5]]).is_ok());
        assert!(GramMatrix::from_centered(array![[1.0, 0.0], [0.0, 1.0]]).is_err());
    }

    #[test]
    fn cosine_normalize_examples() {
        let (out, degenerate) = cosine_normalize_entries(&array![[4.0, 2.0], [2.0, 1.0]]);
        assert_eq!(out, array![[1.0, 1.0], [1.0, 1.0]]);
        assert!(degenerate.is_empty());

        let data = random_data(4, 3, 11);
        let kc = center(&gram(&data, &Kernel::Gaussian { sigma: 1.0 }).unwrap()).unwrap();
        let normalized = cosine_normalize(&kc).unwrap();
        let (v, k) = (normalized.values(), kc.values());
        for i in 0..4 {
            assert_eq!(v[[i, i]], 1.0);
            for j in 0..4 {
                assert_eq!(v[[i, j]], v[[j, i]]);
                assert!(v[[i, j]].abs() <= 1.0 + 1e-12);
                let oracle = k[[i, j]] / (k[[i, i]] * k[[j, j]]).sqrt();
                assert_abs_diff_eq!(v[[i, j]], oracle, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn cosine_normalize_zeroes_degenerate_rows() {
        let k = array![[0.0, 0.0, 0.0], [0.0, 2.0, -2.0], [0.0, -2.0, 2.0]];
        let g = GramMatrix::from_centered(k).unwrap();
        let out = cosine_normalize(&g).unwrap();
        assert_eq!(out.degenerate_rows(), &[0]);
        assert_eq!(out.values().row(0).to_vec(), vec![0.0, 0.0, 0.0]);
        assert_eq!(out.values()[[1, 1]], 1.0);
        assert_abs_diff_eq!(out.values()[[1, 2]], -1.0, epsilon = 1e-15);
        assert!(cosine_normalize(&GramMatrix::raw(Array2::eye(2)).unwrap()).is_err());
    }

    #[test]
    fn alignment_examples() {
        let data = random_data(6, 3, 5);
        let k = gram(&data, &Kernel::Gaussian { sigma: 1.0 }).unwrap();
        assert_abs_diff_eq!(alignment(&k, &k, true).unwrap(), 1.0, epsilon = 1e-12);
        let scaled = GramMatrix::raw(k.values() * 3.5).unwrap();
        assert_abs_diff_eq!(alignment(&k, &scaled, true).unwrap(), 1.0, epsilon = 1e-12);

        let a = GramMatrix::from_centered(array![[1.0, -1.0], [-1.0, 1.0]]).unwrap();
        // Tr(a a) = 4, n² = 4.
        assert_abs_diff_eq!(alignment(&a, &a, false).unwrap(), 1.0, epsilon = 1e-15);

        let ones = GramMatrix::raw(Array2::ones((6, 6))).unwrap();
        assert!(matches!(
            alignment(&ones, &k, true),
            Err(Error::DegenerateAlignment)
        ));
        assert!(alignment(&a, &k, true).is_err());
    }

    #[test]
    fn alignment_is_symmetric_and_scale_invariant() {
        let data = random_data(8, 3, 21);
        let a = gram(&data, &Kernel::Linear).unwrap();
        let b = gram(&data, &Kernel::Laplacian { sigma: 1.0 }).unwrap();
        let ab = alignment(&a, &b, true).unwrap();
        let ba = alignment(&b, &a, true).unwrap();
        assert_abs_diff_eq!(ab, ba, epsilon = 1e-12);
        let b2 = GramMatrix::raw(b.values() * 7.0).unwrap();
        assert_abs_diff_eq!(alignment(&a, &b2, true).unwrap(), ab, epsilon = 1e-12);
        assert!((-1.0..=1.0).contains(&ab));
    }

    #[test]
    fn sign_split_examples() {
        let s = sign_split(&array![[1.0, -2.0], [0.0, 3.0]]);
        assert_eq!(s.pos, array![[1.0, 0.0], [0.0, 3.0]]);
        assert_eq!(s.neg, array![[0.0, 2.0], [0.0, 0.0]]);

        let m = array![[1.0, 2.0], [0.5, 0.0]];
        let s = sign_split(&m);
        assert_eq!(s.pos, m);
        assert!(s.neg.iter().all(|&v| v == 0.0));
        let s = sign_split(&(-&m));
        assert!(s.pos.iter().all(|&v| v == 0.0));
        assert_eq!(s.neg, m);
    }

    #[test]
    fn projected_gram_examples() {
        let kc = GramMatrix::from_centered(array![[0.5, -0.5], [-0.5, 0.5]]).unwrap();
        let eye = DataMatrix::from_values(Array2::eye(2), None).unwrap();
        assert_eq!(projected_gram(&eye, &kc).unwrap(), kc.values().clone());

        let zero = DataMatrix::from_values(Array2::zeros((2, 3)), None).unwrap();
        assert!(projected_gram(&zero, &kc)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));

        let wrong = random_data(3, 2, 0);
        assert!(projected_gram(&wrong, &kc).is_err());
    }

    #[test]
    fn projected_gram_matches_naive_loops() {
        let data = random_data(4, 3, 17);
        let kc = center(&gram(&data, &Kernel::Linear).unwrap()).unwrap();
        let got = projected_gram(&data, &kc).unwrap();
        let (x, k) = (data.values(), kc.values());
        for a in 0..3 {
            for b in 0..3 {
                let mut s = 0.0;
                for i in 0..4 {
                    for j in 0..4 {
                        s += x[[i, a]] * k[[i, j]] * x[[j, b]];
                    }
                }
                assert_abs_diff_eq!(got[[a, b]], s, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn psd_diagnostic_flags_indefinite_matrices() {
        let data = random_data(6, 2, 4);
        let g = center(&gram(&data, &Kernel::Gaussian { sigma: 1.0 }).unwrap()).unwrap();
        assert!(psd_diagnostic(&g).is_psd);
        let indefinite = GramMatrix::raw(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let diag = psd_diagnostic(&indefinite);
        assert!(!diag.is_psd);
        assert_abs_diff_eq!(diag.min_eigenvalue, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn default_bank_has_fourteen_kernels() {
        let bank = Kernel::default_bank();
        assert_eq!(bank.len(), 14);
        assert!(bank.iter().all(|k| k.validate().is_ok()));
    }
}
