//! Clustering-based evaluation of a feature subset: k-means, clustering
//! accuracy (ACC) under the best one-to-one label matching, normalized
//! mutual information (NMI), and the distance-correlation redundancy rate
//! (RED).

use std::collections::HashMap;

use ndarray::{Array2, ArrayView1, Axis};
use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernelspace::DataMatrix;

/// Cluster ids in `0..n_clusters`, one per sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusteringLabels {
    assignments: Vec<usize>,
    n_clusters: usize,
}

impl ClusteringLabels {
    pub fn new(assignments: Vec<usize>, n_clusters: usize) -> Result<Self> {
        if assignments.is_empty() {
            return Err(Error::Input("labeling has no samples".into()));
        }
        if let Some(&bad) = assignments.iter().find(|&&a| a >= n_clusters) {
            return Err(Error::Input(format!(
                "cluster id {bad} out of range for {n_clusters} clusters"
            )));
        }
        Ok(Self {
            assignments,
            n_clusters,
        })
    }

    /// Relabels arbitrary ids to `0..C` in order of first appearance.
    pub fn from_ids(ids: &[usize]) -> Result<Self> {
        let mut map = HashMap::new();
        let assignments = ids
            .iter()
            .map(|id| {
                let next = map.len();
                *map.entry(*id).or_insert(next)
            })
            .collect();
        Self::new(assignments, map.len())
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub labels: ClusteringLabels,
    pub centroids: Array2<f64>,
    /// Within-cluster sum of squares after every Lloyd iteration.
    pub sse_history: Vec<f64>,
    pub iterations: usize,
}

const KMEANS_MAX_ITER: usize = 100;

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: ArrayView1<f64>, centroids: &Array2<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.rows().into_iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Lloyd's algorithm from `c` distinct random data points (D²-weighted
/// draws), until the assignment stops changing or 100 iterations.
pub fn kmeans(points: &Array2<f64>, c: usize, seed: u64) -> Result<ClusteringLabels> {
    Ok(kmeans_fit(points, c, seed)?.labels)
}

pub fn kmeans_fit(points: &Array2<f64>, c: usize, seed: u64) -> Result<KMeansFit> {
    let (n, dim) = points.dim();
    if c == 0 || c > n {
        return Err(Error::Input(format!(
            "need 1 <= C <= n = {n} clusters, got {c}"
        )));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("points must be finite".into()));
    }
    let mut centroids = Array2::<f64>::zeros((c, dim));
    for (j, i) in initial_points(points, c, seed).into_iter().enumerate() {
        centroids.row_mut(j).assign(&points.row(i));
    }

    let mut assignments: Vec<usize> = Vec::new();
    let mut sse_history = Vec::new();
    let mut iterations = 0;
    while iterations < KMEANS_MAX_ITER {
        iterations += 1;
        let mut next = Vec::with_capacity(n);
        let mut dist = Vec::with_capacity(n);
        for p in points.rows() {
            let (j, d) = nearest(p, &centroids);
            next.push(j);
            dist.push(d);
        }
        repair_empty(&mut next, &mut dist, c);

        let mut counts = vec![0usize; c];
        centroids.fill(0.0);
        for (p, &j) in points.rows().into_iter().zip(&next) {
            counts[j] += 1;
            let mut row = centroids.row_mut(j);
            row += &p;
        }
        for (mut row, &m) in centroids.rows_mut().into_iter().zip(&counts) {
            row /= m as f64;
        }
        let sse = points
            .rows()
            .into_iter()
            .zip(&next)
            .map(|(p, &j)| sq_dist(p, centroids.row(j)))
            .sum();
        sse_history.push(sse);
        let done = next == assignments;
        assignments = next;
        if done {
            break;
        }
    }
    Ok(KMeansFit {
        labels: ClusteringLabels::new(assignments, c)?,
        centroids,
        sse_history,
        iterations,
    })
}

/// `c` distinct sample indices. The first is uniform; each further one is
/// drawn with probability proportional to its squared distance from the
/// nearest point already chosen, falling back to a uniform draw among the
/// unchosen samples when all remaining distances are zero.
fn initial_points(points: &Array2<f64>, c: usize, seed: u64) -> Vec<usize> {
    let n = points.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = points
        .rows()
        .into_iter()
        .map(|p| sq_dist(p, points.row(chosen[0])))
        .collect();
    while chosen.len() < c {
        let next = match WeightedIndex::new(&d2) {
            Ok(dist) => dist.sample(&mut rng),
            Err(_) => {
                let rest: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
                rest[rng.random_range(0..rest.len())]
            }
        };
        chosen.push(next);
        for (i, p) in points.rows().into_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, points.row(next)));
        }
        // Already chosen indices must never be drawn again, even when they
        // duplicate another sample.
        for &i in &chosen {
            d2[i] = 0.0;
        }
    }
    chosen
}

/// Gives every empty cluster the point farthest from its current centroid,
/// taken from a cluster that keeps at least one other member.
fn repair_empty(assign: &mut [usize], dist: &mut [f64], c: usize) {
    let mut counts = vec![0usize; c];
    for &j in assign.iter() {
        counts[j] += 1;
    }
    for empty in 0..c {
        if counts[empty] > 0 {
            continue;
        }
        let mut far: Option<usize> = None;
        for i in 0..assign.len() {
            if counts[assign[i]] > 1 && far.is_none_or(|f| dist[i] > dist[f]) {
                far = Some(i);
            }
        }
        if let Some(i) = far {
            counts[assign[i]] -= 1;
            counts[empty] = 1;
            assign[i] = empty;
            dist[i] = 0.0;
        }
    }
}

fn contingency(pred: &ClusteringLabels, truth: &ClusteringLabels) -> Result<Vec<Vec<usize>>> {
    if pred.len() != truth.len() {
        return Err(Error::Input(format!(
            "labelings have {} and {} samples",
            pred.len(),
            truth.len()
        )));
    }
    let mut table = vec![vec![0usize; truth.n_clusters()]; pred.n_clusters()];
    for (&p, &t) in pred.assignments.iter().zip(&truth.assignments) {
        table[p][t] += 1;
    }
    Ok(table)
}

/// Fraction of samples matched under the best one-to-one mapping of
/// predicted clusters to true classes.
pub fn acc(pred: &ClusteringLabels, truth: &ClusteringLabels) -> Result<f64> {
    let table = contingency(pred, truth)?;
    let size = pred.n_clusters().max(truth.n_clusters());
    let mut weights = Matrix::new(size, size, 0i64);
    for (p, row) in table.iter().enumerate() {
        for (t, &count) in row.iter().enumerate() {
            weights[(p, t)] = count as i64;
        }
    }
    let (matched, _) = kuhn_munkres(&weights);
    Ok(matched as f64 / pred.len() as f64)
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// `I(P, Q) / sqrt(H(P) H(Q))` with natural-log entropies. When either
/// entropy is zero the result is 1 if both are, 0 otherwise.
pub fn nmi(pred: &ClusteringLabels, truth: &ClusteringLabels) -> Result<f64> {
    let table = contingency(pred, truth)?;
    let n = pred.len() as f64;
    let rows: Vec<usize> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<usize> = (0..truth.n_clusters())
        .map(|t| table.iter().map(|r| r[t]).sum())
        .collect();
    let hp = entropy(rows.iter().copied(), n);
    let hq = entropy(cols.iter().copied(), n);
    if hp == 0.0 || hq == 0.0 {
        return Ok(if hp == 0.0 && hq == 0.0 { 1.0 } else { 0.0 });
    }
    let mut mi = 0.0;
    for (p, row) in table.iter().enumerate() {
        for (t, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += c / n * (c * n / (rows[p] as f64 * cols[t] as f64)).ln();
            }
        }
    }
    Ok((mi / (hp * hq).sqrt()).clamp(0.0, 1.0))
}

/// Double-centered pairwise absolute-difference matrix of one variable and
/// its distance variance `mean(A ∘ A)`.
fn centered_distances(x: ArrayView1<f64>) -> (Array2<f64>, f64) {
    let n = x.len();
    let mut a = Array2::from_shape_fn((n, n), |(i, j)| (x[i] - x[j]).abs());
    let row_means = a.mean_axis(Axis(1)).expect("n >= 1");
    let grand = row_means.mean().expect("n >= 1");
    for i in 0..n {
        for j in 0..n {
            a[[i, j]] += grand - row_means[i] - row_means[j];
        }
    }
    let var = a.iter().map(|v| v * v).sum::<f64>() / (n * n) as f64;
    (a, var)
}

fn dcor_from(a: &(Array2<f64>, f64), b: &(Array2<f64>, f64)) -> f64 {
    let n2 = a.0.len() as f64;
    let denom = (a.1 * b.1).sqrt();
    if denom == 0.0 {
        return 0.0;
    }
    let cov = a.0.iter().zip(b.0.iter()).map(|(x, y)| x * y).sum::<f64>() / n2;
    (cov / denom).max(0.0).sqrt().min(1.0)
}

/// Distance correlation (sample V-statistic form). 0 when either variable
/// is constant.
pub fn distance_correlation(x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Input(format!(
            "vectors have lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Input("distance correlation needs n >= 2".into()));
    }
    Ok(dcor_from(&centered_distances(x), &centered_distances(y)))
}

/// Mean distance correlation over all unordered pairs of columns.
pub fn red(selected: &Array2<f64>) -> Result<f64> {
    let (n, m) = selected.dim();
    if m < 2 {
        return Err(Error::Input(format!("RED needs at least 2 features, got {m}")));
    }
    if n < 2 {
        return Err(Error::Input("RED needs n >= 2".into()));
    }
    let table = RedundancyTable::new(selected);
    let all: Vec<usize> = (0..m).collect();
    table.red(&all)
}

/// Distance correlation of every pair among a set of columns, computed
/// once so that many subsets can be scored cheaply.
#[derive(Debug, Clone, PartialEq)]
pub struct RedundancyTable {
    /// Position of each original column in `dc`, if covered.
    slot: Vec<Option<usize>>,
    dc: Array2<f64>,
}

/// Above this many stored entries the centered distance matrices are
/// recomputed per pair instead of cached.
const CACHE_ENTRIES: usize = 1 << 25;

impl RedundancyTable {
    /// Covers every column of `x`.
    pub fn new(x: &Array2<f64>) -> Self {
        let all: Vec<usize> = (0..x.ncols()).collect();
        Self::for_columns(x, &all)
    }

    /// Covers only `columns` (duplicates ignored).
    pub fn for_columns(x: &Array2<f64>, columns: &[usize]) -> Self {
        let n = x.nrows();
        let mut slot = vec![None; x.ncols()];
        let mut cols = Vec::new();
        for &c in columns {
            if slot[c].is_none() {
                slot[c] = Some(cols.len());
                cols.push(c);
            }
        }
        let d = cols.len();
        let pairs: Vec<(usize, usize)> = (0..d)
            .flat_map(|i| (i + 1..d).map(move |j| (i, j)))
            .collect();
        let values: Vec<f64> = if d * n * n <= CACHE_ENTRIES {
            let cache: Vec<_> = cols
                .par_iter()
                .map(|&c| centered_distances(x.column(c)))
                .collect();
            pairs
                .par_iter()
                .map(|&(i, j)| dcor_from(&cache[i], &cache[j]))
                .collect()
        } else {
            pairs
                .par_iter()
                .map(|&(i, j)| {
                    dcor_from(
                        &centered_distances(x.column(cols[i])),
                        &centered_distances(x.column(cols[j])),
                    )
                })
                .collect()
        };
        let mut dc = Array2::<f64>::zeros((d, d));
        for (&(i, j), v) in pairs.iter().zip(values) {
            dc[[i, j]] = v;
            dc[[j, i]] = v;
        }
        for (i, &c) in cols.iter().enumerate() {
            let col = x.column(c);
            dc[[i, i]] = if col.iter().any(|&v| v != col[0]) { 1.0 } else { 0.0 };
        }
        Self { slot, dc }
    }

    /// Distance correlation of two covered columns.
    pub fn get(&self, a: usize, b: usize) -> Result<f64> {
        Ok(self.dc[[self.position(a)?, self.position(b)?]])
    }

    fn position(&self, c: usize) -> Result<usize> {
        self.slot
            .get(c)
            .copied()
            .flatten()
            .ok_or_else(|| Error::Input(format!("feature {c} is not covered by the table")))
    }

    /// RED of the given column subset.
    pub fn red(&self, features: &[usize]) -> Result<f64> {
        let m = features.len();
        if m < 2 {
            return Err(Error::Input(format!("RED needs at least 2 features, got {m}")));
        }
        let pos = features
            .iter()
            .map(|&f| self.position(f))
            .collect::<Result<Vec<_>>>()?;
        let mut sum = 0.0;
        for a in 0..m {
            for b in a + 1..m {
                sum += self.dc[[pos[a], pos[b]]];
            }
        }
        Ok(sum * 2.0 / (m * (m - 1)) as f64)
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub acc_mean: f64,
    pub acc_std: f64,
    pub nmi_mean: f64,
    pub nmi_std: f64,
    /// `None` when fewer than two features are selected.
    pub red: Option<f64>,
    pub repeats: usize,
    pub k_selected: usize,
}

/// Clusters the selected columns `repeats` times (seeds `seed..seed+repeats`)
/// and reports mean and population std of ACC and NMI, plus RED.
pub fn evaluate(
    data: &DataMatrix,
    features: &[usize],
    c: usize,
    repeats: usize,
    seed: u64,
) -> Result<EvalReport> {
    evaluate_inner(data, features, c, repeats, seed, None)
}

/// As [`evaluate`], reading RED from a precomputed table over all columns
/// of `data`.
pub fn evaluate_with_table(
    data: &DataMatrix,
    features: &[usize],
    c: usize,
    repeats: usize,
    seed: u64,
    table: &RedundancyTable,
) -> Result<EvalReport> {
    evaluate_inner(data, features, c, repeats, seed, Some(table))
}

fn evaluate_inner(
    data: &DataMatrix,
    features: &[usize],
    c: usize,
    repeats: usize,
    seed: u64,
    table: Option<&RedundancyTable>,
) -> Result<EvalReport> {
    let labels = data
        .labels()
        .ok_or_else(|| Error::Config("evaluation needs labeled data".into()))?;
    if repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    if features.is_empty() {
        return Err(Error::Input("no features selected".into()));
    }
    let truth = ClusteringLabels::from_ids(labels)?;
    let subset = data.select_columns(features)?;
    let points = subset.values();
    let scores = (0..repeats as u64)
        .into_par_iter()
        .map(|r| {
            let pred = kmeans(points, c, seed.wrapping_add(r))?;
            Ok((acc(&pred, &truth)?, nmi(&pred, &truth)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let (accs, nmis): (Vec<f64>, Vec<f64>) = scores.into_iter().unzip();
    let (acc_mean, acc_std) = mean_std(&accs);
    let (nmi_mean, nmi_std) = mean_std(&nmis);
    let red = match (features.len(), table) {
        (0..=1, _) => None,
        (_, Some(t)) => Some(t.red(features)?),
        (_, None) => Some(red(points)?),
    };
    Ok(EvalReport {
        acc_mean,
        acc_std,
        nmi_mean,
        nmi_std,
        red,
        repeats,
        k_selected: features.len(),
    })
}
