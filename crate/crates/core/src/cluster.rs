//! Downstream clustering: similarity graph from codes, normalized spectral
//! embedding, Lloyd k-means, and matching-based accuracy.

use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;

/// Entries of CᵀC below this are truncated to keep the graph sparse.
pub const SIMILARITY_TRUNCATION: f64 = 1e-12;
/// Degree floor for isolated vertices in the normalized Laplacian.
const DEGREE_FLOOR: f64 = 1e-12;

/// Symmetric nonnegative similarity matrix with zero diagonal.
#[derive(Debug, Clone)]
pub struct SimilarityGraph {
    weights: Array2<f64>,
}

impl SimilarityGraph {
    pub fn new(weights: Array2<f64>) -> Result<Self> {
        let n = weights.nrows();
        if weights.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "similarity matrix is {}x{}",
                weights.nrows(),
                weights.ncols()
            )));
        }
        for i in 0..n {
            if weights[[i, i]] != 0.0 {
                return Err(Error::Parse("similarity diagonal must be zero".into()));
            }
            for j in 0..n {
                if weights[[i, j]] < 0.0 {
                    return Err(Error::Parse("similarity weights must be nonnegative".into()));
                }
                if (weights[[i, j]] - weights[[j, i]]).abs() > 1e-12 {
                    return Err(Error::NotSymmetric(
                        (weights[[i, j]] - weights[[j, i]]).abs(),
                    ));
                }
            }
        }
        Ok(Self { weights })
    }

    pub fn len(&self) -> usize {
        self.weights.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.nrows() == 0
    }

    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.weights.view()
    }

    /// Connected components of the positive-weight graph.
    pub fn connected_components(&self) -> usize {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut components = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for u in 0..n {
                    if !seen[u] && self.weights[[v, u]] > 0.0 {
                        seen[u] = true;
                        stack.push(u);
                    }
                }
            }
        }
        components
    }
}

/// Cluster assignment: one id in [0, k) per point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterLabels {
    pub labels: Vec<usize>,
    pub k: usize,
}

impl ClusterLabels {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if labels.iter().any(|&l| l >= k) {
            return Err(Error::Parse(format!("label out of range [0, {k})")));
        }
        Ok(Self { labels, k })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// W = CᵀC with the diagonal zeroed and near-zero entries truncated.
/// Shared atom usage between two codes is exactly the locality signal the
/// regularizer creates, and nonnegative codes make this a valid kernel.
pub fn similarity_graph(codes: ArrayView2<f64>) -> Result<SimilarityGraph> {
    let mut w = codes.t().dot(&codes);
    let n = w.nrows();
    for i in 0..n {
        w[[i, i]] = 0.0;
    }
    w.mapv_inplace(|v| if v < SIMILARITY_TRUNCATION { 0.0 } else { v });
    // symmetrize round-off from the gemm
    for i in 0..n {
        for j in i + 1..n {
            let avg = 0.5 * (w[[i, j]] + w[[j, i]]);
            w[[i, j]] = avg;
            w[[j, i]] = avg;
        }
    }
    SimilarityGraph::new(w)
}

/// Eigendecomposition of a symmetric matrix, ascending eigenvalues with
/// orthonormal eigenvectors (cyclic Jacobi).
pub fn symmetric_eigendecomposition(m: ArrayView2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    linalg::jacobi_eigen(m, 1e-10, 1e-10, 100)
}

/// Normalized spectral embedding (Ng–Jordan–Weiss): rows of the k bottom
/// eigenvectors of L = I − D^(−1/2) W D^(−1/2), row-normalized.
///
/// Returns the n×k embedding and the number of connected components; more
/// than k components makes the embedding ill-posed and is left to the
/// caller to treat as fatal or not.
pub fn spectral_embed(graph: &SimilarityGraph, k: usize) -> Result<(Array2<f64>, usize)> {
    let n = graph.len();
    if k < 2 {
        return Err(Error::Parse(format!("spectral embedding needs k >= 2, got {k}")));
    }
    if n < k {
        return Err(Error::InsufficientData { needed: k, got: n });
    }
    let w = graph.weights();
    let mut inv_sqrt_deg = Array1::zeros(n);
    for i in 0..n {
        let deg = w.row(i).sum().max(DEGREE_FLOOR);
        inv_sqrt_deg[i] = 1.0 / deg.sqrt();
    }
    let mut laplacian = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let norm = inv_sqrt_deg[i] * w[[i, j]] * inv_sqrt_deg[j];
            laplacian[[i, j]] = if i == j { 1.0 - norm } else { -norm };
        }
    }
    let (_, vectors) = symmetric_eigendecomposition(laplacian.view())?;
    let mut embedding = Array2::zeros((n, k));
    for i in 0..n {
        for j in 0..k {
            embedding[[i, j]] = vectors[[i, j]];
        }
        let norm = embedding.row(i).dot(&embedding.row(i)).sqrt();
        if norm > 0.0 {
            for j in 0..k {
                embedding[[i, j]] /= norm;
            }
        }
    }
    Ok((embedding, graph.connected_components()))
}

fn sq_dist(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn lloyd_once(points: ArrayView2<f64>, k: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, f64) {
    let n = points.nrows();
    let dim = points.ncols();

    // k-means++ seeding
    let mut centers = Array2::zeros((k, dim));
    let first = rng.random_range(0..n);
    centers.row_mut(0).assign(&points.row(first));
    let mut dists: Vec<f64> = (0..n)
        .map(|i| sq_dist(points.row(i), centers.row(0)))
        .collect();
    for c in 1..k {
        let total: f64 = dists.iter().sum();
        let chosen = if total <= 0.0 {
            rng.random_range(0..n)
        } else {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in dists.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        };
        centers.row_mut(c).assign(&points.row(chosen));
        for i in 0..n {
            dists[i] = dists[i].min(sq_dist(points.row(i), centers.row(c)));
        }
    }

    let mut labels = vec![0usize; n];
    for _ in 0..300 {
        let mut changed = false;
        for i in 0..n {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let d = sq_dist(points.row(i), centers.row(c));
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        // recompute centers; empty clusters grab the farthest point
        let mut counts = vec![0usize; k];
        centers.fill(0.0);
        for i in 0..n {
            counts[labels[i]] += 1;
            let mut row = centers.row_mut(labels[i]);
            row += &points.row(i);
        }
        for c in 0..k {
            if counts[c] > 0 {
                let mut row = centers.row_mut(c);
                row /= counts[c] as f64;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let farthest = (0..n)
                    .max_by(|&a, &b| {
                        let da = sq_dist(points.row(a), centers.row(labels[a]));
                        let db = sq_dist(points.row(b), centers.row(labels[b]));
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                centers.row_mut(c).assign(&points.row(farthest));
                labels[farthest] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let cost = (0..n).map(|i| sq_dist(points.row(i), centers.row(labels[i]))).sum();
    (labels, cost)
}

/// k-means++ seeded Lloyd iterations; best of `restarts` seeded runs by
/// within-cluster sum of squares.
pub fn kmeans_with_restarts(
    points: ArrayView2<f64>,
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<ClusterLabels> {
    let n = points.nrows();
    if n < k {
        return Err(Error::InsufficientData { needed: k, got: n });
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for r in 0..restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
        let (labels, cost) = lloyd_once(points, k, &mut rng);
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, labels));
        }
    }
    ClusterLabels::new(best.unwrap().1, k)
}

/// k-means with the default 10 restarts.
pub fn kmeans(points: ArrayView2<f64>, k: usize, seed: u64) -> Result<ClusterLabels> {
    kmeans_with_restarts(points, k, seed, 10)
}

/// Hungarian algorithm on a square cost matrix; returns the assignment
/// column for each row minimizing total cost.
fn hungarian(cost: &Array2<f64>) -> Vec<usize> {
    let n = cost.nrows();
    // potentials formulation, 1-indexed internals
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut matched = vec![0usize; n + 1]; // matched[j] = row assigned to column j

    for i in 1..=n {
        matched[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched[j0] = matched[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if matched[j] > 0 {
            assignment[matched[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Best-permutation match fraction between predicted and true labels,
/// computed by Hungarian assignment on the contingency matrix.
pub fn clustering_accuracy(pred: &ClusterLabels, truth: &ClusterLabels) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch(pred.len(), truth.len()));
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput);
    }
    let k = pred.k.max(truth.k);
    let mut contingency = Array2::<f64>::zeros((k, k));
    for (&p, &t) in pred.labels.iter().zip(truth.labels.iter()) {
        contingency[[p, t]] += 1.0;
    }
    let max_count = pred.len() as f64;
    let cost = contingency.mapv(|c| max_count - c);
    let assignment = hungarian(&cost);
    let matched: f64 = assignment
        .iter()
        .enumerate()
        .map(|(p, &t)| contingency[[p, t]])
        .sum();
    Ok(matched / pred.len() as f64)
}
