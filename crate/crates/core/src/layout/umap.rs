//! UMAP-style layout: fuzzy k-NN graph plus edge-sampled SGD.

use super::knn::knn;
use super::sparse::SparseMatrix;
use super::{finish, normalized_rows, LayoutConfig, LayoutError, LayoutResult, Method};
use crate::embedding::VectorTable;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SIGMA_TOLERANCE: f64 = 1e-5;
const SIGMA_ITERATIONS: usize = 128;
const INIT_EXTENT: f64 = 10.0;
const GRAD_CLIP: f64 = 4.0;
const LOG_EVERY: usize = 50;

/// Fuzzy simplicial set over the exact cosine k-NN graph.
#[derive(Debug, Clone)]
pub struct FuzzyGraph {
    /// Directed memberships `exp(−max(0, d_ij − ρ_i) / σ_i)`.
    pub directed: SparseMatrix,
    /// Probabilistic union `a + b − ab` of the directed graph and its transpose.
    pub symmetric: SparseMatrix,
    pub rhos: Vec<f64>,
    pub sigmas: Vec<f64>,
    /// Points whose σ search could not hit the target and use a floor value.
    pub sigma_failures: Vec<usize>,
}

fn membership_sum(dists: &[f64], rho: f64, sigma: f64) -> f64 {
    dists.iter().map(|&d| (-(d - rho).max(0.0) / sigma).exp()).sum()
}

/// Builds the fuzzy graph over `data` (`n × dim`, unit-normalized rows) with
/// cosine distance.
pub fn fuzzy_graph(data: &[f64], dim: usize, n_neighbors: usize) -> FuzzyGraph {
    let n = data.len() / dim;
    let neighbors = knn(data, dim, n_neighbors);
    let target = (n_neighbors as f64).log2();
    let mut rhos = Vec::with_capacity(n);
    let mut sigmas = Vec::with_capacity(n);
    let mut failures = Vec::new();
    let mut triplets = Vec::with_capacity(n * n_neighbors);

    for (i, nn) in neighbors.iter().enumerate() {
        // Squared Euclidean on unit vectors is twice the cosine distance.
        let dists: Vec<f64> = nn.iter().map(|&(_, d2)| 0.5 * d2).collect();
        let rho = dists.iter().copied().find(|&d| d > 0.0).unwrap_or(0.0);
        let mean = dists.iter().sum::<f64>() / dists.len().max(1) as f64;
        let (mut lo, mut hi, mut sigma) = (0.0f64, f64::INFINITY, 1.0f64);
        let mut converged = false;
        for _ in 0..SIGMA_ITERATIONS {
            let s = membership_sum(&dists, rho, sigma);
            if (s - target).abs() <= SIGMA_TOLERANCE {
                converged = true;
                break;
            }
            if s > target {
                hi = sigma;
                sigma = 0.5 * (lo + sigma);
            } else {
                lo = sigma;
                sigma = if hi.is_finite() { 0.5 * (sigma + hi) } else { sigma * 2.0 };
            }
        }
        if !converged {
            failures.push(i);
            sigma = sigma.max(1e-3 * mean).max(f64::MIN_POSITIVE);
        }
        for (&(j, _), &d) in nn.iter().zip(&dists) {
            let w = (-(d - rho).max(0.0) / sigma).exp();
            triplets.push((i, j, w));
        }
        rhos.push(rho);
        sigmas.push(sigma);
    }
    let directed = SparseMatrix::from_triplets(n, triplets);
    let transpose = directed.transpose();
    let mut union = Vec::with_capacity(2 * directed.nnz());
    for (i, j, a) in directed.iter() {
        let b = transpose.get(i, j);
        union.push((i, j, a + b - a * b));
    }
    for (i, j, b) in transpose.iter() {
        if directed.get(i, j) == 0.0 {
            union.push((i, j, b));
        }
    }
    FuzzyGraph {
        symmetric: SparseMatrix::from_triplets(n, union),
        directed,
        rhos,
        sigmas,
        sigma_failures: failures,
    }
}

/// Fits `1 / (1 + a·x^(2b))` to the target curve that is 1 below `min_dist`
/// and decays as `exp(−(x − min_dist) / spread)` beyond it.
pub fn fit_curve(min_dist: f64, spread: f64) -> (f64, f64) {
    let xs: Vec<f64> = (0..300).map(|i| 3.0 * spread * i as f64 / 299.0).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| if x < min_dist { 1.0 } else { (-(x - min_dist) / spread).exp() })
        .collect();
    let residual = |a: f64, b: f64| -> f64 {
        xs.iter()
            .zip(&ys)
            .map(|(&x, &y)| {
                let f = 1.0 / (1.0 + a * x.powf(2.0 * b));
                (f - y) * (f - y)
            })
            .sum()
    };
    // Levenberg-Marquardt in (a, b).
    let (mut a, mut b) = (1.0f64, 1.0f64);
    let mut lambda = 1e-3;
    let mut cost = residual(a, b);
    for _ in 0..500 {
        let (mut jtj, mut jtr) = ([[0.0f64; 2]; 2], [0.0f64; 2]);
        for (&x, &y) in xs.iter().zip(&ys) {
            if x == 0.0 {
                continue;
            }
            let p = x.powf(2.0 * b);
            let den = 1.0 + a * p;
            let f = 1.0 / den;
            let r = f - y;
            let da = -p / (den * den);
            let db = -a * p * 2.0 * x.ln() / (den * den);
            let jr = [da, db];
            for u in 0..2 {
                jtr[u] += jr[u] * r;
                for v in 0..2 {
                    jtj[u][v] += jr[u] * jr[v];
                }
            }
        }
        let m = [
            [jtj[0][0] * (1.0 + lambda), jtj[0][1]],
            [jtj[1][0], jtj[1][1] * (1.0 + lambda)],
        ];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if det.abs() < 1e-300 {
            break;
        }
        let step_a = -(m[1][1] * jtr[0] - m[0][1] * jtr[1]) / det;
        let step_b = -(m[0][0] * jtr[1] - m[1][0] * jtr[0]) / det;
        let (na, nb) = (a + step_a, b + step_b);
        let next = if na > 0.0 && nb > 0.0 { residual(na, nb) } else { f64::INFINITY };
        if next < cost {
            let converged = (cost - next) < 1e-15 * cost.max(1e-300);
            a = na;
            b = nb;
            cost = next;
            lambda *= 0.3;
            if converged {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    (a, b)
}

fn clip(v: f64) -> f64 {
    v.clamp(-GRAD_CLIP, GRAD_CLIP)
}

/// Fuzzy cross-entropy summed over graph edges.
fn edge_cross_entropy(edges: &[(usize, usize, f64)], y: &[[f64; 2]], a: f64, b: f64) -> f64 {
    const EPS: f64 = 1e-4;
    edges
        .iter()
        .map(|&(i, j, w)| {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            let q = 1.0 / (1.0 + a * (dx * dx + dy * dy).powf(b));
            -w * q.max(EPS).ln() - (1.0 - w) * (1.0 - q).max(EPS).ln()
        })
        .sum()
}

/// Edge-sampled SGD on the fuzzy graph from a seeded uniform random start.
pub fn run_umap(vectors: &VectorTable, config: &LayoutConfig) -> Result<LayoutResult, LayoutError> {
    let n = vectors.len();
    let mut config = config.clone();
    config.method = Method::Umap;
    config.validate(n)?;
    let params = &config.umap;
    let data = normalized_rows(vectors)?;
    let graph = fuzzy_graph(&data, vectors.dim(), params.n_neighbors);
    let (a, b) = fit_curve(params.min_dist, params.spread);

    let epochs = params.epochs;
    let max_w = graph.symmetric.values().iter().copied().fold(0.0, f64::max);
    let edges: Vec<(usize, usize, f64)> = graph
        .symmetric
        .iter()
        .filter(|&(i, j, w)| i != j && w >= max_w / epochs as f64)
        .collect();
    let epochs_per_sample: Vec<f64> = edges.iter().map(|e| max_w / e.2).collect();
    let neg_rate = params.negative_sample_rate as f64;
    let epochs_per_negative: Vec<f64> = epochs_per_sample.iter().map(|e| e / neg_rate).collect();
    let mut next_sample = epochs_per_sample.clone();
    let mut next_negative = epochs_per_negative.clone();

    let mut rng = ChaCha8Rng::seed_from_u64(config.random_seed);
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| {
            [
                rng.random_range(-INIT_EXTENT..INIT_EXTENT),
                rng.random_range(-INIT_EXTENT..INIT_EXTENT),
            ]
        })
        .collect();

    let mut history = vec![(0, edge_cross_entropy(&edges, &y, a, b))];
    for epoch in 0..epochs {
        let alpha = params.learning_rate * (1.0 - epoch as f64 / epochs as f64);
        for (e, &(i, j, _)) in edges.iter().enumerate() {
            if next_sample[e] > epoch as f64 {
                continue;
            }
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            let d2 = dx * dx + dy * dy;
            if d2 > 0.0 {
                let coeff = -2.0 * a * b * d2.powf(b - 1.0) / (a * d2.powf(b) + 1.0);
                let gx = clip(coeff * dx) * alpha;
                let gy = clip(coeff * dy) * alpha;
                y[i][0] += gx;
                y[i][1] += gy;
                y[j][0] -= gx;
                y[j][1] -= gy;
            }
            next_sample[e] += epochs_per_sample[e];

            let n_neg = ((epoch as f64 - next_negative[e]) / epochs_per_negative[e]).floor();
            let n_neg = if n_neg > 0.0 { n_neg as usize } else { 0 };
            for _ in 0..n_neg {
                let k = rng.random_range(0..n);
                if k == i {
                    continue;
                }
                let dx = y[i][0] - y[k][0];
                let dy = y[i][1] - y[k][1];
                let d2 = dx * dx + dy * dy;
                let (gx, gy) = if d2 > 0.0 {
                    let coeff = 2.0 * params.repulsion_strength * b
                        / ((0.001 + d2) * (a * d2.powf(b) + 1.0));
                    (clip(coeff * dx), clip(coeff * dy))
                } else {
                    (GRAD_CLIP, GRAD_CLIP)
                };
                y[i][0] += gx * alpha;
                y[i][1] += gy * alpha;
            }
            next_negative[e] += n_neg as f64 * epochs_per_negative[e];
        }
        if y.iter().any(|c| !(c[0].is_finite() && c[1].is_finite())) {
            return Err(LayoutError::Diverged { iteration: epoch + 1 });
        }
        let done = epoch + 1;
        if done % LOG_EVERY == 0 || done == epochs {
            history.push((done, edge_cross_entropy(&edges, &y, a, b)));
        }
    }

    Ok(finish(
        vectors,
        &data,
        y,
        Method::Umap,
        history,
        graph.sigma_failures.len(),
        config.random_seed,
    ))
}
