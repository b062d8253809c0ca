//! Barnes-Hut t-SNE.

use super::affinity::compute_affinities;
use super::bhtree::BarnesHutTree;
use super::sparse::SparseMatrix;
use super::{finish, normalized_rows, LayoutConfig, LayoutError, LayoutResult, Method};
use crate::embedding::VectorTable;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const MIN_POINTS: usize = 10;
pub const LOG_EVERY: usize = 50;
const INIT_STD: f64 = 1e-4;
const MIN_GAIN: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub grad: Vec<[f64; 2]>,
    /// Normalization `Z = Σ_{k≠l} (1 + |y_k − y_l|²)⁻¹`, approximated at the
    /// same θ as the repulsive forces.
    pub z: f64,
}

/// KL gradient with the attractive part exact over the sparse affinities
/// and the repulsive part from a Barnes-Hut tree.
pub fn tsne_gradient(affinities: &SparseMatrix, coords: &[[f64; 2]], theta: f64) -> Gradient {
    gradient_with_exaggeration(affinities, coords, theta, 1.0)
}

fn gradient_with_exaggeration(
    p: &SparseMatrix,
    coords: &[[f64; 2]],
    theta: f64,
    exaggeration: f64,
) -> Gradient {
    let n = coords.len();
    let tree = BarnesHutTree::new(coords);
    let mut repulsive = Vec::with_capacity(n);
    let mut z = 0.0;
    for i in 0..n {
        let r = tree.repulsion(i, theta);
        z += r.sum_q;
        repulsive.push(r.force);
    }
    let mut grad = Vec::with_capacity(n);
    for i in 0..n {
        let [yx, yy] = coords[i];
        let mut attr = [0.0, 0.0];
        for (j, pij) in p.row(i) {
            let (dx, dy) = (yx - coords[j][0], yy - coords[j][1]);
            let w = 1.0 / (1.0 + dx * dx + dy * dy);
            let s = exaggeration * pij * w;
            attr[0] += s * dx;
            attr[1] += s * dy;
        }
        grad.push([
            4.0 * (attr[0] - repulsive[i][0] / z),
            4.0 * (attr[1] - repulsive[i][1] / z),
        ]);
    }
    Gradient { grad, z }
}

/// Barnes-Hut estimate of `Z` alone.
pub fn normalization(coords: &[[f64; 2]], theta: f64) -> f64 {
    let tree = BarnesHutTree::new(coords);
    (0..coords.len()).map(|i| tree.repulsion(i, theta).sum_q).sum()
}

/// `KL(P‖Q) = Σ p_ij ln(p_ij / q_ij)` over the stored affinities, given `Z`.
pub fn kl_divergence(p: &SparseMatrix, coords: &[[f64; 2]], z: f64) -> f64 {
    let mut kl = 0.0;
    for (i, j, pij) in p.iter() {
        if pij <= 0.0 {
            continue;
        }
        let (dx, dy) = (coords[i][0] - coords[j][0], coords[i][1] - coords[j][1]);
        let q = 1.0 / ((1.0 + dx * dx + dy * dy) * z);
        kl += pij * (pij / q).ln();
    }
    kl
}

fn initial_coordinates(n: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, INIT_STD).expect("valid normal");
    (0..n)
        .map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)])
        .collect()
}

/// Gradient descent with momentum, per-parameter gains and early
/// exaggeration. Deterministic for a given seed.
pub fn run_tsne(vectors: &VectorTable, config: &LayoutConfig) -> Result<LayoutResult, LayoutError> {
    let n = vectors.len();
    let mut config = config.clone();
    config.method = Method::Tsne;
    config.validate(n)?;
    let params = &config.tsne;
    let data = normalized_rows(vectors)?;
    let affinities = compute_affinities(
        &data,
        vectors.dim(),
        params.perplexity,
        params.perplexity_tolerance,
        params.max_bisection,
    )?;
    let p = &affinities.joint;

    let mut y = initial_coordinates(n, config.random_seed);
    let mut update = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut history = Vec::new();

    for iter in 0..params.iterations {
        let exaggeration = if iter < params.exaggeration_iterations {
            params.early_exaggeration
        } else {
            1.0
        };
        let momentum = if iter < params.momentum_switch_iteration {
            params.initial_momentum
        } else {
            params.final_momentum
        };
        let g = gradient_with_exaggeration(p, &y, params.theta, exaggeration);
        for i in 0..n {
            for d in 0..2 {
                let grad = g.grad[i][d];
                gains[i][d] = if grad.signum() != update[i][d].signum() {
                    gains[i][d] + 0.2
                } else {
                    (gains[i][d] * 0.8).max(MIN_GAIN)
                };
                update[i][d] = momentum * update[i][d] - params.learning_rate * gains[i][d] * grad;
                y[i][d] += update[i][d];
            }
        }
        let (mut mx, mut my) = (0.0, 0.0);
        for c in &y {
            mx += c[0];
            my += c[1];
        }
        mx /= n as f64;
        my /= n as f64;
        let mut finite = true;
        for c in y.iter_mut() {
            c[0] -= mx;
            c[1] -= my;
            finite &= c[0].is_finite() && c[1].is_finite();
        }
        if !finite {
            return Err(LayoutError::Diverged { iteration: iter + 1 });
        }
        let done = iter + 1;
        if done == 1 || done % LOG_EVERY == 0 || done == params.iterations {
            let z = normalization(&y, params.theta);
            history.push((done, kl_divergence(p, &y, z)));
        }
    }

    Ok(finish(
        vectors,
        &data,
        y,
        Method::Tsne,
        history,
        affinities.bandwidth_failures.len(),
        config.random_seed,
    ))
}
