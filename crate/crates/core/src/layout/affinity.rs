//! Perplexity-calibrated input affinities for t-SNE.
//!
//! Each point keeps its `⌊3·perplexity⌋` nearest neighbors. A per-point
//! Gaussian precision is found by bisection so the conditional distribution
//! over those neighbors has the requested perplexity, then the conditionals
//! are symmetrized into a joint distribution summing to one.

use super::knn::knn;
use super::sparse::SparseMatrix;
use super::LayoutError;

#[derive(Debug, Clone)]
pub struct Affinities {
    /// Row-stochastic `p_{j|i}`.
    pub conditional: SparseMatrix,
    /// Symmetric joint `p_ij = (p_{j|i} + p_{i|j}) / 2n`.
    pub joint: SparseMatrix,
    /// Calibrated precision (1 / 2σ²) per point.
    pub betas: Vec<f64>,
    /// Points whose bisection did not reach tolerance; they use a uniform
    /// distribution over their neighbors.
    pub bandwidth_failures: Vec<usize>,
}

struct RowFit {
    probs: Vec<f64>,
    beta: f64,
    converged: bool,
}

/// Shannon entropy (nats) and normalized probabilities for precision `beta`
/// over distances already shifted so the smallest is zero.
fn row_distribution(shifted: &[f64], beta: f64, probs: &mut [f64]) -> f64 {
    let mut sum = 0.0;
    for (p, &d) in probs.iter_mut().zip(shifted) {
        *p = (-beta * d).exp();
        sum += *p;
    }
    let mut weighted = 0.0;
    for (p, &d) in probs.iter_mut().zip(shifted) {
        *p /= sum;
        weighted += *p * d;
    }
    sum.ln() + beta * weighted
}

fn fit_row(dists: &[f64], perplexity: f64, tolerance: f64, max_bisection: usize) -> RowFit {
    let k = dists.len();
    let min = dists.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = dists.iter().map(|d| d - min).collect();
    let target = perplexity.ln();
    let mut probs = vec![0.0; k];
    let mut beta = 1.0;
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    for _ in 0..max_bisection {
        let h = row_distribution(&shifted, beta, &mut probs);
        if h.is_finite() && (h.exp() - perplexity).abs() <= tolerance * perplexity {
            return RowFit {
                probs,
                beta,
                converged: true,
            };
        }
        if h > target {
            lo = beta;
            beta = if hi.is_finite() { 0.5 * (beta + hi) } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = 0.5 * (lo + beta);
        }
    }
    let h = row_distribution(&shifted, beta, &mut probs);
    if h.is_finite() && (h.exp() - perplexity).abs() <= tolerance * perplexity {
        return RowFit {
            probs,
            beta,
            converged: true,
        };
    }
    RowFit {
        probs: vec![1.0 / k as f64; k],
        beta: 0.0,
        converged: false,
    }
}

/// Sparse t-SNE input affinities over `data` (`n × dim`, row-major).
///
/// Distances are squared Euclidean; on unit-normalized rows that is twice
/// the cosine distance, so the calibrated distributions are the same as for
/// the cosine metric.
pub fn compute_affinities(
    data: &[f64],
    dim: usize,
    perplexity: f64,
    tolerance: f64,
    max_bisection: usize,
) -> Result<Affinities, LayoutError> {
    let n = data.len() / dim.max(1);
    if !(perplexity >= 1.0) {
        return Err(LayoutError::InvalidConfig(format!(
            "perplexity {perplexity} must be at least 1"
        )));
    }
    let k = ((3.0 * perplexity).floor() as usize).min(n.saturating_sub(1));
    // A row over k neighbors cannot exceed perplexity k.
    if (k as f64) < perplexity {
        return Err(LayoutError::TooFewPoints {
            needed: perplexity.ceil() as usize + 1,
            got: n,
        });
    }
    let neighbors = knn(data, dim, k);
    let mut conditional = Vec::with_capacity(n * k);
    let mut betas = Vec::with_capacity(n);
    let mut failures = Vec::new();
    for (i, nn) in neighbors.iter().enumerate() {
        let dists: Vec<f64> = nn.iter().map(|&(_, d)| d).collect();
        let fit = fit_row(&dists, perplexity, tolerance, max_bisection);
        if !fit.converged {
            failures.push(i);
        }
        betas.push(fit.beta);
        conditional.extend(nn.iter().zip(fit.probs).map(|(&(j, _), p)| (i, j, p)));
    }
    let scale = 1.0 / (2.0 * n as f64);
    let joint: Vec<(usize, usize, f64)> = conditional
        .iter()
        .flat_map(|&(i, j, p)| [(i, j, p * scale), (j, i, p * scale)])
        .collect();
    Ok(Affinities {
        conditional: SparseMatrix::from_triplets(n, conditional),
        joint: SparseMatrix::from_triplets(n, joint),
        betas,
        bandwidth_failures: failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equidistant_triangle_is_uniform() {
        let h = 3f64.sqrt() / 2.0;
        let data = [0.0, 0.0, 1.0, 0.0, 0.5, h];
        let a = compute_affinities(&data, 2, 2.0, 1e-5, 50).unwrap();
        assert!(a.bandwidth_failures.is_empty());
        for (_, _, p) in a.conditional.iter() {
            assert!((p - 0.5).abs() < 1e-9);
        }
        assert!((a.joint.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_points_fall_back_without_nan() {
        let data = vec![0.25; 40 * 3];
        let a = compute_affinities(&data, 3, 5.0, 1e-5, 50).unwrap();
        assert_eq!(a.bandwidth_failures.len(), 40);
        assert!(a.joint.values().iter().all(|v| v.is_finite() && *v >= 0.0));
        assert!((a.joint.sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn too_few_points_for_perplexity() {
        let data = [0.0, 1.0, 2.0];
        assert!(matches!(
            compute_affinities(&data, 1, 5.0, 1e-5, 50),
            Err(LayoutError::TooFewPoints { .. })
        ));
    }
}
