//! Trustworthiness of a 2D layout relative to its high-dimensional input.
//!
//! `T(k) = 1 − 2 / (n·k·(2n − 3k − 1)) · Σ_i Σ_{j ∈ U_i(k)} (r(i, j) − k)`
//! where `U_i(k)` holds the 2D k-nearest neighbors of `i` that are not among
//! its high-dimensional k-nearest neighbors and `r(i, j)` is the
//! high-dimensional rank of `j` with respect to `i` (nearest = 1). Ties are
//! broken by index.

use super::knn::squared_distance_block;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ROW_BLOCK: usize = 256;

fn k_smallest(dists: &[f64], skip: usize, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..dists.len()).filter(|&j| j != skip).collect();
    let order = |a: &usize, b: &usize| dists[*a].total_cmp(&dists[*b]).then(a.cmp(b));
    if k < idx.len() {
        idx.select_nth_unstable_by(k, order);
        idx.truncate(k);
    }
    idx
}

/// Trustworthiness of `coords` against `data` (`n × dim`, row-major).
/// Requires `1 ≤ k < n / 2`; returns NaN otherwise.
pub fn trustworthiness(data: &[f64], dim: usize, coords: &[[f64; 2]], k: usize) -> f64 {
    let n = coords.len();
    assert_eq!(data.len(), n * dim, "data and coordinates disagree on n");
    if k == 0 || 2 * k >= n {
        return f64::NAN;
    }
    let mut penalty = 0.0f64;
    let mut start = 0;
    let mut low = vec![0f64; n];
    while start < n {
        let m = ROW_BLOCK.min(n - start);
        let high = squared_distance_block(data, dim, start, m);
        for r in 0..m {
            let i = start + r;
            let high_row = &high[r * n..(r + 1) * n];
            let high_nn = k_smallest(high_row, i, k);
            for (j, d) in low.iter_mut().enumerate() {
                let dx = coords[i][0] - coords[j][0];
                let dy = coords[i][1] - coords[j][1];
                *d = dx * dx + dy * dy;
            }
            for j in k_smallest(&low, i, k) {
                if high_nn.contains(&j) {
                    continue;
                }
                let dj = high_row[j];
                let rank = 1 + (0..n)
                    .filter(|&l| l != i && (high_row[l] < dj || (high_row[l] == dj && l < j)))
                    .count();
                penalty += (rank - k) as f64;
            }
        }
        start += m;
    }
    let (n, k) = (n as f64, k as f64);
    1.0 - 2.0 / (n * k * (2.0 * n - 3.0 * k - 1.0)) * penalty
}

/// Exact trustworthiness up to `max_points`; above that, trustworthiness of
/// a seeded uniform subset of `max_points` points.
pub fn trustworthiness_sampled(
    data: &[f64],
    dim: usize,
    coords: &[[f64; 2]],
    k: usize,
    max_points: usize,
    seed: u64,
) -> f64 {
    let n = coords.len();
    if n <= max_points {
        return trustworthiness(data, dim, coords, k);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7275_7374);
    let mut picked = sample(&mut rng, n, max_points).into_vec();
    picked.sort_unstable();
    let sub_data: Vec<f64> = picked
        .iter()
        .flat_map(|&i| data[i * dim..(i + 1) * dim].iter().copied())
        .collect();
    let sub_coords: Vec<[f64; 2]> = picked.iter().map(|&i| coords[i]).collect();
    trustworthiness(&sub_data, dim, &sub_coords, k)
}
