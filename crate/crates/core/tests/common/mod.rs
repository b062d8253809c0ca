//! Independent reference implementations used as test oracles.
//!
//! Everything here is deliberately naive: full sorts, O(n²) sums, no shared
//! code with the library beyond plain data types.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;
use tkg_core::embedding::VectorTable;
use tkg_core::spatial::LayoutPoint;

pub fn cosine(u: &[f32], v: &[f32]) -> f64 {
    let (mut dot, mut nu, mut nv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (a as f64, b as f64);
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    dot / (nu.sqrt() * nv.sqrt())
}

/// Full-sort top-k: score descending, id ascending.
pub fn brute_force_top_k(
    query: &[f32],
    table: &VectorTable,
    k: usize,
    excluded: &HashSet<String>,
) -> Vec<(String, f64)> {
    let mut all: Vec<(String, f64)> = table
        .iter()
        .filter(|(id, _)| !excluded.contains(*id))
        .map(|(id, v)| (id.to_owned(), cosine(query, v)))
        .collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

pub fn gaussian_table(n: usize, dim: usize, seed: u64) -> VectorTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = VectorTable::new(dim);
    for i in 0..n {
        let v: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        t.push(format!("x{i:05}"), &v).unwrap();
    }
    t
}

/// Lloyd's k-means with k-means++ seeding, best of `restarts` by inertia.
pub fn kmeans(points: &[[f64; 2]], k: usize, restarts: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d2 = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..restarts {
        let mut centers = vec![points[rng.random_range(0..points.len())]];
        while centers.len() < k {
            let w: Vec<f64> = points
                .iter()
                .map(|&p| centers.iter().map(|&c| d2(p, c)).fold(f64::INFINITY, f64::min))
                .collect();
            let total: f64 = w.iter().sum();
            let mut r = rng.random::<f64>() * total;
            let mut pick = points.len() - 1;
            for (i, wi) in w.iter().enumerate() {
                if r < *wi {
                    pick = i;
                    break;
                }
                r -= wi;
            }
            centers.push(points[pick]);
        }
        let mut labels = vec![0; points.len()];
        for _ in 0..300 {
            let mut changed = false;
            for (i, &p) in points.iter().enumerate() {
                let l = (0..k)
                    .min_by(|&a, &b| d2(p, centers[a]).partial_cmp(&d2(p, centers[b])).unwrap())
                    .unwrap();
                changed |= l != labels[i];
                labels[i] = l;
            }
            for (c, center) in centers.iter_mut().enumerate() {
                let members: Vec<[f64; 2]> = points
                    .iter()
                    .zip(&labels)
                    .filter(|(_, &l)| l == c)
                    .map(|(&p, _)| p)
                    .collect();
                if !members.is_empty() {
                    let m = members.len() as f64;
                    *center = [
                        members.iter().map(|p| p[0]).sum::<f64>() / m,
                        members.iter().map(|p| p[1]).sum::<f64>() / m,
                    ];
                }
            }
            if !changed {
                break;
            }
        }
        let inertia: f64 = points.iter().zip(&labels).map(|(&p, &l)| d2(p, centers[l])).sum();
        if best.as_ref().is_none_or(|b| inertia < b.0) {
            best = Some((inertia, labels));
        }
    }
    best.unwrap().1
}

fn choose2(x: f64) -> f64 {
    x * (x - 1.0) / 2.0
}

/// Hubert-Arabie adjusted Rand index.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0f64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1.0;
    }
    let index: f64 = table.iter().flatten().map(|&c| choose2(c)).sum();
    let rows: f64 = table.iter().map(|r| choose2(r.iter().sum())).sum();
    let cols: f64 = (0..kb)
        .map(|j| choose2(table.iter().map(|r| r[j]).sum()))
        .sum();
    let expected = rows * cols / choose2(a.len() as f64);
    let max = 0.5 * (rows + cols);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

fn sq(data: &[f64], dim: usize, i: usize, j: usize) -> f64 {
    (0..dim)
        .map(|d| (data[i * dim + d] - data[j * dim + d]).powi(2))
        .sum()
}

/// Trustworthiness with ranks from full sorts.
pub fn naive_trustworthiness(data: &[f64], dim: usize, coords: &[[f64; 2]], k: usize) -> f64 {
    let n = coords.len();
    let mut penalty = 0.0;
    for i in 0..n {
        let mut high: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        high.sort_by(|&a, &b| {
            sq(data, dim, i, a)
                .partial_cmp(&sq(data, dim, i, b))
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut rank = vec![0usize; n];
        for (r, &j) in high.iter().enumerate() {
            rank[j] = r + 1;
        }
        let low_d = |j: usize| (coords[i][0] - coords[j][0]).powi(2) + (coords[i][1] - coords[j][1]).powi(2);
        let mut low: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        low.sort_by(|&a, &b| low_d(a).partial_cmp(&low_d(b)).unwrap().then(a.cmp(&b)));
        for &j in &low[..k] {
            if rank[j] > k {
                penalty += (rank[j] - k) as f64;
            }
        }
    }
    let (n, k) = (n as f64, k as f64);
    1.0 - 2.0 / (n * k * (2.0 * n - 3.0 * k - 1.0)) * penalty
}

/// Dense symmetric joint affinities from a sparse triplet list.
pub fn dense(n: usize, entries: impl IntoIterator<Item = (usize, usize, f64)>) -> Vec<Vec<f64>> {
    let mut p = vec![vec![0.0; n]; n];
    for (i, j, v) in entries {
        p[i][j] += v;
    }
    p
}

/// Exact t-SNE gradient `4 Σ_j (p_ij − q_ij) w_ij (y_i − y_j)`.
pub fn exact_gradient(p: &[Vec<f64>], y: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let n = y.len();
    let w = |i: usize, j: usize| {
        1.0 / (1.0 + (y[i][0] - y[j][0]).powi(2) + (y[i][1] - y[j][1]).powi(2))
    };
    let mut z = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                z += w(i, j);
            }
        }
    }
    (0..n)
        .map(|i| {
            let mut g = [0.0, 0.0];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let wij = w(i, j);
                let s = 4.0 * (p[i][j] - wij / z) * wij;
                g[0] += s * (y[i][0] - y[j][0]);
                g[1] += s * (y[i][1] - y[j][1]);
            }
            g
        })
        .collect()
}

/// Exact `KL(P‖Q)` with dense Student-t `Q`.
pub fn exact_kl(p: &[Vec<f64>], y: &[[f64; 2]]) -> f64 {
    let n = y.len();
    let w = |i: usize, j: usize| {
        1.0 / (1.0 + (y[i][0] - y[j][0]).powi(2) + (y[i][1] - y[j][1]).powi(2))
    };
    let mut z = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                z += w(i, j);
            }
        }
    }
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j && p[i][j] > 0.0 {
                kl += p[i][j] * (p[i][j] * z / w(i, j)).ln();
            }
        }
    }
    kl
}

/// Points in the half-open box, sorted by importance desc then id asc,
/// truncated to `limit`.
pub fn scan_viewport<'a>(
    points: &'a [LayoutPoint],
    (x0, y0, x1, y1): (f64, f64, f64, f64),
    limit: usize,
) -> Vec<&'a LayoutPoint> {
    let mut hits: Vec<&LayoutPoint> = points
        .iter()
        .filter(|p| p.x >= x0 && p.x < x1 && p.y >= y0 && p.y < y1)
        .collect();
    hits.sort_by(|a, b| {
        b.importance
            .partial_cmp(&a.importance)
            .unwrap()
            .then_with(|| a.node_id.cmp(&b.node_id))
    });
    hits.truncate(limit);
    hits
}

/// Realized perplexity `exp(H)` of a probability row, in nats.
pub fn perplexity(row: &[f64]) -> f64 {
    let h: f64 = row.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
    h.exp()
}

/// Unit-normalized rows as f64, row-major.
pub fn unit_rows(t: &VectorTable) -> Vec<f64> {
    let mut out = Vec::new();
    for (_, v) in t.iter() {
        let n = v.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
        out.extend(v.iter().map(|&x| x as f64 / n));
    }
    out
}
