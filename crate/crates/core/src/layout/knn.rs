//! Exact nearest neighbors by squared Euclidean distance.

const ROW_BLOCK: usize = 256;

/// Squared distances from rows `start..start + m` to every row of `data`
/// (`n × dim`, row-major), written into an `m × n` buffer.
pub fn squared_distance_block(data: &[f64], dim: usize, start: usize, m: usize) -> Vec<f64> {
    let n = data.len() / dim;
    let sq: Vec<f64> = data.chunks_exact(dim).map(|r| r.iter().map(|x| x * x).sum()).collect();
    squared_distance_block_with_norms(data, dim, &sq, start, m, n)
}

fn squared_distance_block_with_norms(
    data: &[f64],
    dim: usize,
    sq: &[f64],
    start: usize,
    m: usize,
    n: usize,
) -> Vec<f64> {
    let mut gram = vec![0f64; m * n];
    if m == 0 || n == 0 {
        return gram;
    }
    let block = &data[start * dim..(start + m) * dim];
    // SAFETY: `block` is m × dim, `data` is n × dim read transposed through
    // strides, and `gram` is m × n.
    unsafe {
        matrixmultiply::dgemm(
            m,
            dim,
            n,
            1.0,
            block.as_ptr(),
            dim as isize,
            1,
            data.as_ptr(),
            1,
            dim as isize,
            0.0,
            gram.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    for (r, row) in gram.chunks_exact_mut(n).enumerate() {
        let si = sq[start + r];
        for (j, g) in row.iter_mut().enumerate() {
            *g = (si + sq[j] - 2.0 * *g).max(0.0);
        }
        // Exact zero on the diagonal regardless of rounding.
        row[start + r] = 0.0;
    }
    gram
}

/// The `k` nearest other rows of every row, as `(index, squared distance)`
/// sorted by distance then index.
pub fn knn(data: &[f64], dim: usize, k: usize) -> Vec<Vec<(usize, f64)>> {
    let n = data.len() / dim;
    let k = k.min(n.saturating_sub(1));
    let sq: Vec<f64> = data.chunks_exact(dim).map(|r| r.iter().map(|x| x * x).sum()).collect();
    let mut out = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let m = ROW_BLOCK.min(n - start);
        let dist = squared_distance_block_with_norms(data, dim, &sq, start, m, n);
        for r in 0..m {
            let i = start + r;
            let row = &dist[r * n..(r + 1) * n];
            let mut cand: Vec<(usize, f64)> =
                (0..n).filter(|&j| j != i).map(|j| (j, row[j])).collect();
            let order = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
            if k > 0 && k < cand.len() {
                cand.select_nth_unstable_by(k - 1, order);
                cand.truncate(k);
            }
            cand.sort_by(order);
            cand.truncate(k);
            out.push(cand);
        }
        start += m;
    }
    out
}
