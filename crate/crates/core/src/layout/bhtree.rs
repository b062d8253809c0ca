//! Barnes-Hut quadtree over embedding coordinates.
//!
//! A cell is summarized by its center of mass once `side / distance < θ`.
//! Leaves hold one point, except at the depth cap where coincident points
//! share a leaf and are visited individually, so θ = 0 degenerates to the
//! exact pairwise sum.

const MAX_DEPTH: usize = 40;
const NONE: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Node {
    side: f64,
    com: [f64; 2],
    count: usize,
    children: [u32; 4],
    /// Non-empty only for leaves.
    members: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct BarnesHutTree<'a> {
    coords: &'a [[f64; 2]],
    nodes: Vec<Node>,
}

/// Repulsive field at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Repulsion {
    /// `Σ_j w_ij² (y_i − y_j)` with `w_ij = 1 / (1 + |y_i − y_j|²)`.
    pub force: [f64; 2],
    /// `Σ_j w_ij`, this point's share of the normalization `Z`.
    pub sum_q: f64,
}

impl<'a> BarnesHutTree<'a> {
    pub fn new(coords: &'a [[f64; 2]]) -> Self {
        let mut tree = Self {
            coords,
            nodes: Vec::with_capacity(2 * coords.len() + 1),
        };
        if coords.is_empty() {
            return tree;
        }
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for c in coords {
            x0 = x0.min(c[0]);
            y0 = y0.min(c[1]);
            x1 = x1.max(c[0]);
            y1 = y1.max(c[1]);
        }
        let side = (x1 - x0).max(y1 - y0) * (1.0 + 1e-9) + f64::MIN_POSITIVE;
        let members: Vec<u32> = (0..coords.len() as u32).collect();
        tree.build(x0, y0, side, members, 0);
        tree
    }

    fn build(&mut self, x0: f64, y0: f64, side: f64, members: Vec<u32>, depth: usize) -> u32 {
        let idx = self.nodes.len() as u32;
        let count = members.len();
        let mut com = [0.0, 0.0];
        for &m in &members {
            let c = self.coords[m as usize];
            com[0] += c[0];
            com[1] += c[1];
        }
        com[0] /= count as f64;
        com[1] /= count as f64;
        self.nodes.push(Node {
            side,
            com,
            count,
            children: [NONE; 4],
            members: Vec::new(),
        });
        if count <= 1 || depth >= MAX_DEPTH {
            self.nodes[idx as usize].members = members;
            return idx;
        }
        let half = 0.5 * side;
        let (mx, my) = (x0 + half, y0 + half);
        let mut buckets: [Vec<u32>; 4] = Default::default();
        for m in members {
            let c = self.coords[m as usize];
            buckets[(c[0] >= mx) as usize + 2 * (c[1] >= my) as usize].push(m);
        }
        let origins = [(x0, y0), (mx, y0), (x0, my), (mx, my)];
        let mut children = [NONE; 4];
        for (q, bucket) in buckets.into_iter().enumerate() {
            if !bucket.is_empty() {
                children[q] = self.build(origins[q].0, origins[q].1, half, bucket, depth + 1);
            }
        }
        self.nodes[idx as usize].children = children;
        idx
    }

    /// Approximate repulsion on point `i` with opening criterion `theta`.
    pub fn repulsion(&self, i: usize, theta: f64) -> Repulsion {
        let mut out = Repulsion::default();
        if self.nodes.is_empty() {
            return out;
        }
        let [yx, yy] = self.coords[i];
        let theta2 = theta * theta;
        let mut stack = vec![0u32];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            let is_leaf = node.children == [NONE; 4];
            if is_leaf {
                for &m in &node.members {
                    if m as usize == i {
                        continue;
                    }
                    let c = self.coords[m as usize];
                    let (dx, dy) = (yx - c[0], yy - c[1]);
                    let w = 1.0 / (1.0 + dx * dx + dy * dy);
                    out.sum_q += w;
                    out.force[0] += w * w * dx;
                    out.force[1] += w * w * dy;
                }
                continue;
            }
            let (dx, dy) = (yx - node.com[0], yy - node.com[1]);
            let d2 = dx * dx + dy * dy;
            if d2 > 0.0 && node.side * node.side < theta2 * d2 {
                let w = 1.0 / (1.0 + d2);
                let nw = node.count as f64 * w;
                out.sum_q += nw;
                out.force[0] += nw * w * dx;
                out.force[1] += nw * w * dy;
            } else {
                stack.extend(node.children.iter().filter(|&&c| c != NONE));
            }
        }
        out
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_zero_is_pairwise() {
        let coords = [[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [3.0, 3.0]];
        let tree = BarnesHutTree::new(&coords);
        let r = tree.repulsion(0, 0.0);
        let mut f = [0.0, 0.0];
        let mut z = 0.0;
        for c in &coords[1..] {
            let (dx, dy) = (-c[0], -c[1]);
            let w = 1.0 / (1.0 + dx * dx + dy * dy);
            z += w;
            f[0] += w * w * dx;
            f[1] += w * w * dy;
        }
        assert!((r.sum_q - z).abs() < 1e-15);
        assert!((r.force[0] - f[0]).abs() < 1e-15 && (r.force[1] - f[1]).abs() < 1e-15);
    }

    #[test]
    fn coincident_points_share_a_leaf() {
        let coords = vec![[1.0, 1.0]; 50];
        let tree = BarnesHutTree::new(&coords);
        let r = tree.repulsion(3, 0.5);
        assert_eq!(r.sum_q, 49.0);
        assert_eq!(r.force, [0.0, 0.0]);
    }
}
