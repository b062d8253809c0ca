//! Viewport index, display sizing, name search and collaborator highlights.

use crate::corpus::CorpusSnapshot;
use crate::NodeKind;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};
use thiserror::Error;

pub const DEFAULT_LEAF_CAPACITY: usize = 64;
pub const MAX_DEPTH: usize = 32;
pub const DATASET_DISPLAY_SIZE: f64 = 6.0;

#[derive(Debug, Error, PartialEq)]
pub enum SpatialError {
    #[error("negative publication count {0}")]
    NegativeCount(i64),
    #[error("no points to index")]
    Empty,
    #[error("point `{0}` has a non-finite coordinate or size")]
    NonFinite(String),
    #[error("unknown author `{0}`")]
    UnknownAuthor(String),
}

/// Talents grow with the log of their publication count; datasets are fixed.
pub fn node_display_size(publication_count: i64, kind: NodeKind) -> Result<f64, SpatialError> {
    if publication_count < 0 {
        return Err(SpatialError::NegativeCount(publication_count));
    }
    Ok(match kind {
        NodeKind::Talent => 2.0 + 3.0 * (1.0 + publication_count as f64).log10(),
        NodeKind::Dataset => DATASET_DISPLAY_SIZE,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutPoint {
    pub node_id: String,
    pub x: f64,
    pub y: f64,
    pub kind: NodeKind,
    pub display_size: f64,
    pub importance: f64,
}

impl LayoutPoint {
    pub fn new(node_id: impl Into<String>, x: f64, y: f64, kind: NodeKind, display_size: f64) -> Self {
        Self {
            node_id: node_id.into(),
            x,
            y,
            kind,
            display_size,
            importance: display_size,
        }
    }
}

/// Level-of-detail order: importance descending, then id ascending.
pub fn lod_order(a: &LayoutPoint, b: &LayoutPoint) -> Ordering {
    b.importance
        .total_cmp(&a.importance)
        .then_with(|| a.node_id.cmp(&b.node_id))
}

/// Axis-aligned rectangle. Queries treat it as half-open, `[x0, x1) × [y0, y1)`,
/// so a partition of the plane into boxes never reports a point twice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Option<Self> {
        let ok = [x0, y0, x1, y1].iter().all(|v| !v.is_nan()) && x0 < x1 && y0 < y1;
        ok.then_some(Self { x0, y0, x1, y1 })
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    /// Closed-interval overlap with a tree cell.
    fn touches(&self, c: &Cell) -> bool {
        self.x0 <= c.x1 && c.x0 < self.x1 && self.y0 <= c.y1 && c.y0 < self.y1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Cell {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    fn mid(&self) -> (f64, f64) {
        (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    /// Children in SW, SE, NW, NE order. They tile the parent exactly.
    fn quadrants(&self) -> [Cell; 4] {
        let (mx, my) = self.mid();
        [
            Cell { x0: self.x0, y0: self.y0, x1: mx, y1: my },
            Cell { x0: mx, y0: self.y0, x1: self.x1, y1: my },
            Cell { x0: self.x0, y0: my, x1: mx, y1: self.y1 },
            Cell { x0: mx, y0: my, x1: self.x1, y1: self.y1 },
        ]
    }

    fn quadrant_of(&self, x: f64, y: f64) -> usize {
        let (mx, my) = self.mid();
        (x >= mx) as usize + 2 * (y >= my) as usize
    }
}

#[derive(Debug, Clone)]
enum Contents {
    Leaf(Vec<u32>),
    Inner([u32; 4]),
}

#[derive(Debug, Clone)]
struct Node {
    cell: Cell,
    max_importance: f64,
    contents: Contents,
}

/// Point quadtree over a finished layout. Immutable once built.
#[derive(Debug, Clone)]
pub struct QuadTree {
    points: Vec<LayoutPoint>,
    nodes: Vec<Node>,
    leaf_capacity: usize,
}

impl QuadTree {
    pub fn build(points: Vec<LayoutPoint>, leaf_capacity: usize) -> Result<Self, SpatialError> {
        if points.is_empty() {
            return Err(SpatialError::Empty);
        }
        if let Some(p) = points.iter().find(|p| {
            !(p.x.is_finite() && p.y.is_finite() && p.importance.is_finite())
                || !(p.display_size.is_finite() && p.display_size > 0.0)
        }) {
            return Err(SpatialError::NonFinite(p.node_id.clone()));
        }
        let leaf_capacity = leaf_capacity.max(1);
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for p in &points {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        // Square root cell so subdivisions stay square.
        let side = (x1 - x0).max(y1 - y0).max(f64::MIN_POSITIVE);
        let root = Cell { x0, y0, x1: x0 + side, y1: y0 + side };
        let mut tree = QuadTree {
            points,
            nodes: Vec::new(),
            leaf_capacity,
        };
        let all: Vec<u32> = (0..tree.points.len() as u32).collect();
        tree.build_node(root, all, 0);
        Ok(tree)
    }

    fn build_node(&mut self, cell: Cell, members: Vec<u32>, depth: usize) -> u32 {
        let idx = self.nodes.len() as u32;
        let max_importance = members
            .iter()
            .map(|&i| self.points[i as usize].importance)
            .fold(f64::NEG_INFINITY, f64::max);
        if members.len() <= self.leaf_capacity || depth >= MAX_DEPTH {
            self.nodes.push(Node {
                cell,
                max_importance,
                contents: Contents::Leaf(members),
            });
            return idx;
        }
        self.nodes.push(Node {
            cell,
            max_importance,
            contents: Contents::Inner([0; 4]),
        });
        let mut buckets: [Vec<u32>; 4] = Default::default();
        for i in members {
            let p = &self.points[i as usize];
            buckets[cell.quadrant_of(p.x, p.y)].push(i);
        }
        let quads = cell.quadrants();
        let mut children = [0u32; 4];
        for (q, bucket) in buckets.into_iter().enumerate() {
            children[q] = self.build_node(quads[q], bucket, depth + 1);
        }
        self.nodes[idx as usize].contents = Contents::Inner(children);
        idx
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[LayoutPoint] {
        &self.points
    }

    pub fn root_cell(&self) -> Cell {
        self.nodes[0].cell
    }

    pub fn root_is_leaf(&self) -> bool {
        matches!(self.nodes[0].contents, Contents::Leaf(_))
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &QuadTree, n: u32) -> usize {
            match &t.nodes[n as usize].contents {
                Contents::Leaf(_) => 0,
                Contents::Inner(c) => 1 + c.iter().map(|&ch| walk(t, ch)).max().unwrap_or(0),
            }
        }
        walk(self, 0)
    }

    /// Every stored point, by full traversal of the tree.
    pub fn traverse(&self) -> Vec<&LayoutPoint> {
        let mut out = Vec::with_capacity(self.points.len());
        let mut stack = vec![0u32];
        while let Some(n) = stack.pop() {
            match &self.nodes[n as usize].contents {
                Contents::Leaf(members) => {
                    out.extend(members.iter().map(|&i| &self.points[i as usize]))
                }
                Contents::Inner(children) => stack.extend(children.iter().rev()),
            }
        }
        out
    }

    /// Checks the structural invariants; returns the first breach found.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut seen = vec![0u32; self.points.len()];
        for (n, node) in self.nodes.iter().enumerate() {
            match &node.contents {
                Contents::Leaf(members) => {
                    for &i in members {
                        let p = &self.points[i as usize];
                        if !node.cell.contains(p.x, p.y) {
                            return Err(format!("point `{}` outside cell {n}", p.node_id));
                        }
                        seen[i as usize] += 1;
                    }
                }
                Contents::Inner(children) => {
                    let quads = node.cell.quadrants();
                    for (q, &c) in children.iter().enumerate() {
                        let child = &self.nodes[c as usize];
                        if child.cell != quads[q] {
                            return Err(format!("child {c} of {n} does not tile its parent"));
                        }
                        if child.max_importance > node.max_importance {
                            return Err(format!("importance bound broken at {n}"));
                        }
                    }
                }
            }
        }
        match seen.iter().position(|&c| c != 1) {
            Some(i) => Err(format!(
                "point `{}` stored {} times",
                self.points[i].node_id, seen[i]
            )),
            None => Ok(()),
        }
    }

    /// Points inside `bbox`, most important first.
    ///
    /// When more than `max_results` points fall inside, only the
    /// `max_results` most important are returned.
    pub fn query_viewport(&self, bbox: &BBox, max_results: usize) -> Vec<&LayoutPoint> {
        let max_results = max_results.max(1);
        // Min-heap on LOD rank holding the best `max_results` seen so far.
        let mut heap: BinaryHeap<Ranked<'_>> =
            BinaryHeap::with_capacity(max_results.min(self.points.len()) + 1);
        let mut stack = vec![0u32];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            if !bbox.touches(&node.cell) {
                continue;
            }
            if heap.len() == max_results {
                let worst = heap.peek().expect("heap is full").0;
                if node.max_importance < worst.importance {
                    continue;
                }
            }
            match &node.contents {
                Contents::Leaf(members) => {
                    for &i in members {
                        let p = &self.points[i as usize];
                        if !bbox.contains(p.x, p.y) {
                            continue;
                        }
                        if heap.len() < max_results {
                            heap.push(Ranked(p));
                        } else if lod_order(p, heap.peek().expect("heap is full").0)
                            == Ordering::Less
                        {
                            heap.pop();
                            heap.push(Ranked(p));
                        }
                    }
                }
                Contents::Inner(children) => stack.extend(children.iter()),
            }
        }
        let mut out: Vec<&LayoutPoint> = heap.into_iter().map(|r| r.0).collect();
        out.sort_by(|a, b| lod_order(a, b));
        out
    }
}

/// Heap wrapper whose maximum is the point ranked last in LOD order.
struct Ranked<'a>(&'a LayoutPoint);

impl PartialEq for Ranked<'_> {
    fn eq(&self, other: &Self) -> bool {
        lod_order(self.0, other.0) == Ordering::Equal
    }
}

impl Eq for Ranked<'_> {}

impl PartialOrd for Ranked<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        lod_order(self.0, other.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchHit {
    pub node_id: String,
    pub display_name: String,
    pub kind: NodeKind,
}

#[derive(Debug, Clone)]
struct NameEntry {
    folded: String,
    hit: SearchHit,
}

/// Case-insensitive name lookup over talents and datasets.
#[derive(Debug, Clone, Default)]
pub struct NameIndex {
    entries: Vec<NameEntry>,
}

fn fold(s: &str) -> String {
    s.trim().to_lowercase()
}

impl NameIndex {
    pub fn from_snapshot(snapshot: &CorpusSnapshot) -> Self {
        let talents = snapshot
            .authors()
            .values()
            .map(|a| (a.author_id.as_str(), a.display_name.as_str(), NodeKind::Talent));
        let datasets = snapshot
            .datasets()
            .values()
            .map(|d| (d.dataset_id.as_str(), d.name.as_str(), NodeKind::Dataset));
        Self::new(talents.chain(datasets))
    }

    pub fn new<'a>(names: impl IntoIterator<Item = (&'a str, &'a str, NodeKind)>) -> Self {
        let mut entries: Vec<NameEntry> = names
            .into_iter()
            .map(|(id, name, kind)| NameEntry {
                folded: fold(name),
                hit: SearchHit {
                    node_id: id.to_owned(),
                    display_name: name.to_owned(),
                    kind,
                },
            })
            .collect();
        entries.sort_by(Self::name_order);
        Self { entries }
    }

    fn name_order(a: &NameEntry, b: &NameEntry) -> Ordering {
        a.folded
            .cmp(&b.folded)
            .then_with(|| a.hit.display_name.cmp(&b.hit.display_name))
            .then_with(|| a.hit.node_id.cmp(&b.hit.node_id))
    }

    /// Exact matches first, then prefix, then substring; ties by name.
    pub fn search(&self, q: &str, kind: Option<NodeKind>, limit: usize) -> Vec<SearchHit> {
        let q = fold(q);
        if q.is_empty() || limit == 0 {
            return Vec::new();
        }
        let mut tiers: [Vec<&SearchHit>; 3] = Default::default();
        for e in &self.entries {
            if kind.is_some_and(|k| k != e.hit.kind) {
                continue;
            }
            let tier = if e.folded == q {
                0
            } else if e.folded.starts_with(&q) {
                1
            } else if e.folded.contains(&q) {
                2
            } else {
                continue;
            };
            // Entries are pre-sorted by name, so each tier stays sorted.
            tiers[tier].push(&e.hit);
        }
        tiers
            .into_iter()
            .flatten()
            .take(limit)
            .cloned()
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Existing collaborators of `author_id` that have a node on the map.
pub fn collaborator_highlight(
    author_id: &str,
    snapshot: &CorpusSnapshot,
    on_map: impl Fn(&str) -> bool,
) -> Result<BTreeSet<String>, SpatialError> {
    let peers = snapshot
        .coauthors(author_id)
        .ok_or_else(|| SpatialError::UnknownAuthor(author_id.to_owned()))?;
    Ok(peers
        .iter()
        .filter(|p| p.as_str() != author_id && on_map(p))
        .cloned()
        .collect())
}
