//! Exact top-k cosine search with exclusion sets.
//!
//! Scoring runs in two passes. A single-precision GEMM scores every
//! candidate against a block of queries; every candidate whose approximate
//! score lies within the rounding bound of the k-th best is then re-scored
//! in double precision and the final order is taken from those exact scores.
//! The bound makes the first pass a pure filter, so results are identical to
//! a full double-precision sort.

use crate::corpus::CorpusSnapshot;
use crate::embedding::{EmbeddingStore, VectorTable};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;
use thiserror::Error;

pub const DEFAULT_COLLABORATOR_K: usize = 30;
pub const DEFAULT_DATASET_USER_K: usize = 150;

const QUERY_BLOCK: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum SimilarityError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("zero vector{}", .id.as_ref().map(|i| format!(" `{i}`")).unwrap_or_default())]
    ZeroVector { id: Option<String> },
    #[error("k must be at least 1")]
    ZeroK,
}

fn dot_f64(u: &[f32], v: &[f32]) -> f64 {
    u.iter().zip(v).map(|(&a, &b)| a as f64 * b as f64).sum()
}

fn norm_f64(u: &[f32]) -> f64 {
    dot_f64(u, u).sqrt()
}

/// `u·v / (‖u‖‖v‖)`, accumulated in double precision and clamped to [-1, 1].
pub fn cosine_similarity(u: &[f32], v: &[f32]) -> Result<f64, SimilarityError> {
    if u.len() != v.len() {
        return Err(SimilarityError::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let (nu, nv) = (norm_f64(u), norm_f64(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(SimilarityError::ZeroVector { id: None });
    }
    Ok((dot_f64(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// One ranked hit from [`top_k_candidates`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedTarget {
    pub target_id: String,
    pub score: f64,
    pub rank: usize,
}

/// Candidate vectors with precomputed norms.
pub struct CandidatePool<'a> {
    table: &'a VectorTable,
    norms: Vec<f64>,
    /// Relative error bound of a single-precision dot product of this length.
    gamma: f64,
}

impl<'a> CandidatePool<'a> {
    pub fn new(table: &'a VectorTable) -> Result<Self, SimilarityError> {
        let norms: Vec<f64> = (0..table.len()).map(|i| norm_f64(table.row(i))).collect();
        if let Some(i) = norms.iter().position(|&n| n == 0.0) {
            return Err(SimilarityError::ZeroVector {
                id: Some(table.id(i).to_owned()),
            });
        }
        let u = f32::EPSILON as f64 / 2.0;
        let d = table.dim() as f64;
        Ok(Self {
            table,
            norms,
            gamma: d * u / (1.0 - d * u),
        })
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn table(&self) -> &VectorTable {
        self.table
    }

    /// Approximate cosine scores of `queries` (row-major, `m × dim`) against
    /// every candidate, written row-major into an `m × len` buffer.
    fn approx_scores(&self, queries: &[f32], query_norms: &[f64]) -> Vec<f64> {
        let dim = self.table.dim();
        let m = query_norms.len();
        let n = self.len();
        let mut out = vec![0f32; m * n];
        if m == 0 || n == 0 {
            return Vec::new();
        }
        // Candidates are stored n × dim row-major; read them as a dim × n
        // matrix through strides.
        // SAFETY: `queries` holds m × dim values, the table n × dim and `out`
        // m × n, matching the dimensions and strides passed.
        debug_assert_eq!(queries.len(), m * dim);
        unsafe {
            matrixmultiply::sgemm(
                m,
                dim,
                n,
                1.0,
                queries.as_ptr(),
                dim as isize,
                1,
                self.table.as_slice().as_ptr(),
                1,
                dim as isize,
                0.0,
                out.as_mut_ptr(),
                n as isize,
                1,
            );
        }
        out.chunks_exact(n)
            .zip(query_norms)
            .flat_map(|(row, &qn)| {
                row.iter()
                    .zip(&self.norms)
                    .map(move |(&dot, &cn)| dot as f64 / (qn * cn))
            })
            .collect()
    }

    /// Top-k selection for one query given its approximate scores.
    /// `excluded[j]` marks pool rows that may not be returned.
    fn select(
        &self,
        query: &[f32],
        query_norm: f64,
        approx: &[f64],
        excluded: &[bool],
        k: usize,
    ) -> Vec<RankedTarget> {
        let eligible: Vec<usize> = (0..self.len()).filter(|&j| !excluded[j]).collect();
        let shortlist: Vec<usize> = if eligible.len() <= k {
            eligible
        } else {
            let mut scores: Vec<f64> = eligible.iter().map(|&j| approx[j]).collect();
            let (_, kth, _) = scores.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
            // Each approximate score is within `gamma` of the exact one, so
            // every member of the exact top k clears this threshold.
            let threshold = *kth - 2.0 * self.gamma - 1e-12;
            eligible
                .into_iter()
                .filter(|&j| approx[j] >= threshold)
                .collect()
        };
        let mut hits: Vec<(f64, usize)> = shortlist
            .into_iter()
            .map(|j| {
                let exact = dot_f64(query, self.table.row(j)) / (query_norm * self.norms[j]);
                (exact.clamp(-1.0, 1.0), j)
            })
            .collect();
        hits.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then_with(|| self.table.id(a.1).cmp(self.table.id(b.1)))
        });
        hits.truncate(k);
        hits.into_iter()
            .enumerate()
            .map(|(i, (score, j))| RankedTarget {
                target_id: self.table.id(j).to_owned(),
                score,
                rank: i + 1,
            })
            .collect()
    }

    /// Runs top-k for a batch of queries. Each query carries the pool rows it
    /// must skip.
    pub fn top_k_batch(
        &self,
        queries: &[(&[f32], Vec<usize>)],
        k: usize,
    ) -> Result<Vec<Vec<RankedTarget>>, SimilarityError> {
        if k == 0 {
            return Err(SimilarityError::ZeroK);
        }
        let dim = self.table.dim();
        let mut norms = Vec::with_capacity(queries.len());
        for (q, _) in queries {
            if q.len() != dim {
                return Err(SimilarityError::DimensionMismatch {
                    left: q.len(),
                    right: dim,
                });
            }
            let n = norm_f64(q);
            if n == 0.0 {
                return Err(SimilarityError::ZeroVector { id: None });
            }
            norms.push(n);
        }
        let blocks: Vec<_> = queries
            .chunks(QUERY_BLOCK)
            .zip(norms.chunks(QUERY_BLOCK))
            .collect();
        let results: Vec<Vec<Vec<RankedTarget>>> = blocks
            .par_iter()
            .map(|(block, block_norms)| {
                let packed: Vec<f32> = block.iter().flat_map(|(q, _)| q.iter().copied()).collect();
                let approx = self.approx_scores(&packed, block_norms);
                let n = self.len();
                let mut mask = vec![false; n];
                block
                    .iter()
                    .zip(block_norms.iter())
                    .enumerate()
                    .map(|(i, ((q, skip), &qn))| {
                        for &j in skip {
                            mask[j] = true;
                        }
                        let row = if n == 0 { &[][..] } else { &approx[i * n..(i + 1) * n] };
                        let out = self.select(q, qn, row, &mask, k);
                        for &j in skip {
                            mask[j] = false;
                        }
                        out
                    })
                    .collect()
            })
            .collect();
        Ok(results.into_iter().flatten().collect())
    }
}

/// The `k` candidates most cosine-similar to `query`, skipping `excluded`.
///
/// Sorted by score descending, ties by ascending id. Fewer than `k` results
/// only when fewer candidates are eligible.
pub fn top_k_candidates(
    query: &[f32],
    candidates: &VectorTable,
    k: usize,
    excluded: &HashSet<String>,
) -> Result<Vec<RankedTarget>, SimilarityError> {
    let pool = CandidatePool::new(candidates)?;
    let skip: Vec<usize> = excluded
        .iter()
        .filter_map(|id| candidates.position(id))
        .collect();
    Ok(pool
        .top_k_batch(&[(query, skip)], k)?
        .pop()
        .expect("one result per query"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecommendationKind {
    Collaborator,
    DatasetUser,
}

impl RecommendationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RecommendationKind::Collaborator => "collaborator",
            RecommendationKind::DatasetUser => "dataset_user",
        }
    }
}

impl fmt::Display for RecommendationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RecommendationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "collaborator" => Ok(Self::Collaborator),
            "dataset_user" => Ok(Self::DatasetUser),
            other => Err(format!("unknown recommendation kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationEntry {
    pub source_id: String,
    pub target_id: String,
    pub score: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecommendationTable {
    pub collaborator_recs: BTreeMap<String, Vec<RecommendationEntry>>,
    pub dataset_user_recs: BTreeMap<String, Vec<RecommendationEntry>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecommendationSummary {
    pub authors_ranked: usize,
    pub datasets_ranked: usize,
    /// Retained authors with no vector; they get no list and are never candidates.
    pub authors_skipped: usize,
    pub datasets_skipped: usize,
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn attach(source: &str, ranked: Vec<RankedTarget>) -> Vec<RecommendationEntry> {
    ranked
        .into_iter()
        .map(|r| RecommendationEntry {
            source_id: source.to_owned(),
            target_id: r.target_id,
            score: r.score,
            rank: r.rank,
        })
        .collect()
}

/// Ranks never-collaborated authors for every author and never-users for
/// every dataset.
pub fn build_recommendation_table(
    snapshot: &CorpusSnapshot,
    store: &EmbeddingStore,
    k_collab: usize,
    k_users: usize,
) -> Result<(RecommendationTable, RecommendationSummary), SimilarityError> {
    let pool = CandidatePool::new(&store.authors)?;
    let authors = &store.authors;
    let mut table = RecommendationTable::default();

    let author_queries: Vec<(&[f32], Vec<usize>)> = (0..authors.len())
        .map(|i| {
            let id = authors.id(i);
            let mut skip = vec![i];
            if let Some(peers) = snapshot.coauthors(id) {
                skip.extend(peers.iter().filter_map(|p| authors.position(p)));
            }
            (authors.row(i), skip)
        })
        .collect();
    for (i, ranked) in pool.top_k_batch(&author_queries, k_collab)?.into_iter().enumerate() {
        let id = authors.id(i);
        table
            .collaborator_recs
            .insert(id.to_owned(), attach(id, ranked));
    }

    let datasets = &store.datasets;
    let dataset_queries: Vec<(&[f32], Vec<usize>)> = (0..datasets.len())
        .map(|i| {
            let skip = snapshot
                .dataset_users(datasets.id(i))
                .map(|users| users.iter().filter_map(|u| authors.position(u)).collect())
                .unwrap_or_default();
            (datasets.row(i), skip)
        })
        .collect();
    for (i, ranked) in pool.top_k_batch(&dataset_queries, k_users)?.into_iter().enumerate() {
        let id = datasets.id(i);
        table
            .dataset_user_recs
            .insert(id.to_owned(), attach(id, ranked));
    }

    let summary = RecommendationSummary {
        authors_ranked: table.collaborator_recs.len(),
        datasets_ranked: table.dataset_user_recs.len(),
        authors_skipped: snapshot.authors().len() - table.collaborator_recs.len(),
        datasets_skipped: snapshot.datasets().len() - table.dataset_user_recs.len(),
    };
    Ok((table, summary))
}

#[derive(Serialize, Deserialize)]
struct Line {
    source: String,
    kind: RecommendationKind,
    target: String,
    score: f64,
    rank: usize,
}

impl RecommendationTable {
    pub fn get(&self, kind: RecommendationKind, source: &str) -> Option<&[RecommendationEntry]> {
        let map = match kind {
            RecommendationKind::Collaborator => &self.collaborator_recs,
            RecommendationKind::DatasetUser => &self.dataset_user_recs,
        };
        map.get(source).map(Vec::as_slice)
    }

    pub fn entries(&self) -> impl Iterator<Item = (RecommendationKind, &RecommendationEntry)> + '_ {
        let c = self
            .collaborator_recs
            .values()
            .flatten()
            .map(|e| (RecommendationKind::Collaborator, e));
        let d = self
            .dataset_user_recs
            .values()
            .flatten()
            .map(|e| (RecommendationKind::DatasetUser, e));
        c.chain(d)
    }

    /// One JSON object per entry, scores with six decimals.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (kind, e) in self.entries() {
            let score = if e.score == 0.0 { 0.0 } else { e.score };
            writeln!(
                w,
                "{{\"source\":{},\"kind\":\"{}\",\"target\":{},\"score\":{:.6},\"rank\":{}}}",
                serde_json::to_string(&e.source_id).expect("string"),
                kind,
                serde_json::to_string(&e.target_id).expect("string"),
                score,
                e.rank
            )?;
        }
        w.flush()
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, TableError> {
        let mut table = RecommendationTable::default();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Line = serde_json::from_str(&line).map_err(|e| TableError::Malformed {
                line: i + 1,
                message: e.to_string(),
            })?;
            let map = match rec.kind {
                RecommendationKind::Collaborator => &mut table.collaborator_recs,
                RecommendationKind::DatasetUser => &mut table.dataset_user_recs,
            };
            let list = map.entry(rec.source.clone()).or_default();
            if rec.rank != list.len() + 1 {
                return Err(TableError::Malformed {
                    line: i + 1,
                    message: format!(
                        "rank {} for source `{}` does not follow rank {}",
                        rec.rank,
                        rec.source,
                        list.len()
                    ),
                });
            }
            list.push(RecommendationEntry {
                source_id: rec.source,
                target_id: rec.target,
                score: rec.score,
                rank: rec.rank,
            });
        }
        Ok(table)
    }
}

/// Orders two scored ids the way every result list is ordered.
pub fn rank_order(a: (f64, &str), b: (f64, &str)) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1))
}
