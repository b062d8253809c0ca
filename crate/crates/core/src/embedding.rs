//! Per-paper vectors and their aggregation into author and dataset vectors.
//!
//! Vectors live in a [`VectorTable`]: one contiguous row-major `f32` buffer
//! plus an id index. On disk they use the EMB1 layout:
//!
//! ```text
//! "EMB1" | u32 LE dimension | u64 LE count | count × (u16 LE id_len | id | dim × f32 LE)
//! ```

use crate::corpus::CorpusSnapshot;
use rayon::prelude::*;
use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const DEFAULT_DIMENSION: usize = 768;
pub const EMB1_MAGIC: &[u8; 4] = b"EMB1";

/// Aggregates with a smaller norm than this are treated as zero evidence.
pub const ZERO_NORM_THRESHOLD: f64 = 1e-12;

const POSITION_CAP: usize = 10;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("bad magic {found:?}, expected \"EMB1\"")]
    BadMagic { found: [u8; 4] },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid dimension {0}")]
    InvalidDimension(usize),
    #[error("truncated input at byte offset {offset} while reading {what}")]
    Truncated { offset: u64, what: String },
    #[error("{count} unexpected trailing bytes at offset {offset}")]
    TrailingBytes { offset: u64, count: u64 },
    #[error("record `{id}` (#{index}) has non-finite component {component}")]
    NonFinite {
        id: String,
        index: u64,
        component: usize,
    },
    #[error("record #{index} id is not valid UTF-8")]
    BadId { index: u64 },
    #[error("id `{0}` is too long for a u16 length prefix")]
    IdTooLong(String),
    #[error("duplicate vector id `{0}`")]
    DuplicateId(String),
    #[error("unknown {kind} `{id}`")]
    UnknownEntity { kind: &'static str, id: String },
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("byline position {position} is outside 1..={byline_length}")]
pub struct PositionError {
    pub position: usize,
    pub byline_length: usize,
}

/// Contribution weight of the author at 1-based `position` in a byline of
/// `byline_length` authors.
///
/// First and last authors weigh 1. Other positions weigh `1/k` up to the
/// tenth, then a flat `1/10`.
pub fn position_weight(position: usize, byline_length: usize) -> Result<f64, PositionError> {
    if position == 0 || position > byline_length {
        return Err(PositionError {
            position,
            byline_length,
        });
    }
    if position == 1 || position == byline_length {
        return Ok(1.0);
    }
    Ok(1.0 / position.min(POSITION_CAP) as f64)
}

/// A fixed-dimension, finite vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Option<Self> {
        values.iter().all(|v| v.is_finite()).then_some(Self(values))
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.0)
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }
}

pub(crate) fn l2_norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt()
}

/// Row-major table of same-dimension vectors keyed by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VectorTable {
    dim: usize,
    ids: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
}

impl VectorTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ..Default::default()
        }
    }

    pub fn with_capacity(dim: usize, rows: usize) -> Self {
        Self {
            dim,
            ids: Vec::with_capacity(rows),
            index: HashMap::with_capacity(rows),
            data: Vec::with_capacity(rows * dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn push(&mut self, id: impl Into<String>, values: &[f32]) -> Result<(), EmbeddingError> {
        let id = id.into();
        if values.len() != self.dim {
            return Err(EmbeddingError::DimensionMismatch {
                expected: self.dim,
                found: values.len(),
            });
        }
        if let Some(component) = values.iter().position(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite {
                id,
                index: self.ids.len() as u64,
                component,
            });
        }
        if self.index.contains_key(&id) {
            return Err(EmbeddingError::DuplicateId(id));
        }
        self.index.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.data.extend_from_slice(values);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.index.get(id).map(|&i| self.row(i))
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// The whole row-major buffer.
    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> + '_ {
        self.ids
            .iter()
            .enumerate()
            .map(move |(i, id)| (id.as_str(), self.row(i)))
    }

    pub fn write_emb1<W: Write>(&self, mut w: W) -> Result<(), EmbeddingError> {
        let io = |source| EmbeddingError::Io {
            path: PathBuf::from("<writer>"),
            source,
        };
        w.write_all(EMB1_MAGIC).map_err(io)?;
        let dim = u32::try_from(self.dim).map_err(|_| EmbeddingError::InvalidDimension(self.dim))?;
        w.write_all(&dim.to_le_bytes()).map_err(io)?;
        w.write_all(&(self.len() as u64).to_le_bytes()).map_err(io)?;
        for (id, row) in self.iter() {
            let len =
                u16::try_from(id.len()).map_err(|_| EmbeddingError::IdTooLong(id.to_owned()))?;
            w.write_all(&len.to_le_bytes()).map_err(io)?;
            w.write_all(id.as_bytes()).map_err(io)?;
            for v in row {
                w.write_all(&v.to_le_bytes()).map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }

    pub fn save(&self, path: &Path) -> Result<(), EmbeddingError> {
        let file = File::create(path).map_err(|source| EmbeddingError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_emb1(BufWriter::new(file)).map_err(|e| relabel(e, path))
    }

    /// Reads an EMB1 stream. `expected_dim` rejects files of another dimension.
    pub fn read_emb1<R: Read>(r: R, expected_dim: Option<usize>) -> Result<Self, EmbeddingError> {
        let mut r = OffsetReader { inner: r, offset: 0 };
        let mut magic = [0u8; 4];
        r.fill(&mut magic, "magic")?;
        if &magic != EMB1_MAGIC {
            return Err(EmbeddingError::BadMagic { found: magic });
        }
        let mut b4 = [0u8; 4];
        r.fill(&mut b4, "dimension")?;
        let dim = u32::from_le_bytes(b4) as usize;
        if dim == 0 {
            return Err(EmbeddingError::InvalidDimension(dim));
        }
        if let Some(expected) = expected_dim {
            if expected != dim {
                return Err(EmbeddingError::DimensionMismatch {
                    expected,
                    found: dim,
                });
            }
        }
        let mut b8 = [0u8; 8];
        r.fill(&mut b8, "record count")?;
        let count = u64::from_le_bytes(b8);

        // Cap the preallocation so a corrupt count cannot exhaust memory.
        let mut table = VectorTable::with_capacity(dim, count.min(1 << 20) as usize);
        let mut id_buf = Vec::new();
        let mut raw = vec![0u8; dim * 4];
        let mut row = vec![0f32; dim];
        for index in 0..count {
            let mut b2 = [0u8; 2];
            r.fill(&mut b2, &format!("id length of record #{index}"))?;
            id_buf.resize(u16::from_le_bytes(b2) as usize, 0);
            r.fill(&mut id_buf, &format!("id of record #{index}"))?;
            let id = std::str::from_utf8(&id_buf)
                .map_err(|_| EmbeddingError::BadId { index })?
                .to_owned();
            r.fill(&mut raw, &format!("values of record `{id}` (#{index})"))?;
            for (dst, chunk) in row.iter_mut().zip(raw.chunks_exact(4)) {
                *dst = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
            }
            if let Some(component) = row.iter().position(|v| !v.is_finite()) {
                return Err(EmbeddingError::NonFinite {
                    id,
                    index,
                    component,
                });
            }
            table.push(id, &row)?;
        }
        let offset = r.offset;
        let mut rest = Vec::new();
        r.inner.read_to_end(&mut rest).map_err(|source| EmbeddingError::Io {
            path: PathBuf::from("<reader>"),
            source,
        })?;
        if !rest.is_empty() {
            return Err(EmbeddingError::TrailingBytes {
                offset,
                count: rest.len() as u64,
            });
        }
        Ok(table)
    }

    pub fn load(path: &Path, expected_dim: Option<usize>) -> Result<Self, EmbeddingError> {
        let file = File::open(path).map_err(|source| EmbeddingError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::read_emb1(BufReader::new(file), expected_dim).map_err(|e| relabel(e, path))
    }
}

fn relabel(e: EmbeddingError, path: &Path) -> EmbeddingError {
    match e {
        EmbeddingError::Io { source, .. } => EmbeddingError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    }
}

struct OffsetReader<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> OffsetReader<R> {
    fn fill(&mut self, buf: &mut [u8], what: &str) -> Result<(), EmbeddingError> {
        let mut done = 0;
        while done < buf.len() {
            match self.inner.read(&mut buf[done..]) {
                Ok(0) => {
                    return Err(EmbeddingError::Truncated {
                        offset: self.offset + done as u64,
                        what: what.to_owned(),
                    })
                }
                Ok(n) => done += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(source) => {
                    return Err(EmbeddingError::Io {
                        path: PathBuf::from("<reader>"),
                        source,
                    })
                }
            }
        }
        self.offset += buf.len() as u64;
        Ok(())
    }
}

/// Loads per-paper vectors from an EMB1 file.
pub fn load_embeddings(path: &Path) -> Result<VectorTable, EmbeddingError> {
    VectorTable::load(path, None)
}

fn normalize_or_absent(sum: Vec<f64>) -> Option<Vec<f32>> {
    let norm = sum.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !norm.is_finite() || norm < ZERO_NORM_THRESHOLD {
        return None;
    }
    Some(sum.into_iter().map(|x| (x / norm) as f32).collect())
}

fn accumulate(sum: &mut [f64], v: &[f32], w: f64) {
    for (s, &x) in sum.iter_mut().zip(v) {
        *s += w * x as f64;
    }
}

/// Position-weighted sum of the author's embedded papers, L2-normalized.
///
/// `None` when the author has no embedded paper or the sum vanishes.
pub fn aggregate_author_embedding(
    author_id: &str,
    snapshot: &CorpusSnapshot,
    papers: &VectorTable,
) -> Result<Option<Vec<f32>>, EmbeddingError> {
    let paper_ids = snapshot
        .papers_of(author_id)
        .ok_or_else(|| EmbeddingError::UnknownEntity {
            kind: "author",
            id: author_id.to_owned(),
        })?;
    let mut sum = vec![0f64; papers.dim()];
    let mut any = false;
    for pid in paper_ids {
        let (Some(v), Some(paper)) = (papers.get(pid), snapshot.paper(pid)) else {
            continue;
        };
        let position = paper
            .position_of(author_id)
            .expect("author paper index agrees with bylines");
        let w = position_weight(position, paper.author_ids.len())
            .expect("byline position is in range");
        accumulate(&mut sum, v, w);
        any = true;
    }
    Ok(if any { normalize_or_absent(sum) } else { None })
}

fn mean_of<'a>(dim: usize, vectors: impl Iterator<Item = &'a [f32]>) -> Option<Vec<f32>> {
    let mut sum = vec![0f64; dim];
    let mut n = 0usize;
    for v in vectors {
        accumulate(&mut sum, v, 1.0);
        n += 1;
    }
    if n == 0 {
        return None;
    }
    sum.iter_mut().for_each(|s| *s /= n as f64);
    normalize_or_absent(sum)
}

/// Unweighted mean of the embedded papers that used the dataset, L2-normalized.
pub fn aggregate_dataset_embedding(
    dataset_id: &str,
    snapshot: &CorpusSnapshot,
    papers: &VectorTable,
) -> Result<Option<Vec<f32>>, EmbeddingError> {
    if snapshot.dataset(dataset_id).is_none() {
        return Err(EmbeddingError::UnknownEntity {
            kind: "dataset",
            id: dataset_id.to_owned(),
        });
    }
    Ok(mean_of(
        papers.dim(),
        snapshot
            .papers_using(dataset_id)
            .filter_map(|p| papers.get(&p.paper_id)),
    ))
}

/// Paper, author and dataset vectors. Frozen once built.
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    pub papers: VectorTable,
    pub authors: VectorTable,
    pub datasets: VectorTable,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AggregationSummary {
    pub authors_with_vectors: usize,
    pub authors_without_vectors: usize,
    pub datasets_with_vectors: usize,
    pub datasets_without_vectors: usize,
}

impl EmbeddingStore {
    /// Aggregates every retained author and every dataset. Rows are in id order.
    pub fn build(snapshot: &CorpusSnapshot, papers: VectorTable) -> (Self, AggregationSummary) {
        let dim = papers.dim();
        let author_ids: Vec<&String> = snapshot.authors().keys().collect();
        let author_vecs: Vec<Option<Vec<f32>>> = author_ids
            .par_iter()
            .map(|id| {
                aggregate_author_embedding(id, snapshot, &papers)
                    .expect("author ids come from the snapshot")
            })
            .collect();

        let dataset_papers = snapshot.dataset_paper_map();
        let dataset_ids: Vec<&str> = dataset_papers.keys().copied().collect();
        let dataset_vecs: Vec<Option<Vec<f32>>> = dataset_ids
            .par_iter()
            .map(|id| mean_of(dim, dataset_papers[id].iter().filter_map(|p| papers.get(p))))
            .collect();

        let mut summary = AggregationSummary::default();
        let mut authors = VectorTable::with_capacity(dim, author_ids.len());
        for (id, v) in author_ids.into_iter().zip(author_vecs) {
            match v {
                Some(v) => {
                    authors.push(id.clone(), &v).expect("aggregate is finite");
                    summary.authors_with_vectors += 1;
                }
                None => summary.authors_without_vectors += 1,
            }
        }
        let mut datasets = VectorTable::with_capacity(dim, dataset_ids.len());
        for (id, v) in dataset_ids.into_iter().zip(dataset_vecs) {
            match v {
                Some(v) => {
                    datasets.push(id, &v).expect("aggregate is finite");
                    summary.datasets_with_vectors += 1;
                }
                None => summary.datasets_without_vectors += 1,
            }
        }
        (
            EmbeddingStore {
                papers,
                authors,
                datasets,
            },
            summary,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_cases() {
        assert_eq!(position_weight(1, 5), Ok(1.0));
        assert_eq!(position_weight(5, 5), Ok(1.0));
        assert_eq!(position_weight(3, 5), Ok(1.0 / 3.0));
        assert_eq!(position_weight(12, 20), Ok(0.1));
        assert_eq!(position_weight(1, 1), Ok(1.0));
        assert_eq!(position_weight(10, 20), Ok(0.1));
        assert_eq!(position_weight(11, 11), Ok(1.0));
    }

    #[test]
    fn weight_rejects_bad_positions() {
        assert!(position_weight(0, 3).is_err());
        assert!(position_weight(4, 3).is_err());
        assert!(position_weight(1, 0).is_err());
    }

    fn write_to_vec(t: &VectorTable) -> Vec<u8> {
        let mut buf = Vec::new();
        t.write_emb1(&mut buf).unwrap();
        buf
    }

    #[test]
    fn emb1_bad_magic() {
        let mut bytes = write_to_vec(&VectorTable::new(2));
        bytes[0] = b'X';
        assert!(matches!(
            VectorTable::read_emb1(bytes.as_slice(), None),
            Err(EmbeddingError::BadMagic { .. })
        ));
    }

    #[test]
    fn emb1_nan_names_record() {
        let mut t = VectorTable::new(2);
        t.push("ok", &[1.0, 2.0]).unwrap();
        t.push("bad", &[3.0, 4.0]).unwrap();
        let mut bytes = write_to_vec(&t);
        // last component of the last record
        let n = bytes.len();
        bytes[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
        match VectorTable::read_emb1(bytes.as_slice(), None) {
            Err(EmbeddingError::NonFinite { id, index, component }) => {
                assert_eq!((id.as_str(), index, component), ("bad", 1, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn emb1_short_record_reports_offset() {
        let mut t = VectorTable::new(768);
        t.push("p", &vec![0.5; 768]).unwrap();
        let bytes = write_to_vec(&t);
        let cut = &bytes[..bytes.len() - 10];
        match VectorTable::read_emb1(cut, None) {
            // header 16 bytes + 2 length bytes + 1 id byte; values start at 19
            Err(EmbeddingError::Truncated { offset, what }) => {
                assert_eq!(offset, (cut.len()) as u64);
                assert!(offset >= 19);
                assert!(what.contains("`p`"), "{what}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn emb1_dimension_mismatch_and_trailing_bytes() {
        let mut t = VectorTable::new(3);
        t.push("a", &[1.0, 0.0, 0.0]).unwrap();
        let mut bytes = write_to_vec(&t);
        assert!(matches!(
            VectorTable::read_emb1(bytes.as_slice(), Some(768)),
            Err(EmbeddingError::DimensionMismatch { expected: 768, found: 3 })
        ));
        bytes.push(0);
        assert!(matches!(
            VectorTable::read_emb1(bytes.as_slice(), Some(3)),
            Err(EmbeddingError::TrailingBytes { count: 1, .. })
        ));
    }

    #[test]
    fn table_rejects_bad_rows() {
        let mut t = VectorTable::new(2);
        assert!(t.push("a", &[1.0]).is_err());
        assert!(t.push("a", &[f32::INFINITY, 0.0]).is_err());
        t.push("a", &[1.0, 0.0]).unwrap();
        assert!(matches!(t.push("a", &[1.0, 0.0]), Err(EmbeddingError::DuplicateId(_))));
    }
}
