//! Record ingest and the immutable corpus snapshot.
//!
//! Input is three line-delimited JSON files (papers, authors, datasets).
//! Loading is strict: the first malformed line, duplicate id or dangling
//! dataset reference aborts the whole load.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Authors need at least one paper strictly after this year to be kept.
pub const DEFAULT_ACTIVITY_CUTOFF_YEAR: i32 = 2020;

pub const MIN_YEAR: i32 = 1900;
pub const MAX_YEAR: i32 = 2100;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{location}: duplicate {kind} id `{id}`")]
    DuplicateId {
        kind: &'static str,
        id: String,
        location: String,
    },
    #[error("{location}: paper `{paper_id}` references unknown dataset `{dataset_id}`")]
    DanglingDataset {
        paper_id: String,
        dataset_id: String,
        location: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperRecord {
    #[serde(rename = "id")]
    pub paper_id: String,
    pub title: String,
    #[serde(rename = "abstract", default)]
    pub abstract_text: String,
    pub year: i32,
    #[serde(default)]
    pub journal: String,
    #[serde(rename = "citations")]
    pub citation_count: u64,
    /// Byline order. Authors dropped by the activity filter stay here so
    /// positional weights of the remaining authors are unaffected.
    #[serde(rename = "authors")]
    pub author_ids: Vec<String>,
    #[serde(rename = "datasets", default)]
    pub dataset_ids: BTreeSet<String>,
}

impl PaperRecord {
    fn check(&self) -> Result<(), String> {
        if self.paper_id.is_empty() {
            return Err("empty paper id".into());
        }
        if self.author_ids.is_empty() {
            return Err(format!("paper `{}` has no authors", self.paper_id));
        }
        let mut seen = BTreeSet::new();
        for a in &self.author_ids {
            if !seen.insert(a.as_str()) {
                return Err(format!(
                    "paper `{}` lists author `{a}` more than once",
                    self.paper_id
                ));
            }
        }
        if !(MIN_YEAR..=MAX_YEAR).contains(&self.year) {
            return Err(format!(
                "paper `{}` has year {} outside {MIN_YEAR}..={MAX_YEAR}",
                self.paper_id, self.year
            ));
        }
        Ok(())
    }

    /// 1-based byline position of `author_id`, if present.
    pub fn position_of(&self, author_id: &str) -> Option<usize> {
        self.author_ids
            .iter()
            .position(|a| a == author_id)
            .map(|i| i + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorRecord {
    #[serde(rename = "id")]
    pub author_id: String,
    #[serde(rename = "name")]
    pub display_name: String,
    #[serde(default)]
    pub institution: String,
    #[serde(default)]
    pub career_start_year: Option<i32>,
    #[serde(default)]
    pub is_core: bool,
    #[serde(default)]
    pub detail_url: Option<String>,
}

impl AuthorRecord {
    fn check(&self) -> Result<(), String> {
        if self.author_id.is_empty() {
            return Err("empty author id".into());
        }
        if let Some(u) = &self.detail_url {
            url::Url::parse(u)
                .map_err(|e| format!("author `{}` detail_url `{u}`: {e}", self.author_id))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    #[serde(rename = "id")]
    pub dataset_id: String,
    pub name: String,
    #[serde(default)]
    pub description: String,
}

impl DatasetRecord {
    fn check(&self) -> Result<(), String> {
        if self.dataset_id.is_empty() {
            return Err("empty dataset id".into());
        }
        if self.name.trim().is_empty() {
            return Err(format!("dataset `{}` has an empty name", self.dataset_id));
        }
        Ok(())
    }
}

/// Raw, unchecked contents of a snapshot.
///
/// This is what gets serialized. [`CorpusSnapshot::from_parts`] wraps parts
/// without checking them; run [`validate_snapshot`] on anything that did not
/// come out of [`load_corpus`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SnapshotParts {
    pub activity_cutoff_year: i32,
    pub papers: BTreeMap<String, PaperRecord>,
    pub authors: BTreeMap<String, AuthorRecord>,
    pub datasets: BTreeMap<String, DatasetRecord>,
    pub coauthor_index: BTreeMap<String, BTreeSet<String>>,
    pub dataset_user_index: BTreeMap<String, BTreeSet<String>>,
    pub author_paper_index: BTreeMap<String, Vec<String>>,
    pub publication_count: BTreeMap<String, usize>,
    /// Profiled authors dropped by the activity filter.
    pub removed_authors: BTreeSet<String>,
}

/// Validated, immutable view of the corpus. Share it behind an `Arc`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CorpusSnapshot {
    parts: SnapshotParts,
}

impl CorpusSnapshot {
    /// Builds a snapshot from in-memory records.
    ///
    /// Authors are kept when they have a paper with `year > activity_cutoff_year`
    /// or are flagged core. Byline authors without a profile record are
    /// allowed; they contribute to positional weights but get no node.
    pub fn build(
        papers: Vec<PaperRecord>,
        authors: Vec<AuthorRecord>,
        datasets: Vec<DatasetRecord>,
        activity_cutoff_year: i32,
    ) -> Result<Self, IngestError> {
        let mut dataset_map = BTreeMap::new();
        for d in datasets {
            if let Err(message) = d.check() {
                return Err(IngestError::Malformed {
                    path: PathBuf::from("<memory>"),
                    line: 0,
                    message,
                });
            }
            let id = d.dataset_id.clone();
            if dataset_map.insert(id.clone(), d).is_some() {
                return Err(IngestError::DuplicateId {
                    kind: "dataset",
                    id,
                    location: "<memory>".into(),
                });
            }
        }
        let mut author_map = BTreeMap::new();
        for a in authors {
            if let Err(message) = a.check() {
                return Err(IngestError::Malformed {
                    path: PathBuf::from("<memory>"),
                    line: 0,
                    message,
                });
            }
            let id = a.author_id.clone();
            if dataset_map.contains_key(&id) || author_map.insert(id.clone(), a).is_some() {
                return Err(IngestError::DuplicateId {
                    kind: "author",
                    id,
                    location: "<memory>".into(),
                });
            }
        }
        let mut paper_map = BTreeMap::new();
        for p in papers {
            if let Err(message) = p.check() {
                return Err(IngestError::Malformed {
                    path: PathBuf::from("<memory>"),
                    line: 0,
                    message,
                });
            }
            if let Some(missing) = p.dataset_ids.iter().find(|d| !dataset_map.contains_key(*d)) {
                return Err(IngestError::DanglingDataset {
                    paper_id: p.paper_id.clone(),
                    dataset_id: missing.clone(),
                    location: "<memory>".into(),
                });
            }
            let id = p.paper_id.clone();
            if paper_map.insert(id.clone(), p).is_some() {
                return Err(IngestError::DuplicateId {
                    kind: "paper",
                    id,
                    location: "<memory>".into(),
                });
            }
        }
        Ok(Self::index(
            paper_map,
            author_map,
            dataset_map,
            activity_cutoff_year,
        ))
    }

    fn index(
        papers: BTreeMap<String, PaperRecord>,
        mut authors: BTreeMap<String, AuthorRecord>,
        datasets: BTreeMap<String, DatasetRecord>,
        activity_cutoff_year: i32,
    ) -> Self {
        let mut active = BTreeSet::new();
        for p in papers.values() {
            if p.year > activity_cutoff_year {
                for a in &p.author_ids {
                    active.insert(a.as_str());
                }
            }
        }
        let removed_authors: BTreeSet<String> = authors
            .values()
            .filter(|a| !a.is_core && !active.contains(a.author_id.as_str()))
            .map(|a| a.author_id.clone())
            .collect();
        authors.retain(|id, _| !removed_authors.contains(id));

        let mut coauthor_index: BTreeMap<String, BTreeSet<String>> = authors
            .keys()
            .map(|id| (id.clone(), BTreeSet::new()))
            .collect();
        let mut author_paper_index: BTreeMap<String, Vec<String>> = authors
            .keys()
            .map(|id| (id.clone(), Vec::new()))
            .collect();
        let mut dataset_user_index: BTreeMap<String, BTreeSet<String>> = datasets
            .keys()
            .map(|id| (id.clone(), BTreeSet::new()))
            .collect();

        // BTreeMap iteration keeps every paper list sorted by paper id.
        for p in papers.values() {
            let retained: Vec<&String> = p
                .author_ids
                .iter()
                .filter(|a| authors.contains_key(*a))
                .collect();
            for (i, a) in retained.iter().enumerate() {
                author_paper_index
                    .get_mut(*a)
                    .expect("retained author is indexed")
                    .push(p.paper_id.clone());
                let peers = coauthor_index.get_mut(*a).expect("retained author is indexed");
                for (j, b) in retained.iter().enumerate() {
                    if i != j {
                        peers.insert((*b).clone());
                    }
                }
            }
            for d in &p.dataset_ids {
                let users = dataset_user_index
                    .get_mut(d)
                    .expect("dataset references are checked before indexing");
                users.extend(retained.iter().map(|a| (*a).clone()));
            }
        }
        let publication_count = author_paper_index
            .iter()
            .map(|(id, ps)| (id.clone(), ps.len()))
            .collect();

        CorpusSnapshot {
            parts: SnapshotParts {
                activity_cutoff_year,
                papers,
                authors,
                datasets,
                coauthor_index,
                dataset_user_index,
                author_paper_index,
                publication_count,
                removed_authors,
            },
        }
    }

    pub fn from_parts(parts: SnapshotParts) -> Self {
        CorpusSnapshot { parts }
    }

    pub fn into_parts(self) -> SnapshotParts {
        self.parts
    }

    pub fn parts(&self) -> &SnapshotParts {
        &self.parts
    }

    pub fn activity_cutoff_year(&self) -> i32 {
        self.parts.activity_cutoff_year
    }

    pub fn papers(&self) -> &BTreeMap<String, PaperRecord> {
        &self.parts.papers
    }

    pub fn authors(&self) -> &BTreeMap<String, AuthorRecord> {
        &self.parts.authors
    }

    pub fn datasets(&self) -> &BTreeMap<String, DatasetRecord> {
        &self.parts.datasets
    }

    pub fn paper(&self, id: &str) -> Option<&PaperRecord> {
        self.parts.papers.get(id)
    }

    pub fn author(&self, id: &str) -> Option<&AuthorRecord> {
        self.parts.authors.get(id)
    }

    pub fn dataset(&self, id: &str) -> Option<&DatasetRecord> {
        self.parts.datasets.get(id)
    }

    pub fn removed_authors(&self) -> &BTreeSet<String> {
        &self.parts.removed_authors
    }

    /// Retained authors ever co-bylined with `author_id`.
    pub fn coauthors(&self, author_id: &str) -> Option<&BTreeSet<String>> {
        self.parts.coauthor_index.get(author_id)
    }

    /// Retained authors on any paper that used `dataset_id`.
    pub fn dataset_users(&self, dataset_id: &str) -> Option<&BTreeSet<String>> {
        self.parts.dataset_user_index.get(dataset_id)
    }

    pub fn papers_of(&self, author_id: &str) -> Option<&[String]> {
        self.parts
            .author_paper_index
            .get(author_id)
            .map(Vec::as_slice)
    }

    pub fn publication_count(&self, author_id: &str) -> Option<usize> {
        self.parts.publication_count.get(author_id).copied()
    }

    /// Papers whose dataset list contains `dataset_id`, in paper id order.
    pub fn papers_using(&self, dataset_id: &str) -> impl Iterator<Item = &PaperRecord> + '_ {
        let dataset_id = dataset_id.to_owned();
        self.parts
            .papers
            .values()
            .filter(move |p| p.dataset_ids.contains(&dataset_id))
    }

    /// Dataset id → ids of the papers that used it, for every dataset.
    pub fn dataset_paper_map(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut map: BTreeMap<&str, Vec<&str>> = self
            .parts
            .datasets
            .keys()
            .map(|d| (d.as_str(), Vec::new()))
            .collect();
        for p in self.parts.papers.values() {
            for d in &p.dataset_ids {
                if let Some(list) = map.get_mut(d.as_str()) {
                    list.push(p.paper_id.as_str());
                }
            }
        }
        map
    }

    /// Serialized form. Two loads of the same files produce identical bytes.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("snapshot serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

fn read_jsonl<T, F>(path: &Path, mut visit: F) -> Result<(), IngestError>
where
    T: for<'de> Deserialize<'de>,
    F: FnMut(usize, T) -> Result<(), IngestError>,
{
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|e| IngestError::Malformed {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        visit(line_no, record)?;
    }
    Ok(())
}

fn at(path: &Path, line: usize) -> String {
    format!("{}:{line}", path.display())
}

/// Loads and indexes the three record files.
pub fn load_corpus(
    papers_path: &Path,
    authors_path: &Path,
    datasets_path: &Path,
    activity_cutoff_year: i32,
) -> Result<CorpusSnapshot, IngestError> {
    let mut datasets: BTreeMap<String, DatasetRecord> = BTreeMap::new();
    read_jsonl(datasets_path, |line, d: DatasetRecord| {
        d.check().map_err(|message| IngestError::Malformed {
            path: datasets_path.to_path_buf(),
            line,
            message,
        })?;
        if datasets.contains_key(&d.dataset_id) {
            return Err(IngestError::DuplicateId {
                kind: "dataset",
                id: d.dataset_id,
                location: at(datasets_path, line),
            });
        }
        datasets.insert(d.dataset_id.clone(), d);
        Ok(())
    })?;

    let mut authors: BTreeMap<String, AuthorRecord> = BTreeMap::new();
    read_jsonl(authors_path, |line, a: AuthorRecord| {
        a.check().map_err(|message| IngestError::Malformed {
            path: authors_path.to_path_buf(),
            line,
            message,
        })?;
        // Authors and datasets share the node id namespace of the map.
        if authors.contains_key(&a.author_id) || datasets.contains_key(&a.author_id) {
            return Err(IngestError::DuplicateId {
                kind: "author",
                id: a.author_id,
                location: at(authors_path, line),
            });
        }
        authors.insert(a.author_id.clone(), a);
        Ok(())
    })?;

    let mut papers: BTreeMap<String, PaperRecord> = BTreeMap::new();
    read_jsonl(papers_path, |line, p: PaperRecord| {
        p.check().map_err(|message| IngestError::Malformed {
            path: papers_path.to_path_buf(),
            line,
            message,
        })?;
        if let Some(missing) = p.dataset_ids.iter().find(|d| !datasets.contains_key(*d)) {
            return Err(IngestError::DanglingDataset {
                paper_id: p.paper_id.clone(),
                dataset_id: missing.clone(),
                location: at(papers_path, line),
            });
        }
        if papers.contains_key(&p.paper_id) {
            return Err(IngestError::DuplicateId {
                kind: "paper",
                id: p.paper_id,
                location: at(papers_path, line),
            });
        }
        papers.insert(p.paper_id.clone(), p);
        Ok(())
    })?;

    Ok(CorpusSnapshot::index(
        papers,
        authors,
        datasets,
        activity_cutoff_year,
    ))
}

/// Loads `papers.jsonl`, `authors.jsonl` and `datasets.jsonl` from one directory.
pub fn load_corpus_dir(dir: &Path, activity_cutoff_year: i32) -> Result<CorpusSnapshot, IngestError> {
    load_corpus(
        &dir.join("papers.jsonl"),
        &dir.join("authors.jsonl"),
        &dir.join("datasets.jsonl"),
        activity_cutoff_year,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Invariant {
    CoauthorSymmetry,
    CoauthorIrreflexive,
    IndexReferencesAuthor,
    IndexReferencesDataset,
    IndexReferencesPaper,
    PaperReferencesDataset,
    PublicationCount,
    PaperRecord,
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Invariant::CoauthorSymmetry => "coauthor_symmetry",
            Invariant::CoauthorIrreflexive => "coauthor_irreflexive",
            Invariant::IndexReferencesAuthor => "index_references_author",
            Invariant::IndexReferencesDataset => "index_references_dataset",
            Invariant::IndexReferencesPaper => "index_references_paper",
            Invariant::PaperReferencesDataset => "paper_references_dataset",
            Invariant::PublicationCount => "publication_count",
            Invariant::PaperRecord => "paper_record",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub invariant: Invariant,
    pub ids: Vec<String>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]: {}", self.invariant, self.ids.join(", "), self.detail)
    }
}

/// Checks every snapshot invariant. Empty result means the snapshot is sound.
pub fn validate_snapshot(snapshot: &CorpusSnapshot) -> Vec<Violation> {
    let p = &snapshot.parts;
    let mut out = Vec::new();
    let mut push = |invariant, ids: Vec<&str>, detail: String| {
        out.push(Violation {
            invariant,
            ids: ids.into_iter().map(str::to_owned).collect(),
            detail,
        })
    };

    for paper in p.papers.values() {
        if let Err(detail) = paper.check() {
            push(Invariant::PaperRecord, vec![&paper.paper_id], detail);
        }
        for d in &paper.dataset_ids {
            if !p.datasets.contains_key(d) {
                push(
                    Invariant::PaperReferencesDataset,
                    vec![&paper.paper_id, d],
                    format!("paper `{}` uses unknown dataset `{d}`", paper.paper_id),
                );
            }
        }
    }

    for (a, peers) in &p.coauthor_index {
        if !p.authors.contains_key(a) {
            push(
                Invariant::IndexReferencesAuthor,
                vec![a],
                format!("coauthor index key `{a}` is not a retained author"),
            );
        }
        for b in peers {
            if a == b {
                push(
                    Invariant::CoauthorIrreflexive,
                    vec![a],
                    format!("`{a}` is listed as its own coauthor"),
                );
                continue;
            }
            if !p.authors.contains_key(b) {
                push(
                    Invariant::IndexReferencesAuthor,
                    vec![a, b],
                    format!("coauthor `{b}` of `{a}` is not a retained author"),
                );
            }
            let reverse = p.coauthor_index.get(b).is_some_and(|s| s.contains(a));
            // Report each broken pair once, from whichever side holds the edge.
            if !reverse {
                push(
                    Invariant::CoauthorSymmetry,
                    vec![a, b],
                    format!("`{b}` is a coauthor of `{a}` but not the reverse"),
                );
            }
        }
    }

    for (d, users) in &p.dataset_user_index {
        if !p.datasets.contains_key(d) {
            push(
                Invariant::IndexReferencesDataset,
                vec![d],
                format!("dataset user index key `{d}` is not a dataset"),
            );
        }
        for u in users {
            if !p.authors.contains_key(u) {
                push(
                    Invariant::IndexReferencesAuthor,
                    vec![d, u],
                    format!("user `{u}` of dataset `{d}` is not a retained author"),
                );
            }
        }
    }

    for (a, papers) in &p.author_paper_index {
        if !p.authors.contains_key(a) {
            push(
                Invariant::IndexReferencesAuthor,
                vec![a],
                format!("author paper index key `{a}` is not a retained author"),
            );
        }
        for id in papers {
            if !p.papers.contains_key(id) {
                push(
                    Invariant::IndexReferencesPaper,
                    vec![a, id],
                    format!("author `{a}` lists unknown paper `{id}`"),
                );
            }
        }
        let counted = p.publication_count.get(a).copied();
        if counted != Some(papers.len()) {
            push(
                Invariant::PublicationCount,
                vec![a],
                format!(
                    "publication count {counted:?} differs from {} indexed papers",
                    papers.len()
                ),
            );
        }
    }
    for a in p.publication_count.keys() {
        if !p.author_paper_index.contains_key(a) {
            push(
                Invariant::PublicationCount,
                vec![a],
                format!("publication count for `{a}` has no paper index entry"),
            );
        }
    }
    out
}
