//! Evidence papers for one author.

use serde::Serialize;
use std::cmp::Ordering;
use thiserror::Error;
use tkg_core::corpus::{CorpusSnapshot, PaperRecord};

/// Papers before this year are never used as evidence.
pub const EVIDENCE_SINCE_YEAR: i32 = 2017;
pub const EVIDENCE_PER_LIST: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown author `{0}`")]
pub struct UnknownAuthor(pub String);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvidenceBundle {
    pub author_id: String,
    pub display_name: String,
    /// Newest first.
    pub recent_papers: Vec<PaperRecord>,
    /// Most cited first; disjoint from `recent_papers`.
    pub cited_papers: Vec<PaperRecord>,
}

impl EvidenceBundle {
    pub fn is_empty(&self) -> bool {
        self.recent_papers.is_empty() && self.cited_papers.is_empty()
    }

    pub fn papers(&self) -> impl Iterator<Item = &PaperRecord> {
        self.recent_papers.iter().chain(&self.cited_papers)
    }
}

fn by_recency(a: &&PaperRecord, b: &&PaperRecord) -> Ordering {
    b.year
        .cmp(&a.year)
        .then(b.citation_count.cmp(&a.citation_count))
        .then_with(|| a.paper_id.cmp(&b.paper_id))
}

fn by_citations(a: &&PaperRecord, b: &&PaperRecord) -> Ordering {
    b.citation_count
        .cmp(&a.citation_count)
        .then(b.year.cmp(&a.year))
        .then_with(|| a.paper_id.cmp(&b.paper_id))
}

/// Five most recent and five most cited of the author's papers since 2017.
/// The cited list skips papers already in the recent list and backfills
/// from further down the ranking.
pub fn select_evidence(author_id: &str, snapshot: &CorpusSnapshot) -> Result<EvidenceBundle, UnknownAuthor> {
    let author = snapshot
        .author(author_id)
        .ok_or_else(|| UnknownAuthor(author_id.to_owned()))?;
    let mut pool: Vec<&PaperRecord> = snapshot
        .papers_of(author_id)
        .unwrap_or_default()
        .iter()
        .filter_map(|id| snapshot.paper(id))
        .filter(|p| p.year >= EVIDENCE_SINCE_YEAR)
        .collect();

    pool.sort_by(by_recency);
    let recent: Vec<&PaperRecord> = pool.iter().take(EVIDENCE_PER_LIST).copied().collect();
    let mut rest: Vec<&PaperRecord> = pool.into_iter().skip(EVIDENCE_PER_LIST).collect();
    rest.sort_by(by_citations);
    rest.truncate(EVIDENCE_PER_LIST);

    Ok(EvidenceBundle {
        author_id: author_id.to_owned(),
        display_name: author.display_name.clone(),
        recent_papers: recent.into_iter().cloned().collect(),
        cited_papers: rest.into_iter().cloned().collect(),
    })
}
