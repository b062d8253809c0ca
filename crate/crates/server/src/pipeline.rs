//! The offline stages: ingest, embed, recommend, layout.
//!
//! Each stage reads finished artifacts from the data directory and writes
//! its own, so stages can be rerun independently.

use anyhow::{bail, Context};
use serde::Serialize;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use tkg_core::corpus::{load_corpus_dir, validate_snapshot, CorpusSnapshot};
use tkg_core::embedding::{EmbeddingStore, VectorTable};
use tkg_core::layout::io::{save_lay1, LayRecord};
use tkg_core::layout::{run_layout, LayoutConfig, Method};
use tkg_core::recommend::{build_recommendation_table, RecommendationTable};
use tkg_core::spatial::node_display_size;
use tkg_core::NodeKind;

pub const PAPER_VECTORS_FILE: &str = "paper_vectors.emb";
pub const SNAPSHOT_FILE: &str = "snapshot.json";
pub const AUTHOR_VECTORS_FILE: &str = "author_vectors.emb";
pub const DATASET_VECTORS_FILE: &str = "dataset_vectors.emb";
pub const RECOMMENDATIONS_FILE: &str = "recommendations.jsonl";
pub const LAYOUT_FILE: &str = "layout.lay";
pub const LAYOUT_REPORT_FILE: &str = "layout_report.json";
pub const JUSTIFICATIONS_FILE: &str = "justifications.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub papers: usize,
    pub authors: usize,
    pub removed_authors: usize,
    pub datasets: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EmbedReport {
    pub dim: usize,
    pub paper_vectors: usize,
    pub authors_with_vectors: usize,
    pub authors_without_vectors: usize,
    pub datasets_with_vectors: usize,
    pub datasets_without_vectors: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecommendReport {
    pub authors_ranked: usize,
    pub datasets_ranked: usize,
    pub entries: usize,
}

/// Contents of `layout_report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct LayoutReport {
    pub method: Method,
    pub random_seed: u64,
    pub nodes: usize,
    pub talents: usize,
    pub datasets: usize,
    pub final_objective: f64,
    pub objective_history: Vec<(usize, f64)>,
    pub trustworthiness: f64,
    pub bandwidth_failures: usize,
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush().with_context(|| format!("writing {}", path.display()))
}

pub fn load_snapshot(data_dir: &Path) -> anyhow::Result<CorpusSnapshot> {
    let path = data_dir.join(SNAPSHOT_FILE);
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let snapshot = CorpusSnapshot::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    let violations = validate_snapshot(&snapshot);
    if let Some(first) = violations.first() {
        bail!(
            "{} violates {} snapshot invariant(s), first: {first}",
            path.display(),
            violations.len()
        );
    }
    Ok(snapshot)
}

pub fn load_vectors(data_dir: &Path, file: &str) -> anyhow::Result<VectorTable> {
    let path = data_dir.join(file);
    VectorTable::load(&path, None).with_context(|| format!("loading {}", path.display()))
}

pub fn load_recommendations(data_dir: &Path) -> anyhow::Result<RecommendationTable> {
    let path = data_dir.join(RECOMMENDATIONS_FILE);
    let f = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    RecommendationTable::read_jsonl(BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
}

/// Parses the record files in `input_dir` and freezes them as `snapshot.json`.
pub fn ingest(input_dir: &Path, data_dir: &Path, activity_cutoff_year: i32) -> anyhow::Result<IngestReport> {
    let snapshot = load_corpus_dir(input_dir, activity_cutoff_year)?;
    let violations = validate_snapshot(&snapshot);
    if !violations.is_empty() {
        let shown: Vec<String> = violations.iter().take(20).map(ToString::to_string).collect();
        bail!("ingested corpus is inconsistent:\n  {}", shown.join("\n  "));
    }
    let path = data_dir.join(SNAPSHOT_FILE);
    let mut w = create(&path)?;
    w.write_all(snapshot.to_json().as_bytes())?;
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(IngestReport {
        papers: snapshot.papers().len(),
        authors: snapshot.authors().len(),
        removed_authors: snapshot.removed_authors().len(),
        datasets: snapshot.datasets().len(),
    })
}

/// Aggregates `paper_vectors.emb` from `input_dir` into author and dataset vectors.
pub fn embed(input_dir: &Path, data_dir: &Path, expected_dim: Option<usize>) -> anyhow::Result<EmbedReport> {
    let snapshot = load_snapshot(data_dir)?;
    let path = input_dir.join(PAPER_VECTORS_FILE);
    let papers = VectorTable::load(&path, expected_dim).with_context(|| format!("loading {}", path.display()))?;
    let paper_vectors = papers.len();
    let (store, summary) = EmbeddingStore::build(&snapshot, papers);
    store.authors.save(&data_dir.join(AUTHOR_VECTORS_FILE))?;
    store.datasets.save(&data_dir.join(DATASET_VECTORS_FILE))?;
    Ok(EmbedReport {
        dim: store.papers.dim(),
        paper_vectors,
        authors_with_vectors: summary.authors_with_vectors,
        authors_without_vectors: summary.authors_without_vectors,
        datasets_with_vectors: summary.datasets_with_vectors,
        datasets_without_vectors: summary.datasets_without_vectors,
    })
}

/// Writes `recommendations.jsonl` from the aggregated vectors.
pub fn recommend(data_dir: &Path, k_collaborators: usize, k_dataset_users: usize) -> anyhow::Result<RecommendReport> {
    let snapshot = load_snapshot(data_dir)?;
    let authors = load_vectors(data_dir, AUTHOR_VECTORS_FILE)?;
    let datasets = load_vectors(data_dir, DATASET_VECTORS_FILE)?;
    if !datasets.is_empty() && datasets.dim() != authors.dim() {
        bail!(
            "{AUTHOR_VECTORS_FILE} has dimension {} but {DATASET_VECTORS_FILE} has {}",
            authors.dim(),
            datasets.dim()
        );
    }
    let store = EmbeddingStore {
        papers: VectorTable::new(authors.dim()),
        authors,
        datasets,
    };
    let (table, summary) = build_recommendation_table(&snapshot, &store, k_collaborators, k_dataset_users)?;
    let path = data_dir.join(RECOMMENDATIONS_FILE);
    let mut w = create(&path)?;
    table.write_jsonl(&mut w)?;
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(RecommendReport {
        authors_ranked: summary.authors_ranked,
        datasets_ranked: summary.datasets_ranked,
        entries: table.entries().count(),
    })
}

/// Every node with a vector: authors first, then datasets, each in id order.
pub fn layout_input(authors: &VectorTable, datasets: &VectorTable) -> anyhow::Result<(VectorTable, Vec<NodeKind>)> {
    let mut all = VectorTable::with_capacity(authors.dim(), authors.len() + datasets.len());
    let mut kinds = Vec::with_capacity(authors.len() + datasets.len());
    for (table, kind) in [(authors, NodeKind::Talent), (datasets, NodeKind::Dataset)] {
        for (id, row) in table.iter() {
            all.push(id, row)?;
            kinds.push(kind);
        }
    }
    Ok((all, kinds))
}

/// Projects every node with a vector to 2D and writes `layout.lay` plus
/// `layout_report.json`.
pub fn layout(data_dir: &Path, config: &LayoutConfig) -> anyhow::Result<LayoutReport> {
    let snapshot = load_snapshot(data_dir)?;
    let authors = load_vectors(data_dir, AUTHOR_VECTORS_FILE)?;
    let datasets = load_vectors(data_dir, DATASET_VECTORS_FILE)?;
    let (input, kinds) = layout_input(&authors, &datasets)?;
    let result = run_layout(&input, config)?;

    let mut records = Vec::with_capacity(result.ids.len());
    for ((id, c), kind) in result.ids.iter().zip(&result.coordinates).zip(&kinds) {
        let count = match kind {
            NodeKind::Talent => snapshot.publication_count(id).unwrap_or(0),
            NodeKind::Dataset => snapshot.papers_using(id).count(),
        };
        records.push(LayRecord {
            id: id.clone(),
            x: c[0] as f32,
            y: c[1] as f32,
            kind: *kind,
            display_size: node_display_size(count as i64, *kind)? as f32,
        });
    }
    save_lay1(&data_dir.join(LAYOUT_FILE), &records)?;

    let report = LayoutReport {
        method: result.method,
        random_seed: config.random_seed,
        nodes: records.len(),
        talents: authors.len(),
        datasets: datasets.len(),
        final_objective: result.final_objective,
        objective_history: result.objective_history,
        trustworthiness: result.trustworthiness,
        bandwidth_failures: result.bandwidth_failures,
    };
    write_json(&data_dir.join(LAYOUT_REPORT_FILE), &report)?;
    Ok(report)
}
