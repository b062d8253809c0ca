//! Deterministic synthetic data: corpora with topic structure, unit-vector
//! pools, clustered benchmarks and map layouts.

use crate::corpus::{AuthorRecord, DatasetRecord, PaperRecord};
use crate::embedding::{EmbeddingError, VectorTable};
use crate::spatial::{node_display_size, LayoutPoint};
use crate::NodeKind;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::Serialize;
use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

const FIRST_NAMES: &[&str] = &[
    "Ada", "Alan", "Amara", "Ann", "Anna", "Bao", "Carmen", "Chen", "Dara", "Diego", "Elena",
    "Emeka", "Farah", "Grace", "Hana", "Igor", "Imani", "Jonas", "Joanne", "Kai", "Kenji", "Lena",
    "Leila", "Marco", "Maya", "Nadia", "Nikhil", "Olga", "Omar", "Priya", "Quinn", "Rafael",
    "Rosa", "Sami", "Sofia", "Tariq", "Uma", "Victor", "Wen", "Yara", "Yusuf", "Zoe",
];

const LAST_NAMES: &[&str] = &[
    "Abe", "Alvarez", "Banerjee", "Berg", "Castro", "Cohen", "Dubois", "Eze", "Fischer", "Garcia",
    "Gupta", "Haddad", "Ito", "Jensen", "Kim", "Kowalski", "Larsen", "Li", "Mensah", "Moreau",
    "Nakamura", "Novak", "Okafor", "Olsen", "Patel", "Petrov", "Quispe", "Rossi", "Sato",
    "Schmidt", "Silva", "Tanaka", "Usman", "Varga", "Wang", "Weber", "Xu", "Yilmaz", "Zhang",
];

const INSTITUTIONS: &[&str] = &[
    "University of California San Diego",
    "Stanford University",
    "University of Toronto",
    "ETH Zurich",
    "University of Tokyo",
    "Karolinska Institutet",
    "Broad Institute",
    "University of Cape Town",
    "Tsinghua University",
    "Max Planck Institute",
];

const TOPIC_WORDS: &[&str] = &[
    "proteomics", "imaging", "single-cell", "protein interaction", "cell mapping", "CRISPR screens",
    "genomics", "ethics", "microscopy", "network biology", "deep learning", "metabolomics",
    "spatial transcriptomics", "structural biology", "drug response", "signaling",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub authors: usize,
    pub datasets: usize,
    pub papers: usize,
    pub topics: usize,
    pub dim: usize,
    /// Fraction of authors flagged core.
    pub core_fraction: f64,
    /// Probability that a paper's coauthor comes from its own topic.
    pub topic_affinity: f64,
    /// Standard deviation of per-paper noise around the topic direction.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            authors: 5200,
            datasets: 120,
            papers: 14000,
            topics: 16,
            dim: 64,
            core_fraction: 0.1,
            topic_affinity: 0.85,
            noise: 0.6,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub papers: Vec<PaperRecord>,
    pub authors: Vec<AuthorRecord>,
    pub datasets: Vec<DatasetRecord>,
    pub paper_vectors: VectorTable,
    /// Topic of each author, aligned with `authors`.
    pub author_topics: Vec<usize>,
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// Generates a corpus whose authors cluster into topics. Papers mostly
/// draw their byline and datasets from one topic and carry a vector near
/// that topic's direction.
pub fn generate_corpus(config: &SynthConfig) -> SynthCorpus {
    assert!(config.topics > 0 && config.authors >= config.topics && config.dim > 0);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let centers: Vec<Vec<f64>> = (0..config.topics)
        .map(|_| unit(gaussian(&mut rng, config.dim)))
        .collect();

    let mut authors = Vec::with_capacity(config.authors);
    let mut author_topics = Vec::with_capacity(config.authors);
    let mut by_topic: Vec<Vec<usize>> = vec![Vec::new(); config.topics];
    for i in 0..config.authors {
        let topic = i % config.topics;
        let first = FIRST_NAMES.choose(&mut rng).expect("non-empty");
        let last = LAST_NAMES.choose(&mut rng).expect("non-empty");
        let id = format!("a{i:05}");
        authors.push(AuthorRecord {
            detail_url: rng
                .random_bool(0.5)
                .then(|| format!("https://talent.example.org/people/{id}")),
            author_id: id,
            display_name: if i == 0 {
                "Trey Ideker".to_owned()
            } else {
                format!("{first} {last}")
            },
            institution: INSTITUTIONS.choose(&mut rng).expect("non-empty").to_string(),
            career_start_year: Some(rng.random_range(1985..2022)),
            is_core: rng.random_bool(config.core_fraction),
        });
        author_topics.push(topic);
        by_topic[topic].push(i);
    }

    let mut datasets = Vec::with_capacity(config.datasets);
    let mut datasets_by_topic: Vec<Vec<usize>> = vec![Vec::new(); config.topics];
    for d in 0..config.datasets {
        let topic = d % config.topics;
        let word = TOPIC_WORDS[topic % TOPIC_WORDS.len()];
        datasets.push(DatasetRecord {
            dataset_id: format!("d{d:04}"),
            name: format!("{word} atlas {}", d / config.topics + 1),
            description: format!("Reference {word} measurements, release {}", d + 1),
        });
        datasets_by_topic[topic].push(d);
    }

    let noise = Normal::new(0.0, config.noise / (config.dim as f64).sqrt()).expect("valid sigma");
    let mut papers = Vec::with_capacity(config.papers);
    let mut paper_vectors = VectorTable::with_capacity(config.dim, config.papers);
    for p in 0..config.papers {
        // Guarantee every author at least one paper before sampling freely.
        let lead = if p < config.authors { p } else { rng.random_range(0..config.authors) };
        let topic = author_topics[lead];
        let byline_len = 1 + (rng.random::<f64>().powi(2) * 8.0) as usize;
        let mut byline = vec![lead];
        let mut seen: BTreeSet<usize> = byline.iter().copied().collect();
        while byline.len() < byline_len {
            let pick = if rng.random_bool(config.topic_affinity) {
                *by_topic[topic].choose(&mut rng).expect("non-empty topic")
            } else {
                rng.random_range(0..config.authors)
            };
            if seen.insert(pick) {
                byline.push(pick);
            }
        }
        if byline.len() > 1 && rng.random_bool(0.5) {
            // Lead author is sometimes the senior (last) author.
            byline.rotate_left(1);
        }
        let mut dataset_ids = BTreeSet::new();
        if !datasets_by_topic[topic].is_empty() && rng.random_bool(0.3) {
            let d = *datasets_by_topic[topic].choose(&mut rng).expect("non-empty");
            dataset_ids.insert(datasets[d].dataset_id.clone());
            if rng.random_bool(0.2) {
                let other = rng.random_range(0..config.datasets);
                dataset_ids.insert(datasets[other].dataset_id.clone());
            }
        }
        let year = 2008 + (rng.random::<f64>().sqrt() * 17.0) as i32;
        let citations = (rng.random::<f64>().powi(3) * 400.0) as u64;
        let word = TOPIC_WORDS[topic % TOPIC_WORDS.len()];
        let id = format!("p{p:06}");
        let v: Vec<f32> = centers[topic]
            .iter()
            .map(|&c| (c + noise.sample(&mut rng)) as f32)
            .collect();
        paper_vectors.push(id.clone(), &v).expect("fresh id, finite values");
        papers.push(PaperRecord {
            paper_id: id,
            title: format!("Advances in {word}: study {p}"),
            abstract_text: format!("We report {word} results from a synthetic cohort ({p})."),
            year,
            journal: format!("Journal of {}", word),
            citation_count: citations,
            author_ids: byline.iter().map(|&i| authors[i].author_id.clone()).collect(),
            dataset_ids,
        });
    }

    SynthCorpus {
        papers,
        authors,
        datasets,
        paper_vectors,
        author_topics,
    }
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in rows {
        serde_json::to_writer(&mut w, row)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

impl SynthCorpus {
    /// Writes `papers.jsonl`, `authors.jsonl`, `datasets.jsonl` and
    /// `paper_vectors.emb` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<(), EmbeddingError> {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        for (name, result) in [
            ("papers.jsonl", write_jsonl(&dir.join("papers.jsonl"), &self.papers)),
            ("authors.jsonl", write_jsonl(&dir.join("authors.jsonl"), &self.authors)),
            ("datasets.jsonl", write_jsonl(&dir.join("datasets.jsonl"), &self.datasets)),
        ] {
            result.map_err(|e| io_err(&dir.join(name), e))?;
        }
        self.paper_vectors.save(&dir.join("paper_vectors.emb"))
    }
}

fn io_err(path: &Path, source: io::Error) -> EmbeddingError {
    EmbeddingError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// `n` seeded Gaussian directions normalized to unit length, ids `v00000…`.
pub fn unit_vectors(n: usize, dim: usize, seed: u64) -> VectorTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = VectorTable::with_capacity(dim, n);
    for i in 0..n {
        let v: Vec<f32> = unit(gaussian(&mut rng, dim)).into_iter().map(|x| x as f32).collect();
        table.push(format!("v{i:05}"), &v).expect("unique ids");
    }
    table
}

/// `clusters × per_cluster` points around mutually orthogonal unit centers
/// (the first `clusters` basis vectors) with isotropic noise `sigma`.
/// Returns the table and each point's cluster label.
pub fn orthogonal_clusters(
    clusters: usize,
    per_cluster: usize,
    dim: usize,
    sigma: f64,
    seed: u64,
) -> (VectorTable, Vec<usize>) {
    assert!(clusters <= dim, "need at least as many dimensions as clusters");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("valid sigma");
    let mut table = VectorTable::with_capacity(dim, clusters * per_cluster);
    let mut labels = Vec::with_capacity(clusters * per_cluster);
    for c in 0..clusters {
        for i in 0..per_cluster {
            let v: Vec<f32> = (0..dim)
                .map(|d| (if d == c { 1.0 } else { 0.0 } + normal.sample(&mut rng)) as f32)
                .collect();
            table.push(format!("c{c}-{i:04}"), &v).expect("unique ids");
            labels.push(c);
        }
    }
    (table, labels)
}

/// Random map layout inside `[-1000, 1000]²`: talents sized by a skewed
/// publication count, datasets at the fixed dataset size.
pub fn layout_points(talents: usize, datasets: usize, seed: u64) -> Vec<LayoutPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(talents + datasets);
    for i in 0..talents + datasets {
        let (id, kind, pubs) = if i < talents {
            (format!("t{i:05}"), NodeKind::Talent, (rng.random::<f64>().powi(4) * 300.0) as i64)
        } else {
            (format!("d{:04}", i - talents), NodeKind::Dataset, 0)
        };
        let x = rng.random_range(-1000.0..1000.0);
        let y = rng.random_range(-1000.0..1000.0);
        let size = node_display_size(pubs, kind).expect("non-negative count");
        out.push(LayoutPoint::new(id, x, y, kind, size));
    }
    out
}
