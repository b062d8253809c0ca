mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use std::collections::HashSet;
use std::path::PathBuf;
use tkg_core::corpus::load_corpus_dir;
use tkg_core::embedding::{EmbeddingStore, VectorTable};
use tkg_core::recommend::{
    build_recommendation_table, cosine_similarity, top_k_candidates, RecommendationKind,
    RecommendationTable, SimilarityError,
};
use tkg_core::synth::unit_vectors;

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/small")
}

fn fixture_table() -> (tkg_core::corpus::CorpusSnapshot, RecommendationTable) {
    let s = load_corpus_dir(&fixture_dir(), 2020).unwrap();
    let papers = VectorTable::load(&fixture_dir().join("paper_vectors.emb"), Some(4)).unwrap();
    let (store, _) = EmbeddingStore::build(&s, papers);
    let (table, _) = build_recommendation_table(&s, &store, 30, 150).unwrap();
    (s, table)
}

fn check_against_oracle(table: &VectorTable, rng: &mut ChaCha8Rng, k: usize) {
    let dim = table.dim();
    let query: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    let excluded: HashSet<String> = table
        .ids()
        .iter()
        .filter(|_| rng.random_bool(0.1))
        .cloned()
        .collect();
    let got = top_k_candidates(&query, table, k, &excluded).unwrap();
    let want = common::brute_force_top_k(&query, table, k, &excluded);
    let got_ids: Vec<&str> = got.iter().map(|r| r.target_id.as_str()).collect();
    let want_ids: Vec<&str> = want.iter().map(|w| w.0.as_str()).collect();
    assert_eq!(got_ids, want_ids, "n={} dim={dim} k={k}", table.len());
    for (i, (g, w)) in got.iter().zip(&want).enumerate() {
        assert_eq!(g.rank, i + 1);
        assert!((g.score - w.1).abs() < 1e-12);
        assert!(!excluded.contains(&g.target_id));
    }
}

#[test]
fn matches_exhaustive_sort_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for instance in 0..200 {
        let n = rng.random_range(1..=2000);
        let dim = rng.random_range(1..=32);
        let table = common::gaussian_table(n, dim, instance);
        for k in [1, 5, 30, 150] {
            check_against_oracle(&table, &mut rng, k);
        }
    }
}

#[test]
fn large_pool_matches_oracle() {
    let table = unit_vectors(28_000, 64, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..3 {
        check_against_oracle(&table, &mut rng, 30);
    }
}

#[test]
fn exact_ties_break_by_id() {
    let mut t = VectorTable::new(2);
    for id in ["c", "a", "d", "b"] {
        t.push(id, &[1.0, 1.0]).unwrap();
    }
    t.push("far", &[-1.0, 0.5]).unwrap();
    let got = top_k_candidates(&[2.0, 2.0], &t, 3, &HashSet::new()).unwrap();
    let ids: Vec<&str> = got.iter().map(|r| r.target_id.as_str()).collect();
    assert_eq!(ids, vec!["a", "b", "c"]);
}

#[test]
fn short_results_when_pool_is_exhausted() {
    let t = common::gaussian_table(4, 3, 1);
    let excluded: HashSet<String> = ["x00000".to_string()].into();
    let got = top_k_candidates(t.row(1), &t, 10, &excluded).unwrap();
    assert_eq!(got.len(), 3);
    assert!(matches!(
        top_k_candidates(&[0.0, 0.0, 0.0], &t, 1, &HashSet::new()),
        Err(SimilarityError::ZeroVector { .. })
    ));
    assert!(top_k_candidates(t.row(0), &t, 0, &HashSet::new()).is_err());
}

#[test]
fn cosine_edge_cases() {
    assert_eq!(cosine_similarity(&[1.0, 0.0], &[2.0, 0.0]).unwrap(), 1.0);
    assert_eq!(cosine_similarity(&[1.0, 0.0], &[-3.0, 0.0]).unwrap(), -1.0);
    assert!(cosine_similarity(&[1.0], &[1.0, 2.0]).is_err());
    assert!(cosine_similarity(&[0.0, 0.0], &[1.0, 2.0]).is_err());
}

#[derive(Deserialize)]
struct Expected {
    source: String,
    kind: RecommendationKind,
    target: String,
    score: f64,
    rank: usize,
}

#[test]
fn fixture_table_matches_frozen_oracle() {
    let (_, table) = fixture_table();
    let text = std::fs::read_to_string(fixture_dir().join("expected_recommendations.json")).unwrap();
    let expected: Vec<Expected> = serde_json::from_str(&text).unwrap();
    let got: Vec<_> = table.entries().collect();
    assert_eq!(got.len(), expected.len());
    for ((kind, e), x) in got.into_iter().zip(&expected) {
        assert_eq!((kind, e.source_id.as_str(), e.target_id.as_str(), e.rank),
                   (x.kind, x.source.as_str(), x.target.as_str(), x.rank));
        assert!((e.score - x.score).abs() < 1e-6, "{} -> {}", e.source_id, e.target_id);
    }
}

#[test]
fn fixture_table_never_recommends_known_links() {
    let (s, table) = fixture_table();
    for (kind, e) in table.entries() {
        assert_ne!(e.source_id, e.target_id);
        let known = match kind {
            RecommendationKind::Collaborator => s.coauthors(&e.source_id).unwrap(),
            RecommendationKind::DatasetUser => s.dataset_users(&e.source_id).unwrap(),
        };
        assert!(!known.contains(&e.target_id), "{kind} {} -> {}", e.source_id, e.target_id);
    }
}

#[test]
fn jsonl_round_trip_and_rank_check() {
    let (_, table) = fixture_table();
    let mut buf = Vec::new();
    table.write_jsonl(&mut buf).unwrap();
    let back = RecommendationTable::read_jsonl(buf.as_slice()).unwrap();
    // Sources with nothing to recommend (a1 already knows everyone) have no lines.
    let non_empty = table.collaborator_recs.values().filter(|v| !v.is_empty()).count();
    assert_eq!(back.collaborator_recs.len(), non_empty);
    assert!(table.get(RecommendationKind::Collaborator, "a1").unwrap().is_empty());
    for (kind, e) in back.entries() {
        let orig = &table.get(kind, &e.source_id).unwrap()[e.rank - 1];
        assert_eq!(orig.target_id, e.target_id);
        assert!((orig.score - e.score).abs() <= 5e-7);
    }
    let gap = "{\"source\":\"a\",\"kind\":\"collaborator\",\"target\":\"b\",\"score\":0.5,\"rank\":2}\n";
    assert!(RecommendationTable::read_jsonl(gap.as_bytes()).is_err());
}
