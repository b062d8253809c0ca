mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::Instant;
use tkg_core::corpus::load_corpus_dir;
use tkg_core::spatial::{
    collaborator_highlight, BBox, LayoutPoint, NameIndex, QuadTree, DEFAULT_LEAF_CAPACITY,
};
use tkg_core::synth::layout_points;
use tkg_core::NodeKind;

fn map() -> (Vec<LayoutPoint>, QuadTree) {
    let points = layout_points(28_000, 1_179, 17);
    let tree = QuadTree::build(points.clone(), DEFAULT_LEAF_CAPACITY).unwrap();
    (points, tree)
}

fn random_box(rng: &mut ChaCha8Rng) -> (f64, f64, f64, f64) {
    let w = 2000.0 * rng.random::<f64>().powi(2) + 1e-3;
    let h = 2000.0 * rng.random::<f64>().powi(2) + 1e-3;
    let x0 = rng.random_range(-1100.0..1000.0);
    let y0 = rng.random_range(-1100.0..1000.0);
    (x0, y0, x0 + w, y0 + h)
}

fn ids(points: &[&LayoutPoint]) -> Vec<String> {
    points.iter().map(|p| p.node_id.clone()).collect()
}

#[test]
fn traversal_recovers_the_input() {
    let (points, tree) = map();
    assert_eq!(tree.len(), 29_179);
    tree.check_invariants().unwrap();
    let mut got: Vec<String> = tree.traverse().iter().map(|p| p.node_id.clone()).collect();
    let mut want: Vec<String> = points.iter().map(|p| p.node_id.clone()).collect();
    got.sort();
    want.sort();
    assert_eq!(got, want);
}

#[test]
fn viewport_matches_linear_scan() {
    let (points, tree) = map();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..1000 {
        let b = random_box(&mut rng);
        let limit = *[1, 10, 500, 5000, 40_000].get(rng.random_range(0..5)).unwrap();
        let bbox = BBox::new(b.0, b.1, b.2, b.3).unwrap();
        let got = tree.query_viewport(&bbox, limit);
        let want = common::scan_viewport(&points, b, limit);
        assert_eq!(ids(&got), ids(&want), "box {b:?} limit {limit}");
    }
}

#[test]
fn tiles_partition_the_map() {
    let (points, tree) = map();
    let mut seen = BTreeSet::new();
    let edges = [-1000.0, -250.0, 0.0, 333.0, 1000.0001];
    for x in edges.windows(2) {
        for y in edges.windows(2) {
            let bbox = BBox::new(x[0], y[0], x[1], y[1]).unwrap();
            for p in tree.query_viewport(&bbox, usize::MAX) {
                assert!(seen.insert(p.node_id.clone()), "{} in two tiles", p.node_id);
            }
        }
    }
    assert_eq!(seen.len(), points.len());
}

#[test]
fn lod_keeps_the_most_important() {
    let (_, tree) = map();
    let bbox = BBox::new(-1000.0, -1000.0, 1000.1, 1000.1).unwrap();
    let top = tree.query_viewport(&bbox, 100);
    assert_eq!(top.len(), 100);
    let cutoff = top.last().unwrap().importance;
    let all = tree.query_viewport(&bbox, usize::MAX);
    assert!(all[100..].iter().all(|p| p.importance <= cutoff));
}

#[test]
fn p95_latency_under_ten_ms() {
    let (_, tree) = map();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut times = Vec::new();
    for _ in 0..1000 {
        let b = random_box(&mut rng);
        let bbox = BBox::new(b.0, b.1, b.2, b.3).unwrap();
        let t = Instant::now();
        std::hint::black_box(tree.query_viewport(&bbox, 5000));
        times.push(t.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    let p95 = times[949];
    assert!(p95 < 0.010, "p95 {:.3} ms", p95 * 1e3);
}

#[test]
fn degenerate_inputs() {
    assert!(BBox::new(1.0, 0.0, 1.0, 2.0).is_none());
    assert!(BBox::new(0.0, 0.0, f64::NAN, 2.0).is_none());
    let same = vec![LayoutPoint::new("a", 5.0, 5.0, NodeKind::Talent, 2.0); 1]
        .into_iter()
        .chain((0..200).map(|i| LayoutPoint::new(format!("p{i}"), 5.0, 5.0, NodeKind::Talent, 2.0)))
        .collect::<Vec<_>>();
    let tree = QuadTree::build(same, 4).unwrap();
    tree.check_invariants().unwrap();
    let got = tree.query_viewport(&BBox::new(4.0, 4.0, 6.0, 6.0).unwrap(), 3);
    assert_eq!(ids(&got), vec!["a", "p0", "p1"]);
    assert!(QuadTree::build(Vec::new(), 4).is_err());
}

fn fixture() -> tkg_core::corpus::CorpusSnapshot {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/small");
    load_corpus_dir(&dir, 2020).unwrap()
}

#[test]
fn search_ranks_exact_then_prefix_then_substring() {
    let index = NameIndex::new([
        ("n1", "Joanne", NodeKind::Talent),
        ("n2", "Anna", NodeKind::Talent),
        ("n3", "Ann", NodeKind::Talent),
        ("n4", "Bob", NodeKind::Talent),
        ("n5", "ANN", NodeKind::Dataset),
    ]);
    let names: Vec<String> = index
        .search("ann", Some(NodeKind::Talent), 10)
        .into_iter()
        .map(|h| h.display_name)
        .collect();
    assert_eq!(names, vec!["Ann", "Anna", "Joanne"]);
    let all = index.search("  ANN ", None, 10);
    assert_eq!(all.len(), 4);
    assert_eq!(all[0].node_id, "n5");
    assert_eq!(index.search("ann", None, 2).len(), 2);
    assert!(index.search("", None, 5).is_empty());
}

#[test]
fn fixture_search_and_highlight() {
    let s = fixture();
    let index = NameIndex::from_snapshot(&s);
    let hits = index.search("ann", None, 10);
    let names: Vec<&str> = hits.iter().map(|h| h.display_name.as_str()).collect();
    assert_eq!(names, vec!["Ann Lee", "Anna Kowalski", "Joanne Okafor"]);
    // a4 was dropped by the activity filter and is not searchable.
    assert!(index.search("Igor", None, 10).is_empty());

    let all = collaborator_highlight("a1", &s, |_| true).unwrap();
    assert_eq!(all, ["a2", "a3", "a5"].iter().map(|s| s.to_string()).collect());
    let partial = collaborator_highlight("a1", &s, |id| id != "a3").unwrap();
    assert_eq!(partial, ["a2", "a5"].iter().map(|s| s.to_string()).collect());
    assert!(collaborator_highlight("a4", &s, |_| true).is_err());
}
