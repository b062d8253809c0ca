mod common;

use std::time::Instant;
use tkg_core::layout::{run_tsne, run_umap, LayoutConfig, LayoutResult, Method};
use tkg_core::synth::orthogonal_clusters;

fn report(r: &LayoutResult, labels: &[usize], secs: f64) -> f64 {
    let found = common::kmeans(&r.coordinates, 3, 10, 1);
    let ari = common::adjusted_rand_index(labels, &found);
    eprintln!(
        "{}: ari={ari:.4} trust={:.4} objective {:.4} -> {:.4} in {secs:.2}s",
        r.method,
        r.trustworthiness,
        r.objective_history[0].1,
        r.final_objective
    );
    ari
}

#[test]
fn tsne_separates_three_clusters() {
    let (table, labels) = orthogonal_clusters(3, 150, 768, 0.01, 11);
    let t = Instant::now();
    let r = run_tsne(&table, &LayoutConfig::default()).unwrap();
    let ari = report(&r, &labels, t.elapsed().as_secs_f64());
    assert!(ari >= 0.9, "ari {ari}");
    assert!(r.final_objective < r.objective_history[0].1);
    assert_eq!(r.bandwidth_failures, 0);
}

#[test]
fn umap_separates_three_clusters() {
    let (table, labels) = orthogonal_clusters(3, 150, 768, 0.01, 11);
    let config = LayoutConfig {
        method: Method::Umap,
        ..LayoutConfig::default()
    };
    let t = Instant::now();
    let r = run_umap(&table, &config).unwrap();
    let ari = report(&r, &labels, t.elapsed().as_secs_f64());
    assert!(ari >= 0.9, "ari {ari}");
    assert!(r.final_objective < r.objective_history[0].1);
}

#[test]
fn same_seed_same_layout() {
    let (table, _) = orthogonal_clusters(3, 20, 16, 0.05, 3);
    let mut config = LayoutConfig::default();
    config.tsne.perplexity = 5.0;
    config.tsne.iterations = 300;
    let a = run_tsne(&table, &config).unwrap();
    let b = run_tsne(&table, &config).unwrap();
    assert_eq!(a, b);
    config.random_seed = 43;
    let c = run_tsne(&table, &config).unwrap();
    assert_ne!(a.coordinates, c.coordinates);

    config.method = Method::Umap;
    config.umap.epochs = 100;
    config.random_seed = 42;
    assert_eq!(run_umap(&table, &config).unwrap(), run_umap(&table, &config).unwrap());
}

#[test]
fn exported_coordinates_fill_the_box() {
    let (table, _) = orthogonal_clusters(2, 15, 8, 0.05, 5);
    let mut config = LayoutConfig::default();
    config.tsne.perplexity = 5.0;
    config.tsne.iterations = 200;
    let r = run_tsne(&table, &config).unwrap();
    let max = r
        .coordinates
        .iter()
        .flat_map(|c| [c[0].abs(), c[1].abs()])
        .fold(0.0, f64::max);
    assert!((max - 1000.0).abs() < 1e-6);
    let mean: f64 = r.coordinates.iter().map(|c| c[0]).sum::<f64>() / 30.0;
    assert!(mean.abs() < 1e-6);
}

#[test]
fn ten_point_smoke() {
    let (table, _) = orthogonal_clusters(2, 5, 8, 0.1, 9);
    let mut config = LayoutConfig::default();
    config.tsne.perplexity = 3.0;
    config.tsne.iterations = 250;
    let r = run_tsne(&table, &config).unwrap();
    assert_eq!(r.coordinates.len(), 10);
    assert!(r.coordinates.iter().all(|c| c[0].is_finite() && c[1].is_finite()));
    // History: iteration 1, every 50, and the final one.
    let iters: Vec<usize> = r.objective_history.iter().map(|h| h.0).collect();
    assert_eq!(iters, vec![1, 50, 100, 150, 200, 250]);
}

#[test]
fn too_few_points_is_an_error() {
    let (table, _) = orthogonal_clusters(3, 3, 8, 0.1, 9);
    assert!(run_tsne(&table, &LayoutConfig::default()).is_err());
}
