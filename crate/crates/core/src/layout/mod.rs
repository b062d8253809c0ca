//! Projection of aggregated vectors to 2D.
//!
//! Two reducers sit behind [`run_layout`]: Barnes-Hut t-SNE (the default)
//! and a UMAP-style fuzzy-graph optimizer. Both take unit-normalized input,
//! so Euclidean neighborhoods coincide with cosine neighborhoods. Results are
//! centered and scaled into `[-1000, 1000]²` before export.

pub mod affinity;
pub mod bhtree;
pub mod io;
pub mod knn;
pub mod sparse;
pub mod trust;
pub mod tsne;
pub mod umap;

use crate::embedding::VectorTable;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

pub use affinity::{compute_affinities, Affinities};
pub use sparse::SparseMatrix;
pub use trust::trustworthiness;
pub use tsne::{run_tsne, tsne_gradient};
pub use umap::run_umap;

/// Half-width of the exported coordinate box.
pub const EXPORT_EXTENT: f64 = 1000.0;

/// Trustworthiness is exact up to this many points, sampled above it.
pub const TRUSTWORTHINESS_MAX_POINTS: usize = 5000;
pub const TRUSTWORTHINESS_K: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum LayoutError {
    #[error("invalid layout configuration: {0}")]
    InvalidConfig(String),
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("input vector `{0}` has zero norm")]
    ZeroVector(String),
    #[error("optimization diverged at iteration {iteration}")]
    Diverged { iteration: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Tsne,
    Umap,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Tsne => "tsne",
            Method::Umap => "umap",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tsne" | "t-sne" => Ok(Method::Tsne),
            "umap" => Ok(Method::Umap),
            other => Err(format!("unknown layout method `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneParams {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch_iteration: usize,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub theta: f64,
    /// Bisection tolerance on realized perplexity, relative to the target.
    pub perplexity_tolerance: f64,
    pub max_bisection: usize,
}

impl Default for TsneParams {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch_iteration: 250,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            theta: 0.5,
            perplexity_tolerance: 1e-5,
            max_bisection: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UmapParams {
    pub n_neighbors: usize,
    pub min_dist: f64,
    pub spread: f64,
    pub epochs: usize,
    pub negative_sample_rate: usize,
    pub learning_rate: f64,
    pub repulsion_strength: f64,
}

impl Default for UmapParams {
    fn default() -> Self {
        Self {
            n_neighbors: 15,
            min_dist: 0.1,
            spread: 1.0,
            epochs: 500,
            negative_sample_rate: 5,
            learning_rate: 1.0,
            repulsion_strength: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutConfig {
    pub method: Method,
    pub random_seed: u64,
    pub tsne: TsneParams,
    pub umap: UmapParams,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            method: Method::Tsne,
            random_seed: 42,
            tsne: TsneParams::default(),
            umap: UmapParams::default(),
        }
    }
}

impl LayoutConfig {
    /// Checks the parameters that apply to the chosen method for `n` points.
    pub fn validate(&self, n: usize) -> Result<(), LayoutError> {
        let bad = |m: String| Err(LayoutError::InvalidConfig(m));
        match self.method {
            Method::Tsne => {
                let t = &self.tsne;
                if n < tsne::MIN_POINTS {
                    return Err(LayoutError::TooFewPoints {
                        needed: tsne::MIN_POINTS,
                        got: n,
                    });
                }
                if !(t.perplexity >= 2.0 && t.perplexity < n as f64 / 3.0) {
                    return bad(format!(
                        "perplexity {} must be at least 2 and below n/3 = {:.2}",
                        t.perplexity,
                        n as f64 / 3.0
                    ));
                }
                if !(0.0..=1.0).contains(&t.theta) {
                    return bad(format!("theta {} outside [0, 1]", t.theta));
                }
                if t.iterations == 0 || t.max_bisection == 0 {
                    return bad("iteration counts must be positive".into());
                }
                if !(t.learning_rate > 0.0 && t.early_exaggeration > 0.0) {
                    return bad("learning rate and exaggeration must be positive".into());
                }
                if !(t.perplexity_tolerance > 0.0) {
                    return bad("perplexity tolerance must be positive".into());
                }
            }
            Method::Umap => {
                let u = &self.umap;
                if u.n_neighbors < 2 {
                    return bad("n_neighbors must be at least 2".into());
                }
                if n <= u.n_neighbors {
                    return Err(LayoutError::TooFewPoints {
                        needed: u.n_neighbors + 1,
                        got: n,
                    });
                }
                if u.epochs == 0 || u.negative_sample_rate == 0 {
                    return bad("epochs and negative_sample_rate must be positive".into());
                }
                if !(u.min_dist >= 0.0 && u.spread > 0.0 && u.min_dist <= u.spread) {
                    return bad(format!(
                        "min_dist {} must lie in [0, spread = {}]",
                        u.min_dist, u.spread
                    ));
                }
                if !(u.learning_rate > 0.0) {
                    return bad("learning rate must be positive".into());
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutResult {
    pub ids: Vec<String>,
    /// Exported coordinates, parallel to `ids`.
    pub coordinates: Vec<[f64; 2]>,
    pub method: Method,
    /// KL divergence (t-SNE) or fuzzy cross-entropy over graph edges (UMAP).
    pub final_objective: f64,
    /// `(iteration, objective)` samples taken during optimization.
    pub objective_history: Vec<(usize, f64)>,
    pub trustworthiness: f64,
    /// Points whose bandwidth search did not converge and used a fallback.
    pub bandwidth_failures: usize,
}

impl LayoutResult {
    pub fn coordinate(&self, id: &str) -> Option<[f64; 2]> {
        self.ids.iter().position(|i| i == id).map(|i| self.coordinates[i])
    }
}

/// Row-normalized copy of the table in `f64`, row-major.
pub(crate) fn normalized_rows(vectors: &VectorTable) -> Result<Vec<f64>, LayoutError> {
    let dim = vectors.dim();
    let mut out = Vec::with_capacity(vectors.len() * dim);
    for (id, row) in vectors.iter() {
        let norm = row.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(LayoutError::ZeroVector(id.to_owned()));
        }
        out.extend(row.iter().map(|&x| x as f64 / norm));
    }
    Ok(out)
}

/// Centers on the mean and scales so the largest |coordinate| is
/// [`EXPORT_EXTENT`]. Degenerate layouts (all points equal) stay at the origin.
pub fn center_and_scale(coords: &mut [[f64; 2]]) {
    if coords.is_empty() {
        return;
    }
    let n = coords.len() as f64;
    let mx = coords.iter().map(|c| c[0]).sum::<f64>() / n;
    let my = coords.iter().map(|c| c[1]).sum::<f64>() / n;
    let mut extent = 0f64;
    for c in coords.iter_mut() {
        c[0] -= mx;
        c[1] -= my;
        extent = extent.max(c[0].abs()).max(c[1].abs());
    }
    if extent > 0.0 {
        let s = EXPORT_EXTENT / extent;
        for c in coords.iter_mut() {
            c[0] *= s;
            c[1] *= s;
        }
    }
}

/// Runs whichever reducer the config selects.
pub fn run_layout(vectors: &VectorTable, config: &LayoutConfig) -> Result<LayoutResult, LayoutError> {
    match config.method {
        Method::Tsne => run_tsne(vectors, config),
        Method::Umap => run_umap(vectors, config),
    }
}

pub(crate) fn finish(
    vectors: &VectorTable,
    data: &[f64],
    mut coords: Vec<[f64; 2]>,
    method: Method,
    objective_history: Vec<(usize, f64)>,
    bandwidth_failures: usize,
    seed: u64,
) -> LayoutResult {
    center_and_scale(&mut coords);
    let k = TRUSTWORTHINESS_K.min(vectors.len().saturating_sub(1) / 2).max(1);
    let trust = trust::trustworthiness_sampled(
        data,
        vectors.dim(),
        &coords,
        k,
        TRUSTWORTHINESS_MAX_POINTS,
        seed,
    );
    LayoutResult {
        ids: vectors.ids().to_vec(),
        coordinates: coords,
        method,
        final_objective: objective_history.last().map(|h| h.1).unwrap_or(f64::NAN),
        objective_history,
        trustworthiness: trust,
        bandwidth_failures,
    }
}
