//! Immutable serving state and the startup consistency check.

use crate::pipeline::{self, LAYOUT_FILE, RECOMMENDATIONS_FILE, SNAPSHOT_FILE};
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use thiserror::Error;
use tkg_core::corpus::CorpusSnapshot;
use tkg_core::layout::io::{load_lay1, LayRecord};
use tkg_core::recommend::RecommendationTable;
use tkg_core::spatial::{LayoutPoint, NameIndex, QuadTree, DEFAULT_LEAF_CAPACITY};
use tkg_core::NodeKind;

/// Offenders listed in a consistency failure.
pub const MAX_LISTED_OFFENDERS: usize = 20;

#[derive(Debug, Error)]
pub enum StartupError {
    #[error("{}: {message}", path.display())]
    Artifact { path: PathBuf, message: String },
    #[error("artifacts disagree ({total} problem(s)):\n  {}", shown.join("\n  "))]
    Inconsistent { total: usize, shown: Vec<String> },
}

fn artifact(path: PathBuf, e: impl std::fmt::Display) -> StartupError {
    StartupError::Artifact {
        path,
        message: format!("{e:#}"),
    }
}

/// Everything a request can read. Never mutated once built.
#[derive(Debug)]
pub struct Catalog {
    pub snapshot: CorpusSnapshot,
    pub tree: QuadTree,
    pub names: NameIndex,
    pub recommendations: RecommendationTable,
    positions: HashMap<String, usize>,
}

impl Catalog {
    /// Checks that every layout node and every recommendation refers to a
    /// known node of the right kind.
    pub fn build(
        snapshot: CorpusSnapshot,
        layout: Vec<LayRecord>,
        recommendations: RecommendationTable,
    ) -> Result<Self, StartupError> {
        let mut problems = Vec::new();
        for r in &layout {
            let actual = if snapshot.author(&r.id).is_some() {
                Some(NodeKind::Talent)
            } else if snapshot.dataset(&r.id).is_some() {
                Some(NodeKind::Dataset)
            } else {
                None
            };
            match actual {
                None => problems.push(format!("{LAYOUT_FILE}: node `{}` is not in {SNAPSHOT_FILE}", r.id)),
                Some(k) if k != r.kind => problems.push(format!(
                    "{LAYOUT_FILE}: node `{}` is stored as a {} but is a {k}",
                    r.id, r.kind
                )),
                Some(_) => {}
            }
        }
        let on_map: HashMap<&str, NodeKind> = layout.iter().map(|r| (r.id.as_str(), r.kind)).collect();
        for (kind, e) in recommendations.entries() {
            let (source_kind, _) = kind_pair(kind);
            if on_map.get(e.source_id.as_str()) != Some(&source_kind) {
                problems.push(format!(
                    "{RECOMMENDATIONS_FILE}: source `{}` is not a {source_kind} on the map",
                    e.source_id
                ));
            }
            if on_map.get(e.target_id.as_str()) != Some(&NodeKind::Talent) {
                problems.push(format!(
                    "{RECOMMENDATIONS_FILE}: target `{}` is not a talent on the map",
                    e.target_id
                ));
            }
        }
        if !problems.is_empty() {
            let total = problems.len();
            problems.truncate(MAX_LISTED_OFFENDERS);
            return Err(StartupError::Inconsistent { total, shown: problems });
        }
        if layout.is_empty() {
            return Err(StartupError::Artifact {
                path: PathBuf::from(LAYOUT_FILE),
                message: "layout has no nodes".into(),
            });
        }

        let points: Vec<LayoutPoint> = layout.iter().map(LayRecord::to_point).collect();
        let tree = QuadTree::build(points, DEFAULT_LEAF_CAPACITY).map_err(|e| artifact(LAYOUT_FILE.into(), e))?;
        let positions = tree
            .points()
            .iter()
            .enumerate()
            .map(|(i, p)| (p.node_id.clone(), i))
            .collect();
        let names = NameIndex::new(
            tree.points()
                .iter()
                .map(|p| (p.node_id.as_str(), node_name(&snapshot, p), p.kind)),
        );
        Ok(Self {
            snapshot,
            tree,
            names,
            recommendations,
            positions,
        })
    }

    /// Loads `snapshot.json`, `layout.lay` and `recommendations.jsonl` from `data_dir`.
    pub fn load(data_dir: &Path) -> Result<Self, StartupError> {
        let meta = std::fs::metadata(data_dir).map_err(|e| artifact(data_dir.to_path_buf(), e))?;
        if !meta.is_dir() {
            return Err(artifact(data_dir.to_path_buf(), "not a directory"));
        }
        let snapshot = pipeline::load_snapshot(data_dir).map_err(|e| artifact(data_dir.join(SNAPSHOT_FILE), e))?;
        let layout = load_lay1(&data_dir.join(LAYOUT_FILE)).map_err(|e| artifact(data_dir.join(LAYOUT_FILE), e))?;
        let recs = pipeline::load_recommendations(data_dir)
            .map_err(|e| artifact(data_dir.join(RECOMMENDATIONS_FILE), e))?;
        Self::build(snapshot, layout, recs)
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    /// The node with this id, if it is on the map.
    pub fn node(&self, id: &str) -> Option<&LayoutPoint> {
        self.positions.get(id).map(|&i| &self.tree.points()[i])
    }

    pub fn display_name(&self, p: &LayoutPoint) -> &str {
        node_name(&self.snapshot, p)
    }
}

fn node_name<'a>(snapshot: &'a CorpusSnapshot, p: &LayoutPoint) -> &'a str {
    let name = match p.kind {
        NodeKind::Talent => snapshot.author(&p.node_id).map(|a| a.display_name.as_str()),
        NodeKind::Dataset => snapshot.dataset(&p.node_id).map(|d| d.name.as_str()),
    };
    name.unwrap_or_default()
}

/// Node kinds of a recommendation's source and target.
pub fn kind_pair(kind: tkg_core::recommend::RecommendationKind) -> (NodeKind, NodeKind) {
    use tkg_core::recommend::RecommendationKind::*;
    match kind {
        Collaborator => (NodeKind::Talent, NodeKind::Talent),
        DatasetUser => (NodeKind::Dataset, NodeKind::Talent),
    }
}
