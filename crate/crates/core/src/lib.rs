//! Core pipeline for the talent knowledge graph explorer.
//!
//! The stages run in order and each one reads only the frozen output of the
//! previous ones:
//!
//! 1. [`corpus`] parses the exported record files into an immutable
//!    [`CorpusSnapshot`](corpus::CorpusSnapshot).
//! 2. [`embedding`] aggregates per-paper vectors into author and dataset
//!    vectors.
//! 3. [`recommend`] runs exact top-k cosine search with exclusion sets.
//! 4. [`layout`] projects the aggregated vectors to 2D (t-SNE or UMAP).
//! 5. [`spatial`] indexes the layout for viewport, search and highlight
//!    queries.

pub mod corpus;
pub mod embedding;
pub mod layout;
pub mod recommend;
pub mod spatial;
pub mod synth;

use serde::{Deserialize, Serialize};
use std::fmt;

/// The two kinds of node drawn in the semantic space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Talent,
    Dataset,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Talent => "talent",
            NodeKind::Dataset => "dataset",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for NodeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "talent" => Ok(NodeKind::Talent),
            "dataset" => Ok(NodeKind::Dataset),
            other => Err(format!("unknown node kind `{other}`")),
        }
    }
}
