//! Append-only justification cache.
//!
//! Reads go through an [`ArcSwap`]ed map and never block. Writes are
//! serialized by a mutex: the line is appended to `justifications.jsonl`
//! first, then a new map is published. On load the last line for a key wins.

use arc_swap::ArcSwap;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use tkg_core::recommend::RecommendationKind;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JustificationKey {
    pub kind: RecommendationKind,
    pub source: String,
    pub target: String,
}

impl JustificationKey {
    pub fn new(kind: RecommendationKind, source: impl Into<String>, target: impl Into<String>) -> Self {
        Self {
            kind,
            source: source.into(),
            target: target.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JustificationRecord {
    pub key: JustificationKey,
    pub text: String,
    pub model_id: String,
    pub created_at: DateTime<Utc>,
    /// Not persisted; zero for records loaded from disk.
    pub token_usage: TokenUsage,
}

/// On-disk line.
#[derive(Serialize, Deserialize)]
struct Line {
    kind: RecommendationKind,
    source: String,
    target: String,
    text: String,
    model: String,
    created_at: DateTime<Utc>,
}

impl From<&JustificationRecord> for Line {
    fn from(r: &JustificationRecord) -> Self {
        Line {
            kind: r.key.kind,
            source: r.key.source.clone(),
            target: r.key.target.clone(),
            text: r.text.clone(),
            model: r.model_id.clone(),
            created_at: r.created_at,
        }
    }
}

impl From<Line> for JustificationRecord {
    fn from(l: Line) -> Self {
        JustificationRecord {
            key: JustificationKey::new(l.kind, l.source, l.target),
            text: l.text,
            model_id: l.model,
            created_at: l.created_at,
            token_usage: TokenUsage::default(),
        }
    }
}

type Map = HashMap<JustificationKey, Arc<JustificationRecord>>;

pub struct JustificationCache {
    path: Option<PathBuf>,
    map: ArcSwap<Map>,
    writer: Mutex<Option<File>>,
    /// Lines skipped on load because they did not parse (e.g. a torn tail).
    skipped_lines: usize,
}

impl std::fmt::Debug for JustificationCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JustificationCache")
            .field("path", &self.path)
            .field("entries", &self.len())
            .finish()
    }
}

impl JustificationCache {
    /// A cache that lives only in memory.
    pub fn in_memory() -> Self {
        Self {
            path: None,
            map: ArcSwap::from_pointee(Map::new()),
            writer: Mutex::new(None),
            skipped_lines: 0,
        }
    }

    /// Loads `path` if it exists and appends new records to it.
    pub fn open(path: &Path) -> io::Result<Self> {
        let mut map = Map::new();
        let mut skipped = 0;
        match File::open(path) {
            Ok(f) => {
                for line in BufReader::new(f).lines() {
                    let line = line?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    match serde_json::from_str::<Line>(&line) {
                        Ok(l) if !l.text.is_empty() => {
                            let rec = JustificationRecord::from(l);
                            map.insert(rec.key.clone(), Arc::new(rec));
                        }
                        _ => skipped += 1,
                    }
                }
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => return Err(e),
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            path: Some(path.to_path_buf()),
            map: ArcSwap::from_pointee(map),
            writer: Mutex::new(Some(file)),
            skipped_lines: skipped,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn skipped_lines(&self) -> usize {
        self.skipped_lines
    }

    pub fn get(&self, key: &JustificationKey) -> Option<Arc<JustificationRecord>> {
        self.map.load().get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.map.load().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Persists and publishes `record`, replacing any earlier one for its key.
    pub fn insert(&self, record: JustificationRecord) -> io::Result<Arc<JustificationRecord>> {
        let mut writer = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(file) = writer.as_mut() {
            let mut line = serde_json::to_vec(&Line::from(&record)).map_err(io::Error::other)?;
            line.push(b'\n');
            file.write_all(&line)?;
            file.flush()?;
        }
        let record = Arc::new(record);
        let mut next = Map::clone(&self.map.load());
        next.insert(record.key.clone(), record.clone());
        self.map.store(Arc::new(next));
        Ok(record)
    }
}
