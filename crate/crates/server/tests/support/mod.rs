//! Shared setup for the server tests: artifact builders, a live server on
//! an ephemeral port, and the response schemas.
#![allow(dead_code)]

use serde_json::Value;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use tkg_core::corpus::{AuthorRecord, CorpusSnapshot, DatasetRecord};
use tkg_core::layout::io::LayRecord;
use tkg_core::layout::{LayoutConfig, Method};
use tkg_core::recommend::RecommendationTable;
use tkg_core::synth::{generate_corpus, layout_points, SynthConfig};
use tkg_justify::{Gateway, GatewayConfig, JustificationCache, MockProvider};
use tkg_server::{pipeline, AppConfig, AppState, Catalog, Limits};
use tokio::sync::oneshot;

pub const ROUTE_SCHEMAS: &[&str] = &[
    "health.json",
    "search.json",
    "node.json",
    "viewport.json",
    "recommendations.json",
    "collaborators.json",
    "justification.json",
    "error.json",
];

pub fn schema_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(name)
}

pub fn validator(name: &str) -> jsonschema::Validator {
    let text = std::fs::read_to_string(schema_path(name)).unwrap();
    let schema: Value = serde_json::from_str(&text).unwrap();
    jsonschema::options()
        .should_validate_formats(true)
        .build(&schema)
        .unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Schema violations of `value`, empty when it conforms.
pub fn schema_errors(name: &str, value: &Value) -> Vec<String> {
    validator(name).iter_errors(value).map(|e| format!("{name}: {e}")).collect()
}

pub fn assert_schema(name: &str, value: &Value) {
    let errors = schema_errors(name, value);
    assert!(errors.is_empty(), "{errors:?}\n{value}");
}

/// A small synthetic corpus pushed through every pipeline stage.
pub fn small_config() -> SynthConfig {
    SynthConfig {
        authors: 400,
        datasets: 24,
        papers: 1200,
        topics: 6,
        dim: 16,
        ..SynthConfig::default()
    }
}

/// Runs ingest, embed, recommend and layout. Returns a config for `serve`.
pub fn build_artifacts(input: &Path, data: &Path, layout: LayoutConfig) -> AppConfig {
    let mut config = AppConfig::default();
    config.pipeline.input_dir = input.to_path_buf();
    config.pipeline.data_dir = data.to_path_buf();
    config.layout = layout;
    config.provider.mock = true;
    let p = &config.pipeline;
    pipeline::ingest(&p.input_dir, &p.data_dir, p.activity_cutoff_year).unwrap();
    pipeline::embed(&p.input_dir, &p.data_dir, p.embedding_dim).unwrap();
    pipeline::recommend(&p.data_dir, p.collaborators_k, p.dataset_users_k).unwrap();
    pipeline::layout(&p.data_dir, &config.layout).unwrap();
    config
}

pub fn quick_layout() -> LayoutConfig {
    let mut l = LayoutConfig {
        method: Method::Tsne,
        ..LayoutConfig::default()
    };
    l.tsne.iterations = 300;
    l
}

/// Synthetic corpus and artifacts under `root`.
pub fn small_pipeline(root: &Path) -> AppConfig {
    let input = root.join("input");
    generate_corpus(&small_config()).write_dir(&input).unwrap();
    build_artifacts(&input, &root.join("data"), quick_layout())
}

pub struct Running {
    pub base: String,
    pub state: Arc<AppState>,
    stop: Option<oneshot::Sender<()>>,
    task: Option<tokio::task::JoinHandle<std::io::Result<()>>>,
}

impl Running {
    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub async fn stop(mut self) {
        if let Some(s) = self.stop.take() {
            let _ = s.send(());
        }
        if let Some(t) = self.task.take() {
            t.await.unwrap().unwrap();
        }
    }
}

/// Serves `app` on 127.0.0.1 with an ephemeral port.
pub async fn start(state: Arc<AppState>, app: axum::Router) -> Running {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let (tx, rx) = oneshot::channel();
    let task = tokio::spawn(tkg_server::serve_on(listener, app, async {
        let _ = rx.await;
    }));
    Running {
        base,
        state,
        stop: Some(tx),
        task: Some(task),
    }
}

pub fn mock_gateway() -> Gateway {
    Gateway::new(
        Arc::new(MockProvider::new()),
        JustificationCache::in_memory(),
        GatewayConfig::default(),
    )
}

/// A 28,000-talent, 1,179-dataset catalog over synthetic coordinates. All
/// talents are core so none is filtered out; there are no papers.
pub fn map_catalog(seed: u64) -> Catalog {
    let points = layout_points(28_000, 1_179, seed);
    let mut authors = Vec::new();
    let mut datasets = Vec::new();
    for p in &points {
        match p.kind {
            tkg_core::NodeKind::Talent => authors.push(AuthorRecord {
                author_id: p.node_id.clone(),
                display_name: format!("Talent {}", p.node_id),
                institution: String::new(),
                career_start_year: None,
                is_core: true,
                detail_url: None,
            }),
            tkg_core::NodeKind::Dataset => datasets.push(DatasetRecord {
                dataset_id: p.node_id.clone(),
                name: format!("Dataset {}", p.node_id),
                description: String::new(),
            }),
        }
    }
    let snapshot = CorpusSnapshot::build(Vec::new(), authors, datasets, 2020).unwrap();
    let records = points
        .iter()
        .map(|p| LayRecord {
            id: p.node_id.clone(),
            x: p.x as f32,
            y: p.y as f32,
            kind: p.kind,
            display_size: p.display_size as f32,
        })
        .collect();
    Catalog::build(snapshot, records, RecommendationTable::default()).unwrap()
}

pub fn limits() -> Limits {
    Limits::default()
}

/// Body text and parsed JSON of a GET.
pub async fn get(client: &reqwest::Client, url: &str) -> (u16, String, Value) {
    let resp = client.get(url).send().await.unwrap();
    let status = resp.status().as_u16();
    let text = resp.text().await.unwrap();
    let json = serde_json::from_str(&text).unwrap_or(Value::Null);
    (status, text, json)
}
