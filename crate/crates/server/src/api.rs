//! HTTP routes. Each handler is a thin adapter over one core operation.

use crate::state::{kind_pair, Catalog};
use arc_swap::ArcSwap;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::header::{HeaderName, HeaderValue};
use axum::http::{Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;
use std::sync::Arc;
use tkg_core::recommend::RecommendationKind;
use tkg_core::spatial::{collaborator_highlight, BBox, LayoutPoint};
use tkg_core::NodeKind;
use tkg_justify::{
    build_collaborator_prompt, build_dataset_user_prompt, select_evidence, CacheStatus, Gateway, GatewayError,
    JustificationKey, JustificationRecord,
};
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::services::ServeDir;

pub const X_CACHE: &str = "x-cache";
pub const DEFAULT_SEARCH_LIMIT: usize = 10;
pub const DEFAULT_RECOMMENDATION_LIMIT: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub viewport_max_results: usize,
    pub search_max_limit: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            viewport_max_results: 5000,
            search_max_limit: 100,
        }
    }
}

/// Shared by every request. The catalog is swapped whole, never edited.
pub struct AppState {
    catalog: ArcSwap<Catalog>,
    gateway: Gateway,
    limits: Limits,
}

impl AppState {
    pub fn new(catalog: Catalog, gateway: Gateway, limits: Limits) -> Arc<Self> {
        Arc::new(Self {
            catalog: ArcSwap::from_pointee(catalog),
            gateway,
            limits,
        })
    }

    pub fn catalog(&self) -> Arc<Catalog> {
        self.catalog.load_full()
    }

    /// Publishes a new catalog; requests already running keep the old one.
    pub fn replace_catalog(&self, catalog: impl Into<Arc<Catalog>>) {
        self.catalog.store(catalog.into());
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn limits(&self) -> Limits {
        self.limits
    }
}

type Shared = State<Arc<AppState>>;

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    retriable: Option<bool>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    retriable: Option<bool>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
            retriable: None,
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    fn unknown_node(id: &str) -> Self {
        Self::not_found(format!("unknown node `{id}`"))
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.message,
            retriable: self.retriable,
        };
        (self.status, Json(body)).into_response()
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        Self::bad_request(r.body_text())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        Self::bad_request(r.body_text())
    }
}

impl From<GatewayError> for ApiError {
    fn from(e: GatewayError) -> Self {
        let status = match e {
            GatewayError::Busy => StatusCode::TOO_MANY_REQUESTS,
            GatewayError::Provider { .. } | GatewayError::Exhausted { .. } => StatusCode::BAD_GATEWAY,
            GatewayError::Cache(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let retriable = (status != StatusCode::INTERNAL_SERVER_ERROR).then(|| e.is_retryable());
        Self {
            status,
            message: e.to_string(),
            retriable,
        }
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// `v` as a plain decimal with at most six fractional digits, trailing
/// zeros dropped.
pub fn fixed6(v: f64) -> String {
    let mut t = format!("{v:.6}");
    while t.ends_with('0') {
        t.pop();
    }
    if t.ends_with('.') {
        t.pop();
    }
    if t == "-0" {
        t.remove(0);
    }
    t
}

/// A coordinate or size. Serialized through [`fixed6`] so that JSON never
/// carries exponents or more than six fractional digits.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(transparent)]
pub struct Coord(pub f64);

impl Serialize for Coord {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RawValue::from_string(fixed6(self.0))
            .map_err(serde::ser::Error::custom)?
            .serialize(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub nodes: usize,
}

async fn healthz(State(state): Shared) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        nodes: state.catalog().len(),
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SearchParams {
    #[serde(default)]
    q: String,
    kind: Option<NodeKind>,
    limit: Option<usize>,
    #[serde(default)]
    offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub id: String,
    pub name: String,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub query: String,
    pub offset: usize,
    pub limit: usize,
    pub results: Vec<SearchResult>,
}

fn check_limit(limit: Option<usize>, default: usize, max: usize) -> Result<usize, ApiError> {
    match limit.unwrap_or(default) {
        0 => Err(ApiError::bad_request("limit must be at least 1")),
        l if l > max => Err(ApiError::bad_request(format!("limit must be at most {max}"))),
        l => Ok(l),
    }
}

async fn search(State(state): Shared, params: Result<Query<SearchParams>, QueryRejection>) -> ApiResult<SearchResponse> {
    let Query(p) = params?;
    let max = state.limits.search_max_limit;
    let limit = check_limit(p.limit, DEFAULT_SEARCH_LIMIT.min(max), max)?;
    let catalog = state.catalog();
    let results = catalog
        .names
        .search(&p.q, p.kind, p.offset.saturating_add(limit))
        .into_iter()
        .skip(p.offset)
        .map(|h| SearchResult {
            id: h.node_id,
            name: h.display_name,
            kind: h.kind,
        })
        .collect();
    Ok(Json(SearchResponse {
        query: p.q,
        offset: p.offset,
        limit,
        results,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeProfile {
    pub id: String,
    pub kind: NodeKind,
    pub name: String,
    pub institution: Option<String>,
    /// Papers by a talent, or papers using a dataset.
    pub publication_count: usize,
    pub career_start_year: Option<i32>,
    pub detail_url: Option<String>,
    pub description: Option<String>,
    pub x: Coord,
    pub y: Coord,
    pub display_size: Coord,
}

async fn node(State(state): Shared, Path(id): Path<String>) -> ApiResult<NodeProfile> {
    let catalog = state.catalog();
    let p = catalog.node(&id).ok_or_else(|| ApiError::unknown_node(&id))?;
    let s = &catalog.snapshot;
    let mut profile = NodeProfile {
        id: p.node_id.clone(),
        kind: p.kind,
        name: catalog.display_name(p).to_owned(),
        institution: None,
        publication_count: 0,
        career_start_year: None,
        detail_url: None,
        description: None,
        x: Coord(p.x),
        y: Coord(p.y),
        display_size: Coord(p.display_size),
    };
    match p.kind {
        NodeKind::Talent => {
            let a = s.author(&id).ok_or_else(|| ApiError::unknown_node(&id))?;
            profile.institution = Some(a.institution.clone()).filter(|i| !i.is_empty());
            profile.publication_count = s.publication_count(&id).unwrap_or(0);
            profile.career_start_year = a.career_start_year;
            profile.detail_url = a.detail_url.clone();
        }
        NodeKind::Dataset => {
            let d = s.dataset(&id).ok_or_else(|| ApiError::unknown_node(&id))?;
            profile.publication_count = s.papers_using(&id).count();
            profile.description = Some(d.description.clone()).filter(|t| !t.trim().is_empty());
        }
    }
    Ok(Json(profile))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ViewportParams {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewportPoint {
    pub id: String,
    pub kind: NodeKind,
    pub x: Coord,
    pub y: Coord,
    pub display_size: Coord,
}

impl From<&LayoutPoint> for ViewportPoint {
    fn from(p: &LayoutPoint) -> Self {
        Self {
            id: p.node_id.clone(),
            kind: p.kind,
            x: Coord(p.x),
            y: Coord(p.y),
            display_size: Coord(p.display_size),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewportResponse {
    /// More points lie in the box than were returned.
    pub truncated: bool,
    pub points: Vec<ViewportPoint>,
}

async fn viewport(State(state): Shared, params: Result<Query<ViewportParams>, QueryRejection>) -> ApiResult<ViewportResponse> {
    let Query(p) = params?;
    let max = state.limits.viewport_max_results;
    let limit = check_limit(p.limit, max, max)?;
    let bbox = BBox::new(p.x0, p.y0, p.x1, p.y1)
        .ok_or_else(|| ApiError::bad_request("viewport needs finite x0 < x1 and y0 < y1"))?;
    let catalog = state.catalog();
    // One extra point tells whether the box held more than `limit`.
    let mut hits = catalog.tree.query_viewport(&bbox, limit + 1);
    let truncated = hits.len() > limit;
    hits.truncate(limit);
    Ok(Json(ViewportResponse {
        truncated,
        points: hits.into_iter().map(ViewportPoint::from).collect(),
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PageParams {
    limit: Option<usize>,
    #[serde(default)]
    offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendedNode {
    pub rank: usize,
    pub id: String,
    pub name: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationsResponse {
    pub id: String,
    pub kind: RecommendationKind,
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
    pub results: Vec<RecommendedNode>,
}

fn recommendation_kind(node: NodeKind) -> RecommendationKind {
    match node {
        NodeKind::Talent => RecommendationKind::Collaborator,
        NodeKind::Dataset => RecommendationKind::DatasetUser,
    }
}

async fn recommendations(
    State(state): Shared,
    Path(id): Path<String>,
    params: Result<Query<PageParams>, QueryRejection>,
) -> ApiResult<RecommendationsResponse> {
    let Query(p) = params?;
    let limit = check_limit(p.limit, DEFAULT_RECOMMENDATION_LIMIT, usize::MAX)?;
    let catalog = state.catalog();
    let node = catalog.node(&id).ok_or_else(|| ApiError::unknown_node(&id))?;
    let kind = recommendation_kind(node.kind);
    // Nodes without a vector have no list at all.
    let list = catalog.recommendations.get(kind, &id).unwrap_or(&[]);
    let results = list
        .iter()
        .skip(p.offset)
        .take(limit)
        .map(|e| RecommendedNode {
            rank: e.rank,
            id: e.target_id.clone(),
            name: catalog
                .node(&e.target_id)
                .map(|t| catalog.display_name(t).to_owned())
                .unwrap_or_default(),
            score: e.score,
        })
        .collect();
    Ok(Json(RecommendationsResponse {
        id,
        kind,
        total: list.len(),
        offset: p.offset,
        limit,
        results,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollaboratorsResponse {
    pub id: String,
    pub collaborators: Vec<String>,
}

async fn collaborators(State(state): Shared, Path(id): Path<String>) -> ApiResult<CollaboratorsResponse> {
    let catalog = state.catalog();
    let node = catalog.node(&id).ok_or_else(|| ApiError::unknown_node(&id))?;
    if node.kind != NodeKind::Talent {
        return Err(ApiError::bad_request(format!("`{id}` is a dataset; collaborators exist for talents only")));
    }
    let set = collaborator_highlight(&id, &catalog.snapshot, |p| catalog.node(p).is_some())
        .map_err(|e| ApiError::not_found(e.to_string()))?;
    Ok(Json(CollaboratorsResponse {
        id,
        collaborators: set.into_iter().collect(),
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JustificationRequest {
    pub kind: RecommendationKind,
    pub source: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JustificationResponse {
    pub kind: RecommendationKind,
    pub source: String,
    pub target: String,
    pub text: String,
    pub model: String,
    pub created_at: String,
    pub cache: String,
}

fn prompt_for(catalog: &Catalog, key: &JustificationKey) -> Result<String, ApiError> {
    let evidence = |id: &str| select_evidence(id, &catalog.snapshot).map_err(|e| ApiError::not_found(e.to_string()));
    let target = evidence(&key.target)?;
    let prompt = match key.kind {
        RecommendationKind::Collaborator => build_collaborator_prompt(&evidence(&key.source)?, &target),
        RecommendationKind::DatasetUser => {
            let dataset = catalog
                .snapshot
                .dataset(&key.source)
                .ok_or_else(|| ApiError::unknown_node(&key.source))?;
            build_dataset_user_prompt(&target, dataset)
        }
    };
    prompt.map_err(|e| ApiError::internal(e.to_string()))
}

fn justification_response(record: &JustificationRecord, status: CacheStatus) -> Response {
    let body = JustificationResponse {
        kind: record.key.kind,
        source: record.key.source.clone(),
        target: record.key.target.clone(),
        text: record.text.clone(),
        model: record.model_id.clone(),
        created_at: record.created_at.to_rfc3339(),
        cache: status.as_str().to_owned(),
    };
    (
        [(HeaderName::from_static(X_CACHE), HeaderValue::from_static(status.as_str()))],
        Json(body),
    )
        .into_response()
}

async fn justify(State(state): Shared, body: Result<Json<JustificationRequest>, JsonRejection>) -> Result<Response, ApiError> {
    let Json(req) = body?;
    let catalog = state.catalog();
    let (source_kind, target_kind) = kind_pair(req.kind);
    for (id, want) in [(&req.source, source_kind), (&req.target, target_kind)] {
        let node = catalog.node(id).ok_or_else(|| ApiError::unknown_node(id))?;
        if node.kind != want {
            return Err(ApiError::bad_request(format!("`{id}` is not a {want}")));
        }
    }
    let recommended = catalog
        .recommendations
        .get(req.kind, &req.source)
        .is_some_and(|list| list.iter().any(|e| e.target_id == req.target));
    if !recommended {
        return Err(ApiError::not_found(format!(
            "`{}` is not a recommended {} for `{}`",
            req.target, req.kind, req.source
        )));
    }
    let key = JustificationKey::new(req.kind, req.source, req.target);
    if let Some(hit) = state.gateway.cache().get(&key) {
        return Ok(justification_response(&hit, CacheStatus::Hit));
    }
    let prompt = prompt_for(&catalog, &key)?;
    let (record, status) = state.gateway.fetch(key, prompt).await?;
    Ok(justification_response(&record, status))
}

async fn not_found() -> ApiError {
    ApiError::not_found("no such route")
}

fn cors_layer(origins: &[String]) -> anyhow::Result<Option<CorsLayer>> {
    if origins.is_empty() {
        return Ok(None);
    }
    let allow = if origins.iter().any(|o| o == "*") {
        AllowOrigin::any()
    } else {
        let list = origins
            .iter()
            .map(|o| HeaderValue::from_str(o).map_err(|_| anyhow::anyhow!("invalid CORS origin `{o}`")))
            .collect::<anyhow::Result<Vec<_>>>()?;
        AllowOrigin::list(list)
    };
    Ok(Some(
        CorsLayer::new()
            .allow_origin(allow)
            .allow_methods([Method::GET, Method::POST])
            .allow_headers([axum::http::header::CONTENT_TYPE])
            .expose_headers([HeaderName::from_static(X_CACHE)]),
    ))
}

/// All routes. Unknown paths under `/api` get a JSON 404; anything else is
/// looked up in `static_dir` when one is given.
pub fn router(
    state: Arc<AppState>,
    static_dir: Option<&std::path::Path>,
    cors_origins: &[String],
) -> anyhow::Result<Router> {
    let api = Router::new()
        .route("/search", get(search))
        .route("/viewport", get(viewport))
        .route("/nodes/{id}", get(node))
        .route("/nodes/{id}/recommendations", get(recommendations))
        .route("/nodes/{id}/collaborators", get(collaborators))
        .route("/justifications", post(justify))
        .fallback(not_found);
    let app = Router::new().route("/healthz", get(healthz)).nest("/api", api);
    let app = match static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.fallback(not_found),
    };
    let app = app.with_state(state);
    Ok(match cors_layer(cors_origins)? {
        Some(cors) => app.layer(cors),
        None => app,
    })
}
