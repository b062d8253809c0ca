//! Pipeline stages, serving state and the HTTP API of the explorer backend.

pub mod api;
pub mod config;
pub mod pipeline;
pub mod state;

use anyhow::Context;
use std::future::Future;
use std::path::Path;
use std::sync::Arc;
use tkg_justify::{Gateway, HttpProvider, JustificationCache, MockProvider, Provider, API_KEY_ENV, ENDPOINT_ENV};

pub use api::{router, AppState, Limits};
pub use config::{AppConfig, PipelineConfig, ProviderSettings, ServerConfig};
pub use state::{Catalog, StartupError, MAX_LISTED_OFFENDERS};

/// Gateway over the mock or HTTP provider, with its cache in `data_dir`.
pub fn build_gateway(settings: &ProviderSettings, data_dir: &Path) -> anyhow::Result<Gateway> {
    let provider: Arc<dyn Provider> = if settings.mock {
        Arc::new(MockProvider::new())
    } else {
        let config = settings.http_config().with_context(|| {
            format!("no provider endpoint: set provider.endpoint or {ENDPOINT_ENV}, or pass --mock-llm")
        })?;
        if config.api_key.is_none() {
            tracing::warn!("{API_KEY_ENV} is not set; provider requests go out without a credential");
        }
        Arc::new(HttpProvider::new(config)?)
    };
    let path = data_dir.join(pipeline::JUSTIFICATIONS_FILE);
    let cache = JustificationCache::open(&path).with_context(|| format!("opening {}", path.display()))?;
    if cache.skipped_lines() > 0 {
        tracing::warn!(path = %path.display(), skipped = cache.skipped_lines(), "ignored unreadable cache lines");
    }
    Ok(Gateway::new(provider, cache, settings.gateway_config()))
}

/// Loads every artifact and returns the shared state plus the router.
pub fn prepare(config: &AppConfig) -> anyhow::Result<(Arc<AppState>, axum::Router)> {
    config.validate()?;
    let data_dir = &config.pipeline.data_dir;
    let catalog = Catalog::load(data_dir)?;
    let gateway = build_gateway(&config.provider, data_dir)?;
    let limits = Limits {
        viewport_max_results: config.server.viewport_max_results,
        search_max_limit: config.server.search_max_limit,
    };
    let state = AppState::new(catalog, gateway, limits);
    let app = router(state.clone(), config.server.static_dir.as_deref(), &config.server.cors_allow_origins)?;
    Ok((state, app))
}

/// Serves `app` until `shutdown` resolves, then drains open requests.
pub async fn serve_on(
    listener: tokio::net::TcpListener,
    app: axum::Router,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}
