//! TOML configuration shared by the pipeline commands and the server.

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::time::Duration;
use tkg_core::corpus::DEFAULT_ACTIVITY_CUTOFF_YEAR;
use tkg_core::layout::LayoutConfig;
use tkg_core::recommend::{DEFAULT_COLLABORATOR_K, DEFAULT_DATASET_USER_K};
use tkg_justify::{GatewayConfig, ProviderConfig, RetryPolicy, DEFAULT_RESPONSE_PATH};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub pipeline: PipelineConfig,
    pub layout: LayoutConfig,
    pub server: ServerConfig,
    pub provider: ProviderSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Holds `papers.jsonl`, `authors.jsonl`, `datasets.jsonl` and `paper_vectors.emb`.
    pub input_dir: PathBuf,
    /// Where every artifact is written and where the server reads them.
    pub data_dir: PathBuf,
    pub activity_cutoff_year: i32,
    /// Reject paper vectors of any other width.
    pub embedding_dim: Option<usize>,
    pub collaborators_k: usize,
    pub dataset_users_k: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input_dir: PathBuf::from("data/synthetic"),
            data_dir: PathBuf::from("artifacts"),
            activity_cutoff_year: DEFAULT_ACTIVITY_CUTOFF_YEAR,
            embedding_dim: None,
            collaborators_k: DEFAULT_COLLABORATOR_K,
            dataset_users_k: DEFAULT_DATASET_USER_K,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: IpAddr,
    pub port: u16,
    /// Upper bound on points per viewport response.
    pub viewport_max_results: usize,
    pub search_max_limit: usize,
    /// Allowed browser origins; `"*"` allows any. Empty disables CORS headers.
    pub cors_allow_origins: Vec<String>,
    /// Built UI assets served under `/`.
    pub static_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: 8080,
            viewport_max_results: 5000,
            search_max_limit: 100,
            cors_allow_origins: Vec::new(),
            static_dir: None,
        }
    }
}

impl ServerConfig {
    pub fn socket_addr(&self) -> SocketAddr {
        SocketAddr::new(self.bind, self.port)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderSettings {
    /// Use the offline mock instead of an HTTP endpoint.
    pub mock: bool,
    /// Falls back to `CM_LLM_ENDPOINT`. The credential always comes from
    /// `CM_LLM_API_KEY`.
    pub endpoint: Option<String>,
    pub model: String,
    pub timeout_secs: f64,
    pub response_path: String,
    pub max_concurrent: usize,
    pub max_pending: usize,
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub jitter: f64,
}

impl Default for ProviderSettings {
    fn default() -> Self {
        let gw = GatewayConfig::default();
        Self {
            mock: false,
            endpoint: None,
            model: "default".into(),
            timeout_secs: 30.0,
            response_path: DEFAULT_RESPONSE_PATH.into(),
            max_concurrent: gw.max_concurrent,
            max_pending: gw.max_pending,
            max_attempts: gw.retry.max_attempts,
            base_delay_ms: gw.retry.base_delay.as_millis() as u64,
            jitter: gw.retry.jitter,
        }
    }
}

impl ProviderSettings {
    pub fn gateway_config(&self) -> GatewayConfig {
        GatewayConfig {
            max_concurrent: self.max_concurrent,
            max_pending: self.max_pending,
            retry: RetryPolicy {
                max_attempts: self.max_attempts,
                base_delay: Duration::from_millis(self.base_delay_ms),
                jitter: self.jitter,
            },
        }
    }

    /// HTTP provider settings, or `None` when no endpoint is configured.
    pub fn http_config(&self) -> Option<ProviderConfig> {
        let mut c = ProviderConfig::from_env(self.endpoint.clone(), self.model.clone())?;
        c.timeout = Duration::from_secs_f64(self.timeout_secs);
        c.response_path = self.response_path.clone();
        Some(c)
    }
}

impl AppConfig {
    /// Reads `path`, or returns the defaults when there is none.
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let s = &self.server;
        if s.port == 0 {
            bail!("server.port must be in [1, 65535]");
        }
        if s.viewport_max_results == 0 || s.search_max_limit == 0 {
            bail!("server.viewport_max_results and server.search_max_limit must be positive");
        }
        let p = &self.provider;
        if p.max_concurrent == 0 || p.max_attempts == 0 {
            bail!("provider.max_concurrent and provider.max_attempts must be positive");
        }
        if !(p.timeout_secs > 0.0 && p.timeout_secs.is_finite()) {
            bail!("provider.timeout_secs must be positive");
        }
        if !(0.0..=1.0).contains(&p.jitter) {
            bail!("provider.jitter must lie in [0, 1]");
        }
        if self.pipeline.collaborators_k == 0 || self.pipeline.dataset_users_k == 0 {
            bail!("pipeline k values must be positive");
        }
        Ok(())
    }
}
