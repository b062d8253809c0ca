//! Chat-completion providers.

use crate::cache::{JustificationKey, TokenUsage};
use async_trait::async_trait;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;
use thiserror::Error;

pub const API_KEY_ENV: &str = "CM_LLM_API_KEY";
pub const ENDPOINT_ENV: &str = "CM_LLM_ENDPOINT";
pub const DEFAULT_RESPONSE_PATH: &str = "/choices/0/message/content";
pub const MOCK_MODEL_ID: &str = "mock-llm";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub usage: TokenUsage,
}

/// One failed attempt.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("provider rejected the credential (HTTP {0})")]
    Auth(u16),
    #[error("provider returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("provider request timed out")]
    Timeout,
    #[error("could not reach provider: {0}")]
    Transport(String),
    #[error("malformed provider response: {0}")]
    Malformed(String),
}

impl ProviderError {
    /// 5xx, 429, timeouts and connection failures are worth retrying.
    pub fn is_retryable(&self) -> bool {
        match self {
            ProviderError::Status { status, .. } => *status == 429 || *status >= 500,
            ProviderError::Timeout | ProviderError::Transport(_) => true,
            ProviderError::Auth(_) | ProviderError::Malformed(_) => false,
        }
    }
}

#[async_trait]
pub trait Provider: Send + Sync {
    fn model_id(&self) -> &str;

    /// One attempt; retries are the caller's business.
    async fn complete(&self, key: &JustificationKey, prompt: &str) -> Result<Completion, ProviderError>;
}

/// Offline provider whose text is a pure function of the key.
#[derive(Debug, Default)]
pub struct MockProvider {
    calls: AtomicUsize,
    delay: Duration,
}

impl MockProvider {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sleeps for `delay` inside every call, to widen race windows in tests.
    pub fn with_delay(delay: Duration) -> Self {
        Self {
            calls: AtomicUsize::new(0),
            delay,
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn text_for(key: &JustificationKey) -> String {
        let digest = Sha256::digest(format!("{}\n{}\n{}", key.kind, key.source, key.target).as_bytes());
        let tag: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
        let what = match key.kind {
            tkg_core::recommend::RecommendationKind::Collaborator => "collaborator for",
            tkg_core::recommend::RecommendationKind::DatasetUser => "user of dataset",
        };
        format!(
            "[mock {tag}] {} is recommended as a {what} {} because their recent and most-cited work since 2017 covers closely related topics.",
            key.target, key.source
        )
    }
}

#[async_trait]
impl Provider for MockProvider {
    fn model_id(&self) -> &str {
        MOCK_MODEL_ID
    }

    async fn complete(&self, key: &JustificationKey, prompt: &str) -> Result<Completion, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if !self.delay.is_zero() {
            tokio::time::sleep(self.delay).await;
        }
        Ok(Completion {
            text: Self::text_for(key),
            usage: TokenUsage {
                prompt_tokens: prompt.split_whitespace().count() as u64,
                completion_tokens: 0,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
    /// JSON pointer to the generated text in the response body.
    pub response_path: String,
}

impl ProviderConfig {
    /// Endpoint from `CM_LLM_ENDPOINT` unless given, key from `CM_LLM_API_KEY`.
    pub fn from_env(endpoint: Option<String>, model: impl Into<String>) -> Option<Self> {
        let endpoint = endpoint.or_else(|| std::env::var(ENDPOINT_ENV).ok())?;
        Some(Self {
            endpoint,
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            model: model.into(),
            timeout: Duration::from_secs(30),
            response_path: DEFAULT_RESPONSE_PATH.to_owned(),
        })
    }
}

pub struct HttpProvider {
    config: ProviderConfig,
    client: reqwest::Client,
}

impl HttpProvider {
    pub fn new(config: ProviderConfig) -> Result<Self, ProviderError> {
        let client = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        Ok(Self { config, client })
    }
}

fn usage_of(body: &Value) -> TokenUsage {
    let get = |p: &str| body.pointer(p).and_then(Value::as_u64).unwrap_or(0);
    TokenUsage {
        prompt_tokens: get("/usage/prompt_tokens"),
        completion_tokens: get("/usage/completion_tokens"),
    }
}

#[async_trait]
impl Provider for HttpProvider {
    fn model_id(&self) -> &str {
        &self.config.model
    }

    async fn complete(&self, _key: &JustificationKey, prompt: &str) -> Result<Completion, ProviderError> {
        let body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
        });
        let mut req = self.client.post(&self.config.endpoint).json(&body);
        if let Some(k) = &self.config.api_key {
            req = req.bearer_auth(k);
        }
        let resp = req.send().await.map_err(|e| {
            if e.is_timeout() {
                ProviderError::Timeout
            } else {
                ProviderError::Transport(e.to_string())
            }
        })?;
        let status = resp.status().as_u16();
        if status == 401 || status == 403 {
            return Err(ProviderError::Auth(status));
        }
        let text = resp.text().await.map_err(|e| {
            if e.is_timeout() {
                ProviderError::Timeout
            } else {
                ProviderError::Transport(e.to_string())
            }
        })?;
        if !(200..300).contains(&status) {
            let mut body = text;
            body.truncate(200);
            return Err(ProviderError::Status { status, body });
        }
        let json: Value = serde_json::from_str(&text).map_err(|e| ProviderError::Malformed(e.to_string()))?;
        let answer = json
            .pointer(&self.config.response_path)
            .and_then(Value::as_str)
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| {
                ProviderError::Malformed(format!("no text at `{}`", self.config.response_path))
            })?;
        Ok(Completion {
            text: answer.to_owned(),
            usage: usage_of(&json),
        })
    }
}
