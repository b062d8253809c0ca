//! Cached, single-flight access to a provider.

use crate::cache::{JustificationCache, JustificationKey, JustificationRecord};
use crate::provider::{Provider, ProviderError};
use futures::future::{BoxFuture, FutureExt, Shared};
use rand::Rng;
use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;
use thiserror::Error;
use tokio::sync::Semaphore;

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Delay after the first failure; doubles after each further failure.
    pub base_delay: Duration,
    /// Each delay is stretched by a uniform factor in `[1, 1 + jitter)`.
    pub jitter: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::from_secs(1),
            jitter: 0.1,
        }
    }
}

impl RetryPolicy {
    /// Pause after failed attempt number `attempt` (1-based).
    pub fn delay(&self, attempt: u32) -> Duration {
        let base = self.base_delay.mul_f64(2f64.powi(attempt.saturating_sub(1) as i32));
        let stretch = if self.jitter > 0.0 {
            1.0 + rand::rng().random_range(0.0..self.jitter)
        } else {
            1.0
        };
        base.mul_f64(stretch)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatewayConfig {
    /// Provider calls running at once.
    pub max_concurrent: usize,
    /// Distinct keys allowed to wait for a provider slot; beyond that new
    /// keys are turned away with [`GatewayError::Busy`].
    pub max_pending: usize,
    pub retry: RetryPolicy,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            max_concurrent: 4,
            max_pending: 64,
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatewayError {
    #[error("provider failed after {attempts} attempt(s): {error}")]
    Provider { error: ProviderError, attempts: u32 },
    #[error("provider still failing after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: ProviderError },
    #[error("too many justification requests in flight")]
    Busy,
    #[error("could not persist justification: {0}")]
    Cache(String),
}

impl GatewayError {
    /// Whether the same request may succeed later.
    pub fn is_retryable(&self) -> bool {
        match self {
            GatewayError::Provider { error, .. } => error.is_retryable(),
            GatewayError::Exhausted { .. } | GatewayError::Busy => true,
            GatewayError::Cache(_) => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheStatus {
    Hit,
    Miss,
}

impl CacheStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CacheStatus::Hit => "hit",
            CacheStatus::Miss => "miss",
        }
    }
}

type Flight = Shared<BoxFuture<'static, Result<Arc<JustificationRecord>, GatewayError>>>;

struct Inner {
    provider: Arc<dyn Provider>,
    cache: JustificationCache,
    permits: Semaphore,
    config: GatewayConfig,
    in_flight: Mutex<HashMap<JustificationKey, Flight>>,
}

#[derive(Clone)]
pub struct Gateway {
    inner: Arc<Inner>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("model", &self.inner.provider.model_id())
            .field("cache", &self.inner.cache)
            .field("config", &self.inner.config)
            .finish()
    }
}

impl Gateway {
    pub fn new(provider: Arc<dyn Provider>, cache: JustificationCache, config: GatewayConfig) -> Self {
        let permits = Semaphore::new(config.max_concurrent.max(1));
        Self {
            inner: Arc::new(Inner {
                provider,
                cache,
                permits,
                config,
                in_flight: Mutex::new(HashMap::new()),
            }),
        }
    }

    pub fn cache(&self) -> &JustificationCache {
        &self.inner.cache
    }

    pub fn model_id(&self) -> &str {
        self.inner.provider.model_id()
    }

    /// Cached record for `key`, or one fresh provider call shared by every
    /// concurrent caller asking for the same key.
    pub async fn fetch(
        &self,
        key: JustificationKey,
        prompt: String,
    ) -> Result<(Arc<JustificationRecord>, CacheStatus), GatewayError> {
        if let Some(hit) = self.inner.cache.get(&key) {
            return Ok((hit, CacheStatus::Hit));
        }
        let flight = {
            let mut in_flight = self.inner.in_flight.lock().unwrap_or_else(|e| e.into_inner());
            // A flight finishing between the first lookup and the lock has
            // already published its record.
            if let Some(hit) = self.inner.cache.get(&key) {
                return Ok((hit, CacheStatus::Hit));
            }
            match in_flight.get(&key) {
                Some(f) => f.clone(),
                None => {
                    let cfg = &self.inner.config;
                    if in_flight.len() >= cfg.max_concurrent.max(1) + cfg.max_pending {
                        return Err(GatewayError::Busy);
                    }
                    let inner = self.inner.clone();
                    let k = key.clone();
                    // Spawned so the call completes even if every waiter goes away.
                    let task = tokio::spawn(async move {
                        let result = inner.call(&k, &prompt).await;
                        inner
                            .in_flight
                            .lock()
                            .unwrap_or_else(|e| e.into_inner())
                            .remove(&k);
                        result
                    });
                    let flight: Flight = async move {
                        task.await
                            .unwrap_or_else(|e| Err(GatewayError::Cache(format!("worker failed: {e}"))))
                    }
                    .boxed()
                    .shared();
                    in_flight.insert(key, flight.clone());
                    flight
                }
            }
        };
        flight.await.map(|r| (r, CacheStatus::Miss))
    }
}

impl Inner {
    async fn call(&self, key: &JustificationKey, prompt: &str) -> Result<Arc<JustificationRecord>, GatewayError> {
        let _permit = self
            .permits
            .acquire()
            .await
            .map_err(|_| GatewayError::Cache("gateway shut down".into()))?;
        let policy = &self.config.retry;
        let max = policy.max_attempts.max(1);
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.provider.complete(key, prompt).await {
                Ok(done) => {
                    let record = JustificationRecord {
                        key: key.clone(),
                        text: done.text,
                        model_id: self.provider.model_id().to_owned(),
                        created_at: chrono::Utc::now(),
                        token_usage: done.usage,
                    };
                    return self.cache.insert(record).map_err(|e| GatewayError::Cache(e.to_string()));
                }
                Err(error) if !error.is_retryable() => {
                    return Err(GatewayError::Provider { error, attempts: attempt });
                }
                Err(last) if attempt >= max => {
                    return Err(GatewayError::Exhausted { attempts: attempt, last });
                }
                Err(error) => {
                    tracing::warn!(%error, attempt, "justification request failed, retrying");
                    tokio::time::sleep(policy.delay(attempt)).await;
                }
            }
        }
    }
}
