//! Justifications for recommendations.
//!
//! [`evidence`] picks the papers that ground a prompt, [`prompt`] renders the
//! prompt text, [`provider`] talks to a chat-completion service (or a
//! deterministic mock) and [`gateway`] puts a persistent, single-flight cache
//! with bounded concurrency in front of the provider.

pub mod cache;
pub mod evidence;
pub mod gateway;
pub mod prompt;
pub mod provider;

pub use cache::{JustificationCache, JustificationKey, JustificationRecord, TokenUsage};
pub use evidence::{select_evidence, EvidenceBundle};
pub use gateway::{CacheStatus, Gateway, GatewayConfig, GatewayError, RetryPolicy};
pub use prompt::{build_collaborator_prompt, build_dataset_user_prompt, PromptError};
pub use provider::{
    Completion, HttpProvider, MockProvider, Provider, ProviderConfig, ProviderError, API_KEY_ENV,
    DEFAULT_RESPONSE_PATH, ENDPOINT_ENV, MOCK_MODEL_ID,
};
