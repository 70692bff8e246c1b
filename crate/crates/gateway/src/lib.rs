//! Chat-completion and embedding calls against OpenAI-compatible endpoints,
//! plus a scripted mock provider for offline runs.

mod http;
pub mod mock;

use std::sync::Arc;
use std::time::Duration;

use reqagent_core::evaluation::EmbeddingVector;
use reqagent_core::{ChatExchange, ChatMessage, ModelConfig, ProviderKind};
use serde::Serialize;
use thiserror::Error;

pub use http::HttpClient;
pub use mock::{MockProvider, MockRule, MockScript, ModelScript, Responder};
pub use reqagent_core::evaluation::count_words;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GatewayError {
    #[error("precondition violated: {message}")]
    Precondition { message: String },
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("authentication failed with status {status}")]
    Auth { status: u16 },
    #[error("provider returned {status}: {message}")]
    Provider { status: u16, message: String },
    #[error("environment variable {name} holding the API key is not set")]
    MissingApiKey { name: String },
}

impl GatewayError {
    pub(crate) fn precondition(message: impl Into<String>) -> Self {
        Self::Precondition {
            message: message.into(),
        }
    }

    /// Maps an HTTP status to the error taxonomy. 5xx is transport-level.
    pub fn from_status(status: u16, body: impl Into<String>, attempts: u32) -> Self {
        match status {
            401 | 403 => Self::Auth { status },
            500..=599 => Self::Transport {
                attempts,
                message: format!("status {status}: {}", body.into()),
            },
            _ => Self::Provider {
                status,
                message: body.into(),
            },
        }
    }

    pub fn is_retryable(&self) -> bool {
        matches!(self, Self::Transport { .. })
    }
}

/// Exponential backoff between attempts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub base: Duration,
    pub factor: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            base: Duration::from_millis(500),
            factor: 2,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (1-based).
    pub fn delay(&self, retry: u32) -> Duration {
        self.base * self.factor.saturating_pow(retry.saturating_sub(1))
    }
}

/// Resolves API keys by environment variable name.
pub trait KeySource: Send + Sync {
    fn get(&self, name: &str) -> Option<String>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct EnvKeys;

impl KeySource for EnvKeys {
    fn get(&self, name: &str) -> Option<String> {
        std::env::var(name).ok().filter(|v| !v.is_empty())
    }
}

/// Dispatches each call to the HTTP client or the mock provider according to
/// `ModelConfig::provider`. Cheap to clone and safe to share.
#[derive(Clone)]
pub struct Gateway {
    http: HttpClient,
    mock: Option<Arc<MockProvider>>,
}

impl Gateway {
    pub fn new(http: HttpClient, mock: Option<Arc<MockProvider>>) -> Self {
        Self { http, mock }
    }

    pub fn mock_only(mock: MockProvider) -> Self {
        Self::new(HttpClient::default(), Some(Arc::new(mock)))
    }

    pub async fn chat(
        &self,
        config: &ModelConfig,
        messages: &[ChatMessage],
    ) -> Result<ChatExchange, GatewayError> {
        if messages.is_empty() {
            return Err(GatewayError::precondition("empty message list"));
        }
        config
            .validate()
            .map_err(|e| GatewayError::precondition(e.to_string()))?;
        match config.provider {
            ProviderKind::Mock => self.mock()?.chat(&config.model_name, messages),
            ProviderKind::OpenaiCompatible => self.http.chat(config, messages).await,
        }
    }

    pub async fn embed(
        &self,
        config: &ModelConfig,
        texts: &[String],
    ) -> Result<Vec<EmbeddingVector>, GatewayError> {
        if texts.is_empty() {
            return Err(GatewayError::precondition("no texts to embed"));
        }
        match config.provider {
            ProviderKind::Mock => self.mock()?.embed(&config.model_name, texts),
            ProviderKind::OpenaiCompatible => self.http.embed(config, texts).await,
        }
    }

    fn mock(&self) -> Result<&MockProvider, GatewayError> {
        self.mock.as_deref().ok_or_else(|| {
            GatewayError::precondition("mock provider requested but none configured")
        })
    }
}
