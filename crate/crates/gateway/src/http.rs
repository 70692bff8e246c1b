use std::sync::Arc;
use std::time::Instant;

use reqagent_core::evaluation::{count_words, EmbeddingVector};
use reqagent_core::{ChatExchange, ChatMessage, ModelConfig};
use serde::Deserialize;
use serde_json::json;

use crate::{EnvKeys, GatewayError, KeySource, RetryPolicy};

#[derive(Clone)]
pub struct HttpClient {
    client: reqwest::Client,
    retry: RetryPolicy,
    keys: Arc<dyn KeySource>,
}

impl Default for HttpClient {
    fn default() -> Self {
        Self::new(RetryPolicy::default(), Arc::new(EnvKeys))
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    #[serde(default)]
    index: Option<usize>,
    embedding: Vec<f64>,
}

impl HttpClient {
    pub fn new(retry: RetryPolicy, keys: Arc<dyn KeySource>) -> Self {
        Self {
            client: reqwest::Client::new(),
            retry,
            keys,
        }
    }

    fn url(config: &ModelConfig, path: &str) -> String {
        format!("{}/{path}", config.base_url.trim_end_matches('/'))
    }

    /// POSTs `body`, retrying transport failures and 5xx with backoff.
    /// Returns the response body and the number of attempts made.
    async fn post(
        &self,
        config: &ModelConfig,
        path: &str,
        body: &serde_json::Value,
    ) -> Result<(String, u32), GatewayError> {
        let key =
            self.keys
                .get(&config.api_key_env)
                .ok_or_else(|| GatewayError::MissingApiKey {
                    name: config.api_key_env.clone(),
                })?;
        let url = Self::url(config, path);
        let mut attempt = 0;
        loop {
            attempt += 1;
            let result = self
                .client
                .post(&url)
                .bearer_auth(&key)
                .timeout(config.timeout)
                .json(body)
                .send()
                .await;
            let err = match result {
                Ok(resp) => {
                    let status = resp.status().as_u16();
                    let text = resp.text().await;
                    match (status, text) {
                        (200..=299, Ok(text)) => return Ok((text, attempt)),
                        (200..=299, Err(e)) => GatewayError::Transport {
                            attempts: attempt,
                            message: e.to_string(),
                        },
                        (status, text) => {
                            GatewayError::from_status(status, text.unwrap_or_default(), attempt)
                        }
                    }
                }
                Err(e) => GatewayError::Transport {
                    attempts: attempt,
                    message: e.to_string(),
                },
            };
            if !err.is_retryable() || attempt > config.max_retries {
                return Err(err);
            }
            tokio::time::sleep(self.retry.delay(attempt)).await;
        }
    }

    pub async fn chat(
        &self,
        config: &ModelConfig,
        messages: &[ChatMessage],
    ) -> Result<ChatExchange, GatewayError> {
        let body = json!({
            "model": config.model_name,
            "messages": messages,
            "temperature": config.temperature,
        });
        let started = Instant::now();
        let (text, attempts) = self.post(config, "chat/completions", &body).await?;
        let latency = started.elapsed();
        let parsed: ChatResponse =
            serde_json::from_str(&text).map_err(|e| GatewayError::Provider {
                status: 200,
                message: format!("unreadable chat response: {e}"),
            })?;
        let response_text = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| GatewayError::Provider {
                status: 200,
                message: "response has no choices".into(),
            })?;
        Ok(ChatExchange {
            request: messages.to_vec(),
            word_count: count_words(&response_text),
            response_text,
            latency,
            attempt_count: attempts,
        })
    }

    pub async fn embed(
        &self,
        config: &ModelConfig,
        texts: &[String],
    ) -> Result<Vec<EmbeddingVector>, GatewayError> {
        let body = json!({ "model": config.model_name, "input": texts });
        let (text, _) = self.post(config, "embeddings", &body).await?;
        let mut parsed: EmbeddingResponse =
            serde_json::from_str(&text).map_err(|e| GatewayError::Provider {
                status: 200,
                message: format!("unreadable embedding response: {e}"),
            })?;
        if parsed.data.len() != texts.len() {
            return Err(GatewayError::Provider {
                status: 200,
                message: format!("{} embeddings for {} texts", parsed.data.len(), texts.len()),
            });
        }
        parsed.data.sort_by_key(|d| d.index.unwrap_or(usize::MAX));
        let vectors: Vec<EmbeddingVector> = parsed
            .data
            .into_iter()
            .map(|d| EmbeddingVector::new(d.embedding))
            .collect();
        let dim = vectors[0].dimension();
        if dim == 0 || vectors.iter().any(|v| v.dimension() != dim) {
            return Err(GatewayError::Provider {
                status: 200,
                message: "embeddings of unequal dimension".into(),
            });
        }
        Ok(vectors)
    }
}
