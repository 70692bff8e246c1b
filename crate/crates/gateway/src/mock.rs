//! Scripted stand-in for a remote model.
//!
//! Prompts start with header lines such as `Agent: product_owner`,
//! `Task: generation` and `Technique: WSJF`. A rule matches when every header
//! it names has the same value in the first user message; `turn` counts user
//! messages, so a corrective retry is turn 2. The first matching rule wins.
//! Unmatched calls go to the optional [`Responder`], otherwise they fail.
//!
//! Replies depend only on the model name and the messages.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use reqagent_core::evaluation::{count_words, EmbeddingVector, HashedBagOfWords};
use reqagent_core::{ChatExchange, ChatMessage, MessageRole};
use serde::{Deserialize, Serialize};

use crate::GatewayError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub technique: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn: Option<usize>,
    pub reply: String,
    /// Recorded response time reported as the exchange latency.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_secs: Option<f64>,
    /// Simulated HTTP failure status instead of a reply.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fail_status: Option<u16>,
}

impl MockRule {
    pub fn reply(reply: impl Into<String>) -> Self {
        Self {
            reply: reply.into(),
            ..Self::default()
        }
    }

    pub fn for_agent(mut self, agent: &str) -> Self {
        self.agent = Some(agent.into());
        self
    }

    pub fn for_task(mut self, task: &str) -> Self {
        self.task = Some(task.into());
        self
    }

    pub fn for_technique(mut self, technique: &str) -> Self {
        self.technique = Some(technique.into());
        self
    }

    pub fn on_turn(mut self, turn: usize) -> Self {
        self.turn = Some(turn);
        self
    }

    pub fn with_latency(mut self, secs: f64) -> Self {
        self.latency_secs = Some(secs);
        self
    }

    fn matches(&self, headers: &BTreeMap<String, String>, turn: usize) -> bool {
        let field = |want: &Option<String>, key: &str| match want {
            None => true,
            Some(w) => headers.get(key).is_some_and(|v| v.eq_ignore_ascii_case(w)),
        };
        field(&self.agent, "agent")
            && field(&self.task, "task")
            && field(&self.technique, "technique")
            && self.turn.is_none_or(|t| t == turn)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelScript {
    #[serde(default)]
    pub rules: Vec<MockRule>,
    /// Recorded embeddings keyed by the exact embedded text.
    #[serde(default)]
    pub embeddings: BTreeMap<String, Vec<f64>>,
}

/// Recording file: scripts keyed by model name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub models: BTreeMap<String, ModelScript>,
}

impl MockScript {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Rules from `other` are appended after existing ones for the same model.
    pub fn merge(&mut self, other: MockScript) {
        for (model, script) in other.models {
            let entry = self.models.entry(model).or_default();
            entry.rules.extend(script.rules);
            entry.embeddings.extend(script.embeddings);
        }
    }
}

/// Deterministic fallback for calls no rule covers.
pub trait Responder: Send + Sync {
    fn respond(&self, model_name: &str, messages: &[ChatMessage]) -> Option<String>;
}

/// Header lines at the top of the first user message.
pub fn prompt_headers(messages: &[ChatMessage]) -> BTreeMap<String, String> {
    let Some(first) = messages.iter().find(|m| m.role == MessageRole::User) else {
        return BTreeMap::new();
    };
    first
        .content
        .lines()
        .map_while(|line| {
            let (k, v) = line.split_once(':')?;
            let k = k.trim();
            (!k.is_empty() && k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'))
                .then(|| (k.to_ascii_lowercase(), v.trim().to_string()))
        })
        .collect()
}

#[derive(Clone, Default)]
pub struct MockProvider {
    script: MockScript,
    responder: Option<Arc<dyn Responder>>,
    embedder: HashedBagOfWords,
}

impl MockProvider {
    pub fn new(script: MockScript) -> Self {
        Self {
            script,
            responder: None,
            embedder: HashedBagOfWords::default(),
        }
    }

    pub fn with_responder(mut self, responder: Arc<dyn Responder>) -> Self {
        self.responder = Some(responder);
        self
    }

    pub fn script(&self) -> &MockScript {
        &self.script
    }

    pub fn chat(
        &self,
        model_name: &str,
        messages: &[ChatMessage],
    ) -> Result<ChatExchange, GatewayError> {
        let headers = prompt_headers(messages);
        let turn = messages
            .iter()
            .filter(|m| m.role == MessageRole::User)
            .count();
        let rule = self
            .script
            .models
            .get(model_name)
            .and_then(|s| s.rules.iter().find(|r| r.matches(&headers, turn)));
        let (text, latency) = match rule {
            Some(rule) => {
                if let Some(status) = rule.fail_status {
                    return Err(GatewayError::from_status(status, "scripted failure", 1));
                }
                let latency = rule
                    .latency_secs
                    .and_then(|s| Duration::try_from_secs_f64(s).ok())
                    .unwrap_or_default();
                (rule.reply.clone(), latency)
            }
            None => match self.responder.as_ref().and_then(|r| r.respond(model_name, messages)) {
                Some(text) => (text, Duration::ZERO),
                None => {
                    return Err(GatewayError::Provider {
                        status: 404,
                        message: format!("no scripted reply for {model_name} with headers {headers:?} on turn {turn}"),
                    })
                }
            },
        };
        Ok(ChatExchange {
            request: messages.to_vec(),
            word_count: count_words(&text),
            response_text: text,
            latency,
            attempt_count: 1,
        })
    }

    /// Recorded vectors where available, hashed bag-of-words otherwise.
    pub fn embed(
        &self,
        model_name: &str,
        texts: &[String],
    ) -> Result<Vec<EmbeddingVector>, GatewayError> {
        let recorded = self.script.models.get(model_name).map(|s| &s.embeddings);
        let vectors: Vec<EmbeddingVector> = texts
            .iter()
            .map(|t| match recorded.and_then(|r| r.get(t)) {
                Some(v) => EmbeddingVector::new(v.clone()),
                None => self.embedder.vector(t),
            })
            .collect();
        let dim = vectors[0].dimension();
        if vectors.iter().any(|v| v.dimension() != dim) {
            return Err(GatewayError::Provider {
                status: 422,
                message: format!("recorded embeddings for {model_name} do not cover every text"),
            });
        }
        Ok(vectors)
    }
}
