//! Known models and the environment-driven service configuration.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use reqagent_agents::SyntheticResponder;
use reqagent_core::ModelConfig;
use reqagent_gateway::{Gateway, HttpClient, MockProvider, MockScript};

pub const DEFAULT_OPENAI_BASE_URL: &str = "https://api.openai.com/v1";
pub const DEFAULT_GROQ_BASE_URL: &str = "https://api.groq.com/openai/v1";
pub const DEFAULT_EMBED_MODEL: &str = "text-embedding-3-small";
pub const MOCK_MODEL: &str = "mock";

/// Where model calls go.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderMode {
    /// Every model is answered offline from recordings and the synthetic responder.
    Mock,
    /// Registered models call their provider; `mock` stays offline.
    Live,
}

impl std::str::FromStr for ProviderMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mock" => Ok(Self::Mock),
            "live" => Ok(Self::Live),
            other => Err(format!(
                "unknown provider mode '{other}' (expected mock or live)"
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelRegistry {
    mode: ProviderMode,
    live: BTreeMap<String, ModelConfig>,
    embed: Option<ModelConfig>,
}

impl ModelRegistry {
    pub fn new(mode: ProviderMode, openai_base: &str, groq_base: &str) -> Self {
        let mut live = BTreeMap::new();
        for name in ["gpt-3.5-turbo", "gpt-4o"] {
            live.insert(
                name.to_string(),
                ModelConfig::openai_compatible(openai_base, name, "OPENAI_API_KEY"),
            );
        }
        for name in ["llama3-70b-8192", "mixtral-8x7b-32768"] {
            live.insert(
                name.to_string(),
                ModelConfig::openai_compatible(groq_base, name, "GROQ_API_KEY"),
            );
        }
        let embed = (mode == ProviderMode::Live).then(|| {
            ModelConfig::openai_compatible(openai_base, DEFAULT_EMBED_MODEL, "OPENAI_API_KEY")
        });
        Self { mode, live, embed }
    }

    pub fn mock() -> Self {
        Self::new(
            ProviderMode::Mock,
            DEFAULT_OPENAI_BASE_URL,
            DEFAULT_GROQ_BASE_URL,
        )
    }

    pub fn mode(&self) -> ProviderMode {
        self.mode
    }

    pub fn names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.live.keys().cloned().collect();
        names.push(MOCK_MODEL.into());
        names
    }

    pub fn resolve(&self, name: &str) -> Result<ModelConfig, String> {
        let name = name.trim();
        if name == MOCK_MODEL {
            return Ok(ModelConfig::mock(MOCK_MODEL));
        }
        match (self.mode, self.live.get(name)) {
            (ProviderMode::Mock, Some(_)) => Ok(ModelConfig::mock(name)),
            (ProviderMode::Live, Some(config)) => Ok(config.clone()),
            (_, None) => Err(format!(
                "unknown model '{name}'; known models: {}",
                self.names().join(", ")
            )),
        }
    }

    /// Embedding model for live runs; offline runs embed with the generating model.
    pub fn embed_model(&self) -> Option<&ModelConfig> {
        self.embed.as_ref()
    }

    pub fn with_embed_model(mut self, model: ModelConfig) -> Self {
        self.embed = Some(model);
        self
    }
}

/// Loads one recording file or every `*.json` file in a directory.
pub fn load_recordings(path: &Path) -> Result<MockScript, String> {
    if !path.is_dir() {
        return MockScript::load(path);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| format!("{}: {e}", path.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let mut script = MockScript::default();
    for file in files {
        script.merge(MockScript::load(&file)?);
    }
    Ok(script)
}

/// Gateway with the offline provider always available.
pub fn build_gateway(recordings: MockScript) -> Gateway {
    let mock = MockProvider::new(recordings).with_responder(Arc::new(SyntheticResponder));
    Gateway::new(HttpClient::default(), Some(Arc::new(mock)))
}

/// Service settings read from `REQAGENT_*` environment variables.
#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    pub data_dir: PathBuf,
    pub mode: ProviderMode,
    pub recordings: Option<PathBuf>,
    pub openai_base_url: String,
    pub groq_base_url: String,
}

impl ServiceConfig {
    pub fn from_env() -> Result<Self, String> {
        Self::from_lookup(|k| std::env::var(k).ok().filter(|v| !v.is_empty()))
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, String> {
        let bind = get("REQAGENT_BIND").unwrap_or_else(|| "127.0.0.1:8080".into());
        let bind = bind
            .parse()
            .map_err(|e| format!("REQAGENT_BIND '{bind}': {e}"))?;
        let mode = match get("REQAGENT_PROVIDER") {
            Some(m) => m.parse()?,
            None => ProviderMode::Mock,
        };
        Ok(Self {
            bind,
            data_dir: get("REQAGENT_DATA_DIR")
                .unwrap_or_else(|| "./data".into())
                .into(),
            mode,
            recordings: get("REQAGENT_RECORDINGS").map(PathBuf::from),
            openai_base_url: get("REQAGENT_OPENAI_BASE_URL")
                .unwrap_or_else(|| DEFAULT_OPENAI_BASE_URL.into()),
            groq_base_url: get("REQAGENT_GROQ_BASE_URL")
                .unwrap_or_else(|| DEFAULT_GROQ_BASE_URL.into()),
        })
    }

    pub fn registry(&self) -> ModelRegistry {
        ModelRegistry::new(self.mode, &self.openai_base_url, &self.groq_base_url)
    }

    pub fn gateway(&self) -> Result<Gateway, String> {
        let recordings = match &self.recordings {
            Some(path) => load_recordings(path)?,
            None => MockScript::default(),
        };
        Ok(build_gateway(recordings))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use reqagent_core::ProviderKind;

    #[test]
    fn mock_mode_keeps_every_model_offline() {
        let r = ModelRegistry::mock();
        let c = r.resolve("gpt-4o").unwrap();
        assert_eq!(c.provider, ProviderKind::Mock);
        assert_eq!(c.model_name, "gpt-4o");
        assert!(r.resolve("claude-x").is_err());
    }

    #[test]
    fn live_mode_routes_by_provider() {
        let r = ModelRegistry::new(ProviderMode::Live, "http://o", "http://g");
        assert_eq!(
            r.resolve("mixtral-8x7b-32768").unwrap().base_url,
            "http://g"
        );
        assert_eq!(
            r.resolve("gpt-3.5-turbo").unwrap().api_key_env,
            "OPENAI_API_KEY"
        );
        assert_eq!(r.resolve("mock").unwrap().provider, ProviderKind::Mock);
        assert_eq!(r.embed_model().unwrap().model_name, DEFAULT_EMBED_MODEL);
    }

    #[test]
    fn env_defaults() {
        let c = ServiceConfig::from_lookup(|_| None).unwrap();
        assert_eq!(c.bind.to_string(), "127.0.0.1:8080");
        assert_eq!(c.mode, ProviderMode::Mock);
        assert!(
            ServiceConfig::from_lookup(|k| (k == "REQAGENT_PROVIDER").then(|| "cloud".into()))
                .is_err()
        );
    }
}
