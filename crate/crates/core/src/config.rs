//! JSON application config shared by the CLI and the service.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::augment::{Gazetteer, PipelineConfig, PromptSet};
use crate::embedding::{Embedder, Memoized, RemoteEmbedder, TrigramEmbedder};
use crate::llm::{ChatProvider, RemoteChatProvider, ScriptedStub, StubScript};
use crate::memory::{StoreMetadata, DEFAULT_K};
use crate::persona::PersonaProfile;
use crate::ranking::RetrievalParams;

/// Environment variable that pins store creation times.
pub const SOURCE_DATE_EPOCH_ENV: &str = "SOURCE_DATE_EPOCH";

/// Creation timestamp for new stores: `SOURCE_DATE_EPOCH` when set, else 0
/// for stub-driven runs so their output is reproducible, else the clock.
pub fn creation_time(stub: bool) -> i64 {
    if let Some(t) = std::env::var(SOURCE_DATE_EPOCH_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
    {
        return t;
    }
    if stub {
        return 0;
    }
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0)
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {reason}")]
    Invalid { path: PathBuf, reason: String },
    #[error("{0}")]
    Provider(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LlmConfig {
    /// Scripted replies from a JSON file, or a fixed reply.
    Stub {
        #[serde(default)]
        script: Option<PathBuf>,
        #[serde(default)]
        reply: Option<String>,
    },
    /// An OpenAI-compatible chat completions endpoint. The key is read from
    /// `EPISODIC_LLM_API_KEY`.
    Remote {
        endpoint: String,
        model: String,
        #[serde(default = "default_timeout_secs")]
        timeout_secs: u64,
        #[serde(default = "default_remote_in_flight")]
        max_in_flight: usize,
    },
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig::Stub {
            script: None,
            reply: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbedderConfig {
    /// Character trigram hashing, 256 dimensions, no network.
    #[default]
    Trigram,
    /// An OpenAI-compatible embeddings endpoint. The key is read from
    /// `EPISODIC_EMBED_API_KEY`.
    Remote {
        endpoint: String,
        model: String,
        dimension: usize,
        #[serde(default = "default_timeout_secs")]
        timeout_secs: u64,
        #[serde(default = "default_remote_in_flight")]
        max_in_flight: usize,
    },
}

fn default_timeout_secs() -> u64 {
    60
}

fn default_remote_in_flight() -> usize {
    4
}

fn default_k() -> usize {
    DEFAULT_K
}

fn default_failure_threshold() -> f64 {
    0.10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppConfig {
    #[serde(default)]
    pub llm: LlmConfig,
    #[serde(default)]
    pub embedder: EmbedderConfig,
    /// Gazetteer JSON; the bundled one when absent.
    #[serde(default)]
    pub gazetteer: Option<PathBuf>,
    /// Directory of `<stage>.v1.txt` prompt files; the bundled set when absent.
    #[serde(default)]
    pub prompts_dir: Option<PathBuf>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_failure_threshold")]
    pub failure_threshold: f64,
    /// When set, the service requires `Authorization: Bearer <token>`.
    #[serde(default)]
    pub bearer_token: Option<String>,
    /// Persona profile; the bundled fixture profile when absent.
    #[serde(default)]
    pub profile: Option<PersonaProfile>,
    #[serde(default)]
    pub retrieval: RetrievalParams,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            llm: LlmConfig::default(),
            embedder: EmbedderConfig::default(),
            gazetteer: None,
            prompts_dir: None,
            k: DEFAULT_K,
            failure_threshold: default_failure_threshold(),
            bearer_token: None,
            profile: None,
            retrieval: RetrievalParams::default(),
        }
    }
}

impl AppConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let config: AppConfig =
            serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Invalid {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
        config.validate().map_err(|reason| ConfigError::Invalid {
            path: path.to_path_buf(),
            reason,
        })?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.k == 0 {
            return Err("k must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.failure_threshold) {
            return Err("failure_threshold must be within [0, 1]".into());
        }
        if let Some(p) = &self.profile {
            p.validate().map_err(|e| e.to_string())?;
        }
        self.retrieval.validate().map_err(|e| e.to_string())?;
        Ok(())
    }

    /// The configured chat provider. A stub with neither script nor reply
    /// answers every request with "canned reply".
    pub fn chat_provider(&self) -> Result<Box<dyn ChatProvider>, ConfigError> {
        Ok(match &self.llm {
            LlmConfig::Stub {
                script: Some(path), ..
            } => {
                let script = StubScript::load(path)
                    .map_err(|e| ConfigError::Provider(format!("{}: {e}", path.display())))?;
                Box::new(ScriptedStub::from_script(script))
            }
            LlmConfig::Stub { reply, .. } => Box::new(ScriptedStub::constant(
                reply.clone().unwrap_or_else(|| "canned reply".into()),
            )),
            LlmConfig::Remote {
                endpoint,
                model,
                timeout_secs,
                max_in_flight,
            } => Box::new(
                RemoteChatProvider::new(endpoint, model, Duration::from_secs(*timeout_secs))
                    .map_err(|e| ConfigError::Provider(e.to_string()))?
                    .with_max_in_flight(*max_in_flight),
            ),
        })
    }

    pub fn embedder(&self) -> Result<Box<dyn Embedder>, ConfigError> {
        Ok(match &self.embedder {
            EmbedderConfig::Trigram => Box::new(TrigramEmbedder::new()),
            EmbedderConfig::Remote {
                endpoint,
                model,
                dimension,
                timeout_secs,
                max_in_flight,
            } => Box::new(Memoized::new(
                RemoteEmbedder::new(
                    endpoint,
                    model,
                    *dimension,
                    Duration::from_secs(*timeout_secs),
                )
                .map_err(|e| ConfigError::Provider(e.to_string()))?
                .with_max_in_flight(*max_in_flight),
            )),
        })
    }

    pub fn uses_stub(&self) -> bool {
        matches!(self.llm, LlmConfig::Stub { .. })
    }

    pub fn profile(&self) -> PersonaProfile {
        self.profile.clone().unwrap_or_else(crate::fixture::profile)
    }

    pub fn pipeline_config(&self, metadata: StoreMetadata) -> Result<PipelineConfig, ConfigError> {
        let prompts = match &self.prompts_dir {
            Some(dir) => {
                PromptSet::from_dir(dir).map_err(|e| ConfigError::Provider(e.to_string()))?
            }
            None => PromptSet::bundled(),
        };
        let gazetteer = match &self.gazetteer {
            Some(path) => {
                Gazetteer::load(path).map_err(|e| ConfigError::Provider(e.to_string()))?
            }
            None => Gazetteer::bundled(),
        };
        Ok(PipelineConfig {
            k: self.k,
            failure_threshold: self.failure_threshold,
            prompts,
            gazetteer,
            metadata,
            ..PipelineConfig::default()
        })
    }
}
