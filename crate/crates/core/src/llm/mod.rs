//! Chat-completion backends for the four LLM roles.
//!
//! Every role talks through [`Backend::complete`]. Runs wrap whichever
//! backend they were given in a [`Recorder`] so each call lands in the
//! transcript log; a [`ReplayBackend`] built from that log reproduces the run.

mod live;
mod scripted;
mod transcript;

pub use live::{extract_content, LiveBackend, LiveSettings, ENV_PREFIX};
pub use scripted::ScriptedBackend;
pub use transcript::{read_transcripts, AgentTranscript, Recorder, ReplayBackend};

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Designer,
    Planner,
    Coder,
    Critic,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Designer, Role::Planner, Role::Coder, Role::Critic];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Designer => "designer",
            Role::Planner => "planner",
            Role::Coder => "coder",
            Role::Critic => "critic",
        }
    }

    /// Default sampling temperature for the role.
    pub fn default_temperature(self) -> f64 {
        match self {
            Role::Designer | Role::Planner => 0.7,
            Role::Coder | Role::Critic => 0.2,
        }
    }
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub speaker: Speaker,
    pub content: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub temperature: f64,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub role: Role,
    pub messages: Vec<Message>,
    pub sampling: Sampling,
}

impl ChatRequest {
    /// System prompt followed by one user turn, with the role's default sampling.
    pub fn new(role: Role, system: impl Into<String>, user: impl Into<String>) -> Self {
        Self {
            role,
            messages: vec![
                Message {
                    speaker: Speaker::System,
                    content: system.into(),
                },
                Message {
                    speaker: Speaker::User,
                    content: user.into(),
                },
            ],
            sampling: Sampling {
                temperature: role.default_temperature(),
                max_tokens: 4096,
            },
        }
    }

    pub fn is_well_formed(&self) -> bool {
        self.messages
            .first()
            .is_some_and(|m| m.speaker == Speaker::System)
            && self.sampling.temperature.is_finite()
            && self.sampling.temperature >= 0.0
    }

    /// Content digest; identical requests always hash identically.
    pub fn digest(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("request serializes"))
    }

    pub fn user_text(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.speaker == Speaker::User)
            .map_or("", |m| m.content.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("request timed out")]
    Timeout,
    #[error("endpoint answered with HTTP status {0}")]
    HttpStatus(u16),
    #[error("malformed reply: {0}")]
    MalformedReply(String),
    #[error("no scripted reply left for {role} call #{position}")]
    FixtureExhausted { role: Role, position: u64 },
    #[error("environment variable {0} is not set")]
    MissingCredential(String),
    #[error("replay diverged at call #{sequence} ({role}): recorded request {expected}, got {actual}")]
    ReplayMismatch {
        sequence: u64,
        role: Role,
        expected: String,
        actual: String,
    },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("cannot load backend fixture: {0}")]
    Fixture(String),
}

/// Number of completed calls per role.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CallCounts(BTreeMap<Role, u64>);

impl CallCounts {
    pub fn get(&self, role: Role) -> u64 {
        self.0.get(&role).copied().unwrap_or(0)
    }

    pub fn set(&mut self, role: Role, value: u64) {
        self.0.insert(role, value);
    }

    /// Increments and returns the new count.
    pub fn bump(&mut self, role: Role) -> u64 {
        let n = self.0.entry(role).or_insert(0);
        *n += 1;
        *n
    }

    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }
}

pub trait Backend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError>;

    /// Positions sequence-keyed backends after calls consumed by an earlier
    /// session of the same run.
    fn fast_forward(&self, _consumed: &CallCounts) {}
}

impl<B: Backend + ?Sized> Backend for Arc<B> {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }

    fn fast_forward(&self, consumed: &CallCounts) {
        (**self).fast_forward(consumed)
    }
}

/// Which backend a run uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    Scripted {
        fixture: PathBuf,
    },
    Replay {
        transcript: PathBuf,
    },
    Live {
        #[serde(default = "default_timeout_secs")]
        timeout_secs: u64,
        #[serde(default = "default_retries")]
        retries: u32,
    },
}

fn default_timeout_secs() -> u64 {
    120
}

fn default_retries() -> u32 {
    2
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::Live {
            timeout_secs: default_timeout_secs(),
            retries: default_retries(),
        }
    }
}

impl BackendConfig {
    pub fn build(&self) -> Result<Arc<dyn Backend>, BackendError> {
        Ok(match self {
            BackendConfig::Scripted { fixture } => Arc::new(ScriptedBackend::load(fixture)?),
            BackendConfig::Replay { transcript } => Arc::new(ReplayBackend::load(transcript)?),
            BackendConfig::Live {
                timeout_secs,
                retries,
            } => Arc::new(LiveBackend::from_env(LiveSettings {
                timeout: std::time::Duration::from_secs(*timeout_secs),
                retries: *retries,
                ..LiveSettings::default()
            })?),
        })
    }
}

/// Body of the first fenced block (```lang ... ```), if any.
pub fn first_fenced_block(text: &str) -> Option<&str> {
    let start = text.find("```")?;
    let after = &text[start + 3..];
    // The info string (language tag) runs to the end of the opening line.
    let body_start = after.find('\n').map_or(after.len(), |i| i + 1);
    let body = &after[body_start..];
    let end = body.find("```").unwrap_or(body.len());
    Some(&body[..end])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fence_extraction() {
        assert_eq!(first_fenced_block("```bt\n(tree)\n```"), Some("(tree)\n"));
        assert_eq!(
            first_fenced_block("Plan:\n```bt\nA\n```\nthen\n```bt\nB\n```"),
            Some("A\n")
        );
        assert_eq!(first_fenced_block("no fences here"), None);
        assert_eq!(first_fenced_block("```\nunterminated"), Some("unterminated"));
    }

    #[test]
    fn digest_tracks_content() {
        let a = ChatRequest::new(Role::Coder, "sys", "user");
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.messages[1].content.push('!');
        assert_ne!(a.digest(), b.digest());
        assert!(a.is_well_formed());
    }

    #[test]
    fn backend_config_toml() {
        let c: BackendConfig = toml::from_str("kind = \"scripted\"\nfixture = \"f.toml\"").unwrap();
        assert_eq!(
            c,
            BackendConfig::Scripted {
                fixture: "f.toml".into()
            }
        );
        let live: BackendConfig = toml::from_str("kind = \"live\"").unwrap();
        assert_eq!(live, BackendConfig::default());
    }

    #[test]
    fn role_temperatures() {
        assert_eq!(Role::Designer.default_temperature(), 0.7);
        assert_eq!(Role::Critic.default_temperature(), 0.2);
    }
}
