use std::collections::BTreeMap;
use std::time::Duration;

use serde_json::{json, Value};

use super::{Backend, BackendError, ChatRequest, Role, Speaker};

/// Environment variables are `CURRICULA_LLM_{ENDPOINT,MODEL,API_KEY}`, each
/// optionally overridden per role with a suffix such as `_PLANNER`.
pub const ENV_PREFIX: &str = "CURRICULA_LLM";

#[derive(Debug, Clone)]
pub struct LiveSettings {
    pub timeout: Duration,
    pub retries: u32,
    /// First retry delay; doubles on each further retry.
    pub backoff: Duration,
}

impl Default for LiveSettings {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(120),
            retries: 2,
            backoff: Duration::from_millis(500),
        }
    }
}

#[derive(Debug, Clone)]
struct Endpoint {
    url: String,
    model: String,
    api_key: Option<String>,
}

/// Talks to an OpenAI-style `/chat/completions` endpoint.
pub struct LiveBackend {
    agent: ureq::Agent,
    endpoints: BTreeMap<Role, Endpoint>,
    settings: LiveSettings,
}

impl std::fmt::Debug for LiveBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LiveBackend")
            .field("roles", &self.endpoints.keys().collect::<Vec<_>>())
            .field("settings", &self.settings)
            .finish()
    }
}

impl LiveBackend {
    pub fn from_env(settings: LiveSettings) -> Result<Self, BackendError> {
        Self::from_lookup(settings, |name| std::env::var(name).ok())
    }

    /// Resolves endpoint, model and key for every role through `lookup`.
    pub fn from_lookup(
        settings: LiveSettings,
        lookup: impl Fn(&str) -> Option<String>,
    ) -> Result<Self, BackendError> {
        let resolve = |field: &str, role: Role| {
            let specific = format!("{ENV_PREFIX}_{field}_{}", role.as_str().to_uppercase());
            lookup(&specific).or_else(|| lookup(&format!("{ENV_PREFIX}_{field}")))
        };
        let mut endpoints = BTreeMap::new();
        for role in Role::ALL {
            let url = resolve("ENDPOINT", role)
                .ok_or_else(|| BackendError::MissingCredential(format!("{ENV_PREFIX}_ENDPOINT")))?;
            let model = resolve("MODEL", role)
                .ok_or_else(|| BackendError::MissingCredential(format!("{ENV_PREFIX}_MODEL")))?;
            endpoints.insert(
                role,
                Endpoint {
                    url,
                    model,
                    api_key: resolve("API_KEY", role),
                },
            );
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(settings.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            agent,
            endpoints,
            settings,
        })
    }

    fn body(endpoint: &Endpoint, request: &ChatRequest) -> Value {
        let messages: Vec<Value> = request
            .messages
            .iter()
            .map(|m| {
                let role = match m.speaker {
                    Speaker::System => "system",
                    Speaker::User => "user",
                    Speaker::Assistant => "assistant",
                };
                json!({ "role": role, "content": m.content })
            })
            .collect();
        json!({
            "model": endpoint.model,
            "messages": messages,
            "temperature": request.sampling.temperature,
            "max_tokens": request.sampling.max_tokens,
        })
    }

    fn attempt(&self, endpoint: &Endpoint, body: &Value) -> Result<Value, BackendError> {
        let mut call = self
            .agent
            .post(&endpoint.url)
            .header("Content-Type", "application/json");
        if let Some(key) = &endpoint.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = call.send_json(body).map_err(transport)?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(BackendError::HttpStatus(status));
        }
        let text = response.body_mut().read_to_string().map_err(transport)?;
        serde_json::from_str(&text).map_err(|e| BackendError::MalformedReply(e.to_string()))
    }
}

fn transport(e: ureq::Error) -> BackendError {
    match e {
        ureq::Error::Timeout(_) => BackendError::Timeout,
        ureq::Error::StatusCode(code) => BackendError::HttpStatus(code),
        other => BackendError::Transport(other.to_string()),
    }
}

fn retryable(e: &BackendError) -> bool {
    match e {
        BackendError::Timeout | BackendError::Transport(_) => true,
        BackendError::HttpStatus(code) => *code == 429 || *code >= 500,
        _ => false,
    }
}

/// Assistant text of the first choice in a chat-completion response.
pub fn extract_content(value: &Value) -> Result<String, BackendError> {
    value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| BackendError::MalformedReply("no choices[0].message.content".into()))
}

impl Backend for LiveBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let endpoint = &self.endpoints[&request.role];
        let body = Self::body(endpoint, request);
        let mut delay = self.settings.backoff;
        let mut attempt = 0;
        loop {
            match self.attempt(endpoint, &body) {
                Ok(value) => return extract_content(&value),
                Err(e) if retryable(&e) && attempt < self.settings.retries => {
                    attempt += 1;
                    std::thread::sleep(delay);
                    delay *= 2;
                }
                Err(e) => return Err(e),
            }
        }
    }
}
