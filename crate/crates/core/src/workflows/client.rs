//! Chat-endpoint client interface for the examination workflows: an HTTP
//! adapter for a JSON chat-completions wire format, and a scripted client
//! that replays fixture responses keyed by prompt digest for offline runs.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, VecDeque};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("chat endpoint unreachable: {0}")]
    Transport(String),
    #[error("chat endpoint returned status {0}")]
    Status(u16),
    #[error("malformed chat response: {0}")]
    Malformed(String),
    #[error("no scripted response for {kind} call with digest {digest}")]
    NoScript { kind: String, digest: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: "system".to_string(), content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: "user".to_string(), content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: "assistant".to_string(), content: content.into() }
    }
}

/// Structured-output contract for one call: a stable name identifying the
/// call kind plus a JSON Schema for the endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSchema {
    pub name: String,
    pub schema: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// One completed structured call.
#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub value: Value,
    pub usage: Usage,
}

pub trait ExaminerClient: Sync {
    fn complete(
        &self,
        messages: &[ChatMessage],
        schema: &OutputSchema,
        temperature: f64,
        seed: u64,
    ) -> Result<Completion, ClientError>;
}

/// Canonical digest of a prompt: sha256 over `role:content` lines.
pub fn prompt_digest(messages: &[ChatMessage]) -> String {
    let mut hasher = Sha256::new();
    for m in messages {
        hasher.update(m.role.as_bytes());
        hasher.update(b":");
        hasher.update(m.content.as_bytes());
        hasher.update(b"\n");
    }
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn approximate_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

/// Fixture-driven client. Responses resolve in order: exact prompt digest,
/// then a queued per-kind sequence, then a per-kind default. Token usage is
/// approximated by whitespace word counts so traces stay deterministic.
#[derive(Default)]
pub struct ScriptedClient {
    by_digest: BTreeMap<String, Value>,
    sequences: Mutex<BTreeMap<String, VecDeque<Value>>>,
    default_by_kind: BTreeMap<String, Value>,
    calls: AtomicUsize,
}

/// On-disk fixture shape for [`ScriptedClient::from_file`].
#[derive(Debug, Default, Serialize, Deserialize)]
pub struct ScriptFixture {
    #[serde(default)]
    pub by_digest: BTreeMap<String, Value>,
    #[serde(default)]
    pub sequences: BTreeMap<String, Vec<Value>>,
    #[serde(default)]
    pub default_by_kind: BTreeMap<String, Value>,
}

impl ScriptedClient {
    pub fn new() -> Self {
        ScriptedClient::default()
    }

    pub fn from_fixture(fixture: ScriptFixture) -> Self {
        ScriptedClient {
            by_digest: fixture.by_digest,
            sequences: Mutex::new(
                fixture.sequences.into_iter().map(|(k, v)| (k, v.into())).collect(),
            ),
            default_by_kind: fixture.default_by_kind,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, ClientError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| ClientError::Transport(format!("{}: {e}", path.display())))?;
        let fixture: ScriptFixture =
            serde_json::from_str(&raw).map_err(|e| ClientError::Malformed(e.to_string()))?;
        Ok(ScriptedClient::from_fixture(fixture))
    }

    pub fn with_response(mut self, digest: impl Into<String>, value: Value) -> Self {
        self.by_digest.insert(digest.into(), value);
        self
    }

    /// Queues responses consumed first-to-last by calls of one kind.
    pub fn with_kind_sequence(self, kind: impl Into<String>, values: Vec<Value>) -> Self {
        self.sequences.lock().unwrap().insert(kind.into(), values.into());
        self
    }

    pub fn with_default(mut self, kind: impl Into<String>, value: Value) -> Self {
        self.default_by_kind.insert(kind.into(), value);
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl ExaminerClient for ScriptedClient {
    fn complete(
        &self,
        messages: &[ChatMessage],
        schema: &OutputSchema,
        _temperature: f64,
        _seed: u64,
    ) -> Result<Completion, ClientError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let digest = prompt_digest(messages);
        let value = if let Some(v) = self.by_digest.get(&digest) {
            v.clone()
        } else if let Some(v) = self
            .sequences
            .lock()
            .unwrap()
            .get_mut(&schema.name)
            .and_then(|queue| queue.pop_front())
        {
            v
        } else if let Some(v) = self.default_by_kind.get(&schema.name) {
            v.clone()
        } else {
            return Err(ClientError::NoScript { kind: schema.name.clone(), digest });
        };
        let prompt_tokens: u64 = messages.iter().map(|m| approximate_tokens(&m.content)).sum();
        let completion_tokens = approximate_tokens(&value.to_string());
        Ok(Completion { value, usage: Usage { prompt_tokens, completion_tokens } })
    }
}

#[derive(Serialize)]
struct WireChatRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    seed: u64,
    response_format: WireResponseFormat<'a>,
}

#[derive(Serialize)]
struct WireResponseFormat<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    json_schema: &'a OutputSchema,
}

#[derive(Deserialize)]
struct WireChatResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: String,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

/// Client for a JSON chat-completions endpoint with structured output:
/// POST `{model, messages, temperature, seed, response_format}`, answered by
/// `{choices: [{message: {content}}], usage}` where content is a JSON
/// document. Transport faults, 429 and 5xx responses are retried with
/// exponential backoff.
pub struct HttpChatClient {
    agent: ureq::Agent,
    url: String,
    model: String,
    api_key: Option<String>,
    attempts: u32,
    backoff: Duration,
}

impl HttpChatClient {
    pub fn new(url: impl Into<String>, model: impl Into<String>) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(600)))
            .build();
        HttpChatClient {
            agent: config.into(),
            url: url.into(),
            model: model.into(),
            api_key: None,
            attempts: 3,
            backoff: Duration::from_millis(500),
        }
    }

    pub fn with_api_key(mut self, key: impl Into<String>) -> Self {
        self.api_key = Some(key.into());
        self
    }

    pub fn with_attempts(mut self, attempts: u32, backoff: Duration) -> Self {
        self.attempts = attempts.max(1);
        self.backoff = backoff;
        self
    }

    fn request_once(
        &self,
        messages: &[ChatMessage],
        schema: &OutputSchema,
        temperature: f64,
        seed: u64,
    ) -> Result<Completion, ClientError> {
        let mut request = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            request = request.header("authorization", &format!("Bearer {key}"));
        }
        let body = WireChatRequest {
            model: &self.model,
            messages,
            temperature,
            seed,
            response_format: WireResponseFormat { kind: "json_schema", json_schema: schema },
        };
        let mut response = request.send_json(&body).map_err(classify_ureq_error)?;
        let parsed: WireChatResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| ClientError::Malformed(e.to_string()))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| ClientError::Malformed("no choices in response".to_string()))?;
        let value: Value = serde_json::from_str(&choice.message.content)
            .map_err(|e| ClientError::Malformed(format!("content is not JSON: {e}")))?;
        let usage = parsed
            .usage
            .map(|u| Usage { prompt_tokens: u.prompt_tokens, completion_tokens: u.completion_tokens })
            .unwrap_or_default();
        Ok(Completion { value, usage })
    }
}

fn classify_ureq_error(error: ureq::Error) -> ClientError {
    match error {
        ureq::Error::StatusCode(code) => ClientError::Status(code),
        other => ClientError::Transport(other.to_string()),
    }
}

fn is_retryable(error: &ClientError) -> bool {
    match error {
        ClientError::Transport(_) => true,
        ClientError::Status(code) => *code == 429 || *code >= 500,
        _ => false,
    }
}

impl ExaminerClient for HttpChatClient {
    fn complete(
        &self,
        messages: &[ChatMessage],
        schema: &OutputSchema,
        temperature: f64,
        seed: u64,
    ) -> Result<Completion, ClientError> {
        let mut delay = self.backoff;
        let mut last = None;
        for attempt in 0..self.attempts {
            match self.request_once(messages, schema, temperature, seed) {
                Ok(completion) => return Ok(completion),
                Err(e) if is_retryable(&e) && attempt + 1 < self.attempts => {
                    std::thread::sleep(delay);
                    delay *= 2;
                    last = Some(e);
                }
                Err(e) => return Err(e),
            }
        }
        Err(last.expect("at least one attempt runs"))
    }
}
