//! OpenAI-compatible chat and embedding transports.
//!
//! Besides the HTTP client there is a canned transport that replays
//! responses keyed by a hash of the request body, and a recorder that
//! produces such fixtures from a live session.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const API_KEY_ENV: &str = "BABYLON_API_KEY";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransportError {
    #[error("http error: {0}")]
    Http(String),
    #[error("unexpected response body: {0}")]
    Body(String),
    #[error("no canned response for request {0}")]
    NoFixture(String),
    #[error("{0}")]
    Canned(String),
    #[error("fixture file: {0}")]
    Fixture(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "user".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<ChatMessage>,
}

impl ChatRequest {
    pub fn body(&self) -> String {
        serde_json::to_string(self).expect("chat request serializes")
    }

    /// Hex SHA-256 of the JSON body; the key canned fixtures are looked up by.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.body().as_bytes()))
    }
}

pub trait ChatTransport: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError>;
}

#[derive(Debug, Clone)]
pub struct HttpConfig {
    pub url: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl HttpConfig {
    pub fn new(url: impl Into<String>) -> Self {
        HttpConfig {
            url: url.into(),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            timeout: Duration::from_secs(60),
        }
    }
}

fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into()
}

fn post_json(agent: &ureq::Agent, cfg: &HttpConfig, body: String) -> Result<serde_json::Value, TransportError> {
    let mut request = agent.post(&cfg.url).header("Content-Type", "application/json");
    if let Some(key) = &cfg.api_key {
        request = request.header("Authorization", format!("Bearer {key}"));
    }
    let mut response = request
        .send(body)
        .map_err(|e| TransportError::Http(e.to_string()))?;
    let status = response.status();
    let text = response
        .body_mut()
        .read_to_string()
        .map_err(|e| TransportError::Http(e.to_string()))?;
    if !status.is_success() {
        return Err(TransportError::Http(format!("status {}: {}", status.as_u16(), text)));
    }
    serde_json::from_str(&text).map_err(|e| TransportError::Body(e.to_string()))
}

/// Chat-completions client.
pub struct HttpChat {
    cfg: HttpConfig,
    agent: ureq::Agent,
}

impl HttpChat {
    pub fn new(cfg: HttpConfig) -> Self {
        let agent = agent(cfg.timeout);
        HttpChat { cfg, agent }
    }
}

impl ChatTransport for HttpChat {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let value = post_json(&self.agent, &self.cfg, request.body())?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| TransportError::Body("missing choices[0].message.content".into()))
    }
}

/// Embeddings client: `{model, input: [text]}` → `{data: [{embedding}]}`.
pub struct HttpEmbeddings {
    cfg: HttpConfig,
    model: String,
    agent: ureq::Agent,
}

impl HttpEmbeddings {
    pub fn new(cfg: HttpConfig, model: impl Into<String>) -> Self {
        let agent = agent(cfg.timeout);
        HttpEmbeddings {
            cfg,
            model: model.into(),
            agent,
        }
    }

    pub fn embed(&self, text: &str) -> Result<Vec<f64>, TransportError> {
        let body = serde_json::json!({ "model": self.model, "input": [text] }).to_string();
        let value = post_json(&self.agent, &self.cfg, body)?;
        value["data"][0]["embedding"]
            .as_array()
            .ok_or_else(|| TransportError::Body("missing data[0].embedding".into()))?
            .iter()
            .map(|v| {
                v.as_f64()
                    .ok_or_else(|| TransportError::Body("non-numeric embedding value".into()))
            })
            .collect()
    }
}

/// One line of a canned-response fixture.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub request_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    /// Simulated transport failure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Free-form note for humans reading the fixture.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Replays responses from a JSONL fixture, keyed by request hash.
#[derive(Debug, Default)]
pub struct CannedChat {
    entries: HashMap<String, FixtureEntry>,
}

impl CannedChat {
    pub fn from_entries(entries: impl IntoIterator<Item = FixtureEntry>) -> Self {
        CannedChat {
            entries: entries
                .into_iter()
                .map(|e| (e.request_hash.clone(), e))
                .collect(),
        }
    }

    pub fn from_jsonl(path: impl AsRef<Path>) -> Result<Self, TransportError> {
        let path = path.as_ref();
        let file = fs::File::open(path)
            .map_err(|e| TransportError::Fixture(format!("{}: {e}", path.display())))?;
        let mut entries = Vec::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| TransportError::Fixture(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: FixtureEntry = serde_json::from_str(&line)
                .map_err(|e| TransportError::Fixture(format!("line {}: {e}", idx + 1)))?;
            entries.push(entry);
        }
        Ok(Self::from_entries(entries))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl ChatTransport for CannedChat {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let hash = request.hash();
        let entry = self
            .entries
            .get(&hash)
            .ok_or(TransportError::NoFixture(hash))?;
        match (&entry.response, &entry.error) {
            (_, Some(error)) => Err(TransportError::Canned(error.clone())),
            (Some(response), None) => Ok(response.clone()),
            (None, None) => Err(TransportError::Canned("empty fixture entry".into())),
        }
    }
}

/// Wraps a transport and remembers every exchange in fixture form.
pub struct RecordingChat<T> {
    inner: T,
    log: Mutex<Vec<FixtureEntry>>,
}

impl<T: ChatTransport> RecordingChat<T> {
    pub fn new(inner: T) -> Self {
        RecordingChat {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    /// Recorded entries, first occurrence of each request only.
    pub fn entries(&self) -> Vec<FixtureEntry> {
        let log = self.log.lock().expect("recording lock");
        let mut seen = std::collections::HashSet::new();
        log.iter()
            .filter(|e| seen.insert(e.request_hash.clone()))
            .cloned()
            .collect()
    }

    pub fn to_jsonl(&self) -> String {
        self.entries()
            .iter()
            .map(|e| serde_json::to_string(e).expect("fixture entry serializes") + "\n")
            .collect()
    }
}

impl<T: ChatTransport> ChatTransport for RecordingChat<T> {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let result = self.inner.complete(request);
        let note = request
            .messages
            .last()
            .and_then(|m| m.content.lines().rev().find(|l| !l.trim().is_empty()))
            .map(str::to_owned);
        let (response, error) = match &result {
            Ok(text) => (Some(text.clone()), None),
            Err(e) => (None, Some(e.to_string())),
        };
        self.log.lock().expect("recording lock").push(FixtureEntry {
            request_hash: request.hash(),
            response,
            error,
            note,
        });
        result
    }
}

/// Answers every request with the same text.
#[derive(Debug, Clone)]
pub struct EchoChat(pub String);

impl ChatTransport for EchoChat {
    fn complete(&self, _request: &ChatRequest) -> Result<String, TransportError> {
        Ok(self.0.clone())
    }
}

/// Fails every request; handy for exercising fallbacks.
#[derive(Debug, Clone, Default)]
pub struct FailingChat;

impl ChatTransport for FailingChat {
    fn complete(&self, _request: &ChatRequest) -> Result<String, TransportError> {
        Err(TransportError::Http("connection refused".into()))
    }
}

impl<T: ChatTransport + ?Sized> ChatTransport for Box<T> {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        (**self).complete(request)
    }
}

impl<T: ChatTransport + ?Sized> ChatTransport for std::sync::Arc<T> {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        (**self).complete(request)
    }
}
