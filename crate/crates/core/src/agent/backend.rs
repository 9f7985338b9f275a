// SPDX-License-Identifier: Apache-2.0

//! Backends: an OpenAI-compatible chat-completions client and a fixture
//! driven mock.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{AgentError, AgentPrompt, AgentResponse, LlmBackend, TokenUsage};

pub const DEFAULT_API_KEY_ENV: &str = "UVMFORGE_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model_id: Option<String>,
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    #[serde(default)]
    pub fixture_dir: Option<PathBuf>,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: f64,
    /// First backoff delay; doubles on every retry.
    #[serde(default = "default_retry_base_ms")]
    pub retry_base_ms: u64,
}

fn default_api_key_env() -> String {
    DEFAULT_API_KEY_ENV.into()
}

fn default_max_retries() -> u32 {
    3
}

fn default_timeout_s() -> f64 {
    120.0
}

fn default_retry_base_ms() -> u64 {
    500
}

impl BackendConfig {
    pub fn mock(fixture_dir: impl Into<PathBuf>) -> Self {
        BackendConfig {
            kind: BackendKind::Mock,
            endpoint: None,
            model_id: None,
            api_key_env: default_api_key_env(),
            fixture_dir: Some(fixture_dir.into()),
            max_retries: default_max_retries(),
            timeout_s: default_timeout_s(),
            retry_base_ms: default_retry_base_ms(),
        }
    }

    pub fn http(endpoint: impl Into<String>, model_id: impl Into<String>) -> Self {
        BackendConfig {
            kind: BackendKind::Http,
            endpoint: Some(endpoint.into()),
            model_id: Some(model_id.into()),
            fixture_dir: None,
            ..BackendConfig::mock(PathBuf::new())
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        match self.kind {
            BackendKind::Http => {
                if self.endpoint.as_deref().is_none_or(str::is_empty) {
                    return Err(AgentError::InvalidBackendConfig(
                        "http backend needs an endpoint".into(),
                    ));
                }
                if self.model_id.as_deref().is_none_or(str::is_empty) {
                    return Err(AgentError::InvalidBackendConfig("http backend needs a model_id".into()));
                }
                if !(self.timeout_s > 0.0 && self.timeout_s.is_finite()) {
                    return Err(AgentError::InvalidBackendConfig("timeout_s must be positive".into()));
                }
            }
            BackendKind::Mock => {
                if self.fixture_dir.is_none() {
                    return Err(AgentError::InvalidBackendConfig(
                        "mock backend needs a fixture_dir".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Builds the backend a configuration describes.
pub fn connect(cfg: &BackendConfig) -> Result<Box<dyn LlmBackend>, AgentError> {
    cfg.validate()?;
    Ok(match cfg.kind {
        BackendKind::Mock => Box::new(MockBackend::new(cfg.fixture_dir.clone().unwrap_or_default())),
        BackendKind::Http => Box::new(HttpBackend::new(cfg.clone(), ReqwestTransport::new()?)?),
    })
}

/// One-shot call through a freshly built backend.
pub fn invoke(cfg: &BackendConfig, prompt: &AgentPrompt) -> Result<AgentResponse, AgentError> {
    connect(cfg)?.invoke(prompt)
}

/// Replays canned responses from `<fixture_dir>/<role>-<digest>.txt`.
///
/// When no digest-specific fixture exists, `<fixture_dir>/<role>.txt` is
/// used as the role's default response.
#[derive(Debug, Clone)]
pub struct MockBackend {
    fixture_dir: PathBuf,
}

impl MockBackend {
    pub fn new(fixture_dir: impl Into<PathBuf>) -> Self {
        MockBackend {
            fixture_dir: fixture_dir.into(),
        }
    }

    pub fn fixture_key(prompt: &AgentPrompt) -> String {
        format!("{}-{}", prompt.role.slug(), prompt.digest())
    }
}

impl LlmBackend for MockBackend {
    fn invoke(&self, prompt: &AgentPrompt) -> Result<AgentResponse, AgentError> {
        let key = Self::fixture_key(prompt);
        let exact = self.fixture_dir.join(format!("{key}.txt"));
        let fallback = self.fixture_dir.join(format!("{}.txt", prompt.role.slug()));
        let path = if exact.is_file() {
            exact
        } else if fallback.is_file() {
            fallback
        } else {
            return Err(AgentError::MockFixtureMissing {
                key,
                dir: self.fixture_dir.display().to_string(),
            });
        };
        let raw = std::fs::read_to_string(&path).map_err(|source| AgentError::MockFixtureUnreadable {
            path: path.display().to_string(),
            source,
        })?;
        Ok(AgentResponse::from_text(raw, TokenUsage::default(), 0))
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum TransportError {
    #[error("timed out: {0}")]
    Timeout(String),
    #[error("connection failed: {0}")]
    Connect(String),
    #[error("{0}")]
    Other(String),
}

/// Minimal HTTP surface the chat client needs; swapped out in tests.
pub trait Transport: Send + Sync {
    /// POSTs `body` and returns `(status, response body)`.
    fn post_json(
        &self,
        url: &str,
        bearer: &str,
        body: &Value,
        timeout: Duration,
    ) -> Result<(u16, String), TransportError>;
}

pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new() -> Result<Self, AgentError> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| AgentError::InvalidBackendConfig(format!("http client: {e}")))?;
        Ok(ReqwestTransport { client })
    }
}

impl Transport for ReqwestTransport {
    fn post_json(
        &self,
        url: &str,
        bearer: &str,
        body: &Value,
        timeout: Duration,
    ) -> Result<(u16, String), TransportError> {
        let resp = self
            .client
            .post(url)
            .bearer_auth(bearer)
            .timeout(timeout)
            .json(body)
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    TransportError::Timeout(e.to_string())
                } else if e.is_connect() {
                    TransportError::Connect(e.to_string())
                } else {
                    TransportError::Other(e.to_string())
                }
            })?;
        let status = resp.status().as_u16();
        let text = resp.text().map_err(|e| TransportError::Other(e.to_string()))?;
        Ok((status, text))
    }
}

fn is_retryable_status(status: u16) -> bool {
    matches!(status, 408 | 429 | 500 | 502 | 503 | 504)
}

/// Chat-completions client. The role customisation stage becomes the system
/// message, the remaining stages the user message.
pub struct HttpBackend<T: Transport = ReqwestTransport> {
    cfg: BackendConfig,
    transport: T,
}

impl<T: Transport> HttpBackend<T> {
    pub fn new(cfg: BackendConfig, transport: T) -> Result<Self, AgentError> {
        cfg.validate()?;
        if cfg.kind != BackendKind::Http {
            return Err(AgentError::InvalidBackendConfig(
                "expected an http backend config".into(),
            ));
        }
        Ok(HttpBackend { cfg, transport })
    }

    pub fn request_body(&self, prompt: &AgentPrompt) -> Value {
        json!({
            "model": self.cfg.model_id,
            "temperature": prompt.temperature,
            "stream": false,
            "messages": [
                {"role": "system", "content": prompt.system_message()},
                {"role": "user", "content": prompt.user_message()},
            ],
        })
    }

    fn backoff(&self, retry: u32) -> Duration {
        let ms = self.cfg.retry_base_ms.saturating_mul(1u64 << retry.min(16)).min(30_000);
        Duration::from_millis(ms)
    }
}

impl<T: Transport> LlmBackend for HttpBackend<T> {
    fn invoke(&self, prompt: &AgentPrompt) -> Result<AgentResponse, AgentError> {
        let key = std::env::var(&self.cfg.api_key_env)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| AgentError::AuthMissing(self.cfg.api_key_env.clone()))?;
        let url = self.cfg.endpoint.clone().unwrap_or_default();
        let body = self.request_body(prompt);
        let timeout = Duration::from_secs_f64(self.cfg.timeout_s);

        let started = Instant::now();
        let mut attempts = 0u32;
        let mut last_error = String::new();
        while attempts <= self.cfg.max_retries {
            if attempts > 0 {
                std::thread::sleep(self.backoff(attempts - 1));
            }
            attempts += 1;
            match self.transport.post_json(&url, &key, &body, timeout) {
                Ok((200..=299, text)) => {
                    let latency_ms = started.elapsed().as_millis() as u64;
                    return parse_chat_response(&text, latency_ms);
                }
                Ok((status, text)) if is_retryable_status(status) => {
                    log::warn!("backend returned HTTP {status} (attempt {attempts})");
                    last_error = format!("HTTP {status}: {}", truncate(&text, 200));
                }
                Ok((status, text)) => {
                    return Err(AgentError::BackendRejected {
                        status,
                        body: truncate(&text, 500),
                    })
                }
                Err(TransportError::Other(msg)) => {
                    return Err(AgentError::BackendUnreachable {
                        attempts,
                        last_error: msg,
                    })
                }
                Err(e) => {
                    log::warn!("backend transport error (attempt {attempts}): {e}");
                    last_error = e.to_string();
                }
            }
        }
        Err(AgentError::BackendUnreachable { attempts, last_error })
    }
}

fn truncate(s: &str, max: usize) -> String {
    match s.char_indices().nth(max) {
        Some((i, _)) => format!("{}...", &s[..i]),
        None => s.to_string(),
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
    #[serde(default)]
    usage: Option<ChatUsage>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct ChatUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

fn parse_chat_response(text: &str, latency_ms: u64) -> Result<AgentResponse, AgentError> {
    let resp: ChatResponse = serde_json::from_str(text).map_err(|e| AgentError::MalformedResponse(e.to_string()))?;
    let content = resp
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .ok_or_else(|| AgentError::MalformedResponse("response has no message content".into()))?;
    let usage = resp
        .usage
        .map(|u| TokenUsage {
            prompt: u.prompt_tokens,
            completion: u.completion_tokens,
        })
        .unwrap_or_default();
    Ok(AgentResponse::from_text(content, usage, latency_ms))
}
