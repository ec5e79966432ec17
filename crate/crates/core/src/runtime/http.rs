//! Remote policy over the OpenAI-compatible chat-completions protocol.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

use super::policy::{GenerationRequest, PolicyClient, PolicyError};

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "ACTIONKB_API_KEY";
/// Fallback token variable.
pub const OPENAI_KEY_ENV: &str = "OPENAI_API_KEY";
/// Environment variable naming the model when none is configured.
pub const MODEL_ENV: &str = "ACTIONKB_MODEL";

#[derive(Debug, Clone, PartialEq)]
pub struct HttpPolicyConfig {
    /// Base URL such as `http://localhost:8000/v1`, or the full
    /// `.../chat/completions` endpoint.
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    /// Extra attempts after a transport error or a 429/5xx response.
    pub transport_retries: u32,
    pub backoff: Duration,
}

impl HttpPolicyConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: None,
            timeout: Duration::from_secs(60),
            transport_retries: 2,
            backoff: Duration::from_millis(250),
        }
    }

    /// Fill the key from the environment and, if empty, the model.
    pub fn from_env(mut self) -> Self {
        if self.api_key.is_none() {
            self.api_key = std::env::var(API_KEY_ENV)
                .or_else(|_| std::env::var(OPENAI_KEY_ENV))
                .ok();
        }
        if self.model.is_empty() {
            self.model = std::env::var(MODEL_ENV).unwrap_or_default();
        }
        self
    }

    fn url(&self) -> String {
        let base = self.endpoint.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
    #[serde(skip_serializing_if = "<[String]>::is_empty")]
    stop: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

pub struct HttpPolicy {
    config: HttpPolicyConfig,
    client: reqwest::blocking::Client,
}

impl HttpPolicy {
    pub fn new(config: HttpPolicyConfig) -> Result<Self, PolicyError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| PolicyError::Unavailable(e.to_string()))?;
        Ok(Self { config, client })
    }

    pub fn config(&self) -> &HttpPolicyConfig {
        &self.config
    }

    fn attempt(&self, body: &ChatRequest<'_>) -> Result<String, (bool, PolicyError)> {
        let mut req = self.client.post(self.config.url()).json(body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .map_err(|e| (true, PolicyError::Unavailable(e.to_string())))?;
        let status = resp.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err((true, PolicyError::Unavailable(format!("HTTP {status}"))));
        }
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err((false, PolicyError::Protocol(format!("HTTP {status}: {}", text.trim()))));
        }
        let parsed: ChatResponse = resp
            .json()
            .map_err(|e| (false, PolicyError::Protocol(format!("bad response body: {e}"))))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or((false, PolicyError::Protocol("response has no message content".into())))
    }
}

impl PolicyClient for HttpPolicy {
    fn identifier(&self) -> &str {
        &self.config.model
    }

    fn generate(&self, request: &GenerationRequest) -> Result<String, PolicyError> {
        let body = ChatRequest {
            model: &self.config.model,
            messages: vec![ChatMessage {
                role: "user",
                content: &request.prompt,
            }],
            temperature: request.sampling.temperature,
            max_tokens: request.sampling.max_tokens,
            stop: &request.stop,
            seed: request.sampling.seed,
        };
        let mut tries = 0;
        loop {
            match self.attempt(&body) {
                Ok(text) => {
                    debug!(task = %request.task_id, call = request.call_index, "policy answered");
                    return Ok(text);
                }
                Err((retryable, err)) if retryable && tries < self.config.transport_retries => {
                    tries += 1;
                    warn!(attempt = tries, error = %err, "retrying policy call");
                    thread::sleep(self.config.backoff * tries);
                }
                Err((_, err)) => return Err(err),
            }
        }
    }
}
