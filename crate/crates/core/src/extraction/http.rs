use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

use super::{BackendError, BackendKind, BackendOutput, ExtractorBackend};
use crate::ingest::SourceDocument;
use crate::schema::Schema;

#[derive(Debug, Clone, PartialEq)]
pub struct HttpChatConfig {
    pub base_url: String,
    pub model: String,
    pub timeout: Duration,
    /// Transport attempts per request, including the first.
    pub attempts: u32,
}

impl HttpChatConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        HttpChatConfig {
            base_url: base_url.into(),
            model: model.into(),
            timeout: Duration::from_secs(120),
            attempts: 3,
        }
    }
}

/// Client for a local inference server speaking a chat-completion protocol:
/// `POST {base_url}/api/chat` with `{model, messages, format}`, reply text in
/// `message.content`.
#[derive(Debug, Clone)]
pub struct HttpChatBackend {
    config: HttpChatConfig,
    name: String,
    client: reqwest::blocking::Client,
}

impl HttpChatBackend {
    pub fn new(config: HttpChatConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::Unreachable(e.to_string()))?;
        Ok(HttpChatBackend {
            name: format!("llm_http:{}", config.model),
            config,
            client,
        })
    }

    pub fn endpoint(&self) -> String {
        format!("{}/api/chat", self.config.base_url.trim_end_matches('/'))
    }

    fn send(&self, prompt: &str) -> Result<String, String> {
        let body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "format": "structured",
        });
        let response = self
            .client
            .post(self.endpoint())
            .header("content-type", "application/json")
            .body(body.to_string())
            .send()
            .map_err(|e| e.to_string())?;
        let status = response.status();
        let text = response.text().map_err(|e| e.to_string())?;
        if status.is_server_error() {
            return Err(format!("server error {status}"));
        }
        // A malformed envelope is handed on as the reply so it goes through
        // the normal unparseable-output path.
        let content = serde_json::from_str::<Value>(&text)
            .ok()
            .and_then(|v| v.pointer("/message/content").and_then(Value::as_str).map(str::to_string));
        Ok(content.unwrap_or(text))
    }
}

impl ExtractorBackend for HttpChatBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn kind(&self) -> BackendKind {
        BackendKind::LlmHttp
    }

    fn run(&self, _: &SourceDocument, _: &Schema, prompt: Option<&str>) -> Result<BackendOutput, BackendError> {
        let prompt = prompt.unwrap_or_default();
        let mut last = String::new();
        for attempt in 0..self.config.attempts.max(1) {
            if attempt > 0 {
                thread::sleep(Duration::from_millis(200 << attempt.min(4)));
            }
            match self.send(prompt) {
                Ok(reply) => return Ok(BackendOutput::Reply(reply)),
                Err(e) => {
                    log::warn!("inference request to {} failed: {e}", self.endpoint());
                    last = e;
                }
            }
        }
        Err(BackendError::Unreachable(last))
    }
}
