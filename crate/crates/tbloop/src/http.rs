// SPDX-License-Identifier: Apache-2.0

//! Chat-completions client over HTTP.

use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::{json, Value};
use tbloop_core::llm::{ChatBackend, ChatError, ChatRequest, Retrying};

use crate::config::LlmConfig;

/// Speaks the widely used `/v1/chat/completions` JSON protocol.
#[derive(Debug, Clone)]
pub struct HttpChatClient {
    client: Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
}

impl HttpChatClient {
    /// The key is read from the environment variable named in the config, never from the file.
    pub fn from_config(cfg: &LlmConfig) -> Result<Self, ChatError> {
        let api_key = std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty());
        if api_key.is_none() {
            log::warn!("{} is not set; sending requests without authorization", cfg.api_key_env);
        }
        Self::new(&cfg.endpoint, &cfg.model, api_key, Duration::from_secs(cfg.request_timeout_secs))
    }

    pub fn new(endpoint: &str, model: &str, api_key: Option<String>, timeout: Duration) -> Result<Self, ChatError> {
        let client = Client::builder().timeout(timeout).build().map_err(|e| ChatError::Transport(e.to_string()))?;
        Ok(HttpChatClient { client, endpoint: endpoint.into(), model: model.into(), api_key })
    }

    fn body(&self, req: &ChatRequest) -> Value {
        let messages: Vec<Value> =
            req.messages.iter().map(|m| json!({"role": m.role.as_str(), "content": m.content})).collect();
        let mut body = json!({
            "model": self.model,
            "messages": messages,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        if let Some(p) = req.top_p {
            body["top_p"] = json!(p);
        }
        if let Some(k) = req.top_k {
            body["top_k"] = json!(k);
        }
        body
    }
}

fn reply_text(v: &Value) -> Option<String> {
    v.get("choices")?.get(0)?.get("message")?.get("content")?.as_str().map(str::to_owned)
}

impl ChatBackend for HttpChatClient {
    fn complete(&mut self, req: &ChatRequest) -> Result<String, ChatError> {
        req.validate()?;
        let mut builder = self.client.post(&self.endpoint).json(&self.body(req));
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let resp = builder.send().map_err(|e| ChatError::Transport(e.to_string()))?;
        let status = resp.status();
        if status == StatusCode::TOO_MANY_REQUESTS {
            let retry_after_secs = resp
                .headers()
                .get(reqwest::header::RETRY_AFTER)
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse().ok());
            return Err(ChatError::RateLimited { retry_after_secs });
        }
        if status.is_server_error() {
            return Err(ChatError::Transport(format!("server returned {status}")));
        }
        let text = resp.text().map_err(|e| ChatError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(ChatError::BadResponse(format!("{status}: {}", text.chars().take(500).collect::<String>())));
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| ChatError::BadResponse(e.to_string()))?;
        reply_text(&v).ok_or_else(|| ChatError::BadResponse("no choices[0].message.content".into()))
    }
}

/// Exponential backoff with a sleeping thread: `base`, `2 * base`, `4 * base`, ...
pub fn with_retries<B: ChatBackend>(inner: B, retries: u32, base: Duration) -> Retrying<B, impl FnMut(u32)> {
    Retrying::new(inner, retries, move |attempt| {
        let factor = 1u32 << (attempt - 1).min(10);
        std::thread::sleep(base * factor);
    })
}
