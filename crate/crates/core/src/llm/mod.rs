// SPDX-License-Identifier: Apache-2.0

//! Chat-completion abstraction, prompt templates and reply post-processing.

mod extract;
pub mod prompts;

pub use extract::{
    extract_code_block, parse_json_points, FunctionPoint, MalformedJson, NoCodeFound, PointRecord, TestCase,
};
pub use prompts::{render, PromptName, UnfilledPlaceholder};

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Message { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Message { role: Role::Assistant, content: content.into() }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Message { role: Role::System, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Forwarded only when set.
    pub top_p: Option<f64>,
    pub top_k: Option<u32>,
}

impl ChatRequest {
    pub fn new(messages: Vec<Message>, temperature: f64, max_tokens: u32) -> Self {
        ChatRequest { messages, temperature, max_tokens, top_p: None, top_k: None }
    }

    pub fn validate(&self) -> Result<(), ChatError> {
        if !self.messages.iter().any(|m| m.role == Role::User) {
            return Err(ChatError::InvalidRequest("no user message"));
        }
        if self.max_tokens == 0 {
            return Err(ChatError::InvalidRequest("max_tokens is zero"));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(ChatError::InvalidRequest("temperature must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChatError {
    Transport(String),
    RateLimited {
        retry_after_secs: Option<u64>,
    },
    /// The endpoint answered but not with a usable reply.
    BadResponse(String),
    InvalidRequest(&'static str),
    ScriptExhausted,
}

impl ChatError {
    /// Whether [`Retrying`] should try again.
    pub fn is_transient(&self) -> bool {
        matches!(self, ChatError::Transport(_))
    }
}

impl fmt::Display for ChatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChatError::Transport(e) => write!(f, "transport error: {e}"),
            ChatError::RateLimited { retry_after_secs: Some(s) } => write!(f, "rate limited, retry after {s}s"),
            ChatError::RateLimited { retry_after_secs: None } => f.write_str("rate limited"),
            ChatError::BadResponse(e) => write!(f, "bad response: {e}"),
            ChatError::InvalidRequest(e) => write!(f, "invalid request: {e}"),
            ChatError::ScriptExhausted => f.write_str("chat script exhausted"),
        }
    }
}

impl core::error::Error for ChatError {}

pub trait ChatBackend {
    /// Returns the assistant text.
    fn complete(&mut self, req: &ChatRequest) -> Result<String, ChatError>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for &mut B {
    fn complete(&mut self, req: &ChatRequest) -> Result<String, ChatError> {
        (**self).complete(req)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for alloc::boxed::Box<B> {
    fn complete(&mut self, req: &ChatRequest) -> Result<String, ChatError> {
        (**self).complete(req)
    }
}

/// Retries transient transport failures up to `retries` extra times,
/// calling `backoff(attempt)` (1-based) before each retry.
pub struct Retrying<B, S> {
    pub inner: B,
    pub retries: u32,
    backoff: S,
}

impl<B: ChatBackend, S: FnMut(u32)> Retrying<B, S> {
    pub fn new(inner: B, retries: u32, backoff: S) -> Self {
        Retrying { inner, retries, backoff }
    }
}

impl<B: ChatBackend, S: FnMut(u32)> ChatBackend for Retrying<B, S> {
    fn complete(&mut self, req: &ChatRequest) -> Result<String, ChatError> {
        let mut attempt = 0;
        loop {
            match self.inner.complete(req) {
                Err(e) if e.is_transient() && attempt < self.retries => {
                    attempt += 1;
                    (self.backoff)(attempt);
                }
                other => return other,
            }
        }
    }
}

/// Replays canned replies in order and keeps every request it saw.
#[derive(Debug, Clone, Default)]
pub struct ScriptedChat {
    replies: VecDeque<Result<String, ChatError>>,
    pub requests: Vec<ChatRequest>,
}

impl ScriptedChat {
    pub fn new(replies: impl IntoIterator<Item = Result<String, ChatError>>) -> Self {
        ScriptedChat { replies: replies.into_iter().collect(), requests: Vec::new() }
    }

    pub fn from_texts<S: Into<String>>(texts: impl IntoIterator<Item = S>) -> Self {
        Self::new(texts.into_iter().map(|t| Ok(t.into())))
    }

    pub fn calls(&self) -> usize {
        self.requests.len()
    }

    pub fn remaining(&self) -> usize {
        self.replies.len()
    }
}

impl ChatBackend for ScriptedChat {
    fn complete(&mut self, req: &ChatRequest) -> Result<String, ChatError> {
        req.validate()?;
        self.requests.push(req.clone());
        self.replies.pop_front().unwrap_or(Err(ChatError::ScriptExhausted))
    }
}
