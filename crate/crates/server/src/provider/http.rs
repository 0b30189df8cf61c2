//! Chat-completion client for hosted model endpoints.

use std::time::Duration;

use async_trait::async_trait;
use coregulate_core::ProviderPrompt;
use serde::{Deserialize, Serialize};

use super::{Provider, ProviderError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpProviderConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
    /// Extra attempts after a transient failure; capped at 1.
    pub retries: u32,
}

impl HttpProviderConfig {
    pub const ENV_ENDPOINT: &'static str = "COREGULATE_PROVIDER_URL";
    pub const ENV_KEY: &'static str = "COREGULATE_PROVIDER_KEY";
    pub const ENV_MODEL: &'static str = "COREGULATE_PROVIDER_MODEL";
    pub const ENV_TIMEOUT: &'static str = "COREGULATE_PROVIDER_TIMEOUT_SECS";
    pub const ENV_RETRIES: &'static str = "COREGULATE_PROVIDER_RETRIES";

    /// Reads the config from the environment. `None` if no endpoint is set.
    pub fn from_env() -> Option<Self> {
        let endpoint = std::env::var(Self::ENV_ENDPOINT).ok().filter(|s| !s.is_empty())?;
        let num = |key: &str| std::env::var(key).ok().and_then(|v| v.trim().parse::<u64>().ok());
        Some(Self {
            endpoint,
            api_key: std::env::var(Self::ENV_KEY).ok().filter(|s| !s.is_empty()),
            model: std::env::var(Self::ENV_MODEL).unwrap_or_else(|_| "gpt-4o-mini".to_owned()),
            timeout: Duration::from_secs(num(Self::ENV_TIMEOUT).unwrap_or(20)),
            retries: num(Self::ENV_RETRIES).map_or(1, |n| n.min(1) as u32),
        })
    }
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct Request<'a> {
    model: &'a str,
    messages: Vec<Message<'a>>,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct Response {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

pub struct HttpProvider {
    config: HttpProviderConfig,
    client: reqwest::Client,
}

impl HttpProvider {
    pub fn new(config: HttpProviderConfig) -> Result<Self, ProviderError> {
        let client = reqwest::Client::builder()
            .build()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        Ok(Self { config, client })
    }

    pub fn config(&self) -> &HttpProviderConfig {
        &self.config
    }

    async fn attempt(&self, body: &Request<'_>, timeout: Duration) -> Result<String, ProviderError> {
        let mut req = self.client.post(&self.config.endpoint).json(body).timeout(timeout);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().await.map_err(classify)?;
        let status = resp.status();
        if !status.is_success() {
            return Err(ProviderError::Http {
                status: status.as_u16(),
            });
        }
        let bytes = resp.bytes().await.map_err(classify)?;
        let parsed: Response = serde_json::from_slice(&bytes).map_err(|e| ProviderError::Malformed(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .map(|s| s.trim().to_owned())
            .ok_or_else(|| ProviderError::Malformed("no choices[0].message.content".to_owned()))
    }
}

fn classify(e: reqwest::Error) -> ProviderError {
    if e.is_timeout() {
        ProviderError::Timeout
    } else if e.is_decode() {
        ProviderError::Malformed(e.to_string())
    } else {
        ProviderError::Transport(e.to_string())
    }
}

#[async_trait]
impl Provider for HttpProvider {
    fn name(&self) -> &str {
        "http"
    }

    async fn complete(&self, prompt: &ProviderPrompt, timeout: Duration) -> Result<String, ProviderError> {
        let mut messages = vec![Message {
            role: "system",
            content: &prompt.system,
        }];
        messages.extend(prompt.user_turns.iter().map(|t| Message {
            role: &t.role,
            content: &t.text,
        }));
        let body = Request {
            model: &self.config.model,
            messages,
            max_tokens: prompt.max_tokens,
        };
        let mut remaining = self.config.retries.min(1);
        loop {
            match self.attempt(&body, timeout).await {
                Err(e) if e.is_transient() && remaining > 0 => {
                    tracing::debug!(error = %e, "retrying provider call");
                    remaining -= 1;
                }
                other => return other,
            }
        }
    }
}
