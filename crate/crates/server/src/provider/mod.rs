//! Text-generation backends.
//!
//! Only this module talks to a model backend. Failures are returned as
//! values; callers decide on fallbacks.

mod http;
mod mock;
mod recording;

use std::time::Duration;

use async_trait::async_trait;
use coregulate_core::ProviderPrompt;

pub use http::{HttpProvider, HttpProviderConfig};
pub use mock::{Fault, MockProvider};
pub use recording::RecordingProvider;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    #[error("provider timed out")]
    Timeout,
    #[error("provider returned HTTP {status}")]
    Http { status: u16 },
    #[error("unparseable provider response: {0}")]
    Malformed(String),
    #[error("provider unreachable: {0}")]
    Transport(String),
}

impl ProviderError {
    /// Worth one more attempt.
    pub fn is_transient(&self) -> bool {
        match self {
            ProviderError::Http { status } => *status == 429 || *status >= 500,
            ProviderError::Transport(_) => true,
            ProviderError::Timeout | ProviderError::Malformed(_) => false,
        }
    }
}

#[async_trait]
pub trait Provider: Send + Sync {
    fn name(&self) -> &str;

    /// Produces a completion within roughly `timeout` per attempt.
    async fn complete(&self, prompt: &ProviderPrompt, timeout: Duration) -> Result<String, ProviderError>;

    /// Whether identical prompts always produce identical output.
    fn is_deterministic(&self) -> bool {
        false
    }
}
