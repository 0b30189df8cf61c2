//! Wraps a provider and appends every exchange to a JSONL file.
//!
//! For demos only; the recorded output of a live model is not reproducible.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use async_trait::async_trait;
use coregulate_core::ProviderPrompt;
use serde::Serialize;

use super::{Provider, ProviderError};

pub struct RecordingProvider<P> {
    inner: P,
    sink: Mutex<File>,
}

#[derive(Serialize)]
struct Record<'a> {
    provider: &'a str,
    prompt: &'a ProviderPrompt,
    #[serde(skip_serializing_if = "Option::is_none")]
    response: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

impl<P: Provider> RecordingProvider<P> {
    pub fn new(inner: P, path: &Path) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            inner,
            sink: Mutex::new(file),
        })
    }
}

#[async_trait]
impl<P: Provider> Provider for RecordingProvider<P> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    async fn complete(&self, prompt: &ProviderPrompt, timeout: Duration) -> Result<String, ProviderError> {
        let result = self.inner.complete(prompt, timeout).await;
        let record = Record {
            provider: self.inner.name(),
            prompt,
            response: result.as_ref().ok().map(String::as_str),
            error: result.as_ref().err().map(ToString::to_string),
        };
        let mut line = serde_json::to_string(&record).expect("records always serialize");
        line.push('\n');
        if let Err(e) = self
            .sink
            .lock()
            .expect("recording sink poisoned")
            .write_all(line.as_bytes())
        {
            tracing::warn!(error = %e, "could not record provider exchange");
        }
        result
    }

    fn is_deterministic(&self) -> bool {
        self.inner.is_deterministic()
    }
}
