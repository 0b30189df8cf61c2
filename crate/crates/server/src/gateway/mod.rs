//! Session registry and the HTTP/WebSocket front end.

pub mod protocol;
mod session;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use coregulate_core::{SessionConfig, SessionId};
use futures::{SinkExt, StreamExt};
use serde_json::{json, Value};

pub use protocol::{ClientCommand, ErrorCode, Rejection, ServerFrame};
pub use session::{ConnId, Connection, SessionHandle, SessionOptions, SessionSummary};

use crate::clock::Clock;
use crate::event_log::{log_path, Durability, LogError};
use crate::orchestrator::Orchestrator;

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub data_dir: PathBuf,
    /// Base config that create requests are merged over.
    pub defaults: SessionConfig,
    pub durability: Durability,
    pub outbound_capacity: usize,
    /// Run trigger ticks from a real-time timer. Off when tests drive the clock.
    pub auto_tick: bool,
}

impl GatewayConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_dir: data_dir.into(),
            defaults: SessionConfig::default(),
            durability: Durability::Sync,
            outbound_capacity: 4096,
            auto_tick: true,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CreateError {
    #[error("session `{0}` already exists")]
    DuplicateSession(SessionId),
    #[error("invalid session config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Log(LogError),
}

pub struct Gateway {
    config: GatewayConfig,
    orchestrator: Arc<Orchestrator>,
    clock: Arc<dyn Clock>,
    sessions: Mutex<HashMap<SessionId, SessionHandle>>,
}

impl Gateway {
    pub fn new(config: GatewayConfig, orchestrator: Arc<Orchestrator>, clock: Arc<dyn Clock>) -> Arc<Self> {
        Arc::new(Self {
            config,
            orchestrator,
            clock,
            sessions: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    /// Registers a session and creates its empty log. An empty id gets a
    /// fresh UUID. Must be called inside a Tokio runtime.
    pub fn create_session(&self, mut config: SessionConfig) -> Result<SessionHandle, CreateError> {
        if config.session_id.as_str().is_empty() {
            config.session_id = SessionId::new(uuid::Uuid::new_v4().to_string());
        }
        config.validate().map_err(|e| CreateError::BadConfig(e.to_string()))?;
        let id = config.session_id.clone();
        if id.as_str().contains(['/', '\\']) || id.as_str().starts_with('.') {
            return Err(CreateError::BadConfig("session id must be a plain file name".into()));
        }
        let mut sessions = self.sessions.lock().expect("session registry poisoned");
        if sessions.contains_key(&id) {
            return Err(CreateError::DuplicateSession(id));
        }
        let options = SessionOptions {
            log_path: log_path(&self.config.data_dir, &id),
            metrics_path: Some(self.config.data_dir.join(format!("{id}.metrics.json"))),
            durability: self.config.durability,
            outbound_capacity: self.config.outbound_capacity,
            config,
        };
        let tick_ms = options.config.trigger_params.tick_ms;
        let handle = match session::spawn_session(options, self.orchestrator.clone(), self.clock.clone()) {
            Ok(h) => h,
            Err(LogError::AlreadyExists(_)) => return Err(CreateError::DuplicateSession(id)),
            Err(e) => return Err(CreateError::Log(e)),
        };
        if self.config.auto_tick && handle.mode() == coregulate_core::Mode::Miracle {
            let ticker = handle.clone();
            tokio::spawn(async move {
                let mut interval = tokio::time::interval(Duration::from_millis(tick_ms));
                interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
                while ticker.is_open() {
                    interval.tick().await;
                    ticker.tick().await;
                }
            });
        }
        tracing::info!(session = %id, mode = ?handle.mode(), "session created");
        sessions.insert(id, handle.clone());
        Ok(handle)
    }

    /// Builds a config from a partial JSON object laid over the defaults.
    pub fn config_from_json(&self, overrides: &Value) -> Result<SessionConfig, CreateError> {
        let mut base = serde_json::to_value(&self.config.defaults).expect("configs always serialize");
        merge(&mut base, overrides);
        serde_json::from_value(base).map_err(|e| CreateError::BadConfig(e.to_string()))
    }

    pub fn session(&self, id: &SessionId) -> Option<SessionHandle> {
        self.sessions
            .lock()
            .expect("session registry poisoned")
            .get(id)
            .cloned()
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().expect("session registry poisoned").len()
    }

    pub fn router(self: Arc<Self>) -> Router {
        Router::new()
            .route("/health", get(health))
            .route("/sessions", post(create))
            .route("/sessions/{id}/transcript", get(transcript))
            .route("/sessions/{id}/close", post(close))
            .route("/sessions/{id}/ws", get(ws_upgrade))
            .with_state(self)
    }
}

/// Recursive object merge; non-object values in `patch` replace.
fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p.clone(),
    }
}

fn error(status: StatusCode, code: &str, message: impl std::fmt::Display) -> Response {
    (status, Json(json!({ "code": code, "message": message.to_string() }))).into_response()
}

async fn health(State(gw): State<Arc<Gateway>>) -> Json<Value> {
    Json(json!({ "status": "ok", "sessions": gw.session_count() }))
}

async fn create(State(gw): State<Arc<Gateway>>, body: Option<Json<Value>>) -> Response {
    let overrides = body.map_or(Value::Object(Default::default()), |Json(v)| v);
    let result = gw
        .config_from_json(&overrides)
        .and_then(|config| gw.create_session(config));
    match result {
        Ok(handle) => (
            StatusCode::CREATED,
            Json(json!({ "session_id": handle.id(), "mode": handle.mode() })),
        )
            .into_response(),
        Err(e @ CreateError::DuplicateSession(_)) => error(StatusCode::CONFLICT, "duplicate_session", e),
        Err(e @ CreateError::BadConfig(_)) => error(StatusCode::BAD_REQUEST, "validation_failed", e),
        Err(e @ CreateError::Log(_)) => error(StatusCode::INTERNAL_SERVER_ERROR, "storage", e),
    }
}

async fn transcript(State(gw): State<Arc<Gateway>>, Path(id): Path<String>) -> Response {
    let id = SessionId::new(id);
    if gw.session(&id).is_none() {
        return error(StatusCode::NOT_FOUND, "unknown_session", format!("no session `{id}`"));
    }
    match tokio::fs::read(log_path(&gw.config.data_dir, &id)).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, "application/x-ndjson")], bytes).into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "storage", e),
    }
}

async fn close(State(gw): State<Arc<Gateway>>, Path(id): Path<String>) -> Response {
    let id = SessionId::new(id);
    let Some(handle) = gw.session(&id) else {
        return error(StatusCode::NOT_FOUND, "unknown_session", format!("no session `{id}`"));
    };
    match handle.close().await {
        Some(summary) => Json(summary).into_response(),
        None => error(StatusCode::CONFLICT, "session_closed", "session already closed"),
    }
}

async fn ws_upgrade(State(gw): State<Arc<Gateway>>, Path(id): Path<String>, ws: WebSocketUpgrade) -> Response {
    let id = SessionId::new(id);
    match gw.session(&id) {
        Some(handle) if handle.is_open() => ws.on_upgrade(move |socket| serve_socket(socket, handle)),
        _ => error(
            StatusCode::NOT_FOUND,
            "unknown_session",
            format!("no open session `{id}`"),
        ),
    }
}

async fn serve_socket(socket: WebSocket, handle: SessionHandle) {
    let Some(Connection { id, mut frames }) = handle.connect().await else {
        return;
    };
    let (mut sink, mut stream) = socket.split();
    let writer = tokio::spawn(async move {
        while let Some(frame) = frames.recv().await {
            let text = serde_json::to_string(&frame).expect("frames always serialize");
            if sink.send(Message::Text(text.into())).await.is_err() {
                return;
            }
        }
        let _ = sink.close().await;
    });
    while let Some(Ok(msg)) = stream.next().await {
        match msg {
            Message::Text(text) => match serde_json::from_str::<ClientCommand>(&text) {
                Ok(cmd) => handle.submit(id, cmd).await,
                Err(e) => {
                    let rejection = Rejection {
                        command: Value::String(text.to_string()),
                        code: ErrorCode::Malformed,
                        message: e.to_string(),
                    };
                    handle.reject(id, rejection).await;
                }
            },
            Message::Close(_) => break,
            _ => {}
        }
    }
    handle.disconnect(id).await;
    let _ = writer.await;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_is_recursive() {
        let mut base = json!({"a": 1, "p": {"x": 1, "y": 2}});
        merge(&mut base, &json!({"p": {"y": 3}, "b": true}));
        assert_eq!(base, json!({"a": 1, "b": true, "p": {"x": 1, "y": 3}}));
    }
}
