//! JSON frames exchanged with clients over the session socket.
//!
//! Both directions use the log's `{"type": ..., "data": ...}` shape.

use coregulate_core::session::{NoteKind, Position};
use coregulate_core::{ApplyError, LinkId, NoteId, ParticipantId, SessionEvent, SessionState};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "data", rename_all = "snake_case")]
pub enum ClientCommand {
    Join {
        display_name: String,
    },
    Chat {
        body: String,
    },
    NoteCreate {
        #[serde(default)]
        kind: NoteKind,
        content: String,
        #[serde(default)]
        position: Position,
    },
    NoteUpdate {
        note_id: NoteId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        content: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        position: Option<Position>,
    },
    NoteDelete {
        note_id: NoteId,
    },
    LinkCreate {
        #[serde(alias = "from")]
        from_note: NoteId,
        #[serde(alias = "to")]
        to_note: NoteId,
    },
    LinkDelete {
        link_id: LinkId,
    },
    LightbulbAck,
}

impl ClientCommand {
    pub fn type_name(&self) -> &'static str {
        match self {
            ClientCommand::Join { .. } => "join",
            ClientCommand::Chat { .. } => "chat",
            ClientCommand::NoteCreate { .. } => "note_create",
            ClientCommand::NoteUpdate { .. } => "note_update",
            ClientCommand::NoteDelete { .. } => "note_delete",
            ClientCommand::LinkCreate { .. } => "link_create",
            ClientCommand::LinkDelete { .. } => "link_delete",
            ClientCommand::LightbulbAck => "lightbulb_ack",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    SessionFull,
    NotJoined,
    UnknownReference,
    ValidationFailed,
    AckWhileIdle,
    DuplicateSession,
    SessionClosed,
    Malformed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, thiserror::Error)]
#[error("{code:?}: {message}")]
pub struct Rejection {
    /// The offending command, or the raw text when it did not parse.
    pub command: serde_json::Value,
    pub code: ErrorCode,
    pub message: String,
}

impl Rejection {
    pub fn new(command: &ClientCommand, code: ErrorCode, message: impl Into<String>) -> Self {
        let command = serde_json::to_value(command).expect("commands always serialize");
        Self {
            command,
            code,
            message: message.into(),
        }
    }

    pub fn from_apply(command: &ClientCommand, err: &ApplyError) -> Self {
        let code = match err {
            ApplyError::UnknownReference { .. } => ErrorCode::UnknownReference,
            _ => ErrorCode::ValidationFailed,
        };
        Self::new(command, code, err.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "data", rename_all = "snake_case")]
pub enum ServerFrame {
    Event(SessionEvent),
    Rejection(Rejection),
    Snapshot {
        state: Box<SessionState>,
        last_seq: u64,
        /// The participant this connection speaks for, once joined.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        you: Option<ParticipantId>,
    },
}
