//! The shared chat + whiteboard view handed to every agent.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::ids::{NoteId, ParticipantId};
use crate::intent::Intent;
use crate::session::{NoteKind, SessionState, Speaker};
use crate::Millis;

pub const DEFAULT_RECENT_CHAT: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatLine {
    pub seq: u64,
    /// Display name for students, agent id for agents.
    pub speaker: String,
    pub from_agent: bool,
    pub body: String,
    pub timestamp: Millis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intent: Option<Intent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteSummary {
    pub note_id: NoteId,
    pub author: ParticipantId,
    pub kind: NoteKind,
    pub content: String,
    pub created_at: Millis,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WhiteboardSummary {
    /// Ordered by creation time, then id.
    pub notes: Vec<NoteSummary>,
    /// `(from, to)` pairs in link-id order.
    pub links: Vec<(NoteId, NoteId)>,
    pub notes_per_author: BTreeMap<ParticipantId, u64>,
}

impl WhiteboardSummary {
    pub fn is_empty(&self) -> bool {
        self.notes.is_empty()
    }

    pub fn latest_note_by(&self, author: &ParticipantId) -> Option<&NoteSummary> {
        self.notes.iter().rev().find(|n| &n.author == author)
    }
}

/// A projection of the session state at `at_seq`. It carries nothing that
/// happened after that log position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSnapshot {
    pub at_seq: u64,
    pub task_prompt: String,
    pub elapsed_ms: Millis,
    pub recent_chat: Vec<ChatLine>,
    pub whiteboard: WhiteboardSummary,
    /// Events per participant since the session began.
    pub participation: BTreeMap<ParticipantId, u64>,
    pub names: BTreeMap<ParticipantId, String>,
}

impl ContextSnapshot {
    /// Projects `state`, keeping the newest `recent_chat` chat lines.
    pub fn project(state: &SessionState, task_prompt: &str, recent_chat: usize) -> Self {
        let names: BTreeMap<ParticipantId, String> = state
            .participants
            .values()
            .map(|p| (p.participant_id.clone(), p.display_name.clone()))
            .collect();
        let skip = state.chat.len().saturating_sub(recent_chat);
        let recent_chat = state.chat[skip..]
            .iter()
            .map(|m| {
                let (speaker, from_agent) = match &m.author {
                    Speaker::Participant(p) => {
                        (names.get(p).cloned().unwrap_or_else(|| String::from(p.as_str())), false)
                    }
                    Speaker::Agent(a) => (String::from(a.as_str()), true),
                };
                ChatLine {
                    seq: m.seq,
                    speaker,
                    from_agent,
                    body: m.body.clone(),
                    timestamp: m.timestamp,
                    intent: m.intent,
                }
            })
            .collect();

        let mut notes: Vec<NoteSummary> = state
            .whiteboard
            .notes
            .values()
            .map(|n| NoteSummary {
                note_id: n.note_id.clone(),
                author: n.author.clone(),
                kind: n.kind,
                content: n.content.clone(),
                created_at: n.created_at,
            })
            .collect();
        notes.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.note_id.cmp(&b.note_id)));
        let mut notes_per_author = BTreeMap::new();
        for n in &notes {
            *notes_per_author.entry(n.author.clone()).or_insert(0) += 1;
        }
        let links = state
            .whiteboard
            .links
            .values()
            .map(|l| (l.from_note.clone(), l.to_note.clone()))
            .collect();

        Self {
            at_seq: state.last_seq,
            task_prompt: String::from(task_prompt),
            elapsed_ms: state.elapsed_ms(),
            recent_chat,
            whiteboard: WhiteboardSummary {
                notes,
                links,
                notes_per_author,
            },
            participation: state.participation.clone(),
            names,
        }
    }

    pub fn name_of(&self, p: &ParticipantId) -> String {
        self.names.get(p).cloned().unwrap_or_else(|| String::from(p.as_str()))
    }
}
