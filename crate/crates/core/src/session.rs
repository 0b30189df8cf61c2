//! Session domain model and the event fold that derives state from the log.
//!
//! Every change to a session is a [`SessionEvent`] with a server-assigned,
//! gap-free sequence number. [`SessionState`] is never edited directly; it is
//! the result of folding the ordered events from an empty state, which makes
//! replays deterministic.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::ids::{AgentId, LinkId, NoteId, ParticipantId, SessionId};
use crate::intent::Intent;
use crate::lightbulb::LightbulbState;
use crate::mention::Mention;
use crate::trigger::{ParamsError, Target, TriggerFiring, TriggerParams};
use crate::Millis;

/// Experimental condition a session runs under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Routed specialist agents plus the proactive trigger engine.
    #[default]
    Miracle,
    /// Control condition: one unrouted reactive assistant, no triggers.
    #[serde(alias = "generic")]
    GenericAssistant,
}

impl Mode {
    pub const fn as_str(self) -> &'static str {
        match self {
            Mode::Miracle => "miracle",
            Mode::GenericAssistant => "generic_assistant",
        }
    }
}

pub const DEFAULT_TASK_PROMPT: &str = "Plan and present an innovative gift design, \
including its concept, appearance, materials, and production process.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub session_id: SessionId,
    pub group_size_limit: u32,
    pub duration_limit_ms: Millis,
    pub mode: Mode,
    pub trigger_params: TriggerParams,
    pub task_prompt: String,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            session_id: SessionId::new(""),
            group_size_limit: 6,
            duration_limit_ms: 120 * 60 * 1000,
            mode: Mode::Miracle,
            trigger_params: TriggerParams::default(),
            task_prompt: String::from(DEFAULT_TASK_PROMPT),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("session_id must not be empty")]
    EmptySessionId,
    #[error("group_size_limit must be at least 2, got {0}")]
    GroupTooSmall(u32),
    #[error("duration_limit_ms must be greater than zero")]
    ZeroDuration,
    #[error(transparent)]
    Params(#[from] ParamsError),
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.session_id.as_str().trim().is_empty() {
            return Err(ConfigError::EmptySessionId);
        }
        if self.group_size_limit < 2 {
            return Err(ConfigError::GroupTooSmall(self.group_size_limit));
        }
        if self.duration_limit_ms == 0 {
            return Err(ConfigError::ZeroDuration);
        }
        self.trigger_params.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Participant {
    pub participant_id: ParticipantId,
    pub display_name: String,
    pub joined_at: Millis,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    Participant(ParticipantId),
    Agent(AgentId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub seq: u64,
    pub author: Speaker,
    pub body: String,
    pub mentions: Vec<Mention>,
    pub timestamp: Millis,
    /// Set on agent replies so the chat pane can badge the routing decision.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intent: Option<Intent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoteKind {
    #[default]
    Text,
    /// Content is an opaque resource reference.
    Image,
    /// Content is an opaque resource reference.
    Video,
}

/// Abstract canvas coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Note {
    pub note_id: NoteId,
    pub author: ParticipantId,
    pub kind: NoteKind,
    pub content: String,
    pub position: Position,
    pub created_at: Millis,
    pub updated_at: Millis,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoteLink {
    pub link_id: LinkId,
    pub from_note: NoteId,
    pub to_note: NoteId,
    pub author: ParticipantId,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WhiteboardState {
    pub notes: BTreeMap<NoteId, Note>,
    pub links: BTreeMap<LinkId, NoteLink>,
}

impl WhiteboardState {
    /// Most recently created note by `author` that is still on the board.
    pub fn latest_note_by(&self, author: &ParticipantId) -> Option<&Note> {
        self.notes
            .values()
            .filter(|n| &n.author == author)
            .max_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.note_id.cmp(&b.note_id)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinData {
    pub participant_id: ParticipantId,
    pub display_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatData {
    pub author: ParticipantId,
    pub body: String,
    #[serde(default)]
    pub mentions: Vec<Mention>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteCreateData {
    pub note_id: NoteId,
    pub author: ParticipantId,
    pub kind: NoteKind,
    pub content: String,
    pub position: Position,
}

/// Wholesale replacement of the given fields; last writer by seq wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteUpdateData {
    pub note_id: NoteId,
    pub author: ParticipantId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Position>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteDeleteData {
    pub note_id: NoteId,
    pub author: ParticipantId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkCreateData {
    pub link_id: LinkId,
    pub from_note: NoteId,
    pub to_note: NoteId,
    pub author: ParticipantId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkDeleteData {
    pub link_id: LinkId,
    pub author: ParticipantId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentReplyData {
    pub agent_id: AgentId,
    /// Routing decision; absent for the unrouted control assistant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intent: Option<Intent>,
    pub body: String,
    /// Seq of the chat message that mentioned the orchestrator.
    pub in_reply_to: u64,
    /// Log position the agent's context snapshot was taken at.
    pub context_seq: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightbulbAckData {
    pub participant_id: ParticipantId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "data", rename_all = "snake_case")]
pub enum EventPayload {
    Join(JoinData),
    Chat(ChatData),
    NoteCreate(NoteCreateData),
    NoteUpdate(NoteUpdateData),
    NoteDelete(NoteDeleteData),
    LinkCreate(LinkCreateData),
    LinkDelete(LinkDeleteData),
    AgentReply(AgentReplyData),
    TriggerFired(TriggerFiring),
    LightbulbAck(LightbulbAckData),
}

impl EventPayload {
    pub const fn type_name(&self) -> &'static str {
        match self {
            EventPayload::Join(_) => "join",
            EventPayload::Chat(_) => "chat",
            EventPayload::NoteCreate(_) => "note_create",
            EventPayload::NoteUpdate(_) => "note_update",
            EventPayload::NoteDelete(_) => "note_delete",
            EventPayload::LinkCreate(_) => "link_create",
            EventPayload::LinkDelete(_) => "link_delete",
            EventPayload::AgentReply(_) => "agent_reply",
            EventPayload::TriggerFired(_) => "trigger_fired",
            EventPayload::LightbulbAck(_) => "lightbulb_ack",
        }
    }

    /// The participant who caused this event, if a human did.
    pub fn actor(&self) -> Option<&ParticipantId> {
        match self {
            EventPayload::Join(d) => Some(&d.participant_id),
            EventPayload::Chat(d) => Some(&d.author),
            EventPayload::NoteCreate(d) => Some(&d.author),
            EventPayload::NoteUpdate(d) => Some(&d.author),
            EventPayload::NoteDelete(d) => Some(&d.author),
            EventPayload::LinkCreate(d) => Some(&d.author),
            EventPayload::LinkDelete(d) => Some(&d.author),
            EventPayload::LightbulbAck(d) => Some(&d.participant_id),
            EventPayload::AgentReply(_) | EventPayload::TriggerFired(_) => None,
        }
    }

    pub fn is_whiteboard_mutation(&self) -> bool {
        matches!(
            self,
            EventPayload::NoteCreate(_)
                | EventPayload::NoteUpdate(_)
                | EventPayload::NoteDelete(_)
                | EventPayload::LinkCreate(_)
                | EventPayload::LinkDelete(_)
        )
    }

    /// Task work by a student: joining, chatting, or editing the whiteboard.
    /// Agent output and lightbulb traffic are not activity.
    pub fn is_activity(&self) -> bool {
        matches!(self, EventPayload::Join(_) | EventPayload::Chat(_)) || self.is_whiteboard_mutation()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub seq: u64,
    pub at: Millis,
    #[serde(flatten)]
    pub payload: EventPayload,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ApplyError {
    #[error("sequence gap: expected seq {expected}, got {found}")]
    SequenceGap { expected: u64, found: u64 },
    #[error("seq {seq}: timestamp {found} precedes previous {previous}")]
    TimeRegression { seq: u64, previous: Millis, found: Millis },
    #[error("seq {seq}: unknown {what} `{id}`")]
    UnknownReference { seq: u64, what: &'static str, id: String },
    #[error("seq {seq}: note `{note}` cannot link to itself")]
    SelfLink { seq: u64, note: NoteId },
    #[error("seq {seq}: {what} `{id}` already exists")]
    DuplicateId { seq: u64, what: &'static str, id: String },
    #[error("seq {seq}: {reason}")]
    Invalid { seq: u64, reason: &'static str },
}

impl ApplyError {
    pub fn seq(&self) -> u64 {
        match self {
            ApplyError::SequenceGap { found, .. } => *found,
            ApplyError::TimeRegression { seq, .. }
            | ApplyError::UnknownReference { seq, .. }
            | ApplyError::SelfLink { seq, .. }
            | ApplyError::DuplicateId { seq, .. }
            | ApplyError::Invalid { seq, .. } => *seq,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SessionState {
    pub last_seq: u64,
    /// Timestamp of the latest event.
    pub last_at: Millis,
    /// Timestamp of event 1.
    pub started_at: Option<Millis>,
    pub participants: BTreeMap<ParticipantId, Participant>,
    pub chat: Vec<ChatMessage>,
    pub whiteboard: WhiteboardState,
    pub lightbulb: LightbulbState,
    /// Events attributed to each participant over the whole session.
    pub participation: BTreeMap<ParticipantId, u64>,
    pub notes_created: u64,
    pub links_created: u64,
}

/// Pure transition: consumes a state and returns its successor.
pub fn apply_event(mut state: SessionState, event: &SessionEvent) -> Result<SessionState, ApplyError> {
    state.apply(event)?;
    Ok(state)
}

/// Folds an ordered, gap-free event list starting from the empty state.
pub fn fold<'a, I>(events: I) -> Result<SessionState, ApplyError>
where
    I: IntoIterator<Item = &'a SessionEvent>,
{
    let mut state = SessionState::default();
    for event in events {
        state.apply(event)?;
    }
    Ok(state)
}

impl SessionState {
    pub fn participant_by_name(&self, display_name: &str) -> Option<&Participant> {
        self.participants.values().find(|p| p.display_name == display_name)
    }

    /// Identifier the next created note will receive.
    pub fn next_note_id(&self) -> NoteId {
        NoteId::new(alloc::format!("n{}", self.notes_created + 1))
    }

    pub fn next_link_id(&self) -> LinkId {
        LinkId::new(alloc::format!("l{}", self.links_created + 1))
    }

    pub fn elapsed_ms(&self) -> Millis {
        self.started_at.map_or(0, |s| self.last_at.saturating_sub(s))
    }

    /// Checks `event` against the current state without changing it.
    pub fn check(&self, event: &SessionEvent) -> Result<(), ApplyError> {
        let seq = event.seq;
        let expected = self.last_seq + 1;
        if seq != expected {
            return Err(ApplyError::SequenceGap { expected, found: seq });
        }
        if self.last_seq > 0 && event.at < self.last_at {
            return Err(ApplyError::TimeRegression {
                seq,
                previous: self.last_at,
                found: event.at,
            });
        }
        let known = |p: &ParticipantId| -> Result<(), ApplyError> {
            if self.participants.contains_key(p) {
                Ok(())
            } else {
                Err(ApplyError::UnknownReference {
                    seq,
                    what: "participant",
                    id: p.as_str().into(),
                })
            }
        };
        let note_exists = |n: &NoteId| -> Result<(), ApplyError> {
            if self.whiteboard.notes.contains_key(n) {
                Ok(())
            } else {
                Err(ApplyError::UnknownReference {
                    seq,
                    what: "note",
                    id: n.as_str().into(),
                })
            }
        };
        match &event.payload {
            EventPayload::Join(d) => {
                if self.participants.contains_key(&d.participant_id) {
                    return Err(ApplyError::DuplicateId {
                        seq,
                        what: "participant",
                        id: d.participant_id.as_str().into(),
                    });
                }
                if d.display_name.trim().is_empty() {
                    return Err(ApplyError::Invalid {
                        seq,
                        reason: "display name is empty",
                    });
                }
            }
            EventPayload::Chat(d) => {
                known(&d.author)?;
                if d.body.trim().is_empty() {
                    return Err(ApplyError::Invalid {
                        seq,
                        reason: "chat body is empty",
                    });
                }
            }
            EventPayload::NoteCreate(d) => {
                known(&d.author)?;
                if self.whiteboard.notes.contains_key(&d.note_id) {
                    return Err(ApplyError::DuplicateId {
                        seq,
                        what: "note",
                        id: d.note_id.as_str().into(),
                    });
                }
                if !d.position.is_finite() {
                    return Err(ApplyError::Invalid {
                        seq,
                        reason: "note position is not finite",
                    });
                }
            }
            EventPayload::NoteUpdate(d) => {
                known(&d.author)?;
                note_exists(&d.note_id)?;
                if d.position.is_some_and(|p| !p.is_finite()) {
                    return Err(ApplyError::Invalid {
                        seq,
                        reason: "note position is not finite",
                    });
                }
            }
            EventPayload::NoteDelete(d) => {
                known(&d.author)?;
                note_exists(&d.note_id)?;
            }
            EventPayload::LinkCreate(d) => {
                known(&d.author)?;
                if self.whiteboard.links.contains_key(&d.link_id) {
                    return Err(ApplyError::DuplicateId {
                        seq,
                        what: "link",
                        id: d.link_id.as_str().into(),
                    });
                }
                if d.from_note == d.to_note {
                    return Err(ApplyError::SelfLink {
                        seq,
                        note: d.from_note.clone(),
                    });
                }
                note_exists(&d.from_note)?;
                note_exists(&d.to_note)?;
            }
            EventPayload::LinkDelete(d) => {
                known(&d.author)?;
                if !self.whiteboard.links.contains_key(&d.link_id) {
                    return Err(ApplyError::UnknownReference {
                        seq,
                        what: "link",
                        id: d.link_id.as_str().into(),
                    });
                }
            }
            EventPayload::AgentReply(d) => {
                if d.body.trim().is_empty() {
                    return Err(ApplyError::Invalid {
                        seq,
                        reason: "agent reply is empty",
                    });
                }
            }
            EventPayload::TriggerFired(f) => {
                if let Target::Participant(p) = &f.target {
                    known(p)?;
                }
                if f.evidence.from_seq == 0 || f.evidence.from_seq > f.evidence.to_seq || f.evidence.to_seq > seq {
                    return Err(ApplyError::Invalid {
                        seq,
                        reason: "trigger evidence range is malformed",
                    });
                }
            }
            EventPayload::LightbulbAck(d) => known(&d.participant_id)?,
        }
        Ok(())
    }

    /// Validates then applies `event` in place. On error the state is untouched.
    pub fn apply(&mut self, event: &SessionEvent) -> Result<(), ApplyError> {
        self.check(event)?;
        let at = event.at;
        if let Some(actor) = event.payload.actor() {
            *self.participation.entry(actor.clone()).or_insert(0) += 1;
        }
        match &event.payload {
            EventPayload::Join(d) => {
                self.participants.insert(
                    d.participant_id.clone(),
                    Participant {
                        participant_id: d.participant_id.clone(),
                        display_name: d.display_name.clone(),
                        joined_at: at,
                    },
                );
            }
            EventPayload::Chat(d) => self.chat.push(ChatMessage {
                seq: event.seq,
                author: Speaker::Participant(d.author.clone()),
                body: d.body.clone(),
                mentions: d.mentions.clone(),
                timestamp: at,
                intent: None,
            }),
            EventPayload::NoteCreate(d) => {
                self.notes_created += 1;
                self.whiteboard.notes.insert(
                    d.note_id.clone(),
                    Note {
                        note_id: d.note_id.clone(),
                        author: d.author.clone(),
                        kind: d.kind,
                        content: d.content.clone(),
                        position: d.position,
                        created_at: at,
                        updated_at: at,
                    },
                );
            }
            EventPayload::NoteUpdate(d) => {
                if let Some(note) = self.whiteboard.notes.get_mut(&d.note_id) {
                    if let Some(content) = &d.content {
                        note.content = content.clone();
                    }
                    if let Some(position) = d.position {
                        note.position = position;
                    }
                    note.updated_at = at;
                }
            }
            EventPayload::NoteDelete(d) => {
                self.whiteboard.notes.remove(&d.note_id);
                self.whiteboard
                    .links
                    .retain(|_, l| l.from_note != d.note_id && l.to_note != d.note_id);
            }
            EventPayload::LinkCreate(d) => {
                self.links_created += 1;
                self.whiteboard.links.insert(
                    d.link_id.clone(),
                    NoteLink {
                        link_id: d.link_id.clone(),
                        from_note: d.from_note.clone(),
                        to_note: d.to_note.clone(),
                        author: d.author.clone(),
                    },
                );
            }
            EventPayload::LinkDelete(d) => {
                self.whiteboard.links.remove(&d.link_id);
            }
            EventPayload::AgentReply(d) => self.chat.push(ChatMessage {
                seq: event.seq,
                author: Speaker::Agent(d.agent_id.clone()),
                body: d.body.clone(),
                mentions: Vec::new(),
                timestamp: at,
                intent: d.intent,
            }),
            EventPayload::TriggerFired(f) => self.lightbulb.fire(f.clone()),
            EventPayload::LightbulbAck(_) => {
                // A stale ack is harmless.
                let _ = self.lightbulb.acknowledge();
            }
        }
        self.last_seq = event.seq;
        self.last_at = at;
        self.started_at.get_or_insert(at);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ev(seq: u64, at: Millis, payload: EventPayload) -> SessionEvent {
        SessionEvent { seq, at, payload }
    }

    fn join(id: &str) -> EventPayload {
        EventPayload::Join(JoinData {
            participant_id: id.into(),
            display_name: id.into(),
        })
    }

    fn note(id: &str, author: &str) -> EventPayload {
        EventPayload::NoteCreate(NoteCreateData {
            note_id: id.into(),
            author: author.into(),
            kind: NoteKind::Text,
            content: alloc::format!("note {id}"),
            position: Position { x: 1.0, y: 2.0 },
        })
    }

    fn link(id: &str, from: &str, to: &str) -> EventPayload {
        EventPayload::LinkCreate(LinkCreateData {
            link_id: id.into(),
            from_note: from.into(),
            to_note: to.into(),
            author: "p1".into(),
        })
    }

    #[test]
    fn join_on_empty_state() {
        let s = apply_event(SessionState::default(), &ev(1, 10, join("p1"))).unwrap();
        assert_eq!(s.participants.len(), 1);
        assert_eq!(s.last_seq, 1);
        assert_eq!(s.started_at, Some(10));
    }

    #[test]
    fn fold_of_nothing_is_empty() {
        assert_eq!(fold(&[]).unwrap(), SessionState::default());
    }

    #[test]
    fn deleting_a_note_cascades_links() {
        let log = vec![
            ev(1, 0, join("p1")),
            ev(2, 1, note("a", "p1")),
            ev(3, 2, note("b", "p1")),
            ev(4, 3, link("l1", "a", "b")),
            ev(
                5,
                4,
                EventPayload::NoteDelete(NoteDeleteData {
                    note_id: "a".into(),
                    author: "p1".into(),
                }),
            ),
        ];
        let s = fold(&log).unwrap();
        assert!(s.whiteboard.links.is_empty());
        assert_eq!(s.whiteboard.notes.keys().collect::<Vec<_>>(), vec![&NoteId::from("b")]);
    }

    #[test]
    fn three_notes_two_links() {
        let log = vec![
            ev(1, 0, join("p1")),
            ev(2, 1, note("n1", "p1")),
            ev(3, 2, note("n2", "p1")),
            ev(4, 3, note("n3", "p1")),
            ev(5, 4, link("l1", "n1", "n2")),
            ev(6, 5, link("l2", "n2", "n3")),
        ];
        let s = fold(&log).unwrap();
        assert_eq!(s.whiteboard.notes.len(), 3);
        assert_eq!(s.whiteboard.links.len(), 2);
        assert_eq!(s.whiteboard.links[&LinkId::from("l2")].from_note, NoteId::from("n2"));
    }

    #[test]
    fn rejects_sequence_gap() {
        let s = fold(&[ev(1, 0, join("p1"))]).unwrap();
        let err = apply_event(s, &ev(3, 1, join("p2"))).unwrap_err();
        assert_eq!(err, ApplyError::SequenceGap { expected: 2, found: 3 });
    }

    #[test]
    fn rejects_time_regression() {
        let s = fold(&[ev(1, 100, join("p1"))]).unwrap();
        let err = apply_event(s, &ev(2, 99, join("p2"))).unwrap_err();
        assert!(matches!(err, ApplyError::TimeRegression { seq: 2, .. }));
    }

    #[test]
    fn rejects_bad_references() {
        let base = fold(&[ev(1, 0, join("p1")), ev(2, 0, note("a", "p1"))]).unwrap();
        let del = EventPayload::NoteDelete(NoteDeleteData {
            note_id: "zz".into(),
            author: "p1".into(),
        });
        assert!(matches!(
            base.check(&ev(3, 0, del)),
            Err(ApplyError::UnknownReference { what: "note", .. })
        ));
        assert!(matches!(
            base.check(&ev(3, 0, note("b", "ghost"))),
            Err(ApplyError::UnknownReference { .. })
        ));
        assert!(matches!(
            base.check(&ev(3, 0, link("l", "a", "a"))),
            Err(ApplyError::SelfLink { .. })
        ));
        assert!(matches!(
            base.check(&ev(3, 0, link("l", "a", "b"))),
            Err(ApplyError::UnknownReference { .. })
        ));
        assert!(matches!(
            base.check(&ev(3, 0, note("a", "p1"))),
            Err(ApplyError::DuplicateId { .. })
        ));
        assert!(matches!(
            base.check(&ev(3, 0, join("p1"))),
            Err(ApplyError::DuplicateId { .. })
        ));
        let blank = EventPayload::Chat(ChatData {
            author: "p1".into(),
            body: "  ".into(),
            mentions: vec![],
        });
        assert!(matches!(base.check(&ev(3, 0, blank)), Err(ApplyError::Invalid { .. })));
    }

    #[test]
    fn failed_apply_leaves_state_untouched() {
        let mut s = fold(&[ev(1, 0, join("p1"))]).unwrap();
        let before = s.clone();
        assert!(s.apply(&ev(2, 0, link("l", "x", "y"))).is_err());
        assert_eq!(s, before);
    }

    #[test]
    fn note_update_is_last_writer_wins() {
        let log = vec![
            ev(1, 0, join("p1")),
            ev(2, 5, note("a", "p1")),
            ev(
                3,
                9,
                EventPayload::NoteUpdate(NoteUpdateData {
                    note_id: "a".into(),
                    author: "p1".into(),
                    content: None,
                    position: Some(Position { x: 7.5, y: -1.0 }),
                }),
            ),
        ];
        let s = fold(&log).unwrap();
        let n = &s.whiteboard.notes[&NoteId::from("a")];
        assert_eq!(n.content, "note a");
        assert_eq!(n.position, Position { x: 7.5, y: -1.0 });
        assert_eq!((n.created_at, n.updated_at), (5, 9));
    }

    #[test]
    fn config_validation() {
        let mut c = SessionConfig {
            session_id: "s1".into(),
            ..Default::default()
        };
        assert!(c.validate().is_ok());
        assert_eq!(c.group_size_limit, 6);
        assert_eq!(c.duration_limit_ms, 7_200_000);
        c.group_size_limit = 1;
        assert_eq!(c.validate(), Err(ConfigError::GroupTooSmall(1)));
        c.group_size_limit = 4;
        c.duration_limit_ms = 0;
        assert_eq!(c.validate(), Err(ConfigError::ZeroDuration));
        assert_eq!(SessionConfig::default().validate(), Err(ConfigError::EmptySessionId));
    }
}
