//! Core model for regulated collaborative learning sessions.
//!
//! Everything here is pure and allocation-only (`no_std` + `alloc`): the
//! event-sourced session state, the streaming trigger engine and its
//! brute-force oracle, the lightbulb state machine, intent classification and
//! prompt assembly. IO, networking and the CLI live in the `coregulate` crate.
#![no_std]

extern crate alloc;

pub mod context;
pub mod engine;
pub mod ids;
pub mod intent;
pub mod intervention;
pub mod lightbulb;
pub mod mention;
pub mod oracle;
pub mod prompt;
pub mod session;
pub mod text;
pub mod trigger;

/// Milliseconds, either since the Unix epoch or as a duration.
pub type Millis = u64;

pub use context::ContextSnapshot;
pub use engine::{CooldownGate, CooldownVerdict, TriggerEngine, TriggerMetrics};
pub use ids::{AgentId, LinkId, NoteId, ParticipantId, SessionId};
pub use intent::{Intent, KeywordLexicon};
pub use lightbulb::{AckWhileIdle, LightbulbState};
pub use mention::{parse_mentions, Mention};
pub use oracle::{oracle_scan, OracleReport};
pub use prompt::{assemble_prompt, AgentProfile, ProfileSet, PromptBudget, ProviderPrompt};
pub use session::{
    apply_event, fold, ApplyError, EventPayload, Mode, SessionConfig, SessionEvent, SessionState, WhiteboardState,
};
pub use trigger::{Target, TriggerFiring, TriggerKind, TriggerParams};
