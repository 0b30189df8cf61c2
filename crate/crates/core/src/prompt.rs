//! Agent profiles and provider prompt assembly.
//!
//! Profile templates name the context sections they want with placeholders:
//! `{task_prompt}`, `{recent_chat}`, `{whiteboard}`, `{participation}` and
//! `{elapsed}`. Each placeholder expands to a bracketed block such as
//! `[whiteboard] ... [/whiteboard]`; sections a template does not name are
//! left out.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::context::ContextSnapshot;
use crate::ids::{AgentId, ParticipantId};
use crate::intent::Intent;
use crate::trigger::TriggerFiring;

pub const EMPTY_WHITEBOARD: &str = "(no notes yet)";
pub const BOSS_AGENT: &str = "boss";
pub const GENERIC_AGENT: &str = "assistant";
pub const LIGHTBULB_AGENT: &str = "lightbulb";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub role: String,
    pub text: String,
}

impl Turn {
    pub fn user(text: impl Into<String>) -> Self {
        Self {
            role: String::from("user"),
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderPrompt {
    pub system: String,
    pub user_turns: Vec<Turn>,
    pub max_tokens: u32,
    /// When present, any output outside this set is a failed call.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_constraint: Option<Vec<String>>,
}

impl ProviderPrompt {
    /// The agent id written on the first line of every assembled system prompt.
    pub fn agent(&self) -> Option<&str> {
        self.system.lines().next()?.strip_prefix("agent: ")
    }

    /// Body of a bracketed `[name]` section of the system prompt.
    pub fn section(&self, name: &str) -> Option<&str> {
        let open = format!("[{name}]\n");
        let close = format!("\n[/{name}]");
        let start = self.system.find(&open)? + open.len();
        let len = self.system[start..].find(&close)?;
        Some(&self.system[start..start + len])
    }

    pub fn char_len(&self) -> usize {
        self.system.chars().count() + self.user_turns.iter().map(|t| t.text.chars().count()).sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub agent_id: AgentId,
    pub display_name: String,
    pub system_prompt: String,
    pub response_style: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptBudget {
    /// Newest chat lines kept; older ones are dropped first.
    pub max_chat_messages: usize,
    /// Ceiling on prompt characters; more chat is dropped, oldest first, to fit.
    pub max_chars: usize,
    pub max_tokens: u32,
}

impl Default for PromptBudget {
    fn default() -> Self {
        Self {
            max_chat_messages: 30,
            max_chars: 16_000,
            max_tokens: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProfileError {
    #[error("no profile for agent `{0}`")]
    Missing(&'static str),
    #[error("profile `{agent}` must reference {placeholder}")]
    MissingPlaceholder { agent: String, placeholder: &'static str },
}

/// The four specialists plus the unrouted control assistant.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSet {
    specialists: BTreeMap<Intent, AgentProfile>,
    generic: AgentProfile,
}

impl ProfileSet {
    /// Every specialist must see both the chat and the whiteboard.
    pub fn new(profiles: Vec<AgentProfile>, generic: AgentProfile) -> Result<Self, ProfileError> {
        let mut specialists = BTreeMap::new();
        for intent in Intent::ALL {
            let profile = profiles
                .iter()
                .find(|p| p.agent_id.as_str() == intent.agent_name())
                .ok_or(ProfileError::Missing(intent.agent_name()))?;
            for placeholder in ["{recent_chat}", "{whiteboard}"] {
                if !profile.system_prompt.contains(placeholder) {
                    return Err(ProfileError::MissingPlaceholder {
                        agent: String::from(profile.agent_id.as_str()),
                        placeholder,
                    });
                }
            }
            specialists.insert(intent, profile.clone());
        }
        Ok(Self { specialists, generic })
    }

    /// Total: every intent has exactly one profile.
    pub fn route(&self, intent: Intent) -> &AgentProfile {
        &self.specialists[&intent]
    }

    pub fn generic(&self) -> &AgentProfile {
        &self.generic
    }
}

fn render_chat(ctx: &ContextSnapshot, keep: usize) -> String {
    let mut out = String::from("[recent_chat]\n");
    let skip = ctx.recent_chat.len().saturating_sub(keep);
    if ctx.recent_chat.len() == skip {
        out.push_str("(no messages yet)\n");
    }
    for line in &ctx.recent_chat[skip..] {
        let _ = writeln!(out, "#{} {}: {}", line.seq, line.speaker, line.body);
    }
    out.push_str("[/recent_chat]");
    out
}

fn render_whiteboard(ctx: &ContextSnapshot) -> String {
    let mut out = String::from("[whiteboard]\n");
    let wb = &ctx.whiteboard;
    if wb.is_empty() {
        out.push_str(EMPTY_WHITEBOARD);
        out.push('\n');
    } else {
        out.push_str("notes:\n");
        for n in &wb.notes {
            let kind = match n.kind {
                crate::session::NoteKind::Text => "text",
                crate::session::NoteKind::Image => "image",
                crate::session::NoteKind::Video => "video",
            };
            let _ = writeln!(
                out,
                "- {} ({kind}, by {}): {}",
                n.note_id,
                ctx.name_of(&n.author),
                n.content
            );
        }
        out.push_str("links:\n");
        if wb.links.is_empty() {
            out.push_str("(none)\n");
        }
        for (from, to) in &wb.links {
            let _ = writeln!(out, "- {from} -> {to}");
        }
        out.push_str("notes per author:\n");
        for (author, count) in &wb.notes_per_author {
            let _ = writeln!(out, "- {}: {count}", ctx.name_of(author));
        }
    }
    out.push_str("[/whiteboard]");
    out
}

fn render_participation(ctx: &ContextSnapshot) -> String {
    let mut out = String::from("[participation]\n");
    for (p, name) in &ctx.names {
        let count = ctx.participation.get(p).copied().unwrap_or(0);
        let _ = writeln!(out, "{name}: {count}");
    }
    out.push_str("[/participation]");
    out
}

type Section = (&'static str, fn(&ContextSnapshot, usize) -> String);

fn render_template(template: &str, ctx: &ContextSnapshot, chat_keep: usize) -> String {
    let mut out = String::from(template);
    let sections: [Section; 5] = [
        ("{task_prompt}", |c, _| {
            format!("[task_prompt]\n{}\n[/task_prompt]", c.task_prompt)
        }),
        ("{recent_chat}", render_chat),
        ("{whiteboard}", |c, _| render_whiteboard(c)),
        ("{participation}", |c, _| render_participation(c)),
        ("{elapsed}", |c, _| {
            format!("[elapsed]\n{} min\n[/elapsed]", c.elapsed_ms / 60_000)
        }),
    ];
    for (placeholder, render) in sections {
        if out.contains(placeholder) {
            out = out.replace(placeholder, &render(ctx, chat_keep));
        }
    }
    out
}

/// Student-facing request text as it appears in the user turn.
fn request_turn(ctx: &ContextSnapshot, requester: &ParticipantId, body: &str) -> Turn {
    Turn::user(format!("{}: {}", ctx.name_of(requester), body))
}

/// Builds the generation prompt for `profile`. Deterministic in its inputs.
pub fn assemble_prompt(
    profile: &AgentProfile,
    requester: &ParticipantId,
    body: &str,
    ctx: &ContextSnapshot,
    budget: &PromptBudget,
) -> ProviderPrompt {
    let turn = request_turn(ctx, requester, body);
    let mut keep = budget.max_chat_messages.min(ctx.recent_chat.len());
    loop {
        let system = format!(
            "agent: {}\n{}\n\nStyle: {}",
            profile.agent_id,
            render_template(&profile.system_prompt, ctx, keep),
            profile.response_style
        );
        let prompt = ProviderPrompt {
            system,
            user_turns: vec![turn.clone()],
            max_tokens: budget.max_tokens,
            label_constraint: None,
        };
        if keep == 0 || prompt.char_len() <= budget.max_chars {
            return prompt;
        }
        keep -= 1;
    }
}

/// Constrained one-label classification request for the orchestrator.
pub fn classification_prompt(requester: &ParticipantId, body: &str, ctx: &ContextSnapshot) -> ProviderPrompt {
    let system = format!(
        "agent: {BOSS_AGENT}\nYou route student requests in a collaborative design task. \
Answer with exactly one word: Knowledge if the students need facts or explanations about the task domain, \
Planning if they need help organising or dividing their work, Monitoring if they ask about progress or time, \
Reflection if they want to review or evaluate what they did.\n{}",
        render_template("{task_prompt}", ctx, 0)
    );
    ProviderPrompt {
        system,
        user_turns: vec![request_turn(ctx, requester, body)],
        max_tokens: 1,
        label_constraint: Some(Intent::labels()),
    }
}

/// Asks the provider to personalise a template intervention. The draft is
/// the text used verbatim when the provider is unavailable.
pub fn intervention_prompt(
    firing: &TriggerFiring,
    draft: &str,
    ctx: &ContextSnapshot,
    budget: &PromptBudget,
) -> ProviderPrompt {
    let target = match &firing.target {
        crate::trigger::Target::Participant(p) => ctx.name_of(p),
        crate::trigger::Target::Group => String::from("the whole group"),
    };
    let system = format!(
        "agent: {LIGHTBULB_AGENT}\nYou give short, warm encouragement to primary-school students working in a group. \
Rewrite the draft for {target} so it fits what they have actually done. Keep it under three sentences.\n\
[trigger]\n{}\n[/trigger]\n{}\n[draft]\n{draft}\n[/draft]",
        firing.kind,
        render_template("{whiteboard}", ctx, 0),
    );
    ProviderPrompt {
        system,
        user_turns: vec![Turn::user(String::from(draft))],
        max_tokens: budget.max_tokens,
        label_constraint: None,
    }
}
