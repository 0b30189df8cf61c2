//! Intervention texts behind the lightbulb.

use alloc::format;
use alloc::string::String;

use crate::context::ContextSnapshot;
use crate::trigger::{Statistic, Target, TriggerFiring, TriggerKind};
use crate::Millis;

fn minutes(ms: Millis) -> Millis {
    ms.div_ceil(60_000).max(1)
}

fn excerpt(text: &str) -> String {
    const MAX: usize = 60;
    let trimmed = text.trim();
    match trimmed.char_indices().nth(MAX) {
        Some((cut, _)) => format!("{}...", &trimmed[..cut]),
        None => String::from(trimmed),
    }
}

/// Per-kind template filled from the firing and the shared context.
pub fn template_message(firing: &TriggerFiring, ctx: &ContextSnapshot) -> String {
    let name = match &firing.target {
        Target::Participant(p) => ctx.name_of(p),
        Target::Group => String::from("Team"),
    };
    match firing.kind {
        TriggerKind::Inactivity => {
            let last_note = match &firing.target {
                Target::Participant(p) => ctx.whiteboard.latest_note_by(p),
                Target::Group => None,
            };
            match last_note {
                Some(note) => format!(
                    "{name}, your note \"{}\" is a good start. What could you add to it, or how does it connect to your teammates' ideas?",
                    excerpt(&note.content)
                ),
                None => format!(
                    "{name}, your group would love to hear your ideas. Try putting one idea on the whiteboard as a note."
                ),
            }
        }
        TriggerKind::Frustration => format!(
            "{name}, it's okay to find this hard. No need to be anxious, just take your time. Tell your group which part is confusing, or ask @boss for help."
        ),
        TriggerKind::ParticipationDecline => {
            let (previous, current) = match &firing.evidence.statistic {
                Statistic::Counts { previous, current } => (*previous, *current),
                _ => (0, 0),
            };
            format!(
                "{name}, things have gone quiet ({previous} actions before, {current} in the last few minutes). Check in with each other: what is everyone working on right now?"
            )
        }
        TriggerKind::ProgressStall => {
            let idle = match &firing.evidence.statistic {
                Statistic::Stall { idle_ms } => *idle_ms,
                _ => 0,
            };
            format!(
                "{name}, you have been discussing for about {} minutes without changing the whiteboard. Capture what you agreed on as a note so your design keeps moving.",
                minutes(idle)
            )
        }
    }
}
