//! Triggering events: the situations the proactive agent reacts to.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::ids::ParticipantId;
use crate::Millis;

/// Thresholds for the four detectors. All durations are milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TriggerParams {
    /// Individual silence that counts as disengagement.
    pub t_inactive_ms: Millis,
    /// Width of each of the two participation windows being compared.
    pub w_participation_ms: Millis,
    /// Current window must fall strictly below this fraction of the previous one.
    pub decline_ratio: f64,
    /// Previous window must hold at least this many events for a decline to count.
    pub min_prev_rate: u32,
    /// Whiteboard idle time, with ongoing chat, that counts as a stall.
    pub t_stall_ms: Millis,
    pub frustration_lexicon: Vec<String>,
    /// Minimum spacing between passed firings of the same kind and target.
    pub cooldown_ms: Millis,
    /// Timer cadence at which time-based detectors are re-evaluated.
    pub tick_ms: Millis,
}

pub const DEFAULT_FRUSTRATION_LEXICON: &[&str] = &[
    "don't understand",
    "do not understand",
    "dont understand",
    "confused",
    "confusing",
    "give up",
    "i'm lost",
    "im lost",
    "frustrated",
    "frustrating",
    "stuck",
    "too hard",
    "this is hard",
    "no idea",
    "makes no sense",
    "hate this",
];

impl Default for TriggerParams {
    fn default() -> Self {
        Self {
            t_inactive_ms: 180_000,
            w_participation_ms: 120_000,
            decline_ratio: 0.5,
            min_prev_rate: 4,
            t_stall_ms: 300_000,
            frustration_lexicon: DEFAULT_FRUSTRATION_LEXICON.iter().map(|s| String::from(*s)).collect(),
            cooldown_ms: 300_000,
            tick_ms: 5_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParamsError {
    #[error("{0} must be greater than zero")]
    ZeroDuration(&'static str),
    #[error("decline_ratio must lie in (0, 1], got {0}")]
    DeclineRatio(f64),
}

impl TriggerParams {
    pub fn validate(&self) -> Result<(), ParamsError> {
        let durations = [
            ("t_inactive_ms", self.t_inactive_ms),
            ("w_participation_ms", self.w_participation_ms),
            ("t_stall_ms", self.t_stall_ms),
            ("cooldown_ms", self.cooldown_ms),
            ("tick_ms", self.tick_ms),
        ];
        if let Some((name, _)) = durations.iter().find(|(_, v)| *v == 0) {
            return Err(ParamsError::ZeroDuration(name));
        }
        if !(self.decline_ratio > 0.0 && self.decline_ratio <= 1.0) {
            return Err(ParamsError::DeclineRatio(self.decline_ratio));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerKind {
    Inactivity,
    Frustration,
    ParticipationDecline,
    ProgressStall,
}

impl TriggerKind {
    pub const ALL: [TriggerKind; 4] = [
        TriggerKind::Inactivity,
        TriggerKind::Frustration,
        TriggerKind::ParticipationDecline,
        TriggerKind::ProgressStall,
    ];

    pub const fn as_str(self) -> &'static str {
        match self {
            TriggerKind::Inactivity => "inactivity",
            TriggerKind::Frustration => "frustration",
            TriggerKind::ParticipationDecline => "participation_decline",
            TriggerKind::ProgressStall => "progress_stall",
        }
    }
}

impl fmt::Display for TriggerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Who an intervention is aimed at.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Participant(ParticipantId),
    Group,
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Participant(p) => write!(f, "{p}"),
            Target::Group => f.write_str("group"),
        }
    }
}

/// The measurement that crossed its threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "measure", rename_all = "snake_case")]
pub enum Statistic {
    Silence { silent_ms: Millis },
    Phrase { phrase: String },
    Counts { previous: u32, current: u32 },
    Stall { idle_ms: Millis },
}

/// Inclusive seq range of the events a firing was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub from_seq: u64,
    pub to_seq: u64,
    pub statistic: Statistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerFiring {
    pub kind: TriggerKind,
    pub target: Target,
    /// Evaluation instant that produced the firing.
    pub at: Millis,
    pub evidence: Evidence,
    /// Intervention text shown behind the lightbulb. Empty until generated.
    #[serde(default)]
    pub message: String,
}

impl TriggerFiring {
    /// The identity used for cooldowns and oracle comparison.
    pub fn key(&self) -> (Millis, TriggerKind, &Target) {
        (self.at, self.kind, &self.target)
    }
}
