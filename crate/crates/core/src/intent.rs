//! Request intents and the deterministic keyword classifier.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::ids::AgentId;
use crate::text::{contains_words, word_form};

/// What a student asking the orchestrator needs. `Knowledge` is cognitive
/// support; the other three are metacognitive guidance for one regulation phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intent {
    Knowledge,
    Planning,
    Monitoring,
    Reflection,
}

impl Intent {
    pub const ALL: [Intent; 4] = [
        Intent::Knowledge,
        Intent::Planning,
        Intent::Monitoring,
        Intent::Reflection,
    ];

    /// Label used for constrained provider classification.
    pub const fn label(self) -> &'static str {
        match self {
            Intent::Knowledge => "Knowledge",
            Intent::Planning => "Planning",
            Intent::Monitoring => "Monitoring",
            Intent::Reflection => "Reflection",
        }
    }

    /// Id of the specialist agent that handles this intent.
    pub const fn agent_name(self) -> &'static str {
        match self {
            Intent::Knowledge => "knowledge",
            Intent::Planning => "planning",
            Intent::Monitoring => "monitoring",
            Intent::Reflection => "reflection",
        }
    }

    pub fn agent_id(self) -> AgentId {
        AgentId::new(self.agent_name())
    }

    pub fn is_metacognitive(self) -> bool {
        !matches!(self, Intent::Knowledge)
    }

    pub fn labels() -> Vec<String> {
        Self::ALL.iter().map(|i| String::from(i.label())).collect()
    }

    /// Accepts exactly one of the four labels, ignoring case and surrounding
    /// whitespace. Anything else is not a classification.
    pub fn from_label(text: &str) -> Option<Intent> {
        let t = text.trim();
        Self::ALL.into_iter().find(|i| i.label().eq_ignore_ascii_case(t))
    }
}

impl fmt::Display for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Phrase lists for the three metacognitive intents. Matching is
/// case-insensitive and word-bounded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordLexicon {
    pub planning: Vec<String>,
    pub monitoring: Vec<String>,
    pub reflection: Vec<String>,
}

const PLANNING: &[&str] = &[
    "plan",
    "plans",
    "planning",
    "divide",
    "split up",
    "assign",
    "role",
    "roles",
    "who should",
    "who will",
    "first step",
    "next step",
    "steps",
    "start",
    "begin",
    "organize",
    "organise",
    "schedule",
    "strategy",
    "goal",
    "goals",
    "the work",
    "task list",
    "to do list",
];
const MONITORING: &[&str] = &[
    "progress",
    "on track",
    "time left",
    "how much time",
    "how long",
    "running out",
    "deadline",
    "behind",
    "how are we doing",
    "on time",
    "remaining",
    "status",
    "done yet",
    "are we done",
    "still need",
    "minutes left",
    "check our",
    "keep up",
    "falling behind",
];
const REFLECTION: &[&str] = &[
    "went well",
    "go well",
    "improve",
    "improvement",
    "summary",
    "summarize",
    "summarise",
    "reflect",
    "reflection",
    "learned",
    "learnt",
    "lessons",
    "what worked",
    "feedback",
    "review",
    "evaluate",
    "next time",
    "could have",
    "did we do",
];

impl Default for KeywordLexicon {
    fn default() -> Self {
        let owned = |xs: &[&str]| xs.iter().map(|s| String::from(*s)).collect();
        Self {
            planning: owned(PLANNING),
            monitoring: owned(MONITORING),
            reflection: owned(REFLECTION),
        }
    }
}

impl KeywordLexicon {
    /// Scores each metacognitive intent by the number of its phrases present
    /// in `text`. The highest score wins, ties resolve in the order planning,
    /// monitoring, reflection; no match at all means `Knowledge`.
    pub fn classify(&self, text: &str) -> Intent {
        let words = word_form(text);
        let score = |phrases: &[String]| phrases.iter().filter(|p| contains_words(&words, p)).count();
        let scored = [
            (Intent::Planning, score(&self.planning)),
            (Intent::Monitoring, score(&self.monitoring)),
            (Intent::Reflection, score(&self.reflection)),
        ];
        let mut best = (Intent::Knowledge, 0);
        for (intent, s) in scored {
            if s > best.1 {
                best = (intent, s);
            }
        }
        best.0
    }
}
