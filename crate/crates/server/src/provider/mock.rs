//! Rule-based offline provider.
//!
//! Classification calls are answered with the keyword classifier, so the mock
//! agrees with the fallback path by construction. Generation calls answer
//! from a fixed template per agent, picked by the `agent:` line that every
//! assembled system prompt starts with.

use std::time::Duration;

use async_trait::async_trait;
use coregulate_core::prompt::{BOSS_AGENT, GENERIC_AGENT, LIGHTBULB_AGENT};
use coregulate_core::{KeywordLexicon, ProviderPrompt};

use super::{Provider, ProviderError};

/// Forced failure modes for exercising fallbacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Returns text that is neither a label nor a useful answer.
    Garbage,
    /// Fails every call with HTTP 503.
    Unavailable,
    /// Never answers; the call ends in a timeout.
    Hang,
}

#[derive(Debug, Clone, Default)]
pub struct MockProvider {
    lexicon: KeywordLexicon,
    fault: Option<Fault>,
}

const PLANNING_TIPS: &[&str] = &[
    "list the three parts of the task, then give each person one part and agree on a time to regroup.",
    "decide what the gift is for first, then split the work into concept, look, materials and making.",
    "write your plan as notes on the whiteboard: one note per step, with a name on each.",
];
const REFLECTION_TIPS: &[&str] = &[
    "what is one thing that went well in your teamwork, and one thing you would do differently?",
    "look at your whiteboard together. Which idea changed the most since you started, and why?",
    "summarise your design in two sentences. Does everyone agree with the summary?",
];
const KNOWLEDGE_TIPS: &[&str] = &[
    "compare two options side by side on the whiteboard and note what each is good at.",
    "think about who will use the gift and what it has to survive: water, dropping, sunlight.",
    "materials like wood, cardboard and fabric each have strengths; test a small piece first.",
];

/// FNV-1a, for stable template selection across runs and platforms.
fn stable_hash(prompt: &ProviderPrompt) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let parts = std::iter::once(prompt.system.as_str()).chain(prompt.user_turns.iter().map(|t| t.text.as_str()));
    for part in parts {
        for b in part.bytes().chain(std::iter::once(0u8)) {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

impl MockProvider {
    pub fn new(lexicon: KeywordLexicon) -> Self {
        Self { lexicon, fault: None }
    }

    pub fn with_fault(mut self, fault: Fault) -> Self {
        self.fault = Some(fault);
        self
    }

    fn question(prompt: &ProviderPrompt) -> &str {
        prompt.user_turns.last().map_or("", |t| t.text.as_str())
    }

    /// The canned output for `prompt`; pure.
    pub fn respond(&self, prompt: &ProviderPrompt) -> String {
        if let Some(labels) = &prompt.label_constraint {
            let label = self.lexicon.classify(Self::question(prompt)).label();
            return match labels.iter().find(|l| l.as_str() == label) {
                Some(l) => l.clone(),
                None => labels.first().cloned().unwrap_or_default(),
            };
        }
        let pick = |tips: &[&'static str]| tips[(stable_hash(prompt) % tips.len() as u64) as usize];
        match prompt.agent().unwrap_or_default() {
            "monitoring" => {
                let counts: Vec<String> = prompt
                    .section("participation")
                    .unwrap_or_default()
                    .lines()
                    .filter(|l| !l.trim().is_empty())
                    .map(str::to_owned)
                    .collect();
                let counts = if counts.is_empty() {
                    "no activity yet".to_owned()
                } else {
                    counts.join(", ")
                };
                format!(
                    "Monitoring check: activity so far is {counts}. Compare this with your plan and make sure everyone has a part to work on."
                )
            }
            "planning" => format!("Planning suggestion: {}", pick(PLANNING_TIPS)),
            "reflection" => format!("Reflection prompt: {}", pick(REFLECTION_TIPS)),
            "knowledge" => format!("Knowledge note: {}", pick(KNOWLEDGE_TIPS)),
            GENERIC_AGENT => format!("Assistant: here is some general help. {}", pick(KNOWLEDGE_TIPS)),
            LIGHTBULB_AGENT => prompt.section("draft").unwrap_or(Self::question(prompt)).to_owned(),
            BOSS_AGENT => "Knowledge".to_owned(),
            _ => "Mock reply.".to_owned(),
        }
    }
}

#[async_trait]
impl Provider for MockProvider {
    fn name(&self) -> &str {
        "mock"
    }

    async fn complete(&self, prompt: &ProviderPrompt, timeout: Duration) -> Result<String, ProviderError> {
        match self.fault {
            None => Ok(self.respond(prompt)),
            Some(Fault::Garbage) => Ok("banana \u{1F34C} 42".to_owned()),
            Some(Fault::Unavailable) => Err(ProviderError::Http { status: 503 }),
            Some(Fault::Hang) => {
                tokio::time::sleep(timeout).await;
                Err(ProviderError::Timeout)
            }
        }
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use coregulate_core::prompt::Turn;
    use coregulate_core::Intent;

    fn classification(text: &str) -> ProviderPrompt {
        ProviderPrompt {
            system: "agent: boss".into(),
            user_turns: vec![Turn::user(text)],
            max_tokens: 1,
            label_constraint: Some(Intent::labels()),
        }
    }

    #[tokio::test]
    async fn classification_mirrors_keywords() {
        let mock = MockProvider::default();
        let out = mock
            .complete(
                &classification("Ana: @boss let's plan who does what"),
                Duration::from_secs(1),
            )
            .await;
        assert_eq!(out.unwrap(), "Planning");
        let out = mock
            .complete(&classification("Ana: @boss is glass strong?"), Duration::from_secs(1))
            .await;
        assert_eq!(out.unwrap(), "Knowledge");
    }

    #[tokio::test]
    async fn monitoring_embeds_participation() {
        let prompt = ProviderPrompt {
            system: "agent: monitoring\n[participation]\nAna: 12\nBo: 3\n[/participation]".into(),
            user_turns: vec![Turn::user("Ana: @boss progress?")],
            max_tokens: 50,
            label_constraint: None,
        };
        let out = MockProvider::default()
            .complete(&prompt, Duration::from_secs(1))
            .await
            .unwrap();
        assert!(out.starts_with("Monitoring check: "));
        assert!(out.contains("Ana: 12, Bo: 3"));
    }

    #[test]
    fn identical_prompts_identical_output() {
        let mock = MockProvider::default();
        let p = ProviderPrompt {
            system: "agent: planning".into(),
            user_turns: vec![Turn::user("x")],
            max_tokens: 5,
            label_constraint: None,
        };
        assert_eq!(mock.respond(&p), mock.respond(&p.clone()));
        let mut q = p.clone();
        q.user_turns[0].text.push('y');
        assert_ne!(stable_hash(&p), stable_hash(&q));
    }

    #[tokio::test]
    async fn faults() {
        let p = classification("hi");
        let t = Duration::from_millis(20);
        assert!(MockProvider::default()
            .with_fault(Fault::Garbage)
            .complete(&p, t)
            .await
            .unwrap()
            .contains("banana"));
        assert_eq!(
            MockProvider::default()
                .with_fault(Fault::Unavailable)
                .complete(&p, t)
                .await,
            Err(ProviderError::Http { status: 503 })
        );
        assert_eq!(
            MockProvider::default().with_fault(Fault::Hang).complete(&p, t).await,
            Err(ProviderError::Timeout)
        );
    }
}
