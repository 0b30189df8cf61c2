//! The Boss agent: classifies boss mentions, routes them to a specialist and
//! turns the provider's answer into an `AgentReply` payload.

use std::sync::Arc;
use std::time::Duration;

use coregulate_core::intervention::template_message;
use coregulate_core::prompt::{classification_prompt, intervention_prompt, GENERIC_AGENT};
use coregulate_core::session::{AgentReplyData, ChatMessage, Speaker};
use coregulate_core::{
    assemble_prompt, ContextSnapshot, Intent, KeywordLexicon, Mode, ParticipantId, ProfileSet, PromptBudget,
    TriggerFiring,
};
use tokio::time::Instant;

use crate::provider::{Provider, ProviderError};

/// Reply used whenever the provider fails or runs out of time.
pub const APOLOGY: &str = "Sorry, I could not answer just now. Please ask me again in a moment.";

/// A boss mention waiting for an answer.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentRequest {
    pub requester: ParticipantId,
    pub message: ChatMessage,
    /// Log position of the mention.
    pub at_seq: u64,
}

impl AgentRequest {
    /// `None` unless `message` is a participant's chat containing a boss mention.
    pub fn from_message(message: &ChatMessage) -> Option<Self> {
        let Speaker::Participant(requester) = &message.author else {
            return None;
        };
        if message.mentions.is_empty() {
            return None;
        }
        Some(Self {
            requester: requester.clone(),
            message: message.clone(),
            at_seq: message.seq,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrchestratorConfig {
    /// Total time allowed for one request, classification included.
    pub timeout: Duration,
    pub budget: PromptBudget,
    /// Chat messages placed in each context snapshot.
    pub recent_chat: usize,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(20),
            budget: PromptBudget::default(),
            recent_chat: 30,
        }
    }
}

/// How an intent was decided; useful when auditing routing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntentSource {
    Provider,
    Keywords,
}

pub struct Orchestrator {
    provider: Arc<dyn Provider>,
    profiles: ProfileSet,
    lexicon: KeywordLexicon,
    config: OrchestratorConfig,
}

impl Orchestrator {
    pub fn new(
        provider: Arc<dyn Provider>,
        profiles: ProfileSet,
        lexicon: KeywordLexicon,
        config: OrchestratorConfig,
    ) -> Self {
        Self {
            provider,
            profiles,
            lexicon,
            config,
        }
    }

    pub fn config(&self) -> &OrchestratorConfig {
        &self.config
    }

    pub fn provider(&self) -> &dyn Provider {
        self.provider.as_ref()
    }

    pub fn lexicon(&self) -> &KeywordLexicon {
        &self.lexicon
    }

    async fn call(&self, prompt: &coregulate_core::ProviderPrompt, deadline: Instant) -> Result<String, ProviderError> {
        let remaining = deadline.saturating_duration_since(Instant::now());
        if remaining.is_zero() {
            return Err(ProviderError::Timeout);
        }
        match tokio::time::timeout(remaining, self.provider.complete(prompt, remaining)).await {
            Ok(result) => result,
            Err(_) => Err(ProviderError::Timeout),
        }
    }

    async fn classify_until(
        &self,
        req: &AgentRequest,
        ctx: &ContextSnapshot,
        deadline: Instant,
    ) -> (Intent, IntentSource) {
        let prompt = classification_prompt(&req.requester, &req.message.body, ctx);
        match self.call(&prompt, deadline).await {
            Ok(out) => match Intent::from_label(out.trim()) {
                Some(intent) => return (intent, IntentSource::Provider),
                None => tracing::debug!(output = %out, "classifier output outside label set"),
            },
            Err(e) => tracing::debug!(error = %e, "classifier call failed"),
        }
        (self.lexicon.classify(&req.message.body), IntentSource::Keywords)
    }

    /// Never fails: unusable provider output falls back to the keyword classifier.
    pub async fn classify_intent(&self, req: &AgentRequest, ctx: &ContextSnapshot) -> (Intent, IntentSource) {
        self.classify_until(req, ctx, Instant::now() + self.config.timeout)
            .await
    }

    /// Answers one request. Finishes within the configured timeout plus
    /// scheduling slack; on provider failure the body is [`APOLOGY`].
    pub async fn handle_request(&self, req: &AgentRequest, ctx: &ContextSnapshot, mode: Mode) -> AgentReplyData {
        let deadline = Instant::now() + self.config.timeout;
        let (profile, intent) = match mode {
            Mode::Miracle => {
                let (intent, _) = self.classify_until(req, ctx, deadline).await;
                (self.profiles.route(intent), Some(intent))
            }
            Mode::GenericAssistant => (self.profiles.generic(), None),
        };
        let prompt = assemble_prompt(profile, &req.requester, &req.message.body, ctx, &self.config.budget);
        let body = match self.call(&prompt, deadline).await {
            Ok(text) if !text.trim().is_empty() => text.trim().to_owned(),
            Ok(_) => {
                tracing::warn!(agent = %profile.agent_id, "provider returned an empty reply");
                APOLOGY.to_owned()
            }
            Err(e) => {
                tracing::warn!(agent = %profile.agent_id, error = %e, "provider failed; sending apology");
                APOLOGY.to_owned()
            }
        };
        debug_assert!(mode == Mode::Miracle || profile.agent_id.as_str() == GENERIC_AGENT);
        AgentReplyData {
            agent_id: profile.agent_id.clone(),
            intent,
            body,
            in_reply_to: req.message.seq,
            context_seq: ctx.at_seq,
        }
    }

    /// Fills in `firing.message`: the per-kind template, reworded by the
    /// provider when it answers in time.
    pub async fn intervene(&self, mut firing: TriggerFiring, ctx: &ContextSnapshot) -> TriggerFiring {
        let draft = template_message(&firing, ctx);
        let prompt = intervention_prompt(&firing, &draft, ctx, &self.config.budget);
        firing.message = match self.call(&prompt, Instant::now() + self.config.timeout).await {
            Ok(text) if !text.trim().is_empty() => text.trim().to_owned(),
            _ => draft,
        };
        firing
    }
}
