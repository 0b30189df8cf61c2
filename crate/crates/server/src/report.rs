//! Offline analysis of a recorded session log.

use std::collections::BTreeMap;
use std::fmt::Write;

use coregulate_core::{
    oracle_scan, AgentId, ContextSnapshot, EventPayload, Intent, Millis, NoteId, ParticipantId, SessionEvent,
    SessionState, Target, TriggerFiring, TriggerKind, TriggerMetrics, TriggerParams,
};
use serde::Serialize;

use crate::orchestrator::{AgentRequest, Orchestrator};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticipantRow {
    pub participant_id: ParticipantId,
    pub display_name: String,
    pub events: u64,
    pub notes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoteRow {
    pub note_id: NoteId,
    pub author: String,
    pub content: String,
    pub links_to: Vec<NoteId>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RouteRow {
    pub seq: u64,
    pub requester: String,
    pub body: String,
    /// Intent the orchestrator assigns on replay.
    pub intent: Intent,
    /// What the log says happened, if a reply was recorded.
    pub replied_by: Option<AgentId>,
    pub recorded_intent: Option<Intent>,
}

/// Recorded `TriggerFired` events against the oracle at the given params.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Agreement {
    pub recorded: usize,
    pub oracle: usize,
    pub matched: usize,
    pub only_recorded: Vec<FiringKey>,
    pub only_oracle: Vec<FiringKey>,
}

impl Agreement {
    pub fn is_exact(&self) -> bool {
        self.only_recorded.is_empty() && self.only_oracle.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct FiringKey {
    pub kind: TriggerKind,
    pub target: Target,
    pub at: Millis,
}

impl From<&TriggerFiring> for FiringKey {
    fn from(f: &TriggerFiring) -> Self {
        Self {
            kind: f.kind,
            target: f.target.clone(),
            at: f.at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KindDelta {
    pub kind: TriggerKind,
    pub baseline: u64,
    pub what_if: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub events: u64,
    /// Time of the first event; timeline times are relative to it.
    pub started_at: Millis,
    pub duration_ms: Millis,
    pub participants: Vec<ParticipantRow>,
    pub notes: Vec<NoteRow>,
    pub links: usize,
    pub firings: Vec<TriggerFiring>,
    pub metrics: TriggerMetrics,
    pub agreement: Agreement,
    pub routing: Vec<RouteRow>,
    /// Firing counts under default params vs the params given, when they differ.
    pub what_if: Option<Vec<KindDelta>>,
    pub deterministic: bool,
}

/// Pairs recorded and oracle firings of the same kind and target whose
/// times differ by at most `tolerance_ms`.
pub fn compare_firings(recorded: &[TriggerFiring], oracle: &[TriggerFiring], tolerance_ms: Millis) -> Agreement {
    let mut unmatched: Vec<FiringKey> = oracle.iter().map(FiringKey::from).collect();
    let mut only_recorded = Vec::new();
    let mut matched = 0;
    for r in recorded {
        let hit = unmatched
            .iter()
            .position(|o| o.kind == r.kind && o.target == r.target && o.at.abs_diff(r.at) <= tolerance_ms);
        match hit {
            Some(i) => {
                unmatched.remove(i);
                matched += 1;
            }
            None => only_recorded.push(FiringKey::from(r)),
        }
    }
    Agreement {
        recorded: recorded.len(),
        oracle: oracle.len(),
        matched,
        only_recorded,
        only_oracle: unmatched,
    }
}

fn count_by_kind(firings: &[TriggerFiring]) -> BTreeMap<TriggerKind, u64> {
    let mut out: BTreeMap<TriggerKind, u64> = TriggerKind::ALL.iter().map(|k| (*k, 0)).collect();
    for f in firings {
        *out.entry(f.kind).or_default() += 1;
    }
    out
}

/// Builds the report. Agent routing is recomputed with `orchestrator`,
/// against each mention's own log prefix.
pub async fn build(
    events: &[SessionEvent],
    params: &TriggerParams,
    task_prompt: &str,
    orchestrator: &Orchestrator,
) -> Result<Report, coregulate_core::ApplyError> {
    let mut state = SessionState::default();
    let mut routing = Vec::new();
    let mut recorded = Vec::new();
    let mut replies: BTreeMap<u64, (AgentId, Option<Intent>)> = BTreeMap::new();
    for event in events {
        state.apply(event)?;
        match &event.payload {
            EventPayload::Chat(_) => {
                let Some(request) = state.chat.last().and_then(AgentRequest::from_message) else {
                    continue;
                };
                let ctx = ContextSnapshot::project(&state, task_prompt, orchestrator.config().recent_chat);
                let (intent, _) = orchestrator.classify_intent(&request, &ctx).await;
                routing.push(RouteRow {
                    seq: event.seq,
                    requester: ctx.name_of(&request.requester),
                    body: request.message.body.clone(),
                    intent,
                    replied_by: None,
                    recorded_intent: None,
                });
            }
            EventPayload::AgentReply(r) => {
                replies.insert(r.in_reply_to, (r.agent_id.clone(), r.intent));
            }
            EventPayload::TriggerFired(f) => recorded.push(f.clone()),
            _ => {}
        }
    }
    for row in &mut routing {
        if let Some((agent, intent)) = replies.remove(&row.seq) {
            row.replied_by = Some(agent);
            row.recorded_intent = intent;
        }
    }

    let oracle = oracle_scan(events, params);
    let agreement = compare_firings(&recorded, &oracle.firings, params.tick_ms);
    let defaults = TriggerParams::default();
    let what_if = (*params != defaults).then(|| {
        let baseline = count_by_kind(&oracle_scan(events, &defaults).firings);
        let current = count_by_kind(&oracle.firings);
        TriggerKind::ALL
            .iter()
            .map(|k| KindDelta {
                kind: *k,
                baseline: baseline[k],
                what_if: current[k],
            })
            .collect()
    });

    let wb = &state.whiteboard;
    let names = |p: &ParticipantId| {
        state
            .participants
            .get(p)
            .map_or_else(|| p.to_string(), |x| x.display_name.clone())
    };
    let participants = state
        .participants
        .values()
        .map(|p| ParticipantRow {
            participant_id: p.participant_id.clone(),
            display_name: p.display_name.clone(),
            events: state.participation.get(&p.participant_id).copied().unwrap_or(0),
            notes: wb.notes.values().filter(|n| n.author == p.participant_id).count() as u64,
        })
        .collect();
    let mut by_age: Vec<_> = wb.notes.values().collect();
    by_age.sort_by_key(|n| (n.created_at, n.note_id.as_str().len(), n.note_id.as_str()));
    let notes = by_age
        .into_iter()
        .map(|n| NoteRow {
            note_id: n.note_id.clone(),
            author: names(&n.author),
            content: n.content.clone(),
            links_to: wb
                .links
                .values()
                .filter(|l| l.from_note == n.note_id)
                .map(|l| l.to_note.clone())
                .collect(),
        })
        .collect();
    Ok(Report {
        events: state.last_seq,
        started_at: state.started_at.unwrap_or(0),
        duration_ms: state.elapsed_ms(),
        participants,
        notes,
        links: wb.links.len(),
        firings: oracle.firings,
        metrics: oracle.metrics,
        agreement,
        routing,
        what_if,
        deterministic: orchestrator.provider().is_deterministic(),
    })
}

fn target_name(report: &Report, target: &Target) -> String {
    match target {
        Target::Group => "group".to_owned(),
        Target::Participant(p) => report
            .participants
            .iter()
            .find(|r| &r.participant_id == p)
            .map_or_else(|| p.to_string(), |r| r.display_name.clone()),
    }
}

fn clock(ms: Millis) -> String {
    let s = ms / 1000;
    format!("{:02}:{:02}:{:02}.{:03}", s / 3600, s / 60 % 60, s % 60, ms % 1000)
}

impl Report {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "events: {}  duration: {}", self.events, clock(self.duration_ms));
        if !self.deterministic {
            let _ = writeln!(
                out,
                "note: routing used a live provider; this report is not reproducible"
            );
        }

        let _ = writeln!(out, "\nparticipation");
        if self.participants.is_empty() {
            let _ = writeln!(out, "  (nobody joined)");
        }
        for p in &self.participants {
            let _ = writeln!(
                out,
                "  {:<12} {:>5} events {:>4} notes",
                p.display_name, p.events, p.notes
            );
        }

        let _ = writeln!(out, "\nwhiteboard: {} notes, {} links", self.notes.len(), self.links);
        for n in &self.notes {
            let links: Vec<&str> = n.links_to.iter().map(NoteId::as_str).collect();
            let arrow = if links.is_empty() {
                String::new()
            } else {
                format!("  -> {}", links.join(", "))
            };
            let _ = writeln!(out, "  {:<5} {:<10} {}{arrow}", n.note_id, n.author, n.content);
        }

        let _ = writeln!(out, "\ntrigger timeline ({} firings)", self.firings.len());
        for f in &self.firings {
            let _ = writeln!(
                out,
                "  {}  {:<22} {:<10} seq {}..{}",
                clock(f.at.saturating_sub(self.started_at)),
                f.kind.as_str(),
                target_name(self, &f.target),
                f.evidence.from_seq,
                f.evidence.to_seq
            );
        }
        let _ = writeln!(out, "\ntrigger metrics");
        for kind in TriggerKind::ALL {
            let c = self.metrics.get(kind);
            let _ = writeln!(
                out,
                "  {:<22} fired {:>4}  suppressed {:>4}",
                kind.as_str(),
                c.fired,
                c.suppressed
            );
        }

        let a = &self.agreement;
        let verdict = if a.is_exact() { "match" } else { "MISMATCH" };
        let _ = writeln!(
            out,
            "\nrecorded vs oracle: {verdict} (recorded {}, oracle {}, matched {})",
            a.recorded, a.oracle, a.matched
        );
        for k in &a.only_recorded {
            let at = clock(k.at.saturating_sub(self.started_at));
            let _ = writeln!(
                out,
                "  only in log:    {} {} at {at}",
                k.kind.as_str(),
                target_name(self, &k.target)
            );
        }
        for k in &a.only_oracle {
            let at = clock(k.at.saturating_sub(self.started_at));
            let _ = writeln!(
                out,
                "  only in oracle: {} {} at {at}",
                k.kind.as_str(),
                target_name(self, &k.target)
            );
        }

        if let Some(deltas) = &self.what_if {
            let _ = writeln!(out, "\nwhat-if vs default params");
            for d in deltas {
                let diff = d.what_if as i64 - d.baseline as i64;
                let _ = writeln!(
                    out,
                    "  {:<22} {:>4} -> {:>4} ({diff:+})",
                    d.kind.as_str(),
                    d.baseline,
                    d.what_if
                );
            }
        }

        let _ = writeln!(out, "\nrouting ({} boss mentions)", self.routing.len());
        for r in &self.routing {
            let recorded = match (&r.replied_by, r.recorded_intent) {
                (Some(agent), Some(i)) => format!("logged {agent} ({})", i.label()),
                (Some(agent), None) => format!("logged {agent}"),
                (None, _) => "no reply logged".to_owned(),
            };
            let _ = writeln!(
                out,
                "  #{:<5} {:<10} {:<11} {recorded}  \"{}\"",
                r.seq,
                r.requester,
                r.intent.label(),
                r.body
            );
        }
        out
    }
}
