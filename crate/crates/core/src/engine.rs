//! Streaming trigger detection.
//!
//! The engine consumes the session's activity events in seq order and is
//! re-evaluated on a fixed tick grid (`t0 + k * tick_ms`, `t0` = time of the
//! first activity event) so that time-based triggers fire during silence.
//!
//! Ordering of evaluation points: the tick at time `T` is evaluated before any
//! event stamped `>= T` and sees exactly the events stamped `< T`. An event
//! evaluation sees every event up to and including itself. Agent replies,
//! trigger firings and lightbulb acknowledgments are not activity and are
//! ignored.
//!
//! At each point the candidates are produced in a fixed order (frustration,
//! inactivity by participant id, participation decline, progress stall) and
//! pass through the cooldown gate.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::ids::ParticipantId;
use crate::session::{EventPayload, SessionEvent};
use crate::text::normalize;
use crate::trigger::{Evidence, Statistic, Target, TriggerFiring, TriggerKind, TriggerParams};
use crate::Millis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct KindCounter {
    pub fired: u64,
    pub suppressed: u64,
}

/// Firings and suppressions per trigger kind.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TriggerMetrics(pub BTreeMap<TriggerKind, KindCounter>);

impl TriggerMetrics {
    pub fn record(&mut self, kind: TriggerKind, passed: bool) {
        let c = self.0.entry(kind).or_default();
        if passed {
            c.fired += 1;
        } else {
            c.suppressed += 1;
        }
    }

    pub fn get(&self, kind: TriggerKind) -> KindCounter {
        self.0.get(&kind).copied().unwrap_or_default()
    }

    pub fn total_fired(&self) -> u64 {
        self.0.values().map(|c| c.fired).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CooldownVerdict {
    Pass,
    Suppressed,
}

/// Suppresses a firing when one of the same kind and target passed less than
/// `cooldown_ms` earlier.
#[derive(Debug, Clone, Default)]
pub struct CooldownGate {
    cooldown_ms: Millis,
    last_pass: BTreeMap<(TriggerKind, Target), Millis>,
    metrics: TriggerMetrics,
}

impl CooldownGate {
    pub fn new(cooldown_ms: Millis) -> Self {
        Self {
            cooldown_ms,
            ..Default::default()
        }
    }

    pub fn apply(&mut self, firing: &TriggerFiring) -> CooldownVerdict {
        let key = (firing.kind, firing.target.clone());
        let verdict = match self.last_pass.get(&key) {
            Some(&last) if last + self.cooldown_ms > firing.at => CooldownVerdict::Suppressed,
            _ => CooldownVerdict::Pass,
        };
        if verdict == CooldownVerdict::Pass {
            self.last_pass.insert(key, firing.at);
        }
        self.metrics.record(firing.kind, verdict == CooldownVerdict::Pass);
        verdict
    }

    pub fn metrics(&self) -> &TriggerMetrics {
        &self.metrics
    }
}

#[derive(Debug, Clone, Copy)]
struct Seen {
    at: Millis,
    seq: u64,
}

#[derive(Debug, Clone)]
pub struct TriggerEngine {
    params: TriggerParams,
    lexicon: Vec<(String, String)>,
    first: Option<Seen>,
    next_tick: Option<Millis>,
    last_seq: u64,
    members: BTreeMap<ParticipantId, Seen>,
    /// Activity within the two participation windows, oldest first.
    window: VecDeque<Seen>,
    last_whiteboard: Option<Seen>,
    last_chat_at: Option<Millis>,
    gate: CooldownGate,
}

impl TriggerEngine {
    pub fn new(params: TriggerParams) -> Self {
        let lexicon = params
            .frustration_lexicon
            .iter()
            .map(|p| (p.clone(), normalize(p)))
            .filter(|(_, n)| !n.is_empty())
            .collect();
        Self {
            gate: CooldownGate::new(params.cooldown_ms),
            params,
            lexicon,
            first: None,
            next_tick: None,
            last_seq: 0,
            members: BTreeMap::new(),
            window: VecDeque::new(),
            last_whiteboard: None,
            last_chat_at: None,
        }
    }

    pub fn params(&self) -> &TriggerParams {
        &self.params
    }

    pub fn metrics(&self) -> &TriggerMetrics {
        self.gate.metrics()
    }

    /// Time of the next tick not yet evaluated, once the session has started.
    pub fn next_tick(&self) -> Option<Millis> {
        self.next_tick
    }

    /// Evaluates every pending tick at or before `now`. Call this before
    /// stamping a new event with `now`.
    pub fn advance_to(&mut self, now: Millis) -> Vec<TriggerFiring> {
        let mut out = Vec::new();
        while let Some(tick) = self.next_tick.filter(|t| *t <= now) {
            self.evaluate(tick, None, &mut out);
            self.next_tick = Some(tick + self.params.tick_ms);
        }
        out
    }

    /// Feeds one logged event. Pending ticks up to its timestamp run first;
    /// their firings precede the event's own in the result.
    pub fn observe(&mut self, event: &SessionEvent) -> Vec<TriggerFiring> {
        if !event.payload.is_activity() {
            return Vec::new();
        }
        let mut out = self.advance_to(event.at);
        let seen = Seen {
            at: event.at,
            seq: event.seq,
        };
        if self.first.is_none() {
            self.first = Some(seen);
            self.next_tick = Some(event.at + self.params.tick_ms);
        }
        self.last_seq = event.seq;
        self.window.push_back(seen);
        match &event.payload {
            EventPayload::Join(d) => {
                self.members.insert(d.participant_id.clone(), seen);
            }
            EventPayload::Chat(_) => self.last_chat_at = Some(event.at),
            p if p.is_whiteboard_mutation() => self.last_whiteboard = Some(seen),
            _ => {}
        }
        if let Some(actor) = event.payload.actor() {
            if let Some(m) = self.members.get_mut(actor) {
                *m = seen;
            }
        }
        self.evaluate(event.at, Some(event), &mut out);
        out
    }

    fn evaluate(&mut self, t: Millis, event: Option<&SessionEvent>, out: &mut Vec<TriggerFiring>) {
        self.prune(t);
        let mut candidates = Vec::new();
        if let Some(f) = event.and_then(|e| self.detect_frustration(e)) {
            candidates.push(f);
        }
        candidates.extend(self.detect_inactivity(t));
        candidates.extend(self.detect_participation_decline(t));
        candidates.extend(self.detect_progress_stall(t));
        for c in candidates {
            if self.gate.apply(&c) == CooldownVerdict::Pass {
                out.push(c);
            }
        }
    }

    fn prune(&mut self, t: Millis) {
        let span = 2 * self.params.w_participation_ms;
        while self.window.front().is_some_and(|s| s.at + span <= t) {
            self.window.pop_front();
        }
    }

    fn firing(
        &self,
        kind: TriggerKind,
        target: Target,
        at: Millis,
        from_seq: u64,
        statistic: Statistic,
    ) -> TriggerFiring {
        TriggerFiring {
            kind,
            target,
            at,
            evidence: Evidence {
                from_seq,
                to_seq: self.last_seq,
                statistic,
            },
            message: String::new(),
        }
    }

    /// Fires for the author of a student chat containing a lexicon phrase.
    pub fn detect_frustration(&self, event: &SessionEvent) -> Option<TriggerFiring> {
        let EventPayload::Chat(chat) = &event.payload else {
            return None;
        };
        let body = normalize(&chat.body);
        let (phrase, _) = self.lexicon.iter().find(|(_, n)| body.contains(n.as_str()))?;
        Some(TriggerFiring {
            kind: TriggerKind::Frustration,
            target: Target::Participant(chat.author.clone()),
            at: event.at,
            evidence: Evidence {
                from_seq: event.seq,
                to_seq: event.seq,
                statistic: Statistic::Phrase { phrase: phrase.clone() },
            },
            message: String::new(),
        })
    }

    /// Participants silent for at least `t_inactive_ms` while someone else
    /// was active within the last `t_inactive_ms`.
    pub fn detect_inactivity(&self, t: Millis) -> Vec<TriggerFiring> {
        let span = self.params.t_inactive_ms;
        if self.members.len() < 2 {
            return Vec::new();
        }
        self.members
            .iter()
            .filter(|(p, seen)| {
                t - seen.at >= span && self.members.iter().any(|(q, other)| q != *p && other.at + span > t)
            })
            .map(|(p, seen)| {
                self.firing(
                    TriggerKind::Inactivity,
                    Target::Participant(p.clone()),
                    t,
                    seen.seq,
                    Statistic::Silence { silent_ms: t - seen.at },
                )
            })
            .collect()
    }

    /// Group activity in the current window fell below `decline_ratio` of the
    /// preceding window, which held at least `min_prev_rate` events.
    pub fn detect_participation_decline(&self, t: Millis) -> Option<TriggerFiring> {
        let w = self.params.w_participation_ms;
        let first = self.first?;
        if t - first.at < 2 * w {
            return None;
        }
        // `window` holds exactly the events stamped in (t - 2w, t] once pruned.
        let split = self.window.partition_point(|s| s.at + w <= t);
        let previous = split as u32;
        let current = (self.window.len() - split) as u32;
        if previous >= self.params.min_prev_rate
            && previous > 0
            && f64::from(current) < self.params.decline_ratio * f64::from(previous)
        {
            let from = self.window.front().map_or(self.last_seq, |s| s.seq);
            Some(self.firing(
                TriggerKind::ParticipationDecline,
                Target::Group,
                t,
                from,
                Statistic::Counts { previous, current },
            ))
        } else {
            None
        }
    }

    /// No whiteboard change for at least `t_stall_ms` although the group kept
    /// chatting within that span.
    pub fn detect_progress_stall(&self, t: Millis) -> Option<TriggerFiring> {
        let span = self.params.t_stall_ms;
        let first = self.first?;
        let (since, from) = match self.last_whiteboard {
            Some(w) => (w.at, w.seq + 1),
            None => (first.at, first.seq),
        };
        let chatting = self.last_chat_at.is_some_and(|c| c + span > t);
        (t - since >= span && chatting).then(|| {
            self.firing(
                TriggerKind::ProgressStall,
                Target::Group,
                t,
                from,
                Statistic::Stall { idle_ms: t - since },
            )
        })
    }
}
