//! Brute-force reference for the streaming trigger engine.
//!
//! Nothing here is incremental: every evaluation point re-derives each
//! detector predicate from the raw list of activity events, and cooldowns are
//! checked by scanning every earlier passed firing. It is slow on purpose and
//! shares no state-keeping code with [`crate::engine`].

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::engine::TriggerMetrics;
use crate::ids::ParticipantId;
use crate::session::{EventPayload, SessionEvent};
use crate::text::normalize;
use crate::trigger::{Evidence, Statistic, Target, TriggerFiring, TriggerKind, TriggerParams};
use crate::Millis;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OracleReport {
    pub firings: Vec<TriggerFiring>,
    pub metrics: TriggerMetrics,
}

enum Point {
    Tick(Millis),
    Event(usize),
}

/// Every firing the detectors would produce over a complete log.
///
/// Ticks run from the first activity event up to the timestamp of the last
/// event of any kind.
pub fn oracle_scan(log: &[SessionEvent], params: &TriggerParams) -> OracleReport {
    let activity: Vec<&SessionEvent> = log.iter().filter(|e| e.payload.is_activity()).collect();
    let mut report = OracleReport::default();
    let (Some(first), Some(last)) = (activity.first(), log.last()) else {
        return report;
    };
    let t0 = first.at;
    let horizon = last.at;

    let mut points = Vec::new();
    let mut tick = t0 + params.tick_ms;
    for (i, e) in activity.iter().enumerate() {
        while tick <= e.at {
            points.push(Point::Tick(tick));
            tick += params.tick_ms;
        }
        points.push(Point::Event(i));
    }
    while tick <= horizon {
        points.push(Point::Tick(tick));
        tick += params.tick_ms;
    }

    for point in points {
        let (t, prefix, event): (Millis, Vec<&SessionEvent>, Option<&SessionEvent>) = match point {
            Point::Tick(t) => (t, activity.iter().copied().filter(|e| e.at < t).collect(), None),
            Point::Event(i) => (activity[i].at, activity[..=i].to_vec(), Some(activity[i])),
        };
        for candidate in candidates(t, &prefix, event, t0, params) {
            let blocked = report.firings.iter().any(|f| {
                f.kind == candidate.kind && f.target == candidate.target && f.at + params.cooldown_ms > candidate.at
            });
            report.metrics.record(candidate.kind, !blocked);
            if !blocked {
                report.firings.push(candidate);
            }
        }
    }
    report
}

fn candidates(
    t: Millis,
    prefix: &[&SessionEvent],
    event: Option<&SessionEvent>,
    t0: Millis,
    params: &TriggerParams,
) -> Vec<TriggerFiring> {
    let mut out = Vec::new();
    let Some(newest) = prefix.last() else {
        return out;
    };
    let to_seq = newest.seq;
    let make = |kind, target, from_seq, statistic| TriggerFiring {
        kind,
        target,
        at: t,
        evidence: Evidence {
            from_seq,
            to_seq,
            statistic,
        },
        message: String::new(),
    };

    if let Some(SessionEvent {
        payload: EventPayload::Chat(chat),
        seq,
        ..
    }) = event
    {
        let body = normalize(&chat.body);
        let hit = params.frustration_lexicon.iter().find(|phrase| {
            let p = normalize(phrase);
            !p.is_empty() && body.contains(p.as_str())
        });
        if let Some(phrase) = hit {
            out.push(make(
                TriggerKind::Frustration,
                Target::Participant(chat.author.clone()),
                *seq,
                Statistic::Phrase { phrase: phrase.clone() },
            ));
        }
    }

    // Last activity per joined participant, by scanning the whole prefix.
    let mut last_seen: BTreeMap<ParticipantId, (Millis, u64)> = BTreeMap::new();
    for e in prefix {
        if let EventPayload::Join(j) = &e.payload {
            last_seen.insert(j.participant_id.clone(), (e.at, e.seq));
        }
    }
    for e in prefix {
        if let Some(entry) = e.payload.actor().and_then(|a| last_seen.get_mut(a)) {
            *entry = (e.at, e.seq);
        }
    }
    if last_seen.len() >= 2 {
        let span = params.t_inactive_ms;
        for (p, &(at, seq)) in &last_seen {
            let silent = t - at;
            let others_active = prefix
                .iter()
                .any(|e| e.payload.actor().is_some_and(|a| a != p) && e.at + span > t);
            if silent >= span && others_active {
                out.push(make(
                    TriggerKind::Inactivity,
                    Target::Participant(p.clone()),
                    seq,
                    Statistic::Silence { silent_ms: silent },
                ));
            }
        }
    }

    let w = params.w_participation_ms;
    if t - t0 >= 2 * w {
        let current = prefix.iter().filter(|e| e.at + w > t).count() as u32;
        let in_previous = |e: &&&SessionEvent| e.at + 2 * w > t && e.at + w <= t;
        let previous = prefix.iter().filter(in_previous).count() as u32;
        if previous >= params.min_prev_rate
            && previous > 0
            && f64::from(current) < params.decline_ratio * f64::from(previous)
        {
            let from = prefix.iter().find(|e| e.at + 2 * w > t).map_or(to_seq, |e| e.seq);
            out.push(make(
                TriggerKind::ParticipationDecline,
                Target::Group,
                from,
                Statistic::Counts { previous, current },
            ));
        }
    }

    let span = params.t_stall_ms;
    let last_board = prefix.iter().rev().find(|e| e.payload.is_whiteboard_mutation());
    let (since, from) = match last_board {
        Some(e) => (e.at, e.seq + 1),
        None => (t0, prefix[0].seq),
    };
    let chatting = prefix
        .iter()
        .any(|e| matches!(e.payload, EventPayload::Chat(_)) && e.at + span > t);
    if t - since >= span && chatting {
        out.push(make(
            TriggerKind::ProgressStall,
            Target::Group,
            from,
            Statistic::Stall { idle_ms: t - since },
        ));
    }
    out
}
