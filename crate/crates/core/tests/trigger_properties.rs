mod common;

use common::random_log;
use coregulate_core::oracle::oracle_scan;
use coregulate_core::session::{EventPayload, SessionEvent};
use coregulate_core::{TriggerEngine, TriggerFiring, TriggerParams};
use proptest::prelude::*;

fn stream(log: &[SessionEvent], params: &TriggerParams) -> (Vec<TriggerFiring>, coregulate_core::TriggerMetrics) {
    let mut engine = TriggerEngine::new(params.clone());
    let mut out = Vec::new();
    for e in log {
        out.extend(engine.observe(e));
    }
    if let Some(last) = log.last() {
        out.extend(engine.advance_to(last.at));
    }
    (out, engine.metrics().clone())
}

fn params_strategy() -> impl Strategy<Value = TriggerParams> {
    (
        prop_oneof![Just(180_000u64), 10_000u64..400_000],
        prop_oneof![Just(120_000u64), 10_000u64..300_000],
        prop_oneof![Just(0.5f64), 0.05f64..=1.0],
        0u32..8,
        prop_oneof![Just(300_000u64), 10_000u64..600_000],
        prop_oneof![Just(300_000u64), 1u64..600_000],
        prop_oneof![Just(5_000u64), 1_000u64..20_000],
    )
        .prop_map(
            |(t_inactive_ms, w, decline_ratio, min_prev_rate, t_stall_ms, cooldown_ms, tick_ms)| TriggerParams {
                t_inactive_ms,
                w_participation_ms: w,
                decline_ratio,
                min_prev_rate,
                t_stall_ms,
                cooldown_ms,
                tick_ms,
                ..TriggerParams::default()
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn streaming_matches_oracle(seed in any::<u64>(), len in 2usize..260, params in params_strategy()) {
        let log = random_log(seed, len, true);
        let (streamed, metrics) = stream(&log, &params);
        let oracle = oracle_scan(&log, &params);
        prop_assert_eq!(&streamed, &oracle.firings);
        prop_assert_eq!(metrics, oracle.metrics);
    }

    #[test]
    fn cooldown_is_never_violated(seed in any::<u64>(), params in params_strategy()) {
        let log = random_log(seed, 250, false);
        let (fired, _) = stream(&log, &params);
        for (i, a) in fired.iter().enumerate() {
            for b in &fired[i + 1..] {
                if a.kind == b.kind && a.target == b.target {
                    prop_assert!(b.at - a.at >= params.cooldown_ms);
                }
            }
            prop_assert!(a.evidence.from_seq >= 1 && a.evidence.from_seq <= a.evidence.to_seq);
        }
    }

    #[test]
    fn reactive_traffic_does_not_change_triggers(seed in any::<u64>()) {
        let params = TriggerParams::default();
        let log = random_log(seed, 250, true);
        // Strip every boss mention and every agent reply, then renumber.
        let mut stripped: Vec<SessionEvent> = Vec::new();
        let mut renumber = std::collections::BTreeMap::new();
        for e in &log {
            let payload = match &e.payload {
                EventPayload::AgentReply(_) => continue,
                EventPayload::Chat(c) => {
                    let mut c = c.clone();
                    let body = c.body.replace("@boss", "").replace("@BOSS", "");
                    c.body = if body.trim().is_empty() { "ok".into() } else { body };
                    c.mentions.clear();
                    EventPayload::Chat(c)
                }
                p => p.clone(),
            };
            let seq = stripped.len() as u64 + 1;
            renumber.insert(e.seq, seq);
            stripped.push(SessionEvent { seq, at: e.at, payload });
        }
        // A trailing reply can extend the horizon; keep it comparable.
        let horizon = log.last().unwrap().at;
        let fire = |events: &[SessionEvent]| {
            let mut engine = TriggerEngine::new(params.clone());
            let mut out: Vec<_> = events.iter().flat_map(|e| engine.observe(e)).collect();
            out.extend(engine.advance_to(horizon));
            out.into_iter().map(|f| (f.kind, f.target, f.at)).collect::<Vec<_>>()
        };
        prop_assert_eq!(fire(&log), fire(&stripped));
    }
}

#[test]
fn generated_logs_exercise_every_detector() {
    let params = TriggerParams::default();
    let mut seen = std::collections::BTreeMap::new();
    for seed in 0..60 {
        let log = random_log(seed, 300, false);
        for f in stream(&log, &params).0 {
            *seen.entry(f.kind).or_insert(0u32) += 1;
        }
    }
    for kind in coregulate_core::TriggerKind::ALL {
        assert!(
            seen.get(&kind).copied().unwrap_or(0) > 0,
            "{kind} never fired: {seen:?}"
        );
    }
}
