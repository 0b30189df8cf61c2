//! Random valid session logs for property tests.

#![allow(dead_code)]

use coregulate_core::session::*;
use coregulate_core::trigger::{Evidence, Statistic, Target, TriggerFiring, TriggerKind};
use coregulate_core::{Intent, Millis};

/// xorshift64*; good enough to drive structure generation.
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1)
    }
    pub fn next(&mut self) -> u64 {
        self.0 ^= self.0 >> 12;
        self.0 ^= self.0 << 25;
        self.0 ^= self.0 >> 27;
        self.0.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }
    pub fn below(&mut self, n: u64) -> u64 {
        self.next() % n.max(1)
    }
    pub fn chance(&mut self, percent: u64) -> bool {
        self.below(100) < percent
    }
    pub fn pick<'a, T>(&mut self, xs: &'a [T]) -> &'a T {
        &xs[self.below(xs.len() as u64) as usize]
    }
}

const BODIES: &[&str] = &[
    "what if we use cardboard",
    "I don't understand this at all",
    "@boss how should we divide the work?",
    "@boss what materials are waterproof?",
    "ok sounds good",
    "I give up",
    "let's add a note",
    "@BOSS how are we doing on time?",
    "we are stuck",
    "nice idea",
];

pub struct LogBuilder {
    pub events: Vec<SessionEvent>,
    pub state: SessionState,
    pub now: Millis,
}

impl LogBuilder {
    pub fn new(start: Millis) -> Self {
        Self {
            events: Vec::new(),
            state: SessionState::default(),
            now: start,
        }
    }

    pub fn push(&mut self, payload: EventPayload) {
        let event = SessionEvent {
            seq: self.events.len() as u64 + 1,
            at: self.now,
            payload,
        };
        self.state.apply(&event).expect("generator produced an invalid event");
        self.events.push(event);
    }

    pub fn participants(&self) -> Vec<coregulate_core::ParticipantId> {
        self.state.participants.keys().cloned().collect()
    }
}

fn advance(rng: &mut Rng, b: &mut LogBuilder) {
    let step = match rng.below(10) {
        0 => 0,
        1 => 1,
        2 => 5_000 - b.now % 5_000, // land exactly on the tick grid
        3 => rng.below(200_000),
        4 => 180_000,
        _ => rng.below(40_000),
    };
    b.now += step;
}

/// A gap-free, referentially valid log. With `agents`, agent replies,
/// trigger firings and acknowledgments are mixed in.
pub fn random_log(seed: u64, len: usize, agents: bool) -> Vec<SessionEvent> {
    let mut rng = Rng::new(seed);
    let mut b = LogBuilder::new(1_700_000_000_000 + rng.below(10_000));
    let group = 2 + rng.below(5);
    for i in 0..group.min(2) {
        b.push(EventPayload::Join(JoinData {
            participant_id: format!("p{}", i + 1).into(),
            display_name: format!("S{i}"),
        }));
    }
    // Some members are much quieter than others.
    let weights: Vec<u64> = (0..group).map(|_| 1 + rng.below(10)).collect();
    while b.events.len() < len {
        advance(&mut rng, &mut b);
        let joined = b.state.participants.len() as u64;
        if joined < group && rng.chance(5) {
            let id = joined + 1;
            b.push(EventPayload::Join(JoinData {
                participant_id: format!("p{id}").into(),
                display_name: format!("S{id}"),
            }));
            continue;
        }
        let total: u64 = weights[..joined as usize].iter().sum();
        let mut roll = rng.below(total);
        let mut who = 0;
        while roll >= weights[who] {
            roll -= weights[who];
            who += 1;
        }
        let author: coregulate_core::ParticipantId = format!("p{}", who + 1).into();
        let notes: Vec<_> = b.state.whiteboard.notes.keys().cloned().collect();
        let links: Vec<_> = b.state.whiteboard.links.keys().cloned().collect();
        let payload = match rng.below(12) {
            0..=4 => {
                let body = rng.pick(BODIES).to_string();
                EventPayload::Chat(ChatData {
                    mentions: coregulate_core::parse_mentions(&body),
                    author,
                    body,
                })
            }
            5 | 6 => EventPayload::NoteCreate(NoteCreateData {
                note_id: b.state.next_note_id(),
                author,
                kind: *rng.pick(&[NoteKind::Text, NoteKind::Image, NoteKind::Video]),
                content: format!("idea {}", rng.below(1000)),
                position: Position {
                    x: rng.below(2000) as f64 / 3.0,
                    y: -(rng.below(900) as f64) * 0.1,
                },
            }),
            7 if !notes.is_empty() => EventPayload::NoteUpdate(NoteUpdateData {
                note_id: rng.pick(&notes).clone(),
                author,
                content: rng.chance(50).then(|| format!("edited {}", rng.below(50))),
                position: rng.chance(50).then(|| Position {
                    x: 0.1 * rng.below(100) as f64,
                    y: 1e-3,
                }),
            }),
            8 if !notes.is_empty() => EventPayload::NoteDelete(NoteDeleteData {
                note_id: rng.pick(&notes).clone(),
                author,
            }),
            9 | 10 if notes.len() >= 2 => {
                let from = rng.pick(&notes).clone();
                let to = rng.pick(&notes).clone();
                if from == to {
                    continue;
                }
                EventPayload::LinkCreate(LinkCreateData {
                    link_id: b.state.next_link_id(),
                    from_note: from,
                    to_note: to,
                    author,
                })
            }
            11 if !links.is_empty() => EventPayload::LinkDelete(LinkDeleteData {
                link_id: rng.pick(&links).clone(),
                author,
            }),
            _ if agents && rng.chance(50) => match rng.below(3) {
                0 => EventPayload::AgentReply(AgentReplyData {
                    agent_id: "planning".into(),
                    intent: Some(*rng.pick(&Intent::ALL)),
                    body: "Try splitting roles.".into(),
                    in_reply_to: b.state.last_seq,
                    context_seq: b.state.last_seq,
                }),
                1 => EventPayload::TriggerFired(TriggerFiring {
                    kind: *rng.pick(&TriggerKind::ALL),
                    target: if rng.chance(50) {
                        Target::Group
                    } else {
                        Target::Participant(author)
                    },
                    at: b.now,
                    evidence: Evidence {
                        from_seq: 1,
                        to_seq: b.state.last_seq,
                        statistic: Statistic::Stall { idle_ms: 1 },
                    },
                    message: "keep going".into(),
                }),
                _ => EventPayload::LightbulbAck(LightbulbAckData { participant_id: author }),
            },
            _ => continue,
        };
        b.push(payload);
    }
    b.events
}
