mod common;

use std::time::{Duration, Instant};

use common::{gateway, gateway_with, orchestrator_with, read_log, session_config, Client};
use coregulate::clock::ManualClock;
use coregulate::gateway::{ClientCommand, CreateError, ErrorCode, ServerFrame};
use coregulate::orchestrator::APOLOGY;
use coregulate::provider::Fault;
use coregulate_core::session::{NoteKind, Position};
use coregulate_core::{fold, EventPayload, Mode, NoteId, SessionConfig, Target, TriggerKind};
use futures::{SinkExt, StreamExt};
use serde_json::{json, Value};
use tokio_tungstenite::tungstenite::Message;

const T0: u64 = 1_700_000_000_000;

fn note(content: &str) -> ClientCommand {
    ClientCommand::NoteCreate {
        kind: NoteKind::Text,
        content: content.into(),
        position: Position::default(),
    }
}

#[tokio::test]
async fn members_see_the_same_ordered_stream() {
    let dir = tempfile::tempdir().unwrap();
    let clock = ManualClock::new(T0);
    let gw = gateway(dir.path(), &clock);
    let s = gw
        .create_session(session_config("order", Mode::GenericAssistant))
        .unwrap();
    let mut clients = vec![
        Client::join(&s, "Ana").await,
        Client::join(&s, "Ben").await,
        Client::join(&s, "Cy").await,
    ];
    for i in 0..7 {
        clock.advance(1000);
        clients[i % 3].chat(&format!("message {i}")).await.unwrap();
    }
    s.settle().await;

    let mut streams = Vec::new();
    for c in &mut clients {
        let frames = c.drain();
        assert!(
            matches!(frames[0], ServerFrame::Snapshot { .. }),
            "first frame is a snapshot"
        );
        streams.push(
            frames
                .into_iter()
                .filter_map(|f| match f {
                    ServerFrame::Event(e) => Some(e.seq),
                    _ => None,
                })
                .collect::<Vec<_>>(),
        );
    }
    // Ana saw all three joins, later members start from their own.
    assert_eq!(streams[0], (1..=10).collect::<Vec<_>>());
    assert_eq!(streams[1], (2..=10).collect::<Vec<_>>());
    assert_eq!(streams[2], (3..=10).collect::<Vec<_>>());
    assert_eq!(read_log(dir.path(), "order").len(), 10);
}

#[tokio::test]
async fn seventh_member_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let clock = ManualClock::new(T0);
    let gw = gateway(dir.path(), &clock);
    let s = gw.create_session(session_config("full", Mode::Miracle)).unwrap();
    let mut keep = Vec::new();
    for name in ["A", "B", "C", "D", "E", "F"] {
        keep.push(Client::join(&s, name).await);
    }
    let late = Client::connect(&s).await;
    let err = late
        .send(ClientCommand::Join {
            display_name: "G".into(),
        })
        .await
        .unwrap_err();
    assert_eq!(err.code, ErrorCode::SessionFull);
    assert_eq!(s.state().await.unwrap().participants.len(), 6);
}

#[tokio::test]
async fn invalid_commands_leave_the_log_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let clock = ManualClock::new(T0);
    let gw = gateway(dir.path(), &clock);
    let s = gw.create_session(session_config("invalid", Mode::Miracle)).unwrap();

    let mut stranger = Client::connect(&s).await;
    assert_eq!(stranger.chat("hi").await.unwrap_err().code, ErrorCode::NotJoined);
    let frames = stranger.drain();
    assert!(matches!(frames.last(), Some(ServerFrame::Rejection(r)) if r.code == ErrorCode::NotJoined));

    let ana = Client::join(&s, "Ana").await;
    let missing = NoteId::new("n99");
    let cases = [
        (
            ClientCommand::NoteDelete {
                note_id: missing.clone(),
            },
            ErrorCode::UnknownReference,
        ),
        (
            ClientCommand::NoteUpdate {
                note_id: missing.clone(),
                content: Some("x".into()),
                position: None,
            },
            ErrorCode::UnknownReference,
        ),
        (
            ClientCommand::LinkCreate {
                from_note: NoteId::new("n98"),
                to_note: missing,
            },
            ErrorCode::UnknownReference,
        ),
        (ClientCommand::LightbulbAck, ErrorCode::AckWhileIdle),
        (
            ClientCommand::Join {
                display_name: "Again".into(),
            },
            ErrorCode::ValidationFailed,
        ),
    ];
    for (cmd, code) in cases {
        assert_eq!(ana.send(cmd).await.unwrap_err().code, code);
    }
    assert_eq!(ana.send(note("first idea")).await.unwrap(), 2);
    let n1 = NoteId::new("n1");
    let self_link = ClientCommand::LinkCreate {
        from_note: n1.clone(),
        to_note: n1.clone(),
    };
    assert_eq!(ana.send(self_link).await.unwrap_err().code, ErrorCode::ValidationFailed);
    let empty_update = ClientCommand::NoteUpdate {
        note_id: n1,
        content: None,
        position: None,
    };
    assert_eq!(
        ana.send(empty_update).await.unwrap_err().code,
        ErrorCode::ValidationFailed
    );

    let log = read_log(dir.path(), "invalid");
    assert_eq!(log.iter().map(|e| e.seq).collect::<Vec<_>>(), [1, 2]);
}

#[tokio::test]
async fn rejoin_resumes_with_a_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let clock = ManualClock::new(T0);
    let gw = gateway(dir.path(), &clock);
    let s = gw
        .create_session(session_config("rejoin", Mode::GenericAssistant))
        .unwrap();
    let ana = Client::join(&s, "Ana").await;
    let ben = Client::join(&s, "Ben").await;
    ana.chat("one").await.unwrap();

    // Name taken while Ana is still connected.
    let imposter = Client::connect(&s).await;
    let err = imposter
        .send(ClientCommand::Join {
            display_name: "Ana".into(),
        })
        .await
        .unwrap_err();
    assert_eq!(err.code, ErrorCode::ValidationFailed);

    s.disconnect(ana.conn).await;
    ben.chat("two").await.unwrap();
    ben.chat("three").await.unwrap();

    let mut back = Client::connect(&s).await;
    assert_eq!(
        back.send(ClientCommand::Join {
            display_name: "Ana".into()
        })
        .await
        .unwrap(),
        5
    );
    back.chat("I'm back").await.unwrap();
    let frames = back.drain();
    // Anonymous snapshot on connect, then the resume snapshot, then live events.
    match &frames[1] {
        ServerFrame::Snapshot { last_seq, you, state } => {
            assert_eq!(*last_seq, 5);
            assert_eq!(you.as_ref().map(|p| p.as_str()), Some("p1"));
            assert_eq!(state.chat.len(), 3);
        }
        other => panic!("expected snapshot, got {other:?}"),
    }
    match &frames[2] {
        ServerFrame::Event(e) => {
            assert_eq!(e.seq, 6);
            assert!(matches!(&e.payload, EventPayload::Chat(c) if c.author.as_str() == "p1"));
        }
        other => panic!("expected event, got {other:?}"),
    }
    assert_eq!(s.state().await.unwrap().participants.len(), 2);
}

#[tokio::test]
async fn boss_mention_gets_one_routed_reply() {
    let dir = tempfile::tempdir().unwrap();
    let clock = ManualClock::new(T0);
    let gw = gateway(dir.path(), &clock);
    let s = gw.create_session(session_config("boss", Mode::Miracle)).unwrap();
    let mut ana = Client::join(&s, "Ana").await;
    let asked = ana.chat("@Boss how should we divide the work?").await.unwrap();
    ana.chat("no mention here").await.unwrap();
    s.settle().await;

    let replies: Vec<_> = ana
        .drain_events()
        .into_iter()
        .filter_map(|e| match e.payload {
            EventPayload::AgentReply(r) => Some((e.seq, r)),
            _ => None,
        })
        .collect();
    assert_eq!(replies.len(), 1);
    let (seq, reply) = &replies[0];
    assert_eq!(reply.agent_id.as_str(), "planning");
    assert_eq!(reply.in_reply_to, asked);
    assert!(reply.context_seq >= asked && reply.context_seq < *seq);
    assert!(reply.body.starts_with("Planning suggestion"), "{}", reply.body);

    let state = s.state().await.unwrap();
    assert_eq!(state, fold(&read_log(dir.path(), "boss")).unwrap());
}

#[tokio::test]
async fn generic_mode_answers_as_one_assistant_and_never_flashes() {
    let dir = tempfile::tempdir().unwrap();
    let clock = ManualClock::new(T0);
    let gw = gateway(dir.path(), &clock);
    let s = gw
        .create_session(session_config("generic", Mode::GenericAssistant))
        .unwrap();
    let ana = Client::join(&s, "Ana").await;
    let _ben = Client::join(&s, "Ben").await;
    ana.chat("@boss I'm so confused, what is our progress?").await.unwrap();
    // Long enough for every timer rule to have fired in the other mode.
    clock.advance(30 * 60 * 1000);
    s.tick().await;
    s.settle().await;
    assert_eq!(
        ana.send(ClientCommand::LightbulbAck).await.unwrap_err().code,
        ErrorCode::AckWhileIdle
    );

    let log = read_log(dir.path(), "generic");
    assert!(log.iter().all(|e| !matches!(e.payload, EventPayload::TriggerFired(_))));
    let reply = log
        .iter()
        .find_map(|e| match &e.payload {
            EventPayload::AgentReply(r) => Some(r.clone()),
            _ => None,
        })
        .unwrap();
    assert_eq!(reply.agent_id.as_str(), "assistant");
    assert_eq!(reply.intent, None);
}

#[tokio::test]
async fn frustration_flashes_until_acknowledged() {
    let dir = tempfile::tempdir().unwrap();
    let clock = ManualClock::new(T0);
    let gw = gateway(dir.path(), &clock);
    let s = gw.create_session(session_config("flash", Mode::Miracle)).unwrap();
    let mut ana = Client::join(&s, "Ana").await;
    let mut ben = Client::join(&s, "Ben").await;
    clock.advance(2000);
    ben.chat("I'm stuck on this part").await.unwrap();
    s.settle().await;

    let fired = |events: Vec<coregulate_core::SessionEvent>| {
        events
            .into_iter()
            .filter_map(|e| match e.payload {
                EventPayload::TriggerFired(f) => Some(f),
                _ => None,
            })
            .collect::<Vec<_>>()
    };
    let seen_by_ana = fired(ana.drain_events());
    let seen_by_ben = fired(ben.drain_events());
    assert_eq!(seen_by_ana, seen_by_ben, "firings go to the whole group");
    assert_eq!(seen_by_ana.len(), 1);
    let f = &seen_by_ana[0];
    assert_eq!(f.kind, TriggerKind::Frustration);
    assert_eq!(f.target, Target::Participant("p2".into()));
    assert!(!f.message.is_empty());
    assert!(s.state().await.unwrap().lightbulb.is_flashing());

    // A repeat inside the cooldown is suppressed.
    clock.advance(10_000);
    ben.chat("still stuck").await.unwrap();
    s.settle().await;
    assert!(fired(ana.drain_events()).is_empty());

    ana.send(ClientCommand::LightbulbAck).await.unwrap();
    assert!(!s.state().await.unwrap().lightbulb.is_flashing());
    assert_eq!(
        ben.send(ClientCommand::LightbulbAck).await.unwrap_err().code,
        ErrorCode::AckWhileIdle
    );

    let summary = s.close().await.unwrap();
    assert_eq!(summary.lightbulb_acks, 1);
    assert_eq!(summary.trigger_metrics.get(TriggerKind::Frustration).fired, 1);
    assert_eq!(summary.trigger_metrics.get(TriggerKind::Frustration).suppressed, 1);
    let metrics: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("flash.metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["lightbulb_acks"], 1);
}

#[tokio::test]
async fn silent_member_draws_an_inactivity_prompt_on_tick() {
    let dir = tempfile::tempdir().unwrap();
    let clock = ManualClock::new(T0);
    let gw = gateway(dir.path(), &clock);
    let s = gw.create_session(session_config("quiet", Mode::Miracle)).unwrap();
    let ana = Client::join(&s, "Ana").await;
    let _ben = Client::join(&s, "Ben").await;
    for _ in 0..10 {
        clock.advance(20_000);
        ana.send(note("a thought")).await.unwrap();
        s.tick().await;
        s.settle().await;
    }
    let log = read_log(dir.path(), "quiet");
    let firings: Vec<_> = log
        .iter()
        .filter_map(|e| match &e.payload {
            EventPayload::TriggerFired(f) => Some(f.clone()),
            _ => None,
        })
        .collect();
    assert_eq!(firings.len(), 1, "{firings:?}");
    assert_eq!(firings[0].kind, TriggerKind::Inactivity);
    assert_eq!(firings[0].target, Target::Participant("p2".into()));
    assert_eq!(firings[0].at, T0 + 180_000);
}

#[tokio::test]
async fn provider_outage_yields_an_apology_within_the_timeout() {
    let dir = tempfile::tempdir().unwrap();
    let clock = ManualClock::new(T0);
    let timeout = Duration::from_millis(300);
    let gw = gateway_with(dir.path(), &clock, orchestrator_with(Some(Fault::Hang), timeout));
    let s = gw.create_session(session_config("hang", Mode::Miracle)).unwrap();
    let ana = Client::join(&s, "Ana").await;
    let started = Instant::now();
    ana.chat("@boss help with the plan").await.unwrap();
    s.settle().await;
    assert!(started.elapsed() < timeout * 3, "took {:?}", started.elapsed());
    let state = s.state().await.unwrap();
    assert_eq!(state.chat.last().unwrap().body, APOLOGY);
    assert_eq!(s.close().await.unwrap().apologies, 1);
}

#[tokio::test]
async fn session_lifecycle_rules() {
    let dir = tempfile::tempdir().unwrap();
    let clock = ManualClock::new(T0);
    let gw = gateway(dir.path(), &clock);
    let s = gw.create_session(session_config("life", Mode::Miracle)).unwrap();
    assert!(matches!(
        gw.create_session(session_config("life", Mode::Miracle)),
        Err(CreateError::DuplicateSession(_))
    ));
    let bad = SessionConfig {
        group_size_limit: 1,
        ..session_config("tiny", Mode::Miracle)
    };
    assert!(matches!(gw.create_session(bad), Err(CreateError::BadConfig(_))));
    assert!(matches!(
        gw.create_session(session_config("../x", Mode::Miracle)),
        Err(CreateError::BadConfig(_))
    ));
    let fresh = gw.create_session(session_config("", Mode::Miracle)).unwrap();
    assert!(uuid_like(fresh.id().as_str()));

    let ana = Client::join(&s, "Ana").await;
    clock.advance(121 * 60 * 1000);
    assert_eq!(ana.chat("late").await.unwrap_err().code, ErrorCode::SessionClosed);
    s.close().await.unwrap();
    assert!(!s.is_open());
    assert_eq!(
        ana.chat("after close").await.unwrap_err().code,
        ErrorCode::SessionClosed
    );
}

fn uuid_like(s: &str) -> bool {
    s.len() == 36 && s.chars().filter(|c| *c == '-').count() == 4
}

async fn serve(dir: &std::path::Path) -> String {
    let clock = ManualClock::new(T0);
    let gw = gateway(dir, &clock);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, gw.router()).await.unwrap() });
    format!("127.0.0.1:{}", addr.port())
}

async fn next_json<S>(ws: &mut S) -> Value
where
    S: StreamExt<Item = Result<Message, tokio_tungstenite::tungstenite::Error>> + Unpin,
{
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(5), ws.next())
            .await
            .expect("frame in time")
            .unwrap()
            .unwrap();
        if let Message::Text(t) = msg {
            return serde_json::from_str(&t).unwrap();
        }
    }
}

#[tokio::test]
async fn http_and_socket_protocol() {
    let dir = tempfile::tempdir().unwrap();
    let addr = serve(dir.path()).await;
    let http = reqwest::Client::new();

    let health: Value = http
        .get(format!("http://{addr}/health"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(health["status"], "ok");

    let created = http
        .post(format!("http://{addr}/sessions"))
        .json(&json!({"session_id": "wire", "mode": "generic_assistant"}))
        .send()
        .await
        .unwrap();
    assert_eq!(created.status(), 201);
    let body: Value = created.json().await.unwrap();
    assert_eq!(body["session_id"], "wire");
    assert_eq!(body["mode"], "generic_assistant");

    let dup = http
        .post(format!("http://{addr}/sessions"))
        .json(&json!({"session_id": "wire"}))
        .send()
        .await
        .unwrap();
    assert_eq!(dup.status(), 409);
    let dup: Value = dup.json().await.unwrap();
    assert_eq!(dup["code"], "duplicate_session");
    let bad = http
        .post(format!("http://{addr}/sessions"))
        .json(&json!({"group_size_limit": 1}))
        .send()
        .await
        .unwrap();
    assert_eq!(bad.status(), 400);

    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/sessions/wire/ws"))
        .await
        .unwrap();
    assert_eq!(next_json(&mut ws).await["type"], "snapshot");
    ws.send(Message::text("{not json")).await.unwrap();
    let rejected = next_json(&mut ws).await;
    assert_eq!(rejected["type"], "rejection");
    assert_eq!(rejected["data"]["code"], "malformed");

    let join = json!({"type": "join", "data": {"display_name": "Ana"}});
    ws.send(Message::text(join.to_string())).await.unwrap();
    let joined = next_json(&mut ws).await;
    assert_eq!(joined["type"], "event");
    assert_eq!(joined["data"]["seq"], 1);
    assert_eq!(joined["data"]["type"], "join");
    assert_eq!(joined["data"]["data"]["participant_id"], "p1");

    let create = json!({"type": "note_create", "data": {"content": "idea", "position": {"x": 1.5, "y": 2.0}}});
    ws.send(Message::text(create.to_string())).await.unwrap();
    let made = next_json(&mut ws).await;
    assert_eq!(made["data"]["data"]["note_id"], "n1");
    assert_eq!(made["data"]["data"]["kind"], "text");
    let link = json!({"type": "link_create", "data": {"from": "n1", "to": "n7"}});
    ws.send(Message::text(link.to_string())).await.unwrap();
    assert_eq!(next_json(&mut ws).await["data"]["code"], "unknown_reference");

    let transcript = http
        .get(format!("http://{addr}/sessions/wire/transcript"))
        .send()
        .await
        .unwrap();
    assert_eq!(transcript.status(), 200);
    let lines: Vec<Value> = transcript
        .text()
        .await
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[1]["type"], "note_create");

    let missing = http
        .get(format!("http://{addr}/sessions/nope/transcript"))
        .send()
        .await
        .unwrap();
    assert_eq!(missing.status(), 404);
    let closed: Value = http
        .post(format!("http://{addr}/sessions/wire/close"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(closed["events"], 2);
}
