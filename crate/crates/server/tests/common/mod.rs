#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use coregulate::clock::ManualClock;
use coregulate::config::{load_keywords, load_profiles};
use coregulate::event_log::Durability;
use coregulate::gateway::{ClientCommand, ConnId, Gateway, GatewayConfig, Rejection, ServerFrame, SessionHandle};
use coregulate::orchestrator::{Orchestrator, OrchestratorConfig};
use coregulate::provider::{Fault, MockProvider};
use coregulate_core::{EventPayload, Mode, ParticipantId, SessionConfig, SessionEvent};
use tokio::sync::mpsc;

pub fn orchestrator_with(fault: Option<Fault>, timeout: Duration) -> Arc<Orchestrator> {
    let lexicon = load_keywords(None).unwrap();
    let mut mock = MockProvider::new(lexicon.clone());
    if let Some(f) = fault {
        mock = mock.with_fault(f);
    }
    let config = OrchestratorConfig {
        timeout,
        ..OrchestratorConfig::default()
    };
    Arc::new(Orchestrator::new(
        Arc::new(mock),
        load_profiles(None).unwrap(),
        lexicon,
        config,
    ))
}

pub fn orchestrator() -> Arc<Orchestrator> {
    orchestrator_with(None, Duration::from_secs(5))
}

/// A gateway on a manual clock with no background ticker.
pub fn gateway(dir: &Path, clock: &ManualClock) -> Arc<Gateway> {
    gateway_with(dir, clock, orchestrator())
}

pub fn gateway_with(dir: &Path, clock: &ManualClock, orchestrator: Arc<Orchestrator>) -> Arc<Gateway> {
    let mut config = GatewayConfig::new(dir);
    config.durability = Durability::Flush;
    config.auto_tick = false;
    config.outbound_capacity = 1 << 16;
    Gateway::new(config, orchestrator, Arc::new(clock.clone()))
}

pub fn session_config(id: &str, mode: Mode) -> SessionConfig {
    SessionConfig {
        session_id: id.into(),
        mode,
        ..SessionConfig::default()
    }
}

/// An in-process client attached to one session.
pub struct Client {
    pub conn: ConnId,
    pub frames: mpsc::Receiver<ServerFrame>,
    pub handle: SessionHandle,
}

impl Client {
    pub async fn connect(handle: &SessionHandle) -> Self {
        let c = handle.connect().await.expect("session is open");
        Self {
            conn: c.id,
            frames: c.frames,
            handle: handle.clone(),
        }
    }

    pub async fn join(handle: &SessionHandle, name: &str) -> Self {
        let c = Self::connect(handle).await;
        c.send(ClientCommand::Join {
            display_name: name.into(),
        })
        .await
        .expect("join accepted");
        c
    }

    pub async fn send(&self, cmd: ClientCommand) -> Result<u64, Rejection> {
        self.handle.command(self.conn, cmd).await
    }

    pub async fn chat(&self, body: &str) -> Result<u64, Rejection> {
        self.send(ClientCommand::Chat { body: body.into() }).await
    }

    /// Every frame received so far.
    pub fn drain(&mut self) -> Vec<ServerFrame> {
        let mut out = Vec::new();
        while let Ok(f) = self.frames.try_recv() {
            out.push(f);
        }
        out
    }

    pub fn drain_events(&mut self) -> Vec<SessionEvent> {
        self.drain()
            .into_iter()
            .filter_map(|f| match f {
                ServerFrame::Event(e) => Some(e),
                _ => None,
            })
            .collect()
    }
}

/// Replays the participant actions of a transcript as client commands, with
/// the clock set to each action's time and the session settled after each.
/// Agent replies, triggers and acks in the script are produced by the
/// session itself; scripted acks are sent and may be refused.
pub async fn drive(handle: &SessionHandle, clock: &ManualClock, script: &[SessionEvent]) -> Vec<Client> {
    let mut clients: BTreeMap<ParticipantId, Client> = BTreeMap::new();
    let mut order = Vec::new();
    for event in script {
        clock.set(event.at);
        let (who, cmd) = match &event.payload {
            EventPayload::Join(j) => {
                let c = Client::connect(handle).await;
                c.send(ClientCommand::Join {
                    display_name: j.display_name.clone(),
                })
                .await
                .expect("scripted join");
                clients.insert(j.participant_id.clone(), c);
                order.push(j.participant_id.clone());
                handle.settle().await;
                continue;
            }
            EventPayload::Chat(d) => (&d.author, ClientCommand::Chat { body: d.body.clone() }),
            EventPayload::NoteCreate(d) => (
                &d.author,
                ClientCommand::NoteCreate {
                    kind: d.kind,
                    content: d.content.clone(),
                    position: d.position,
                },
            ),
            EventPayload::NoteUpdate(d) => (
                &d.author,
                ClientCommand::NoteUpdate {
                    note_id: d.note_id.clone(),
                    content: d.content.clone(),
                    position: d.position,
                },
            ),
            EventPayload::NoteDelete(d) => (
                &d.author,
                ClientCommand::NoteDelete {
                    note_id: d.note_id.clone(),
                },
            ),
            EventPayload::LinkCreate(d) => (
                &d.author,
                ClientCommand::LinkCreate {
                    from_note: d.from_note.clone(),
                    to_note: d.to_note.clone(),
                },
            ),
            EventPayload::LinkDelete(d) => (
                &d.author,
                ClientCommand::LinkDelete {
                    link_id: d.link_id.clone(),
                },
            ),
            EventPayload::LightbulbAck(d) => (&d.participant_id, ClientCommand::LightbulbAck),
            EventPayload::AgentReply(_) | EventPayload::TriggerFired(_) => continue,
        };
        let client = &clients[who];
        let result = client.send(cmd).await;
        if !matches!(event.payload, EventPayload::LightbulbAck(_)) {
            result.unwrap_or_else(|r| panic!("scripted seq {} rejected: {r:?}", event.seq));
        }
        handle.settle().await;
    }
    order.into_iter().map(|p| clients.remove(&p).expect("joined")).collect()
}

pub fn read_log(dir: &Path, id: &str) -> Vec<SessionEvent> {
    let path = coregulate::event_log::log_path(dir, &id.into());
    coregulate::event_log::replay(&path).unwrap().events
}
