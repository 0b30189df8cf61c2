//! One task per session owns its log, state, trigger engine and agent queue.
//! Everything that changes the session passes through its inbox, so seq
//! numbers are gap-free and every member sees the same order.

use std::collections::{BTreeMap, VecDeque};
use std::path::PathBuf;
use std::sync::Arc;

use coregulate_core::session::{
    AgentReplyData, ChatData, JoinData, LightbulbAckData, LinkCreateData, LinkDeleteData, NoteCreateData,
    NoteDeleteData, NoteUpdateData,
};
use coregulate_core::{
    parse_mentions, ContextSnapshot, EventPayload, Millis, Mode, ParticipantId, SessionConfig, SessionEvent, SessionId,
    SessionState, TriggerEngine, TriggerFiring, TriggerMetrics,
};
use serde::Serialize;
use tokio::sync::{mpsc, oneshot};

use super::protocol::{ClientCommand, ErrorCode, Rejection, ServerFrame};
use crate::clock::Clock;
use crate::event_log::{Durability, EventLog, LogError};
use crate::orchestrator::{AgentRequest, Orchestrator, APOLOGY};

pub type ConnId = u64;

const INBOX_CAPACITY: usize = 1024;

#[derive(Debug, Clone)]
pub struct SessionOptions {
    pub config: SessionConfig,
    pub log_path: PathBuf,
    pub durability: Durability,
    /// Frames buffered per connection before it is dropped as too slow.
    pub outbound_capacity: usize,
    /// Where the metrics JSON goes when the session closes.
    pub metrics_path: Option<PathBuf>,
}

/// Written on close and returned by [`SessionHandle::close`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionSummary {
    pub session_id: SessionId,
    pub mode: Mode,
    pub events: u64,
    pub participants: usize,
    pub agent_replies: u64,
    pub apologies: u64,
    pub lightbulb_acks: u64,
    pub trigger_metrics: TriggerMetrics,
}

/// An attached client: its id and the frames the session sends it.
#[derive(Debug)]
pub struct Connection {
    pub id: ConnId,
    pub frames: mpsc::Receiver<ServerFrame>,
}

enum Msg {
    Connect {
        reply: oneshot::Sender<Connection>,
    },
    Command {
        conn: ConnId,
        cmd: ClientCommand,
        reply: Option<oneshot::Sender<Result<u64, Rejection>>>,
    },
    Reject {
        conn: ConnId,
        rejection: Rejection,
    },
    Disconnect {
        conn: ConnId,
    },
    Tick,
    AgentDone {
        reply: AgentReplyData,
    },
    InterventionReady {
        firing: TriggerFiring,
    },
    Settle {
        reply: oneshot::Sender<()>,
    },
    State {
        reply: oneshot::Sender<SessionState>,
    },
    Close {
        reply: oneshot::Sender<SessionSummary>,
    },
}

/// Cheap, cloneable access to a running session.
#[derive(Clone)]
pub struct SessionHandle {
    id: SessionId,
    mode: Mode,
    tx: mpsc::Sender<Msg>,
}

impl std::fmt::Debug for SessionHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SessionHandle")
            .field("id", &self.id)
            .field("mode", &self.mode)
            .finish()
    }
}

impl SessionHandle {
    pub fn id(&self) -> &SessionId {
        &self.id
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// False once the session task has finished.
    pub fn is_open(&self) -> bool {
        !self.tx.is_closed()
    }

    async fn ask<T>(&self, make: impl FnOnce(oneshot::Sender<T>) -> Msg) -> Option<T> {
        let (tx, rx) = oneshot::channel();
        self.tx.send(make(tx)).await.ok()?;
        rx.await.ok()
    }

    /// Attaches a connection. Its first frame is a snapshot.
    pub async fn connect(&self) -> Option<Connection> {
        self.ask(|reply| Msg::Connect { reply }).await
    }

    /// Runs a command and waits for the outcome. A rejection is also sent to
    /// the connection as a frame.
    pub async fn command(&self, conn: ConnId, cmd: ClientCommand) -> Result<u64, Rejection> {
        let closed = Rejection::new(&cmd, ErrorCode::SessionClosed, "session is closed");
        self.ask(|reply| Msg::Command {
            conn,
            cmd,
            reply: Some(reply),
        })
        .await
        .unwrap_or(Err(closed))
    }

    /// Queues a command without waiting; the outcome arrives as frames.
    pub async fn submit(&self, conn: ConnId, cmd: ClientCommand) {
        let _ = self.tx.send(Msg::Command { conn, cmd, reply: None }).await;
    }

    /// Sends a rejection frame in order with the connection's other frames.
    pub async fn reject(&self, conn: ConnId, rejection: Rejection) {
        let _ = self.tx.send(Msg::Reject { conn, rejection }).await;
    }

    pub async fn disconnect(&self, conn: ConnId) {
        let _ = self.tx.send(Msg::Disconnect { conn }).await;
    }

    /// Evaluates timer ticks up to the session clock's current time.
    pub async fn tick(&self) {
        let _ = self.tx.send(Msg::Tick).await;
    }

    /// Resolves once no agent request or intervention is queued or running.
    pub async fn settle(&self) {
        self.ask(|reply| Msg::Settle { reply }).await;
    }

    pub async fn state(&self) -> Option<SessionState> {
        self.ask(|reply| Msg::State { reply }).await
    }

    /// Refuses further commands, lets pending agent work finish, writes the
    /// metrics file and stops the session.
    pub async fn close(&self) -> Option<SessionSummary> {
        self.ask(|reply| Msg::Close { reply }).await
    }
}

struct Conn {
    participant: Option<ParticipantId>,
    tx: mpsc::Sender<ServerFrame>,
}

#[derive(Debug, thiserror::Error)]
enum AdmitError {
    #[error(transparent)]
    Apply(#[from] coregulate_core::ApplyError),
    #[error(transparent)]
    Log(#[from] LogError),
}

struct Actor {
    options: SessionOptions,
    state: SessionState,
    log: EventLog,
    engine: Option<TriggerEngine>,
    orchestrator: Arc<Orchestrator>,
    clock: Arc<dyn Clock>,
    inbox: mpsc::WeakSender<Msg>,
    opened_at: Millis,
    conns: BTreeMap<ConnId, Conn>,
    next_conn: ConnId,
    agent_queue: VecDeque<AgentRequest>,
    agent_busy: bool,
    interventions: VecDeque<TriggerFiring>,
    intervention_busy: bool,
    settle_waiters: Vec<oneshot::Sender<()>>,
    close_waiter: Option<oneshot::Sender<SessionSummary>>,
    summary: SessionSummary,
}

/// Starts the session task. The log file must not exist yet.
pub fn spawn_session(
    options: SessionOptions,
    orchestrator: Arc<Orchestrator>,
    clock: Arc<dyn Clock>,
) -> Result<SessionHandle, LogError> {
    let log = EventLog::create(&options.log_path, options.durability)?;
    let (tx, rx) = mpsc::channel(INBOX_CAPACITY);
    let config = &options.config;
    let handle = SessionHandle {
        id: config.session_id.clone(),
        mode: config.mode,
        tx: tx.clone(),
    };
    let engine = match config.mode {
        Mode::Miracle => Some(TriggerEngine::new(config.trigger_params.clone())),
        Mode::GenericAssistant => None,
    };
    let summary = SessionSummary {
        session_id: config.session_id.clone(),
        mode: config.mode,
        events: 0,
        participants: 0,
        agent_replies: 0,
        apologies: 0,
        lightbulb_acks: 0,
        trigger_metrics: TriggerMetrics::default(),
    };
    let actor = Actor {
        opened_at: clock.now_ms(),
        options,
        state: SessionState::default(),
        log,
        engine,
        orchestrator,
        clock,
        inbox: tx.downgrade(),
        conns: BTreeMap::new(),
        next_conn: 1,
        agent_queue: VecDeque::new(),
        agent_busy: false,
        interventions: VecDeque::new(),
        intervention_busy: false,
        settle_waiters: Vec::new(),
        close_waiter: None,
        summary,
    };
    tokio::spawn(actor.run(rx));
    Ok(handle)
}

impl Actor {
    async fn run(mut self, mut rx: mpsc::Receiver<Msg>) {
        while let Some(msg) = rx.recv().await {
            self.handle(msg);
            self.wake_waiters();
            if self.close_waiter.is_some() && self.is_idle() {
                self.finish();
                break;
            }
        }
        tracing::debug!(session = %self.options.config.session_id, "session task stopped");
    }

    fn handle(&mut self, msg: Msg) {
        match msg {
            Msg::Connect { reply } => {
                let id = self.next_conn;
                self.next_conn += 1;
                let (tx, frames) = mpsc::channel(self.options.outbound_capacity.max(1));
                let _ = tx.try_send(self.snapshot(None));
                self.conns.insert(id, Conn { participant: None, tx });
                let _ = reply.send(Connection { id, frames });
            }
            Msg::Command { conn, cmd, reply } => {
                let result = self.command(conn, &cmd);
                if let Err(rejection) = &result {
                    tracing::debug!(conn, code = ?rejection.code, "command rejected: {}", rejection.message);
                    self.send_to(conn, ServerFrame::Rejection(rejection.clone()));
                }
                if let Some(reply) = reply {
                    let _ = reply.send(result);
                }
            }
            Msg::Reject { conn, rejection } => self.send_to(conn, ServerFrame::Rejection(rejection)),
            Msg::Disconnect { conn } => {
                self.conns.remove(&conn);
            }
            Msg::Tick => {
                let now = self.now();
                self.run_ticks(now);
            }
            Msg::AgentDone { reply } => {
                self.agent_busy = false;
                self.summary.agent_replies += 1;
                if reply.body == APOLOGY {
                    self.summary.apologies += 1;
                }
                if let Err(e) = self.admit(EventPayload::AgentReply(reply)) {
                    tracing::error!(error = %e, "agent reply could not be admitted");
                }
                self.pump_agents();
            }
            Msg::InterventionReady { firing } => {
                self.intervention_busy = false;
                if let Err(e) = self.admit(EventPayload::TriggerFired(firing)) {
                    tracing::error!(error = %e, "intervention could not be admitted");
                }
                self.pump_interventions();
            }
            Msg::Settle { reply } => self.settle_waiters.push(reply),
            Msg::State { reply } => {
                let _ = reply.send(self.state.clone());
            }
            Msg::Close { reply } => self.close_waiter = Some(reply),
        }
    }

    fn is_idle(&self) -> bool {
        self.agent_queue.is_empty() && !self.agent_busy && self.interventions.is_empty() && !self.intervention_busy
    }

    fn wake_waiters(&mut self) {
        if self.is_idle() {
            for w in self.settle_waiters.drain(..) {
                let _ = w.send(());
            }
        }
    }

    fn finish(&mut self) {
        self.summary.events = self.state.last_seq;
        self.summary.participants = self.state.participants.len();
        if let Some(engine) = &self.engine {
            self.summary.trigger_metrics = engine.metrics().clone();
        }
        if let Some(path) = &self.options.metrics_path {
            let json = serde_json::to_string_pretty(&self.summary).expect("summary always serializes");
            if let Err(e) = std::fs::write(path, json + "\n") {
                tracing::warn!(path = %path.display(), error = %e, "could not write session metrics");
            }
        }
        self.conns.clear();
        if let Some(reply) = self.close_waiter.take() {
            let _ = reply.send(self.summary.clone());
        }
    }

    /// Session time never runs backwards, whatever the clock does.
    fn now(&self) -> Millis {
        let now = self.clock.now_ms();
        if self.state.last_seq == 0 {
            now
        } else {
            now.max(self.state.last_at)
        }
    }

    fn snapshot(&self, you: Option<ParticipantId>) -> ServerFrame {
        ServerFrame::Snapshot {
            state: Box::new(self.state.clone()),
            last_seq: self.state.last_seq,
            you,
        }
    }

    fn send_to(&mut self, conn: ConnId, frame: ServerFrame) {
        let Some(c) = self.conns.get(&conn) else { return };
        if c.tx.try_send(frame).is_err() {
            tracing::warn!(conn, "dropping slow or closed connection");
            self.conns.remove(&conn);
        }
    }

    fn broadcast(&mut self, event: &SessionEvent) {
        let mut dropped = Vec::new();
        for (id, c) in &self.conns {
            if c.tx.try_send(ServerFrame::Event(event.clone())).is_err() {
                dropped.push(*id);
            }
        }
        for id in dropped {
            tracing::warn!(conn = id, "dropping slow or closed connection");
            self.conns.remove(&id);
        }
    }

    fn context(&self) -> ContextSnapshot {
        let config = &self.options.config;
        ContextSnapshot::project(&self.state, &config.task_prompt, self.orchestrator.config().recent_chat)
    }

    /// Evaluates every trigger tick at or before `now`.
    fn run_ticks(&mut self, now: Millis) {
        if let Some(engine) = &mut self.engine {
            let firings = engine.advance_to(now);
            self.queue_firings(firings);
        }
    }

    fn queue_firings(&mut self, firings: Vec<TriggerFiring>) {
        if firings.is_empty() {
            return;
        }
        self.interventions.extend(firings);
        self.pump_interventions();
    }

    fn pump_interventions(&mut self) {
        if self.intervention_busy {
            return;
        }
        let Some(firing) = self.interventions.pop_front() else {
            return;
        };
        let Some(inbox) = self.inbox.upgrade() else { return };
        self.intervention_busy = true;
        let ctx = self.context();
        let orchestrator = self.orchestrator.clone();
        tokio::spawn(async move {
            let firing = orchestrator.intervene(firing, &ctx).await;
            let _ = inbox.send(Msg::InterventionReady { firing }).await;
        });
    }

    fn pump_agents(&mut self) {
        if self.agent_busy {
            return;
        }
        let Some(request) = self.agent_queue.pop_front() else {
            return;
        };
        let Some(inbox) = self.inbox.upgrade() else { return };
        self.agent_busy = true;
        let ctx = self.context();
        let mode = self.options.config.mode;
        let orchestrator = self.orchestrator.clone();
        tokio::spawn(async move {
            let reply = orchestrator.handle_request(&request, &ctx, mode).await;
            let _ = inbox.send(Msg::AgentDone { reply }).await;
        });
    }

    /// Stamps, validates, appends, folds, broadcasts and feeds the engine.
    fn admit(&mut self, payload: EventPayload) -> Result<SessionEvent, AdmitError> {
        let now = self.now();
        self.run_ticks(now);
        let event = SessionEvent {
            seq: self.state.last_seq + 1,
            at: now,
            payload,
        };
        self.state.check(&event)?;
        self.log.append(&event)?;
        self.state.apply(&event).expect("event was checked against this state");
        self.broadcast(&event);
        if let Some(engine) = &mut self.engine {
            let firings = engine.observe(&event);
            self.queue_firings(firings);
        }
        Ok(event)
    }

    fn participant_of(&self, conn: ConnId) -> Option<ParticipantId> {
        self.conns.get(&conn).and_then(|c| c.participant.clone())
    }

    fn command(&mut self, conn: ConnId, cmd: &ClientCommand) -> Result<u64, Rejection> {
        let reject = |code, message: &str| Err(Rejection::new(cmd, code, message));
        if self.close_waiter.is_some() {
            return reject(ErrorCode::SessionClosed, "session is closing");
        }
        let limit = self.options.config.duration_limit_ms;
        if self.clock.now_ms().saturating_sub(self.opened_at) > limit {
            return reject(ErrorCode::SessionClosed, "session time is over");
        }
        if !self.conns.contains_key(&conn) {
            return reject(ErrorCode::NotJoined, "unknown connection");
        }
        if let ClientCommand::Join { display_name } = cmd {
            return self.join(conn, cmd, display_name.trim());
        }
        let Some(me) = self.participant_of(conn) else {
            return reject(ErrorCode::NotJoined, "join the session first");
        };
        let payload = match cmd.clone() {
            ClientCommand::Join { .. } => unreachable!("handled above"),
            ClientCommand::Chat { body } => {
                let mentions = parse_mentions(&body);
                EventPayload::Chat(ChatData {
                    author: me,
                    body,
                    mentions,
                })
            }
            ClientCommand::NoteCreate {
                kind,
                content,
                position,
            } => EventPayload::NoteCreate(NoteCreateData {
                note_id: self.state.next_note_id(),
                author: me,
                kind,
                content,
                position,
            }),
            ClientCommand::NoteUpdate {
                note_id,
                content,
                position,
            } => {
                if content.is_none() && position.is_none() {
                    return reject(ErrorCode::ValidationFailed, "note update changes nothing");
                }
                EventPayload::NoteUpdate(NoteUpdateData {
                    note_id,
                    author: me,
                    content,
                    position,
                })
            }
            ClientCommand::NoteDelete { note_id } => EventPayload::NoteDelete(NoteDeleteData { note_id, author: me }),
            ClientCommand::LinkCreate { from_note, to_note } => EventPayload::LinkCreate(LinkCreateData {
                link_id: self.state.next_link_id(),
                from_note,
                to_note,
                author: me,
            }),
            ClientCommand::LinkDelete { link_id } => EventPayload::LinkDelete(LinkDeleteData { link_id, author: me }),
            ClientCommand::LightbulbAck => {
                if !self.state.lightbulb.is_flashing() {
                    return reject(ErrorCode::AckWhileIdle, "the lightbulb is not flashing");
                }
                self.summary.lightbulb_acks += 1;
                EventPayload::LightbulbAck(LightbulbAckData { participant_id: me })
            }
        };
        let event = self.admit(payload).map_err(|e| match e {
            AdmitError::Apply(e) => Rejection::from_apply(cmd, &e),
            AdmitError::Log(e) => {
                tracing::error!(error = %e, "event log append failed");
                Rejection::new(cmd, ErrorCode::ValidationFailed, format!("storage failure: {e}"))
            }
        })?;
        if let EventPayload::Chat(_) = &event.payload {
            if let Some(request) = self.state.chat.last().and_then(AgentRequest::from_message) {
                self.agent_queue.push_back(request);
                self.pump_agents();
            }
        }
        Ok(event.seq)
    }

    fn join(&mut self, conn: ConnId, cmd: &ClientCommand, name: &str) -> Result<u64, Rejection> {
        let reject = |code, message: &str| Err(Rejection::new(cmd, code, message));
        if self.participant_of(conn).is_some() {
            return reject(ErrorCode::ValidationFailed, "this connection has already joined");
        }
        if name.is_empty() {
            return reject(ErrorCode::ValidationFailed, "display name is empty");
        }
        if let Some(existing) = self.state.participant_by_name(name) {
            let id = existing.participant_id.clone();
            if self.conns.values().any(|c| c.participant.as_ref() == Some(&id)) {
                return reject(ErrorCode::ValidationFailed, "display name is in use");
            }
            // Rejoin after a disconnect: resume as the same participant.
            if let Some(c) = self.conns.get_mut(&conn) {
                c.participant = Some(id.clone());
            }
            let frame = self.snapshot(Some(id));
            self.send_to(conn, frame);
            return Ok(self.state.last_seq);
        }
        if self.state.participants.len() >= self.options.config.group_size_limit as usize {
            return reject(ErrorCode::SessionFull, "the group is full");
        }
        let id = ParticipantId::new(format!("p{}", self.state.participants.len() + 1));
        let payload = EventPayload::Join(JoinData {
            participant_id: id.clone(),
            display_name: name.to_owned(),
        });
        let event = self.admit(payload).map_err(|e| match e {
            AdmitError::Apply(e) => Rejection::from_apply(cmd, &e),
            AdmitError::Log(e) => Rejection::new(cmd, ErrorCode::ValidationFailed, format!("storage failure: {e}")),
        })?;
        if let Some(c) = self.conns.get_mut(&conn) {
            c.participant = Some(id);
        }
        Ok(event.seq)
    }
}
