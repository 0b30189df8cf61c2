//! Server side of the collaborative learning service: the durable event log,
//! model providers, the agent orchestrator, the session gateway and the
//! offline tools behind the `coregulate` binary.

pub mod clock;
pub mod config;
pub mod event_log;
pub mod gateway;
pub mod orchestrator;
pub mod provider;
pub mod report;
pub mod synth;
