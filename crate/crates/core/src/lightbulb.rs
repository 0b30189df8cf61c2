//! The lightbulb indicator: flashes while interventions are unviewed.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::trigger::TriggerFiring;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "state", content = "pending", rename_all = "snake_case")]
pub enum LightbulbState {
    #[default]
    Idle,
    /// Never empty.
    Flashing(Vec<TriggerFiring>),
}

/// An acknowledgment arrived with nothing pending, usually because another
/// member viewed the prompt first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("lightbulb is not flashing")]
pub struct AckWhileIdle;

impl LightbulbState {
    pub fn is_flashing(&self) -> bool {
        matches!(self, LightbulbState::Flashing(_))
    }

    pub fn pending(&self) -> &[TriggerFiring] {
        match self {
            LightbulbState::Idle => &[],
            LightbulbState::Flashing(p) => p,
        }
    }

    pub fn fire(&mut self, firing: TriggerFiring) {
        match self {
            LightbulbState::Idle => *self = LightbulbState::Flashing(alloc::vec![firing]),
            LightbulbState::Flashing(pending) => pending.push(firing),
        }
    }

    /// Clears every pending firing at once and returns them.
    pub fn acknowledge(&mut self) -> Result<Vec<TriggerFiring>, AckWhileIdle> {
        match core::mem::take(self) {
            LightbulbState::Idle => Err(AckWhileIdle),
            LightbulbState::Flashing(pending) => Ok(pending),
        }
    }
}
