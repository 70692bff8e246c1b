//! Progress notifications emitted while a pipeline runs.

use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    PhaseStarted,
    AgentMessage,
    StoriesReady,
    QualityReady,
    BacklogReady,
    MetricsReady,
    Error,
}

impl EventKind {
    pub fn is_terminal(self) -> bool {
        matches!(self, EventKind::MetricsReady | EventKind::Error)
    }
}

pub trait EventSink: Send + Sync {
    fn emit(&self, kind: EventKind, payload: Value);
}

pub struct NullSink;

impl EventSink for NullSink {
    fn emit(&self, _: EventKind, _: Value) {}
}

/// Collects events in memory.
#[derive(Default)]
pub struct VecSink {
    pub events: Mutex<Vec<(EventKind, Value)>>,
}

impl VecSink {
    pub fn take(&self) -> Vec<(EventKind, Value)> {
        std::mem::take(&mut *self.events.lock().expect("sink lock"))
    }
}

impl EventSink for VecSink {
    fn emit(&self, kind: EventKind, payload: Value) {
        self.events.lock().expect("sink lock").push((kind, payload));
    }
}
