//! Time source used for transcripts, events and latency measurement.

use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;

use chrono::{DateTime, TimeZone, Utc};

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Deterministic clock: starts at a fixed instant and advances one
/// millisecond per reading.
#[derive(Debug, Clone)]
pub struct FrozenClock {
    start_ms: i64,
    ticks: Arc<AtomicI64>,
}

impl FrozenClock {
    pub const EPOCH_MS: i64 = 1_722_470_400_000; // 2024-08-01T00:00:00Z

    pub fn new() -> Self {
        Self::starting_at(Self::EPOCH_MS)
    }

    pub fn starting_at(start_ms: i64) -> Self {
        Self {
            start_ms,
            ticks: Arc::new(AtomicI64::new(0)),
        }
    }
}

impl Default for FrozenClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for FrozenClock {
    fn now(&self) -> DateTime<Utc> {
        let tick = self.ticks.fetch_add(1, Ordering::SeqCst);
        Utc.timestamp_millis_opt(self.start_ms + tick)
            .single()
            .unwrap_or_default()
    }
}
