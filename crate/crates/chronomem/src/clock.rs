//! Injectable time source.
//!
//! Every timestamp the engine records is UTC epoch seconds. Production code
//! uses [`SystemClock`]; tests and replay inject a [`ManualClock`] so that a
//! whole run is reproducible down to the byte.

use std::sync::atomic::{AtomicU64, Ordering};

pub trait Clock: Send + Sync {
    fn now_epoch_secs(&self) -> u64;
}

/// Wall clock (UTC epoch seconds).
#[derive(Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_epoch_secs(&self) -> u64 {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    }
}

/// Deterministic clock driven by the caller. Reading it never advances it;
/// the test script moves time forward explicitly between turns.
#[derive(Debug)]
pub struct ManualClock {
    now: AtomicU64,
}

impl ManualClock {
    pub fn new(start_epoch_secs: u64) -> Self {
        Self {
            now: AtomicU64::new(start_epoch_secs),
        }
    }

    pub fn set(&self, epoch_secs: u64) {
        self.now.store(epoch_secs, Ordering::SeqCst);
    }

    pub fn advance(&self, secs: u64) {
        self.now.fetch_add(secs, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_epoch_secs(&self) -> u64 {
        self.now.load(Ordering::SeqCst)
    }
}

/// Renders epoch seconds as an ISO-8601 UTC calendar date (`2026-08-19`).
pub fn epoch_to_iso_date(epoch_secs: u64) -> String {
    chrono::DateTime::from_timestamp(epoch_secs as i64, 0)
        .map(|dt| dt.format("%Y-%m-%d").to_string())
        .unwrap_or_else(|| "0000-00-00".to_string())
}
