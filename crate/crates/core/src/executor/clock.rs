//! Time as a capability: real for production, virtual for tests.
//!
//! Everything in the executor that reads or spends time goes through a
//! [`Clock`], so offline runs are instant and fully reproducible — backoff
//! sleeps advance a counter instead of blocking, and timestamps in saved
//! artifacts come out identical run after run.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

pub trait Clock: Send + Sync {
    /// Milliseconds since the clock's epoch.
    fn now_ms(&self) -> u64;
    /// Block (or pretend to) for `ms` milliseconds.
    fn sleep(&self, ms: u64);
}

/// Wall-clock time; sleeps actually block.
#[derive(Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }

    fn sleep(&self, ms: u64) {
        std::thread::sleep(Duration::from_millis(ms));
    }
}

/// Deterministic clock: starts at a fixed instant, `sleep` advances it
/// without blocking. Shared freely across threads.
#[derive(Debug)]
pub struct VirtualClock {
    now: AtomicU64,
}

impl VirtualClock {
    /// A virtual clock starting at `start_ms`.
    pub fn starting_at(start_ms: u64) -> Self {
        VirtualClock { now: AtomicU64::new(start_ms) }
    }

    /// Total time "spent" so far relative to the given start.
    pub fn advance(&self, ms: u64) {
        self.now.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Default for VirtualClock {
    fn default() -> Self {
        Self::starting_at(0)
    }
}

impl Clock for VirtualClock {
    fn now_ms(&self) -> u64 {
        self.now.load(Ordering::SeqCst)
    }

    fn sleep(&self, ms: u64) {
        self.advance(ms);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn virtual_clock_advances_on_sleep_without_blocking() {
        let clock = VirtualClock::starting_at(1_000);
        assert_eq!(clock.now_ms(), 1_000);
        let before = std::time::Instant::now();
        clock.sleep(60_000);
        assert!(before.elapsed() < Duration::from_millis(100), "sleep must not block");
        assert_eq!(clock.now_ms(), 61_000);
    }

    #[test]
    fn system_clock_moves_forward() {
        let clock = SystemClock;
        let a = clock.now_ms();
        let b = clock.now_ms();
        assert!(b >= a);
        assert!(a > 1_600_000_000_000, "epoch-based milliseconds expected");
    }
}
