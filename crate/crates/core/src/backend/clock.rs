//! Simulated wall clock. Latencies are added in whole nanoseconds so that
//! concurrent advances commute.

use std::sync::atomic::{AtomicU64, Ordering};

#[derive(Debug, Default)]
pub struct SimClock {
    nanos: AtomicU64,
}

impl SimClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn advance(&self, seconds: f64) {
        let delta = (seconds.max(0.0) * 1e9).round() as u64;
        self.nanos.fetch_add(delta, Ordering::SeqCst);
    }

    pub fn now_nanos(&self) -> u64 {
        self.nanos.load(Ordering::SeqCst)
    }

    pub fn now_seconds(&self) -> f64 {
        self.now_nanos() as f64 / 1e9
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn advances_monotonically() {
        let c = SimClock::new();
        assert_eq!(c.now_nanos(), 0);
        c.advance(1.5);
        c.advance(0.25);
        assert_eq!(c.now_nanos(), 1_750_000_000);
        c.advance(-3.0);
        assert_eq!(c.now_seconds(), 1.75);
    }
}
