use std::sync::{Arc, Mutex};
use std::time::Duration;

use super::clock::Clock;

/// Spaces admissions at least `1 / rate` apart, so no half-open one-second
/// window ever holds more than `rate` admissions.
pub struct RateLimiter {
    interval: Duration,
    next_free: Mutex<Option<Duration>>,
    clock: Arc<dyn Clock>,
}

impl RateLimiter {
    pub fn new(rate_per_sec: f64, clock: Arc<dyn Clock>) -> Self {
        assert!(rate_per_sec > 0.0 && rate_per_sec.is_finite(), "rate limit must be positive");
        RateLimiter {
            // rounded up so that `rate` intervals never fit inside one second
            interval: Duration::from_nanos((1e9 / rate_per_sec).ceil() as u64),
            next_free: Mutex::new(None),
            clock,
        }
    }

    pub fn interval(&self) -> Duration {
        self.interval
    }

    /// Blocks until the caller may issue one request; returns the
    /// admission time on the limiter's clock.
    pub fn acquire(&self) -> Duration {
        let slot = {
            let mut next = self.next_free.lock().unwrap();
            let now = self.clock.now();
            let slot = match *next {
                Some(free) if free > now => free,
                _ => now,
            };
            *next = Some(slot + self.interval);
            slot
        };
        self.clock.sleep_until(slot);
        slot
    }
}
