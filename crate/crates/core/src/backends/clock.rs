use std::sync::Mutex;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

/// Time source for rate limiting, retry backoff and cache timestamps.
pub trait Clock: Send + Sync {
    /// Monotonic time since the clock was created.
    fn now(&self) -> Duration;

    fn sleep_until(&self, deadline: Duration);

    fn sleep(&self, d: Duration) {
        self.sleep_until(self.now() + d);
    }

    fn unix_seconds(&self) -> u64;
}

#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        SystemClock { origin: Instant::now() }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep_until(&self, deadline: Duration) {
        let now = self.now();
        if deadline > now {
            std::thread::sleep(deadline - now);
        }
    }

    fn unix_seconds(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    }
}

/// Manually driven clock: sleeping jumps time forward instantly.
#[derive(Debug)]
pub struct VirtualClock {
    now: Mutex<Duration>,
    unix_base: u64,
    sleeps: Mutex<Vec<Duration>>,
}

impl VirtualClock {
    pub fn new(unix_base: u64) -> Self {
        VirtualClock {
            now: Mutex::new(Duration::ZERO),
            unix_base,
            sleeps: Mutex::new(Vec::new()),
        }
    }

    pub fn advance(&self, d: Duration) {
        *self.now.lock().unwrap() += d;
    }

    /// Durations of every non-trivial sleep, in call order.
    pub fn sleeps(&self) -> Vec<Duration> {
        self.sleeps.lock().unwrap().clone()
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> Duration {
        *self.now.lock().unwrap()
    }

    fn sleep_until(&self, deadline: Duration) {
        let mut now = self.now.lock().unwrap();
        if deadline > *now {
            self.sleeps.lock().unwrap().push(deadline - *now);
            *now = deadline;
        }
    }

    fn unix_seconds(&self) -> u64 {
        self.unix_base + self.now().as_secs()
    }
}

/// Clock that never moves: sleeps return at once and every timestamp is
/// the same. Used for mock backends so fresh runs are reproducible.
#[derive(Debug, Default)]
pub struct FixedClock {
    pub unix_seconds: u64,
}

impl Clock for FixedClock {
    fn now(&self) -> Duration {
        Duration::ZERO
    }

    fn sleep_until(&self, _deadline: Duration) {}

    fn unix_seconds(&self) -> u64 {
        self.unix_seconds
    }
}
