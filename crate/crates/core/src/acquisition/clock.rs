//! Time sources and the token-bucket limiter shared by fetch workers.

use std::sync::Mutex;
use std::time::{Duration, Instant};

pub trait Clock: Send + Sync {
    /// Time elapsed since the clock's origin.
    fn now(&self) -> Duration;

    fn sleep_until(&self, deadline: Duration);

    fn sleep(&self, d: Duration) {
        self.sleep_until(self.now() + d);
    }
}

#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        SystemClock {
            origin: Instant::now(),
        }
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
}

/// Virtual time: sleeping jumps the clock forward instead of blocking.
#[derive(Debug, Default)]
pub struct SimulatedClock {
    now: Mutex<Duration>,
}

impl SimulatedClock {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Clock for SimulatedClock {
    fn now(&self) -> Duration {
        *self.now.lock().unwrap()
    }

    fn sleep_until(&self, deadline: Duration) {
        let mut now = self.now.lock().unwrap();
        if deadline > *now {
            *now = deadline;
        }
    }
}

/// Token bucket. Callers that find it empty reserve the next slot and sleep
/// until it arrives, so concurrent callers are admitted in reservation order.
#[derive(Debug)]
pub struct RateLimiter {
    per_sec: f64,
    burst: f64,
    state: Mutex<Bucket>,
}

#[derive(Debug)]
struct Bucket {
    tokens: f64,
    last: Option<Duration>,
}

impl RateLimiter {
    pub fn new(per_sec: f64) -> Self {
        Self::with_burst(per_sec, 1)
    }

    pub fn with_burst(per_sec: f64, burst: u32) -> Self {
        assert!(per_sec > 0.0, "rate must be positive");
        let burst = f64::from(burst.max(1));
        RateLimiter {
            per_sec,
            burst,
            state: Mutex::new(Bucket {
                tokens: burst,
                last: None,
            }),
        }
    }

    pub fn per_sec(&self) -> f64 {
        self.per_sec
    }

    /// Blocks on `clock` until a request may be issued.
    pub fn acquire(&self, clock: &dyn Clock) {
        let wait_until = {
            let mut b = self.state.lock().unwrap();
            let now = clock.now();
            if let Some(last) = b.last {
                let refill = now.saturating_sub(last).as_secs_f64() * self.per_sec;
                b.tokens = (b.tokens + refill).min(self.burst);
            }
            b.last = Some(now);
            b.tokens -= 1.0;
            if b.tokens >= 0.0 {
                None
            } else {
                Some(now + Duration::from_secs_f64(-b.tokens / self.per_sec))
            }
        };
        if let Some(deadline) = wait_until {
            clock.sleep_until(deadline);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn n_requests_take_at_least_n_minus_one_intervals() {
        for (q, n) in [(10.0, 25usize), (3.0, 7), (100.0, 1)] {
            let clock = SimulatedClock::new();
            let limiter = RateLimiter::new(q);
            for _ in 0..n {
                limiter.acquire(&clock);
            }
            let elapsed = clock.now().as_secs_f64();
            assert!(elapsed + 1e-9 >= (n as f64 - 1.0) / q, "q={q} n={n} t={elapsed}");
            assert!(elapsed <= n as f64 / q + 1e-9);
        }
    }

    #[test]
    fn concurrent_callers_share_one_budget() {
        let clock = Arc::new(SimulatedClock::new());
        let limiter = Arc::new(RateLimiter::new(10.0));
        std::thread::scope(|s| {
            for _ in 0..8 {
                let (clock, limiter) = (clock.clone(), limiter.clone());
                s.spawn(move || {
                    for _ in 0..5 {
                        limiter.acquire(clock.as_ref());
                    }
                });
            }
        });
        assert!(clock.now().as_secs_f64() + 1e-9 >= 39.0 / 10.0);
    }

    #[test]
    fn idle_time_refills_up_to_burst() {
        let clock = SimulatedClock::new();
        let limiter = RateLimiter::with_burst(1.0, 2);
        limiter.acquire(&clock);
        limiter.acquire(&clock);
        assert_eq!(clock.now(), Duration::ZERO);
        clock.sleep(Duration::from_secs(10));
        limiter.acquire(&clock);
        limiter.acquire(&clock);
        limiter.acquire(&clock);
        assert_eq!(clock.now(), Duration::from_secs(11));
    }
}
