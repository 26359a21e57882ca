use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

/// Bounds the number of in-flight requests across every gateway that
/// shares it, and optionally spaces request starts to a steady rate.
#[derive(Debug)]
pub struct RateLimiter {
    max_in_flight: usize,
    min_interval: Option<Duration>,
    state: Mutex<State>,
    freed: Condvar,
}

#[derive(Debug)]
struct State {
    in_flight: usize,
    next_start: Instant,
}

/// Held while a request is in flight; releases its slot on drop.
#[derive(Debug)]
pub struct Permit<'a> {
    limiter: &'a RateLimiter,
}

impl RateLimiter {
    pub fn new(max_in_flight: usize) -> Self {
        RateLimiter {
            max_in_flight: max_in_flight.max(1),
            min_interval: None,
            state: Mutex::new(State {
                in_flight: 0,
                next_start: Instant::now(),
            }),
            freed: Condvar::new(),
        }
    }

    /// Refill rate of one request start per `1 / per_second` seconds.
    pub fn with_rate(mut self, per_second: f64) -> Self {
        if per_second > 0.0 {
            self.min_interval = Some(Duration::from_secs_f64(1.0 / per_second));
        }
        self
    }

    pub fn max_in_flight(&self) -> usize {
        self.max_in_flight
    }

    pub fn in_flight(&self) -> usize {
        self.state.lock().expect("limiter lock poisoned").in_flight
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut state = self.state.lock().expect("limiter lock poisoned");
        while state.in_flight >= self.max_in_flight {
            state = self.freed.wait(state).expect("limiter lock poisoned");
        }
        state.in_flight += 1;
        let wait = self.min_interval.map(|interval| {
            let now = Instant::now();
            let start = state.next_start.max(now);
            state.next_start = start + interval;
            start - now
        });
        drop(state);
        if let Some(wait) = wait.filter(|w| !w.is_zero()) {
            std::thread::sleep(wait);
        }
        Permit { limiter: self }
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut state = self.limiter.state.lock().expect("limiter lock poisoned");
        state.in_flight -= 1;
        drop(state);
        self.limiter.freed.notify_one();
    }
}
