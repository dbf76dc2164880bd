use std::sync::Mutex;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

/// Time source for timestamps and rate-limit pauses.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
    fn sleep(&self, duration: Duration);
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }

    fn sleep(&self, duration: Duration) {
        std::thread::sleep(duration);
    }
}

/// Clock that only moves when slept on. Records every pause.
#[derive(Debug, Default)]
pub struct ManualClock {
    state: Mutex<(u64, Vec<Duration>)>,
}

impl ManualClock {
    pub fn starting_at(now_ms: u64) -> Self {
        Self {
            state: Mutex::new((now_ms, Vec::new())),
        }
    }

    pub fn advance(&self, duration: Duration) {
        self.state.lock().expect("clock lock poisoned").0 += duration.as_millis() as u64;
    }

    pub fn sleeps(&self) -> Vec<Duration> {
        self.state.lock().expect("clock lock poisoned").1.clone()
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.state.lock().expect("clock lock poisoned").0
    }

    fn sleep(&self, duration: Duration) {
        let mut state = self.state.lock().expect("clock lock poisoned");
        state.0 += duration.as_millis() as u64;
        state.1.push(duration);
    }
}
