//! Wall-clock pacing of the 1 ms tick.

use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use crate::config::RunMode;

pub const TICK: Duration = Duration::from_millis(1);
/// Below this much remaining time the pacer spins instead of sleeping.
pub const SPIN_THRESHOLD: Duration = Duration::from_micros(200);

/// Monotonic time source.
pub trait Clock: Send {
    /// Time since an arbitrary fixed origin.
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
    /// Busy-wait until `target`.
    fn spin_until(&self, target: Duration) {
        while self.now() < target {
            std::hint::spin_loop();
        }
    }
}

#[derive(Debug, Clone)]
pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Clock that only moves when told to, or when slept on.
#[derive(Debug, Clone, Default)]
pub struct ManualClock {
    now: Arc<Mutex<Duration>>,
}

impl ManualClock {
    pub fn advance(&self, d: Duration) {
        *self.now.lock().expect("clock poisoned") += d;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Duration {
        *self.now.lock().expect("clock poisoned")
    }

    fn sleep(&self, d: Duration) {
        self.advance(d);
    }

    fn spin_until(&self, target: Duration) {
        let mut now = self.now.lock().expect("clock poisoned");
        *now = (*now).max(target);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickClock {
    pub tick_index: u64,
    pub mode: RunMode,
    pub deadline_miss_count: u64,
    pub start_wallclock: Duration,
    /// Wall time at which tick `anchor_tick` was due to start.
    anchor: Duration,
    anchor_tick: u64,
}

impl TickClock {
    pub fn new(mode: RunMode, start_wallclock: Duration) -> Self {
        Self {
            tick_index: 0,
            mode,
            deadline_miss_count: 0,
            start_wallclock,
            anchor: start_wallclock,
            anchor_tick: 0,
        }
    }

    /// Wall time at which the current tick should start.
    pub fn target(&self) -> Duration {
        self.anchor + TICK * (self.tick_index - self.anchor_tick) as u32
    }

    /// Finish the current tick: wait for the next boundary, or count a
    /// miss and start the next tick right away when the boundary has
    /// already passed. After a miss the grid is re-anchored at the late
    /// start, so lost time is never made up by running ticks back to back.
    pub fn pace(&mut self, clock: &dyn Clock) {
        self.tick_index += 1;
        if self.mode == RunMode::FastForward {
            return;
        }
        let target = self.target();
        let now = clock.now();
        if now > target {
            self.deadline_miss_count += 1;
            self.anchor = now;
            self.anchor_tick = self.tick_index;
            return;
        }
        let remaining = target - now;
        if remaining > SPIN_THRESHOLD {
            clock.sleep(remaining - SPIN_THRESHOLD);
        }
        clock.spin_until(target);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn early_finish_waits_for_boundary() {
        let c = ManualClock::default();
        let mut t = TickClock::new(RunMode::RealTime, c.now());
        c.advance(Duration::from_micros(300));
        t.pace(&c);
        assert_eq!(c.now(), Duration::from_millis(1));
        assert_eq!(t.deadline_miss_count, 0);
        t.pace(&c);
        assert_eq!(c.now(), Duration::from_millis(2));
    }

    #[test]
    fn overrun_counts_once_and_reanchors() {
        let c = ManualClock::default();
        let mut t = TickClock::new(RunMode::RealTime, c.now());
        c.advance(Duration::from_micros(1300));
        t.pace(&c);
        assert_eq!(t.deadline_miss_count, 1);
        // no sleep: next tick starts at once
        assert_eq!(c.now(), Duration::from_micros(1300));
        c.advance(Duration::from_micros(100));
        t.pace(&c);
        assert_eq!(t.deadline_miss_count, 1);
        assert_eq!(c.now(), Duration::from_micros(2300));
        assert_eq!(t.tick_index, 2);
    }

    #[test]
    fn fast_forward_never_waits() {
        let c = ManualClock::default();
        let mut t = TickClock::new(RunMode::FastForward, c.now());
        for _ in 0..10 {
            t.pace(&c);
        }
        assert_eq!(c.now(), Duration::ZERO);
        assert_eq!(t.tick_index, 10);
    }

    #[test]
    fn real_clock_paces_near_one_ms() {
        let c = SystemClock::default();
        let mut t = TickClock::new(RunMode::RealTime, c.now());
        let start = Instant::now();
        for _ in 0..200 {
            t.pace(&c);
        }
        let ms = start.elapsed().as_secs_f64() * 1000.0;
        assert!(ms >= 199.0, "{ms}");
    }
}
