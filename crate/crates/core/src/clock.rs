//! Process-wide monotonic clock with nanosecond resolution.
//!
//! Every timestamp the harness records (trace events, envelope origin stamps,
//! monitor receive stamps, power samples) comes from [`now_ns`], so all of
//! them live on one time axis and can be subtracted directly.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

static EPOCH: OnceLock<Instant> = OnceLock::new();

fn epoch() -> Instant {
    *EPOCH.get_or_init(Instant::now)
}

/// Nanoseconds elapsed since the first clock read in this process.
#[inline]
pub fn now_ns() -> u64 {
    epoch().elapsed().as_nanos() as u64
}

/// Block until the clock reaches `deadline_ns`.
///
/// Coarse sleeps cover most of the wait; the last stretch spins so that
/// fixed-rate playback lands within a few microseconds of its schedule.
pub fn sleep_until(deadline_ns: u64) {
    const SPIN_WINDOW_NS: u64 = 1_000_000;
    loop {
        let now = now_ns();
        if now >= deadline_ns {
            return;
        }
        let remaining = deadline_ns - now;
        if remaining > SPIN_WINDOW_NS + 500_000 {
            std::thread::sleep(Duration::from_nanos(remaining - SPIN_WINDOW_NS));
        } else if remaining > 50_000 {
            std::thread::yield_now();
        } else {
            std::hint::spin_loop();
        }
    }
}

/// Spin on the clock for `duration_ns`, starting now.
pub fn spin_for(duration_ns: u64) {
    let start = now_ns();
    while now_ns().saturating_sub(start) < duration_ns {
        std::hint::spin_loop();
    }
}

/// Wall-clock time as an RFC 3339 / ISO-8601 string (recorded once per run).
pub fn wall_clock_iso8601() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
