use std::time::{Duration, Instant};

/// Runs `work` and returns its result with the elapsed wall-clock time.
pub fn timing_probe<T>(stage: &str, work: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = work();
    let elapsed = start.elapsed();
    log::debug!("{stage}: {:.3} s", elapsed.as_secs_f64());
    (out, elapsed)
}

/// Minutes the stage would take for 4,000 users at the measured rate.
pub fn minutes_per_4000_users(elapsed: Duration, users: usize) -> f64 {
    if users == 0 {
        return 0.0;
    }
    elapsed.as_secs_f64() / 60.0 * 4000.0 / users as f64
}
