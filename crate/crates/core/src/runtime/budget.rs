//! Cooperative time and memory limits, plus process memory probes.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};

fn status_field_kb(field: &str) -> Option<u64> {
    let s = std::fs::read_to_string("/proc/self/status").ok()?;
    s.lines()
        .find(|l| l.starts_with(field))
        .and_then(|l| l[field.len()..].split_whitespace().next())
        .and_then(|v| v.parse().ok())
}

/// High-water resident set size of this process in bytes (Linux only).
pub fn peak_memory_bytes() -> Option<u64> {
    status_field_kb("VmHWM:").map(|kb| kb * 1024)
}

pub fn current_memory_bytes() -> Option<u64> {
    status_field_kb("VmRSS:").map(|kb| kb * 1024)
}

#[derive(Clone, Debug)]
pub struct Budget {
    start: Instant,
    time_limit: Option<Duration>,
    mem_limit: Option<u64>,
    ticks: u32,
}

const TIME_EVERY: u32 = 1 << 10;
const MEM_EVERY: u32 = 1 << 16;

impl Budget {
    pub fn new(time_limit: Option<Duration>, mem_limit: Option<u64>) -> Self {
        Budget {
            start: Instant::now(),
            time_limit,
            mem_limit,
            ticks: 0,
        }
    }

    pub fn unlimited() -> Self {
        Self::new(None, None)
    }

    pub fn started_at(mut self, start: Instant) -> Self {
        self.start = start;
        self
    }

    pub fn elapsed(&self) -> Duration {
        self.start.elapsed()
    }

    /// Cheap per-item check; the clock and /proc are consulted only periodically.
    #[inline]
    pub fn tick(&mut self) -> Result<()> {
        self.ticks = self.ticks.wrapping_add(1);
        if !self.ticks.is_multiple_of(TIME_EVERY) {
            return Ok(());
        }
        self.check_time()?;
        if self.ticks.is_multiple_of(MEM_EVERY) {
            self.check_memory()?;
        }
        Ok(())
    }

    pub fn check(&self) -> Result<()> {
        self.check_time()?;
        self.check_memory()
    }

    fn check_time(&self) -> Result<()> {
        match self.time_limit {
            Some(limit) if self.start.elapsed() > limit => Err(Error::TimeLimit(limit)),
            _ => Ok(()),
        }
    }

    fn check_memory(&self) -> Result<()> {
        if let Some(limit) = self.mem_limit {
            if let Some(rss) = current_memory_bytes() {
                if rss > limit {
                    return Err(Error::MemoryLimit(limit));
                }
            }
        }
        Ok(())
    }
}
