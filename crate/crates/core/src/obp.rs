//! The overhead-bypass ratio: write-generating cache events over lookups.
//!
//! Counts are bucketed into epochs of one virtual second. The ratio is taken
//! over an exponentially weighted window: the in-progress epoch at weight 1,
//! the epoch before it at 1/2, the one before that at 1/4, and so on. The
//! numerator and denominator decay together, so the ratio is continuous
//! across an epoch boundary; only new events move it.

use core::fmt;
use core::ops::Sub;
use core::time::Duration;

use crate::time::VirtualInstant;

/// Length of one accounting epoch.
pub const EPOCH: Duration = Duration::from_secs(1);

/// Weight applied to the window at each epoch boundary.
pub const DECAY: f64 = 0.5;

/// Value of the overhead-bypass ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Obp {
    Ratio(f64),
    /// Writes happened but nothing was looked up: exceeds every target.
    Saturated,
}

impl Obp {
    pub fn from_parts(writes: f64, lookups: f64) -> Obp {
        if lookups > 0.0 {
            Obp::Ratio(writes / lookups)
        } else if writes > 0.0 {
            Obp::Saturated
        } else {
            Obp::Ratio(0.0)
        }
    }

    pub fn exceeds(self, target: f64) -> bool {
        match self {
            Obp::Ratio(r) => r > target,
            Obp::Saturated => true,
        }
    }

    pub fn ratio(self) -> Option<f64> {
        match self {
            Obp::Ratio(r) => Some(r),
            Obp::Saturated => None,
        }
    }
}

impl fmt::Display for Obp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Obp::Ratio(r) => write!(f, "{r:.6}"),
            Obp::Saturated => f.write_str("saturated"),
        }
    }
}

/// Monotonic totals of the three events that enter the ratio.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WindowCounts {
    pub inserted: u64,
    pub removed: u64,
    pub looked_up: u64,
}

impl WindowCounts {
    pub fn writes(&self) -> u64 {
        self.inserted + self.removed
    }
}

impl Sub for WindowCounts {
    type Output = WindowCounts;

    fn sub(self, rhs: WindowCounts) -> WindowCounts {
        WindowCounts {
            inserted: self.inserted - rhs.inserted,
            removed: self.removed - rhs.removed,
            looked_up: self.looked_up - rhs.looked_up,
        }
    }
}

/// Emitted once per completed epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochClose {
    pub epoch: u64,
    /// Smoothed ratio as of the epoch's last instant.
    pub obp: Obp,
    /// Raw events that fell inside the epoch.
    pub counts: WindowCounts,
}

/// Epoch bookkeeping for the smoothed ratio.
///
/// The window does not own counters; callers pass in the cache's monotonic
/// totals. [`ObpWindow::advance`] must run before events at a new instant
/// are recorded, so that every event since the previous call belongs to the
/// epoch that was current at that call.
#[derive(Debug, Clone, Default)]
pub struct ObpWindow {
    epoch: u64,
    base: WindowCounts,
    decayed_writes: f64,
    decayed_lookups: f64,
}

impl ObpWindow {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn epoch_end(&self) -> VirtualInstant {
        VirtualInstant::from_nanos((self.epoch + 1) * EPOCH.as_nanos() as u64)
    }

    pub fn obp(&self, totals: WindowCounts) -> Obp {
        let cur = totals - self.base;
        Obp::from_parts(
            self.decayed_writes + cur.writes() as f64,
            self.decayed_lookups + cur.looked_up as f64,
        )
    }

    /// Closes every epoch that ends at or before `now`, reporting each.
    pub fn advance(
        &mut self,
        now: VirtualInstant,
        totals: WindowCounts,
        mut on_close: impl FnMut(EpochClose),
    ) {
        while now >= self.epoch_end() {
            let cur = totals - self.base;
            let writes = self.decayed_writes + cur.writes() as f64;
            let lookups = self.decayed_lookups + cur.looked_up as f64;
            on_close(EpochClose {
                epoch: self.epoch,
                obp: Obp::from_parts(writes, lookups),
                counts: cur,
            });
            self.decayed_writes = writes * DECAY;
            self.decayed_lookups = lookups * DECAY;
            self.base = totals;
            self.epoch += 1;
        }
    }
}
