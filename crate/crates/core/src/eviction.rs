//! LFRU eviction.
//!
//! Only entries that have not been touched within the staleness window are
//! candidates. Among those, the least frequently used go first.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};
use core::fmt;
use core::str::FromStr;
use core::time::Duration;

use crate::admission::{should_evict_now, AdmissionConfig, EvictGate};
use crate::cache::{BlockCache, BlockId, CacheEntry, RemovalCause, RemoveOutcome};
use crate::error::ConfigError;
use crate::time::VirtualInstant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EvictionMode {
    /// Evict only when the admission throttle allows it.
    Throttled,
    /// Keep the free-space target regardless of the throttle.
    Eager,
    None,
}

impl EvictionMode {
    pub fn label(self) -> &'static str {
        match self {
            EvictionMode::Throttled => "throttled",
            EvictionMode::Eager => "eager",
            EvictionMode::None => "none",
        }
    }
}

impl fmt::Display for EvictionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for EvictionMode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "throttled" => Ok(EvictionMode::Throttled),
            "eager" => Ok(EvictionMode::Eager),
            "none" => Ok(EvictionMode::None),
            other => Err(ConfigError::Other(alloc::format!(
                "unknown eviction mode `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvictionConfig {
    pub scan_interval: Duration,
    pub staleness_window: Duration,
    pub target_free_fraction: f64,
    pub mode: EvictionMode,
}

impl Default for EvictionConfig {
    fn default() -> Self {
        EvictionConfig {
            scan_interval: Duration::from_secs(1),
            staleness_window: Duration::from_secs(60),
            target_free_fraction: 0.05,
            mode: EvictionMode::Throttled,
        }
    }
}

impl EvictionConfig {
    pub fn with_mode(mode: EvictionMode) -> Self {
        EvictionConfig {
            mode,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.scan_interval.is_zero() {
            return Err(ConfigError::InvalidEviction("scan interval must be positive"));
        }
        if self.staleness_window.is_zero() {
            return Err(ConfigError::InvalidEviction("staleness window must be positive"));
        }
        if !(0.0..1.0).contains(&self.target_free_fraction) {
            return Err(ConfigError::InvalidEviction(
                "target free fraction must be in [0, 1)",
            ));
        }
        Ok(())
    }

    /// Bytes that must be freed to reach the free-space target.
    pub fn bytes_needed(&self, capacity: u64, free: u64) -> u64 {
        let target = libm::ceil(capacity as f64 * self.target_free_fraction) as u64;
        target.saturating_sub(free)
    }
}

pub fn is_stale(entry: &CacheEntry, now: VirtualInstant, window: Duration) -> bool {
    now.saturating_duration_since(entry.last_access_time) > window
}

/// Eviction order: least accessed, then least recently accessed, then id.
fn victim_order(a: &CacheEntry, b: &CacheEntry) -> Ordering {
    a.access_count
        .cmp(&b.access_count)
        .then(a.last_access_time.cmp(&b.last_access_time))
        .then(a.id.cmp(&b.id))
}

struct Candidate(CacheEntry);

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        victim_order(&self.0, &other.0) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        victim_order(&self.0, &other.0)
    }
}

/// Picks the shortest prefix of the stale entries, in eviction order, that
/// frees at least `bytes_needed`. Returns every stale entry when they do not
/// add up to that much.
pub fn select_victims(
    entries: &[CacheEntry],
    now: VirtualInstant,
    cfg: &EvictionConfig,
    bytes_needed: u64,
) -> Vec<CacheEntry> {
    let mut heap: BinaryHeap<Reverse<Candidate>> = entries
        .iter()
        .filter(|e| is_stale(e, now, cfg.staleness_window))
        .map(|e| Reverse(Candidate(*e)))
        .collect();
    let mut victims = Vec::new();
    let mut freed = 0;
    while freed < bytes_needed {
        let Some(Reverse(Candidate(e))) = heap.pop() else {
            break;
        };
        freed += e.payload_size();
        victims.push(e);
    }
    victims
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvictionOutcome {
    pub evicted: Vec<BlockId>,
    pub bytes_freed: u64,
    pub throttled: bool,
}

/// One background scan: decide whether to evict, pick victims, remove them.
///
/// Each removal goes through [`BlockCache::remove`], so it is counted and
/// charged like any other removal. Charging the device time for those
/// writes is left to the caller.
pub fn eviction_pass(
    cache: &BlockCache,
    admission: &AdmissionConfig,
    now: VirtualInstant,
    cfg: &EvictionConfig,
) -> EvictionOutcome {
    let mut out = EvictionOutcome::default();
    match cfg.mode {
        EvictionMode::None => return out,
        EvictionMode::Throttled => {
            if should_evict_now(cache.obp(), admission) == EvictGate::Throttled {
                out.throttled = true;
                return out;
            }
        }
        EvictionMode::Eager => {}
    }
    let needed = cfg.bytes_needed(cache.capacity_bytes(), cache.free_bytes());
    if needed == 0 {
        return out;
    }
    let entries = cache.snapshot_entries();
    for victim in select_victims(&entries, now, cfg, needed) {
        if cache.remove(&victim.id, RemovalCause::Eviction) == RemoveOutcome::Removed {
            out.bytes_freed += victim.payload_size();
            out.evicted.push(victim.id);
        }
    }
    out
}
