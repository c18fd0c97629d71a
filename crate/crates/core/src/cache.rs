//! Bucketed block cache.
//!
//! A fixed array of buckets, each a spinlocked chain of entries. Entries are
//! metadata only: payload bytes are accounted but never stored. Counters are
//! atomics so snapshots never block writers.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::num::NonZeroU32;
use core::sync::atomic::{AtomicU64, Ordering};

use spin::Mutex;

use crate::error::ConfigError;
use crate::obp::{EpochClose, Obp, ObpWindow, WindowCounts};
use crate::time::VirtualInstant;

/// Identity of an on-disk block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockId {
    file_id: u64,
    offset: u64,
    size: NonZeroU32,
}

impl BlockId {
    /// # Panics
    ///
    /// Panics if `size` is zero.
    pub fn new(file_id: u64, offset: u64, size: u32) -> Self {
        let size = NonZeroU32::new(size).expect("block size must be positive");
        BlockId {
            file_id,
            offset,
            size,
        }
    }

    pub fn file_id(&self) -> u64 {
        self.file_id
    }

    pub fn offset(&self) -> u64 {
        self.offset
    }

    pub fn size(&self) -> u32 {
        self.size.get()
    }
}

/// Per-block access metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheEntry {
    pub id: BlockId,
    pub admit_time: VirtualInstant,
    pub last_access_time: VirtualInstant,
    /// Admission counts as the first access.
    pub access_count: u64,
}

impl CacheEntry {
    pub fn payload_size(&self) -> u64 {
        self.id.size() as u64
    }
}

/// Point-in-time copy of the cache's monotonic counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheCounters {
    pub blocks_inserted: u64,
    /// Invalidations plus evictions.
    pub blocks_removed: u64,
    pub removed_by_invalidation: u64,
    pub removed_by_eviction: u64,
    pub blocks_looked_up: u64,
    pub lookup_hits: u64,
    pub bytes_written: u64,
    pub bytes_read: u64,
}

impl CacheCounters {
    pub fn window_counts(&self) -> WindowCounts {
        WindowCounts {
            inserted: self.blocks_inserted,
            removed: self.blocks_removed,
            looked_up: self.blocks_looked_up,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CacheStats {
    pub counters: CacheCounters,
    pub used_bytes: u64,
    pub resident_blocks: u64,
    pub hit_ratio: f64,
}

/// Default bucket density: this many buckets for this much capacity.
pub const REFERENCE_BUCKETS: u64 = 32_768;
pub const REFERENCE_CAPACITY: u64 = 180_000_000_000;

/// Bytes charged to the cache medium for each removal (allocator metadata).
pub const DEFAULT_REMOVAL_WRITE_BYTES: u64 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheConfig {
    pub capacity_bytes: u64,
    pub bucket_count: usize,
    pub seed: u64,
    pub removal_write_bytes: u64,
}

impl CacheConfig {
    /// Capacity with the default bucket density and removal cost.
    pub fn with_capacity(capacity_bytes: u64) -> Self {
        CacheConfig {
            capacity_bytes,
            bucket_count: default_bucket_count(capacity_bytes),
            seed: 0,
            removal_write_bytes: DEFAULT_REMOVAL_WRITE_BYTES,
        }
    }

    pub fn validate(&self, largest_block: u32) -> Result<(), ConfigError> {
        if self.capacity_bytes == 0 {
            return Err(ConfigError::ZeroCapacity);
        }
        if self.bucket_count == 0 {
            return Err(ConfigError::ZeroBuckets);
        }
        if self.capacity_bytes < largest_block as u64 {
            return Err(ConfigError::CapacityBelowBlockSize {
                capacity: self.capacity_bytes,
                block_size: largest_block,
            });
        }
        Ok(())
    }
}

pub fn default_bucket_count(capacity_bytes: u64) -> usize {
    let buckets = (capacity_bytes as u128 * REFERENCE_BUCKETS as u128)
        .div_ceil(REFERENCE_CAPACITY as u128)
        .max(1) as u64;
    buckets.next_power_of_two() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    Inserted,
    RejectedFull,
    Duplicate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemoveOutcome {
    Removed,
    Absent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemovalCause {
    Invalidation,
    Eviction,
}

#[derive(Default)]
struct AtomicCounters {
    inserted: AtomicU64,
    removed_invalidation: AtomicU64,
    removed_eviction: AtomicU64,
    looked_up: AtomicU64,
    hits: AtomicU64,
    bytes_written: AtomicU64,
    bytes_read: AtomicU64,
}

pub struct BlockCache {
    buckets: Box<[Mutex<Vec<CacheEntry>>]>,
    counters: AtomicCounters,
    used_bytes: AtomicU64,
    resident: AtomicU64,
    window: Mutex<ObpWindow>,
    cfg: CacheConfig,
}

impl BlockCache {
    pub fn new(cfg: CacheConfig) -> Result<Self, ConfigError> {
        if cfg.capacity_bytes == 0 {
            return Err(ConfigError::ZeroCapacity);
        }
        if cfg.bucket_count == 0 {
            return Err(ConfigError::ZeroBuckets);
        }
        let buckets = (0..cfg.bucket_count)
            .map(|_| Mutex::new(Vec::new()))
            .collect();
        Ok(BlockCache {
            buckets,
            counters: AtomicCounters::default(),
            used_bytes: AtomicU64::new(0),
            resident: AtomicU64::new(0),
            window: Mutex::new(ObpWindow::new()),
            cfg,
        })
    }

    pub fn config(&self) -> &CacheConfig {
        &self.cfg
    }

    pub fn capacity_bytes(&self) -> u64 {
        self.cfg.capacity_bytes
    }

    pub fn used_bytes(&self) -> u64 {
        self.used_bytes.load(Ordering::Acquire)
    }

    pub fn free_bytes(&self) -> u64 {
        self.cfg.capacity_bytes.saturating_sub(self.used_bytes())
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    pub fn bucket_of(&self, id: &BlockId) -> usize {
        (block_hash(self.cfg.seed, id) % self.buckets.len() as u64) as usize
    }

    pub fn lookup(&self, id: &BlockId, now: VirtualInstant) -> Option<CacheEntry> {
        self.counters.looked_up.fetch_add(1, Ordering::Relaxed);
        let mut bucket = self.buckets[self.bucket_of(id)].lock();
        let entry = bucket.iter_mut().find(|e| e.id == *id)?;
        if now > entry.last_access_time {
            entry.last_access_time = now;
        }
        entry.access_count += 1;
        let hit = *entry;
        drop(bucket);
        self.counters.hits.fetch_add(1, Ordering::Relaxed);
        self.counters
            .bytes_read
            .fetch_add(hit.payload_size(), Ordering::Relaxed);
        Some(hit)
    }

    /// Looks for `id` without touching counters or access metadata.
    pub fn peek(&self, id: &BlockId) -> Option<CacheEntry> {
        let bucket = self.buckets[self.bucket_of(id)].lock();
        bucket.iter().find(|e| e.id == *id).copied()
    }

    pub fn contains(&self, id: &BlockId) -> bool {
        self.peek(id).is_some()
    }

    /// Stores `id`. The admission decision is the caller's.
    pub fn insert(&self, id: BlockId, now: VirtualInstant) -> InsertOutcome {
        let size = id.size() as u64;
        let mut bucket = self.buckets[self.bucket_of(&id)].lock();
        if bucket.iter().any(|e| e.id == id) {
            return InsertOutcome::Duplicate;
        }
        let reserved = self
            .used_bytes
            .fetch_update(Ordering::AcqRel, Ordering::Acquire, |used| {
                let next = used + size;
                (next <= self.cfg.capacity_bytes).then_some(next)
            });
        if reserved.is_err() {
            return InsertOutcome::RejectedFull;
        }
        bucket.push(CacheEntry {
            id,
            admit_time: now,
            last_access_time: now,
            access_count: 1,
        });
        drop(bucket);
        self.resident.fetch_add(1, Ordering::Relaxed);
        self.counters.inserted.fetch_add(1, Ordering::Relaxed);
        self.counters.bytes_written.fetch_add(size, Ordering::Relaxed);
        InsertOutcome::Inserted
    }

    pub fn remove(&self, id: &BlockId, cause: RemovalCause) -> RemoveOutcome {
        let mut bucket = self.buckets[self.bucket_of(id)].lock();
        let Some(pos) = bucket.iter().position(|e| e.id == *id) else {
            return RemoveOutcome::Absent;
        };
        let entry = bucket.swap_remove(pos);
        drop(bucket);
        self.used_bytes
            .fetch_sub(entry.payload_size(), Ordering::AcqRel);
        self.resident.fetch_sub(1, Ordering::Relaxed);
        let by_cause = match cause {
            RemovalCause::Invalidation => &self.counters.removed_invalidation,
            RemovalCause::Eviction => &self.counters.removed_eviction,
        };
        by_cause.fetch_add(1, Ordering::Relaxed);
        self.counters
            .bytes_written
            .fetch_add(self.cfg.removal_write_bytes, Ordering::Relaxed);
        RemoveOutcome::Removed
    }

    pub fn counters(&self) -> CacheCounters {
        let c = &self.counters;
        let invalidation = c.removed_invalidation.load(Ordering::Relaxed);
        let eviction = c.removed_eviction.load(Ordering::Relaxed);
        CacheCounters {
            blocks_inserted: c.inserted.load(Ordering::Relaxed),
            blocks_removed: invalidation + eviction,
            removed_by_invalidation: invalidation,
            removed_by_eviction: eviction,
            blocks_looked_up: c.looked_up.load(Ordering::Relaxed),
            lookup_hits: c.hits.load(Ordering::Relaxed),
            bytes_written: c.bytes_written.load(Ordering::Relaxed),
            bytes_read: c.bytes_read.load(Ordering::Relaxed),
        }
    }

    pub fn stats_snapshot(&self) -> CacheStats {
        let counters = self.counters();
        CacheStats {
            counters,
            used_bytes: self.used_bytes(),
            resident_blocks: self.resident.load(Ordering::Relaxed),
            hit_ratio: counters.lookup_hits as f64 / counters.blocks_looked_up.max(1) as f64,
        }
    }

    /// Smoothed overhead-bypass ratio, including the in-progress epoch.
    pub fn obp(&self) -> Obp {
        let totals = self.counters().window_counts();
        self.window.lock().obp(totals)
    }

    /// Closes epochs ending at or before `now`; see [`ObpWindow::advance`].
    pub fn advance_epochs(&self, now: VirtualInstant, on_close: impl FnMut(EpochClose)) {
        let totals = self.counters().window_counts();
        self.window.lock().advance(now, totals, on_close);
    }

    /// Copies every resident entry, holding one bucket lock at a time.
    pub fn snapshot_entries(&self) -> Vec<CacheEntry> {
        let mut out = Vec::with_capacity(self.resident.load(Ordering::Relaxed) as usize);
        for bucket in self.buckets.iter() {
            out.extend_from_slice(&bucket.lock());
        }
        out
    }

    pub fn bucket_entries(&self, bucket: usize) -> Vec<CacheEntry> {
        self.buckets[bucket].lock().clone()
    }
}

/// Seeded 64-bit mix of a block's identity.
pub fn block_hash(seed: u64, id: &BlockId) -> u64 {
    let mut h = splitmix(seed ^ 0x9e37_79b9_7f4a_7c15);
    h = splitmix(h ^ id.file_id);
    h = splitmix(h ^ id.offset);
    splitmix(h ^ id.size() as u64)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
