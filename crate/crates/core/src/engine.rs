//! Storage-engine model: a block manager that never updates blocks in place,
//! a DRAM tier in front of it, and the block cache underneath.
//!
//! Read path: DRAM, then the block cache, then SSD. A block read from SSD is
//! offered to admission. Update path: bring the page in through the read
//! path, write a fresh block to SSD, offer it to admission, then free the
//! old block, which invalidates any cached copy.
//!
//! Every device access is queued on the [`DeviceClock`]; the returned
//! instant is when the calling thread may issue its next operation.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::admission::{should_admit, AdmissionConfig, DatasetTracker, Decision, Origin};
use crate::cache::{BlockCache, BlockId, CacheConfig, InsertOutcome, RemovalCause, RemoveOutcome};
use crate::device::{AccessKind, DeviceClock, DeviceProfile, DeviceProfiles};
use crate::error::ConfigError;
use crate::eviction::{eviction_pass, EvictionConfig, EvictionMode};
use crate::obp::EpochClose;
use crate::time::VirtualInstant;
use crate::workload::{Op, OpKind};

/// Maps each logical record to its live block.
#[derive(Debug, Clone)]
pub struct LogicalRecordSpace {
    block_size: u32,
    blocks: Vec<BlockId>,
    next_ordinal: u64,
}

/// All blocks live in one append-only file.
const DATA_FILE: u64 = 0;

impl LogicalRecordSpace {
    pub fn new(block_size: u32) -> Self {
        LogicalRecordSpace {
            block_size,
            blocks: Vec::new(),
            next_ordinal: 0,
        }
    }

    pub fn block_size(&self) -> u32 {
        self.block_size
    }

    pub fn record_count(&self) -> u64 {
        self.blocks.len() as u64
    }

    pub fn block_of(&self, key: u64) -> Option<BlockId> {
        self.blocks.get(key as usize).copied()
    }

    fn fresh_block(&mut self) -> BlockId {
        let id = BlockId::new(
            DATA_FILE,
            self.next_ordinal * self.block_size as u64,
            self.block_size,
        );
        self.next_ordinal += 1;
        id
    }

    pub fn append(&mut self) -> (u64, BlockId) {
        let id = self.fresh_block();
        self.blocks.push(id);
        (self.blocks.len() as u64 - 1, id)
    }

    /// Points `key` at a new block and returns `(freed, new)`.
    pub fn rewrite(&mut self, key: u64) -> Option<(BlockId, BlockId)> {
        let slot = key as usize;
        if slot >= self.blocks.len() {
            return None;
        }
        let new = self.fresh_block();
        let old = core::mem::replace(&mut self.blocks[slot], new);
        Some((old, new))
    }

    pub fn live_blocks(&self) -> &[BlockId] {
        &self.blocks
    }
}

/// Strict-LRU stand-in for the engine cache plus the OS buffer cache.
#[derive(Debug, Clone)]
pub struct DramCacheModel {
    capacity_bytes: u64,
    used_bytes: u64,
    clock: u64,
    by_block: BTreeMap<BlockId, u64>,
    by_age: BTreeMap<u64, BlockId>,
}

impl DramCacheModel {
    pub fn new(capacity_bytes: u64) -> Self {
        DramCacheModel {
            capacity_bytes,
            used_bytes: 0,
            clock: 0,
            by_block: BTreeMap::new(),
            by_age: BTreeMap::new(),
        }
    }

    pub fn capacity_bytes(&self) -> u64 {
        self.capacity_bytes
    }

    pub fn used_bytes(&self) -> u64 {
        self.used_bytes
    }

    pub fn len(&self) -> usize {
        self.by_block.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_block.is_empty()
    }

    pub fn contains(&self, id: &BlockId) -> bool {
        self.by_block.contains_key(id)
    }

    fn stamp(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    /// Marks `id` most recently used; false on a miss.
    pub fn touch(&mut self, id: &BlockId) -> bool {
        let stamp = self.stamp();
        match self.by_block.get_mut(id) {
            Some(age) => {
                self.by_age.remove(age);
                *age = stamp;
                self.by_age.insert(stamp, *id);
                true
            }
            None => false,
        }
    }

    /// Makes `id` resident, displacing least recently used blocks. Returns
    /// how many were displaced.
    pub fn insert(&mut self, id: BlockId) -> usize {
        if self.touch(&id) {
            return 0;
        }
        let size = id.size() as u64;
        if size > self.capacity_bytes {
            return 0;
        }
        let mut displaced = 0;
        while self.used_bytes + size > self.capacity_bytes {
            let Some((_, victim)) = self.by_age.pop_first() else {
                break;
            };
            self.by_block.remove(&victim);
            self.used_bytes -= victim.size() as u64;
            displaced += 1;
        }
        let stamp = self.stamp();
        self.by_block.insert(id, stamp);
        self.by_age.insert(stamp, id);
        self.used_bytes += size;
        displaced
    }

    pub fn remove(&mut self, id: &BlockId) -> bool {
        match self.by_block.remove(id) {
            Some(age) => {
                self.by_age.remove(&age);
                self.used_bytes -= id.size() as u64;
                true
            }
            None => false,
        }
    }

    /// Resident blocks from least to most recently used.
    pub fn lru_order(&self) -> impl Iterator<Item = &BlockId> {
        self.by_age.values()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServedFrom {
    Dram,
    NvCache,
    Ssd,
}

impl ServedFrom {
    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UpdateOutcome {
    pub freed: BlockId,
    pub new: BlockId,
    pub invalidated: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EngineStats {
    pub dram_lookups: u64,
    pub dram_hits: u64,
    /// Reads by provenance: DRAM, block cache, SSD.
    pub served: [u64; 3],
    /// Admission outcomes: admit, small, obp, policy.
    pub decisions: [u64; 4],
    pub rejected_full: u64,
    pub bytes_admitted: u64,
    pub ssd_block_writes: u64,
    pub eviction_passes: u64,
    pub throttled_passes: u64,
}

impl EngineStats {
    pub fn decisions_of(&self, d: Decision) -> u64 {
        self.decisions[decision_index(d)]
    }

    pub fn served_from(&self, s: ServedFrom) -> u64 {
        self.served[s.index()]
    }
}

fn decision_index(d: Decision) -> usize {
    match d {
        Decision::Admit => 0,
        Decision::BypassSmall => 1,
        Decision::BypassObp => 2,
        Decision::BypassPolicy => 3,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    pub block_size: u32,
    pub dataset_slack: f64,
    pub bandwidth_scale: f64,
    pub scan_length: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyOutOfRange {
    pub key: u64,
    pub record_count: u64,
}

pub struct Engine {
    space: LogicalRecordSpace,
    dram: DramCacheModel,
    cache: BlockCache,
    tracker: DatasetTracker,
    admission: AdmissionConfig,
    eviction: EvictionConfig,
    devices: DeviceProfiles,
    clock: DeviceClock,
    next_scan: VirtualInstant,
    scan_length: u32,
    stats: EngineStats,
}

impl Engine {
    pub fn new(
        cfg: EngineConfig,
        cache: CacheConfig,
        admission: AdmissionConfig,
        eviction: EvictionConfig,
        devices: DeviceProfiles,
    ) -> Result<Self, ConfigError> {
        if cfg.block_size == 0 {
            return Err(ConfigError::ZeroBlockSize);
        }
        cache.validate(cfg.block_size)?;
        admission.validate()?;
        eviction.validate()?;
        devices.validate()?;
        let cache = BlockCache::new(CacheConfig {
            removal_write_bytes: devices.nvram.per_removal_write_bytes,
            ..cache
        })?;
        Ok(Engine {
            space: LogicalRecordSpace::new(cfg.block_size),
            dram: DramCacheModel::new(admission.dram_bytes),
            cache,
            tracker: DatasetTracker::new(cfg.dataset_slack)?,
            admission,
            next_scan: VirtualInstant::ZERO + eviction.scan_interval,
            eviction,
            devices,
            clock: DeviceClock::new(cfg.bandwidth_scale)?,
            scan_length: cfg.scan_length.max(1),
            stats: EngineStats::default(),
        })
    }

    pub fn cache(&self) -> &BlockCache {
        &self.cache
    }

    pub fn dram(&self) -> &DramCacheModel {
        &self.dram
    }

    pub fn space(&self) -> &LogicalRecordSpace {
        &self.space
    }

    pub fn tracker(&self) -> &DatasetTracker {
        &self.tracker
    }

    pub fn clock(&self) -> &DeviceClock {
        &self.clock
    }

    pub fn devices(&self) -> &DeviceProfiles {
        &self.devices
    }

    pub fn admission(&self) -> &AdmissionConfig {
        &self.admission
    }

    pub fn stats(&self) -> &EngineStats {
        &self.stats
    }

    pub fn now(&self) -> VirtualInstant {
        self.clock.now()
    }

    /// Advances virtual time to `now`: closes OBP epochs and runs every
    /// eviction scan that falls due on the way.
    pub fn tick(&mut self, now: VirtualInstant, mut on_epoch: impl FnMut(EpochClose)) {
        if self.eviction.mode != EvictionMode::None {
            while self.next_scan <= now {
                let at = self.next_scan;
                self.cache.advance_epochs(at, &mut on_epoch);
                self.clock.advance_to(at);
                self.run_eviction_pass(at);
                self.next_scan += self.eviction.scan_interval;
            }
        }
        self.cache.advance_epochs(now, &mut on_epoch);
        self.clock.advance_to(now);
    }

    fn run_eviction_pass(&mut self, at: VirtualInstant) -> usize {
        let out = eviction_pass(&self.cache, &self.admission, at, &self.eviction);
        self.stats.eviction_passes += 1;
        if out.throttled {
            self.stats.throttled_passes += 1;
        }
        let bytes = self.devices.nvram.per_removal_write_bytes;
        for _ in &out.evicted {
            self.clock
                .submit(&self.devices.nvram, AccessKind::Write, bytes, at);
        }
        out.evicted.len()
    }

    fn submit(&mut self, which: fn(&DeviceProfiles) -> &DeviceProfile, kind: AccessKind, bytes: u64, at: VirtualInstant) -> VirtualInstant {
        let profile = which(&self.devices);
        self.clock.submit(profile, kind, bytes, at)
    }

    /// Runs one operation issued at the clock's current instant.
    pub fn execute(&mut self, op: Op) -> Result<VirtualInstant, KeyOutOfRange> {
        let start = self.clock.now();
        let count = self.space.record_count();
        let check = |key: u64| {
            if key < count {
                Ok(())
            } else {
                Err(KeyOutOfRange {
                    key,
                    record_count: count,
                })
            }
        };
        match op.kind {
            OpKind::Read => {
                check(op.key)?;
                Ok(self.read_record(op.key, start)?.1)
            }
            OpKind::Update => {
                check(op.key)?;
                Ok(self.update_record(op.key, start)?.1)
            }
            OpKind::Insert => Ok(self.insert_record(start).1),
            OpKind::Scan => {
                check(op.key)?;
                let end = (op.key + self.scan_length as u64).min(count);
                let mut t = start;
                for key in op.key..end {
                    t = self.read_record(key, t)?.1;
                }
                Ok(t)
            }
        }
    }

    pub fn read_record(
        &mut self,
        key: u64,
        start: VirtualInstant,
    ) -> Result<(ServedFrom, VirtualInstant), KeyOutOfRange> {
        let block = self.space.block_of(key).ok_or(KeyOutOfRange {
            key,
            record_count: self.space.record_count(),
        })?;
        Ok(self.read_block(block, start))
    }

    fn read_block(&mut self, block: BlockId, start: VirtualInstant) -> (ServedFrom, VirtualInstant) {
        let now = self.clock.now();
        let bytes = block.size() as u64;
        self.stats.dram_lookups += 1;
        let (served, done) = if self.dram.touch(&block) {
            self.stats.dram_hits += 1;
            let done = self.submit(|d| &d.dram, AccessKind::Read, bytes, start);
            (ServedFrom::Dram, done)
        } else if self.cache.lookup(&block, now).is_some() {
            let done = self.submit(|d| &d.nvram, AccessKind::Read, bytes, start);
            (ServedFrom::NvCache, self.load_into_dram(block, done))
        } else {
            let done = self.submit(|d| &d.ssd, AccessKind::Read, bytes, start);
            let done = self.offer(block, Origin::ReadPath, done);
            (ServedFrom::Ssd, self.load_into_dram(block, done))
        };
        self.stats.served[served.index()] += 1;
        (served, done)
    }

    fn load_into_dram(&mut self, block: BlockId, at: VirtualInstant) -> VirtualInstant {
        self.dram.insert(block);
        self.submit(|d| &d.dram, AccessKind::Write, block.size() as u64, at)
    }

    /// Runs admission for `block`; on admit, stores it and queues the write.
    fn offer(&mut self, block: BlockId, origin: Origin, at: VirtualInstant) -> VirtualInstant {
        let decision = should_admit(origin, self.cache.obp(), &self.tracker, &self.admission);
        self.stats.decisions[decision_index(decision)] += 1;
        if decision != Decision::Admit {
            return at;
        }
        match self.cache.insert(block, self.clock.now()) {
            InsertOutcome::Inserted => {
                let bytes = block.size() as u64;
                self.stats.bytes_admitted += bytes;
                self.submit(|d| &d.nvram, AccessKind::Write, bytes, at)
            }
            InsertOutcome::RejectedFull => {
                self.stats.rejected_full += 1;
                at
            }
            InsertOutcome::Duplicate => at,
        }
    }

    fn write_block(&mut self, block: BlockId, at: VirtualInstant) -> VirtualInstant {
        self.stats.ssd_block_writes += 1;
        let done = self.submit(|d| &d.ssd, AccessKind::Write, block.size() as u64, at);
        self.offer(block, Origin::WritePath, done)
    }

    /// Read-modify-write of one record: the page comes in through the read
    /// path, then reconciliation writes it as a new block and frees the old.
    pub fn update_record(
        &mut self,
        key: u64,
        start: VirtualInstant,
    ) -> Result<(UpdateOutcome, VirtualInstant), KeyOutOfRange> {
        let (_, t) = self.read_record(key, start)?;
        let (old, new) = self.space.rewrite(key).ok_or(KeyOutOfRange {
            key,
            record_count: self.space.record_count(),
        })?;
        let bytes = new.size() as u64;
        self.tracker.grow(bytes);
        let mut t = self.write_block(new, t);
        self.dram.remove(&old);
        self.dram.insert(new);
        self.tracker.shrink(old.size() as u64);
        let invalidated = self.cache.remove(&old, RemovalCause::Invalidation) == RemoveOutcome::Removed;
        if invalidated {
            let meta = self.devices.nvram.per_removal_write_bytes;
            t = self.submit(|d| &d.nvram, AccessKind::Write, meta, t);
        }
        Ok((
            UpdateOutcome {
                freed: old,
                new,
                invalidated,
            },
            t,
        ))
    }

    /// Appends a record through the write path.
    pub fn insert_record(&mut self, start: VirtualInstant) -> (u64, VirtualInstant) {
        let (key, block) = self.space.append();
        self.tracker.grow(block.size() as u64);
        let t = self.write_block(block, start);
        self.dram.insert(block);
        (key, t)
    }

    /// Writes `n_records` one after another, starting at `start`, and
    /// returns when the last write completes.
    pub fn populate(
        &mut self,
        n_records: u64,
        start: VirtualInstant,
        mut on_epoch: impl FnMut(EpochClose),
    ) -> VirtualInstant {
        let mut t = start;
        for _ in 0..n_records {
            self.tick(t, &mut on_epoch);
            t = self.insert_record(t).1;
        }
        t
    }

    /// Creates `n_records` without any I/O, as if they were already on disk.
    pub fn preload(&mut self, n_records: u64) {
        for _ in 0..n_records {
            let (_, block) = self.space.append();
            self.tracker.grow(block.size() as u64);
        }
    }

    /// Lets every queued access finish.
    pub fn drain(&mut self) -> VirtualInstant {
        self.clock.drain()
    }
}
