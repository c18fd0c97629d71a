//! Closed-loop discrete-event driver.
//!
//! Each simulated thread issues its next operation the instant the previous
//! one completes. Operations are dispatched in virtual-time order; ties go
//! to the lower thread index. The run is:
//!
//! 1. populate (one writer, if the spec asks for it);
//! 2. the measured run, starting on the next epoch boundary and lasting
//!    `duration_secs`. Throughput and hit ratios skip the first
//!    `warmup_fraction` of it; block counters and device traffic cover all
//!    of it.

use alloc::collections::BinaryHeap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;
use core::time::Duration;

use crate::admission::{AdmissionConfig, AdmissionPolicy};
use crate::cache::{CacheConfig, CacheCounters};
use crate::device::{DeviceKind, DeviceProfiles, DeviceTraffic};
use crate::engine::{Engine, EngineConfig, EngineStats, KeyOutOfRange};
use crate::error::ConfigError;
use crate::eviction::{EvictionConfig, EvictionMode};
use crate::obp::{EpochClose, Obp, EPOCH};
use crate::report::RunSummary;
use crate::time::VirtualInstant;
use crate::workload::{Op, OpGenerator, OpKind, OpSource, WorkloadSpec, DEFAULT_SCALE};

pub const DEFAULT_WARMUP_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub workload: WorkloadSpec,
    pub cache: CacheConfig,
    pub admission: AdmissionConfig,
    pub eviction: EvictionConfig,
    pub devices: DeviceProfiles,
    pub seed: u64,
    /// Factor applied to every device bandwidth; set it to the dataset scale.
    pub bandwidth_scale: f64,
    pub warmup_fraction: f64,
    /// Database file size over live block bytes.
    pub dataset_slack: f64,
}

impl SimConfig {
    pub fn new(
        workload: WorkloadSpec,
        policy: AdmissionPolicy,
        dram_bytes: u64,
        nvram_bytes: u64,
    ) -> Self {
        SimConfig {
            workload,
            cache: CacheConfig::with_capacity(nvram_bytes),
            admission: AdmissionConfig::new(policy, dram_bytes),
            eviction: EvictionConfig::default(),
            devices: DeviceProfiles::default(),
            seed: 0,
            bandwidth_scale: DEFAULT_SCALE,
            warmup_fraction: DEFAULT_WARMUP_FRACTION,
            dataset_slack: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.workload.validate()?;
        self.cache.validate(self.workload.block_size)?;
        self.admission.validate()?;
        self.eviction.validate()?;
        self.devices.validate()?;
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(ConfigError::InvalidWarmup(self.warmup_fraction));
        }
        if !(self.bandwidth_scale > 0.0 && self.bandwidth_scale.is_finite()) {
            return Err(ConfigError::InvalidScale(self.bandwidth_scale));
        }
        if !(self.dataset_slack >= 1.0 && self.dataset_slack.is_finite()) {
            return Err(ConfigError::InvalidSlack(self.dataset_slack));
        }
        Ok(())
    }

    fn engine(&self) -> Result<Engine, ConfigError> {
        Engine::new(
            EngineConfig {
                block_size: self.workload.block_size,
                dataset_slack: self.dataset_slack,
                bandwidth_scale: self.bandwidth_scale,
                scan_length: self.workload.scan_length,
            },
            self.cache,
            self.admission,
            self.eviction,
            self.devices.clone(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("operation {index} names key {key}, but only {record_count} records exist")]
    KeyOutOfRange {
        index: u64,
        key: u64,
        record_count: u64,
    },
}

/// One operation handed to a thread, in dispatch order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dispatch {
    pub at: VirtualInstant,
    pub thread: u32,
    pub op: Op,
}

/// One closed epoch of the measured run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRow {
    /// Index from the start of the measured run.
    pub epoch: u64,
    /// Seconds since the start of the measured run.
    pub start_secs: f64,
    pub obp: Obp,
    pub inserted: u64,
    pub removed: u64,
    pub looked_up: u64,
    pub ops_completed: u64,
    pub warmup: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PopulateStats {
    pub records: u64,
    pub blocks_written: u64,
    pub blocks_admitted: u64,
    pub virtual_secs: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ThreadStats {
    pub ops: u64,
    /// Sum of the thread's operation latencies.
    pub busy: Duration,
    /// Completion time of the thread's last operation, relative to run start.
    pub last_completion: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub workload: String,
    pub policy: AdmissionPolicy,
    pub eviction: EvictionMode,
    pub obp_target: f64,
    pub dram_bytes: u64,
    pub nvram_bytes: u64,
    pub seed: u64,
    pub record_count: u64,
    pub thread_count: u32,
    /// Virtual seconds over which throughput is measured.
    pub measured_secs: f64,
    /// Post-warmup completions by [`OpKind::index`].
    pub ops_completed: [u64; 4],
    pub ops_per_sec: [f64; 4],
    pub nvcache_hit_ratio: f64,
    pub dram_hit_ratio: f64,
    pub epochs: Vec<EpochRow>,
    /// Cache counters over the measured run.
    pub blocks: CacheCounters,
    /// Device traffic over the measured run, by [`DeviceKind::index`].
    pub traffic: [DeviceTraffic; 3],
    pub bytes_admitted: u64,
    pub populate: PopulateStats,
    pub engine: EngineStats,
    pub threads: Vec<ThreadStats>,
    /// In-flight writers per device after the final drain.
    pub writers_at_end: [u32; 3],
    pub used_bytes_at_end: u64,
    pub resident_blocks_at_end: u64,
    /// Filled in by callers that have a wall clock.
    pub wall_runtime: Duration,
}

impl SimResult {
    pub fn total_ops_per_sec(&self) -> f64 {
        self.ops_per_sec.iter().sum()
    }

    pub fn ops_per_sec_of(&self, kind: OpKind) -> f64 {
        self.ops_per_sec[kind.index()]
    }

    pub fn removed_to_inserted_ratio(&self) -> f64 {
        self.blocks.blocks_removed as f64 / self.blocks.blocks_inserted.max(1) as f64
    }

    pub fn traffic_of(&self, kind: DeviceKind) -> DeviceTraffic {
        self.traffic[kind.index()]
    }

    /// Post-warmup epochs.
    pub fn measured_epochs(&self) -> impl Iterator<Item = &EpochRow> {
        self.epochs.iter().filter(|e| !e.warmup)
    }

    /// Mean of the post-warmup ratios, ignoring saturated epochs.
    pub fn obp_mean(&self) -> f64 {
        let (sum, n) = self
            .measured_epochs()
            .filter_map(|e| e.obp.ratio())
            .fold((0.0, 0u64), |(s, n), r| (s + r, n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    /// Fraction of post-warmup epochs whose ratio exceeds `threshold`.
    pub fn obp_exceed_fraction(&self, threshold: f64) -> f64 {
        let (over, n) = self
            .measured_epochs()
            .fold((0u64, 0u64), |(o, n), e| (o + e.obp.exceeds(threshold) as u64, n + 1));
        if n == 0 {
            0.0
        } else {
            over as f64 / n as f64
        }
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            workload: self.workload.clone(),
            record_count: self.record_count,
            thread_count: self.thread_count,
            policy: String::from(self.policy.label()),
            dram_bytes: self.dram_bytes,
            nvram_bytes: self.nvram_bytes,
            ops_per_sec: self.ops_per_sec,
        }
    }
}

fn counters_since(now: CacheCounters, then: CacheCounters) -> CacheCounters {
    CacheCounters {
        blocks_inserted: now.blocks_inserted - then.blocks_inserted,
        blocks_removed: now.blocks_removed - then.blocks_removed,
        removed_by_invalidation: now.removed_by_invalidation - then.removed_by_invalidation,
        removed_by_eviction: now.removed_by_eviction - then.removed_by_eviction,
        blocks_looked_up: now.blocks_looked_up - then.blocks_looked_up,
        lookup_hits: now.lookup_hits - then.lookup_hits,
        bytes_written: now.bytes_written - then.bytes_written,
        bytes_read: now.bytes_read - then.bytes_read,
    }
}

fn traffic_since(now: DeviceTraffic, then: DeviceTraffic) -> DeviceTraffic {
    DeviceTraffic {
        bytes_read: now.bytes_read - then.bytes_read,
        bytes_written: now.bytes_written - then.bytes_written,
        read_busy: now.read_busy - then.read_busy,
        write_busy: now.write_busy - then.write_busy,
    }
}

fn all_traffic(engine: &Engine) -> [DeviceTraffic; 3] {
    DeviceKind::ALL.map(|k| engine.clock().traffic(k))
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Runs the workload generated from `cfg.workload` and `cfg.seed`.
pub fn run(cfg: &SimConfig) -> Result<SimResult, SimError> {
    cfg.validate()?;
    let mut source = OpGenerator::new(&cfg.workload, cfg.seed)?;
    run_with_source(cfg, &mut source, |_| {})
}

/// Runs `source` through the simulator, reporting each dispatch to
/// `observe`. The run ends at the configured duration or when the source is
/// exhausted, whichever comes first.
pub fn run_with_source<S: OpSource + ?Sized>(
    cfg: &SimConfig,
    source: &mut S,
    mut observe: impl FnMut(&Dispatch),
) -> Result<SimResult, SimError> {
    cfg.validate()?;
    let mut engine = cfg.engine()?;
    let spec = &cfg.workload;

    let populate_start = engine.now();
    let populate_end = if spec.populate {
        engine.populate(spec.record_count, populate_start, |_| {})
    } else {
        engine.preload(spec.record_count);
        populate_start
    };
    let populate = PopulateStats {
        records: if spec.populate { spec.record_count } else { 0 },
        blocks_written: engine.stats().ssd_block_writes,
        blocks_admitted: engine.cache().counters().blocks_inserted,
        virtual_secs: populate_end.as_secs_f64() - populate_start.as_secs_f64(),
    };

    let run_start = populate_end.ceil_to(EPOCH);
    engine.tick(run_start, |_| {});
    let duration = Duration::from_secs_f64(spec.duration_secs);
    let end = run_start + duration;
    let warmup_end = run_start + duration.mul_f64(cfg.warmup_fraction);
    let first_epoch = run_start.as_nanos() / EPOCH.as_nanos() as u64;
    let epoch_count = duration.as_nanos().div_ceil(EPOCH.as_nanos()) as usize;

    let start_counters = engine.cache().counters();
    let start_traffic = all_traffic(&engine);
    let start_engine = *engine.stats();
    let mut warm_counters = start_counters;
    let mut warm_engine = *engine.stats();
    let mut warm_snapped = false;

    let mut epochs: Vec<EpochRow> = Vec::with_capacity(epoch_count);
    let mut epoch_ops = vec![0u64; epoch_count.max(1)];
    let mut ops_completed = [0u64; 4];
    let threads_n = spec.thread_count as usize;
    let mut threads = vec![ThreadStats::default(); threads_n];

    let record_epoch = |close: EpochClose, epochs: &mut Vec<EpochRow>| {
        if close.epoch < first_epoch {
            return;
        }
        let epoch = close.epoch - first_epoch;
        let start = run_start + EPOCH * epoch as u32;
        epochs.push(EpochRow {
            epoch,
            start_secs: (EPOCH * epoch as u32).as_secs_f64(),
            obp: close.obp,
            inserted: close.counts.inserted,
            removed: close.counts.removed,
            looked_up: close.counts.looked_up,
            ops_completed: 0,
            warmup: start < warmup_end,
        });
    };

    let mut ready: BinaryHeap<Reverse<(VirtualInstant, u32)>> =
        (0..spec.thread_count).map(|t| Reverse((run_start, t))).collect();
    let mut dispatched = 0u64;
    while let Some(Reverse((at, thread))) = ready.pop() {
        if at >= end {
            break;
        }
        if !warm_snapped && at >= warmup_end {
            engine.tick(warmup_end, |c| record_epoch(c, &mut epochs));
            warm_counters = engine.cache().counters();
            warm_engine = *engine.stats();
            warm_snapped = true;
        }
        engine.tick(at, |c| record_epoch(c, &mut epochs));
        let Some(op) = source.next_op() else {
            break;
        };
        observe(&Dispatch { at, thread, op });
        let done = engine.execute(op).map_err(|KeyOutOfRange { key, record_count }| {
            SimError::KeyOutOfRange {
                index: dispatched,
                key,
                record_count,
            }
        })?;
        dispatched += 1;
        let t = &mut threads[thread as usize];
        t.ops += 1;
        t.busy += done.saturating_duration_since(at);
        t.last_completion = done.saturating_duration_since(run_start);
        if done < end {
            if done >= warmup_end {
                ops_completed[op.kind.index()] += 1;
            }
            let e = (done.saturating_duration_since(run_start).as_nanos()
                / EPOCH.as_nanos()) as usize;
            epoch_ops[e] += 1;
        }
        ready.push(Reverse((done, thread)));
    }
    if !warm_snapped {
        engine.tick(warmup_end, |c| record_epoch(c, &mut epochs));
        warm_counters = engine.cache().counters();
        warm_engine = *engine.stats();
    }
    engine.tick(end, |c| record_epoch(c, &mut epochs));
    let end_counters = engine.cache().counters();
    let end_traffic = all_traffic(&engine);
    let end_engine = *engine.stats();
    engine.drain();

    for row in &mut epochs {
        row.ops_completed = epoch_ops.get(row.epoch as usize).copied().unwrap_or(0);
    }

    let measured = end.saturating_duration_since(warmup_end).as_secs_f64();
    let ops_per_sec = ops_completed.map(|n| if measured > 0.0 { n as f64 / measured } else { 0.0 });
    let measured_counters = counters_since(end_counters, warm_counters);
    let dram_lookups = end_engine.dram_lookups - warm_engine.dram_lookups;
    let dram_hits = end_engine.dram_hits - warm_engine.dram_hits;
    let stats = engine.cache().stats_snapshot();

    Ok(SimResult {
        workload: spec.name.clone(),
        policy: cfg.admission.policy,
        eviction: cfg.eviction.mode,
        obp_target: cfg.admission.obp_target,
        dram_bytes: cfg.admission.dram_bytes,
        nvram_bytes: cfg.cache.capacity_bytes,
        seed: cfg.seed,
        record_count: spec.record_count,
        thread_count: spec.thread_count,
        measured_secs: measured,
        ops_completed,
        ops_per_sec,
        nvcache_hit_ratio: ratio(measured_counters.lookup_hits, measured_counters.blocks_looked_up),
        dram_hit_ratio: ratio(dram_hits, dram_lookups),
        epochs,
        blocks: counters_since(end_counters, start_counters),
        traffic: [0, 1, 2].map(|i| traffic_since(end_traffic[i], start_traffic[i])),
        bytes_admitted: end_engine.bytes_admitted - start_engine.bytes_admitted,
        populate,
        engine: end_engine,
        threads,
        writers_at_end: DeviceKind::ALL.map(|k| engine.clock().in_flight_writers(k)),
        used_bytes_at_end: stats.used_bytes,
        resident_blocks_at_end: stats.resident_blocks,
        wall_runtime: Duration::ZERO,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::{preset, KeyDistribution, OpMix, ReplaySource};

    const BS: u64 = 16384;

    fn small(mix: OpMix, records: u64, secs: f64) -> WorkloadSpec {
        WorkloadSpec {
            name: String::from("t"),
            op_mix: mix,
            thread_count: 4,
            record_count: records,
            block_size: BS as u32,
            key_distribution: KeyDistribution::Zipfian { theta: 0.99 },
            duration_secs: secs,
            populate: false,
            scan_length: 10,
        }
    }

    fn cfg(spec: WorkloadSpec, policy: AdmissionPolicy, dram: u64, nvram: u64) -> SimConfig {
        SimConfig::new(spec, policy, dram * BS, nvram * BS)
    }

    #[test]
    fn disabled_cache_never_inserts() {
        let c = cfg(small(OpMix::reads(), 2000, 20.0), AdmissionPolicy::Disabled, 100, 4000);
        let r = run(&c).unwrap();
        assert_eq!(r.blocks.blocks_inserted, 0);
        assert_eq!(r.engine.served[1], 0);
        assert!(r.total_ops_per_sec() > 0.0);
    }

    #[test]
    fn results_are_deterministic() {
        let mut spec = small(OpMix::reads(), 2000, 20.0);
        spec.op_mix = OpMix {
            read: 0.5,
            update: 0.5,
            insert: 0.0,
            scan: 0.0,
        };
        let c = cfg(spec, AdmissionPolicy::Obp, 100, 4000);
        assert_eq!(run(&c).unwrap(), run(&c).unwrap());
    }

    #[test]
    fn replay_matches_generated_run() {
        let c = cfg(small(OpMix::reads(), 2000, 10.0), AdmissionPolicy::Obp, 100, 4000);
        let mut ops = Vec::new();
        let mut gen = OpGenerator::new(&c.workload, c.seed).unwrap();
        let a = run_with_source(&c, &mut gen, |d| ops.push(d.op)).unwrap();
        let b = run_with_source(&c, &mut ReplaySource::new(ops), |_| {}).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn writers_drain_and_threads_stay_busy() {
        let mut spec = small(OpMix::updates(), 2000, 10.0);
        spec.populate = true;
        let c = cfg(spec, AdmissionPolicy::AlwaysReadWrite, 100, 4000);
        let r = run(&c).unwrap();
        assert_eq!(r.writers_at_end, [0, 0, 0]);
        // Closed loop: no thread ever idles between operations.
        for t in &r.threads {
            assert_eq!(t.busy, t.last_completion);
        }
    }

    #[test]
    fn epoch_rows_cover_the_run() {
        let c = cfg(small(OpMix::reads(), 2000, 10.0), AdmissionPolicy::Obp, 100, 4000);
        let r = run(&c).unwrap();
        assert_eq!(r.epochs.len(), 10);
        assert_eq!(r.epochs.iter().filter(|e| e.warmup).count(), 1);
        let looked: u64 = r.epochs.iter().map(|e| e.looked_up).sum();
        assert_eq!(looked, r.blocks.blocks_looked_up);
    }

    #[test]
    fn invalid_warmup_is_rejected() {
        let mut c = cfg(small(OpMix::reads(), 10, 1.0), AdmissionPolicy::Obp, 1, 10);
        c.warmup_fraction = 1.0;
        assert_eq!(run(&c).unwrap_err(), SimError::Config(ConfigError::InvalidWarmup(1.0)));
    }

    #[test]
    fn replayed_key_out_of_range_fails() {
        let c = cfg(small(OpMix::reads(), 10, 1.0), AdmissionPolicy::Obp, 1, 10);
        let ops = [Op {
            kind: OpKind::Read,
            key: 10,
        }];
        let err = run_with_source(&c, &mut ReplaySource::new(ops), |_| {}).unwrap_err();
        assert_eq!(
            err,
            SimError::KeyOutOfRange {
                index: 0,
                key: 10,
                record_count: 10
            }
        );
    }

    #[test]
    fn presets_validate_at_default_scale() {
        let spec = preset("ycsb-a", DEFAULT_SCALE).unwrap();
        let c = SimConfig::new(spec, AdmissionPolicy::Obp, 32_000_000, 150_000_000);
        assert!(c.validate().is_ok());
    }
}
