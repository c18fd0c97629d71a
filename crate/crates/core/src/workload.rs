//! Deterministic workload generation.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpKind {
    Read,
    Update,
    Insert,
    Scan,
}

impl OpKind {
    pub const ALL: [OpKind; 4] = [OpKind::Read, OpKind::Update, OpKind::Insert, OpKind::Scan];

    pub fn label(self) -> &'static str {
        match self {
            OpKind::Read => "read",
            OpKind::Update => "update",
            OpKind::Insert => "insert",
            OpKind::Scan => "scan",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for OpKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OpKind::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| ConfigError::Other(alloc::format!("unknown operation `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Op {
    pub kind: OpKind,
    /// Record key; the first key for scans, the new key for inserts.
    pub key: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct OpMix {
    pub read: f64,
    pub update: f64,
    pub insert: f64,
    pub scan: f64,
}

impl OpMix {
    pub fn reads() -> Self {
        OpMix {
            read: 1.0,
            ..Default::default()
        }
    }

    pub fn updates() -> Self {
        OpMix {
            update: 1.0,
            ..Default::default()
        }
    }

    pub fn fraction(&self, kind: OpKind) -> f64 {
        match kind {
            OpKind::Read => self.read,
            OpKind::Update => self.update,
            OpKind::Insert => self.insert,
            OpKind::Scan => self.scan,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let parts = [self.read, self.update, self.insert, self.scan];
        let sum: f64 = parts.iter().sum();
        if parts.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(ConfigError::InvalidMix(sum));
        }
        Ok(())
    }

    fn pick(&self, u: f64) -> OpKind {
        let mut acc = 0.0;
        for kind in OpKind::ALL {
            acc += self.fraction(kind);
            if u < acc {
                return kind;
            }
        }
        // Rounding can leave the sum a hair under 1.
        OpKind::ALL
            .into_iter()
            .rev()
            .find(|k| self.fraction(*k) > 0.0)
            .unwrap_or(OpKind::Read)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum KeyDistribution {
    Uniform,
    /// Rank-`k` key drawn with probability proportional to `k^-theta`;
    /// low keys are hot.
    Zipfian { theta: f64 },
    /// Zipfian over recency: the newest records are hot.
    Latest { theta: f64 },
}

pub const DEFAULT_ZIPF_THETA: f64 = 0.99;
pub const DEFAULT_BLOCK_SIZE: u32 = 16 * 1024;
pub const DEFAULT_SCAN_LENGTH: u32 = 100;

/// Dataset sizes in presets are full-size bytes times this.
pub const DEFAULT_SCALE: f64 = 0.001;

#[cfg(feature = "serde")]
fn default_block_size() -> u32 {
    DEFAULT_BLOCK_SIZE
}

#[cfg(feature = "serde")]
fn default_scan_length() -> u32 {
    DEFAULT_SCAN_LENGTH
}

#[cfg(feature = "serde")]
fn default_populate() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct WorkloadSpec {
    pub name: String,
    pub op_mix: OpMix,
    pub thread_count: u32,
    pub record_count: u64,
    #[cfg_attr(feature = "serde", serde(default = "default_block_size"))]
    pub block_size: u32,
    pub key_distribution: KeyDistribution,
    /// Measured run length in virtual seconds.
    pub duration_secs: f64,
    #[cfg_attr(feature = "serde", serde(default = "default_populate"))]
    pub populate: bool,
    #[cfg_attr(feature = "serde", serde(default = "default_scan_length"))]
    pub scan_length: u32,
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.op_mix.validate()?;
        if self.thread_count == 0 {
            return Err(ConfigError::ZeroThreads);
        }
        if !(self.duration_secs > 0.0 && self.duration_secs.is_finite()) {
            return Err(ConfigError::InvalidDuration(self.duration_secs));
        }
        if self.block_size == 0 {
            return Err(ConfigError::ZeroBlockSize);
        }
        if self.scan_length == 0 {
            return Err(ConfigError::ZeroScanLength);
        }
        match self.key_distribution {
            KeyDistribution::Zipfian { theta } | KeyDistribution::Latest { theta }
                if !(theta > 0.0 && theta.is_finite()) =>
            {
                Err(ConfigError::InvalidTheta(theta))
            }
            _ => Ok(()),
        }
    }

    pub fn dataset_bytes(&self) -> u64 {
        self.record_count * self.block_size as u64
    }
}

struct Preset {
    name: &'static str,
    mix: OpMix,
    threads: u32,
    full_bytes: f64,
    dist: KeyDistribution,
    duration_secs: f64,
}

const GB: f64 = 1e9;

fn mix(read: f64, update: f64, insert: f64, scan: f64) -> OpMix {
    OpMix {
        read,
        update,
        insert,
        scan,
    }
}

fn preset_table() -> [Preset; 7] {
    let zipf = KeyDistribution::Zipfian {
        theta: DEFAULT_ZIPF_THETA,
    };
    [
        Preset {
            name: "ycsb-a",
            mix: mix(0.5, 0.5, 0.0, 0.0),
            threads: 20,
            full_bytes: 130.0 * GB,
            dist: zipf,
            duration_secs: 600.0,
        },
        // Printed with the same mix as ycsb-a, not the usual 95/5.
        Preset {
            name: "ycsb-b",
            mix: mix(0.5, 0.5, 0.0, 0.0),
            threads: 20,
            full_bytes: 194.0 * GB,
            dist: zipf,
            duration_secs: 600.0,
        },
        Preset {
            name: "ycsb-c",
            mix: OpMix::reads(),
            threads: 20,
            full_bytes: 259.0 * GB,
            dist: zipf,
            duration_secs: 600.0,
        },
        Preset {
            name: "ycsb-d",
            mix: mix(0.95, 0.0, 0.05, 0.0),
            threads: 100,
            full_bytes: 219.0 * GB,
            dist: KeyDistribution::Latest {
                theta: DEFAULT_ZIPF_THETA,
            },
            duration_secs: 600.0,
        },
        Preset {
            name: "ycsb-e",
            mix: mix(0.0, 0.0, 0.05, 0.95),
            threads: 20,
            full_bytes: 210.0 * GB,
            dist: zipf,
            duration_secs: 600.0,
        },
        Preset {
            name: "read-only-large",
            mix: OpMix::reads(),
            threads: 16,
            full_bytes: 120.0 * GB,
            dist: zipf,
            duration_secs: 600.0,
        },
        Preset {
            name: "update-only",
            mix: OpMix::updates(),
            threads: 6,
            full_bytes: 134.0 * GB,
            dist: KeyDistribution::Uniform,
            duration_secs: 600.0,
        },
    ]
}

/// Built-in workloads with dataset sizes multiplied by `scale`.
pub fn presets(scale: f64) -> Vec<WorkloadSpec> {
    preset_table()
        .into_iter()
        .map(|p| WorkloadSpec {
            name: p.name.to_string(),
            op_mix: p.mix,
            thread_count: p.threads,
            record_count: (p.full_bytes * scale / DEFAULT_BLOCK_SIZE as f64) as u64,
            block_size: DEFAULT_BLOCK_SIZE,
            key_distribution: p.dist,
            duration_secs: p.duration_secs,
            populate: true,
            scan_length: DEFAULT_SCAN_LENGTH,
        })
        .collect()
}

pub fn preset(name: &str, scale: f64) -> Option<WorkloadSpec> {
    presets(scale).into_iter().find(|p| p.name == name)
}

/// Full-size dataset bytes of a preset.
pub fn preset_full_bytes(name: &str) -> Option<f64> {
    preset_table()
        .into_iter()
        .find(|p| p.name == name)
        .map(|p| p.full_bytes)
}

/// A stream of operations for the simulator.
pub trait OpSource {
    fn next_op(&mut self) -> Option<Op>;
}

/// Seeded generator; `(spec, seed)` fixes the whole sequence.
pub struct OpGenerator {
    rng: ChaCha8Rng,
    mix: OpMix,
    dist: KeyDist,
    record_count: u64,
    scan_length: u32,
}

enum KeyDist {
    Uniform,
    Zipfian(Zipf<f64>),
    Latest(Zipf<f64>),
}

impl OpGenerator {
    pub fn new(spec: &WorkloadSpec, seed: u64) -> Result<Self, ConfigError> {
        spec.validate()?;
        let n = spec.record_count.max(1) as f64;
        let dist = match spec.key_distribution {
            KeyDistribution::Uniform => KeyDist::Uniform,
            KeyDistribution::Zipfian { theta } => KeyDist::Zipfian(
                Zipf::new(n, theta).map_err(|_| ConfigError::InvalidTheta(theta))?,
            ),
            KeyDistribution::Latest { theta } => KeyDist::Latest(
                Zipf::new(n, theta).map_err(|_| ConfigError::InvalidTheta(theta))?,
            ),
        };
        Ok(OpGenerator {
            rng: ChaCha8Rng::seed_from_u64(seed),
            mix: spec.op_mix,
            dist,
            record_count: spec.record_count,
            scan_length: spec.scan_length,
        })
    }

    /// Records known to exist, including ones this generator inserted.
    pub fn record_count(&self) -> u64 {
        self.record_count
    }

    pub fn next_op(&mut self) -> Op {
        let kind = self.mix.pick(self.rng.random::<f64>());
        if kind == OpKind::Insert || self.record_count == 0 {
            let key = self.record_count;
            self.record_count += 1;
            return Op {
                kind: OpKind::Insert,
                key,
            };
        }
        Op {
            kind,
            key: self.next_key(),
        }
    }

    fn next_key(&mut self) -> u64 {
        let n = self.record_count;
        match &self.dist {
            KeyDist::Uniform => self.rng.random_range(0..n),
            KeyDist::Zipfian(z) => (z.sample(&mut self.rng) as u64 - 1).min(n - 1),
            KeyDist::Latest(z) => {
                let rank = (z.sample(&mut self.rng) as u64 - 1).min(n - 1);
                n - 1 - rank
            }
        }
    }

    pub fn scan_length(&self) -> u32 {
        self.scan_length
    }
}

impl OpSource for OpGenerator {
    fn next_op(&mut self) -> Option<Op> {
        Some(OpGenerator::next_op(self))
    }
}

/// Replays a fixed list of operations.
pub struct ReplaySource<I> {
    ops: I,
}

impl<I: Iterator<Item = Op>> ReplaySource<I> {
    pub fn new(ops: impl IntoIterator<IntoIter = I>) -> Self {
        ReplaySource {
            ops: ops.into_iter(),
        }
    }
}

impl<I: Iterator<Item = Op>> OpSource for ReplaySource<I> {
    fn next_op(&mut self) -> Option<Op> {
        self.ops.next()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(mix: OpMix, dist: KeyDistribution, records: u64) -> WorkloadSpec {
        WorkloadSpec {
            name: "t".to_string(),
            op_mix: mix,
            thread_count: 1,
            record_count: records,
            block_size: DEFAULT_BLOCK_SIZE,
            key_distribution: dist,
            duration_secs: 1.0,
            populate: false,
            scan_length: 10,
        }
    }

    #[test]
    fn all_read_mix_only_reads() {
        let mut g = OpGenerator::new(&spec(OpMix::reads(), KeyDistribution::Uniform, 100), 1).unwrap();
        for _ in 0..10_000 {
            let op = g.next_op();
            assert_eq!(op.kind, OpKind::Read);
            assert!(op.key < 100);
        }
    }

    #[test]
    fn inserts_extend_the_key_space() {
        let m = mix(0.0, 0.0, 1.0, 0.0);
        let mut g = OpGenerator::new(&spec(m, KeyDistribution::Uniform, 5), 1).unwrap();
        let keys: Vec<u64> = (0..3).map(|_| g.next_op().key).collect();
        assert_eq!(keys, [5, 6, 7]);
        assert_eq!(g.record_count(), 8);
    }

    #[test]
    fn latest_favors_newest_keys() {
        let d = KeyDistribution::Latest { theta: 0.99 };
        let mut g = OpGenerator::new(&spec(OpMix::reads(), d, 1000), 3).unwrap();
        let newest = (0..10_000).filter(|_| g.next_op().key == 999).count();
        assert!(newest > 1000, "{newest}");
    }

    #[test]
    fn same_seed_same_sequence() {
        let s = spec(mix(0.5, 0.3, 0.1, 0.1), KeyDistribution::Zipfian { theta: 0.9 }, 500);
        let a: Vec<Op> = {
            let mut g = OpGenerator::new(&s, 42).unwrap();
            (0..1000).map(|_| g.next_op()).collect()
        };
        let b: Vec<Op> = {
            let mut g = OpGenerator::new(&s, 42).unwrap();
            (0..1000).map(|_| g.next_op()).collect()
        };
        assert_eq!(a, b);
        let mut g = OpGenerator::new(&s, 43).unwrap();
        let c: Vec<Op> = (0..1000).map(|_| g.next_op()).collect();
        assert_ne!(a, c);
    }

    #[test]
    fn mix_validation() {
        assert!(mix(0.5, 0.5, 0.0, 0.0).validate().is_ok());
        assert!(mix(0.5, 0.4, 0.0, 0.0).validate().is_err());
        assert!(mix(1.5, -0.5, 0.0, 0.0).validate().is_err());
    }

    #[test]
    fn preset_contents() {
        let all = presets(DEFAULT_SCALE);
        let names: Vec<&str> = all.iter().map(|p| p.name.as_str()).collect();
        for want in [
            "ycsb-a",
            "ycsb-b",
            "ycsb-c",
            "ycsb-d",
            "ycsb-e",
            "read-only-large",
            "update-only",
        ] {
            assert!(names.contains(&want), "{want}");
        }
        let c = preset("ycsb-c", DEFAULT_SCALE).unwrap();
        assert_eq!(c.op_mix, OpMix::reads());
        assert_eq!(c.thread_count, 20);
        let u = preset("update-only", DEFAULT_SCALE).unwrap();
        assert_eq!(u.op_mix, OpMix::updates());
        assert_eq!(u.thread_count, 6);
        let d = preset("ycsb-d", DEFAULT_SCALE).unwrap();
        assert_eq!((d.op_mix.read, d.op_mix.insert, d.thread_count), (0.95, 0.05, 100));
        let e = preset("ycsb-e", DEFAULT_SCALE).unwrap();
        assert_eq!((e.op_mix.scan, e.op_mix.insert), (0.95, 0.05));
        for p in &all {
            p.validate().unwrap();
        }
    }

    #[test]
    fn preset_scaling() {
        assert_eq!(preset_full_bytes("read-only-large"), Some(120e9));
        let r = preset("read-only-large", DEFAULT_SCALE).unwrap();
        assert_eq!(r.record_count, 120_000_000 / DEFAULT_BLOCK_SIZE as u64);
        let dataset = r.dataset_bytes();
        assert!(dataset <= 120_000_000 && 120_000_000 - dataset < DEFAULT_BLOCK_SIZE as u64);
    }
}
