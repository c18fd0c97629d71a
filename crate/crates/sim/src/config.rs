//! Run configuration: TOML files, command-line overrides, and the mapping
//! onto [`SimConfig`].
//!
//! Byte quantities are [`ByteSize`] values, so `"16k"`, `"32M"`, `"1.5G"` and
//! `"64KiB"` all work, as do plain integers. Decimal suffixes are powers of
//! 1000.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use bytesize::ByteSize;
use nvcache::workload::{self, DEFAULT_BLOCK_SIZE, DEFAULT_SCALE, DEFAULT_SCAN_LENGTH};
use nvcache::{
    AdmissionPolicy, DeviceProfiles, EvictionMode, KeyDistribution, OpMix, SimConfig,
    WorkloadSpec,
};
use serde::Deserialize;

/// DRAM and cache sizes used when none are given, before scaling.
pub const FULL_DRAM_BYTES: u64 = 32_000_000_000;
pub const FULL_NVRAM_BYTES: u64 = 150_000_000_000;

#[derive(Debug, thiserror::Error)]
pub enum ConfigFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Toml {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("workload `{0}` is neither a file nor a preset (see `nvsim presets`)")]
    UnknownWorkload(String),
    #[error("workload file must set exactly one of `record_count` and `dataset_size`")]
    RecordCount,
    #[error("block size {0} does not fit in 32 bits")]
    BlockSize(u64),
    #[error(transparent)]
    Invalid(#[from] nvcache::ConfigError),
}

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ConfigFileError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigFileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    toml::from_str(&text).map_err(|source| ConfigFileError::Toml {
        path: path.to_path_buf(),
        source,
    })
}

fn default_block_size() -> ByteSize {
    ByteSize::b(DEFAULT_BLOCK_SIZE as u64)
}

fn default_populate() -> bool {
    true
}

fn default_scan_length() -> u32 {
    DEFAULT_SCAN_LENGTH
}

/// A workload description on disk.
///
/// ```toml
/// name = "mixed"
/// thread_count = 8
/// dataset_size = "64M"
/// duration_secs = 300
/// op_mix = { read = 0.9, update = 0.1 }
/// key_distribution = { kind = "zipfian", theta = 0.99 }
/// ```
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadFile {
    pub name: String,
    pub op_mix: OpMix,
    pub thread_count: u32,
    #[serde(default)]
    pub record_count: Option<u64>,
    /// Alternative to `record_count`: total bytes of records.
    #[serde(default)]
    pub dataset_size: Option<ByteSize>,
    #[serde(default = "default_block_size")]
    pub block_size: ByteSize,
    pub key_distribution: KeyDistribution,
    pub duration_secs: f64,
    #[serde(default = "default_populate")]
    pub populate: bool,
    #[serde(default = "default_scan_length")]
    pub scan_length: u32,
}

impl WorkloadFile {
    pub fn load(path: &Path) -> Result<Self, ConfigFileError> {
        read_toml(path)
    }

    pub fn into_spec(self) -> Result<WorkloadSpec, ConfigFileError> {
        let block_size = u32::try_from(self.block_size.as_u64())
            .map_err(|_| ConfigFileError::BlockSize(self.block_size.as_u64()))?;
        let record_count = match (self.record_count, self.dataset_size) {
            (Some(n), None) => n,
            (None, Some(bytes)) => bytes.as_u64() / block_size.max(1) as u64,
            _ => return Err(ConfigFileError::RecordCount),
        };
        let spec = WorkloadSpec {
            name: self.name,
            op_mix: self.op_mix,
            thread_count: self.thread_count,
            record_count,
            block_size,
            key_distribution: self.key_distribution,
            duration_secs: self.duration_secs,
            populate: self.populate,
            scan_length: self.scan_length,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Resolves `--workload`: an existing file wins over a preset name.
pub fn resolve_workload(arg: &str, scale: f64) -> Result<WorkloadSpec, ConfigFileError> {
    let path = Path::new(arg);
    if path.is_file() {
        return WorkloadFile::load(path)?.into_spec();
    }
    workload::preset(arg, scale).ok_or_else(|| ConfigFileError::UnknownWorkload(arg.to_string()))
}

/// Every run setting, all optional. A config file deserializes into this,
/// command-line flags produce another, and [`RunOptions::overlay`] merges
/// them.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunOptions {
    pub workload: Option<String>,
    pub policy: Option<AdmissionPolicy>,
    pub obp_target: Option<f64>,
    pub dram: Option<ByteSize>,
    pub nvram: Option<ByteSize>,
    pub eviction: Option<EvictionMode>,
    pub seed: Option<u64>,
    pub scale: Option<f64>,
    pub duration_secs: Option<f64>,
    pub warmup_fraction: Option<f64>,
    pub dataset_slack: Option<f64>,
    pub write_path_admission: Option<bool>,
    pub scan_interval_secs: Option<f64>,
    pub staleness_secs: Option<f64>,
    pub target_free_fraction: Option<f64>,
    pub buckets: Option<usize>,
    pub populate: Option<bool>,
    pub devices: Option<DeviceProfiles>,
}

macro_rules! overlay_fields {
    ($base:ident, $top:ident, $($f:ident),*) => {
        RunOptions { $($f: $top.$f.or($base.$f)),* }
    };
}

impl RunOptions {
    pub fn load(path: &Path) -> Result<Self, ConfigFileError> {
        read_toml(path)
    }

    /// Fields set in `top` replace those in `self`.
    pub fn overlay(self, top: RunOptions) -> RunOptions {
        let base = self;
        overlay_fields!(
            base,
            top,
            workload,
            policy,
            obp_target,
            dram,
            nvram,
            eviction,
            seed,
            scale,
            duration_secs,
            warmup_fraction,
            dataset_slack,
            write_path_admission,
            scan_interval_secs,
            staleness_secs,
            target_free_fraction,
            buckets,
            populate,
            devices
        )
    }

    pub fn scale(&self) -> f64 {
        self.scale.unwrap_or(DEFAULT_SCALE)
    }

    /// Builds a validated simulator config. DRAM and cache sizes default to
    /// fixed full-size amounts times the scale.
    pub fn build(&self) -> Result<SimConfig, ConfigFileError> {
        let scale = self.scale();
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(nvcache::ConfigError::InvalidScale(scale).into());
        }
        let name = self.workload.as_deref().unwrap_or("ycsb-a");
        let mut spec = resolve_workload(name, scale)?;
        if let Some(d) = self.duration_secs {
            spec.duration_secs = d;
        }
        if let Some(p) = self.populate {
            spec.populate = p;
        }
        let scaled = |full: u64| (full as f64 * scale) as u64;
        let dram = self.dram.map_or(scaled(FULL_DRAM_BYTES), |b| b.as_u64());
        let nvram = self.nvram.map_or(scaled(FULL_NVRAM_BYTES), |b| b.as_u64());
        let mut cfg = SimConfig::new(
            spec,
            self.policy.unwrap_or(AdmissionPolicy::Obp),
            dram,
            nvram,
        );
        cfg.bandwidth_scale = scale;
        if let Some(t) = self.obp_target {
            cfg.admission.obp_target = t;
        }
        if let Some(w) = self.write_path_admission {
            cfg.admission.write_path_admission = w;
        }
        if let Some(m) = self.eviction {
            cfg.eviction.mode = m;
        }
        if let Some(s) = self.scan_interval_secs {
            cfg.eviction.scan_interval = secs(s)?;
        }
        if let Some(s) = self.staleness_secs {
            cfg.eviction.staleness_window = secs(s)?;
        }
        if let Some(f) = self.target_free_fraction {
            cfg.eviction.target_free_fraction = f;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
            cfg.cache.seed = seed;
        }
        if let Some(b) = self.buckets {
            cfg.cache.bucket_count = b;
        }
        if let Some(w) = self.warmup_fraction {
            cfg.warmup_fraction = w;
        }
        if let Some(s) = self.dataset_slack {
            cfg.dataset_slack = s;
        }
        if let Some(d) = &self.devices {
            cfg.devices = d.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn secs(s: f64) -> Result<Duration, ConfigFileError> {
    Duration::try_from_secs_f64(s)
        .map_err(|_| nvcache::ConfigError::InvalidDuration(s).into())
}
