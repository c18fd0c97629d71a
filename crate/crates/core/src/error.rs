use alloc::string::String;

/// Rejected configuration, reported before any simulation work starts.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("cache capacity must be positive")]
    ZeroCapacity,
    #[error("bucket count must be at least 1")]
    ZeroBuckets,
    #[error("cache capacity {capacity} bytes cannot hold a {block_size}-byte block")]
    CapacityBelowBlockSize { capacity: u64, block_size: u32 },
    #[error("block size must be positive")]
    ZeroBlockSize,
    #[error("obp target must be positive and finite, got {0}")]
    InvalidObpTarget(f64),
    #[error("operation mix must be non-negative and sum to 1, got {0}")]
    InvalidMix(f64),
    #[error("workload needs at least one thread")]
    ZeroThreads,
    #[error("duration must be positive, got {0}")]
    InvalidDuration(f64),
    #[error("warmup fraction must be in [0, 1), got {0}")]
    InvalidWarmup(f64),
    #[error("bandwidth scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("zipfian theta must be positive and finite, got {0}")]
    InvalidTheta(f64),
    #[error("scan length must be positive")]
    ZeroScanLength,
    #[error("invalid eviction config: {0}")]
    InvalidEviction(&'static str),
    #[error("invalid {device} bandwidth curve: {reason}")]
    InvalidCurve { device: &'static str, reason: &'static str },
    #[error("dataset slack factor must be at least 1, got {0}")]
    InvalidSlack(f64),
    #[error("{0}")]
    Other(String),
}
