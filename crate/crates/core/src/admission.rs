//! Admission policy.
//!
//! Gates are checked in a fixed order and the first one that fires names
//! the outcome:
//!
//! 1. the policy itself (disabled, or a write-path block under a policy
//!    that does not allocate on writes);
//! 2. small-bypass: nothing is admitted while every database file together
//!    still fits in DRAM, because the OS buffer cache already holds it;
//! 3. the overhead-bypass throttle: under [`AdmissionPolicy::Obp`], nothing
//!    is admitted while the smoothed ratio of inserts plus removals to
//!    lookups is above target.
//!
//! The same throttle gates the eviction scan ([`should_evict_now`]), since
//! evicting only makes room for more write-generating admissions.

use core::fmt;
use core::str::FromStr;
use core::sync::atomic::{AtomicU64, Ordering};

use crate::error::ConfigError;
use crate::obp::Obp;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum AdmissionPolicy {
    /// Admit on every read miss and every block write.
    #[cfg_attr(feature = "serde", serde(alias = "always"))]
    AlwaysReadWrite,
    /// Admit on read misses only.
    #[cfg_attr(feature = "serde", serde(alias = "nowrite"))]
    NoWriteAllocate,
    /// Admit while the overhead-bypass ratio is at or below target.
    Obp,
    Disabled,
}

impl AdmissionPolicy {
    pub fn label(self) -> &'static str {
        match self {
            AdmissionPolicy::AlwaysReadWrite => "always",
            AdmissionPolicy::NoWriteAllocate => "nowrite",
            AdmissionPolicy::Obp => "obp",
            AdmissionPolicy::Disabled => "disabled",
        }
    }
}

impl fmt::Display for AdmissionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for AdmissionPolicy {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "always" | "always_read_write" => Ok(AdmissionPolicy::AlwaysReadWrite),
            "nowrite" | "no_write_allocate" => Ok(AdmissionPolicy::NoWriteAllocate),
            "obp" => Ok(AdmissionPolicy::Obp),
            "disabled" => Ok(AdmissionPolicy::Disabled),
            other => Err(ConfigError::Other(alloc::format!("unknown policy `{other}`"))),
        }
    }
}

/// Default overhead-bypass target.
pub const DEFAULT_OBP_TARGET: f64 = 0.10;

/// Range of targets that still perform acceptably.
pub const ACCEPTABLE_OBP_TARGETS: (f64, f64) = (0.05, 0.30);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissionConfig {
    pub policy: AdmissionPolicy,
    pub obp_target: f64,
    /// DRAM the dataset is compared against for small-bypass.
    pub dram_bytes: u64,
    /// Whether freshly written blocks are admission candidates at all.
    pub write_path_admission: bool,
}

impl AdmissionConfig {
    pub fn new(policy: AdmissionPolicy, dram_bytes: u64) -> Self {
        AdmissionConfig {
            policy,
            obp_target: DEFAULT_OBP_TARGET,
            dram_bytes,
            write_path_admission: true,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.policy == AdmissionPolicy::Obp
            && !(self.obp_target > 0.0 && self.obp_target.is_finite())
        {
            return Err(ConfigError::InvalidObpTarget(self.obp_target));
        }
        Ok(())
    }

    fn allocates_on_write(&self) -> bool {
        self.write_path_admission && self.policy != AdmissionPolicy::NoWriteAllocate
    }
}

/// Where the candidate block came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    ReadPath,
    WritePath,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Admit,
    BypassSmall,
    BypassObp,
    BypassPolicy,
}

/// Running size of all database files.
///
/// Tracks live block bytes; the reported size is that times a slack factor
/// standing in for freed-but-unreclaimed file space.
#[derive(Debug)]
pub struct DatasetTracker {
    live_bytes: AtomicU64,
    slack: f64,
}

impl DatasetTracker {
    pub fn new(slack: f64) -> Result<Self, ConfigError> {
        if !(slack >= 1.0 && slack.is_finite()) {
            return Err(ConfigError::InvalidSlack(slack));
        }
        Ok(DatasetTracker {
            live_bytes: AtomicU64::new(0),
            slack,
        })
    }

    pub fn grow(&self, bytes: u64) {
        self.live_bytes.fetch_add(bytes, Ordering::Relaxed);
    }

    pub fn shrink(&self, bytes: u64) {
        let _ = self
            .live_bytes
            .fetch_update(Ordering::Relaxed, Ordering::Relaxed, |b| {
                Some(b.saturating_sub(bytes))
            });
    }

    pub fn live_bytes(&self) -> u64 {
        self.live_bytes.load(Ordering::Relaxed)
    }

    pub fn aggregate_file_bytes(&self) -> u64 {
        (self.live_bytes() as f64 * self.slack) as u64
    }
}

impl Default for DatasetTracker {
    fn default() -> Self {
        DatasetTracker {
            live_bytes: AtomicU64::new(0),
            slack: 1.0,
        }
    }
}

pub fn should_admit(
    origin: Origin,
    obp: Obp,
    tracker: &DatasetTracker,
    cfg: &AdmissionConfig,
) -> Decision {
    if cfg.policy == AdmissionPolicy::Disabled {
        return Decision::BypassPolicy;
    }
    if origin == Origin::WritePath && !cfg.allocates_on_write() {
        return Decision::BypassPolicy;
    }
    if tracker.aggregate_file_bytes() <= cfg.dram_bytes {
        return Decision::BypassSmall;
    }
    if cfg.policy == AdmissionPolicy::Obp && obp.exceeds(cfg.obp_target) {
        return Decision::BypassObp;
    }
    Decision::Admit
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvictGate {
    Proceed,
    Throttled,
}

pub fn should_evict_now(obp: Obp, cfg: &AdmissionConfig) -> EvictGate {
    if cfg.policy == AdmissionPolicy::Obp && obp.exceeds(cfg.obp_target) {
        EvictGate::Throttled
    } else {
        EvictGate::Proceed
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GB: u64 = 1_000_000_000;

    fn tracker(bytes: u64) -> DatasetTracker {
        let t = DatasetTracker::default();
        t.grow(bytes);
        t
    }

    fn obp_cfg(dram: u64) -> AdmissionConfig {
        AdmissionConfig::new(AdmissionPolicy::Obp, dram)
    }

    #[test]
    fn small_dataset_bypasses_every_enabled_policy() {
        for policy in [
            AdmissionPolicy::AlwaysReadWrite,
            AdmissionPolicy::NoWriteAllocate,
            AdmissionPolicy::Obp,
        ] {
            let cfg = AdmissionConfig::new(policy, 16 * GB);
            let d = should_admit(Origin::ReadPath, Obp::Ratio(0.0), &tracker(8 * GB), &cfg);
            assert_eq!(d, Decision::BypassSmall, "{policy}");
        }
    }

    #[test]
    fn obp_above_target_bypasses() {
        let d = should_admit(
            Origin::ReadPath,
            Obp::Ratio(0.12),
            &tracker(100 * GB),
            &obp_cfg(32 * GB),
        );
        assert_eq!(d, Decision::BypassObp);
    }

    #[test]
    fn all_gates_pass() {
        let d = should_admit(
            Origin::ReadPath,
            Obp::Ratio(0.05),
            &tracker(100 * GB),
            &obp_cfg(32 * GB),
        );
        assert_eq!(d, Decision::Admit);
    }

    #[test]
    fn target_itself_is_admitted() {
        let d = should_admit(
            Origin::ReadPath,
            Obp::Ratio(DEFAULT_OBP_TARGET),
            &tracker(100 * GB),
            &obp_cfg(32 * GB),
        );
        assert_eq!(d, Decision::Admit);
    }

    #[test]
    fn saturated_bypasses() {
        let d = should_admit(Origin::WritePath, Obp::Saturated, &tracker(100 * GB), &obp_cfg(0));
        assert_eq!(d, Decision::BypassObp);
    }

    #[test]
    fn disabled_wins_over_small_bypass() {
        let cfg = AdmissionConfig::new(AdmissionPolicy::Disabled, 16 * GB);
        let d = should_admit(Origin::ReadPath, Obp::Ratio(0.0), &tracker(GB), &cfg);
        assert_eq!(d, Decision::BypassPolicy);
    }

    #[test]
    fn write_path_gates() {
        let big = tracker(100 * GB);
        let nowrite = AdmissionConfig::new(AdmissionPolicy::NoWriteAllocate, GB);
        assert_eq!(
            should_admit(Origin::WritePath, Obp::Ratio(0.0), &big, &nowrite),
            Decision::BypassPolicy
        );
        assert_eq!(
            should_admit(Origin::ReadPath, Obp::Ratio(0.0), &big, &nowrite),
            Decision::Admit
        );
        let mut always = AdmissionConfig::new(AdmissionPolicy::AlwaysReadWrite, GB);
        assert_eq!(
            should_admit(Origin::WritePath, Obp::Saturated, &big, &always),
            Decision::Admit
        );
        always.write_path_admission = false;
        assert_eq!(
            should_admit(Origin::WritePath, Obp::Ratio(0.0), &big, &always),
            Decision::BypassPolicy
        );
    }

    #[test]
    fn eviction_gate() {
        let cfg = obp_cfg(GB);
        assert_eq!(should_evict_now(Obp::Ratio(0.25), &cfg), EvictGate::Throttled);
        assert_eq!(should_evict_now(Obp::Ratio(0.02), &cfg), EvictGate::Proceed);
        assert_eq!(should_evict_now(Obp::Saturated, &cfg), EvictGate::Throttled);
        let always = AdmissionConfig::new(AdmissionPolicy::AlwaysReadWrite, GB);
        assert_eq!(should_evict_now(Obp::Ratio(5.0), &always), EvictGate::Proceed);
        assert_eq!(should_evict_now(Obp::Saturated, &always), EvictGate::Proceed);
    }

    #[test]
    fn tracker_slack_and_shrink() {
        let t = DatasetTracker::new(1.5).unwrap();
        t.grow(1000);
        t.shrink(200);
        assert_eq!(t.live_bytes(), 800);
        assert_eq!(t.aggregate_file_bytes(), 1200);
        t.shrink(10_000);
        assert_eq!(t.live_bytes(), 0);
        assert!(DatasetTracker::new(0.5).is_err());
    }

    #[test]
    fn target_validation() {
        let mut cfg = obp_cfg(GB);
        assert!(cfg.validate().is_ok());
        cfg.obp_target = 0.0;
        assert_eq!(cfg.validate(), Err(ConfigError::InvalidObpTarget(0.0)));
        cfg.policy = AdmissionPolicy::AlwaysReadWrite;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn policy_names_parse() {
        for p in [
            AdmissionPolicy::AlwaysReadWrite,
            AdmissionPolicy::NoWriteAllocate,
            AdmissionPolicy::Obp,
            AdmissionPolicy::Disabled,
        ] {
            assert_eq!(p.label().parse::<AdmissionPolicy>().unwrap(), p);
        }
        assert!("lru".parse::<AdmissionPolicy>().is_err());
    }
}
