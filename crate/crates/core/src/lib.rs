//! A second-tier block cache for write-limited memory, and the virtual-time
//! storage model used to evaluate it.
//!
//! The cache ([`cache::BlockCache`]) sits underneath an engine's DRAM cache
//! and holds on-disk blocks. What makes it interesting is the admission
//! policy ([`admission`]): on media where writes collapse concurrent read
//! bandwidth, every insertion and removal costs lookups. The policy tracks
//! the ratio of write-generating events (inserts plus removals) to lookups
//! and stops admitting (and evicting) once that ratio passes a target.
//!
//! The rest of the crate is the experiment substrate: a bandwidth model with
//! write interference ([`device`]), a block-manager model that never updates
//! blocks in place ([`engine`]), deterministic workloads ([`workload`]) and
//! a closed-loop discrete-event driver ([`sim`]).
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;

pub mod admission;
pub mod cache;
pub mod device;
pub mod engine;
mod error;
pub mod eviction;
pub mod obp;
pub mod report;
pub mod sim;
mod time;
pub mod workload;

pub use error::ConfigError;
pub use time::VirtualInstant;

pub use admission::{AdmissionConfig, AdmissionPolicy, DatasetTracker, Decision, Origin};
pub use cache::{BlockCache, BlockId, CacheConfig, CacheCounters, CacheEntry, CacheStats};
pub use device::{DeviceClock, DeviceKind, DeviceProfile, DeviceProfiles};
pub use eviction::{EvictionConfig, EvictionMode};
pub use obp::{Obp, ObpWindow};
pub use sim::{SimConfig, SimResult};
pub use workload::{KeyDistribution, Op, OpKind, OpMix, WorkloadSpec};
