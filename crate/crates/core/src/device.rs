//! Bandwidth model with write interference.
//!
//! Each device has a read curve and a write curve: aggregate bandwidth in
//! GB/s as a function of how many writers are active. Between calibration
//! points the curve is linear in the writer count; past the last point it
//! stays flat.
//!
//! [`DeviceClock`] turns those curves into virtual time. Every device has
//! one FIFO read channel and one FIFO write channel, so a device's aggregate
//! bandwidth is shared by all concurrent users.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::time::Duration;

use crate::error::ConfigError;
use crate::time::VirtualInstant;

const GB: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DeviceKind {
    Nvram,
    Dram,
    Ssd,
}

impl DeviceKind {
    pub const ALL: [DeviceKind; 3] = [DeviceKind::Nvram, DeviceKind::Dram, DeviceKind::Ssd];

    pub fn label(self) -> &'static str {
        match self {
            DeviceKind::Nvram => "nvram",
            DeviceKind::Dram => "dram",
            DeviceKind::Ssd => "ssd",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for DeviceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessKind {
    Read,
    Write,
}

/// Piecewise-linear bandwidth (GB/s) over active writer count.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "Vec<(u32, f64)>", into = "Vec<(u32, f64)>"))]
pub struct BandwidthCurve {
    points: Vec<(u32, f64)>,
}

impl BandwidthCurve {
    /// Points must be strictly increasing in writer count, with positive
    /// bandwidths that never increase.
    pub fn new(points: Vec<(u32, f64)>) -> Result<Self, &'static str> {
        if points.is_empty() {
            return Err("no calibration points");
        }
        if points.iter().any(|&(_, bw)| !(bw > 0.0 && bw.is_finite())) {
            return Err("bandwidths must be positive and finite");
        }
        for pair in points.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err("writer counts must be strictly increasing");
            }
            if pair[1].1 > pair[0].1 {
                return Err("bandwidth must not increase with writers");
            }
        }
        Ok(BandwidthCurve { points })
    }

    pub fn flat(bandwidth: f64) -> Self {
        BandwidthCurve {
            points: vec![(0, bandwidth)],
        }
    }

    pub fn points(&self) -> &[(u32, f64)] {
        &self.points
    }

    pub fn at(&self, writers: u32) -> f64 {
        let first = self.points[0];
        if writers <= first.0 {
            return first.1;
        }
        for pair in self.points.windows(2) {
            let (x0, y0) = pair[0];
            let (x1, y1) = pair[1];
            if writers == x1 {
                return y1;
            }
            if writers < x1 {
                let frac = (writers - x0) as f64 / (x1 - x0) as f64;
                return y0 + (y1 - y0) * frac;
            }
        }
        self.points[self.points.len() - 1].1
    }
}

impl TryFrom<Vec<(u32, f64)>> for BandwidthCurve {
    type Error = &'static str;

    fn try_from(points: Vec<(u32, f64)>) -> Result<Self, Self::Error> {
        BandwidthCurve::new(points)
    }
}

impl From<BandwidthCurve> for Vec<(u32, f64)> {
    fn from(curve: BandwidthCurve) -> Self {
        curve.points
    }
}

/// Default DRAM read bandwidth with no writers; a stand-in, not a measurement.
pub const DEFAULT_DRAM_BANDWIDTH: f64 = 60.0;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DeviceProfile {
    pub kind: DeviceKind,
    pub read: BandwidthCurve,
    pub write: BandwidthCurve,
    /// Bytes written to this device per cache removal.
    pub per_removal_write_bytes: u64,
}

impl DeviceProfile {
    /// Byte-addressable NVRAM: reads collapse under one writer and keep
    /// degrading; writes are slow and scale negatively.
    pub fn nvram() -> Self {
        DeviceProfile {
            kind: DeviceKind::Nvram,
            read: BandwidthCurve::new(vec![(0, 12.0), (1, 3.4), (8, 0.8)]).unwrap(),
            write: BandwidthCurve::new(vec![(1, 2.0), (8, 1.6)]).unwrap(),
            per_removal_write_bytes: crate::cache::DEFAULT_REMOVAL_WRITE_BYTES,
        }
    }

    /// DRAM losing 18% of read bandwidth to one writer and 35% to eight.
    pub fn dram(base: f64) -> Self {
        DeviceProfile {
            kind: DeviceKind::Dram,
            read: BandwidthCurve::new(vec![(0, base), (1, 0.82 * base), (8, 0.65 * base)]).unwrap(),
            write: BandwidthCurve::flat(base),
            per_removal_write_bytes: 0,
        }
    }

    pub fn ssd() -> Self {
        DeviceProfile {
            kind: DeviceKind::Ssd,
            read: BandwidthCurve::flat(2.5),
            write: BandwidthCurve::flat(2.2),
            per_removal_write_bytes: 0,
        }
    }

    pub fn read_bandwidth(&self, active_writers: u32) -> f64 {
        self.read.at(active_writers)
    }

    pub fn write_bandwidth(&self, active_writers: u32) -> f64 {
        self.write.at(active_writers)
    }

    /// Fraction of the writer-free read bandwidth lost to `active_writers`.
    pub fn read_loss(&self, active_writers: u32) -> f64 {
        1.0 - self.read_bandwidth(active_writers) / self.read_bandwidth(0)
    }

    /// Service time in virtual seconds for `bytes` at full device scale.
    pub fn access_cost(&self, kind: AccessKind, bytes: u64, active_writers: u32) -> f64 {
        let bw = match kind {
            AccessKind::Read => self.read_bandwidth(active_writers),
            AccessKind::Write => self.write_bandwidth(active_writers),
        };
        bytes as f64 / (bw * GB)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DeviceProfiles {
    pub nvram: DeviceProfile,
    pub dram: DeviceProfile,
    pub ssd: DeviceProfile,
}

impl Default for DeviceProfiles {
    fn default() -> Self {
        DeviceProfiles {
            nvram: DeviceProfile::nvram(),
            dram: DeviceProfile::dram(DEFAULT_DRAM_BANDWIDTH),
            ssd: DeviceProfile::ssd(),
        }
    }
}

impl DeviceProfiles {
    pub fn get(&self, kind: DeviceKind) -> &DeviceProfile {
        match kind {
            DeviceKind::Nvram => &self.nvram,
            DeviceKind::Dram => &self.dram,
            DeviceKind::Ssd => &self.ssd,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for kind in DeviceKind::ALL {
            let p = self.get(kind);
            if p.kind != kind {
                return Err(ConfigError::InvalidCurve {
                    device: kind.label(),
                    reason: "profile kind does not match its slot",
                });
            }
            for curve in [&p.read, &p.write] {
                BandwidthCurve::new(curve.points.clone()).map_err(|reason| {
                    ConfigError::InvalidCurve {
                        device: kind.label(),
                        reason,
                    }
                })?;
            }
        }
        Ok(())
    }
}

/// Cumulative per-device traffic.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DeviceTraffic {
    pub bytes_read: u64,
    pub bytes_written: u64,
    /// Sum of read service times, excluding queueing.
    pub read_busy: Duration,
    pub write_busy: Duration,
}

#[derive(Debug, Clone, Copy)]
struct Writer {
    issued: VirtualInstant,
    done: VirtualInstant,
}

#[derive(Debug, Clone, Default)]
struct DeviceState {
    read_free_at: VirtualInstant,
    write_free_at: VirtualInstant,
    writers: Vec<Writer>,
    traffic: DeviceTraffic,
}

/// Virtual clock plus per-device channel occupancy.
///
/// Costs are priced against the writer count at the clock's current
/// instant and never re-priced. `bandwidth_scale` shrinks every bandwidth
/// by the same factor the dataset was shrunk by, so a scaled-down dataset
/// keeps the time behavior of the full-size one.
#[derive(Debug, Clone)]
pub struct DeviceClock {
    now: VirtualInstant,
    bandwidth_scale: f64,
    devices: [DeviceState; 3],
}

impl DeviceClock {
    pub fn new(bandwidth_scale: f64) -> Result<Self, ConfigError> {
        if !(bandwidth_scale > 0.0 && bandwidth_scale.is_finite()) {
            return Err(ConfigError::InvalidScale(bandwidth_scale));
        }
        Ok(DeviceClock {
            now: VirtualInstant::ZERO,
            bandwidth_scale,
            devices: Default::default(),
        })
    }

    pub fn now(&self) -> VirtualInstant {
        self.now
    }

    /// Moves the clock forward and retires finished writers. Earlier
    /// instants are ignored.
    pub fn advance_to(&mut self, now: VirtualInstant) {
        if now <= self.now {
            return;
        }
        self.now = now;
        for dev in &mut self.devices {
            dev.writers.retain(|w| w.done > now);
        }
    }

    /// Writers that have been issued and not yet finished.
    pub fn in_flight_writers(&self, kind: DeviceKind) -> u32 {
        self.devices[kind.index()]
            .writers
            .iter()
            .filter(|w| w.issued <= self.now)
            .count() as u32
    }

    /// Writers issued at any time, including ones queued for a later start.
    pub fn pending_writers(&self, kind: DeviceKind) -> u32 {
        self.devices[kind.index()].writers.len() as u32
    }

    pub fn traffic(&self, kind: DeviceKind) -> DeviceTraffic {
        self.devices[kind.index()].traffic
    }

    /// Queues an access issued at `issued` (no earlier than now) and returns
    /// when it completes.
    pub fn submit(
        &mut self,
        profile: &DeviceProfile,
        kind: AccessKind,
        bytes: u64,
        issued: VirtualInstant,
    ) -> VirtualInstant {
        let issued = issued.max(self.now);
        if bytes == 0 {
            return issued;
        }
        let writers = self.in_flight_writers(profile.kind);
        let priced_writers = match kind {
            AccessKind::Read => writers,
            AccessKind::Write => writers + 1,
        };
        let secs = profile.access_cost(kind, bytes, priced_writers) / self.bandwidth_scale;
        let service = Duration::from_nanos((libm::ceil(secs * 1e9) as u64).max(1));
        let dev = &mut self.devices[profile.kind.index()];
        match kind {
            AccessKind::Read => {
                let start = issued.max(dev.read_free_at);
                let done = start + service;
                dev.read_free_at = done;
                dev.traffic.bytes_read += bytes;
                dev.traffic.read_busy += service;
                done
            }
            AccessKind::Write => {
                let start = issued.max(dev.write_free_at);
                let done = start + service;
                dev.write_free_at = done;
                dev.writers.push(Writer { issued, done });
                dev.traffic.bytes_written += bytes;
                dev.traffic.write_busy += service;
                done
            }
        }
    }

    /// Runs the clock until every queued access has finished.
    pub fn drain(&mut self) -> VirtualInstant {
        let end = self
            .devices
            .iter()
            .flat_map(|d| [d.read_free_at, d.write_free_at])
            .fold(self.now, VirtualInstant::max);
        self.advance_to(end);
        end
    }
}
