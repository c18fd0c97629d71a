use core::fmt;
use core::ops::{Add, AddAssign};
use core::time::Duration;

/// A point on the simulator's virtual clock, in nanoseconds since start.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VirtualInstant(u64);

impl VirtualInstant {
    pub const ZERO: VirtualInstant = VirtualInstant(0);

    pub const fn from_nanos(nanos: u64) -> Self {
        VirtualInstant(nanos)
    }

    pub fn from_secs_f64(secs: f64) -> Self {
        VirtualInstant((secs * 1e9) as u64)
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e9
    }

    pub fn saturating_duration_since(self, earlier: VirtualInstant) -> Duration {
        Duration::from_nanos(self.0.saturating_sub(earlier.0))
    }

    /// Rounds up to the next multiple of `step`; a multiple is returned as is.
    pub fn ceil_to(self, step: Duration) -> Self {
        let step = step.as_nanos() as u64;
        if step == 0 {
            return self;
        }
        VirtualInstant(self.0.div_ceil(step) * step)
    }
}

impl Add<Duration> for VirtualInstant {
    type Output = VirtualInstant;

    fn add(self, rhs: Duration) -> VirtualInstant {
        VirtualInstant(self.0 + rhs.as_nanos() as u64)
    }
}

impl AddAssign<Duration> for VirtualInstant {
    fn add_assign(&mut self, rhs: Duration) {
        *self = *self + rhs;
    }
}

impl fmt::Display for VirtualInstant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:09}", self.0 / 1_000_000_000, self.0 % 1_000_000_000)
    }
}
