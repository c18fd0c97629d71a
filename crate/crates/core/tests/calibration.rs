use std::time::Duration;

use nvcache::cache::{default_bucket_count, REFERENCE_BUCKETS, REFERENCE_CAPACITY};
use nvcache::device::{AccessKind, BandwidthCurve, DeviceProfile, DEFAULT_DRAM_BANDWIDTH};
use nvcache::eviction::{is_stale, select_victims};
use nvcache::{BlockId, CacheEntry, DeviceKind, DeviceProfiles, EvictionConfig, VirtualInstant};
use proptest::prelude::*;

/// Straight-line interpolation between calibration points, flat outside.
fn interpolate(points: &[(u32, f64)], w: u32) -> f64 {
    if w <= points[0].0 {
        return points[0].1;
    }
    for p in points.windows(2) {
        let ((x0, y0), (x1, y1)) = (p[0], p[1]);
        if w <= x1 {
            return y0 + (y1 - y0) * (w - x0) as f64 / (x1 - x0) as f64;
        }
    }
    points[points.len() - 1].1
}

#[test]
fn curves_interpolate_between_points() {
    let profiles = DeviceProfiles::default();
    for kind in DeviceKind::ALL {
        let p = profiles.get(kind);
        for w in 0..=32 {
            let read = interpolate(p.read.points(), w);
            let write = interpolate(p.write.points(), w);
            assert!((p.read_bandwidth(w) - read).abs() < 1e-12, "{kind} read w={w}");
            assert!((p.write_bandwidth(w) - write).abs() < 1e-12, "{kind} write w={w}");
        }
    }
}

#[test]
fn curves_never_improve_with_writers() {
    for p in [
        DeviceProfile::nvram(),
        DeviceProfile::dram(DEFAULT_DRAM_BANDWIDTH),
        DeviceProfile::ssd(),
    ] {
        for w in 0..32 {
            assert!(p.read_bandwidth(w + 1) <= p.read_bandwidth(w));
            assert!(p.write_bandwidth(w + 1) <= p.write_bandwidth(w));
        }
    }
}

#[test]
fn nvram_write_curve_points() {
    let nv = DeviceProfile::nvram();
    assert_eq!(nv.write_bandwidth(1), 2.0);
    assert_eq!(nv.write_bandwidth(8), 1.6);
    assert_eq!(nv.per_removal_write_bytes, 256);
}

#[test]
fn access_cost_is_bytes_over_bandwidth() {
    let nv = DeviceProfile::nvram();
    let secs = nv.access_cost(AccessKind::Read, 16384, 1);
    assert!((secs - 16384.0 / 3.4e9).abs() < 1e-18);
}

#[test]
fn malformed_curves_are_rejected() {
    assert!(BandwidthCurve::new(vec![]).is_err());
    assert!(BandwidthCurve::new(vec![(1, 2.0), (1, 1.0)]).is_err());
    assert!(BandwidthCurve::new(vec![(0, -1.0)]).is_err());
}

#[test]
fn reference_density_gives_reference_buckets() {
    assert_eq!(default_bucket_count(REFERENCE_CAPACITY), REFERENCE_BUCKETS as usize);
    assert_eq!(default_bucket_count(1), 1);
    for cap in [1u64 << 20, 150_000_000, 1 << 34] {
        let b = default_bucket_count(cap);
        assert!(b.is_power_of_two());
        let exact = cap as f64 * REFERENCE_BUCKETS as f64 / REFERENCE_CAPACITY as f64;
        assert!(b as f64 >= exact);
        assert!(b == 1 || (b as f64) < 2.0 * exact);
    }
}

fn entry() -> impl Strategy<Value = CacheEntry> {
    (0u64..4, 0u64..32, 0u32..3, 0u64..60, 0u64..60, 1u64..6).prop_map(
        |(f, o, s, admit, age, count)| CacheEntry {
            id: BlockId::new(f, o * 4096, 4096 << s),
            admit_time: VirtualInstant::from_nanos(admit * 1_000_000_000),
            last_access_time: VirtualInstant::from_nanos((admit + age) * 1_000_000_000),
            access_count: count,
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn victims_match_sort_oracle(
        mut entries in prop::collection::vec(entry(), 0..40),
        now in 0u64..150,
        window in 1u64..60,
        needed in 0u64..300_000,
    ) {
        entries.sort_by_key(|e| e.id);
        entries.dedup_by_key(|e| e.id);
        let now = VirtualInstant::from_nanos(now * 1_000_000_000);
        let cfg = EvictionConfig { staleness_window: Duration::from_secs(window), ..EvictionConfig::default() };

        let mut stale: Vec<CacheEntry> = entries.iter().copied().filter(|e| is_stale(e, now, cfg.staleness_window)).collect();
        stale.sort_by(|a, b| {
            (a.access_count, a.last_access_time, a.id).cmp(&(b.access_count, b.last_access_time, b.id))
        });
        let mut expect = Vec::new();
        let mut freed = 0;
        for e in stale {
            if freed >= needed {
                break;
            }
            freed += e.payload_size();
            expect.push(e);
        }
        let got = select_victims(&entries, now, &cfg, needed);
        prop_assert_eq!(got, expect);
    }
}

#[test]
fn staleness_boundary_is_strict() {
    let e = CacheEntry {
        id: BlockId::new(0, 0, 4096),
        admit_time: VirtualInstant::ZERO,
        last_access_time: VirtualInstant::ZERO,
        access_count: 1,
    };
    let w = Duration::from_secs(60);
    assert!(!is_stale(&e, VirtualInstant::from_nanos(60_000_000_000), w));
    assert!(is_stale(&e, VirtualInstant::from_nanos(60_000_000_001), w));
}
