use nvcache::sim::{run, SimConfig};
use nvcache::{AdmissionPolicy, EvictionMode, KeyDistribution, OpMix, WorkloadSpec};
use proptest::prelude::*;

fn spec(read: f64, records: u64, threads: u32, populate: bool) -> WorkloadSpec {
    WorkloadSpec {
        name: "prop".into(),
        op_mix: OpMix {
            read,
            update: 1.0 - read,
            ..Default::default()
        },
        thread_count: threads,
        record_count: records,
        block_size: 16384,
        key_distribution: KeyDistribution::Zipfian { theta: 0.99 },
        duration_secs: 20.0,
        populate,
        scan_length: 10,
    }
}

fn policy() -> impl Strategy<Value = AdmissionPolicy> {
    prop::sample::select(vec![
        AdmissionPolicy::AlwaysReadWrite,
        AdmissionPolicy::NoWriteAllocate,
        AdmissionPolicy::Obp,
        AdmissionPolicy::Disabled,
    ])
}

fn mode() -> impl Strategy<Value = EvictionMode> {
    prop::sample::select(vec![EvictionMode::None, EvictionMode::Eager, EvictionMode::Throttled])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn runs_respect_invariants(
        read in 0.0f64..=1.0,
        records in 50u64..600,
        threads in 1u32..12,
        populate in any::<bool>(),
        p in policy(),
        m in mode(),
        dram_blocks in 0u64..100,
        cache_blocks in 1u64..400,
        seed in any::<u64>(),
    ) {
        let mut cfg = SimConfig::new(spec(read, records, threads, populate), p, dram_blocks * 16384, cache_blocks * 16384);
        cfg.eviction.mode = m;
        cfg.seed = seed;
        let r = run(&cfg).unwrap();

        prop_assert!(r.used_bytes_at_end <= r.nvram_bytes);
        prop_assert!((0.0..=1.0).contains(&r.nvcache_hit_ratio));
        prop_assert!((0.0..=1.0).contains(&r.dram_hit_ratio));
        prop_assert!(r.blocks.lookup_hits <= r.blocks.blocks_looked_up);
        prop_assert!(r.blocks.blocks_removed <= r.blocks.blocks_inserted + r.populate.blocks_admitted);
        if p == AdmissionPolicy::Disabled {
            prop_assert_eq!(r.blocks.blocks_inserted + r.populate.blocks_admitted, 0);
        }
        if m == EvictionMode::None {
            prop_assert_eq!(r.blocks.removed_by_eviction, 0);
        }
        if records * 16384 <= dram_blocks * 16384 && read == 1.0 {
            prop_assert_eq!(r.blocks.blocks_inserted, 0);
        }
        let per_epoch: u64 = r.measured_epochs().map(|e| e.ops_completed).sum();
        prop_assert_eq!(per_epoch, r.ops_completed.iter().sum::<u64>());
        prop_assert_eq!(run(&cfg).unwrap().blocks, r.blocks);
    }
}
