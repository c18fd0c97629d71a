//! Statistical checks on generated operation streams.

use nvcache::workload::{preset, OpGenerator, DEFAULT_SCALE};
use nvcache::{KeyDistribution, OpKind, OpMix, WorkloadSpec};

fn spec(mix: OpMix, dist: KeyDistribution, records: u64) -> WorkloadSpec {
    WorkloadSpec {
        name: "stats".into(),
        op_mix: mix,
        thread_count: 1,
        record_count: records,
        block_size: 16384,
        key_distribution: dist,
        duration_secs: 1.0,
        populate: false,
        scan_length: 10,
    }
}

fn key_counts(spec: &WorkloadSpec, samples: usize, seed: u64) -> Vec<u64> {
    let mut g = OpGenerator::new(spec, seed).unwrap();
    let mut counts = vec![0u64; spec.record_count as usize];
    for _ in 0..samples {
        counts[g.next_op().key as usize] += 1;
    }
    counts
}

/// Probability of rank `k` (1-based) under a Zipf law over `n` items.
fn zipf_pmf(n: u64, theta: f64, k: u64) -> f64 {
    let h: f64 = (1..=n).map(|i| (i as f64).powf(-theta)).sum();
    (k as f64).powf(-theta) / h
}

#[test]
fn zipfian_keys_follow_the_pmf() {
    let (n, theta, samples) = (1000, 0.99, 400_000);
    let s = spec(OpMix::reads(), KeyDistribution::Zipfian { theta }, n);
    let counts = key_counts(&s, samples, 5);
    for k in 1..=20u64 {
        let expect = zipf_pmf(n, theta, k);
        let got = counts[(k - 1) as usize] as f64 / samples as f64;
        assert!(
            (got - expect).abs() / expect < 0.05,
            "rank {k}: {got:.5} vs {expect:.5}"
        );
    }
    // Mass in the tail band as a whole.
    let tail_expect: f64 = (501..=n).map(|k| zipf_pmf(n, theta, k)).sum();
    let tail_got = counts[500..].iter().sum::<u64>() as f64 / samples as f64;
    assert!((tail_got - tail_expect).abs() / tail_expect < 0.05);
}

#[test]
fn latest_favours_newest_records() {
    let (n, theta, samples) = (1000, 0.99, 200_000);
    let s = spec(OpMix::reads(), KeyDistribution::Latest { theta }, n);
    let counts = key_counts(&s, samples, 9);
    for rank in 1..=5u64 {
        let expect = zipf_pmf(n, theta, rank);
        let got = counts[(n - rank) as usize] as f64 / samples as f64;
        assert!((got - expect).abs() / expect < 0.05, "rank {rank}");
    }
}

#[test]
fn uniform_keys_cover_the_range_evenly() {
    let (n, samples) = (100, 200_000);
    let counts = key_counts(&spec(OpMix::reads(), KeyDistribution::Uniform, n), samples, 2);
    let mean = samples as f64 / n as f64;
    assert!(counts.iter().all(|&c| (c as f64 - mean).abs() / mean < 0.1));
}

#[test]
fn ycsb_a_mix_within_half_a_percent() {
    let s = preset("ycsb-a", DEFAULT_SCALE).unwrap();
    let mut g = OpGenerator::new(&s, 17).unwrap();
    let n = 100_000;
    let mut by_kind = [0u64; 4];
    for _ in 0..n {
        by_kind[g.next_op().kind.index()] += 1;
    }
    for kind in OpKind::ALL {
        let got = by_kind[kind.index()] as f64 / n as f64;
        let want = s.op_mix.fraction(kind);
        assert!((got - want).abs() < 0.005, "{kind}: {got} vs {want}");
    }
}

#[test]
fn inserts_extend_the_key_space() {
    let s = preset("ycsb-d", DEFAULT_SCALE).unwrap();
    let start = s.record_count;
    let mut g = OpGenerator::new(&s, 3).unwrap();
    let mut next = start;
    for _ in 0..20_000 {
        let op = g.next_op();
        if op.kind == OpKind::Insert {
            assert_eq!(op.key, next);
            next += 1;
        } else {
            assert!(op.key < next);
        }
    }
    assert_eq!(g.record_count(), next);
    assert!(next > start);
}

#[test]
fn same_seed_same_stream_other_seed_differs() {
    let s = preset("ycsb-b", DEFAULT_SCALE).unwrap();
    let take = |seed| {
        let mut g = OpGenerator::new(&s, seed).unwrap();
        (0..1000).map(|_| g.next_op()).collect::<Vec<_>>()
    };
    assert_eq!(take(1), take(1));
    assert_ne!(take(1), take(2));
}
