//! Cross-run comparison: throughput relative to a baseline, memory cost, and
//! performance per unit of memory cost.

use alloc::string::String;
use alloc::vec::Vec;

use crate::workload::OpKind;

/// NVRAM price per byte relative to DRAM.
pub const DEFAULT_COST_RATIO: f64 = 0.38;

/// What a comparison needs from one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub workload: String,
    pub record_count: u64,
    pub thread_count: u32,
    pub policy: String,
    pub dram_bytes: u64,
    pub nvram_bytes: u64,
    /// By [`OpKind::index`].
    pub ops_per_sec: [f64; 4],
}

impl RunSummary {
    pub fn total_ops_per_sec(&self) -> f64 {
        self.ops_per_sec.iter().sum()
    }

    fn same_workload(&self, other: &RunSummary) -> bool {
        self.workload == other.workload
            && self.record_count == other.record_count
            && self.thread_count == other.thread_count
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CompareError {
    #[error("nothing to compare")]
    Empty,
    #[error("baseline index {index} out of range for {len} runs")]
    BadBaseline { index: usize, len: usize },
    #[error("run {index} used workload `{found}`, baseline used `{expected}`")]
    MismatchedWorkload {
        index: usize,
        expected: String,
        found: String,
    },
    #[error("cost ratio must be positive and finite, got {0}")]
    InvalidCostRatio(f64),
    #[error("baseline has no memory")]
    ZeroBaselineCost,
}

/// Memory cost in DRAM-byte equivalents.
pub fn memory_cost(dram_bytes: u64, nvram_bytes: u64, cost_ratio: f64) -> f64 {
    dram_bytes as f64 + nvram_bytes as f64 * cost_ratio
}

/// Memory cost of a configuration relative to a baseline configuration.
pub fn relative_cost(
    dram_bytes: u64,
    nvram_bytes: u64,
    baseline_dram_bytes: u64,
    baseline_nvram_bytes: u64,
    cost_ratio: f64,
) -> f64 {
    memory_cost(dram_bytes, nvram_bytes, cost_ratio)
        / memory_cost(baseline_dram_bytes, baseline_nvram_bytes, cost_ratio)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub policy: String,
    pub dram_bytes: u64,
    pub nvram_bytes: u64,
    /// Per-kind throughput over the baseline's; `None` where the baseline
    /// ran none of that kind.
    pub ratio_by_kind: [Option<f64>; 4],
    pub total_ratio: Option<f64>,
    pub relative_cost: Option<f64>,
    pub perf_per_cost: Option<f64>,
}

impl ComparisonRow {
    pub fn ratio_of(&self, kind: OpKind) -> Option<f64> {
        self.ratio_by_kind[kind.index()]
    }
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

/// Compares every run against `runs[baseline]`. With a cost ratio, also
/// reports memory cost and throughput per cost, both relative to the
/// baseline.
pub fn compare(
    runs: &[RunSummary],
    baseline: usize,
    cost_ratio: Option<f64>,
) -> Result<Vec<ComparisonRow>, CompareError> {
    if runs.is_empty() {
        return Err(CompareError::Empty);
    }
    let base = runs.get(baseline).ok_or(CompareError::BadBaseline {
        index: baseline,
        len: runs.len(),
    })?;
    if let Some(r) = cost_ratio {
        if !(r > 0.0 && r.is_finite()) {
            return Err(CompareError::InvalidCostRatio(r));
        }
        if memory_cost(base.dram_bytes, base.nvram_bytes, r) <= 0.0 {
            return Err(CompareError::ZeroBaselineCost);
        }
    }
    if let Some((index, run)) = runs.iter().enumerate().find(|(_, r)| !r.same_workload(base)) {
        return Err(CompareError::MismatchedWorkload {
            index,
            expected: base.workload.clone(),
            found: run.workload.clone(),
        });
    }
    Ok(runs
        .iter()
        .map(|run| {
            let total_ratio = ratio(run.total_ops_per_sec(), base.total_ops_per_sec());
            let cost = cost_ratio.map(|r| {
                relative_cost(
                    run.dram_bytes,
                    run.nvram_bytes,
                    base.dram_bytes,
                    base.nvram_bytes,
                    r,
                )
            });
            ComparisonRow {
                policy: run.policy.clone(),
                dram_bytes: run.dram_bytes,
                nvram_bytes: run.nvram_bytes,
                ratio_by_kind: core::array::from_fn(|i| {
                    ratio(run.ops_per_sec[i], base.ops_per_sec[i])
                }),
                total_ratio,
                relative_cost: cost,
                perf_per_cost: total_ratio.zip(cost).and_then(|(t, c)| ratio(t, c)),
            }
        })
        .collect())
}
