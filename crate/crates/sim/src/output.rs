//! CSV and text reports.
//!
//! A run's CSV has one header and two kinds of row, told apart by the
//! `row` column:
//!
//! * `epoch`: one per closed one-second epoch of the measured run, with
//!   the smoothed overhead-bypass ratio at the epoch's end and the raw
//!   insert, removal, lookup and completion counts inside it;
//! * `summary`: exactly one, last, with whole-run figures.
//!
//! Run identity columns (`workload` through `threads`) are filled on every
//! row; the rest are empty where they do not apply. Wall-clock time is left
//! out so identical runs give identical files.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use nvcache::report::{self, ComparisonRow, RunSummary, DEFAULT_COST_RATIO};
use nvcache::sim::{EpochRow, SimResult};
use nvcache::{DeviceKind, Obp, OpKind};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    #[default]
    Epoch,
    Summary,
}

/// One CSV line; field order is column order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CsvRow {
    pub row: RowKind,
    pub workload: String,
    pub policy: String,
    pub eviction: String,
    pub obp_target: f64,
    pub dram_bytes: u64,
    pub nvram_bytes: u64,
    pub seed: u64,
    pub scale: f64,
    pub record_count: u64,
    pub threads: u32,
    pub epoch: Option<u64>,
    pub start_secs: Option<f64>,
    /// A number, or `saturated` when writes happened with no lookups.
    pub obp: Option<String>,
    pub inserted: Option<u64>,
    pub removed: Option<u64>,
    pub looked_up: Option<u64>,
    pub ops_completed: Option<u64>,
    pub warmup: Option<bool>,
    pub measured_secs: Option<f64>,
    pub read_ops_per_sec: Option<f64>,
    pub update_ops_per_sec: Option<f64>,
    pub insert_ops_per_sec: Option<f64>,
    pub scan_ops_per_sec: Option<f64>,
    pub total_ops_per_sec: Option<f64>,
    pub nvcache_hit_ratio: Option<f64>,
    pub dram_hit_ratio: Option<f64>,
    pub obp_mean: Option<f64>,
    pub blocks_inserted: Option<u64>,
    pub blocks_removed: Option<u64>,
    pub removed_by_invalidation: Option<u64>,
    pub removed_by_eviction: Option<u64>,
    pub blocks_looked_up: Option<u64>,
    pub removed_to_inserted_ratio: Option<f64>,
    pub bytes_admitted: Option<u64>,
    pub ssd_bytes_written: Option<u64>,
    pub ssd_bytes_read: Option<u64>,
    pub nvram_bytes_written: Option<u64>,
    pub nvram_bytes_read: Option<u64>,
    pub dram_bytes_written: Option<u64>,
    pub dram_bytes_read: Option<u64>,
    pub populate_blocks_written: Option<u64>,
    pub populate_blocks_admitted: Option<u64>,
}

fn obp_text(obp: Obp) -> String {
    match obp {
        Obp::Ratio(r) => r.to_string(),
        Obp::Saturated => "saturated".to_string(),
    }
}

fn identity(r: &SimResult, scale: f64) -> CsvRow {
    CsvRow {
        workload: r.workload.clone(),
        policy: r.policy.label().to_string(),
        eviction: r.eviction.label().to_string(),
        obp_target: r.obp_target,
        dram_bytes: r.dram_bytes,
        nvram_bytes: r.nvram_bytes,
        seed: r.seed,
        scale,
        record_count: r.record_count,
        threads: r.thread_count,
        ..CsvRow::default()
    }
}

fn epoch_row(id: &CsvRow, e: &EpochRow) -> CsvRow {
    CsvRow {
        row: RowKind::Epoch,
        epoch: Some(e.epoch),
        start_secs: Some(e.start_secs),
        obp: Some(obp_text(e.obp)),
        inserted: Some(e.inserted),
        removed: Some(e.removed),
        looked_up: Some(e.looked_up),
        ops_completed: Some(e.ops_completed),
        warmup: Some(e.warmup),
        ..id.clone()
    }
}

fn summary_row(id: CsvRow, r: &SimResult) -> CsvRow {
    let ssd = r.traffic_of(DeviceKind::Ssd);
    let nvram = r.traffic_of(DeviceKind::Nvram);
    let dram = r.traffic_of(DeviceKind::Dram);
    CsvRow {
        row: RowKind::Summary,
        measured_secs: Some(r.measured_secs),
        read_ops_per_sec: Some(r.ops_per_sec_of(OpKind::Read)),
        update_ops_per_sec: Some(r.ops_per_sec_of(OpKind::Update)),
        insert_ops_per_sec: Some(r.ops_per_sec_of(OpKind::Insert)),
        scan_ops_per_sec: Some(r.ops_per_sec_of(OpKind::Scan)),
        total_ops_per_sec: Some(r.total_ops_per_sec()),
        nvcache_hit_ratio: Some(r.nvcache_hit_ratio),
        dram_hit_ratio: Some(r.dram_hit_ratio),
        obp_mean: Some(r.obp_mean()),
        blocks_inserted: Some(r.blocks.blocks_inserted),
        blocks_removed: Some(r.blocks.blocks_removed),
        removed_by_invalidation: Some(r.blocks.removed_by_invalidation),
        removed_by_eviction: Some(r.blocks.removed_by_eviction),
        blocks_looked_up: Some(r.blocks.blocks_looked_up),
        removed_to_inserted_ratio: Some(r.removed_to_inserted_ratio()),
        bytes_admitted: Some(r.bytes_admitted),
        ssd_bytes_written: Some(ssd.bytes_written),
        ssd_bytes_read: Some(ssd.bytes_read),
        nvram_bytes_written: Some(nvram.bytes_written),
        nvram_bytes_read: Some(nvram.bytes_read),
        dram_bytes_written: Some(dram.bytes_written),
        dram_bytes_read: Some(dram.bytes_read),
        populate_blocks_written: Some(r.populate.blocks_written),
        populate_blocks_admitted: Some(r.populate.blocks_admitted),
        ..id
    }
}

pub fn csv_rows(r: &SimResult, scale: f64) -> Vec<CsvRow> {
    let id = identity(r, scale);
    let mut rows: Vec<CsvRow> = r.epochs.iter().map(|e| epoch_row(&id, e)).collect();
    rows.push(summary_row(id, r));
    rows
}

pub fn write_csv<W: Write>(w: W, r: &SimResult, scale: f64) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in csv_rows(r, scale) {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_csv_file(path: &Path, r: &SimResult, scale: f64) -> csv::Result<()> {
    write_csv(BufWriter::new(File::create(path)?), r, scale)
}

pub fn read_csv<R: Read>(r: R) -> csv::Result<Vec<CsvRow>> {
    csv::Reader::from_reader(r).deserialize().collect()
}

#[derive(Debug, thiserror::Error)]
pub enum SummaryError {
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: no summary row")]
    Missing { path: String },
    #[error("{path}: summary row lacks `{column}`")]
    Incomplete { path: String, column: &'static str },
}

/// Pulls the comparison inputs out of a run CSV.
pub fn read_summary(path: &Path) -> Result<RunSummary, SummaryError> {
    let name = path.display().to_string();
    let rows = File::open(path)
        .map_err(csv::Error::from)
        .and_then(read_csv)
        .map_err(|source| SummaryError::Csv {
            path: name.clone(),
            source,
        })?;
    let row = rows
        .into_iter()
        .rev()
        .find(|r| r.row == RowKind::Summary)
        .ok_or(SummaryError::Missing { path: name.clone() })?;
    let s = &row;
    let need = |v: Option<f64>, column| {
        v.ok_or(SummaryError::Incomplete {
            path: name.clone(),
            column,
        })
    };
    Ok(RunSummary {
        workload: row.workload.clone(),
        record_count: row.record_count,
        thread_count: row.threads,
        policy: row.policy.clone(),
        dram_bytes: row.dram_bytes,
        nvram_bytes: row.nvram_bytes,
        ops_per_sec: [
            need(s.read_ops_per_sec, "read_ops_per_sec")?,
            need(s.update_ops_per_sec, "update_ops_per_sec")?,
            need(s.insert_ops_per_sec, "insert_ops_per_sec")?,
            need(s.scan_ops_per_sec, "scan_ops_per_sec")?,
        ],
    })
}

#[derive(Debug, thiserror::Error)]
pub enum CompareFilesError {
    #[error(transparent)]
    Summary(#[from] SummaryError),
    #[error(transparent)]
    Compare(#[from] report::CompareError),
}

/// Labelled comparison rows for `baseline` followed by `others`.
pub fn compare_files(
    baseline: &Path,
    others: &[impl AsRef<Path>],
    cost_ratio: f64,
) -> Result<Vec<(String, ComparisonRow)>, CompareFilesError> {
    let paths: Vec<&Path> = std::iter::once(baseline)
        .chain(others.iter().map(AsRef::as_ref))
        .collect();
    let runs = paths
        .iter()
        .map(|p| read_summary(p))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = report::compare(&runs, 0, Some(cost_ratio))?;
    Ok(paths
        .iter()
        .map(|p| p.display().to_string())
        .zip(rows)
        .collect())
}

#[derive(Debug, Serialize)]
struct ComparisonCsvRow<'a> {
    run: &'a str,
    policy: &'a str,
    dram_bytes: u64,
    nvram_bytes: u64,
    read_ratio: Option<f64>,
    update_ratio: Option<f64>,
    insert_ratio: Option<f64>,
    scan_ratio: Option<f64>,
    total_ratio: Option<f64>,
    relative_cost: Option<f64>,
    perf_per_cost: Option<f64>,
}

pub fn write_comparison<W: Write>(w: W, rows: &[(String, ComparisonRow)]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for (run, r) in rows {
        out.serialize(ComparisonCsvRow {
            run,
            policy: &r.policy,
            dram_bytes: r.dram_bytes,
            nvram_bytes: r.nvram_bytes,
            read_ratio: r.ratio_of(OpKind::Read),
            update_ratio: r.ratio_of(OpKind::Update),
            insert_ratio: r.ratio_of(OpKind::Insert),
            scan_ratio: r.ratio_of(OpKind::Scan),
            total_ratio: r.total_ratio,
            relative_cost: r.relative_cost,
            perf_per_cost: r.perf_per_cost,
        })?;
    }
    out.flush()?;
    Ok(())
}

pub const DEFAULT_COST: f64 = DEFAULT_COST_RATIO;

fn gb(bytes: u64) -> f64 {
    bytes as f64 / 1e9
}

/// Human-readable digest of a run.
pub fn write_summary<W: Write>(mut w: W, r: &SimResult) -> io::Result<()> {
    let ssd = r.traffic_of(DeviceKind::Ssd);
    writeln!(
        w,
        "{} policy={} eviction={} dram={:.3}GB nvram={:.3}GB seed={}",
        r.workload,
        r.policy,
        r.eviction,
        gb(r.dram_bytes),
        gb(r.nvram_bytes),
        r.seed
    )?;
    write!(w, "  throughput {:.1} ops/s", r.total_ops_per_sec())?;
    for kind in OpKind::ALL {
        if r.ops_completed[kind.index()] > 0 {
            write!(w, "  {}={:.1}", kind, r.ops_per_sec_of(kind))?;
        }
    }
    writeln!(w, "  over {:.0}s", r.measured_secs)?;
    writeln!(
        w,
        "  hit ratio: nvcache {:.3}  dram {:.3}",
        r.nvcache_hit_ratio, r.dram_hit_ratio
    )?;
    writeln!(
        w,
        "  obp mean {:.4}  epochs above target+0.02: {:.1}%",
        r.obp_mean(),
        100.0 * r.obp_exceed_fraction(r.obp_target + 0.02)
    )?;
    writeln!(
        w,
        "  blocks inserted {}  removed {} ({} invalidated, {} evicted)  looked up {}",
        r.blocks.blocks_inserted,
        r.blocks.blocks_removed,
        r.blocks.removed_by_invalidation,
        r.blocks.removed_by_eviction,
        r.blocks.blocks_looked_up
    )?;
    writeln!(
        w,
        "  removed/inserted {:.3}  admitted {:.3}GB  ssd written {:.3}GB",
        r.removed_to_inserted_ratio(),
        gb(r.bytes_admitted),
        gb(ssd.bytes_written)
    )?;
    writeln!(
        w,
        "  populate: {} blocks written, {} admitted, {:.1}s",
        r.populate.blocks_written, r.populate.blocks_admitted, r.populate.virtual_secs
    )?;
    if !r.wall_runtime.is_zero() {
        writeln!(w, "  wall time {:.2?}", r.wall_runtime)?;
    }
    Ok(())
}
