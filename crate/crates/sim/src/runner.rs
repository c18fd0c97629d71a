//! Timed runs, with optional trace recording or replay.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::time::Instant;

use nvcache::sim::{self, Dispatch, SimError, SimResult};
use nvcache::workload::{OpGenerator, ReplaySource};
use nvcache::SimConfig;

use crate::trace::{self, TraceError};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("trace: {0}")]
    Trace(#[from] TraceError),
}

/// Runs the generated workload, returning the dispatch log alongside.
pub fn run_recording(cfg: &SimConfig) -> Result<(SimResult, Vec<Dispatch>), RunError> {
    let started = Instant::now();
    let mut source = OpGenerator::new(&cfg.workload, cfg.seed).map_err(SimError::from)?;
    let mut log = Vec::new();
    let mut result = sim::run_with_source(cfg, &mut source, |d| log.push(*d))?;
    result.wall_runtime = started.elapsed();
    Ok((result, log))
}

pub fn run(cfg: &SimConfig) -> Result<SimResult, RunError> {
    let started = Instant::now();
    let mut result = sim::run(cfg)?;
    result.wall_runtime = started.elapsed();
    Ok(result)
}

/// Feeds recorded operations back in dispatch order. Threads pick them up
/// as they become free, so under a different configuration the same
/// operations may land on different threads and times.
pub fn run_replay(cfg: &SimConfig, ops: &[Dispatch]) -> Result<SimResult, RunError> {
    let started = Instant::now();
    let mut source = ReplaySource::new(ops.iter().map(|d| d.op));
    let mut result = sim::run_with_source(cfg, &mut source, |_| {})?;
    result.wall_runtime = started.elapsed();
    Ok(result)
}

pub fn record_to(cfg: &SimConfig, path: &Path) -> Result<SimResult, RunError> {
    let (result, log) = run_recording(cfg)?;
    let file = File::create(path).map_err(TraceError::from)?;
    trace::write_trace(BufWriter::new(file), &log).map_err(TraceError::from)?;
    Ok(result)
}

pub fn replay_from(cfg: &SimConfig, path: &Path) -> Result<SimResult, RunError> {
    let file = File::open(path).map_err(TraceError::from)?;
    let ops = trace::read_trace(BufReader::new(file))?;
    run_replay(cfg, &ops)
}
