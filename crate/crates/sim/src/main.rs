use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use bytesize::ByteSize;
use clap::{Args, Parser, Subcommand};
use nvcache::workload;
use nvcache::{AdmissionPolicy, EvictionMode};
use nvcache_sim::config::{RunOptions, FULL_DRAM_BYTES, FULL_NVRAM_BYTES};
use nvcache_sim::{output, runner};

/// Simulates an NVRAM block cache under a storage engine.
#[derive(Parser)]
#[command(name = "nvsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one workload and write a CSV of per-epoch and summary rows.
    Run(RunArgs),
    /// Compare run CSVs against a baseline run.
    Compare(CompareArgs),
    /// List the built-in workloads.
    Presets {
        #[arg(long, default_value_t = workload::DEFAULT_SCALE)]
        scale: f64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML file with any of the run settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset name or workload TOML file.
    #[arg(long)]
    workload: Option<String>,
    #[arg(long)]
    policy: Option<AdmissionPolicy>,
    #[arg(long)]
    obp_target: Option<f64>,
    /// DRAM cache size, e.g. 32M or 1.5G.
    #[arg(long)]
    dram: Option<ByteSize>,
    /// NVRAM cache size.
    #[arg(long)]
    nvram: Option<ByteSize>,
    #[arg(long)]
    eviction: Option<EvictionMode>,
    #[arg(long)]
    seed: Option<u64>,
    /// Dataset scale; also scales device bandwidth and default memory sizes.
    #[arg(long)]
    scale: Option<f64>,
    /// Measured run length in virtual seconds.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    warmup_fraction: Option<f64>,
    #[arg(long)]
    staleness: Option<f64>,
    #[arg(long)]
    scan_interval: Option<f64>,
    #[arg(long)]
    target_free: Option<f64>,
    /// Skip the populate phase and start with every record on disk.
    #[arg(long)]
    no_populate: bool,
    /// Write the dispatched operations to a trace file.
    #[arg(long, conflicts_with = "replay_trace")]
    record_trace: Option<PathBuf>,
    /// Run the operations from a trace file instead of generating them.
    #[arg(long)]
    replay_trace: Option<PathBuf>,
    /// CSV destination. Without it the CSV goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    baseline: PathBuf,
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    /// NVRAM price per byte relative to DRAM.
    #[arg(long, default_value_t = output::DEFAULT_COST)]
    cost_ratio: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn options(&self) -> RunOptions {
        RunOptions {
            workload: self.workload.clone(),
            policy: self.policy,
            obp_target: self.obp_target,
            dram: self.dram,
            nvram: self.nvram,
            eviction: self.eviction,
            seed: self.seed,
            scale: self.scale,
            duration_secs: self.duration,
            warmup_fraction: self.warmup_fraction,
            staleness_secs: self.staleness,
            scan_interval_secs: self.scan_interval,
            target_free_fraction: self.target_free,
            populate: self.no_populate.then_some(false),
            ..RunOptions::default()
        }
    }
}

type AnyError = Box<dyn std::error::Error>;

fn run(args: RunArgs) -> Result<(), AnyError> {
    let base = match &args.config {
        Some(path) => RunOptions::load(path)?,
        None => RunOptions::default(),
    };
    let opts = base.overlay(args.options());
    let cfg = opts.build()?;
    let result = match (&args.record_trace, &args.replay_trace) {
        (Some(path), _) => runner::record_to(&cfg, path)?,
        (None, Some(path)) => runner::replay_from(&cfg, path)?,
        (None, None) => runner::run(&cfg)?,
    };
    let scale = opts.scale();
    match &args.out {
        Some(path) => {
            output::write_csv_file(path, &result, scale)?;
            output::write_summary(io::stdout().lock(), &result)?;
        }
        None => {
            output::write_csv(io::stdout().lock(), &result, scale)?;
            output::write_summary(io::stderr().lock(), &result)?;
        }
    }
    Ok(())
}

fn compare(args: CompareArgs) -> Result<(), AnyError> {
    let rows = output::compare_files(&args.baseline, &args.runs, args.cost_ratio)?;
    match &args.out {
        Some(path) => output::write_comparison(std::fs::File::create(path)?, &rows)?,
        None => output::write_comparison(io::stdout().lock(), &rows)?,
    }
    Ok(())
}

fn presets(scale: f64) -> Result<(), AnyError> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(nvcache::ConfigError::InvalidScale(scale).into());
    }
    let mut out = io::stdout().lock();
    writeln!(
        out,
        "default memory at scale {scale}: dram {}  nvram {}",
        ByteSize((FULL_DRAM_BYTES as f64 * scale) as u64).display().si(),
        ByteSize((FULL_NVRAM_BYTES as f64 * scale) as u64).display().si()
    )?;
    for spec in workload::presets(scale) {
        let mix: Vec<String> = nvcache::OpKind::ALL
            .iter()
            .filter(|k| spec.op_mix.fraction(**k) > 0.0)
            .map(|k| format!("{}={}", k, spec.op_mix.fraction(*k)))
            .collect();
        writeln!(
            out,
            "{:<18} records={:<9} dataset={:<10} threads={:<3} keys={:?} mix=[{}]",
            spec.name,
            spec.record_count,
            ByteSize(spec.dataset_bytes()).display().si().to_string(),
            spec.thread_count,
            spec.key_distribution,
            mix.join(" ")
        )?;
    }
    Ok(())
}

fn is_broken_pipe(e: &(dyn std::error::Error + 'static)) -> bool {
    let io = e
        .downcast_ref::<io::Error>()
        .or_else(|| match e.downcast_ref::<csv::Error>()?.kind() {
            csv::ErrorKind::Io(io) => Some(io),
            _ => None,
        });
    io.is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Compare(args) => compare(args),
        Command::Presets { scale } => presets(scale),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(e.as_ref()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nvsim: {e}");
            ExitCode::FAILURE
        }
    }
}
