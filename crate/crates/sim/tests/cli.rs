use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nvcache_sim::output::{self, RowKind};
use nvcache_sim::trace;

fn nvsim(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nvsim"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn nvsim")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "nvsim failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

const RUN: &[&str] = &["run", "--workload", "ycsb-a", "--scale", "0.001", "--duration", "30"];

#[test]
fn run_writes_epochs_then_summary() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = RUN.to_vec();
    args.extend(["--policy", "obp", "--dram", "32M", "--nvram", "150M", "--out", "a.csv"]);
    let stdout = ok(&nvsim(&args, dir.path()));
    assert!(stdout.contains("throughput"));

    let rows = output::read_csv(fs::File::open(dir.path().join("a.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 31);
    let (summary, epochs) = rows.split_last().unwrap();
    assert!(epochs.iter().all(|r| r.row == RowKind::Epoch));
    assert_eq!(summary.row, RowKind::Summary);
    assert_eq!(summary.dram_bytes, 32_000_000);
    assert_eq!(summary.nvram_bytes, 150_000_000);
    assert_eq!(summary.policy, "obp");
}

#[test]
fn csv_goes_to_stdout_without_out() {
    let dir = tempfile::tempdir().unwrap();
    let out = nvsim(RUN, dir.path());
    let stdout = ok(&out);
    assert!(stdout.starts_with("row,workload,"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("hit ratio"));
}

#[test]
fn identical_runs_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.csv", "b.csv"] {
        let mut args = RUN.to_vec();
        args.extend(["--seed", "11", "--out", name]);
        ok(&nvsim(&args, dir.path()));
    }
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    let b = fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn compare_against_baseline() {
    let dir = tempfile::tempdir().unwrap();
    for (policy, name) in [("disabled", "base.csv"), ("obp", "obp.csv")] {
        let mut args = RUN.to_vec();
        args.extend(["--policy", policy, "--out", name]);
        ok(&nvsim(&args, dir.path()));
    }
    let table = ok(&nvsim(
        &["compare", "--baseline", "base.csv", "obp.csv", "--cost-ratio", "0.38"],
        dir.path(),
    ));
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("run,policy,"));
    assert!(lines[1].starts_with("base.csv,disabled,"));
    assert!(lines[2].starts_with("obp.csv,obp,"));
}

#[test]
fn compare_refuses_other_workloads() {
    let dir = tempfile::tempdir().unwrap();
    for (workload, name) in [("ycsb-a", "a.csv"), ("ycsb-c", "c.csv")] {
        ok(&nvsim(
            &["run", "--workload", workload, "--duration", "5", "--out", name],
            dir.path(),
        ));
    }
    let out = nvsim(&["compare", "--baseline", "a.csv", "c.csv"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("workload"));
}

#[test]
fn config_file_and_flags_merge() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.toml"),
        "workload = \"ycsb-c\"\npolicy = \"nowrite\"\ndram = \"16M\"\nduration_secs = 5.0\n",
    )
    .unwrap();
    ok(&nvsim(
        &["run", "--config", "run.toml", "--dram", "20M", "--out", "r.csv"],
        dir.path(),
    ));
    let rows = output::read_csv(fs::File::open(dir.path().join("r.csv")).unwrap()).unwrap();
    let s = rows.last().unwrap();
    assert_eq!(s.workload, "ycsb-c");
    assert_eq!(s.policy, "nowrite");
    assert_eq!(s.dram_bytes, 20_000_000);
}

#[test]
fn workload_file_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("w.toml"),
        "name = \"mine\"\nthread_count = 4\ndataset_size = \"8M\"\nduration_secs = 5.0\n\
         key_distribution = { kind = \"uniform\" }\n[op_mix]\nread = 1.0\n",
    )
    .unwrap();
    let stdout = ok(&nvsim(&["run", "--workload", "w.toml"], dir.path()));
    assert!(stdout.lines().last().unwrap().starts_with("summary,mine,"));
}

#[test]
fn bad_arguments_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["run", "--workload", "no-such-preset"][..],
        &["run", "--policy", "sometimes"],
        &["run", "--dram", "lots"],
        &["run", "--obp-target", "-1"],
        &["compare", "--baseline", "missing.csv", "other.csv"],
    ] {
        let out = nvsim(args, dir.path());
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn presets_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&nvsim(&["presets"], dir.path()));
    for name in ["ycsb-a", "ycsb-e", "read-only-large", "update-only"] {
        assert!(stdout.contains(name), "{name}");
    }
}

#[test]
fn recorded_trace_replays_under_another_policy() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = RUN.to_vec();
    args.extend(["--policy", "obp", "--record-trace", "t.trace", "--out", "rec.csv"]);
    ok(&nvsim(&args, dir.path()));

    let mut args = RUN.to_vec();
    args.extend(["--policy", "always", "--replay-trace", "t.trace", "--out", "rep.csv"]);
    ok(&nvsim(&args, dir.path()));

    let recorded = trace::read_trace(fs::read(dir.path().join("t.trace")).unwrap().as_slice()).unwrap();
    assert!(!recorded.is_empty());
    let summary = |name: &str| {
        output::read_csv(fs::File::open(dir.path().join(name)).unwrap())
            .unwrap()
            .pop()
            .unwrap()
    };
    let (rec, rep) = (summary("rec.csv"), summary("rep.csv"));
    assert_ne!(rec.blocks_inserted, rep.blocks_inserted);
}

#[test]
fn truncated_trace_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("t.trace"), "# nvcache-trace v1 ops=5\n1.0 0 read 1\n").unwrap();
    let mut args = RUN.to_vec();
    args.extend(["--replay-trace", "t.trace"]);
    let out = nvsim(&args, dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("1 of 5"));
}
