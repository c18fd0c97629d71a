//! Operation traces.
//!
//! A trace is line-oriented text. The first line is a header carrying the
//! number of operations, so a file cut short is detected rather than
//! silently replayed as a shorter run:
//!
//! ```text
//! # nvcache-trace v1 ops=3
//! 61.000000000 0 read 17
//! 61.000000000 1 update 4
//! 61.000614400 0 read 903
//! ```
//!
//! Fields are virtual dispatch time in seconds, thread index, operation kind
//! and key.

use std::io::{self, BufRead, Write};

use nvcache::sim::Dispatch;
use nvcache::{Op, OpKind, VirtualInstant};

const MAGIC: &str = "# nvcache-trace v1";

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: trace ends after {found} of {expected} operations")]
    Truncated {
        line: usize,
        expected: u64,
        found: u64,
    },
}

fn parse_err(line: usize, reason: impl Into<String>) -> TraceError {
    TraceError::Parse {
        line,
        reason: reason.into(),
    }
}

pub fn write_trace<W: Write>(mut w: W, ops: &[Dispatch]) -> io::Result<()> {
    writeln!(w, "{MAGIC} ops={}", ops.len())?;
    for d in ops {
        writeln!(w, "{} {} {} {}", d.at, d.thread, d.op.kind, d.op.key)?;
    }
    w.flush()
}

fn parse_instant(s: &str) -> Option<VirtualInstant> {
    let (secs, frac) = s.split_once('.').unwrap_or((s, ""));
    if frac.len() > 9 || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let secs: u64 = secs.parse().ok()?;
    let mut nanos: u64 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
    for _ in frac.len()..9 {
        nanos *= 10;
    }
    secs.checked_mul(1_000_000_000)?
        .checked_add(nanos)
        .map(VirtualInstant::from_nanos)
}

fn parse_line(text: &str, line: usize) -> Result<Dispatch, TraceError> {
    let fields: Vec<&str> = text.split_whitespace().collect();
    let [at, thread, kind, key] = fields[..] else {
        return Err(parse_err(
            line,
            format!("expected 4 fields, found {}", fields.len()),
        ));
    };
    let at = parse_instant(at).ok_or_else(|| parse_err(line, format!("bad timestamp `{at}`")))?;
    let thread = thread
        .parse()
        .map_err(|_| parse_err(line, format!("bad thread `{thread}`")))?;
    let kind: OpKind = kind
        .parse()
        .map_err(|_| parse_err(line, format!("unknown operation `{kind}`")))?;
    let key = key
        .parse()
        .map_err(|_| parse_err(line, format!("bad key `{key}`")))?;
    Ok(Dispatch {
        at,
        thread,
        op: Op { kind, key },
    })
}

pub fn read_trace<R: BufRead>(r: R) -> Result<Vec<Dispatch>, TraceError> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| parse_err(1, "empty trace"))?;
    let expected: u64 = header
        .strip_prefix(MAGIC)
        .and_then(|rest| rest.trim().strip_prefix("ops="))
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| parse_err(1, format!("expected `{MAGIC} ops=<n>` header")))?;

    let mut ops = Vec::with_capacity(expected.min(1 << 20) as usize);
    let mut line_no = 1;
    for text in lines {
        let text = text?;
        line_no += 1;
        if text.trim().is_empty() {
            continue;
        }
        if ops.len() as u64 == expected {
            return Err(parse_err(line_no, "more operations than the header declares"));
        }
        ops.push(parse_line(&text, line_no)?);
    }
    if (ops.len() as u64) < expected {
        return Err(TraceError::Truncated {
            line: line_no + 1,
            expected,
            found: ops.len() as u64,
        });
    }
    Ok(ops)
}
