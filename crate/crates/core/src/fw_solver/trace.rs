//! Per-iteration trace rows and their CSV form.

use std::fmt;
use std::io::Write;

use crate::error::Result;

/// How an iterate was produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Branch {
    /// Frank-Wolfe step with `α < 1`.
    Interior,
    /// Frank-Wolfe step with `α = 1`.
    Full,
    /// Away step that keeps the away vertex in the active set.
    Away,
    /// Away step that removes the away vertex.
    Drop,
    /// Baseline step taken with the given smoothness parameter.
    Smoothness(f64),
    /// Multiplicative EM update.
    Em,
    /// Last row; no step was taken.
    Final,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Branch::Interior => f.write_str("interior"),
            Branch::Full => f.write_str("full"),
            Branch::Away => f.write_str("away"),
            Branch::Drop => f.write_str("drop"),
            Branch::Smoothness(l) => write!(f, "L={}", fmt_float(*l)),
            Branch::Em => f.write_str("em"),
            Branch::Final => f.write_str("final"),
        }
    }
}

/// Row `k`: the iterate `x^k`, its gap and local distance, and the step
/// that leads to `x^{k+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    pub objective: f64,
    pub gap: f64,
    pub dist: f64,
    pub alpha: f64,
    pub branch: Branch,
    pub elapsed_ms: f64,
}

pub const TRACE_HEADER: &str = "k,F,G,D,alpha,branch,elapsed_ms";
pub const DUAL_TRACE_HEADER: &str = "k,d,Gbar,gamma,elapsed_ms";

/// 17 significant digits, which round-trips every `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_trace_csv<W: Write>(mut out: W, rows: &[TraceRecord]) -> Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.k,
            fmt_float(r.objective),
            fmt_float(r.gap),
            fmt_float(r.dist),
            fmt_float(r.alpha),
            r.branch,
            fmt_float(r.elapsed_ms)
        )?;
    }
    Ok(())
}

pub fn trace_csv_string(rows: &[TraceRecord]) -> String {
    let mut buf = Vec::new();
    write_trace_csv(&mut buf, rows).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("CSV output is ASCII")
}

/// Row of a mirror-descent run on the dual problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DualTraceRecord {
    pub k: usize,
    pub dual_value: f64,
    pub gap: f64,
    pub gamma: f64,
    pub elapsed_ms: f64,
}

pub fn write_dual_trace_csv<W: Write>(mut out: W, rows: &[DualTraceRecord]) -> Result<()> {
    writeln!(out, "{DUAL_TRACE_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.k,
            fmt_float(r.dual_value),
            fmt_float(r.gap),
            fmt_float(r.gamma),
            fmt_float(r.elapsed_ms)
        )?;
    }
    Ok(())
}
