//! Trace containment: every transfer the interpreter actually makes between
//! two statements must be an edge of the CFG.
//!
//! Function programs are driven by `# oracle-call: <expr>` comment lines,
//! each executed after the module body.

use std::fmt;
use std::path::{Path, PathBuf};

use crate::cfg::{BuildError, Cfg, NodeId};
use crate::harness::{trace_lines, Sandbox, Trace, TraceError};
use crate::program::{parse_program, SourceProgram, Target};

pub const CALL_DIRECTIVE: &str = "# oracle-call:";
pub const DEFAULT_TIMEOUT_MS: u64 = 5_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ContainmentFailure {
    #[error("executed line {from_line} -> line {to_line}, but the CFG has no such edge")]
    MissingEdge { from_line: u32, to_line: u32 },
    #[error("execution started at line {line}, which is not the CFG entry")]
    WrongEntry { line: u32 },
    #[error("execution finished after line {line}, which the CFG cannot leave")]
    NoExit { line: u32 },
    #[error("the target code never ran")]
    NotExecuted,
}

pub fn call_directives(source: &str) -> Vec<String> {
    source
        .lines()
        .filter_map(|l| l.trim().strip_prefix(CALL_DIRECTIVE))
        .map(|c| c.trim().to_string())
        .filter(|c| !c.is_empty())
        .collect()
}

/// Per activation of the target frame: executed statement lines, with
/// continuation lines folded onto their statement and non-executable lines
/// dropped.
pub fn executed_statements(program: &SourceProgram, trace: &Trace) -> Vec<Vec<u32>> {
    let frame = match &program.target {
        Target::ModuleBody => crate::harness::trace::MODULE_FRAME,
        Target::FunctionBody(name) => name.as_str(),
    };
    let starts = program.statement_starts();
    trace
        .activations
        .iter()
        .filter(|a| a.function == frame)
        .map(|a| {
            let mut seq: Vec<u32> = Vec::new();
            for &line in &a.lines {
                let Some(Some(first)) = starts.get(line as usize) else { continue };
                if !program.line(*first).is_some_and(|l| l.is_executable) {
                    continue;
                }
                if seq.last() != Some(first) {
                    seq.push(*first);
                }
            }
            seq
        })
        .filter(|s| !s.is_empty())
        .collect()
}

fn can_finish(cfg: &Cfg, id: &NodeId) -> bool {
    cfg.exits.iter().any(|e| &e.from == id) || cfg.outgoing(id).next().is_none()
}

pub fn check_containment(
    program: &SourceProgram,
    cfg: &Cfg,
    trace: &Trace,
) -> Result<(), ContainmentFailure> {
    let runs = executed_statements(program, trace);
    if runs.is_empty() {
        return Err(ContainmentFailure::NotExecuted);
    }
    let node = |line: u32| cfg.line_to_node(line).ok();
    for run in &runs {
        if node(run[0]).as_ref() != Some(&cfg.entry) {
            return Err(ContainmentFailure::WrongEntry { line: run[0] });
        }
        for pair in run.windows(2) {
            let linked = match (node(pair[0]), node(pair[1])) {
                (Some(a), Some(b)) => cfg.has_edge(&a, &b),
                _ => false,
            };
            if !linked {
                return Err(ContainmentFailure::MissingEdge {
                    from_line: pair[0],
                    to_line: pair[1],
                });
            }
        }
        // Exceptions and interpreter exits unwind every activation, so only
        // clean runs must end somewhere the graph can end.
        let last = *run.last().expect("runs are non-empty");
        if trace.error.is_none() && !trace.exited && !node(last).is_some_and(|id| can_finish(cfg, &id)) {
            return Err(ContainmentFailure::NoExit { line: last });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleStatus {
    Pass,
    Fail(String),
    Skip(String),
}

impl fmt::Display for OracleStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleStatus::Pass => f.write_str("PASS"),
            OracleStatus::Fail(why) => write!(f, "FAIL {why}"),
            OracleStatus::Skip(why) => write!(f, "SKIP {why}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileResult {
    pub path: PathBuf,
    pub status: OracleStatus,
}

/// Builder under test; [`crate::build_cfg`] in normal use.
pub type Builder<'a> = &'a dyn Fn(&SourceProgram) -> Result<Cfg, BuildError>;

pub fn check_source(source: &str, sandbox: &Sandbox, builder: Builder<'_>, timeout_ms: u64) -> OracleStatus {
    let program = match parse_program(source) {
        Ok(p) => p,
        Err(e) => return OracleStatus::Fail(format!("parse error: {e}")),
    };
    let cfg = match builder(&program) {
        Ok(c) => c,
        Err(e @ BuildError::UnsupportedConstruct { .. }) => return OracleStatus::Skip(e.to_string()),
    };
    if let Some(v) = cfg.validate().first() {
        return OracleStatus::Fail(format!("invalid CFG: {v}"));
    }
    let calls = call_directives(source);
    if matches!(program.target, Target::FunctionBody(_)) && calls.is_empty() {
        return OracleStatus::Skip("function program without an oracle-call directive".into());
    }
    let trace = match trace_lines(sandbox, source, &calls, timeout_ms) {
        Ok(t) => t,
        Err(TraceError::TimedOut) => return OracleStatus::Fail("timed out".into()),
        Err(e) => return OracleStatus::Fail(e.to_string()),
    };
    match check_containment(&program, &cfg, &trace) {
        Ok(()) => OracleStatus::Pass,
        Err(e) => OracleStatus::Fail(e.to_string()),
    }
}

/// Checks every `.py` file directly inside `dir`, in file-name order.
pub fn run_corpus(
    dir: &Path,
    sandbox: &Sandbox,
    builder: Builder<'_>,
    timeout_ms: u64,
) -> std::io::Result<Vec<FileResult>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e == "py"));
    files.sort();
    let mut results = Vec::with_capacity(files.len());
    for path in files {
        let status = match std::fs::read_to_string(&path) {
            Ok(source) => check_source(&source, sandbox, builder, timeout_ms),
            Err(e) => OracleStatus::Fail(format!("cannot read: {e}")),
        };
        results.push(FileResult { path, status });
    }
    Ok(results)
}
