//! Line tracing of a program under the reference interpreter.

use serde::Deserialize;

use super::sandbox::{Sandbox, SandboxError};

const SHIM: &str = include_str!("trace_shim.py");

/// Name the tracer reports for top-level code.
pub const MODULE_FRAME: &str = "<module>";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Activation {
    /// Function name, or [`MODULE_FRAME`].
    pub function: String,
    pub lines: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    /// Every line event in execution order, across all activations.
    pub lines: Vec<u32>,
    /// The same events split per frame activation, in order of first event.
    pub activations: Vec<Activation>,
    /// Uncaught exception, if the program raised one.
    pub error: Option<String>,
    /// The program left through `sys.exit` (with any status).
    pub exited: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
    #[error("program did not finish within the time limit")]
    TimedOut,
    #[error("unreadable tracer output: {0}")]
    TraceParseError(String),
}

#[derive(Deserialize)]
struct RawTrace {
    events: Vec<(u64, String, u32)>,
    error: Option<String>,
    exited: bool,
}

/// Runs `code` under the tracer. `calls` are extra statements executed after
/// the module body in the same namespace (to drive a function under test);
/// they are not traced themselves.
pub fn trace_lines(
    sandbox: &Sandbox,
    code: &str,
    calls: &[String],
    timeout_ms: u64,
) -> Result<Trace, TraceError> {
    let out = sandbox.run(SHIM, calls, code, timeout_ms)?;
    if out.timed_out {
        return Err(TraceError::TimedOut);
    }
    let raw: RawTrace = serde_json::from_str(&out.stdout).map_err(|e| {
        TraceError::TraceParseError(format!("{e}; stderr: {}", out.stderr.trim()))
    })?;

    let mut activations: Vec<(u64, Activation)> = Vec::new();
    for (id, function, line) in &raw.events {
        match activations.iter_mut().find(|(a, _)| a == id) {
            Some((_, act)) => act.lines.push(*line),
            None => activations.push((
                *id,
                Activation {
                    function: function.clone(),
                    lines: vec![*line],
                },
            )),
        }
    }
    Ok(Trace {
        lines: raw.events.iter().map(|e| e.2).collect(),
        activations: activations.into_iter().map(|(_, a)| a).collect(),
        error: raw.error,
        exited: raw.exited,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(code: &str, calls: &[&str]) -> Trace {
        let calls: Vec<String> = calls.iter().map(|s| s.to_string()).collect();
        trace_lines(&Sandbox::default(), code, &calls, 5000).unwrap()
    }

    #[test]
    fn straight_line() {
        assert_eq!(trace("x = 1\ny = 2", &[]).lines, vec![1, 2]);
    }

    #[test]
    fn loop_header_revisits() {
        // Checked against python3 directly: the header is re-entered once per
        // iteration plus once more on exhaustion.
        assert_eq!(trace("for i in range(2):\n    pass", &[]).lines, vec![1, 2, 1, 2, 1]);
    }

    #[test]
    fn error_is_reported_with_partial_trace() {
        let t = trace("x = 1\ny = 1 / 0\nz = 3", &[]);
        assert_eq!(t.lines, vec![1, 2]);
        assert!(t.error.unwrap().starts_with("ZeroDivisionError"));
    }

    #[test]
    fn output_does_not_corrupt_trace() {
        let t = trace("print('{\"events\": []}')\nimport sys\nsys.exit(0)", &[]);
        assert_eq!(t.lines, vec![1, 2, 3]);
        assert_eq!((t.error, t.exited), (None, true));
    }

    #[test]
    fn activations_and_comprehensions() {
        let code = "def f(n):\n    xs = [i for i in range(n)]\n    if n > 0:\n        return f(n - 1)\n    return 0\n";
        let t = trace(code, &["f(1)"]);
        let acts: Vec<(&str, &[u32])> =
            t.activations.iter().map(|a| (a.function.as_str(), a.lines.as_slice())).collect();
        assert_eq!(
            acts,
            vec![("<module>", &[1][..]), ("f", &[2, 3, 4][..]), ("f", &[2, 3, 5][..])]
        );
    }

    #[test]
    fn timeout() {
        let r = trace_lines(&Sandbox::default(), "while True:\n    pass", &[], 300);
        assert!(matches!(r, Err(TraceError::TimedOut)));
    }
}
