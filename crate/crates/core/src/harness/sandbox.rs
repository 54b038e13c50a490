//! Process-level execution of untrusted-but-benign benchmark code.
//!
//! No isolation beyond a scratch directory and a wall-clock limit.

use std::io::{self, Read, Write};
use std::process::{Command, Stdio};
use std::thread;
use std::time::Duration;

use wait_timeout::ChildExt;

pub const DEFAULT_INTERPRETER: &str = "python3";
pub const MAX_TIMEOUT_MS: u64 = 60_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SandboxOutput {
    pub stdout: String,
    pub stderr: String,
    /// -1 when the process was killed by a signal.
    pub exit_code: i32,
    pub timed_out: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum SandboxError {
    #[error("interpreter {0:?} not found")]
    InterpreterMissing(String),
    #[error("failed to run interpreter: {0}")]
    SpawnError(#[from] io::Error),
    #[error("timeout {0} ms exceeds the {MAX_TIMEOUT_MS} ms limit")]
    TimeoutTooLong(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sandbox {
    pub interpreter: String,
}

impl Default for Sandbox {
    fn default() -> Self {
        Sandbox::new(DEFAULT_INTERPRETER)
    }
}

fn drain(mut r: impl Read + Send + 'static) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = r.read_to_end(&mut buf);
        String::from_utf8_lossy(&buf).into_owned()
    })
}

impl Sandbox {
    pub fn new(interpreter: &str) -> Self {
        Sandbox {
            interpreter: interpreter.to_string(),
        }
    }

    /// Writes `code` to a scratch file and runs the interpreter on it.
    pub fn run(
        &self,
        code: &str,
        argv: &[String],
        stdin: &str,
        timeout_ms: u64,
    ) -> Result<SandboxOutput, SandboxError> {
        if timeout_ms > MAX_TIMEOUT_MS {
            return Err(SandboxError::TimeoutTooLong(timeout_ms));
        }
        let dir = tempfile::tempdir()?;
        let script = dir.path().join("main.py");
        std::fs::write(&script, code)?;

        let mut child = Command::new(&self.interpreter)
            .arg(&script)
            .args(argv)
            .current_dir(dir.path())
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| match e.kind() {
                io::ErrorKind::NotFound => SandboxError::InterpreterMissing(self.interpreter.clone()),
                _ => SandboxError::SpawnError(e),
            })?;

        let out = drain(child.stdout.take().expect("piped stdout"));
        let err = drain(child.stderr.take().expect("piped stderr"));
        let mut input = child.stdin.take().expect("piped stdin");
        let stdin = stdin.as_bytes().to_vec();
        // A program that never reads stdin closes the pipe; that is fine.
        let feeder = thread::spawn(move || {
            let _ = input.write_all(&stdin);
        });

        let status = match child.wait_timeout(Duration::from_millis(timeout_ms))? {
            Some(status) => Some(status),
            None => {
                let _ = child.kill();
                child.wait()?;
                None
            }
        };
        let _ = feeder.join();
        Ok(SandboxOutput {
            stdout: out.join().unwrap_or_default(),
            stderr: err.join().unwrap_or_default(),
            exit_code: status.and_then(|s| s.code()).unwrap_or(-1),
            timed_out: status.is_none(),
        })
    }
}
