//! Verdicts for each task kind.

use serde::Serialize;

use super::extract::Extracted;
use super::sandbox::{Sandbox, SandboxError};
use super::tasks::TaskInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Correct,
    Incorrect,
    JudgeError,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Judgement {
    pub verdict: Verdict,
    pub rank_of_truth: Option<usize>,
    /// Why a verdict was not Correct, when there is something useful to say.
    pub detail: Option<String>,
}

impl Judgement {
    fn of(verdict: Verdict) -> Self {
        Judgement {
            verdict,
            rank_of_truth: None,
            detail: None,
        }
    }

    fn error(detail: impl ToString) -> Self {
        Judgement {
            verdict: Verdict::JudgeError,
            rank_of_truth: None,
            detail: Some(detail.to_string()),
        }
    }
}

pub const DEFAULT_JUDGE_TIMEOUT_MS: u64 = 10_000;

/// Interpreter plus the per-process time limit for judge executions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JudgeEnv {
    pub sandbox: Sandbox,
    pub timeout_ms: u64,
}

impl Default for JudgeEnv {
    fn default() -> Self {
        JudgeEnv {
            sandbox: Sandbox::default(),
            timeout_ms: DEFAULT_JUDGE_TIMEOUT_MS,
        }
    }
}

/// Trims and collapses internal whitespace runs to one space.
pub fn normalize(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Ground truth is the line at `buggy_line_no`; a candidate is right only if
/// its text matches that line.
pub fn judge_fault_loc(instance: &TaskInstance, extracted: &Extracted) -> Judgement {
    let Some(truth) = instance
        .buggy_line_no
        .and_then(|n| instance.code.lines().nth(n as usize - 1))
    else {
        return Judgement::error("buggy_line_no does not name a line of the code");
    };
    let truth = normalize(truth);
    let first_match = extracted
        .candidates()
        .iter()
        .position(|c| normalize(c) == truth)
        .map(|i| i + 1);
    // A lone answer is a ranking of length one.
    Judgement {
        verdict: if first_match == Some(1) {
            Verdict::Correct
        } else {
            Verdict::Incorrect
        },
        rank_of_truth: first_match,
        detail: None,
    }
}

fn single(extracted: &Extracted) -> &str {
    match extracted {
        Extracted::Single(s) => s,
        Extracted::Ranked(v) => v.first().map_or("", String::as_str),
    }
}

const LITERAL_CHECKER: &str = "\
import ast
import sys
try:
    left = ast.literal_eval(sys.argv[1])
    right = ast.literal_eval(sys.argv[2])
except Exception:
    sys.exit(3)
sys.exit(0 if left == right else 1)
";

/// Value equality of two Python literals, or `None` when either side is not
/// a literal.
pub fn literal_equal(env: &JudgeEnv, a: &str, b: &str) -> Result<Option<bool>, SandboxError> {
    let out = env.sandbox.run(
        LITERAL_CHECKER,
        &[a.trim().to_string(), b.trim().to_string()],
        "",
        env.timeout_ms,
    )?;
    Ok(match (out.timed_out, out.exit_code) {
        (false, 0) => Some(true),
        (false, 1) => Some(false),
        _ => None,
    })
}

pub fn judge_output_pred(env: &JudgeEnv, instance: &TaskInstance, extracted: &Extracted) -> Judgement {
    let expected = instance.expected_output.as_deref().unwrap_or_default();
    let candidate = single(extracted);
    match literal_equal(env, candidate, expected) {
        Ok(Some(true)) => Judgement::of(Verdict::Correct),
        Ok(Some(false)) => Judgement::of(Verdict::Incorrect),
        Ok(None) => Judgement::of(if normalize(candidate) == normalize(expected) {
            Verdict::Correct
        } else {
            Verdict::Incorrect
        }),
        Err(e) => Judgement::error(e),
    }
}

pub fn judge_input_pred(env: &JudgeEnv, instance: &TaskInstance, extracted: &Extracted) -> Judgement {
    let expected = instance.expected_output.as_deref().unwrap_or_default();
    let script = format!(
        "{}\nassert f({}) == {}\n",
        instance.code.trim_end(),
        single(extracted).trim(),
        expected.trim()
    );
    match env.sandbox.run(&script, &[], "", env.timeout_ms) {
        Ok(out) if !out.timed_out && out.exit_code == 0 => Judgement::of(Verdict::Correct),
        Ok(out) => Judgement {
            verdict: Verdict::Incorrect,
            rank_of_truth: None,
            detail: out.stderr.lines().last().map(str::to_string),
        },
        Err(e) => Judgement::error(e),
    }
}

/// Correct only when every test case passes.
pub fn judge_repair(env: &JudgeEnv, instance: &TaskInstance, program: &str) -> Judgement {
    let cases = instance.test_cases.as_deref().unwrap_or_default();
    for (i, case) in cases.iter().enumerate() {
        let out = match env.sandbox.run(program, &[], &case.input, env.timeout_ms) {
            Ok(out) => out,
            Err(e) => return Judgement::error(e),
        };
        let failure = if out.timed_out {
            Some("timed out".to_string())
        } else if out.exit_code != 0 {
            Some(format!("exit code {}", out.exit_code))
        } else if out.stdout.trim_end() != case.expected.trim_end() {
            Some("wrong output".to_string())
        } else {
            None
        };
        if let Some(why) = failure {
            return Judgement {
                verdict: Verdict::Incorrect,
                rank_of_truth: None,
                detail: Some(format!("test case {}: {why}", i + 1)),
            };
        }
    }
    Judgement::of(Verdict::Correct)
}
