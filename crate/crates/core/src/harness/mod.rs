//! Task loading, sandboxed judging, line tracing and the evaluation loop.

pub mod extract;
pub mod judge;
pub mod run;
pub mod sandbox;
pub mod tasks;
pub mod trace;

pub use extract::{extract_answer, ExtractError, Extracted};
pub use judge::{
    judge_fault_loc, judge_input_pred, judge_output_pred, judge_repair, normalize, JudgeEnv,
    Judgement, Verdict,
};
pub use run::{
    acc_at_k, pass_at_1, run_eval, EvalConfig, EvalError, EvalMode, MetricReport, RunRecord,
    UnknownMode, ACC_KS,
};
pub use sandbox::{Sandbox, SandboxError, SandboxOutput};
pub use tasks::{load_tasks, parse_tasks, LoadError, TaskInstance, TaskKind, TestCase};
pub use trace::{trace_lines, Activation, Trace, TraceError};
