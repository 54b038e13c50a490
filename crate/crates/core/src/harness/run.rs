//! The evaluation loop and its report.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::Serialize;
use serde_json::value::RawValue;

use super::extract::{extract_answer, Extracted};
use super::judge::{
    judge_fault_loc, judge_input_pred, judge_output_pred, judge_repair, JudgeEnv, Verdict,
};
use super::tasks::{TaskInstance, TaskKind};
use crate::emit::to_svg;
use crate::gateway::{GatewayError, ModelProvider, ModelRequest, RequestSettings};
use crate::prompt::{
    render_cruxeval_prompt, render_cruxeval_prompt_ref, render_prompt_for, run_two_stage,
    Direction, Image, Objective, PromptBundle, PromptMode, TwoStageCause,
};
use crate::{build_cfg, parse_program};

/// The experimental settings selectable for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EvalMode {
    Plain,
    PlainCot,
    Cfg,
    CfgCot,
    VisualCoder,
    MMCot,
    MMCotRef,
}

impl EvalMode {
    pub const ALL: [EvalMode; 7] = [
        EvalMode::Plain,
        EvalMode::PlainCot,
        EvalMode::Cfg,
        EvalMode::CfgCot,
        EvalMode::VisualCoder,
        EvalMode::MMCot,
        EvalMode::MMCotRef,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EvalMode::Plain => "plain",
            EvalMode::PlainCot => "plain-cot",
            EvalMode::Cfg => "cfg",
            EvalMode::CfgCot => "cfg-cot",
            EvalMode::VisualCoder => "visualcoder",
            EvalMode::MMCot => "mmcot",
            EvalMode::MMCotRef => "mmcot-ref",
        }
    }

    pub fn needs_cfg(self) -> bool {
        !matches!(self, EvalMode::Plain | EvalMode::PlainCot)
    }

    /// Single-call prompt mode for line-level tasks; `None` for the two-stage modes.
    pub fn prompt_mode(self) -> Option<PromptMode> {
        match self {
            EvalMode::Plain => Some(PromptMode::PlainNoCot),
            EvalMode::PlainCot => Some(PromptMode::PlainCot),
            EvalMode::Cfg => Some(PromptMode::CfgNoCot),
            EvalMode::CfgCot => Some(PromptMode::CfgCot),
            EvalMode::VisualCoder => Some(PromptMode::VisualCoder),
            EvalMode::MMCot | EvalMode::MMCotRef => None,
        }
    }

    pub fn supports(self, kind: TaskKind) -> bool {
        self.prompt_mode().is_some() || matches!(kind, TaskKind::FaultLoc | TaskKind::Repair)
    }
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown mode {0:?} (expected one of plain, plain-cot, cfg, cfg-cot, visualcoder, mmcot, mmcot-ref)")]
pub struct UnknownMode(pub String);

impl FromStr for EvalMode {
    type Err = UnknownMode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EvalMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| UnknownMode(s.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub mode: EvalMode,
    /// Ask fault-localization prompts for a top-10 list and report acc@k.
    pub ranked: bool,
    pub settings: RequestSettings,
    pub concurrency: usize,
    /// Count judge errors as incorrect (the default) instead of dropping them
    /// from the denominator.
    pub strict: bool,
    pub judge: JudgeEnv,
}

impl EvalConfig {
    pub fn new(mode: EvalMode, settings: RequestSettings) -> Self {
        EvalConfig {
            mode,
            ranked: false,
            settings,
            concurrency: 1,
            strict: true,
            judge: JudgeEnv::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("mode {mode} cannot run {kind} task {id}")]
    IncompatibleMode { mode: EvalMode, kind: TaskKind, id: String },
    #[error("concurrency must be at least 1")]
    BadConcurrency,
    #[error("provider unusable: {0}")]
    Provider(GatewayError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunRecord {
    pub instance_id: String,
    pub kind: TaskKind,
    pub mode: PromptMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
    pub raw_response: String,
    pub extracted: Option<Extracted>,
    pub verdict: Verdict,
    pub rank_of_truth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    /// Not serialized: timing would make reports irreproducible.
    #[serde(skip)]
    pub wall_ms: u64,
}

pub const ACC_KS: [usize; 3] = [1, 4, 10];

/// Number of instances whose truth rank is within the top `k`.
pub fn acc_at_k(ranks: &[Option<usize>], k: usize) -> usize {
    ranks.iter().filter(|r| r.is_some_and(|r| r <= k)).count()
}

/// Fraction correct. Without `strict`, judge errors leave the denominator.
pub fn pass_at_1(verdicts: &[Verdict], strict: bool) -> f64 {
    let correct = verdicts.iter().filter(|v| **v == Verdict::Correct).count();
    let errors = verdicts.iter().filter(|v| **v == Verdict::JudgeError).count();
    let denominator = if strict {
        verdicts.len()
    } else {
        verdicts.len() - errors
    };
    if denominator == 0 {
        0.0
    } else {
        correct as f64 / denominator as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    /// One kind's name, or `mixed`.
    pub task_kind: String,
    pub mode: String,
    pub n: usize,
    pub pass_at_1: f64,
    pub acc_at_k: Option<BTreeMap<usize, usize>>,
    pub correct: usize,
    pub judge_errors: usize,
    pub strict: bool,
    pub records: Vec<RunRecord>,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    task_kind: &'a str,
    mode: &'a str,
    n: usize,
    pass_at_1: Box<RawValue>,
    acc_at_k: Option<AccJson<'a>>,
    correct: usize,
    judge_errors: usize,
    strict: bool,
    records: &'a [RunRecord],
}

/// Serializes acc@k in ascending numeric `k` order.
struct AccJson<'a>(&'a BTreeMap<usize, usize>);

impl Serialize for AccJson<'_> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in self.0 {
            map.serialize_entry(&k.to_string(), v)?;
        }
        map.end()
    }
}

impl MetricReport {
    pub fn from_records(
        mode: EvalMode,
        ranked: bool,
        strict: bool,
        mut records: Vec<RunRecord>,
    ) -> Self {
        records.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
        let mut kinds: Vec<TaskKind> = records.iter().map(|r| r.kind).collect();
        kinds.sort();
        kinds.dedup();
        let task_kind = match kinds.as_slice() {
            [one] => one.as_str().to_string(),
            _ => "mixed".to_string(),
        };
        let verdicts: Vec<Verdict> = records.iter().map(|r| r.verdict).collect();
        let acc_at_k = (ranked && kinds.contains(&TaskKind::FaultLoc)).then(|| {
            let ranks: Vec<Option<usize>> = records
                .iter()
                .filter(|r| r.kind == TaskKind::FaultLoc)
                .map(|r| r.rank_of_truth)
                .collect();
            ACC_KS.iter().map(|&k| (k, acc_at_k(&ranks, k))).collect()
        });
        MetricReport {
            task_kind,
            mode: mode.name().to_string(),
            n: records.len(),
            pass_at_1: pass_at_1(&verdicts, strict),
            acc_at_k,
            correct: verdicts.iter().filter(|v| **v == Verdict::Correct).count(),
            judge_errors: verdicts.iter().filter(|v| **v == Verdict::JudgeError).count(),
            strict,
            records,
        }
    }

    /// Canonical pretty JSON with `pass_at_1` fixed to four decimals.
    pub fn to_json(&self) -> String {
        let report = ReportJson {
            task_kind: &self.task_kind,
            mode: &self.mode,
            n: self.n,
            pass_at_1: RawValue::from_string(format!("{:.4}", self.pass_at_1))
                .expect("a fixed-point number is valid JSON"),
            acc_at_k: self.acc_at_k.as_ref().map(AccJson),
            correct: self.correct,
            judge_errors: self.judge_errors,
            strict: self.strict,
            records: &self.records,
        };
        let mut out = serde_json::to_string_pretty(&report).expect("reports serialize");
        out.push('\n');
        out
    }

    /// `kind mode n pass@1 [acc@1/acc@4/acc@10]`
    pub fn summary_line(&self) -> String {
        let mut line = format!("{} {} {} {:.4}", self.task_kind, self.mode, self.n, self.pass_at_1);
        if let Some(acc) = &self.acc_at_k {
            let parts: Vec<String> = ACC_KS.iter().map(|k| acc[k].to_string()).collect();
            line.push(' ');
            line.push_str(&parts.join("/"));
        }
        line
    }
}

fn cfg_image(code: &str) -> Result<Image, String> {
    let program = parse_program(code).map_err(|e| format!("cannot parse program: {e}"))?;
    let cfg = build_cfg(&program).map_err(|e| format!("cannot build CFG: {e}"))?;
    Ok(Image::svg(&to_svg(&cfg)))
}

/// Errors that should stop the whole run rather than one instance.
fn is_fatal(e: &GatewayError) -> bool {
    matches!(e, GatewayError::AuthError(_) | GatewayError::Config(_))
}

struct Outcome {
    mode: PromptMode,
    rationale: Option<String>,
    raw: String,
}

fn query(
    task: &TaskInstance,
    config: &EvalConfig,
    provider: &dyn ModelProvider,
) -> Result<Outcome, (PromptMode, Option<String>, String, Option<GatewayError>)> {
    let mode = config.mode;
    let image = if mode.needs_cfg() {
        Some(cfg_image(&task.code).map_err(|e| (mode_hint(mode), None, e, None))?)
    } else {
        None
    };
    let objective = match task.kind {
        TaskKind::Repair => Objective::Repair,
        _ => Objective::FaultLoc {
            ranked: config.ranked,
        },
    };

    let Some(prompt_mode) = mode.prompt_mode() else {
        let image = image.expect("two-stage modes use a CFG");
        let out = run_two_stage(
            provider,
            &config.settings,
            objective,
            &task.code,
            &image,
            mode == EvalMode::MMCotRef,
        );
        return match out {
            Ok(o) => Ok(Outcome {
                mode: PromptMode::MMCotStage2,
                rationale: Some(o.rationale),
                raw: o.final_answer,
            }),
            Err(e) => {
                let message = e.to_string();
                let fatal = match e.source {
                    TwoStageCause::Gateway(g) if is_fatal(&g) => Some(g),
                    _ => None,
                };
                Err((PromptMode::MMCotStage2, e.rationale, message, fatal))
            }
        };
    };

    let given = task.given.as_deref().unwrap_or_default();
    let bundle: PromptBundle = match task.kind {
        TaskKind::OutputPred | TaskKind::InputPred => {
            let direction = if task.kind == TaskKind::OutputPred {
                Direction::OutputPred
            } else {
                Direction::InputPred
            };
            if mode == EvalMode::VisualCoder {
                render_cruxeval_prompt_ref(direction, &task.code, given, image.as_ref())
            } else {
                render_cruxeval_prompt(direction, &task.code, given, image.is_some(), image.as_ref())
            }
        }
        TaskKind::FaultLoc | TaskKind::Repair => {
            render_prompt_for(objective, prompt_mode, &task.code, image.as_ref(), None)
        }
    }
    .map_err(|e| (prompt_mode, None, e.to_string(), None))?;
    let used = bundle.mode;
    match provider.complete(&ModelRequest::with_settings(&config.settings, bundle)) {
        Ok(r) => Ok(Outcome {
            mode: used,
            rationale: None,
            raw: r.text,
        }),
        Err(e) => {
            let message = e.to_string();
            Err((used, None, message, is_fatal(&e).then_some(e)))
        }
    }
}

fn mode_hint(mode: EvalMode) -> PromptMode {
    mode.prompt_mode().unwrap_or(PromptMode::MMCotStage2)
}

fn evaluate(
    task: &TaskInstance,
    config: &EvalConfig,
    provider: &dyn ModelProvider,
) -> Result<RunRecord, GatewayError> {
    let started = Instant::now();
    let mut record = RunRecord {
        instance_id: task.id.clone(),
        kind: task.kind,
        mode: mode_hint(config.mode),
        rationale: None,
        raw_response: String::new(),
        extracted: None,
        verdict: Verdict::JudgeError,
        rank_of_truth: None,
        detail: None,
        wall_ms: 0,
    };
    match query(task, config, provider) {
        Err((mode, rationale, message, fatal)) => {
            if let Some(e) = fatal {
                return Err(e);
            }
            record.mode = mode;
            record.rationale = rationale;
            record.detail = Some(message);
        }
        Ok(outcome) => {
            record.mode = outcome.mode;
            record.rationale = outcome.rationale;
            record.raw_response = outcome.raw;
            match extract_answer(task.kind, &record.raw_response) {
                Err(e) => {
                    record.verdict = Verdict::Incorrect;
                    record.detail = Some(e.to_string());
                }
                Ok(extracted) => {
                    let judgement = match task.kind {
                        TaskKind::FaultLoc => judge_fault_loc(task, &extracted),
                        TaskKind::OutputPred => judge_output_pred(&config.judge, task, &extracted),
                        TaskKind::InputPred => judge_input_pred(&config.judge, task, &extracted),
                        TaskKind::Repair => {
                            let Extracted::Single(program) = &extracted else {
                                unreachable!("repair extraction yields one program")
                            };
                            judge_repair(&config.judge, task, program)
                        }
                    };
                    record.verdict = judgement.verdict;
                    record.detail = judgement.detail;
                    if task.kind == TaskKind::FaultLoc && config.ranked {
                        record.rank_of_truth = judgement.rank_of_truth;
                    }
                    record.extracted = Some(extracted);
                }
            }
        }
    }
    record.wall_ms = started.elapsed().as_millis() as u64;
    Ok(record)
}

/// Runs every task through prompt → model → extraction → judge on a pool of
/// `config.concurrency` workers. Records come back sorted by instance id.
pub fn run_eval(
    tasks: &[TaskInstance],
    config: &EvalConfig,
    provider: &dyn ModelProvider,
) -> Result<MetricReport, EvalError> {
    if config.concurrency == 0 {
        return Err(EvalError::BadConcurrency);
    }
    if let Some(t) = tasks.iter().find(|t| !config.mode.supports(t.kind)) {
        return Err(EvalError::IncompatibleMode {
            mode: config.mode,
            kind: t.kind,
            id: t.id.clone(),
        });
    }

    let next = AtomicUsize::new(0);
    let records = Mutex::new(Vec::with_capacity(tasks.len()));
    let fatal: Mutex<Option<GatewayError>> = Mutex::new(None);
    std::thread::scope(|s| {
        for _ in 0..config.concurrency.min(tasks.len().max(1)) {
            s.spawn(|| loop {
                if fatal.lock().unwrap().is_some() {
                    return;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(task) = tasks.get(i) else { return };
                match evaluate(task, config, provider) {
                    Ok(r) => records.lock().unwrap().push(r),
                    Err(e) => {
                        fatal.lock().unwrap().get_or_insert(e);
                        return;
                    }
                }
            });
        }
    });
    if let Some(e) = fatal.into_inner().unwrap() {
        return Err(EvalError::Provider(e));
    }
    Ok(MetricReport::from_records(
        config.mode,
        config.ranked,
        config.strict,
        records.into_inner().unwrap(),
    ))
}
