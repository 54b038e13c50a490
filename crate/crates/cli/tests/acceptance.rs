//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use cfglens::emit::to_mermaid;
use cfglens::gateway::ReplayProvider;
use cfglens::harness::{
    acc_at_k, judge_output_pred, judge_repair, pass_at_1, run_eval, Extracted, JudgeEnv, Sandbox,
    TaskInstance, TaskKind, Verdict,
};
use cfglens::oracle::{run_corpus, OracleStatus, DEFAULT_TIMEOUT_MS};
use cfglens::prompt::{template, Objective, PromptMode, REFERENCE_SENTENCE};
use cfglens::{build_cfg, parse_program};
use common::gen::program;
use common::lit::{literal, render};
use common::mermaid::round_trips;
use common::{fixture, smoke_config, smoke_tasks};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ORACLE_BUDGET: Duration = Duration::from_secs(60);
const REPLAY_BUDGET: Duration = Duration::from_secs(30);
const MIN_CORPUS: usize = 50;
const ROUND_TRIP_PROGRAMS: u64 = 200;
const RANK_VECTORS: usize = 1000;
const LITERALS: u64 = 100;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn trace_containment() -> Outcome {
    let started = Instant::now();
    let results = run_corpus(&fixture("corpus"), &Sandbox::default(), &build_cfg, DEFAULT_TIMEOUT_MS)
        .map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    let bad: Vec<String> = results
        .iter()
        .filter(|r| r.status != OracleStatus::Pass)
        .map(|r| format!("{}: {}", r.path.display(), r.status))
        .collect();
    if results.len() < MIN_CORPUS {
        return Err(format!("corpus has {} programs, need {MIN_CORPUS}", results.len()));
    }
    if !bad.is_empty() {
        return Err(format!("{} violation(s): {}", bad.len(), bad.join("; ")));
    }
    if elapsed > ORACLE_BUDGET {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("{} programs, 0 violations, {:.1}s", results.len(), elapsed.as_secs_f64()))
}

fn mermaid_golden() -> Outcome {
    let source = std::fs::read_to_string(fixture("motivation.py")).map_err(|e| e.to_string())?;
    let golden = std::fs::read_to_string(fixture("golden/motivation.mmd")).map_err(|e| e.to_string())?;
    let cfg = build_cfg(&parse_program(&source).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let text = to_mermaid(&cfg);
    if text != golden {
        return Err("output differs from golden".into());
    }
    let shape = text.starts_with("graph TD\n    A[\"X = 1024\"]")
        && text.contains("-->|T|")
        && text.contains("-->|F|");
    if !shape {
        return Err("golden lacks the expected header, entry node or branch labels".into());
    }
    Ok(format!("{} bytes identical", text.len()))
}

fn mermaid_round_trip() -> Outcome {
    for seed in 0..ROUND_TRIP_PROGRAMS {
        let g = program(seed);
        let program = parse_program(&g.source).map_err(|e| format!("seed {seed}: {e}"))?;
        let cfg = build_cfg(&program).map_err(|e| format!("seed {seed}: {e}"))?;
        if !round_trips(&cfg, &to_mermaid(&cfg)) {
            return Err(format!("seed {seed} does not round-trip"));
        }
    }
    Ok(format!("{ROUND_TRIP_PROGRAMS}/{ROUND_TRIP_PROGRAMS} isomorphic"))
}

fn prompt_fidelity() -> Outcome {
    for mode in PromptMode::ALL {
        let path = fixture(&format!("golden/prompts/{}.txt", mode.file_stem()));
        let golden = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        let text = template(mode, Objective::FaultLoc { ranked: false });
        if text != golden {
            return Err(format!("{} differs from golden", mode.file_stem()));
        }
        let want = usize::from(matches!(mode, PromptMode::VisualCoder | PromptMode::MMCotStage1Ref));
        let got = text.matches(REFERENCE_SENTENCE).count();
        if got != want {
            return Err(format!("{} has the reference sentence {got} times", mode.file_stem()));
        }
    }
    Ok(format!("{} templates byte-exact, reference sentence only in the two reference modes", PromptMode::ALL.len()))
}

fn replay_end_to_end() -> Outcome {
    let started = Instant::now();
    let golden = std::fs::read_to_string(fixture("golden/smoke_report.json")).map_err(|e| e.to_string())?;
    let provider = ReplayProvider::open(&fixture("smoke/fixtures.jsonl")).map_err(|e| e.to_string())?;
    let tasks = smoke_tasks();
    let count = |k| tasks.iter().filter(|t| t.kind == k).count();
    let mix = [TaskKind::FaultLoc, TaskKind::OutputPred, TaskKind::InputPred, TaskKind::Repair].map(count);
    if mix != [4, 4, 2, 2] {
        return Err(format!("smoke suite mix is {mix:?}"));
    }
    for concurrency in [1, 8] {
        let report = run_eval(&tasks, &smoke_config(concurrency), &provider).map_err(|e| e.to_string())?;
        if report.to_json() != golden {
            return Err(format!("report at concurrency {concurrency} differs from golden"));
        }
    }
    let elapsed = started.elapsed();
    if elapsed > REPLAY_BUDGET {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("byte-identical at concurrency 1 and 8, {:.1}s", elapsed.as_secs_f64()))
}

fn metric_checks() -> Outcome {
    use Verdict::{Correct, Incorrect};
    let p = pass_at_1(&[Correct, Correct, Incorrect, Correct], true);
    if p != 0.75 {
        return Err(format!("pass@1 of 3/4 is {p}"));
    }
    let ranks = [Some(1), Some(3), None];
    let acc = [1, 4, 10].map(|k| acc_at_k(&ranks, k));
    if acc != [1, 2, 2] {
        return Err(format!("acc@1/4/10 for ranks [1,3,miss] is {acc:?}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..RANK_VECTORS {
        let n = rng.random_range(0..40);
        let ranks: Vec<Option<usize>> = (0..n)
            .map(|_| rng.random_bool(0.6).then(|| rng.random_range(1..=15)))
            .collect();
        let curve: Vec<usize> = (1..=15).map(|k| acc_at_k(&ranks, k)).collect();
        if curve.windows(2).any(|w| w[0] > w[1]) || curve.last().is_some_and(|&a| a > n) {
            return Err(format!("vector {i} is not monotone: {curve:?}"));
        }
    }
    Ok(format!("pass@1 0.75, acc [1,2,2], {RANK_VECTORS} vectors monotone"))
}

fn judge_soundness() -> Outcome {
    let env = JudgeEnv::default();
    let repairs: Vec<TaskInstance> = smoke_tasks().into_iter().filter(|t| t.kind == TaskKind::Repair).collect();
    for task in &repairs {
        let reference = task.reference_solution.as_deref().ok_or(format!("{} has no reference", task.id))?;
        let j = judge_repair(&env, task, reference);
        if j.verdict != Verdict::Correct {
            return Err(format!("reference of {} judged {:?}: {:?}", task.id, j.verdict, j.detail));
        }
    }
    for seed in 0..LITERALS {
        let lit = render(&literal(seed), false);
        let task = TaskInstance {
            id: format!("lit-{seed}"),
            kind: TaskKind::OutputPred,
            code: "def f(x):\n    return x\n".into(),
            given: Some("0".into()),
            expected_output: Some(lit.clone()),
            buggy_line_no: None,
            test_cases: None,
            reference_solution: None,
        };
        let j = judge_output_pred(&env, &task, &Extracted::Single(lit.clone()));
        if j.verdict != Verdict::Correct {
            return Err(format!("literal {lit} judged {:?}", j.verdict));
        }
    }
    Ok(format!("{} references correct, {LITERALS} literals reflexive", repairs.len()))
}

fn emit_corpus(bin: &Path, files: &[PathBuf], out: &Path) -> Result<(), String> {
    for f in files {
        let status = Command::new(bin)
            .args(["cfg", "--emit", "mermaid,dot,svg,json", "--out-dir"])
            .arg(out)
            .arg(f)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!("cfg {} failed: {}", f.display(), String::from_utf8_lossy(&status.stderr)));
        }
    }
    Ok(())
}

fn determinism() -> Outcome {
    let bin = Path::new(env!("CARGO_BIN_EXE_cfglens"));
    let mut files: Vec<PathBuf> = std::fs::read_dir(fixture("corpus"))
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "py"))
        .collect();
    files.sort();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        emit_corpus(bin, &files, d.path())?;
    }
    let mut outputs: Vec<PathBuf> = std::fs::read_dir(dirs[0].path())
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    outputs.sort();
    if outputs.len() != 4 * files.len() {
        return Err(format!("{} outputs for {} programs", outputs.len(), files.len()));
    }
    for a in &outputs {
        let b = dirs[1].path().join(a.file_name().unwrap());
        if std::fs::read(a).ok() != std::fs::read(&b).ok() {
            return Err(format!("{} differs between runs", a.display()));
        }
    }
    Ok(format!("{} files byte-identical across two runs", outputs.len()))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("trace containment", trace_containment),
        ("mermaid golden", mermaid_golden),
        ("mermaid round-trip", mermaid_round_trip),
        ("prompt template fidelity", prompt_fidelity),
        ("replay end-to-end", replay_end_to_end),
        ("metric checks", metric_checks),
        ("judge soundness", judge_soundness),
        ("emission determinism", determinism),
    ];
    let mut failures = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failures += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("acceptance: {}/{} passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
