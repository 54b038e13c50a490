//! `cfglens`: build CFGs, render prompts, run evaluations and check the
//! builder against real executions.
//!
//! Exit codes: 0 ok, 2 input/parse, 3 I/O, 4 usage, 5 provider/config,
//! 6 oracle failure.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use base64::Engine;
use cfglens::emit::{to_dot, to_mermaid, to_svg};
use cfglens::gateway::{
    HttpProvider, ModelProvider, RecordProvider, ReplayProvider, RequestSettings, DEFAULT_TIMEOUT,
};
use cfglens::harness::{
    load_tasks, run_eval, EvalConfig, EvalError, EvalMode, JudgeEnv, LoadError, Sandbox,
};
use cfglens::oracle::{run_corpus, OracleStatus, DEFAULT_TIMEOUT_MS};
use cfglens::prompt::{render_prompt_for, Image, Objective, PromptBundle, PromptMode};
use cfglens::{build_cfg, parse_program, Cfg};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use config::{CommandRasterizer, Config, ConfigFile, ProviderKind};

const EXIT_INPUT: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_USAGE: u8 = 4;
const EXIT_PROVIDER: u8 = 5;
const EXIT_ORACLE: u8 = 6;

#[derive(Parser)]
#[command(name = "cfglens", version, about = "Control-flow graphs as visual context for code models")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the CFG of a program and write it in the chosen formats.
    Cfg {
        source: PathBuf,
        /// Comma-separated formats.
        #[arg(long, value_delimiter = ',', default_value = "mermaid")]
        emit: Vec<Format>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Render the prompt for a program as JSON.
    Prompt {
        source: PathBuf,
        #[arg(long, value_parser = parse_mode)]
        mode: EvalMode,
        /// What the prompt asks for.
        #[arg(long, value_enum, default_value = "fault-loc")]
        objective: ObjectiveArg,
        /// Ask for a ranked top-10 list (fault localization only).
        #[arg(long)]
        ranked: bool,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an evaluation over a JSONL task file.
    Eval {
        tasks: PathBuf,
        #[arg(long, value_parser = parse_mode)]
        mode: EvalMode,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Where to write the JSON report.
        #[arg(long)]
        report_out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Check every `.py` file of a directory against its traced executions.
    Oracle {
        corpus_dir: PathBuf,
        #[arg(long, default_value = "python3")]
        interpreter: String,
        /// Per-program time limit.
        #[arg(long, default_value_t = DEFAULT_TIMEOUT_MS)]
        timeout_ms: u64,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Mermaid,
    Dot,
    Svg,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    FaultLoc,
    Repair,
}

/// Flag forms of the config keys.
#[derive(clap::Args)]
struct Overrides {
    #[arg(long)]
    model_name: Option<String>,
    #[arg(long)]
    base_url: Option<String>,
    #[arg(long, value_enum)]
    provider: Option<ProviderKind>,
    #[arg(long)]
    fixtures_path: Option<PathBuf>,
    #[arg(long)]
    interpreter: Option<String>,
    #[arg(long)]
    concurrency: Option<usize>,
    /// Shell command turning SVG on stdin into PNG on stdout.
    #[arg(long)]
    rasterizer_cmd: Option<String>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    max_tokens: Option<u32>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    ranked: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    strict: Option<bool>,
}

impl From<Overrides> for ConfigFile {
    fn from(o: Overrides) -> Self {
        ConfigFile {
            model_name: o.model_name,
            base_url: o.base_url,
            provider: o.provider,
            fixtures_path: o.fixtures_path,
            interpreter: o.interpreter,
            concurrency: o.concurrency,
            rasterizer_cmd: o.rasterizer_cmd,
            temperature: o.temperature,
            max_tokens: o.max_tokens,
            ranked: o.ranked,
            strict: o.strict,
        }
    }
}

fn parse_mode(s: &str) -> Result<EvalMode, String> {
    s.parse().map_err(|e: cfglens::harness::UnknownMode| e.to_string())
}

/// A failed command: exit code plus a diagnostic for stderr.
struct Failure(u8, String);

type CmdResult = Result<(), Failure>;

fn fail(code: u8, message: impl std::fmt::Display) -> Failure {
    Failure(code, message.to_string())
}

fn read_source(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| fail(EXIT_IO, format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &[u8]) -> CmdResult {
    std::fs::write(path, contents).map_err(|e| fail(EXIT_IO, format!("{}: {e}", path.display())))
}

fn build(path: &Path, source: &str) -> Result<Cfg, Failure> {
    let program = parse_program(source).map_err(|e| fail(EXIT_INPUT, format!("{}: {e}", path.display())))?;
    build_cfg(&program).map_err(|e| fail(EXIT_INPUT, format!("{}: {e}", path.display())))
}

fn cmd_cfg(source: &Path, emit: &[Format], out_dir: &Path) -> CmdResult {
    let cfg = build(source, &read_source(source)?)?;
    let stem = source
        .file_stem()
        .ok_or_else(|| fail(EXIT_USAGE, "source path has no file name"))?
        .to_string_lossy();
    std::fs::create_dir_all(out_dir).map_err(|e| fail(EXIT_IO, format!("{}: {e}", out_dir.display())))?;
    let mut formats = emit.to_vec();
    formats.dedup();
    for format in formats {
        let (ext, body) = match format {
            Format::Mermaid => ("mmd", to_mermaid(&cfg)),
            Format::Dot => ("dot", to_dot(&cfg)),
            Format::Svg => ("svg", to_svg(&cfg)),
            Format::Json => ("json", cfg.to_json() + "\n"),
        };
        write_file(&out_dir.join(format!("{stem}.{ext}")), body.as_bytes())?;
    }
    let violations = cfg.validate();
    for v in &violations {
        eprintln!("{v}");
    }
    println!(
        "{stem} nodes={} edges={} violations={}",
        cfg.nodes.len(),
        cfg.edges.len(),
        violations.len()
    );
    Ok(())
}

#[derive(Serialize)]
struct AttachmentJson {
    media_type: String,
    bytes_b64: String,
}

#[derive(Serialize)]
struct BundleJson {
    mode: PromptMode,
    text: String,
    attachments: Vec<AttachmentJson>,
}

impl From<PromptBundle> for BundleJson {
    fn from(b: PromptBundle) -> Self {
        BundleJson {
            mode: b.mode,
            text: b.text,
            attachments: b
                .attachments
                .into_iter()
                .map(|a| AttachmentJson {
                    media_type: a.media_type,
                    bytes_b64: base64::engine::general_purpose::STANDARD.encode(a.bytes),
                })
                .collect(),
        }
    }
}

fn cmd_prompt(
    source: &Path,
    mode: EvalMode,
    objective: ObjectiveArg,
    ranked: bool,
    out: Option<&Path>,
) -> CmdResult {
    let code = read_source(source)?;
    let objective = match objective {
        ObjectiveArg::FaultLoc => Objective::FaultLoc { ranked },
        ObjectiveArg::Repair => Objective::Repair,
    };
    // The two-stage modes show their first, image-bearing prompt.
    let prompt_mode = mode.prompt_mode().unwrap_or(match mode {
        EvalMode::MMCotRef => PromptMode::MMCotStage1Ref,
        _ => PromptMode::MMCotStage1,
    });
    let image = if mode.needs_cfg() {
        Some(Image::svg(&to_svg(&build(source, &code)?)))
    } else {
        parse_program(&code).map_err(|e| fail(EXIT_INPUT, format!("{}: {e}", source.display())))?;
        None
    };
    let bundle = render_prompt_for(objective, prompt_mode, &code, image.as_ref(), None)
        .map_err(|e| fail(EXIT_USAGE, e))?;
    let mut json = serde_json::to_string_pretty(&BundleJson::from(bundle)).expect("bundles serialize");
    json.push('\n');
    match out {
        Some(path) => write_file(path, json.as_bytes()),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn provider_for(config: &Config) -> Result<Box<dyn ModelProvider>, Failure> {
    let provider_fail = |e: cfglens::gateway::GatewayError| fail(EXIT_PROVIDER, e);
    let http = || -> Result<HttpProvider, Failure> {
        let key = std::env::var("MODEL_API_KEY")
            .map_err(|_| fail(EXIT_PROVIDER, "MODEL_API_KEY is not set"))?;
        let base = config
            .base_url
            .clone()
            .or_else(|| std::env::var("MODEL_BASE_URL").ok())
            .ok_or_else(|| fail(EXIT_PROVIDER, "base_url is not configured"))?;
        let mut p = HttpProvider::new(&base, &key, DEFAULT_TIMEOUT).map_err(provider_fail)?;
        if let Some(cmd) = &config.rasterizer_cmd {
            p = p.with_rasterizer(Box::new(CommandRasterizer { command: cmd.clone() }));
        }
        Ok(p)
    };
    let fixtures = || config.fixtures_path.as_deref().expect("checked by resolve");
    Ok(match config.provider {
        ProviderKind::Replay => Box::new(ReplayProvider::open(fixtures()).map_err(provider_fail)?),
        ProviderKind::Record => Box::new(RecordProvider::new(http()?, fixtures()).map_err(provider_fail)?),
        ProviderKind::Http => Box::new(http()?),
    })
}

fn cmd_eval(
    tasks_path: &Path,
    mode: EvalMode,
    config_path: Option<&Path>,
    report_out: Option<&Path>,
    overrides: Overrides,
) -> CmdResult {
    let file = match config_path {
        Some(p) => ConfigFile::load(p).map_err(|e| fail(EXIT_PROVIDER, e))?,
        None => ConfigFile::default(),
    };
    let config = file.overlay(overrides.into()).resolve().map_err(|e| fail(EXIT_PROVIDER, e))?;
    let tasks = load_tasks(tasks_path).map_err(|e| {
        let code = if matches!(e, LoadError::Io { .. }) { EXIT_IO } else { EXIT_INPUT };
        fail(code, format!("{}: {e}", tasks_path.display()))
    })?;
    let provider = provider_for(&config)?;

    let mut settings = RequestSettings::new(&config.model_name);
    settings.temperature = config.temperature;
    settings.max_tokens = config.max_tokens;
    let mut eval = EvalConfig::new(mode, settings);
    eval.ranked = config.ranked;
    eval.strict = config.strict;
    eval.concurrency = config.concurrency;
    eval.judge = JudgeEnv {
        sandbox: Sandbox::new(&config.interpreter),
        ..JudgeEnv::default()
    };
    let report = run_eval(&tasks, &eval, provider.as_ref()).map_err(|e| match e {
        EvalError::IncompatibleMode { .. } | EvalError::BadConcurrency => fail(EXIT_USAGE, e),
        EvalError::Provider(_) => fail(EXIT_PROVIDER, e),
    })?;
    if let Some(path) = report_out {
        write_file(path, report.to_json().as_bytes())?;
    }
    println!("{}", report.summary_line());
    Ok(())
}

fn cmd_oracle(dir: &Path, interpreter: &str, timeout_ms: u64) -> CmdResult {
    let results = run_corpus(dir, &Sandbox::new(interpreter), &build_cfg, timeout_ms)
        .map_err(|e| fail(EXIT_IO, format!("{}: {e}", dir.display())))?;
    let mut failed = Vec::new();
    for r in &results {
        let name = r.path.file_name().unwrap_or_default().to_string_lossy();
        match &r.status {
            OracleStatus::Pass => println!("PASS {name}"),
            OracleStatus::Skip(why) => println!("SKIP {name}: {why}"),
            OracleStatus::Fail(why) => {
                println!("FAIL {name}: {why}");
                failed.push(format!("{name}: {why}"));
            }
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(fail(EXIT_ORACLE, format!("{} failing file(s):\n{}", failed.len(), failed.join("\n"))))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Cmd::Cfg { source, emit, out_dir } => cmd_cfg(&source, &emit, &out_dir),
        Cmd::Prompt { source, mode, objective, ranked, out } => {
            cmd_prompt(&source, mode, objective, ranked, out.as_deref())
        }
        Cmd::Eval { tasks, mode, config, report_out, overrides } => {
            cmd_eval(&tasks, mode, config.as_deref(), report_out.as_deref(), overrides)
        }
        Cmd::Oracle { corpus_dir, interpreter, timeout_ms } => {
            cmd_oracle(&corpus_dir, &interpreter, timeout_ms)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, message)) => {
            eprintln!("cfglens: {message}");
            ExitCode::from(code)
        }
    }
}
