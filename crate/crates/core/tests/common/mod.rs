//! Shared fixtures for the integration tests: the smoke suite and its
//! scripted model.

#![allow(dead_code)]

pub mod gen;
pub mod lit;
pub mod mermaid;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cfglens::gateway::{GatewayError, ModelProvider, ModelRequest, ModelResponse, RequestSettings};
use cfglens::harness::{load_tasks, EvalConfig, EvalMode, JudgeEnv, Sandbox, TaskInstance};

pub const SMOKE_MODEL: &str = "smoke-model";
pub const SMOKE_MAX_TOKENS: u32 = 1024;

/// The core crate's directory; these helpers are also compiled into the
/// CLI crate's tests.
pub fn core_dir() -> PathBuf {
    let here = Path::new(env!("CARGO_MANIFEST_DIR"));
    if here.join("fixtures").is_dir() {
        here.to_path_buf()
    } else {
        here.join("../core")
    }
}

pub fn fixture(rel: &str) -> PathBuf {
    core_dir().join("fixtures").join(rel)
}

pub fn smoke_tasks() -> Vec<TaskInstance> {
    load_tasks(&fixture("smoke/tasks.jsonl")).expect("smoke tasks load")
}

pub fn smoke_config(concurrency: usize) -> EvalConfig {
    let mut settings = RequestSettings::new(SMOKE_MODEL);
    settings.max_tokens = SMOKE_MAX_TOKENS;
    let mut config = EvalConfig::new(EvalMode::Cfg, settings);
    config.ranked = true;
    config.concurrency = concurrency;
    config.judge = JudgeEnv { sandbox: Sandbox::default(), timeout_ms: 10_000 };
    config
}

/// Answers each request with the canned response of the task whose code
/// appears in the prompt.
pub struct ScriptedProvider {
    answers: Vec<(String, String)>,
}

impl ScriptedProvider {
    pub fn for_smoke() -> Self {
        let responses: BTreeMap<String, String> = serde_json::from_str(
            &std::fs::read_to_string(fixture("smoke/responses.json")).unwrap(),
        )
        .unwrap();
        let answers = smoke_tasks()
            .into_iter()
            .map(|t| (t.code.trim_end().to_string(), responses[&t.id].clone()))
            .collect();
        ScriptedProvider { answers }
    }
}

impl ModelProvider for ScriptedProvider {
    fn id(&self) -> &str {
        "scripted"
    }

    fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, GatewayError> {
        let text = &request.bundle.text;
        let (_, answer) = self
            .answers
            .iter()
            .filter(|(code, _)| text.contains(code.as_str()))
            .max_by_key(|(code, _)| code.len())
            .ok_or_else(|| GatewayError::InvalidRequest("no scripted answer".into()))?;
        Ok(ModelResponse {
            text: answer.clone(),
            prompt_tokens: 0,
            completion_tokens: 0,
            latency_ms: 0,
            provider_id: self.id().to_string(),
        })
    }
}
