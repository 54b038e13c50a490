//! Task instances and their JSON Lines loader.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    OutputPred,
    InputPred,
    FaultLoc,
    Repair,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::OutputPred => "outputpred",
            TaskKind::InputPred => "inputpred",
            TaskKind::FaultLoc => "faultloc",
            TaskKind::Repair => "repair",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub input: String,
    pub expected: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub id: String,
    pub kind: TaskKind,
    pub code: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub given: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buggy_line_no: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_cases: Option<Vec<TestCase>>,
    /// Known-good program for repair tasks; used only to sanity-check judges.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_solution: Option<String>,
}

impl TaskInstance {
    /// Checks the kind-specific required fields.
    pub fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        match self.kind {
            TaskKind::OutputPred | TaskKind::InputPred => {
                if self.given.is_none() {
                    return Err(format!("{} task needs \"given\"", self.kind));
                }
                if self.expected_output.is_none() {
                    return Err(format!("{} task needs \"expected_output\"", self.kind));
                }
            }
            TaskKind::FaultLoc => {
                let Some(n) = self.buggy_line_no else {
                    return Err("faultloc task needs \"buggy_line_no\"".into());
                };
                let lines = self.code.lines().count() as u32;
                if n == 0 || n > lines {
                    return Err(format!("buggy_line_no {n} outside 1..={lines}"));
                }
            }
            TaskKind::Repair => {
                if self.test_cases.as_ref().is_none_or(Vec::is_empty) {
                    return Err("repair task needs non-empty \"test_cases\"".into());
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line_no}: {message}")]
    SchemaError { line_no: usize, message: String },
    #[error("line {line_no}: duplicate id {id:?}")]
    DuplicateId { id: String, line_no: usize },
}

pub fn load_tasks(path: &Path) -> Result<Vec<TaskInstance>, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|e| LoadError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_tasks(&text)
}

pub fn parse_tasks(text: &str) -> Result<Vec<TaskInstance>, LoadError> {
    let mut tasks = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let task: TaskInstance = serde_json::from_str(line).map_err(|e| LoadError::SchemaError {
            line_no,
            message: e.to_string(),
        })?;
        task.validate()
            .map_err(|message| LoadError::SchemaError { line_no, message })?;
        if !ids.insert(task.id.clone()) {
            return Err(LoadError::DuplicateId { id: task.id, line_no });
        }
        tasks.push(task);
    }
    Ok(tasks)
}
