//! Evaluation settings: a JSON file at `--config`, with every key
//! overridable by the flag of the same name. The API key is read from
//! `MODEL_API_KEY` only and is never accepted from the file.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use cfglens::gateway::{GatewayError, Rasterizer, DEFAULT_IN_FLIGHT, DEFAULT_MAX_TOKENS};
use cfglens::prompt::Image;
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Http,
    Replay,
    Record,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub model_name: Option<String>,
    pub base_url: Option<String>,
    pub provider: Option<ProviderKind>,
    pub fixtures_path: Option<PathBuf>,
    pub interpreter: Option<String>,
    pub concurrency: Option<usize>,
    pub rasterizer_cmd: Option<String>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    pub ranked: Option<bool>,
    pub strict: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub model_name: String,
    pub base_url: Option<String>,
    pub provider: ProviderKind,
    pub fixtures_path: Option<PathBuf>,
    pub interpreter: String,
    pub concurrency: usize,
    pub rasterizer_cmd: Option<String>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub ranked: bool,
    pub strict: bool,
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

impl ConfigFile {
    /// Reads a config file. A relative `fixtures_path` is taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        let raw: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| ConfigError(format!("config {}: {e}", path.display())))?;
        if raw.get("api_key").is_some() {
            return Err(ConfigError(
                "api_key is not accepted in config files; set MODEL_API_KEY instead".into(),
            ));
        }
        let mut file: ConfigFile = serde_json::from_value(raw)
            .map_err(|e| ConfigError(format!("config {}: {e}", path.display())))?;
        if let Some(f) = &file.fixtures_path {
            if f.is_relative() {
                let base = path.parent().unwrap_or(Path::new(""));
                file.fixtures_path = Some(base.join(f));
            }
        }
        Ok(file)
    }

    /// Fields set in `over` win.
    pub fn overlay(self, over: ConfigFile) -> ConfigFile {
        ConfigFile {
            model_name: over.model_name.or(self.model_name),
            base_url: over.base_url.or(self.base_url),
            provider: over.provider.or(self.provider),
            fixtures_path: over.fixtures_path.or(self.fixtures_path),
            interpreter: over.interpreter.or(self.interpreter),
            concurrency: over.concurrency.or(self.concurrency),
            rasterizer_cmd: over.rasterizer_cmd.or(self.rasterizer_cmd),
            temperature: over.temperature.or(self.temperature),
            max_tokens: over.max_tokens.or(self.max_tokens),
            ranked: over.ranked.or(self.ranked),
            strict: over.strict.or(self.strict),
        }
    }

    pub fn resolve(self) -> Result<Config, ConfigError> {
        let model_name = self
            .model_name
            .ok_or_else(|| ConfigError("model_name is required".into()))?;
        let provider = self.provider.unwrap_or(ProviderKind::Http);
        let concurrency = self.concurrency.unwrap_or(DEFAULT_IN_FLIGHT);
        if concurrency == 0 {
            return Err(ConfigError("concurrency must be at least 1".into()));
        }
        match (&self.fixtures_path, provider) {
            (None, ProviderKind::Replay | ProviderKind::Record) => {
                return Err(ConfigError("fixtures_path is required for replay and record".into()))
            }
            (Some(p), ProviderKind::Replay) if !p.is_file() => {
                return Err(ConfigError(format!("fixtures file {} does not exist", p.display())))
            }
            _ => {}
        }
        Ok(Config {
            model_name,
            base_url: self.base_url,
            provider,
            fixtures_path: self.fixtures_path,
            interpreter: self.interpreter.unwrap_or_else(|| "python3".into()),
            concurrency,
            rasterizer_cmd: self.rasterizer_cmd,
            temperature: self.temperature.unwrap_or(0.0),
            max_tokens: self.max_tokens.unwrap_or(DEFAULT_MAX_TOKENS),
            ranked: self.ranked.unwrap_or(false),
            strict: self.strict.unwrap_or(true),
        })
    }
}

/// Pipes the SVG document to a shell command and takes PNG bytes from its
/// stdout.
pub struct CommandRasterizer {
    pub command: String,
}

impl Rasterizer for CommandRasterizer {
    fn rasterize(&self, image: &Image) -> Result<Image, GatewayError> {
        let fail = |m: String| GatewayError::Config(format!("rasterizer `{}`: {m}", self.command));
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| fail(e.to_string()))?;
        let mut stdin = child.stdin.take().expect("stdin is piped");
        let bytes = image.bytes.clone();
        let writer = std::thread::spawn(move || stdin.write_all(&bytes));
        let out = child.wait_with_output().map_err(|e| fail(e.to_string()))?;
        let _ = writer.join();
        if !out.status.success() || out.stdout.is_empty() {
            return Err(fail(format!(
                "exited with {}: {}",
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        Ok(Image {
            media_type: "image/png".into(),
            bytes: out.stdout,
        })
    }
}
