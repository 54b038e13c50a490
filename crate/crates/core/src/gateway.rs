//! Model providers: an OpenAI-compatible HTTP client, a fixture replay store,
//! a recording wrapper and an in-flight request limiter.

use std::collections::HashMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex, RwLock};
use std::time::{Duration, Instant};

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest as _, Sha256};

use crate::prompt::{Image, PromptBundle};

pub const DEFAULT_MAX_TOKENS: u32 = 2048;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);
pub const MAX_ATTEMPTS: u32 = 5;
pub const DEFAULT_IN_FLIGHT: usize = 4;

/// Per-run knobs shared by every request of an evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct RequestSettings {
    pub model_name: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub seed: Option<u64>,
}

impl RequestSettings {
    pub fn new(model_name: impl Into<String>) -> Self {
        RequestSettings {
            model_name: model_name.into(),
            temperature: 0.0,
            max_tokens: DEFAULT_MAX_TOKENS,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRequest {
    pub model_name: String,
    pub bundle: PromptBundle,
    pub temperature: f64,
    pub max_tokens: u32,
    pub seed: Option<u64>,
}

impl ModelRequest {
    pub fn with_settings(settings: &RequestSettings, bundle: PromptBundle) -> Self {
        ModelRequest {
            model_name: settings.model_name.clone(),
            bundle,
            temperature: settings.temperature,
            max_tokens: settings.max_tokens,
            seed: settings.seed,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_ms: u64,
    pub provider_id: String,
}

/// Lowercase hex SHA-256 of a request's canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RequestDigest(String);

impl RequestDigest {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RequestDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Canonical form: model, NUL, text, NUL, each attachment followed by NUL,
/// then the temperature with four decimals. `max_tokens` and `seed` are left
/// out on purpose.
pub fn digest(request: &ModelRequest) -> RequestDigest {
    let mut h = Sha256::new();
    h.update(request.model_name.as_bytes());
    h.update([0]);
    h.update(request.bundle.text.as_bytes());
    h.update([0]);
    for image in &request.bundle.attachments {
        h.update(&image.bytes);
        h.update([0]);
    }
    h.update(format!("{:.4}", request.temperature).as_bytes());
    RequestDigest(hex::encode(h.finalize()))
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("authentication failed: {0}")]
    AuthError(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("provider returned HTTP {status}: {body}")]
    ProviderError { status: u16, body: String },
    #[error("no fixture for request digest {digest}")]
    FixtureMiss { digest: String },
    #[error("request timed out")]
    Timeout,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed provider response: {0}")]
    MalformedResponse(String),
    #[error("fixture file {path}: {message}")]
    Fixture { path: PathBuf, message: String },
    #[error("configuration error: {0}")]
    Config(String),
}

/// A model backend. Implementations must tolerate concurrent calls.
pub trait ModelProvider: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, GatewayError>;
}

/// Converts image attachments a provider cannot take (SVG) into one it can.
pub trait Rasterizer: Send + Sync {
    fn rasterize(&self, image: &Image) -> Result<Image, GatewayError>;
}

/// OpenAI-compatible chat-completions client.
pub struct HttpProvider {
    base_url: String,
    api_key: String,
    client: reqwest::blocking::Client,
    backoff: Duration,
    rasterizer: Option<Box<dyn Rasterizer>>,
}

impl HttpProvider {
    pub fn new(base_url: &str, api_key: &str, timeout: Duration) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(HttpProvider {
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key: api_key.to_string(),
            client,
            backoff: Duration::from_millis(500),
            rasterizer: None,
        })
    }

    /// Reads `MODEL_BASE_URL` and `MODEL_API_KEY`.
    pub fn from_env(timeout: Duration) -> Result<Self, GatewayError> {
        let base = std::env::var("MODEL_BASE_URL")
            .map_err(|_| GatewayError::Config("MODEL_BASE_URL is not set".into()))?;
        let key = std::env::var("MODEL_API_KEY")
            .map_err(|_| GatewayError::Config("MODEL_API_KEY is not set".into()))?;
        Self::new(&base, &key, timeout)
    }

    /// First retry delay; doubles on each further attempt.
    pub fn with_backoff(mut self, initial: Duration) -> Self {
        self.backoff = initial;
        self
    }

    pub fn with_rasterizer(mut self, rasterizer: Box<dyn Rasterizer>) -> Self {
        self.rasterizer = Some(rasterizer);
        self
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url)
    }

    pub fn request_body(&self, request: &ModelRequest) -> Result<Value, GatewayError> {
        let mut content = vec![json!({"type": "text", "text": request.bundle.text})];
        for image in &request.bundle.attachments {
            let converted;
            let image = match &self.rasterizer {
                Some(r) if image.media_type == crate::prompt::SVG_MEDIA_TYPE => {
                    converted = r.rasterize(image)?;
                    &converted
                }
                _ => image,
            };
            let data = base64::engine::general_purpose::STANDARD.encode(&image.bytes);
            content.push(json!({
                "type": "image_url",
                "image_url": {"url": format!("data:{};base64,{}", image.media_type, data)}
            }));
        }
        let mut body = json!({
            "model": request.model_name,
            "messages": [{"role": "user", "content": content}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        if let Some(seed) = request.seed {
            body["seed"] = json!(seed);
        }
        Ok(body)
    }
}

fn parse_completion(body: &str) -> Result<(String, u64, u64), GatewayError> {
    let v: Value =
        serde_json::from_str(body).map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
    let content = &v["choices"][0]["message"]["content"];
    let text = match content {
        Value::String(s) => s.clone(),
        Value::Array(parts) => parts
            .iter()
            .filter_map(|p| p["text"].as_str())
            .collect::<Vec<_>>()
            .join(""),
        _ => return Err(GatewayError::MalformedResponse("missing choices[0].message.content".into())),
    };
    let usage = |k: &str| v["usage"][k].as_u64().unwrap_or(0);
    Ok((text, usage("prompt_tokens"), usage("completion_tokens")))
}

impl ModelProvider for HttpProvider {
    fn id(&self) -> &str {
        "http"
    }

    fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, GatewayError> {
        request.validate()?;
        let body = self.request_body(request)?;
        let started = Instant::now();
        let mut delay = self.backoff;
        for attempt in 1..=MAX_ATTEMPTS {
            let sent = self
                .client
                .post(self.endpoint())
                .bearer_auth(&self.api_key)
                .json(&body)
                .send();
            let response = match sent {
                Ok(r) => r,
                Err(e) if e.is_timeout() => return Err(GatewayError::Timeout),
                Err(e) => return Err(GatewayError::Transport(e.to_string())),
            };
            let status = response.status().as_u16();
            let text = response.text().map_err(|e| {
                if e.is_timeout() {
                    GatewayError::Timeout
                } else {
                    GatewayError::Transport(e.to_string())
                }
            })?;
            match status {
                200..=299 => {
                    let (text, prompt_tokens, completion_tokens) = parse_completion(&text)?;
                    return Ok(ModelResponse {
                        text,
                        prompt_tokens,
                        completion_tokens,
                        latency_ms: started.elapsed().as_millis() as u64,
                        provider_id: self.id().to_string(),
                    });
                }
                401 | 403 => return Err(GatewayError::AuthError(text)),
                429 | 500..=599 if attempt < MAX_ATTEMPTS => {
                    std::thread::sleep(delay);
                    delay *= 2;
                }
                429 => return Err(GatewayError::RateLimited { attempts: attempt }),
                _ => return Err(GatewayError::ProviderError { status, body: text }),
            }
        }
        unreachable!("the final attempt always returns")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub digest: RequestDigest,
    pub text: String,
    pub model: String,
}

fn fixture_error(path: &Path, message: impl fmt::Display) -> GatewayError {
    GatewayError::Fixture {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

/// Reads a JSONL fixture file; later entries replace earlier ones.
pub fn load_fixtures(path: &Path) -> Result<HashMap<RequestDigest, FixtureEntry>, GatewayError> {
    let file = File::open(path).map_err(|e| fixture_error(path, e))?;
    let mut map = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| fixture_error(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: FixtureEntry = serde_json::from_str(&line)
            .map_err(|e| fixture_error(path, format!("line {}: {e}", i + 1)))?;
        map.insert(entry.digest.clone(), entry);
    }
    Ok(map)
}

/// Answers from recorded fixtures only.
pub struct ReplayProvider {
    entries: HashMap<RequestDigest, FixtureEntry>,
}

impl ReplayProvider {
    pub fn open(path: &Path) -> Result<Self, GatewayError> {
        Ok(ReplayProvider {
            entries: load_fixtures(path)?,
        })
    }

    pub fn from_entries(entries: impl IntoIterator<Item = FixtureEntry>) -> Self {
        ReplayProvider {
            entries: entries.into_iter().map(|e| (e.digest.clone(), e)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl ModelProvider for ReplayProvider {
    fn id(&self) -> &str {
        "replay"
    }

    fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, GatewayError> {
        let d = digest(request);
        match self.entries.get(&d) {
            Some(entry) => Ok(ModelResponse {
                text: entry.text.clone(),
                prompt_tokens: 0,
                completion_tokens: 0,
                latency_ms: 0,
                provider_id: self.id().to_string(),
            }),
            None => Err(GatewayError::FixtureMiss { digest: d.0 }),
        }
    }
}

/// Forwards to an inner provider and appends every answer to a fixture file.
pub struct RecordProvider<P> {
    inner: P,
    path: PathBuf,
    seen: RwLock<HashMap<RequestDigest, String>>,
    file: Mutex<File>,
}

impl<P: ModelProvider> RecordProvider<P> {
    pub fn new(inner: P, path: &Path) -> Result<Self, GatewayError> {
        let seen = if path.exists() {
            load_fixtures(path)?
                .into_iter()
                .map(|(d, e)| (d, e.text))
                .collect()
        } else {
            HashMap::new()
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| fixture_error(path, e))?;
        Ok(RecordProvider {
            inner,
            path: path.to_path_buf(),
            seen: RwLock::new(seen),
            file: Mutex::new(file),
        })
    }

    pub fn into_inner(self) -> P {
        self.inner
    }
}

impl<P: ModelProvider> ModelProvider for RecordProvider<P> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, GatewayError> {
        let response = self.inner.complete(request)?;
        let d = digest(request);
        let unchanged = self.seen.read().unwrap().get(&d) == Some(&response.text);
        if !unchanged {
            let entry = FixtureEntry {
                digest: d.clone(),
                text: response.text.clone(),
                model: request.model_name.clone(),
            };
            let mut line = serde_json::to_string(&entry).expect("fixture entries serialize");
            line.push('\n');
            let mut file = self.file.lock().unwrap();
            file.write_all(line.as_bytes())
                .and_then(|_| file.flush())
                .map_err(|e| fixture_error(&self.path, e))?;
            self.seen.write().unwrap().insert(d, response.text.clone());
        }
        Ok(response)
    }
}

/// Caps the number of concurrent `complete` calls on the wrapped provider.
pub struct Limited<P> {
    inner: P,
    cap: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

impl<P> Limited<P> {
    pub fn new(inner: P, cap: usize) -> Self {
        Limited {
            inner,
            cap: cap.max(1),
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn inner_ref(&self) -> &P {
        &self.inner
    }
}

struct Permit<'a, P>(&'a Limited<P>);

impl<P> Drop for Permit<'_, P> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}

impl<P: ModelProvider> ModelProvider for Limited<P> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, GatewayError> {
        let mut n = self.in_flight.lock().unwrap();
        while *n >= self.cap {
            n = self.freed.wait(n).unwrap();
        }
        *n += 1;
        drop(n);
        let _permit = Permit(self);
        self.inner.complete(request)
    }
}

impl<T: ModelProvider + ?Sized> ModelProvider for Box<T> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, GatewayError> {
        (**self).complete(request)
    }
}

impl<T: ModelProvider + ?Sized> ModelProvider for &T {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, GatewayError> {
        (**self).complete(request)
    }
}
