//! Chat-completion client with a record/replay transcript cache.

mod payload;
pub mod prompts;
pub mod stub;

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use payload::{parse_json_payload, PayloadError};

pub const ENV_URL: &str = "EVOREWARD_LLM_URL";
pub const ENV_KEY: &str = "EVOREWARD_LLM_KEY";
pub const ENV_MODE: &str = "EVOREWARD_LLM_MODE";
pub const ENV_MODEL: &str = "EVOREWARD_LLM_MODEL";

pub const MUTATION_TEMPERATURE: f64 = 0.7;
pub const LABELING_TEMPERATURE: f64 = 0.0;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("replay miss: no recorded response for request {0}")]
    ReplayMiss(String),
    #[error("transport failure after {attempts} attempts: {message}")]
    Transport { attempts: usize, message: String },
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed endpoint response: {0}")]
    Malformed(String),
    #[error("no endpoint configured (set {ENV_URL})")]
    NoEndpoint,
    #[error("transcript cache {path}: {message}")]
    Cache { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: "user".into(),
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Message {
            role: "assistant".into(),
            content: content.into(),
        }
    }
}

/// Request body, serialized verbatim as the wire format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
}

impl LlmRequest {
    pub fn new(model: impl Into<String>, messages: Vec<Message>, temperature: f64) -> Self {
        LlmRequest {
            model: model.into(),
            messages,
            temperature,
        }
    }

    /// sha256 over the canonical JSON serialization.
    pub fn request_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("request serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CacheMode {
    Record,
    Replay,
    Live,
}

impl FromStr for CacheMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "record" => Ok(CacheMode::Record),
            "replay" => Ok(CacheMode::Replay),
            "live" => Ok(CacheMode::Live),
            other => Err(format!("unknown LLM mode `{other}` (record, replay, live)")),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    hash: String,
    request: LlmRequest,
    response: String,
}

/// Append-only JSONL store of responses keyed by request hash.
#[derive(Debug)]
pub struct TranscriptCache {
    pub mode: CacheMode,
    path: Option<PathBuf>,
    entries: HashMap<String, String>,
}

impl TranscriptCache {
    pub fn in_memory(mode: CacheMode) -> Self {
        TranscriptCache {
            mode,
            path: None,
            entries: HashMap::new(),
        }
    }

    /// Loads `path` if it exists. Replay mode requires the file.
    pub fn open(path: &Path, mode: CacheMode) -> Result<Self, LlmError> {
        let err = |message: String| LlmError::Cache {
            path: path.display().to_string(),
            message,
        };
        let mut entries = HashMap::new();
        match File::open(path) {
            Ok(f) => {
                for (i, line) in BufReader::new(f).lines().enumerate() {
                    let line = line.map_err(|e| err(e.to_string()))?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    let e: CacheEntry =
                        serde_json::from_str(&line).map_err(|e| err(format!("line {}: {e}", i + 1)))?;
                    entries.entry(e.hash).or_insert(e.response);
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound && mode != CacheMode::Replay => {}
            Err(e) => return Err(err(e.to_string())),
        }
        Ok(TranscriptCache {
            mode,
            path: Some(path.to_path_buf()),
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, hash: &str) -> Option<&str> {
        self.entries.get(hash).map(String::as_str)
    }

    fn record(&mut self, req: &LlmRequest, hash: String, response: String) -> Result<(), LlmError> {
        if self.entries.contains_key(&hash) {
            return Ok(());
        }
        if let Some(path) = &self.path {
            let entry = CacheEntry {
                hash: hash.clone(),
                request: req.clone(),
                response: response.clone(),
            };
            let line = serde_json::to_string(&entry).expect("entry serializes");
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .and_then(|mut f| writeln!(f, "{line}").map(|_| f))
                .map_err(|e| LlmError::Cache {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
            let _ = f.flush();
        }
        self.entries.insert(hash, response);
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub endpoint: Option<String>,
    pub api_key: Option<String>,
    pub model: String,
    pub max_retries: usize,
    pub timeout: Duration,
    pub backoff: Duration,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            endpoint: None,
            api_key: None,
            model: "gpt-4o".into(),
            max_retries: 3,
            timeout: Duration::from_secs(120),
            backoff: Duration::from_millis(500),
        }
    }
}

impl GatewayConfig {
    /// Reads endpoint, key and model from the environment.
    pub fn from_env() -> Self {
        let mut c = GatewayConfig::default();
        c.endpoint = std::env::var(ENV_URL).ok().filter(|s| !s.is_empty());
        c.api_key = std::env::var(ENV_KEY).ok().filter(|s| !s.is_empty());
        if let Ok(m) = std::env::var(ENV_MODEL) {
            if !m.is_empty() {
                c.model = m;
            }
        }
        c
    }
}

/// Mode from `EVOREWARD_LLM_MODE`, if set.
pub fn mode_from_env() -> Result<Option<CacheMode>, String> {
    match std::env::var(ENV_MODE) {
        Ok(m) if !m.is_empty() => m.parse().map(Some),
        _ => Ok(None),
    }
}

pub struct LlmGateway {
    pub config: GatewayConfig,
    cache: Mutex<TranscriptCache>,
    client: Mutex<Option<reqwest::blocking::Client>>,
    calls: AtomicUsize,
    network_calls: AtomicUsize,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

impl LlmGateway {
    pub fn new(config: GatewayConfig, cache: TranscriptCache) -> Self {
        LlmGateway {
            config,
            cache: Mutex::new(cache),
            client: Mutex::new(None),
            calls: AtomicUsize::new(0),
            network_calls: AtomicUsize::new(0),
        }
    }

    pub fn mode(&self) -> CacheMode {
        self.cache.lock().unwrap().mode
    }

    pub fn model(&self) -> &str {
        &self.config.model
    }

    /// Requests answered, from the cache or the network.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn network_calls(&self) -> usize {
        self.network_calls.load(Ordering::SeqCst)
    }

    pub fn request(&self, messages: Vec<Message>, temperature: f64) -> LlmRequest {
        LlmRequest::new(self.config.model.clone(), messages, temperature)
    }

    pub fn complete(&self, req: &LlmRequest) -> Result<String, LlmError> {
        let hash = req.request_hash();
        let mode = {
            let cache = self.cache.lock().unwrap();
            if cache.mode != CacheMode::Live {
                if let Some(r) = cache.get(&hash) {
                    self.calls.fetch_add(1, Ordering::SeqCst);
                    return Ok(r.to_string());
                }
            }
            cache.mode
        };
        if mode == CacheMode::Replay {
            return Err(LlmError::ReplayMiss(hash));
        }
        let response = self.post(req)?;
        self.calls.fetch_add(1, Ordering::SeqCst);
        if mode == CacheMode::Record {
            self.cache.lock().unwrap().record(req, hash, response.clone())?;
        }
        Ok(response)
    }

    fn post(&self, req: &LlmRequest) -> Result<String, LlmError> {
        let endpoint = self.config.endpoint.as_deref().ok_or(LlmError::NoEndpoint)?;
        let client = {
            let mut slot = self.client.lock().unwrap();
            if slot.is_none() {
                let c = reqwest::blocking::Client::builder()
                    .timeout(self.config.timeout)
                    .build()
                    .map_err(|e| LlmError::Transport {
                        attempts: 0,
                        message: e.to_string(),
                    })?;
                *slot = Some(c);
            }
            slot.clone().unwrap()
        };
        let attempts = self.config.max_retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(self.config.backoff * (1 << (attempt - 1)));
            }
            self.network_calls.fetch_add(1, Ordering::SeqCst);
            let mut builder = client.post(endpoint).json(req);
            if let Some(key) = &self.config.api_key {
                builder = builder.bearer_auth(key);
            }
            let resp = match builder.send() {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("LLM request attempt {} failed: {e}", attempt + 1);
                    last = e.to_string();
                    continue;
                }
            };
            let status = resp.status();
            let body = match resp.text() {
                Ok(b) => b,
                Err(e) => {
                    last = e.to_string();
                    continue;
                }
            };
            if !status.is_success() {
                return Err(LlmError::Status {
                    status: status.as_u16(),
                    body,
                });
            }
            let parsed: ChatResponse = serde_json::from_str(&body).map_err(|e| LlmError::Malformed(e.to_string()))?;
            return parsed
                .choices
                .into_iter()
                .next()
                .map(|c| c.message.content)
                .ok_or_else(|| LlmError::Malformed("no choices".into()));
        }
        Err(LlmError::Transport {
            attempts,
            message: last,
        })
    }
}
