//! Backend-agnostic completion calls with a disk cache, a fixture recorder and
//! a ceiling on in-flight backend calls.

mod cache;
mod http;
mod mock;
mod replay;

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::DiskCache;
pub use http::{HttpBackend, HttpConfig, RetryPolicy};
pub use mock::{MockRule, MockScript, ScriptedBackend, BLOCK_SEPARATOR};
pub use replay::{FixtureEntry, FixtureStore, ReplayBackend};

pub const DEFAULT_MODEL: &str = "text-davinci-003";
pub const DEFAULT_TEMPERATURE: f64 = 0.0;
pub const DEFAULT_MAX_TOKENS: u32 = 256;
pub const DEFAULT_CONCURRENCY: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("backend unavailable after {attempts} attempt(s): {last}")]
    BackendUnavailable { attempts: u32, last: String },
    #[error("backend rejected request with status {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("no fixture recorded for request digest {digest}")]
    FixtureMiss { digest: String },
    #[error("no credential configured: environment variable {var} is not set")]
    AuthMissing { var: String },
    #[error("invalid completion request: {0}")]
    InvalidRequest(String),
    #[error("cache entry {path} is corrupt: {reason}")]
    CacheCorrupt { path: String, reason: String },
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for GatewayError {
    fn from(e: std::io::Error) -> Self {
        GatewayError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<Vec<String>>,
}

impl CompletionRequest {
    /// A request with the default decoding parameters.
    pub fn new(prompt: impl Into<String>) -> Self {
        CompletionRequest {
            prompt: prompt.into(),
            model: DEFAULT_MODEL.to_string(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            stop: None,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.prompt.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("prompt is empty".into()));
        }
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

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub text: String,
    pub backend_id: String,
    pub cached: bool,
    pub latency_ms: u64,
    /// Digest of the request, used as a provenance handle.
    pub digest: String,
}

/// SHA-256 over the backend id and every request field.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CacheKey(String);

/// Backend id under which fixtures are keyed, independent of who recorded them.
pub const FIXTURE_NAMESPACE: &str = "fixture";

impl CacheKey {
    pub fn new(backend_id: &str, req: &CompletionRequest) -> Self {
        #[derive(Serialize)]
        struct KeyMaterial<'a> {
            backend_id: &'a str,
            model: &'a str,
            temperature: f64,
            max_tokens: u32,
            stop: &'a Option<Vec<String>>,
            prompt: &'a str,
        }
        let material = KeyMaterial {
            backend_id,
            model: &req.model,
            temperature: req.temperature,
            max_tokens: req.max_tokens,
            stop: &req.stop,
            prompt: &req.prompt,
        };
        let bytes = serde_json::to_vec(&material).expect("key material serializes");
        CacheKey(hex::encode(Sha256::digest(&bytes)))
    }

    pub fn fixture(req: &CompletionRequest) -> Self {
        CacheKey::new(FIXTURE_NAMESPACE, req)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// `<dir>/<first two hex digits>/<digest>.json`
    pub fn relative_path(&self) -> std::path::PathBuf {
        std::path::Path::new(&self.0[..2]).join(format!("{}.json", self.0))
    }
}

impl std::fmt::Display for CacheKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// A text-completion provider.
pub trait CompletionBackend: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, req: &CompletionRequest) -> Result<String, GatewayError>;
}

/// Anything the prompt units can send a prompt to.
pub trait Complete: Sync {
    fn ask(&self, prompt: &str) -> Result<CompletionResult, GatewayError>;
}

struct Semaphore {
    available: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn new(n: usize) -> Self {
        Semaphore {
            available: Mutex::new(n.max(1)),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock().unwrap();
        while *n == 0 {
            n = self.freed.wait(n).unwrap();
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().unwrap() += 1;
        self.0.freed.notify_one();
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayStats {
    pub gateway_calls: u64,
    pub cache_hits: u64,
}

/// Decoding parameters applied to every prompt sent through [`Complete::ask`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decoding {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default)]
    pub stop: Option<Vec<String>>,
}

impl Default for Decoding {
    fn default() -> Self {
        Decoding {
            model: DEFAULT_MODEL.to_string(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            stop: None,
        }
    }
}

pub struct Gateway {
    backend: Arc<dyn CompletionBackend>,
    cache: Option<DiskCache>,
    recorder: Option<FixtureStore>,
    decoding: Decoding,
    permits: Semaphore,
    ceiling: usize,
    inflight: Mutex<HashMap<CacheKey, Arc<Mutex<()>>>>,
    calls: AtomicU64,
    hits: AtomicU64,
}

impl Gateway {
    pub fn new(backend: Arc<dyn CompletionBackend>) -> Self {
        Gateway {
            backend,
            cache: None,
            recorder: None,
            decoding: Decoding::default(),
            permits: Semaphore::new(DEFAULT_CONCURRENCY),
            ceiling: DEFAULT_CONCURRENCY,
            inflight: Mutex::new(HashMap::new()),
            calls: AtomicU64::new(0),
            hits: AtomicU64::new(0),
        }
    }

    pub fn with_cache(mut self, cache: DiskCache) -> Self {
        self.cache = Some(cache);
        self
    }

    /// Writes a fixture for every request passing through, hit or miss.
    pub fn with_recorder(mut self, store: FixtureStore) -> Self {
        self.recorder = Some(store);
        self
    }

    pub fn with_decoding(mut self, decoding: Decoding) -> Self {
        self.decoding = decoding;
        self
    }

    pub fn with_concurrency(mut self, ceiling: usize) -> Self {
        self.permits = Semaphore::new(ceiling);
        self.ceiling = ceiling.max(1);
        self
    }

    pub fn backend_id(&self) -> &str {
        self.backend.id()
    }

    pub fn concurrency(&self) -> usize {
        self.ceiling
    }

    pub fn stats(&self) -> GatewayStats {
        GatewayStats {
            gateway_calls: self.calls.load(Ordering::SeqCst),
            cache_hits: self.hits.load(Ordering::SeqCst),
        }
    }

    pub fn request(&self, prompt: &str) -> CompletionRequest {
        CompletionRequest {
            prompt: prompt.to_string(),
            model: self.decoding.model.clone(),
            temperature: self.decoding.temperature,
            max_tokens: self.decoding.max_tokens,
            stop: self.decoding.stop.clone(),
        }
    }

    /// Calls the backend directly, bypassing the cache.
    pub fn complete(&self, req: &CompletionRequest) -> Result<CompletionResult, GatewayError> {
        req.validate()?;
        let result = self.call_backend(req)?;
        self.record(req, &result.text)?;
        Ok(result)
    }

    fn call_backend(&self, req: &CompletionRequest) -> Result<CompletionResult, GatewayError> {
        let _permit = self.permits.acquire();
        let started = Instant::now();
        self.calls.fetch_add(1, Ordering::SeqCst);
        let text = self.backend.complete(req)?;
        Ok(CompletionResult {
            text,
            backend_id: self.backend.id().to_string(),
            cached: false,
            latency_ms: started.elapsed().as_millis() as u64,
            digest: CacheKey::fixture(req).0,
        })
    }

    fn record(&self, req: &CompletionRequest, text: &str) -> Result<(), GatewayError> {
        if let Some(store) = &self.recorder {
            store.write(req, text)?;
        }
        Ok(())
    }

    fn lookup(&self, key: &CacheKey, req: &CompletionRequest) -> Option<CompletionResult> {
        let cache = self.cache.as_ref()?;
        match cache.get(key) {
            Ok(Some(text)) => Some(CompletionResult {
                text,
                backend_id: self.backend.id().to_string(),
                cached: true,
                latency_ms: 0,
                digest: CacheKey::fixture(req).0,
            }),
            Ok(None) => None,
            Err(e) => {
                log::warn!("{e}; discarding entry");
                cache.remove(key);
                None
            }
        }
    }

    /// Serves from the cache when possible; concurrent misses on one key
    /// result in a single backend call.
    pub fn cached_complete(&self, req: &CompletionRequest) -> Result<CompletionResult, GatewayError> {
        req.validate()?;
        let Some(cache) = &self.cache else {
            return self.complete(req);
        };
        let key = CacheKey::new(self.backend.id(), req);
        let result = match self.lookup(&key, req) {
            Some(hit) => hit,
            None => {
                let slot = {
                    let mut inflight = self.inflight.lock().unwrap();
                    inflight.entry(key.clone()).or_default().clone()
                };
                let result = {
                    let _guard = slot.lock().unwrap();
                    match self.lookup(&key, req) {
                        Some(hit) => Ok(hit),
                        None => self.call_backend(req).and_then(|res| {
                            cache.put(&key, self.backend.id(), req, &res.text)?;
                            Ok(res)
                        }),
                    }
                };
                self.inflight.lock().unwrap().remove(&key);
                result?
            }
        };
        if result.cached {
            self.hits.fetch_add(1, Ordering::SeqCst);
        }
        self.record(req, &result.text)?;
        Ok(result)
    }
}

impl Complete for Gateway {
    fn ask(&self, prompt: &str) -> Result<CompletionResult, GatewayError> {
        self.cached_complete(&self.request(prompt))
    }
}

/// Per-caller view of a gateway that counts its own calls and hits.
pub struct Tracked<'a> {
    inner: &'a dyn Complete,
    calls: AtomicU64,
    hits: AtomicU64,
}

impl<'a> Tracked<'a> {
    pub fn new(inner: &'a dyn Complete) -> Self {
        Tracked {
            inner,
            calls: AtomicU64::new(0),
            hits: AtomicU64::new(0),
        }
    }

    pub fn stats(&self) -> GatewayStats {
        GatewayStats {
            gateway_calls: self.calls.load(Ordering::SeqCst),
            cache_hits: self.hits.load(Ordering::SeqCst),
        }
    }
}

impl Complete for Tracked<'_> {
    fn ask(&self, prompt: &str) -> Result<CompletionResult, GatewayError> {
        let res = self.inner.ask(prompt)?;
        if res.cached {
            self.hits.fetch_add(1, Ordering::SeqCst);
        } else {
            self.calls.fetch_add(1, Ordering::SeqCst);
        }
        Ok(res)
    }
}

pub(crate) fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Writes `bytes` to a temporary sibling of `path`, then renames it into place.
pub(crate) fn publish_atomically(path: &std::path::Path, bytes: &[u8]) -> std::io::Result<()> {
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension(format!(
        "tmp.{}.{}",
        std::process::id(),
        COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })
}
