//! Translation, chat-completion and Wikipedia clients behind one contract.
//!
//! A [`Backend`] wraps a [`Transport`] (HTTP or mock) with the persistent
//! response cache, a rate limiter and a retry policy. Every network
//! attempt is counted so callers can assert that offline runs stay offline.

mod cache;
mod clock;
#[cfg(feature = "http")]
pub mod http;
pub mod mock;
mod ratelimit;
mod wiki;

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{cache_key, cache_path, normalize_input, CacheEntry, CacheError, ResponseCache};
pub use clock::{Clock, FixedClock, SystemClock, VirtualClock};
pub use ratelimit::RateLimiter;
pub use wiki::{HistoryLookup, HistoryStatus, WikiClient, WikiPage, DEFAULT_HISTORY_TITLES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mt,
    Chat,
    Wiki,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Mt => "mt",
            BackendKind::Chat => "chat",
            BackendKind::Wiki => "wiki",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provider {
    Google,
    Deepl,
    Openai,
    Wikipedia,
    Mock,
}

fn default_rate_limit() -> f64 {
    5.0
}

/// Static description of one backend, as read from the run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendDescriptor {
    pub backend_id: String,
    pub kind: BackendKind,
    pub provider: Provider,
    #[serde(default)]
    pub endpoint: String,
    /// Name of the environment variable holding the credential.
    #[serde(default)]
    pub auth: Option<String>,
    /// Requests per second.
    #[serde(default = "default_rate_limit")]
    pub rate_limit: f64,
    /// Chat model identifier, e.g. `gpt-3.5-turbo-0125`.
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub temperature: f64,
    /// Lookup table for the mock provider (TSV).
    #[serde(default)]
    pub mock_table: Option<String>,
}

impl BackendDescriptor {
    pub fn new(backend_id: &str, kind: BackendKind, provider: Provider) -> Self {
        BackendDescriptor {
            backend_id: backend_id.to_string(),
            kind,
            provider,
            endpoint: String::new(),
            auth: None,
            rate_limit: default_rate_limit(),
            model: None,
            temperature: 0.0,
            mock_table: None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.backend_id.trim().is_empty() {
            return Err("backend_id is empty".into());
        }
        if !(self.rate_limit > 0.0 && self.rate_limit.is_finite()) {
            return Err(format!("backend `{}`: rate_limit must be > 0", self.backend_id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Operation {
    Translate { src: String, tgt: String },
    Complete,
    Sections,
}

impl Operation {
    pub fn tag(&self) -> String {
        match self {
            Operation::Translate { src, tgt } => format!("translate:{src}>{tgt}"),
            Operation::Complete => "complete".into(),
            Operation::Sections => "sections".into(),
        }
    }

    fn kind(&self) -> BackendKind {
        match self {
            Operation::Translate { .. } => BackendKind::Mt,
            Operation::Complete => BackendKind::Chat,
            Operation::Sections => BackendKind::Wiki,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Request {
    pub operation: Operation,
    /// Normalized input text.
    pub input: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportErrorKind {
    Network,
    Auth,
    RateLimited,
    Server,
    /// Empty or truncated completion.
    Empty,
    BadResponse,
}

#[derive(Debug, Clone, Error)]
#[error("{kind:?}: {message}")]
pub struct TransportError {
    pub kind: TransportErrorKind,
    pub message: String,
}

impl TransportError {
    pub fn new(kind: TransportErrorKind, message: impl Into<String>) -> Self {
        TransportError {
            kind,
            message: message.into(),
        }
    }

    pub fn retryable(&self) -> bool {
        matches!(
            self.kind,
            TransportErrorKind::Network | TransportErrorKind::RateLimited | TransportErrorKind::Server | TransportErrorKind::Empty
        )
    }
}

/// One round trip to a remote service. Implementations return the raw
/// response text that gets cached.
pub trait Transport: Send + Sync {
    fn call(&self, request: &Request) -> Result<String, TransportError>;
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend `{backend_id}`: cache miss for key {key} (cache-only mode)")]
    CacheMiss { backend_id: String, key: String },
    #[error("backend `{backend_id}` failed after {attempts} attempt(s): {source}")]
    Transport {
        backend_id: String,
        attempts: u32,
        #[source]
        source: TransportError,
    },
    #[error("backend `{backend_id}` is {actual}, cannot serve a {expected} request")]
    WrongKind {
        backend_id: String,
        expected: BackendKind,
        actual: BackendKind,
    },
    #[error("backend `{backend_id}`: empty input")]
    EmptyInput { backend_id: String },
    #[error("backend `{backend_id}`: bad cached value: {message}")]
    BadValue { backend_id: String, message: String },
    #[error(transparent)]
    Cache(#[from] CacheError),
}

impl BackendError {
    /// True for failures that came from (or would need) the network.
    pub fn is_network(&self) -> bool {
        matches!(self, BackendError::Transport { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Online,
    /// Serve only from cache; misses are errors.
    CacheOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(250),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub text: String,
    /// Unix seconds when the response was first obtained.
    pub created_at: u64,
    pub from_cache: bool,
}

pub struct Backend {
    descriptor: BackendDescriptor,
    transport: Box<dyn Transport>,
    cache: Arc<ResponseCache>,
    limiter: RateLimiter,
    retry: RetryPolicy,
    mode: Mode,
    clock: Arc<dyn Clock>,
    network_calls: AtomicU64,
}

impl fmt::Debug for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Backend")
            .field("backend_id", &self.descriptor.backend_id)
            .field("kind", &self.descriptor.kind)
            .field("mode", &self.mode)
            .finish()
    }
}

pub struct BackendBuilder {
    descriptor: BackendDescriptor,
    transport: Box<dyn Transport>,
    cache: Option<Arc<ResponseCache>>,
    retry: RetryPolicy,
    mode: Mode,
    clock: Option<Arc<dyn Clock>>,
}

impl BackendBuilder {
    pub fn cache(mut self, cache: Arc<ResponseCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = Some(clock);
        self
    }

    pub fn build(self) -> Backend {
        let clock = self.clock.unwrap_or_else(|| Arc::new(SystemClock::new()));
        Backend {
            limiter: RateLimiter::new(self.descriptor.rate_limit, clock.clone()),
            descriptor: self.descriptor,
            transport: self.transport,
            cache: self.cache.unwrap_or_else(|| Arc::new(ResponseCache::in_memory())),
            retry: self.retry,
            mode: self.mode,
            clock,
            network_calls: AtomicU64::new(0),
        }
    }
}

impl Backend {
    pub fn builder(descriptor: BackendDescriptor, transport: Box<dyn Transport>) -> BackendBuilder {
        BackendBuilder {
            descriptor,
            transport,
            cache: None,
            retry: RetryPolicy::default(),
            mode: Mode::Online,
            clock: None,
        }
    }

    pub fn id(&self) -> &str {
        &self.descriptor.backend_id
    }

    pub fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    pub fn kind(&self) -> BackendKind {
        self.descriptor.kind
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }

    /// Transport attempts made so far, including failed ones.
    pub fn network_calls(&self) -> u64 {
        self.network_calls.load(Ordering::SeqCst)
    }

    pub fn request(&self, operation: Operation, input: &str) -> Result<Response, BackendError> {
        if operation.kind() != self.descriptor.kind {
            return Err(BackendError::WrongKind {
                backend_id: self.id().to_string(),
                expected: operation.kind(),
                actual: self.descriptor.kind,
            });
        }
        let input = normalize_input(input);
        if input.is_empty() {
            return Err(BackendError::EmptyInput {
                backend_id: self.id().to_string(),
            });
        }
        let tag = operation.tag();
        let key = cache_key(self.id(), &tag, &input);
        if let Some(hit) = self.cache.get(&key) {
            log::trace!("{}: cache hit {key}", self.id());
            return Ok(Response {
                text: hit.value,
                created_at: hit.created_at,
                from_cache: true,
            });
        }
        if self.mode == Mode::CacheOnly {
            return Err(BackendError::CacheMiss {
                backend_id: self.id().to_string(),
                key,
            });
        }
        let request = Request { operation, input };
        let text = self.call_with_retry(&request)?;
        let stored = self.cache.insert(CacheEntry {
            key,
            operation: tag,
            input: request.input,
            value: text,
            created_at: self.clock.unix_seconds(),
        })?;
        Ok(Response {
            text: stored.value,
            created_at: stored.created_at,
            from_cache: false,
        })
    }

    fn call_with_retry(&self, request: &Request) -> Result<String, BackendError> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            self.limiter.acquire();
            self.network_calls.fetch_add(1, Ordering::SeqCst);
            log::debug!("{}: {} ({} chars), attempt {attempt}", self.id(), request.operation.tag(), request.input.chars().count());
            let outcome = self.transport.call(request).and_then(|text| {
                if text.trim().is_empty() {
                    Err(TransportError::new(TransportErrorKind::Empty, "empty response"))
                } else {
                    Ok(text)
                }
            });
            match outcome {
                Ok(text) => return Ok(text),
                Err(err) if err.retryable() && attempt < self.retry.max_attempts => {
                    let delay = self.retry.base_delay * 2u32.pow(attempt - 1);
                    log::warn!("{}: {err}; retrying in {delay:?}", self.id());
                    self.clock.sleep(delay);
                }
                Err(source) => {
                    return Err(BackendError::Transport {
                        backend_id: self.id().to_string(),
                        attempts: attempt,
                        source,
                    })
                }
            }
        }
    }

    pub fn translate(&self, text: &str, src_lang: &str, tgt_lang: &str) -> Result<String, BackendError> {
        self.translate_response(text, src_lang, tgt_lang).map(|r| r.text)
    }

    pub fn translate_response(&self, text: &str, src_lang: &str, tgt_lang: &str) -> Result<Response, BackendError> {
        self.request(
            Operation::Translate {
                src: src_lang.to_string(),
                tgt: tgt_lang.to_string(),
            },
            text,
        )
    }

    pub fn complete(&self, prompt: &str) -> Result<Response, BackendError> {
        self.request(Operation::Complete, prompt)
    }

    /// Section titles of the page named `title`, or `None` when no page
    /// exists.
    pub fn sections(&self, title: &str) -> Result<Option<Vec<String>>, BackendError> {
        let response = self.request(Operation::Sections, title)?;
        let page: WikiPage = serde_json::from_str(&response.text).map_err(|e| BackendError::BadValue {
            backend_id: self.id().to_string(),
            message: e.to_string(),
        })?;
        Ok(page.exists.then_some(page.sections))
    }
}

#[cfg(test)]
mod tests {
    use super::mock::MockTransport;
    use super::*;
    use std::collections::HashMap;

    fn mt(transport: MockTransport, clock: Arc<VirtualClock>) -> Backend {
        let mut d = BackendDescriptor::new("google-like", BackendKind::Mt, Provider::Mock);
        d.rate_limit = 100.0;
        Backend::builder(d, Box::new(transport)).clock(clock).build()
    }

    #[test]
    fn translate_uses_table_and_cache() {
        let table: HashMap<String, String> = [("水煮鱼".to_string(), "boiled fish".to_string())].into();
        let backend = mt(MockTransport::table(table), Arc::new(VirtualClock::new(1_700_000_000)));
        assert_eq!(backend.translate("水煮鱼", "zh", "en").unwrap(), "boiled fish");
        assert_eq!(backend.network_calls(), 1);
        let again = backend.translate_response(" 水煮鱼 ", "zh", "en").unwrap();
        assert!(again.from_cache);
        assert_eq!(again.created_at, 1_700_000_000);
        assert_eq!(backend.network_calls(), 1);
    }

    #[test]
    fn cache_only_miss_names_the_key() {
        let mut d = BackendDescriptor::new("deepl-like", BackendKind::Mt, Provider::Mock);
        d.rate_limit = 10.0;
        let backend = Backend::builder(d, Box::new(MockTransport::table(HashMap::new())))
            .mode(Mode::CacheOnly)
            .build();
        let err = backend.translate("佛跳墙", "zh", "en").unwrap_err();
        let expected = cache_key("deepl-like", "translate:zh>en", "佛跳墙");
        match &err {
            BackendError::CacheMiss { key, .. } => assert_eq!(key, &expected),
            other => panic!("unexpected {other}"),
        }
        assert!(err.to_string().contains(&expected));
        assert_eq!(backend.network_calls(), 0);
    }

    #[test]
    fn retries_twice_then_succeeds() {
        let clock = Arc::new(VirtualClock::new(0));
        let transport = MockTransport::scripted(vec![
            Err(TransportError::new(TransportErrorKind::Server, "503")),
            Err(TransportError::new(TransportErrorKind::Network, "reset")),
            Ok("FINAL: X".into()),
        ]);
        let mut d = BackendDescriptor::new("chat", BackendKind::Chat, Provider::Mock);
        d.rate_limit = 1000.0;
        let backend = Backend::builder(d, Box::new(transport)).clock(clock.clone()).build();
        assert_eq!(backend.complete("p").unwrap().text, "FINAL: X");
        assert_eq!(backend.network_calls(), 3);
        let backoff: Vec<Duration> = clock.sleeps().into_iter().filter(|d| *d >= Duration::from_millis(100)).collect();
        assert_eq!(backoff, [Duration::from_millis(250), Duration::from_millis(500)]);
    }

    #[test]
    fn gives_up_after_three_attempts_and_skips_non_retryable() {
        let clock = Arc::new(VirtualClock::new(0));
        let failing = MockTransport::scripted(vec![
            Err(TransportError::new(TransportErrorKind::Empty, "truncated")),
            Err(TransportError::new(TransportErrorKind::Empty, "truncated")),
            Err(TransportError::new(TransportErrorKind::Empty, "truncated")),
            Ok("late".into()),
        ]);
        let mut d = BackendDescriptor::new("chat", BackendKind::Chat, Provider::Mock);
        d.rate_limit = 1000.0;
        let backend = Backend::builder(d.clone(), Box::new(failing)).clock(clock.clone()).build();
        assert!(matches!(backend.complete("p"), Err(BackendError::Transport { attempts: 3, .. })));

        let auth = MockTransport::scripted(vec![Err(TransportError::new(TransportErrorKind::Auth, "401"))]);
        let backend = Backend::builder(d, Box::new(auth)).clock(clock).build();
        assert!(matches!(backend.complete("p"), Err(BackendError::Transport { attempts: 1, .. })));
    }

    #[test]
    fn empty_completion_counts_as_failure() {
        let clock = Arc::new(VirtualClock::new(0));
        let transport = MockTransport::scripted(vec![Ok("   ".into()), Ok("FINAL: ok".into())]);
        let mut d = BackendDescriptor::new("chat", BackendKind::Chat, Provider::Mock);
        d.rate_limit = 1000.0;
        let backend = Backend::builder(d, Box::new(transport)).clock(clock).build();
        assert_eq!(backend.complete("p").unwrap().text, "FINAL: ok");
        assert_eq!(backend.network_calls(), 2);
    }

    #[test]
    fn wrong_kind_and_empty_input_are_rejected() {
        let backend = mt(MockTransport::table(HashMap::new()), Arc::new(VirtualClock::new(0)));
        assert!(matches!(backend.complete("x"), Err(BackendError::WrongKind { .. })));
        assert!(matches!(backend.translate("  ", "zh", "en"), Err(BackendError::EmptyInput { .. })));
    }

    #[test]
    fn descriptor_validation() {
        let mut d = BackendDescriptor::new("x", BackendKind::Mt, Provider::Mock);
        assert!(d.validate().is_ok());
        d.rate_limit = 0.0;
        assert!(d.validate().is_err());
    }
}
