//! Provider abstraction for every model call in the pipeline.
//!
//! A [`Gateway`] binds a [`ModelHandle`] (which model, what it costs, how
//! long to wait) to a [`ChatBackend`] (live HTTP or scripted mock), and
//! threads each call through the optional response cache, the shared rate
//! limiter and the cost ledger.

mod cache;
mod http;
mod ledger;
mod limiter;
mod mock;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use cache::{CachedCompletion, ResponseCache};
pub use http::{BackoffPolicy, HttpBackend, API_BASE_ENV, API_KEY_ENV};
pub use ledger::{cost_micros, estimate_cost, CostLedger, CostReport, LedgerEntry, PhaseTotals};
pub use limiter::{Permit, RateLimiter};
pub use mock::{Exhaustion, MockBackend, MockRule, MockScript, Pick};

pub const DEFAULT_TIMEOUT_SECONDS: u64 = 30;
pub const DEFAULT_MAX_RETRIES: u32 = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("request timed out after {seconds}s")]
    Timeout { seconds: u64 },
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("provider error (status {status}): {body}")]
    ProviderError { status: u16, body: String },
    #[error("transport error after {attempts} attempts: {detail}")]
    Transport { attempts: u32, detail: String },
    #[error("mock script exhausted: {0}")]
    MockExhausted(String),
    #[error("gateway misconfigured: {0}")]
    Config(String),
}

/// Which pipeline phase a call is billed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Diagnosis,
    Synthesis,
    Evaluation,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Diagnosis, Role::Synthesis, Role::Evaluation];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Diagnosis => "diagnosis",
            Role::Synthesis => "synthesis",
            Role::Evaluation => "evaluation",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Mock,
}

impl BackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::Http => "http",
            BackendKind::Mock => "mock",
        }
    }
}

impl FromStr for BackendKind {
    type Err = GatewayError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "http" => Ok(BackendKind::Http),
            "mock" => Ok(BackendKind::Mock),
            other => Err(GatewayError::Config(format!("unknown backend {other:?}"))),
        }
    }
}

/// A model role binding with its endpoint and prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHandle {
    pub backend: BackendKind,
    pub model_name: String,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub price_per_1k_input: f64,
    #[serde(default)]
    pub price_per_1k_output: f64,
    #[serde(default = "default_timeout")]
    pub timeout_seconds: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
}

fn default_timeout() -> u64 {
    DEFAULT_TIMEOUT_SECONDS
}

fn default_retries() -> u32 {
    DEFAULT_MAX_RETRIES
}

impl ModelHandle {
    pub fn mock(model_name: impl Into<String>) -> Self {
        ModelHandle {
            backend: BackendKind::Mock,
            model_name: model_name.into(),
            endpoint: None,
            price_per_1k_input: 0.0,
            price_per_1k_output: 0.0,
            timeout_seconds: DEFAULT_TIMEOUT_SECONDS,
            max_retries: DEFAULT_MAX_RETRIES,
        }
    }

    pub fn http(model_name: impl Into<String>, endpoint: impl Into<String>) -> Self {
        ModelHandle {
            backend: BackendKind::Http,
            endpoint: Some(endpoint.into()),
            ..ModelHandle::mock(model_name)
        }
    }

    pub fn with_prices(mut self, input_per_1k: f64, output_per_1k: f64) -> Self {
        self.price_per_1k_input = input_per_1k;
        self.price_per_1k_output = output_per_1k;
        self
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(self.price_per_1k_input >= 0.0 && self.price_per_1k_output >= 0.0) {
            return Err(GatewayError::Config(format!(
                "{}: prices must be >= 0",
                self.model_name
            )));
        }
        if self.timeout_seconds == 0 {
            return Err(GatewayError::Config(format!(
                "{}: timeout must be > 0",
                self.model_name
            )));
        }
        if self.backend == BackendKind::Http && self.endpoint.is_none() {
            return Err(GatewayError::Config(format!(
                "{}: http backend needs an endpoint",
                self.model_name
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
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

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Distinguishes repeated samples of one prompt (self-consistency) so
    /// the cache does not collapse them. Not sent to the provider.
    pub sample: u32,
}

impl ChatRequest {
    pub fn user(prompt: impl Into<String>, temperature: f64, max_tokens: u32) -> Self {
        ChatRequest {
            messages: vec![Message::user(prompt)],
            temperature,
            max_tokens,
            sample: 0,
        }
    }

    pub fn with_sample(mut self, sample: u32) -> Self {
        self.sample = sample;
        self
    }

    /// All message contents joined; what mock matchers see.
    pub fn prompt_text(&self) -> String {
        self.messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub usage: Usage,
    pub cost_usd: f64,
    pub cached: bool,
}

/// Whitespace-piece token estimate: ceil(pieces * 1.3).
pub fn estimate_tokens(text: &str) -> u64 {
    let pieces = text.split_whitespace().count() as u64;
    (pieces * 13).div_ceil(10)
}

pub trait ChatBackend: Send + Sync {
    fn complete(
        &self,
        handle: &ModelHandle,
        request: &ChatRequest,
    ) -> Result<(String, Usage), GatewayError>;
}

/// A model handle wired to its backend and ledger. Cache and limiter are optional.
#[derive(Clone)]
pub struct Gateway {
    handle: ModelHandle,
    backend: Arc<dyn ChatBackend>,
    ledger: Arc<CostLedger>,
    cache: Option<Arc<ResponseCache>>,
    limiter: Option<Arc<RateLimiter>>,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway")
            .field("handle", &self.handle)
            .field("cache", &self.cache.as_ref().map(|c| c.dir().to_path_buf()))
            .finish_non_exhaustive()
    }
}

impl Gateway {
    pub fn new(
        handle: ModelHandle,
        backend: Arc<dyn ChatBackend>,
        ledger: Arc<CostLedger>,
    ) -> Self {
        Gateway {
            handle,
            backend,
            ledger,
            cache: None,
            limiter: None,
        }
    }

    pub fn with_cache(mut self, cache: Arc<ResponseCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_limiter(mut self, limiter: Arc<RateLimiter>) -> Self {
        self.limiter = Some(limiter);
        self
    }

    pub fn handle(&self) -> &ModelHandle {
        &self.handle
    }

    pub fn ledger(&self) -> &Arc<CostLedger> {
        &self.ledger
    }

    pub fn chat(&self, role: Role, request: &ChatRequest) -> Result<Completion, GatewayError> {
        let cache_key = self
            .cache
            .as_ref()
            .map(|_| ResponseCache::key(&self.handle, request));
        if let (Some(cache), Some(key)) = (&self.cache, &cache_key) {
            if let Some(hit) = cache.get(key) {
                tracing::trace!(key = %key, "cache hit");
                return Ok(Completion {
                    text: hit.text,
                    usage: hit.usage,
                    cost_usd: 0.0,
                    cached: true,
                });
            }
        }

        let (text, usage) = {
            let _permit = self.limiter.as_ref().map(|l| l.acquire());
            self.backend.complete(&self.handle, request)?
        };
        let entry = self.ledger.record(role, &self.handle, usage);

        if let (Some(cache), Some(key)) = (&self.cache, &cache_key) {
            if let Err(e) = cache.put(
                key,
                &CachedCompletion {
                    text: text.clone(),
                    usage,
                },
            ) {
                tracing::warn!(error = %e, "failed to write cache entry");
            }
        }
        Ok(Completion {
            text,
            usage,
            cost_usd: entry.cost_usd(),
            cached: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_estimator_rounds_up() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("one"), 2);
        assert_eq!(estimate_tokens("a b c d e f g h i j"), 13);
        assert_eq!(estimate_tokens("  spaced \n\t out  "), 3);
    }

    #[test]
    fn handle_defaults() {
        let h: ModelHandle =
            serde_json::from_str(r#"{"backend":"mock","model_name":"m"}"#).unwrap();
        assert_eq!(h.timeout_seconds, 30);
        assert_eq!(h.max_retries, DEFAULT_MAX_RETRIES);
        h.validate().unwrap();
    }

    #[test]
    fn handle_validation() {
        let mut h = ModelHandle::mock("m");
        h.timeout_seconds = 0;
        assert!(h.validate().is_err());
        let h = ModelHandle::mock("m").with_prices(-1.0, 0.0);
        assert!(h.validate().is_err());
        let mut h = ModelHandle::http("m", "http://x");
        h.endpoint = None;
        assert!(h.validate().is_err());
    }

    #[test]
    fn mock_call_records_usage_in_ledger() {
        let ledger = Arc::new(CostLedger::new());
        let script = MockScript::new(1).rule(MockRule::any(["hello world"]));
        let gw = Gateway::new(
            ModelHandle::mock("m").with_prices(1.0, 2.0),
            Arc::new(MockBackend::new(script)),
            ledger.clone(),
        );
        let out = gw
            .chat(
                Role::Evaluation,
                &ChatRequest::user("one two three", 0.0, 10),
            )
            .unwrap();
        assert_eq!(out.text, "hello world");
        assert_eq!(
            out.usage,
            Usage {
                prompt_tokens: 4,
                completion_tokens: 3
            }
        );
        // 4/1000*1 + 3/1000*2 = 0.010
        assert!((out.cost_usd - 0.01).abs() < 1e-12);
        assert_eq!(ledger.entries().len(), 1);
    }
}
