//! Completion providers and token/cost accounting.

mod http;
mod ledger;
mod mock;
mod money;

use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::HttpProvider;
pub use ledger::{total_cost, CostLedger, LedgerEntry};
pub use mock::MockProvider;
pub use money::{Usd, UsdParseError};

use crate::prompt::PromptBundle;
use crate::rtl::estimate_tokens;

pub const DEFAULT_API_KEY_ENV: &str = "SVA_FORGE_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProviderKind {
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub name: String,
    pub endpoint: String,
    pub model: String,
    pub context_limit: usize,
    pub usd_per_1k_tokens: Usd,
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub retry_base_ms: u64,
    pub temperature: Option<f64>,
    /// Token counts to book instead of the provider's or the estimate.
    pub usage_override: (Option<usize>, Option<usize>),
}

impl ProviderConfig {
    pub fn mock() -> Self {
        ProviderConfig {
            kind: ProviderKind::Mock,
            name: "mock".into(),
            endpoint: String::new(),
            model: "mock".into(),
            context_limit: 8192,
            usd_per_1k_tokens: Usd::ZERO,
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            timeout_secs: 60,
            max_retries: 3,
            retry_base_ms: 500,
            temperature: None,
            usage_override: (None, None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_ms: u64,
    pub provider: String,
}

/// What a provider returns before accounting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawCompletion {
    pub text: String,
    /// Provider-reported (prompt, completion) token counts.
    pub usage: Option<(u64, u64)>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LlmError {
    #[error("missing API key: environment variable {var} is not set")]
    AuthError { var: String },
    #[error("provider rejected the credentials (HTTP {status})")]
    Unauthorized { status: u16 },
    #[error("rate limited by the provider")]
    RateLimited,
    #[error("transport error: {0}")]
    TransportError(String),
    #[error("provider returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed provider response: {0}")]
    BadResponse(String),
    #[error("prompt of {tokens} tokens exceeds the context limit of {limit}")]
    ContextOverflow { tokens: usize, limit: usize },
    #[error("mock script exhausted after {calls} calls")]
    ScriptExhausted { calls: usize },
    #[error("cannot access {path}: {message}")]
    Io { path: String, message: String },
}

impl LlmError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> LlmError {
        LlmError::Io { path: path.display().to_string(), message: e.to_string() }
    }

    pub fn is_retryable(&self) -> bool {
        matches!(self, LlmError::RateLimited | LlmError::TransportError(_))
    }
}

pub trait Provider: Send + Sync {
    fn name(&self) -> &str;
    /// Single clean-slate request. Only HTTP providers touch the network.
    fn call(&self, prompt: &str) -> Result<RawCompletion, LlmError>;
}

impl<P: Provider + ?Sized> Provider for std::sync::Arc<P> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn call(&self, prompt: &str) -> Result<RawCompletion, LlmError> {
        (**self).call(prompt)
    }
}

/// A provider plus its configuration and the cost ledger.
pub struct Gateway {
    provider: Box<dyn Provider>,
    cfg: ProviderConfig,
    ledger: Mutex<CostLedger>,
}

impl Gateway {
    pub fn new(provider: Box<dyn Provider>, cfg: ProviderConfig, ledger: CostLedger) -> Self {
        Gateway { provider, cfg, ledger: Mutex::new(ledger) }
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.cfg
    }

    pub fn ledger(&self) -> CostLedger {
        self.ledger.lock().expect("ledger lock").clone()
    }

    pub fn complete(&self, bundle: &PromptBundle) -> Result<Completion, LlmError> {
        if bundle.token_estimate > self.cfg.context_limit {
            return Err(LlmError::ContextOverflow { tokens: bundle.token_estimate, limit: self.cfg.context_limit });
        }
        let prompt = bundle.text();
        let start = Instant::now();
        let mut attempt = 0u32;
        let raw = loop {
            match self.provider.call(&prompt) {
                Ok(raw) => break raw,
                Err(e) if e.is_retryable() && attempt < self.cfg.max_retries => {
                    let delay = self.cfg.retry_base_ms.saturating_mul(1u64 << attempt.min(16));
                    log::warn!("{e}; retrying in {delay} ms");
                    std::thread::sleep(Duration::from_millis(delay));
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        };
        let latency_ms = start.elapsed().as_millis() as u64;
        let (reported_p, reported_c) = match raw.usage {
            Some((p, c)) => (p, c),
            None => (estimate_tokens(&prompt) as u64, estimate_tokens(&raw.text) as u64),
        };
        let prompt_tokens = self.cfg.usage_override.0.map_or(reported_p, |n| n as u64);
        let completion_tokens = self.cfg.usage_override.1.map_or(reported_c, |n| n as u64);
        let entry = LedgerEntry::new(self.provider.name(), prompt_tokens, completion_tokens, self.cfg.usd_per_1k_tokens);
        self.ledger.lock().expect("ledger lock").append(entry)?;
        Ok(Completion {
            text: raw.text,
            prompt_tokens,
            completion_tokens,
            latency_ms,
            provider: self.provider.name().to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::{PromptBundle, PromptKind};
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn bundle(text: &str) -> PromptBundle {
        PromptBundle {
            kind: PromptKind::SvaGen,
            preamble: String::new(),
            rules_text: String::new(),
            payload: text.to_string(),
            appended_sva: None,
            token_estimate: estimate_tokens(text),
            stripped: false,
        }
    }

    struct Flaky {
        failures: usize,
        calls: AtomicUsize,
    }

    impl Provider for Flaky {
        fn name(&self) -> &str {
            "flaky"
        }
        fn call(&self, _: &str) -> Result<RawCompletion, LlmError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                Err(LlmError::RateLimited)
            } else {
                Ok(RawCompletion { text: "ok".into(), usage: Some((10, 2)) })
            }
        }
    }

    fn fast_cfg(retries: u32) -> ProviderConfig {
        ProviderConfig { max_retries: retries, retry_base_ms: 1, ..ProviderConfig::mock() }
    }

    #[test]
    fn retries_transient_errors() {
        let g = Gateway::new(Box::new(Flaky { failures: 2, calls: AtomicUsize::new(0) }), fast_cfg(2), CostLedger::in_memory());
        let c = g.complete(&bundle("x")).unwrap();
        assert_eq!((c.prompt_tokens, c.completion_tokens), (10, 2));
        let g = Gateway::new(Box::new(Flaky { failures: 3, calls: AtomicUsize::new(0) }), fast_cfg(2), CostLedger::in_memory());
        assert_eq!(g.complete(&bundle("x")), Err(LlmError::RateLimited));
        assert!(g.ledger().entries().is_empty());
    }

    #[test]
    fn context_overflow() {
        let cfg = ProviderConfig { context_limit: 1, ..fast_cfg(0) };
        let g = Gateway::new(Box::new(MockProvider::from_texts(vec!["a".into()])), cfg, CostLedger::in_memory());
        assert!(matches!(g.complete(&bundle("long prompt text")), Err(LlmError::ContextOverflow { .. })));
    }

    #[test]
    fn real_rate_with_usage_override() {
        let cfg = ProviderConfig {
            usd_per_1k_tokens: "0.03".parse().unwrap(),
            usage_override: (Some(2000), Some(500)),
            ..fast_cfg(0)
        };
        let g = Gateway::new(Box::new(MockProvider::from_texts(vec!["a".into()])), cfg, CostLedger::in_memory());
        g.complete(&bundle("p")).unwrap();
        assert_eq!(g.ledger().total_cost().to_string(), "0.075");
    }

    #[test]
    fn mock_is_free() {
        let g = Gateway::new(
            Box::new(MockProvider::from_texts(vec!["a".into(), "b".into()])),
            fast_cfg(0),
            CostLedger::in_memory(),
        );
        g.complete(&bundle("p")).unwrap();
        g.complete(&bundle("p")).unwrap();
        assert_eq!(g.ledger().entries().len(), 2);
        assert_eq!(g.ledger().total_cost(), Usd::ZERO);
    }
}
