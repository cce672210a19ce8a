//! Chat-completion access with a pre-flight budget check, an in-flight
//! limit, retries with exponential backoff and a run ledger.
//!
//! The [`Gateway`] wraps one [`Backend`]: the HTTP adapter for a live
//! service or the scripted mock. Both are used through the core
//! [`ChatModel`] trait.

mod http;
mod ledger;
mod mock;

use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use erc_sentinel_core::audit::sha256_hex;
use erc_sentinel_core::llm::{concat_prompt, ChatModel, Completion, GatewayError, Message};
use erc_sentinel_core::prompt::estimate_tokens;
use thiserror::Error;

pub use http::HttpBackend;
pub use ledger::{LedgerEntry, RunLedger};
pub use mock::{MockBackend, MockError, MockScript};

pub const DEFAULT_API_KEY_ENV: &str = "ERC_SENTINEL_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Delay before the second attempt; doubled for every further attempt.
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    /// Delay after failed attempt number `attempt` (1-based).
    pub fn delay(&self, attempt: u32) -> Duration {
        self.base_delay.saturating_mul(1u32 << (attempt.saturating_sub(1)).min(16))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmConfig {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_in_flight: usize,
    /// Largest accepted prompt, in estimated tokens.
    pub input_budget: usize,
    pub retry: RetryPolicy,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout: Duration,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            endpoint: String::new(),
            model: String::new(),
            temperature: 0.0,
            max_in_flight: 4,
            input_budget: 12_000,
            retry: RetryPolicy::default(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            timeout: Duration::from_secs(120),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("temperature must be a finite number >= 0")]
    Temperature,
    #[error("max_in_flight must be at least 1")]
    MaxInFlight,
    #[error("input_budget must be positive")]
    Budget,
    #[error("retry.max_attempts must be at least 1")]
    Attempts,
}

impl LlmConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(ConfigError::Temperature);
        }
        if self.max_in_flight == 0 {
            return Err(ConfigError::MaxInFlight);
        }
        if self.input_budget == 0 {
            return Err(ConfigError::Budget);
        }
        if self.retry.max_attempts == 0 {
            return Err(ConfigError::Attempts);
        }
        Ok(())
    }
}

/// Failure of a single request, before retry handling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendError {
    /// Worth retrying: connection problems, rate limits, server errors.
    Transient {
        message: String,
        retry_after: Option<Duration>,
    },
    Auth(String),
    /// Retrying cannot help (malformed request or response).
    Fatal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Live,
    Mock,
}

/// One request to a chat-completion service.
pub trait Backend: Send + Sync {
    fn send(&self, messages: &[Message], config: &LlmConfig) -> Result<Completion, BackendError>;
    fn kind(&self) -> BackendKind;
    fn model_id(&self) -> &str;
}

/// Counting semaphore over a mutex and condition variable.
struct Slots {
    free: Mutex<usize>,
    freed: Condvar,
}

struct SlotGuard<'a>(&'a Slots);

impl Slots {
    fn new(n: usize) -> Self {
        Slots {
            free: Mutex::new(n),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.freed.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        SlotGuard(self)
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        let mut free = self.0.free.lock().unwrap_or_else(|e| e.into_inner());
        *free += 1;
        self.0.freed.notify_one();
    }
}

pub struct Gateway {
    backend: Box<dyn Backend>,
    config: LlmConfig,
    slots: Slots,
    ledger: Option<RunLedger>,
    sleep: fn(Duration),
}

impl Gateway {
    pub fn new(backend: Box<dyn Backend>, config: LlmConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(Gateway {
            backend,
            slots: Slots::new(config.max_in_flight),
            config,
            ledger: None,
            sleep: std::thread::sleep,
        })
    }

    pub fn with_ledger(mut self, ledger: RunLedger) -> Self {
        self.ledger = Some(ledger);
        self
    }

    /// Replaces the backoff sleep, for tests.
    pub fn with_sleep(mut self, sleep: fn(Duration)) -> Self {
        self.sleep = sleep;
        self
    }

    pub fn backend_kind(&self) -> BackendKind {
        self.backend.kind()
    }

    pub fn config(&self) -> &LlmConfig {
        &self.config
    }

    pub fn ledger(&self) -> Option<&RunLedger> {
        self.ledger.as_ref()
    }

    fn record(&self, prompt: &str, in_tokens: usize, out_tokens: usize, started: Instant, outcome: &str) {
        if let Some(ledger) = &self.ledger {
            ledger.record(LedgerEntry {
                prompt_sha256: sha256_hex(prompt.as_bytes()),
                in_tokens,
                out_tokens,
                ms: started.elapsed().as_millis() as u64,
                outcome: outcome.into(),
            });
        }
    }
}

impl ChatModel for Gateway {
    fn complete(&self, messages: &[Message]) -> Result<Completion, GatewayError> {
        let started = Instant::now();
        let prompt = concat_prompt(messages);
        let estimate: usize = messages.iter().map(|m| estimate_tokens(&m.content)).sum();
        if estimate > self.config.input_budget {
            self.record(&prompt, estimate, 0, started, "budget-exceeded");
            return Err(GatewayError::BudgetExceeded {
                estimate,
                budget: self.config.input_budget,
            });
        }

        let policy = self.config.retry;
        let mut attempt = 1;
        loop {
            let outcome = {
                let _slot = self.slots.acquire();
                self.backend.send(messages, &self.config)
            };
            match outcome {
                Ok(c) => {
                    self.record(&prompt, c.in_tokens, c.out_tokens, started, "ok");
                    return Ok(c);
                }
                Err(BackendError::Transient { message, retry_after }) if attempt < policy.max_attempts => {
                    let delay = retry_after.unwrap_or_else(|| policy.delay(attempt));
                    log::warn!("request failed ({message}); retrying in {delay:?}");
                    (self.sleep)(delay);
                    attempt += 1;
                }
                Err(BackendError::Transient { message, .. }) => {
                    self.record(&prompt, estimate, 0, started, "transport-error");
                    return Err(GatewayError::Transport(format!("{message} (after {attempt} attempts)")));
                }
                Err(BackendError::Auth(message)) => {
                    self.record(&prompt, estimate, 0, started, "auth-error");
                    return Err(GatewayError::Auth(message));
                }
                Err(BackendError::Fatal(message)) => {
                    self.record(&prompt, estimate, 0, started, "transport-error");
                    return Err(GatewayError::Transport(message));
                }
            }
        }
    }

    fn model_id(&self) -> &str {
        self.backend.model_id()
    }

    fn temperature(&self) -> f64 {
        self.config.temperature
    }
}
