//! Layered configuration: command-line flags, then environment variables,
//! then a TOML file. Flags and environment are resolved together by the
//! argument parser; this module adds the file layer and defaults.
//!
//! API keys are never read from here; only the name of the variable that
//! holds the key is configurable.

use std::path::{Path, PathBuf};
use std::time::Duration;

use erc_sentinel_core::audit::ReportFormat;
use serde::Deserialize;
use thiserror::Error;

use erc_sentinel_core::llm::GatewayError;

use crate::gateway::{ConfigError, Gateway, HttpBackend, LlmConfig, MockBackend, MockError, MockScript, RetryPolicy, RunLedger};

pub const DEFAULT_CONFIG_FILE: &str = "erc-sentinel.toml";

/// One configuration layer. Every field is optional so layers can be
/// stacked with [`Settings::or`].
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub temperature: Option<f64>,
    pub max_in_flight: Option<usize>,
    pub input_budget: Option<usize>,
    pub max_attempts: Option<u32>,
    pub retry_base_ms: Option<u64>,
    pub timeout_secs: Option<u64>,
    pub api_key_env: Option<String>,
    pub rules: Option<PathBuf>,
    pub format: Option<String>,
    pub mock: Option<PathBuf>,
    pub ledger: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum SettingsError {
    #[error("cannot read config file {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config file {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("unknown report format `{0}` (expected text or json)")]
    Format(String),
    #[error(transparent)]
    Invalid(#[from] ConfigError),
}

macro_rules! layer {
    ($hi:ident, $lo:ident, $($f:ident),*) => {
        Settings { $($f: $hi.$f.or($lo.$f)),* }
    };
}

impl Settings {
    /// Field-wise: values in `self` win over `lower`.
    pub fn or(self, lower: Settings) -> Settings {
        layer!(
            self, lower, endpoint, model, temperature, max_in_flight, input_budget, max_attempts, retry_base_ms,
            timeout_secs, api_key_env, rules, format, mock, ledger
        )
    }

    pub fn from_toml(text: &str, path: &Path) -> Result<Settings, SettingsError> {
        toml::from_str(text).map_err(|e| SettingsError::Parse {
            path: path.to_path_buf(),
            message: e.message().to_string(),
        })
    }

    /// Reads `explicit` if given, else the default file in the working
    /// directory when it exists.
    pub fn from_file(explicit: Option<&Path>) -> Result<Settings, SettingsError> {
        let path = match explicit {
            Some(p) => p.to_path_buf(),
            None => {
                let p = PathBuf::from(DEFAULT_CONFIG_FILE);
                if !p.exists() {
                    return Ok(Settings::default());
                }
                p
            }
        };
        let text = std::fs::read_to_string(&path).map_err(|source| SettingsError::Read {
            path: path.clone(),
            source,
        })?;
        Self::from_toml(&text, &path)
    }

    pub fn llm_config(&self) -> Result<LlmConfig, SettingsError> {
        let d = LlmConfig::default();
        let config = LlmConfig {
            endpoint: self.endpoint.clone().unwrap_or(d.endpoint),
            model: self.model.clone().unwrap_or(d.model),
            temperature: self.temperature.unwrap_or(d.temperature),
            max_in_flight: self.max_in_flight.unwrap_or(d.max_in_flight),
            input_budget: self.input_budget.unwrap_or(d.input_budget),
            retry: RetryPolicy {
                max_attempts: self.max_attempts.unwrap_or(d.retry.max_attempts),
                base_delay: self.retry_base_ms.map_or(d.retry.base_delay, Duration::from_millis),
            },
            api_key_env: self.api_key_env.clone().unwrap_or(d.api_key_env),
            timeout: self.timeout_secs.map_or(d.timeout, Duration::from_secs),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn report_format(&self) -> Result<ReportFormat, SettingsError> {
        match self.format.as_deref().unwrap_or("text") {
            "text" => Ok(ReportFormat::Text),
            "json" => Ok(ReportFormat::Json),
            other => Err(SettingsError::Format(other.to_string())),
        }
    }

    /// Which model backend these settings select. A mock script always
    /// wins so that mock runs never touch the network.
    pub fn backend(&self) -> BackendChoice {
        match &self.mock {
            Some(p) => BackendChoice::Mock(p.clone()),
            None => BackendChoice::Live,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendChoice {
    Live,
    Mock(PathBuf),
}

#[derive(Debug, Error)]
pub enum SetupError {
    #[error(transparent)]
    Settings(#[from] SettingsError),
    #[error("cannot read mock script {path}: {source}")]
    MockRead { path: PathBuf, source: std::io::Error },
    #[error("mock script {path}: {source}")]
    Mock { path: PathBuf, source: MockError },
    #[error("cannot open ledger {path}: {source}")]
    Ledger { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Live(GatewayError),
}

/// Builds the gateway the settings select. With a mock script the live
/// adapter is never constructed.
pub fn build_gateway(settings: &Settings) -> Result<Gateway, SetupError> {
    let config = settings.llm_config()?;
    let backend: Box<dyn crate::gateway::Backend> = match settings.backend() {
        BackendChoice::Mock(path) => {
            let text = std::fs::read_to_string(&path).map_err(|source| SetupError::MockRead {
                path: path.clone(),
                source,
            })?;
            let script = MockScript::parse(&text).map_err(|source| SetupError::Mock { path, source })?;
            Box::new(MockBackend::new(script))
        }
        BackendChoice::Live => Box::new(HttpBackend::from_env(&config).map_err(SetupError::Live)?),
    };
    let mut gateway = Gateway::new(backend, config).map_err(|e| SetupError::Settings(e.into()))?;
    if let Some(path) = &settings.ledger {
        let ledger = RunLedger::to_file(path).map_err(|source| SetupError::Ledger {
            path: path.clone(),
            source,
        })?;
        gateway = gateway.with_ledger(ledger);
    }
    Ok(gateway)
}
