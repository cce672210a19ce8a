//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Mutex;

use erc_sentinel::bundled;
use erc_sentinel::gateway::{Gateway, LlmConfig, MockBackend, MockScript, RunLedger};
use erc_sentinel::load_ruleset;
use erc_sentinel_core::llm::{ChatModel, Completion, GatewayError, Message};
use erc_sentinel_core::prompt::estimate_tokens;
use erc_sentinel_core::rules::ErcRuleSet;

/// Solidity fixtures live with the core crate.
pub fn contract_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn contract(name: &str) -> String {
    std::fs::read_to_string(contract_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub const CONTRACTS: [&str; 6] = [
    "allowance_bypass.sol",
    "erc20_complete.sol",
    "erc20_public_total_supply.sol",
    "three_bugs.sol",
    "pre05.sol",
    "small.sol",
];

pub fn bundled_erc20() -> ErcRuleSet {
    load_ruleset(bundled::find("erc20").expect("bundled ERC20").text).expect("bundled ERC20 loads")
}

/// Gateway over a mock script, with an in-memory ledger.
pub fn mock_gateway(script: &str, budget: usize) -> Gateway {
    let config = LlmConfig {
        input_budget: budget,
        ..LlmConfig::default()
    };
    let backend = MockBackend::new(MockScript::parse(script).expect("mock script parses"));
    Gateway::new(Box::new(backend), config)
        .expect("valid config")
        .with_ledger(RunLedger::in_memory())
}

/// Passes prompts through and remembers each prompt's token estimate and text.
pub struct Recorder<'a> {
    pub inner: &'a dyn ChatModel,
    pub sent: Mutex<Vec<(usize, String)>>,
}

impl<'a> Recorder<'a> {
    pub fn new(inner: &'a dyn ChatModel) -> Self {
        Recorder {
            inner,
            sent: Mutex::new(Vec::new()),
        }
    }

    pub fn sent(&self) -> Vec<(usize, String)> {
        self.sent.lock().unwrap().clone()
    }
}

impl ChatModel for Recorder<'_> {
    fn complete(&self, messages: &[Message]) -> Result<Completion, GatewayError> {
        let estimate = messages.iter().map(|m| estimate_tokens(&m.content)).sum();
        self.sent
            .lock()
            .unwrap()
            .push((estimate, erc_sentinel_core::llm::concat_prompt(messages)));
        self.inner.complete(messages)
    }

    fn model_id(&self) -> &str {
        self.inner.model_id()
    }

    fn temperature(&self) -> f64 {
        self.inner.temperature()
    }
}
