//! Scripted stand-in for the model: ordered regex matchers over the
//! concatenated prompt, first match wins, with a fallback answer.

use erc_sentinel_core::llm::{concat_prompt, Completion, Message};
use erc_sentinel_core::prompt::estimate_tokens;
use regex::Regex;
use serde::Deserialize;
use thiserror::Error;

use super::{Backend, BackendError, BackendKind, LlmConfig};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MockError {
    #[error("mock script line {line}: {reason}")]
    ParseError { line: usize, reason: String },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    #[serde(rename = "match")]
    pattern: String,
    response: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScript {
    #[serde(default)]
    responses: Vec<RawEntry>,
    #[serde(default)]
    fallback: String,
}

#[derive(Debug, Clone)]
pub struct MockScript {
    entries: Vec<(Regex, String)>,
    fallback: String,
}

impl MockScript {
    pub fn new(entries: Vec<(Regex, String)>, fallback: impl Into<String>) -> Self {
        MockScript {
            entries,
            fallback: fallback.into(),
        }
    }

    /// Parses the YAML script format:
    ///
    /// ```yaml
    /// responses:
    ///   - match: "allowance"
    ///     response: "VERDICT: VIOLATION"
    /// fallback: "VERDICT: COMPLIANT"
    /// ```
    pub fn parse(text: &str) -> Result<Self, MockError> {
        let raw: RawScript = serde_yaml::from_str(text).map_err(|e| MockError::ParseError {
            line: e.location().map_or(0, |l| l.line()),
            reason: e.to_string(),
        })?;
        let entries = raw
            .responses
            .into_iter()
            .enumerate()
            .map(|(i, e)| {
                Regex::new(&e.pattern)
                    .map(|re| (re, e.response))
                    .map_err(|err| MockError::ParseError {
                        line: 0,
                        reason: format!("entry {}: bad regex `{}`: {err}", i + 1, e.pattern),
                    })
            })
            .collect::<Result<_, _>>()?;
        Ok(MockScript::new(entries, raw.fallback))
    }

    pub fn respond(&self, prompt: &str) -> &str {
        self.entries
            .iter()
            .find(|(re, _)| re.is_match(prompt))
            .map_or(self.fallback.as_str(), |(_, r)| r.as_str())
    }
}

pub struct MockBackend {
    script: MockScript,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        MockBackend { script }
    }
}

impl Backend for MockBackend {
    fn send(&self, messages: &[Message], _: &LlmConfig) -> Result<Completion, BackendError> {
        let prompt = concat_prompt(messages);
        let text = self.script.respond(&prompt).to_string();
        Ok(Completion {
            in_tokens: estimate_tokens(&prompt),
            out_tokens: estimate_tokens(&text),
            text,
        })
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Mock
    }

    fn model_id(&self) -> &str {
        "mock"
    }
}
