//! Reading and writing rule files (YAML).

use erc_sentinel_core::rules::{first_error, validate_ruleset, ErcRuleSet};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleFileError {
    #[error("line {line}: {reason}")]
    ParseError { line: usize, reason: String },
    #[error("rule `{rule_id}`: {reason}")]
    ValidationError { rule_id: String, reason: String },
}

/// Parses a rule file without checking rule-set invariants. Unknown keys
/// are rejected.
pub fn parse_ruleset(text: &str) -> Result<ErcRuleSet, RuleFileError> {
    serde_yaml::from_str(text).map_err(|e| RuleFileError::ParseError {
        line: e.location().map_or(0, |l| l.line()),
        reason: e.to_string(),
    })
}

/// Parses a rule file and rejects it on the first invariant breach.
/// Warnings such as pending review do not prevent loading.
pub fn load_ruleset(text: &str) -> Result<ErcRuleSet, RuleFileError> {
    let set = parse_ruleset(text)?;
    let issues = validate_ruleset(&set);
    if let Some(issue) = first_error(&issues) {
        return Err(RuleFileError::ValidationError {
            rule_id: issue.rule_id.clone(),
            reason: issue.reason.clone(),
        });
    }
    Ok(set)
}

pub fn save_ruleset(set: &ErcRuleSet) -> String {
    serde_yaml::to_string(set).expect("rule sets always serialize")
}
