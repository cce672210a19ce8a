//! Reading the final `VERDICT:` line of a model response.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::Stage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VerdictOutcome {
    Compliant,
    Violation,
    ConditionAbsent,
    ConditionPresent,
    Uncertain,
}

impl VerdictOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictOutcome::Compliant => "compliant",
            VerdictOutcome::Violation => "violation",
            VerdictOutcome::ConditionAbsent => "condition-absent",
            VerdictOutcome::ConditionPresent => "condition-present",
            VerdictOutcome::Uncertain => "uncertain",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub outcome: VerdictOutcome,
    /// Response text before the verdict line.
    pub explanation: String,
    pub raw: String,
}

impl Verdict {
    pub fn uncertain(raw: impl Into<String>) -> Self {
        let raw = raw.into();
        Verdict {
            outcome: VerdictOutcome::Uncertain,
            explanation: raw.trim().to_string(),
            raw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("response has no usable verdict line")]
pub struct Unparseable;

fn strip(s: &str) -> &str {
    s.trim_matches(|c: char| c.is_whitespace() || matches!(c, '*' | '_' | '`' | '"' | '\'' | '.' | '!' | '#' | '>'))
}

/// The token on a line of the form `VERDICT: <token>`, tolerating markdown
/// emphasis and trailing punctuation.
fn verdict_token(line: &str) -> Option<String> {
    let line = strip(line);
    let head = line.get(..8)?;
    if !head.eq_ignore_ascii_case("verdict:") {
        return None;
    }
    let token = strip(&line[8..]);
    if token.is_empty() || token.contains(char::is_whitespace) {
        return Some(String::new());
    }
    Some(token.to_ascii_uppercase())
}

/// Maps the last `VERDICT:` line to an outcome valid for `stage`. Anything
/// before that line becomes the explanation.
pub fn parse_verdict(response: &str, stage: Stage) -> Result<Verdict, Unparseable> {
    let lines: Vec<&str> = response.lines().collect();
    let (idx, token) = lines
        .iter()
        .enumerate()
        .rev()
        .find_map(|(i, l)| verdict_token(l).map(|t| (i, t)))
        .ok_or(Unparseable)?;
    let outcome = match (stage, token.as_str()) {
        (Stage::Single | Stage::ActionProbe, "COMPLIANT") => VerdictOutcome::Compliant,
        (Stage::Single | Stage::ActionProbe, "VIOLATION") => VerdictOutcome::Violation,
        (Stage::ConditionProbe, "PRESENT") => VerdictOutcome::ConditionPresent,
        (Stage::ConditionProbe, "ABSENT") => VerdictOutcome::ConditionAbsent,
        _ => return Err(Unparseable),
    };
    Ok(Verdict {
        outcome,
        explanation: lines[..idx].join("\n").trim().to_string(),
        raw: response.to_string(),
    })
}
