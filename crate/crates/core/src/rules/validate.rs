use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::{is_standard_pair, ErcRuleSet, GroupPayload, Review, RuleHome};
use crate::solidity::{parse_declaration, Declaration};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    /// Breaks a rule-set invariant; the set cannot be loaded for auditing.
    Error,
    /// Needs curator attention (pending review, nonstandard impact).
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationIssue {
    pub rule_id: String,
    pub reason: String,
    pub severity: Severity,
}

impl ValidationIssue {
    fn error(rule_id: impl Into<String>, reason: impl Into<String>) -> Self {
        ValidationIssue {
            rule_id: rule_id.into(),
            reason: reason.into(),
            severity: Severity::Error,
        }
    }

    fn warning(rule_id: impl Into<String>, reason: impl Into<String>) -> Self {
        ValidationIssue {
            rule_id: rule_id.into(),
            reason: reason.into(),
            severity: Severity::Warning,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}: {}: {}", self.rule_id, self.reason)
    }
}

/// Checks every rule-set invariant plus the review gate. An empty result
/// means the set is consistent and fully approved.
pub fn validate_ruleset(set: &ErcRuleSet) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();
    let mut seen = BTreeSet::new();

    for f in &set.functions {
        let mut names = BTreeSet::new();
        for p in &f.params {
            if !p.name.is_empty() && !names.insert(p.name.as_str()) {
                issues.push(ValidationIssue::error(
                    format!("{}.{}", super::id_prefix(&set.erc_id), f.name),
                    format!("duplicate parameter name `{}`", p.name),
                ));
            }
        }
    }

    for (home, rule) in set.rules() {
        let id = rule.id.as_str();
        if !seen.insert(id) {
            issues.push(ValidationIssue::error(id, "duplicate rule id"));
        }
        if id.split('.').filter(|s| !s.is_empty()).count() < 3 {
            issues.push(ValidationIssue::warning(id, "rule id is not of the form <erc>.<scope>.<slug>"));
        }

        let expected = home.expected_scope();
        if rule.scope != expected {
            issues.push(ValidationIssue::error(
                id,
                format!("scope is {:?} but the rule is nested under a {:?}", rule.scope, expected),
            ));
        }
        if let Some(p) = rule.pattern_id {
            if p.group() != rule.group() {
                issues.push(ValidationIssue::error(
                    id,
                    format!("pattern {} does not belong to group {}", p.as_str(), rule.group()),
                ));
            }
        }
        if rule.text.trim().is_empty() {
            issues.push(ValidationIssue::warning(id, "rule text is empty"));
        }

        match &rule.payload {
            GroupPayload::Cp { condition, action, .. } => {
                if condition.trim().is_empty() || action.trim().is_empty() {
                    issues.push(ValidationIssue::error(id, "CP payload incomplete"));
                }
            }
            GroupPayload::Ep { condition, event, .. } => {
                if event.trim().is_empty() {
                    issues.push(ValidationIssue::error(id, "EP payload incomplete"));
                } else if set.event(event).is_none() {
                    issues.push(ValidationIssue::error(
                        id,
                        format!("EP rule references unknown event `{event}`"),
                    ));
                }
                if rule.compound && condition.trim().is_empty() {
                    issues.push(ValidationIssue::error(id, "compound rule has an empty condition"));
                }
            }
            GroupPayload::Rp { return_semantics } => {
                if return_semantics.trim().is_empty() {
                    issues.push(ValidationIssue::error(id, "RP payload incomplete"));
                }
            }
            GroupPayload::Ap { assignment } => {
                if assignment.trim().is_empty() {
                    issues.push(ValidationIssue::error(id, "AP payload incomplete"));
                }
            }
            GroupPayload::Decl { expected_signature } => {
                check_decl(&mut issues, id, home, expected_signature);
            }
        }

        if rule.compound && !matches!(rule.payload, GroupPayload::Cp { .. } | GroupPayload::Ep { .. }) {
            issues.push(ValidationIssue::error(
                id,
                "compound rules need a condition and an action (CP or EP group)",
            ));
        }
        if !is_standard_pair(rule.content_category, rule.impact) {
            issues.push(ValidationIssue::warning(
                id,
                format!(
                    "nonstandard impact/category pair: {} impact for {}",
                    rule.impact, rule.content_category
                ),
            ));
        }
        if rule.review == Review::Pending {
            issues.push(ValidationIssue::warning(id, "pending human review"));
        }
    }
    issues
}

fn check_decl(issues: &mut Vec<ValidationIssue>, id: &str, home: RuleHome<'_>, sig: &str) {
    let decl = match parse_declaration(sig) {
        Ok(d) => d,
        Err(e) => {
            issues.push(ValidationIssue::error(
                id,
                format!("expected_signature does not parse: {e}"),
            ));
            return;
        }
    };
    match (home, &decl) {
        (RuleHome::Function(f), Declaration::Function(d)) if d.name != f.name => {
            issues.push(ValidationIssue::error(
                id,
                format!("expected_signature declares `{}` but the rule belongs to `{}`", d.name, f.name),
            ));
        }
        (RuleHome::Event(e), Declaration::Event(d)) if d.name != e.name => {
            issues.push(ValidationIssue::error(
                id,
                format!("expected_signature declares `{}` but the rule belongs to `{}`", d.name, e.name),
            ));
        }
        (RuleHome::Function(_), Declaration::Event(_)) => {
            issues.push(ValidationIssue::error(id, "function rule carries an event declaration"));
        }
        (RuleHome::Event(_), Declaration::Function(_)) => {
            issues.push(ValidationIssue::error(id, "event rule carries a function declaration"));
        }
        (RuleHome::Contract, _) => {
            issues.push(ValidationIssue::error(
                id,
                "declaration rules must be scoped to a function or event",
            ));
        }
        _ => {}
    }
}

/// First invariant breach, if any. Warnings do not count.
pub fn first_error(issues: &[ValidationIssue]) -> Option<&ValidationIssue> {
    issues.iter().find(|i| i.is_error())
}
