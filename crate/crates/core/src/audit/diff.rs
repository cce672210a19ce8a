use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use super::AuditReport;

/// Identity of a finding across report revisions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FindingKey {
    pub rule_id: String,
    pub contract: String,
    pub function: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReportDiff {
    /// In `b` but not in `a`.
    pub added: Vec<FindingKey>,
    /// In `a` but not in `b`.
    pub removed: Vec<FindingKey>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DiffError {
    #[error("reports use different rule sets (`{0}` vs `{1}`)")]
    RulesetMismatch(String, String),
}

fn keys(r: &AuditReport) -> BTreeSet<FindingKey> {
    r.findings
        .iter()
        .map(|f| FindingKey {
            rule_id: f.rule_id.clone(),
            contract: f.contract.clone(),
            function: f.function.clone(),
        })
        .collect()
}

pub fn diff_reports(a: &AuditReport, b: &AuditReport) -> Result<ReportDiff, DiffError> {
    if a.ruleset != b.ruleset {
        return Err(DiffError::RulesetMismatch(a.ruleset.clone(), b.ruleset.clone()));
    }
    let (ka, kb) = (keys(a), keys(b));
    Ok(ReportDiff {
        added: kb.difference(&ka).cloned().collect(),
        removed: ka.difference(&kb).cloned().collect(),
    })
}
