//! Contract audits: static declaration checks plus one model probe per
//! (code slice, semantic rule) pair, assembled into a deterministic report.
//!
//! An audit is split into [`plan_audit`], which does every pure step up
//! front, [`AuditPlan::run_probe`], which talks to the model for a single
//! probe, and [`AuditPlan::assemble`], which orders and merges the results.
//! [`audit_contract`] chains the three sequentially; callers that want
//! concurrency can run the probes themselves.

mod diff;
mod render;

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use sha2::{Digest, Sha256};

use crate::llm::ChatModel;
use crate::prompt::{
    parse_verdict, plan_compound, specialize_prompt, PromptError, PromptOptions, PromptTask, Verdict, VerdictOutcome,
};
use crate::rules::{first_error, validate_ruleset, ContentCategory, ErcRule, ErcRuleSet, Impact, RuleGroup};
use crate::solidity::{
    check_declarations_in, linearize, match_erc_surface_in, parse_contract, select_main_contract, slice_in_context,
    CodeSlice, ContractId, ContractModel, FunctionId, FunctionKind, SyntaxError,
};

pub use diff::{diff_reports, DiffError, FindingKey, ReportDiff};
pub use render::{render_json, render_report, render_text, ReportFormat};

pub const REPORT_SCHEMA: &str = "erc-sentinel/report/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FindingSource {
    /// Declaration checks, no model involved.
    Static,
    Llm,
}

impl FindingSource {
    pub fn as_str(self) -> &'static str {
        match self {
            FindingSource::Static => "static",
            FindingSource::Llm => "llm",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Finding {
    pub rule_id: String,
    pub rule_text: String,
    pub impact: Impact,
    pub category: ContentCategory,
    pub contract: String,
    pub function: Option<String>,
    pub line: Option<u32>,
    pub explanation: String,
    pub source: FindingSource,
    /// Condition and action verdicts of a two-stage probe.
    pub stage_trace: Option<(VerdictOutcome, VerdictOutcome)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UncertainEntry {
    pub rule_id: String,
    pub function: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Summary {
    pub high: usize,
    pub medium: usize,
    pub low: usize,
}

impl Summary {
    pub fn of(findings: &[Finding]) -> Self {
        let mut s = Summary::default();
        for f in findings {
            match f.impact {
                Impact::High => s.high += 1,
                Impact::Medium => s.medium += 1,
                Impact::Low => s.low += 1,
            }
        }
        s
    }

    pub fn total(&self) -> usize {
        self.high + self.medium + self.low
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Usage {
    /// Requests sent to the model, retries included.
    pub prompts: usize,
    pub in_tokens: usize,
    pub out_tokens: usize,
}

impl Usage {
    fn add(&mut self, other: Usage) {
        self.prompts += other.prompts;
        self.in_tokens += other.in_tokens;
        self.out_tokens += other.out_tokens;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub contract_path: String,
    pub contract_sha256: String,
    pub ruleset: String,
    pub model: String,
    pub temperature: f64,
    pub findings: Vec<Finding>,
    pub summary: Summary,
    pub uncertain: Vec<UncertainEntry>,
    pub usage: Usage,
    /// Parser and resolver warnings, for the text report only.
    pub warnings: Vec<String>,
}

impl AuditReport {
    pub fn has_findings(&self) -> bool {
        !self.findings.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct AuditConfig {
    /// Recorded in the report; not read from disk here.
    pub contract_path: String,
    pub prompt: PromptOptions,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            contract_path: "<memory>".into(),
            prompt: PromptOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AuditError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("rule set is not ready for auditing ({count} validation issues; first: {first})")]
    RulesNotApproved { count: usize, first: String },
    #[error("the source file defines no contract")]
    NoContract,
}

/// One model probe: a semantic rule applied to one function's slice.
#[derive(Debug, Clone)]
pub struct Probe<'r> {
    pub rule: &'r ErcRule,
    /// Index into [`AuditPlan::slices`].
    pub slice: usize,
}

#[derive(Debug, Clone)]
pub struct ProbeResult {
    pub finding: Option<Finding>,
    pub uncertain: Option<UncertainEntry>,
    pub usage: Usage,
    /// Stages that reached the model, in order.
    pub stages: Vec<crate::prompt::Stage>,
}

pub struct AuditPlan<'r> {
    pub model: ContractModel,
    pub rules: &'r ErcRuleSet,
    pub main: ContractId,
    pub static_findings: Vec<Finding>,
    pub slices: Vec<CodeSlice>,
    pub probes: Vec<Probe<'r>>,
    contract_path: String,
    contract_sha256: String,
    options: PromptOptions,
}

pub fn sha256_hex(data: &[u8]) -> String {
    let digest = Sha256::digest(data);
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Externally callable functions with code reachable from an instance of
/// `main`, most derived first, plus the most derived constructor.
fn entry_points(model: &ContractModel, main: ContractId) -> Vec<FunctionId> {
    let mut seen: BTreeSet<(String, Vec<String>)> = BTreeSet::new();
    let mut out = Vec::new();
    let mut have_ctor = false;
    for c in linearize(model, main) {
        for (id, f) in model.functions_of(c) {
            if !f.has_body {
                continue;
            }
            match f.kind {
                FunctionKind::Constructor if !have_ctor => {
                    have_ctor = true;
                    out.push(id);
                }
                FunctionKind::Function | FunctionKind::Fallback | FunctionKind::Receive
                    if f.visibility.is_externally_callable() =>
                {
                    let types = f.params.iter().map(|p| crate::solidity::normalize_type(&p.ty)).collect();
                    if seen.insert((f.name.clone(), types)) {
                        out.push(id);
                    }
                }
                _ => {}
            }
        }
    }
    out
}

/// Parses the contract, runs the static checks and lays out every probe.
pub fn plan_audit<'r>(source: &str, rules: &'r ErcRuleSet, config: &AuditConfig) -> Result<AuditPlan<'r>, AuditError> {
    let issues = validate_ruleset(rules);
    if !issues.is_empty() {
        let first = first_error(&issues).unwrap_or(&issues[0]).to_string();
        return Err(AuditError::RulesNotApproved {
            count: issues.len(),
            first,
        });
    }
    let model = parse_contract(source)?;
    let main = select_main_contract(&model, rules).ok_or(AuditError::NoContract)?;
    let main_name = model.contract(main).name.clone();

    let static_findings = check_declarations_in(&model, rules, main)
        .into_iter()
        .map(|d| {
            let (home_fn, rule) = rules
                .rules()
                .find(|(_, r)| r.id == d.rule_id)
                .map(|(h, r)| {
                    let f = match h {
                        crate::rules::RuleHome::Function(f) => Some(f.name.clone()),
                        crate::rules::RuleHome::Event(e) => Some(e.name.clone()),
                        crate::rules::RuleHome::Contract => None,
                    };
                    (f, r)
                })
                .expect("finding refers to a rule of this set");
            Finding {
                rule_id: d.rule_id.clone(),
                rule_text: rule.text.clone(),
                impact: rule.impact,
                category: rule.content_category,
                contract: main_name.clone(),
                function: home_fn,
                line: d.location,
                explanation: format!("{}: {}", d.kind.as_str(), d.detail),
                source: FindingSource::Static,
                stage_trace: None,
            }
        })
        .collect();

    let mut slices: Vec<CodeSlice> = Vec::new();
    let slice_of = |id: FunctionId, slices: &mut Vec<CodeSlice>| -> usize {
        match slices.iter().position(|s| s.anchor == id) {
            Some(i) => i,
            None => {
                slices.push(slice_in_context(&model, id, main));
                slices.len() - 1
            }
        }
    };

    let mut probes = Vec::new();
    for binding in match_erc_surface_in(&model, rules, main) {
        for id in binding.bodies(&model) {
            let idx = slice_of(id, &mut slices);
            for rule in binding.spec.rules.iter().filter(|r| r.group() != RuleGroup::DECL && r.is_approved()) {
                probes.push(Probe { rule, slice: idx });
            }
        }
    }
    // event rules are about every code path that may emit, so they are
    // probed like contract-scope rules
    let contract_rules: Vec<&ErcRule> = rules
        .events
        .iter()
        .flat_map(|e| e.rules.iter())
        .chain(rules.contract_scope_rules.iter())
        .filter(|r| r.group() != RuleGroup::DECL && r.is_approved())
        .collect();
    if !contract_rules.is_empty() {
        for id in entry_points(&model, main) {
            let idx = slice_of(id, &mut slices);
            for &rule in &contract_rules {
                probes.push(Probe { rule, slice: idx });
            }
        }
    }

    Ok(AuditPlan {
        rules,
        main,
        static_findings,
        slices,
        probes,
        contract_path: config.contract_path.clone(),
        contract_sha256: sha256_hex(source.as_bytes()),
        options: config.prompt,
        model,
    })
}

enum Asked {
    Verdict(Verdict),
    Failed(String),
}

impl AuditPlan<'_> {
    fn ask(&self, task: &PromptTask, llm: &dyn ChatModel, result: &mut ProbeResult) -> Asked {
        let attempt = |task: &PromptTask, result: &mut ProbeResult| -> Result<String, String> {
            let c = llm.complete(&task.messages).map_err(|e| match e {
                crate::llm::GatewayError::BudgetExceeded { estimate, budget } => {
                    format!("BudgetExceeded: estimate {estimate} > budget {budget}")
                }
                other => other.to_string(),
            })?;
            result.usage.add(Usage {
                prompts: 1,
                in_tokens: c.in_tokens,
                out_tokens: c.out_tokens,
            });
            result.stages.push(task.stage);
            Ok(c.text)
        };
        let text = match attempt(task, result) {
            Ok(t) => t,
            Err(e) => return Asked::Failed(e),
        };
        if let Ok(v) = parse_verdict(&text, task.stage) {
            return Asked::Verdict(v);
        }
        log::debug!("unparseable answer for {}; retrying with a stricter instruction", task.rule_id);
        let strict = task.stricter();
        let text = match attempt(&strict, result) {
            Ok(t) => t,
            Err(e) => return Asked::Failed(e),
        };
        Asked::Verdict(parse_verdict(&text, strict.stage).unwrap_or_else(|_| Verdict::uncertain(text)))
    }

    fn line_of(&self, slice: &CodeSlice) -> u32 {
        self.model.function(slice.anchor).header_line()
    }

    fn finding(&self, rule: &ErcRule, slice: &CodeSlice, explanation: String) -> Finding {
        Finding {
            rule_id: rule.id.clone(),
            rule_text: rule.text.clone(),
            impact: rule.impact,
            category: rule.content_category,
            contract: self.model.contract(self.model.function(slice.anchor).owner).name.clone(),
            function: Some(slice.function.clone()),
            line: Some(self.line_of(slice)),
            explanation,
            source: FindingSource::Llm,
            stage_trace: None,
        }
    }

    fn uncertain(rule: &ErcRule, slice: &CodeSlice, reason: String) -> Option<UncertainEntry> {
        Some(UncertainEntry {
            rule_id: rule.id.clone(),
            function: slice.function.clone(),
            reason,
        })
    }

    /// Runs one probe to completion. Compound rules issue their second
    /// prompt only when the condition was found.
    pub fn run_probe(&self, probe: &Probe<'_>, llm: &dyn ChatModel) -> ProbeResult {
        let rule = probe.rule;
        let slice = &self.slices[probe.slice];
        let mut result = ProbeResult {
            finding: None,
            uncertain: None,
            usage: Usage::default(),
            stages: Vec::new(),
        };
        let budget_reason = |e: PromptError| match e {
            PromptError::BudgetExceeded { estimate, budget } => {
                format!("BudgetExceeded: estimate {estimate} > budget {budget}")
            }
        };

        if rule.compound && self.options.split_compound {
            let (cond_task, action) = match plan_compound(rule, slice, &self.options) {
                Ok(p) => p,
                Err(e) => {
                    result.uncertain = Self::uncertain(rule, slice, budget_reason(e));
                    return result;
                }
            };
            let cond = match self.ask(&cond_task, llm, &mut result) {
                Asked::Verdict(v) => v,
                Asked::Failed(reason) => {
                    result.uncertain = Self::uncertain(rule, slice, reason);
                    return result;
                }
            };
            match cond.outcome {
                VerdictOutcome::ConditionAbsent => return result,
                VerdictOutcome::ConditionPresent => {}
                _ => {
                    result.uncertain = Self::uncertain(rule, slice, "condition probe gave no verdict".into());
                    return result;
                }
            }
            let action_task = match action.build() {
                Ok(t) => t,
                Err(e) => {
                    result.uncertain = Self::uncertain(rule, slice, budget_reason(e));
                    return result;
                }
            };
            match self.ask(&action_task, llm, &mut result) {
                Asked::Verdict(v) => match v.outcome {
                    VerdictOutcome::Violation => {
                        let mut f = self.finding(rule, slice, v.explanation);
                        f.stage_trace = Some((cond.outcome, v.outcome));
                        result.finding = Some(f);
                    }
                    VerdictOutcome::Compliant => {}
                    _ => result.uncertain = Self::uncertain(rule, slice, "action probe gave no verdict".into()),
                },
                Asked::Failed(reason) => result.uncertain = Self::uncertain(rule, slice, reason),
            }
            return result;
        }

        let task = match specialize_prompt(rule, slice, &self.options) {
            Ok(t) => t,
            Err(e) => {
                result.uncertain = Self::uncertain(rule, slice, budget_reason(e));
                return result;
            }
        };
        match self.ask(&task, llm, &mut result) {
            Asked::Verdict(v) => match v.outcome {
                VerdictOutcome::Violation => result.finding = Some(self.finding(rule, slice, v.explanation)),
                VerdictOutcome::Compliant => {}
                _ => result.uncertain = Self::uncertain(rule, slice, "model gave no verdict".into()),
            },
            Asked::Failed(reason) => result.uncertain = Self::uncertain(rule, slice, reason),
        }
        result
    }

    /// Merges probe results (in any order) into the canonical report.
    pub fn assemble(&self, results: Vec<ProbeResult>, llm: &dyn ChatModel) -> AuditReport {
        let mut findings = self.static_findings.clone();
        let mut uncertain = Vec::new();
        let mut usage = Usage::default();
        for r in results {
            usage.add(r.usage);
            findings.extend(r.finding);
            uncertain.extend(r.uncertain);
        }
        let key = |f: &Finding| (f.line.unwrap_or(u32::MAX), f.rule_id.clone(), f.function.clone(), f.explanation.clone());
        findings.sort_by_key(|a| key(a));
        let mut seen = BTreeSet::new();
        findings.retain(|f| seen.insert((f.rule_id.clone(), f.function.clone())));

        uncertain.sort_by(|a: &UncertainEntry, b: &UncertainEntry| {
            (&a.function, &a.rule_id, &a.reason).cmp(&(&b.function, &b.rule_id, &b.reason))
        });
        let mut seen = BTreeSet::new();
        uncertain.retain(|u| seen.insert((u.rule_id.clone(), u.function.clone())));
        // a finding for the same (rule, function) settles the question
        uncertain.retain(|u| {
            !findings
                .iter()
                .any(|f| f.rule_id == u.rule_id && f.function.as_deref() == Some(u.function.as_str()))
        });

        AuditReport {
            contract_path: self.contract_path.clone(),
            contract_sha256: self.contract_sha256.clone(),
            ruleset: self.rules.erc_id.clone(),
            model: llm.model_id().to_string(),
            temperature: llm.temperature(),
            summary: Summary::of(&findings),
            findings,
            uncertain,
            usage,
            warnings: self.model.warnings.iter().map(|w| w.to_string()).collect(),
        }
    }
}

/// Full audit with probes issued one after another.
pub fn audit_contract(
    source: &str,
    rules: &ErcRuleSet,
    llm: &dyn ChatModel,
    config: &AuditConfig,
) -> Result<AuditReport, AuditError> {
    let plan = plan_audit(source, rules, config)?;
    let results = plan.probes.iter().map(|p| plan.run_probe(p, llm)).collect();
    Ok(plan.assemble(results, llm))
}

#[cfg(test)]
mod tests;
