//! Startup phase: turning an ERC document into a draft rule set.
//!
//! Two prompts enumerate the functions and events the ERC declares. Each
//! function then gets one prompt per semantic group and each event one
//! emission prompt. Every extracted rule starts out pending review.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use erc_sentinel_core::llm::{ChatModel, GatewayError, Message};
use erc_sentinel_core::prompt::estimate_tokens;
use erc_sentinel_core::rules::{
    id_prefix, ConditionType, ContentCategory, ErcRule, ErcRuleSet, EventParam, EventSpec, FunctionSpec,
    GroupPayload, Impact, Param, PatternId, Polarity, Review, RuleGroup, Scope,
};
use regex::Regex;
use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

pub const EXTRACTION_PERSONA: &str = "You read Ethereum ERC standards and extract the obligations they place on \
Solidity implementations. You answer with JSON only.";

const STRICT_RETRY: &str = "Your previous answer could not be read. Reply again with the JSON array only: \
no prose, no code fences, no comments.";

/// Fixed description of each semantic group, shown in extraction prompts.
pub fn group_explanation(group: RuleGroup) -> &'static str {
    match group {
        RuleGroup::CP => "CP rules tie a condition to an action the function must take when the condition holds \
(or unless it holds), typically throwing, reverting or calling another function. Record the condition, whether \
it is introduced by if, unless, when or always, and the action.",
        RuleGroup::EP => "EP rules say that an event must be emitted, or must not be emitted, possibly only under a \
condition. Record the condition (empty when the event is always required), the event name and whether it must or \
must not be emitted.",
        RuleGroup::RP => "RP rules describe how the function's return value is produced. Record what the returned \
value must represent.",
        RuleGroup::AP => "AP rules describe how the function updates contract state. Record which state changes and \
how.",
        RuleGroup::DECL => "Declaration rules fix a function or event signature.",
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    /// Heading text without the leading `#` marks; empty for the preamble.
    pub heading: String,
    /// Byte range in the document body.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErcDocument {
    pub erc_id: String,
    pub body: String,
    pub sections: Vec<Section>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IngestError {
    #[error("the ERC document is empty")]
    EmptyDocument,
    #[error("prompt needs about {estimate} tokens but the budget is {budget}")]
    BudgetExceeded { estimate: usize, budget: usize },
    #[error("could not read the model's answer: {0}")]
    ExtractionParseError(String),
    #[error(transparent)]
    Gateway(GatewayError),
    #[error("{context}: {source}")]
    Step {
        context: String,
        #[source]
        source: Box<IngestError>,
    },
}

impl IngestError {
    fn at(self, context: impl Into<String>) -> IngestError {
        IngestError::Step {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

impl From<GatewayError> for IngestError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::BudgetExceeded { estimate, budget } => IngestError::BudgetExceeded { estimate, budget },
            other => IngestError::Gateway(other),
        }
    }
}

fn heading_re() -> Regex {
    Regex::new(r"^(#{1,6})\s+(.*?)\s*#*\s*$").expect("valid regex")
}

impl ErcDocument {
    pub fn new(erc_id: impl Into<String>, body: impl Into<String>) -> Result<Self, IngestError> {
        let body = body.into();
        if body.trim().is_empty() {
            return Err(IngestError::EmptyDocument);
        }
        let re = heading_re();
        let mut starts: Vec<(usize, String)> = Vec::new();
        let mut offset = 0;
        let mut in_fence = false;
        for line in body.split_inclusive('\n') {
            let trimmed = line.trim_end();
            if trimmed.trim_start().starts_with("```") {
                in_fence = !in_fence;
            } else if !in_fence {
                if let Some(c) = re.captures(trimmed) {
                    starts.push((offset, c[2].to_string()));
                }
            }
            offset += line.len();
        }
        if starts.first().is_none_or(|(s, _)| *s > 0) {
            starts.insert(0, (0, String::new()));
        }
        let sections = starts
            .iter()
            .enumerate()
            .map(|(i, (start, heading))| Section {
                heading: heading.clone(),
                start: *start,
                end: starts.get(i + 1).map_or(body.len(), |(s, _)| *s),
            })
            .collect();
        Ok(ErcDocument {
            erc_id: erc_id.into(),
            body,
            sections,
        })
    }

    /// `ERC20` from front matter such as `eip: 20` or a title mentioning
    /// `ERC-20`, else `fallback`.
    pub fn infer_erc_id(body: &str, fallback: &str) -> String {
        let front = Regex::new(r"(?mi)^\s*eip:\s*(\d+)\s*$").expect("valid regex");
        let title = Regex::new(r"(?i)\b(?:ERC|EIP)-?(\d+)\b").expect("valid regex");
        front
            .captures(body)
            .or_else(|| title.captures(body))
            .map(|c| format!("ERC{}", &c[1]))
            .unwrap_or_else(|| fallback.to_string())
    }

    /// Splits the body at function and event declarations and headings into
    /// consecutive pieces of at most `max_tokens` each.
    fn segments(&self, max_tokens: usize) -> Result<Vec<String>, IngestError> {
        if estimate_tokens(&self.body) <= max_tokens {
            return Ok(vec![self.body.clone()]);
        }
        let boundary = Regex::new(r"^\s*(#{1,6}\s|(function|event)\s+\w+\s*\()").expect("valid regex");
        let mut pieces: Vec<String> = Vec::new();
        for line in self.body.split_inclusive('\n') {
            match pieces.last_mut() {
                Some(p) if !boundary.is_match(line) => p.push_str(line),
                _ => pieces.push(line.to_string()),
            }
        }
        let mut out: Vec<String> = Vec::new();
        for piece in pieces {
            let estimate = estimate_tokens(&piece);
            if estimate > max_tokens {
                return Err(IngestError::BudgetExceeded {
                    estimate,
                    budget: max_tokens,
                });
            }
            match out.last_mut() {
                Some(seg) if estimate_tokens(seg) + estimate <= max_tokens => seg.push_str(&piece),
                _ => out.push(piece),
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestOptions {
    /// Largest prompt, in estimated tokens.
    pub budget: usize,
    /// Concurrent extraction prompts.
    pub workers: usize,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            budget: 12_000,
            workers: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogLine {
    /// Function or event the prompt was about; `-` for interface prompts.
    pub subject: String,
    /// Semantic group, or `functions` / `events` for interface prompts.
    pub group: String,
    pub token_estimate: usize,
    pub outcome: String,
}

/// A rule object from a readable answer that could not become a rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub subject: String,
    pub group: String,
    /// Position of the object in the answer array, from 1.
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtractionLog {
    pub prompts: Vec<LogLine>,
    pub rejections: Vec<Rejection>,
    pub warnings: Vec<String>,
}

impl ExtractionLog {
    fn absorb(&mut self, other: ExtractionLog) {
        self.prompts.extend(other.prompts);
        self.rejections.extend(other.rejections);
        self.warnings.extend(other.warnings);
    }
}

impl fmt::Display for ExtractionLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.prompts {
            writeln!(f, "prompt\t{}\t{}\t{}\t{}", l.subject, l.group, l.token_estimate, l.outcome)?;
        }
        for r in &self.rejections {
            writeln!(f, "rejected\t{}\t{}\t#{}\t{}", r.subject, r.group, r.index, r.reason)?;
        }
        for w in &self.warnings {
            writeln!(f, "warning\t{w}")?;
        }
        Ok(())
    }
}

/// Strips code fences and surrounding prose, returning the JSON array.
fn json_array(response: &str) -> Option<Vec<Value>> {
    let start = response.find('[')?;
    let end = response.rfind(']')?;
    if end < start {
        return None;
    }
    serde_json::from_str(&response[start..=end]).ok()
}

fn total_estimate(messages: &[Message]) -> usize {
    messages.iter().map(|m| estimate_tokens(&m.content)).sum()
}

/// Sends one extraction prompt, retrying once with a stricter instruction
/// when the answer has no readable JSON array.
fn ask_array(
    llm: &dyn ChatModel,
    messages: Vec<Message>,
    budget: usize,
    subject: &str,
    group: &str,
    log: &mut ExtractionLog,
) -> Result<Vec<Value>, IngestError> {
    let estimate = total_estimate(&messages);
    let mut line = |outcome: String, estimate: usize| {
        log.prompts.push(LogLine {
            subject: subject.to_string(),
            group: group.to_string(),
            token_estimate: estimate,
            outcome,
        })
    };
    if estimate > budget {
        line("budget-exceeded".into(), estimate);
        return Err(IngestError::BudgetExceeded { estimate, budget });
    }
    let first = llm.complete(&messages).map_err(|e| {
        line(format!("error: {e}"), estimate);
        IngestError::from(e)
    })?;
    if let Some(items) = json_array(&first.text) {
        line(format!("ok ({} items)", items.len()), estimate);
        return Ok(items);
    }
    line("unparseable, retrying".into(), estimate);
    let mut retry = messages;
    retry.push(Message::user(STRICT_RETRY));
    let estimate = total_estimate(&retry);
    let second = llm.complete(&retry).map_err(|e| {
        line(format!("error: {e}"), estimate);
        IngestError::from(e)
    })?;
    match json_array(&second.text) {
        Some(items) => {
            line(format!("ok ({} items)", items.len()), estimate);
            Ok(items)
        }
        None => {
            line("unparseable".into(), estimate);
            Err(IngestError::ExtractionParseError(format!(
                "no JSON array in the answer to the {group} prompt for {subject}"
            )))
        }
    }
}

fn document_block(segment: &str) -> String {
    format!("ERC document:\n<document>\n{}\n</document>", segment.trim_end())
}

#[derive(Deserialize)]
struct RawParam {
    name: String,
    #[serde(rename = "type")]
    ty: String,
    #[serde(default)]
    indexed: bool,
}

#[derive(Deserialize)]
struct RawFunction {
    name: String,
    #[serde(default)]
    params: Vec<RawParam>,
    #[serde(default)]
    returns: Option<String>,
    #[serde(default)]
    optional: bool,
}

#[derive(Deserialize)]
struct RawEvent {
    name: String,
    #[serde(default)]
    params: Vec<RawParam>,
}

const FUNCTIONS_FORMAT: &str = r#"List every function the ERC declares, in document order. Answer with a JSON array only, one object per function: [{"name": "transfer", "params": [{"name": "_to", "type": "address"}], "returns": "bool", "optional": false}]. Use null for "returns" when the function returns nothing and set "optional" to true only when the ERC marks the function optional."#;

const EVENTS_FORMAT: &str = r#"List every event the ERC declares, in document order. Answer with a JSON array only, one object per event: [{"name": "Transfer", "params": [{"name": "_from", "type": "address", "indexed": true}]}]."#;

fn interface_messages(segment: &str, task: &str, format: &str) -> Vec<Message> {
    vec![
        Message::system(EXTRACTION_PERSONA),
        Message::user(format!("[task: {task}]\n\n{}\n\n{format}", document_block(segment))),
    ]
}

fn overhead(messages: &[Message], segment: &str) -> usize {
    total_estimate(messages).saturating_sub(estimate_tokens(segment))
}

/// Segments that fit in one prompt next to the fixed prompt text.
fn fitting_segments(doc: &ErcDocument, probe: &[Message], budget: usize) -> Result<Vec<String>, IngestError> {
    let room = budget.saturating_sub(overhead(probe, &doc.body) + 1);
    doc.segments(room)
}

fn decode<T: for<'de> Deserialize<'de>>(
    items: Vec<Value>,
    subject: &str,
    group: &str,
    log: &mut ExtractionLog,
) -> Vec<(usize, T)> {
    let mut out = Vec::new();
    for (i, item) in items.into_iter().enumerate() {
        match serde_json::from_value::<T>(item) {
            Ok(v) => out.push((i + 1, v)),
            Err(e) => log.rejections.push(Rejection {
                subject: subject.into(),
                group: group.into(),
                index: i + 1,
                reason: e.to_string(),
            }),
        }
    }
    out
}

/// Enumerates the declared functions and events.
pub fn extract_interface(
    doc: &ErcDocument,
    llm: &dyn ChatModel,
    opts: &IngestOptions,
    log: &mut ExtractionLog,
) -> Result<(Vec<FunctionSpec>, Vec<EventSpec>), IngestError> {
    let mut functions: Vec<FunctionSpec> = Vec::new();
    let mut events: Vec<EventSpec> = Vec::new();
    let mut seen_fn = BTreeSet::new();
    let mut seen_ev = BTreeSet::new();

    let probe = interface_messages(&doc.body, "interface-functions", FUNCTIONS_FORMAT);
    for segment in fitting_segments(doc, &probe, opts.budget).map_err(|e| e.at("functions"))? {
        let msgs = interface_messages(&segment, "interface-functions", FUNCTIONS_FORMAT);
        let items = ask_array(llm, msgs, opts.budget, "-", "functions", log).map_err(|e| e.at("functions"))?;
        for (_, f) in decode::<RawFunction>(items, "-", "functions", log) {
            let params: Vec<Param> = f
                .params
                .into_iter()
                .map(|p| Param {
                    name: p.name,
                    ty: p.ty,
                })
                .collect();
            let key = (f.name.clone(), params.iter().map(|p| p.ty.clone()).collect::<Vec<_>>());
            if seen_fn.insert(key) {
                functions.push(FunctionSpec {
                    name: f.name,
                    params,
                    returns: f.returns.filter(|r| !r.trim().is_empty()),
                    optional_flag: f.optional,
                    rules: Vec::new(),
                });
            }
        }
    }

    let probe = interface_messages(&doc.body, "interface-events", EVENTS_FORMAT);
    for segment in fitting_segments(doc, &probe, opts.budget).map_err(|e| e.at("events"))? {
        let msgs = interface_messages(&segment, "interface-events", EVENTS_FORMAT);
        let items = ask_array(llm, msgs, opts.budget, "-", "events", log).map_err(|e| e.at("events"))?;
        for (_, e) in decode::<RawEvent>(items, "-", "events", log) {
            if seen_ev.insert(e.name.clone()) {
                events.push(EventSpec {
                    name: e.name,
                    params: e
                        .params
                        .into_iter()
                        .map(|p| EventParam {
                            name: p.name,
                            ty: p.ty,
                            indexed: p.indexed,
                        })
                        .collect(),
                    rules: Vec::new(),
                });
            }
        }
    }
    Ok((functions, events))
}

/// Declaration text for a function spec, e.g.
/// `function transfer(address _to, uint256 _value) public returns (bool)`.
pub fn function_declaration(f: &FunctionSpec) -> String {
    let params: Vec<String> = f
        .params
        .iter()
        .map(|p| if p.name.is_empty() { p.ty.clone() } else { format!("{} {}", p.ty, p.name) })
        .collect();
    let mut s = format!("function {}({}) public", f.name, params.join(", "));
    if let Some(r) = &f.returns {
        s.push_str(&format!(" returns ({r})"));
    }
    s
}

/// The declaration line the document itself gives for `keyword name(types)`,
/// matched on name and parameter types, without a trailing `;`.
fn declared_in(doc: &ErcDocument, keyword: &str, name: &str, types: &[&str]) -> Option<String> {
    let re = Regex::new(&format!(r"^\s*{keyword}\s+{}\s*\(([^)]*)\)", regex::escape(name))).expect("valid regex");
    doc.body.lines().find_map(|line| {
        let c = re.captures(line)?;
        let found: Vec<&str> = c[1]
            .split(',')
            .filter_map(|p| p.split_whitespace().next())
            .collect();
        (found == types).then(|| line.trim().trim_end_matches(';').trim_end().to_string())
    })
}

fn function_declaration_in(doc: &ErcDocument, f: &FunctionSpec) -> String {
    let types: Vec<&str> = f.params.iter().map(|p| p.ty.as_str()).collect();
    declared_in(doc, "function", &f.name, &types).unwrap_or_else(|| function_declaration(f))
}

fn event_declaration_in(doc: &ErcDocument, e: &EventSpec) -> String {
    let types: Vec<&str> = e.params.iter().map(|p| p.ty.as_str()).collect();
    declared_in(doc, "event", &e.name, &types).unwrap_or_else(|| event_declaration(e))
}

pub fn event_declaration(e: &EventSpec) -> String {
    let params: Vec<String> = e
        .params
        .iter()
        .map(|p| {
            let mut s = p.ty.clone();
            if p.indexed {
                s.push_str(" indexed");
            }
            if !p.name.is_empty() {
                s.push(' ');
                s.push_str(&p.name);
            }
            s
        })
        .collect();
    format!("event {}({})", e.name, params.join(", "))
}

fn rule_format(group: RuleGroup) -> &'static str {
    match group {
        RuleGroup::CP => r#"[{"text": "<rule sentence from the ERC>", "pattern_id": "CP1", "condition": "...", "condition_type": "if|unless|when|always", "action": "...", "compound": false}]"#,
        RuleGroup::EP => r#"[{"text": "<rule sentence from the ERC>", "pattern_id": "EP1", "condition": "<empty when always required>", "event": "Transfer", "polarity": "must-emit|must-not-emit", "compound": false}]"#,
        RuleGroup::RP => r#"[{"text": "<rule sentence from the ERC>", "pattern_id": "RP1", "return_semantics": "..."}]"#,
        RuleGroup::AP => r#"[{"text": "<rule sentence from the ERC>", "pattern_id": "AP1", "assignment": "..."}]"#,
        RuleGroup::DECL => "[]",
    }
}

fn rule_messages(segment: &str, subject_kind: &str, subject: &str, declaration: &str, group: RuleGroup) -> Vec<Message> {
    let patterns: Vec<String> = PatternId::in_group(group)
        .map(|p| format!("- {}: {}", p.as_str(), p.template()))
        .collect();
    let body = format!(
        "[task: rules] [{subject_kind}: {subject}] [group: {g}]\n\n{doc}\n\nDeclaration:\n{declaration}\n\n\
Group {g}: {explanation}\n\nPhrasings of {g} rules, where [x] is a required part and {{x}} an optional one:\n{patterns}\n\n\
List every {g} rule the ERC states for `{subject}`. Answer with a JSON array only, one object per rule: {format}. \
Answer [] when there are none.",
        g = group.as_str(),
        doc = document_block(segment),
        explanation = group_explanation(group),
        patterns = patterns.join("\n"),
        format = rule_format(group),
    );
    vec![Message::system(EXTRACTION_PERSONA), Message::user(body)]
}

#[derive(Deserialize)]
struct RawExtracted {
    text: String,
    #[serde(default)]
    pattern_id: Option<String>,
    #[serde(default)]
    condition: Option<String>,
    #[serde(default)]
    condition_type: Option<ConditionType>,
    #[serde(default)]
    action: Option<String>,
    #[serde(default)]
    event: Option<String>,
    #[serde(default)]
    polarity: Option<Polarity>,
    #[serde(default)]
    return_semantics: Option<String>,
    #[serde(default)]
    assignment: Option<String>,
    #[serde(default)]
    compound: bool,
}

/// Default category and impact per group; curators adjust them in review.
fn default_grading(group: RuleGroup) -> (ContentCategory, Impact) {
    match group {
        RuleGroup::CP => (ContentCategory::PrivilegeCheck, Impact::High),
        RuleGroup::EP => (ContentCategory::Logging, Impact::Low),
        RuleGroup::RP | RuleGroup::AP => (ContentCategory::Functionality, Impact::Medium),
        RuleGroup::DECL => (ContentCategory::Usage, Impact::Medium),
    }
}

fn to_rule(raw: RawExtracted, group: RuleGroup, scope: Scope, default_event: Option<&str>) -> Result<ErcRule, String> {
    let need = |v: Option<String>, key: &str| v.ok_or_else(|| format!("missing `{key}`"));
    let payload = match group {
        RuleGroup::CP => GroupPayload::Cp {
            condition: raw.condition.unwrap_or_default(),
            condition_type: raw.condition_type.ok_or("missing `condition_type`")?,
            action: need(raw.action, "action")?,
        },
        RuleGroup::EP => GroupPayload::Ep {
            condition: raw.condition.unwrap_or_default(),
            event: raw
                .event
                .or_else(|| default_event.map(String::from))
                .ok_or("missing `event`")?,
            polarity: raw.polarity.unwrap_or(Polarity::MustEmit),
        },
        RuleGroup::RP => GroupPayload::Rp {
            return_semantics: need(raw.return_semantics, "return_semantics")?,
        },
        RuleGroup::AP => GroupPayload::Ap {
            assignment: need(raw.assignment, "assignment")?,
        },
        RuleGroup::DECL => return Err("declaration rules are not extracted by prompt".into()),
    };
    let pattern_id = match raw.pattern_id.as_deref().map(str::trim).filter(|s| !s.is_empty()) {
        None => None,
        Some(p) => match PatternId::parse(p) {
            Some(id) if id.group() == group => Some(id),
            _ => return Err(format!("pattern `{p}` is not a {group} pattern")),
        },
    };
    let (content_category, impact) = default_grading(group);
    let compound = raw.compound && matches!(payload, GroupPayload::Cp { .. } | GroupPayload::Ep { .. });
    Ok(ErcRule {
        id: String::new(),
        pattern_id,
        content_category,
        impact,
        scope,
        text: raw.text,
        payload,
        compound,
        one_shot: None,
        review: Review::Pending,
    })
}

/// Segments that mention `name`, or the first segment when none does.
fn segments_about(segments: &[String], name: &str) -> Vec<String> {
    let hits: Vec<String> = segments.iter().filter(|s| s.contains(name)).cloned().collect();
    if hits.is_empty() {
        segments.iter().take(1).cloned().collect()
    } else {
        hits
    }
}

struct RuleTask {
    subject_kind: &'static str,
    subject: String,
    declaration: String,
    group: RuleGroup,
    scope: Scope,
    default_event: Option<String>,
}

type TaskOutcome = (Result<Vec<ErcRule>, IngestError>, ExtractionLog);

fn run_rule_task(doc: &ErcDocument, task: &RuleTask, llm: &dyn ChatModel, opts: &IngestOptions) -> TaskOutcome {
    let mut log = ExtractionLog::default();
    let group = task.group.as_str();
    let probe = rule_messages(&doc.body, task.subject_kind, &task.subject, &task.declaration, task.group);
    let segments = match fitting_segments(doc, &probe, opts.budget) {
        Ok(s) => s,
        Err(e) => return (Err(e), log),
    };
    let mut rules = Vec::new();
    for segment in segments_about(&segments, &task.subject) {
        let msgs = rule_messages(&segment, task.subject_kind, &task.subject, &task.declaration, task.group);
        let items = match ask_array(llm, msgs, opts.budget, &task.subject, group, &mut log) {
            Ok(items) => items,
            Err(e) => return (Err(e), log),
        };
        for (index, raw) in decode::<RawExtracted>(items, &task.subject, group, &mut log) {
            match to_rule(raw, task.group, task.scope, task.default_event.as_deref()) {
                // a rule stated near several declarations comes back once per segment
                Ok(r) if rules.iter().any(|k: &ErcRule| k.text == r.text && k.payload == r.payload) => {}
                Ok(r) => rules.push(r),
                Err(reason) => log.rejections.push(Rejection {
                    subject: task.subject.clone(),
                    group: group.into(),
                    index,
                    reason,
                }),
            }
        }
    }
    (Ok(rules), log)
}

/// Rules of one semantic group for one function.
pub fn extract_rules_for_function(
    doc: &ErcDocument,
    f: &FunctionSpec,
    group: RuleGroup,
    llm: &dyn ChatModel,
    opts: &IngestOptions,
    log: &mut ExtractionLog,
) -> Result<Vec<ErcRule>, IngestError> {
    assert!(group != RuleGroup::DECL, "declaration rules come from the interface");
    let task = function_task(doc, f, group);
    let (rules, l) = run_rule_task(doc, &task, llm, opts);
    log.absorb(l);
    rules
}

/// Emission rules for one event.
pub fn extract_event_rules(
    doc: &ErcDocument,
    ev: &EventSpec,
    llm: &dyn ChatModel,
    opts: &IngestOptions,
    log: &mut ExtractionLog,
) -> Result<Vec<ErcRule>, IngestError> {
    let (rules, l) = run_rule_task(doc, &event_task(doc, ev), llm, opts);
    log.absorb(l);
    rules
}

fn function_task(doc: &ErcDocument, f: &FunctionSpec, group: RuleGroup) -> RuleTask {
    RuleTask {
        subject_kind: "function",
        subject: f.name.clone(),
        declaration: function_declaration_in(doc, f),
        group,
        scope: Scope::Function,
        default_event: None,
    }
}

fn event_task(doc: &ErcDocument, ev: &EventSpec) -> RuleTask {
    RuleTask {
        subject_kind: "event",
        subject: ev.name.clone(),
        declaration: event_declaration_in(doc, ev),
        group: RuleGroup::EP,
        scope: Scope::Event,
        default_event: Some(ev.name.clone()),
    }
}

/// Id segment for each function: its name, suffixed with its position among
/// same-named overloads after the first.
fn function_keys(functions: &[FunctionSpec]) -> Vec<String> {
    let mut counts = std::collections::BTreeMap::<&str, usize>::new();
    functions
        .iter()
        .map(|f| {
            let n = counts.entry(&f.name).or_insert(0);
            *n += 1;
            if *n == 1 {
                f.name.clone()
            } else {
                format!("{}_{}", f.name, n)
            }
        })
        .collect()
}

fn decl_rule(id: String, declaration: String, scope: Scope) -> ErcRule {
    let (content_category, impact) = match scope {
        Scope::Event => (ContentCategory::Logging, Impact::Low),
        _ => default_grading(RuleGroup::DECL),
    };
    ErcRule {
        id,
        pattern_id: None,
        content_category,
        impact,
        scope,
        text: declaration.clone(),
        payload: GroupPayload::Decl {
            expected_signature: declaration,
        },
        compound: false,
        one_shot: None,
        review: Review::Pending,
    }
}

/// Runs the whole extraction. Prompts may run concurrently; results are
/// placed by (function order, group order) so the output is stable.
pub fn build_ruleset(
    doc: &ErcDocument,
    llm: &dyn ChatModel,
    opts: &IngestOptions,
) -> Result<(ErcRuleSet, ExtractionLog), IngestError> {
    let mut log = ExtractionLog::default();
    let (mut functions, mut events) = extract_interface(doc, llm, opts, &mut log)?;
    let mut set = ErcRuleSet::new(doc.erc_id.clone());
    if functions.is_empty() {
        log.warnings.push("the document declares no functions; the rule set is empty".into());
        set.events = events;
        return Ok((set, log));
    }

    let mut tasks: Vec<RuleTask> = Vec::new();
    for f in &functions {
        for group in RuleGroup::SEMANTIC {
            tasks.push(function_task(doc, f, group));
        }
    }
    for ev in &events {
        tasks.push(event_task(doc, ev));
    }

    let n = tasks.len();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<TaskOutcome>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..opts.workers.clamp(1, n.max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let r = run_rule_task(doc, &tasks[i], llm, opts);
                results.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(r);
            });
        }
    });
    let results = results.into_inner().unwrap_or_else(|e| e.into_inner());

    let prefix = id_prefix(&doc.erc_id);
    let keys = function_keys(&functions);
    let mut per_task: Vec<Vec<ErcRule>> = Vec::with_capacity(n);
    for (task, slot) in tasks.iter().zip(results) {
        let (rules, task_log) = slot.expect("every extraction task ran");
        log.absorb(task_log);
        per_task.push(rules.map_err(|e| e.at(format!("{} {}", task.subject, task.group.as_str())))?);
    }

    let mut per_task = per_task.into_iter();
    for (f, key) in functions.iter_mut().zip(&keys) {
        f.rules.push(decl_rule(format!("{prefix}.{key}.decl"), function_declaration_in(doc, f), Scope::Function));
        for group in RuleGroup::SEMANTIC {
            let rules = per_task.next().expect("one task per function and group");
            for (i, mut r) in rules.into_iter().enumerate() {
                r.id = format!("{prefix}.{key}.{}{}", group.as_str().to_ascii_lowercase(), i + 1);
                f.rules.push(r);
            }
        }
    }
    for ev in events.iter_mut() {
        ev.rules.push(decl_rule(format!("{prefix}.{}.decl", ev.name), event_declaration_in(doc, ev), Scope::Event));
        let rules = per_task.next().expect("one task per event");
        for (i, mut r) in rules.into_iter().enumerate() {
            r.id = format!("{prefix}.{}.ep{}", ev.name, i + 1);
            ev.rules.push(r);
        }
    }
    set.functions = functions;
    set.events = events;
    Ok((set, log))
}
