//! ERC rule taxonomy.
//!
//! A rule set mirrors how an ERC is organised: the functions and events it
//! mandates, each carrying the rules scoped to it, plus the handful of rules
//! whose scope is the whole contract. Every rule belongs to one implementation
//! group (condition/action, event emission, return semantics, assignment) or
//! to the statically checked declaration group.

mod raw;
mod validate;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

pub use validate::{first_error, validate_ruleset, Severity, ValidationIssue};

/// Implementation-oriented grouping of a rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RuleGroup {
    /// Condition check followed by an action (throw, revert, call).
    CP,
    /// Emitting or not emitting an event.
    EP,
    /// How a return value is generated.
    RP,
    /// How contract state is assigned.
    AP,
    /// Function or event declaration, checked without the LLM.
    DECL,
}

impl RuleGroup {
    pub const SEMANTIC: [RuleGroup; 4] = [RuleGroup::CP, RuleGroup::EP, RuleGroup::RP, RuleGroup::AP];

    pub fn as_str(self) -> &'static str {
        match self {
            RuleGroup::CP => "CP",
            RuleGroup::EP => "EP",
            RuleGroup::RP => "RP",
            RuleGroup::AP => "AP",
            RuleGroup::DECL => "DECL",
        }
    }

    pub fn is_static(self) -> bool {
        self == RuleGroup::DECL
    }
}

impl fmt::Display for RuleGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Linguistic pattern a rule was phrased with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PatternId {
    CP1,
    CP2,
    CP3,
    CP4,
    CP5,
    CP6,
    CP7,
    EP1,
    EP2,
    EP3,
    RP1,
    RP2,
    AP1,
}

impl PatternId {
    pub const ALL: [PatternId; 13] = [
        PatternId::CP1,
        PatternId::CP2,
        PatternId::CP3,
        PatternId::CP4,
        PatternId::CP5,
        PatternId::CP6,
        PatternId::CP7,
        PatternId::EP1,
        PatternId::EP2,
        PatternId::EP3,
        PatternId::RP1,
        PatternId::RP2,
        PatternId::AP1,
    ];

    pub fn group(self) -> RuleGroup {
        use PatternId::*;
        match self {
            CP1 | CP2 | CP3 | CP4 | CP5 | CP6 | CP7 => RuleGroup::CP,
            EP1 | EP2 | EP3 => RuleGroup::EP,
            RP1 | RP2 => RuleGroup::RP,
            AP1 => RuleGroup::AP,
        }
    }

    /// The pattern's template, with `[x]` for a parameter and `{x}` for an
    /// optional one.
    pub fn template(self) -> &'static str {
        use PatternId::*;
        match self {
            CP1 => "[subject] [must] [action] {condition}",
            CP2 => "[action] [must] result in revert",
            CP3 => "Caller must be approved to [action]",
            CP4 => "[must] revert [condition]",
            CP5 => "Caller [must] be [role]",
            CP6 => "[action] is considered invalid",
            CP7 => "[condition] [subject] [must] call [function]",
            EP1 => "[must] [action] [event] {condition}",
            EP2 => "[event] emits {condition}",
            EP3 => "{condition} without emitting [event]",
            RP1 => "return",
            RP2 => "@return/@notice",
            AP1 => "[subject] [must] [assign]",
        }
    }

    pub fn in_group(group: RuleGroup) -> impl Iterator<Item = PatternId> {
        Self::ALL.into_iter().filter(move |p| p.group() == group)
    }

    pub fn as_str(self) -> &'static str {
        use PatternId::*;
        match self {
            CP1 => "CP1",
            CP2 => "CP2",
            CP3 => "CP3",
            CP4 => "CP4",
            CP5 => "CP5",
            CP6 => "CP6",
            CP7 => "CP7",
            EP1 => "EP1",
            EP2 => "EP2",
            EP3 => "EP3",
            RP1 => "RP1",
            RP2 => "RP2",
            AP1 => "AP1",
        }
    }

    pub fn parse(s: &str) -> Option<PatternId> {
        Self::ALL.into_iter().find(|p| p.as_str().eq_ignore_ascii_case(s.trim()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContentCategory {
    PrivilegeCheck,
    Functionality,
    Usage,
    Logging,
}

impl ContentCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ContentCategory::PrivilegeCheck => "privilege-check",
            ContentCategory::Functionality => "functionality",
            ContentCategory::Usage => "usage",
            ContentCategory::Logging => "logging",
        }
    }
}

impl fmt::Display for ContentCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Severity of violating a rule. Orders high first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Impact {
    High,
    Medium,
    Low,
}

impl Impact {
    pub const ALL: [Impact; 3] = [Impact::High, Impact::Medium, Impact::Low];

    pub fn as_str(self) -> &'static str {
        match self {
            Impact::High => "high",
            Impact::Medium => "medium",
            Impact::Low => "low",
        }
    }
}

impl fmt::Display for Impact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// True for the category/impact cells populated in the ERC rule study.
/// Usage rules are medium except recipient-capability checks, which are high.
pub fn is_standard_pair(category: ContentCategory, impact: Impact) -> bool {
    use ContentCategory::*;
    matches!(
        (category, impact),
        (PrivilegeCheck, Impact::High)
            | (Functionality, Impact::High)
            | (Functionality, Impact::Medium)
            | (Usage, Impact::Medium)
            | (Usage, Impact::High)
            | (Logging, Impact::Low)
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Function,
    Event,
    Contract,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionType {
    If,
    Unless,
    When,
    Always,
}

impl ConditionType {
    pub fn as_str(self) -> &'static str {
        match self {
            ConditionType::If => "if",
            ConditionType::Unless => "unless",
            ConditionType::When => "when",
            ConditionType::Always => "always",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Polarity {
    MustEmit,
    MustNotEmit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Review {
    #[default]
    Pending,
    Approved,
}

/// Group-specific content of a rule. The variant determines the rule's group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroupPayload {
    Cp {
        condition: String,
        condition_type: ConditionType,
        action: String,
    },
    Ep {
        condition: String,
        event: String,
        polarity: Polarity,
    },
    Rp {
        return_semantics: String,
    },
    Ap {
        assignment: String,
    },
    Decl {
        expected_signature: String,
    },
}

impl GroupPayload {
    pub fn group(&self) -> RuleGroup {
        match self {
            GroupPayload::Cp { .. } => RuleGroup::CP,
            GroupPayload::Ep { .. } => RuleGroup::EP,
            GroupPayload::Rp { .. } => RuleGroup::RP,
            GroupPayload::Ap { .. } => RuleGroup::AP,
            GroupPayload::Decl { .. } => RuleGroup::DECL,
        }
    }

    /// Condition text for groups that have one.
    pub fn condition(&self) -> Option<&str> {
        match self {
            GroupPayload::Cp { condition, .. } | GroupPayload::Ep { condition, .. } => Some(condition),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "raw::RawRule", into = "raw::RawRule")]
pub struct ErcRule {
    pub id: String,
    pub pattern_id: Option<PatternId>,
    pub content_category: ContentCategory,
    pub impact: Impact,
    pub scope: Scope,
    /// The rule sentence as written in the ERC.
    pub text: String,
    pub payload: GroupPayload,
    pub compound: bool,
    pub one_shot: Option<String>,
    pub review: Review,
}

impl ErcRule {
    pub fn group(&self) -> RuleGroup {
        self.payload.group()
    }

    pub fn is_approved(&self) -> bool {
        self.review == Review::Approved
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Param {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventParam {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
    #[serde(default)]
    pub indexed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    pub name: String,
    #[serde(default)]
    pub params: Vec<Param>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub returns: Option<String>,
    /// Declared optional by the ERC; absence is not a violation.
    #[serde(rename = "optional", default)]
    pub optional_flag: bool,
    #[serde(default)]
    pub rules: Vec<ErcRule>,
}

impl FunctionSpec {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    /// `name(type1,type2)`
    pub fn signature(&self) -> String {
        let mut s = self.name.clone();
        s.push('(');
        for (i, p) in self.params.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            s.push_str(&p.ty);
        }
        s.push(')');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSpec {
    pub name: String,
    #[serde(default)]
    pub params: Vec<EventParam>,
    #[serde(default)]
    pub rules: Vec<ErcRule>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErcRuleSet {
    #[serde(rename = "erc")]
    pub erc_id: String,
    #[serde(default)]
    pub functions: Vec<FunctionSpec>,
    #[serde(default)]
    pub events: Vec<EventSpec>,
    #[serde(default)]
    pub contract_scope_rules: Vec<ErcRule>,
}

/// Where a rule sits inside its set.
#[derive(Debug, Clone, Copy)]
pub enum RuleHome<'a> {
    Function(&'a FunctionSpec),
    Event(&'a EventSpec),
    Contract,
}

impl RuleHome<'_> {
    pub fn expected_scope(&self) -> Scope {
        match self {
            RuleHome::Function(_) => Scope::Function,
            RuleHome::Event(_) => Scope::Event,
            RuleHome::Contract => Scope::Contract,
        }
    }
}

impl ErcRuleSet {
    pub fn new(erc_id: impl Into<String>) -> Self {
        ErcRuleSet {
            erc_id: erc_id.into(),
            functions: Vec::new(),
            events: Vec::new(),
            contract_scope_rules: Vec::new(),
        }
    }

    /// Every rule in file order: functions, then events, then contract scope.
    pub fn rules(&self) -> impl Iterator<Item = (RuleHome<'_>, &ErcRule)> {
        let f = self
            .functions
            .iter()
            .flat_map(|f| f.rules.iter().map(move |r| (RuleHome::Function(f), r)));
        let e = self
            .events
            .iter()
            .flat_map(|e| e.rules.iter().map(move |r| (RuleHome::Event(e), r)));
        let c = self.contract_scope_rules.iter().map(|r| (RuleHome::Contract, r));
        f.chain(e).chain(c)
    }

    pub fn rules_mut(&mut self) -> impl Iterator<Item = &mut ErcRule> {
        let f = self.functions.iter_mut().flat_map(|f| f.rules.iter_mut());
        let e = self.events.iter_mut().flat_map(|e| e.rules.iter_mut());
        f.chain(e).chain(self.contract_scope_rules.iter_mut())
    }

    pub fn rule_count(&self) -> usize {
        self.rules().count()
    }

    pub fn rule(&self, id: &str) -> Option<&ErcRule> {
        self.rules().map(|(_, r)| r).find(|r| r.id == id)
    }

    pub fn function(&self, name: &str) -> Option<&FunctionSpec> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn event(&self, name: &str) -> Option<&EventSpec> {
        self.events.iter().find(|e| e.name == name)
    }

    /// Marks every rule as reviewed.
    pub fn approve_all(&mut self) {
        for r in self.rules_mut() {
            r.review = Review::Approved;
        }
    }
}

/// Lower-cased ERC id used as the first segment of rule ids.
pub fn id_prefix(erc_id: &str) -> String {
    erc_id.to_ascii_lowercase()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_groups_cover_table() {
        assert_eq!(PatternId::in_group(RuleGroup::CP).count(), 7);
        assert_eq!(PatternId::in_group(RuleGroup::EP).count(), 3);
        assert_eq!(PatternId::in_group(RuleGroup::RP).count(), 2);
        assert_eq!(PatternId::in_group(RuleGroup::AP).count(), 1);
        assert_eq!(PatternId::in_group(RuleGroup::DECL).count(), 0);
        assert_eq!(PatternId::parse("ep2"), Some(PatternId::EP2));
        assert_eq!(PatternId::parse("XP1"), None);
    }

    #[test]
    fn standard_pairs() {
        assert!(is_standard_pair(ContentCategory::PrivilegeCheck, Impact::High));
        assert!(!is_standard_pair(ContentCategory::PrivilegeCheck, Impact::Low));
        assert!(is_standard_pair(ContentCategory::Logging, Impact::Low));
        assert!(!is_standard_pair(ContentCategory::Logging, Impact::High));
    }

    #[test]
    fn impact_orders_high_first() {
        let mut v = alloc::vec![Impact::Low, Impact::High, Impact::Medium];
        v.sort();
        assert_eq!(v, [Impact::High, Impact::Medium, Impact::Low]);
    }
}
