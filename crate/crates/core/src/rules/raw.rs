//! Flat on-disk form of a rule: `group` and a keyed `payload` map whose
//! required keys depend on the group.

use alloc::format;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use super::{
    ConditionType, ContentCategory, ErcRule, GroupPayload, Impact, PatternId, Polarity, Review, RuleGroup,
    Scope,
};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(super) struct RawRule {
    id: String,
    group: RuleGroup,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pattern_id: Option<PatternId>,
    content_category: ContentCategory,
    impact: Impact,
    scope: Scope,
    text: String,
    payload: RawPayload,
    compound: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    one_shot: Option<String>,
    review: Review,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPayload {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    condition: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    condition_type: Option<ConditionType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    action: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    event: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    polarity: Option<Polarity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    return_semantics: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    assignment: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    expected_signature: Option<String>,
}

impl RawPayload {
    fn present_keys(&self) -> impl Iterator<Item = &'static str> + '_ {
        [
            ("condition", self.condition.is_some()),
            ("condition_type", self.condition_type.is_some()),
            ("action", self.action.is_some()),
            ("event", self.event.is_some()),
            ("polarity", self.polarity.is_some()),
            ("return_semantics", self.return_semantics.is_some()),
            ("assignment", self.assignment.is_some()),
            ("expected_signature", self.expected_signature.is_some()),
        ]
        .into_iter()
        .filter(|(_, p)| *p)
        .map(|(k, _)| k)
    }
}

fn allowed_keys(group: RuleGroup) -> &'static [&'static str] {
    match group {
        RuleGroup::CP => &["condition", "condition_type", "action"],
        RuleGroup::EP => &["condition", "event", "polarity"],
        RuleGroup::RP => &["return_semantics"],
        RuleGroup::AP => &["assignment"],
        RuleGroup::DECL => &["expected_signature"],
    }
}

fn required<T>(v: Option<T>, id: &str, group: RuleGroup, key: &str) -> Result<T, String> {
    v.ok_or_else(|| format!("rule `{id}`: {group} payload is missing key `{key}`"))
}

impl TryFrom<RawRule> for ErcRule {
    type Error = String;

    fn try_from(raw: RawRule) -> Result<Self, Self::Error> {
        let group = raw.group;
        let id = raw.id;
        let allowed = allowed_keys(group);
        if let Some(extra) = raw.payload.present_keys().find(|k| !allowed.contains(k)) {
            return Err(format!("rule `{id}`: key `{extra}` is not valid in a {group} payload"));
        }
        let p = raw.payload;
        let payload = match group {
            RuleGroup::CP => GroupPayload::Cp {
                condition: required(p.condition, &id, group, "condition")?,
                condition_type: required(p.condition_type, &id, group, "condition_type")?,
                action: required(p.action, &id, group, "action")?,
            },
            RuleGroup::EP => GroupPayload::Ep {
                condition: required(p.condition, &id, group, "condition")?,
                event: required(p.event, &id, group, "event")?,
                polarity: required(p.polarity, &id, group, "polarity")?,
            },
            RuleGroup::RP => GroupPayload::Rp {
                return_semantics: required(p.return_semantics, &id, group, "return_semantics")?,
            },
            RuleGroup::AP => GroupPayload::Ap {
                assignment: required(p.assignment, &id, group, "assignment")?,
            },
            RuleGroup::DECL => GroupPayload::Decl {
                expected_signature: required(p.expected_signature, &id, group, "expected_signature")?,
            },
        };
        Ok(ErcRule {
            id,
            pattern_id: raw.pattern_id,
            content_category: raw.content_category,
            impact: raw.impact,
            scope: raw.scope,
            text: raw.text,
            payload,
            compound: raw.compound,
            one_shot: raw.one_shot,
            review: raw.review,
        })
    }
}

impl From<ErcRule> for RawRule {
    fn from(r: ErcRule) -> Self {
        let group = r.group();
        let mut p = RawPayload::default();
        match r.payload {
            GroupPayload::Cp {
                condition,
                condition_type,
                action,
            } => {
                p.condition = Some(condition);
                p.condition_type = Some(condition_type);
                p.action = Some(action);
            }
            GroupPayload::Ep {
                condition,
                event,
                polarity,
            } => {
                p.condition = Some(condition);
                p.event = Some(event);
                p.polarity = Some(polarity);
            }
            GroupPayload::Rp { return_semantics } => p.return_semantics = Some(return_semantics),
            GroupPayload::Ap { assignment } => p.assignment = Some(assignment),
            GroupPayload::Decl { expected_signature } => p.expected_signature = Some(expected_signature),
        }
        RawRule {
            id: r.id,
            group,
            pattern_id: r.pattern_id,
            content_category: r.content_category,
            impact: r.impact,
            scope: r.scope,
            text: r.text,
            payload: p,
            compound: r.compound,
            one_shot: r.one_shot,
            review: r.review,
        }
    }
}
