use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use std::sync::Mutex;

use super::*;
use crate::llm::{concat_prompt, Completion, GatewayError, Message};
use crate::prompt::estimate_tokens;
use crate::rules::*;

/// Answers from a list of (substring, response) pairs; first match wins.
struct Scripted {
    script: Vec<(&'static str, &'static str)>,
    fallback: &'static str,
    log: Mutex<Vec<String>>,
}

impl Scripted {
    fn new(script: Vec<(&'static str, &'static str)>, fallback: &'static str) -> Self {
        Scripted {
            script,
            fallback,
            log: Mutex::new(Vec::new()),
        }
    }

    fn sent(&self) -> Vec<String> {
        self.log.lock().unwrap().clone()
    }
}

impl ChatModel for Scripted {
    fn complete(&self, messages: &[Message]) -> Result<Completion, GatewayError> {
        let prompt = concat_prompt(messages);
        self.log.lock().unwrap().push(prompt.clone());
        let text = self
            .script
            .iter()
            .find(|(m, _)| prompt.contains(m))
            .map_or(self.fallback, |(_, r)| r);
        Ok(Completion {
            text: text.to_string(),
            in_tokens: estimate_tokens(&prompt),
            out_tokens: estimate_tokens(text),
        })
    }

    fn model_id(&self) -> &str {
        "scripted"
    }
}

const TOKEN: &str = r#"pragma solidity ^0.8.0;

contract Token {
    mapping(address => uint256) public balanceOf;
    event Transfer(address indexed from, address indexed to, uint256 value);

    function transfer(address to, uint256 value) public returns (bool) {
        balanceOf[msg.sender] -= value;
        balanceOf[to] += value;
        emit Transfer(msg.sender, to, value);
        return true;
    }
}
"#;

fn rule(id: &str, payload: GroupPayload, impact: Impact, category: ContentCategory, scope: Scope) -> ErcRule {
    ErcRule {
        id: id.into(),
        pattern_id: None,
        content_category: category,
        impact,
        scope,
        text: "rule text".into(),
        payload,
        compound: false,
        one_shot: None,
        review: Review::Approved,
    }
}

fn ruleset() -> ErcRuleSet {
    let mut set = ErcRuleSet::new("ERC20");
    set.functions.push(FunctionSpec {
        name: "transfer".into(),
        params: vec![
            Param {
                name: "_to".into(),
                ty: "address".into(),
            },
            Param {
                name: "_value".into(),
                ty: "uint256".into(),
            },
        ],
        returns: Some("bool".into()),
        optional_flag: false,
        rules: vec![
            rule(
                "erc20.transfer.decl",
                GroupPayload::Decl {
                    expected_signature: "function transfer(address _to, uint256 _value) public returns (bool success)"
                        .into(),
                },
                Impact::Medium,
                ContentCategory::Usage,
                Scope::Function,
            ),
            rule(
                "erc20.transfer.throw_insufficient",
                GroupPayload::Cp {
                    condition: "the caller does not have enough tokens".into(),
                    condition_type: ConditionType::If,
                    action: "throw".into(),
                },
                Impact::High,
                ContentCategory::PrivilegeCheck,
                Scope::Function,
            ),
            rule(
                "erc20.transfer.emit",
                GroupPayload::Ep {
                    condition: String::new(),
                    event: "Transfer".into(),
                    polarity: Polarity::MustEmit,
                },
                Impact::Low,
                ContentCategory::Logging,
                Scope::Function,
            ),
        ],
    });
    set.functions.push(FunctionSpec {
        name: "balanceOf".into(),
        params: vec![Param {
            name: "_owner".into(),
            ty: "address".into(),
        }],
        returns: Some("uint256".into()),
        optional_flag: false,
        rules: vec![rule(
            "erc20.balanceOf.return",
            GroupPayload::Rp {
                return_semantics: "the balance of _owner".into(),
            },
            Impact::High,
            ContentCategory::Functionality,
            Scope::Function,
        )],
    });
    set.events.push(EventSpec {
        name: "Transfer".into(),
        params: vec![],
        rules: vec![],
    });
    let mut compound = rule(
        "erc20.contract.check_bool_return",
        GroupPayload::Cp {
            condition: "a call in the function returns a Boolean value".into(),
            condition_type: ConditionType::When,
            action: "check the returned value".into(),
        },
        Impact::Medium,
        ContentCategory::Usage,
        Scope::Contract,
    );
    compound.compound = true;
    set.contract_scope_rules.push(compound);
    set
}

const COND: &str = "VERDICT: PRESENT\" or";

fn run(script: Vec<(&'static str, &'static str)>) -> (AuditReport, Scripted) {
    let model = Scripted::new(script, "Looks right.\nVERDICT: COMPLIANT");
    let report = audit_contract(TOKEN, &ruleset(), &model, &AuditConfig::default()).unwrap();
    (report, model)
}

#[test]
fn all_compliant_has_no_findings() {
    let (report, model) = run(vec![(COND, "VERDICT: ABSENT")]);
    assert!(report.findings.is_empty(), "{:?}", report.findings);
    assert!(report.uncertain.is_empty());
    // transfer: CP + EP; balanceOf is a getter and is not probed; one
    // compound condition probe for the single entry point
    assert_eq!(model.sent().len(), 3);
    assert_eq!(report.usage.prompts, 3);
    assert_eq!(report.summary, Summary::default());
}

#[test]
fn compound_truth_table() {
    let cases = [
        ("VERDICT: PRESENT", "VERDICT: VIOLATION", true, 1),
        ("VERDICT: PRESENT", "VERDICT: COMPLIANT", false, 1),
        ("VERDICT: ABSENT", "VERDICT: VIOLATION", false, 0),
        ("VERDICT: ABSENT", "VERDICT: COMPLIANT", false, 0),
    ];
    for (cond, action, finding, action_prompts) in cases {
        let (report, model) = run(vec![(COND, cond), ("check the returned value", action)]);
        let hits: Vec<_> = report
            .findings
            .iter()
            .filter(|f| f.rule_id == "erc20.contract.check_bool_return")
            .collect();
        assert_eq!(hits.len(), usize::from(finding), "{cond} / {action}");
        let action_sent = model
            .sent()
            .iter()
            .filter(|p| p.contains("check the returned value") && !p.contains(COND))
            .count();
        assert_eq!(action_sent, action_prompts, "{cond} / {action}");
        if finding {
            assert_eq!(
                hits[0].stage_trace,
                Some((VerdictOutcome::ConditionPresent, VerdictOutcome::Violation))
            );
        }
    }
}

#[test]
fn unparseable_answers_retry_once_then_uncertain() {
    let (report, model) = run(vec![(COND, "VERDICT: ABSENT"), ("emits the `Transfer`", "no idea")]);
    assert_eq!(report.uncertain.len(), 1);
    assert_eq!(report.uncertain[0].rule_id, "erc20.transfer.emit");
    assert_eq!(model.sent().len(), 4);
}

#[test]
fn findings_sorted_and_summarized() {
    let (report, _) = run(vec![
        (COND, "VERDICT: ABSENT"),
        ("emits the `Transfer`", "Missing.\nVERDICT: VIOLATION"),
        ("enough tokens", "No check.\nVERDICT: VIOLATION"),
    ]);
    let ids: Vec<_> = report.findings.iter().map(|f| f.rule_id.as_str()).collect();
    assert_eq!(ids, ["erc20.transfer.emit", "erc20.transfer.throw_insufficient"]);
    assert_eq!(report.summary, Summary { high: 1, medium: 0, low: 1 });
    assert_eq!(report.findings[0].line, Some(7));
    let text = render_text(&report);
    let high = text.find("throw_insufficient").unwrap();
    let low = text.find("erc20.transfer.emit").unwrap();
    assert!(high < low);
    assert_eq!(render_json(&report), render_json(&report));
}

#[test]
fn budget_exceeded_is_uncertain_and_unsent() {
    let model = Scripted::new(vec![], "VERDICT: COMPLIANT");
    let config = AuditConfig {
        prompt: PromptOptions {
            budget: 10,
            ..PromptOptions::default()
        },
        ..AuditConfig::default()
    };
    let report = audit_contract(TOKEN, &ruleset(), &model, &config).unwrap();
    assert!(model.sent().is_empty());
    assert_eq!(report.uncertain.len(), 3);
    assert!(report.uncertain.iter().all(|u| u.reason.starts_with("BudgetExceeded")));
}

#[test]
fn pending_rules_are_refused() {
    let mut set = ruleset();
    set.functions[0].rules[1].review = Review::Pending;
    let model = Scripted::new(vec![], "VERDICT: COMPLIANT");
    let err = audit_contract(TOKEN, &set, &model, &AuditConfig::default()).unwrap_err();
    assert!(matches!(err, AuditError::RulesNotApproved { count: 1, .. }));
}

#[test]
fn static_findings_never_prompt() {
    let src = TOKEN.replace("function transfer(address to, uint256 value) public returns (bool)", "function transfer(address to, uint256 value) public returns (uint256)");
    let model = Scripted::new(vec![(COND, "VERDICT: ABSENT")], "VERDICT: COMPLIANT");
    let report = audit_contract(&src, &ruleset(), &model, &AuditConfig::default()).unwrap();
    assert_eq!(report.findings.len(), 1);
    assert_eq!(report.findings[0].source, FindingSource::Static);
    assert!(model.sent().iter().all(|p| !p.contains("erc20.transfer.decl")));
}

#[test]
fn empty_report_json() {
    let (report, _) = run(vec![(COND, "VERDICT: ABSENT")]);
    let json = render_json(&report);
    assert!(json.contains("\"findings\": []"));
    assert!(json.contains("\"schema\": \"erc-sentinel/report/v1\""));
    assert!(json.contains("\"high\": 0"));
    let order = ["\"schema\"", "\"contract\"", "\"ruleset\"", "\"model\"", "\"summary\"", "\"findings\"", "\"uncertain\"", "\"usage\""];
    let pos: Vec<usize> = order.iter().map(|k| json.find(k).unwrap()).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn diff_by_key() {
    let (clean, _) = run(vec![(COND, "VERDICT: ABSENT")]);
    let (dirty, _) = run(vec![(COND, "VERDICT: ABSENT"), ("enough tokens", "VERDICT: VIOLATION")]);
    assert_eq!(diff_reports(&clean, &clean).unwrap(), ReportDiff::default());
    let d = diff_reports(&clean, &dirty).unwrap();
    assert_eq!(d.added.len(), 1);
    assert_eq!(d.added[0].rule_id, "erc20.transfer.throw_insufficient");
    assert!(d.removed.is_empty());
    let mut other = dirty.clone();
    other.ruleset = "ERC721".into();
    assert!(matches!(diff_reports(&clean, &other), Err(DiffError::RulesetMismatch(..))));
}

#[test]
fn stage_vocabulary_in_prompts() {
    let (_, model) = run(vec![(COND, "VERDICT: ABSENT")]);
    let sent = model.sent();
    assert_eq!(sent.iter().filter(|p| p.contains(COND)).count(), 1);
    assert!(sent.iter().all(|p| p.contains("[rule: ")));
}

#[test]
fn event_rules_are_probed_on_entry_points() {
    let mut set = ruleset();
    set.contract_scope_rules.clear();
    set.events[0].rules.push(rule(
        "erc20.Transfer.emit_on_mint",
        GroupPayload::Ep {
            condition: "new tokens are created".into(),
            event: "Transfer".into(),
            polarity: Polarity::MustEmit,
        },
        Impact::Low,
        ContentCategory::Logging,
        Scope::Event,
    ));
    let model = Scripted::new(vec![("new tokens are created", "VERDICT: VIOLATION")], "VERDICT: COMPLIANT");
    let report = audit_contract(TOKEN, &set, &model, &AuditConfig::default()).unwrap();
    // transfer: CP + EP + the event rule on the single entry point
    assert_eq!(model.sent().len(), 3);
    assert_eq!(report.findings.len(), 1);
    assert_eq!(report.findings[0].function.as_deref(), Some("transfer"));
}
