//! Drafting the ERC20 rule set from the ERC document with a mock model.

mod common;

use common::*;
use erc_sentinel::ingest::{build_ruleset, ErcDocument, IngestOptions};
use erc_sentinel::save_ruleset;
use erc_sentinel_core::rules::{validate_ruleset, GroupPayload, Review, RuleGroup};

fn document() -> ErcDocument {
    let body = fixture("erc20.md");
    ErcDocument::new(ErcDocument::infer_erc_id(&body, "ERC"), body).unwrap()
}

fn draft(budget: usize, workers: usize) -> (String, erc_sentinel::ingest::ExtractionLog) {
    let gateway = mock_gateway(&fixture("erc20_extract.yaml"), budget);
    let recorder = Recorder::new(&gateway);
    let (set, log) = build_ruleset(&document(), &recorder, &IngestOptions { budget, workers }).unwrap();
    assert!(recorder.sent().iter().all(|(estimate, _)| *estimate <= budget));
    (save_ruleset(&set), log)
}

#[test]
fn erc20_draft() {
    let gateway = mock_gateway(&fixture("erc20_extract.yaml"), 12_000);
    let (set, log) = build_ruleset(&document(), &gateway, &IngestOptions::default()).unwrap();
    assert_eq!(set.erc_id, "ERC20");
    assert_eq!(set.functions.len(), 9);
    assert_eq!(set.events.len(), 2);
    assert!(set.functions[..3].iter().all(|f| f.optional_flag));
    assert!(set.rules().all(|(_, r)| r.review == Review::Pending));

    let transfer_from = set.function("transferFrom").unwrap();
    let ids: Vec<&str> = transfer_from.rules.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(ids, ["erc20.transferFrom.decl", "erc20.transferFrom.cp1", "erc20.transferFrom.cp2"]);
    assert!(matches!(
        &transfer_from.rules[1].payload,
        GroupPayload::Cp { condition, .. } if condition.contains("deliberately authorized the sender")
    ));
    assert_eq!(set.rules().filter(|(_, r)| r.group() == RuleGroup::DECL).count(), 11);
    assert_eq!(
        set.function("balanceOf").unwrap().rules[0].text,
        "function balanceOf(address _owner) public view returns (uint256 balance)"
    );
    assert_eq!(set.rule_count(), 18);

    // only pending-review warnings; no structural errors
    let issues = validate_ruleset(&set);
    assert_eq!(issues.len(), 18);
    assert!(issues.iter().all(|i| !i.is_error()));
    assert!(log.rejections.is_empty());
    assert_eq!(log.prompts.len(), 2 + 9 * 4 + 2 + 1);
}

#[test]
fn draft_is_independent_of_worker_count() {
    let (one, _) = draft(12_000, 1);
    let (four, _) = draft(12_000, 4);
    assert_eq!(one, four);
}

#[test]
fn small_budget_segments_the_document() {
    let (whole, _) = draft(12_000, 2);
    let (segmented, log) = draft(900, 2);
    assert!(log.prompts.iter().all(|l| l.token_estimate <= 900));
    assert!(log.prompts.iter().filter(|l| l.group == "functions").count() > 1);
    assert_eq!(whole, segmented);
}
