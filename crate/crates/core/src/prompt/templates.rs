//! Fixed prompt text. Changing any string here changes every prompt, so mock
//! scripts and recorded ledgers should be regenerated afterwards.

use alloc::format;
use alloc::string::String;

use crate::rules::{ConditionType, ErcRule, GroupPayload, Polarity};

pub const SYSTEM_PERSONA: &str = "You are a meticulous smart contract auditor. You check Solidity code against \
rules taken from Ethereum Request for Comments (ERC) standards. Judge only the rule you are asked about, rely \
only on the code you are shown, and keep your reasoning short.";

pub const VERDICT_INSTRUCTION: &str =
    "End your answer with exactly one line: \"VERDICT: COMPLIANT\" or \"VERDICT: VIOLATION\".";

pub const CONDITION_INSTRUCTION: &str =
    "End your answer with exactly one line: \"VERDICT: PRESENT\" or \"VERDICT: ABSENT\".";

pub const STRICT_PREFIX: &str = "Your previous answer could not be classified. Answer again.";

fn action_clause(condition_type: ConditionType, action: &str, condition: &str) -> String {
    match condition_type {
        ConditionType::Always => format!("always {action}"),
        ct => format!("{action} {} \"{condition}\"", ct.as_str()),
    }
}

/// The rule-specific question for single and action-probe prompts.
pub fn specialized_question(rule: &ErcRule, function: &str) -> String {
    match &rule.payload {
        GroupPayload::Cp {
            condition,
            condition_type,
            action,
        } => format!(
            "Examine whether each `{function}()` function {}.",
            action_clause(*condition_type, action, condition)
        ),
        GroupPayload::Ep {
            condition,
            event,
            polarity,
        } => {
            let when = if condition.trim().is_empty() {
                String::new()
            } else {
                format!(" when \"{condition}\"")
            };
            match polarity {
                Polarity::MustEmit => format!("Examine whether each `{function}()` function emits the `{event}` event{when}."),
                Polarity::MustNotEmit => {
                    format!("Examine whether each `{function}()` function avoids emitting the `{event}` event{when}.")
                }
            }
        }
        GroupPayload::Rp { return_semantics } => format!(
            "Examine whether the return value of each `{function}()` function follows this requirement: \"{return_semantics}\"."
        ),
        GroupPayload::Ap { assignment } => format!(
            "Examine whether each `{function}()` function updates contract state as required: \"{assignment}\"."
        ),
        GroupPayload::Decl { expected_signature } => {
            format!("Examine whether `{function}()` is declared as `{expected_signature}`.")
        }
    }
}

/// Question used when specialization is switched off: the raw rule text.
pub fn generic_question(rule: &ErcRule, function: &str) -> String {
    format!(
        "Examine whether each `{function}()` function complies with this ERC rule: \"{}\"",
        rule.text
    )
}

/// Stage-one question of a compound rule: is the prerequisite there at all?
pub fn condition_question(rule: &ErcRule, function: &str) -> String {
    let condition = rule.payload.condition().unwrap_or_default();
    format!(
        "Examine whether the following situation can occur in each `{function}()` function or the code it calls: \
         \"{condition}\". Answer PRESENT if it can and ABSENT if it cannot."
    )
}

pub fn code_block(rendered: &str) -> String {
    format!("```solidity\n{rendered}\n```")
}

pub fn example_block(one_shot: &str) -> String {
    format!("Example:\n{one_shot}")
}
