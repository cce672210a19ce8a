//! Turning (slice, rule) pairs into model prompts and model answers into
//! verdicts.

mod templates;
mod tokens;
mod verdict;

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::llm::Message;
use crate::rules::ErcRule;
use crate::solidity::{CodeSlice, FunctionId};

pub use templates::{CONDITION_INSTRUCTION, SYSTEM_PERSONA, VERDICT_INSTRUCTION};
pub use tokens::estimate_tokens;
pub use verdict::{parse_verdict, Unparseable, Verdict, VerdictOutcome};

/// Slices longer than this tend to produce unreliable answers.
pub const LONG_SLICE_LINES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Single,
    ConditionProbe,
    ActionProbe,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Single => "single",
            Stage::ConditionProbe => "condition-probe",
            Stage::ActionProbe => "action-probe",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptOptions {
    /// Largest allowed token estimate for one prompt.
    pub budget: usize,
    /// Ask the payload-derived question instead of quoting the rule text.
    pub specialize: bool,
    /// Attach the rule's one-shot example when it has one.
    pub one_shot: bool,
    /// Probe compound rules in two stages.
    pub split_compound: bool,
}

impl Default for PromptOptions {
    fn default() -> Self {
        PromptOptions {
            budget: 12_000,
            specialize: true,
            one_shot: true,
            split_compound: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("prompt needs about {estimate} tokens but the budget is {budget}")]
    BudgetExceeded { estimate: usize, budget: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTask {
    pub rule_id: String,
    /// Function the question is about.
    pub function: String,
    /// Anchor of the slice embedded in the prompt.
    pub slice: FunctionId,
    pub messages: Vec<Message>,
    pub stage: Stage,
    pub token_estimate: usize,
}

impl PromptTask {
    /// The same task with an extra, stricter instruction, used once when a
    /// response had no usable verdict line.
    pub fn stricter(&self) -> PromptTask {
        let instruction = match self.stage {
            Stage::ConditionProbe => CONDITION_INSTRUCTION,
            _ => VERDICT_INSTRUCTION,
        };
        let mut messages = self.messages.clone();
        messages.push(Message::user(alloc::format!("{} {instruction}", templates::STRICT_PREFIX)));
        let token_estimate = messages.iter().map(|m| estimate_tokens(&m.content)).sum();
        PromptTask {
            messages,
            token_estimate,
            ..self.clone()
        }
    }

    pub fn user_text(&self) -> String {
        crate::llm::concat_prompt(&self.messages)
    }
}

fn build(
    rule: &ErcRule,
    slice: &CodeSlice,
    function: &str,
    question: String,
    stage: Stage,
    opts: &PromptOptions,
) -> Result<PromptTask, PromptError> {
    if slice.len() > LONG_SLICE_LINES {
        log::warn!(
            "slice for {}.{} has {} lines; answers on long inputs are less reliable",
            slice.contract,
            slice.function,
            slice.len()
        );
    }
    let mut parts = vec![
        alloc::format!("[rule: {}] [function: {function}]", rule.id),
        question,
        templates::code_block(&slice.rendered),
    ];
    if opts.one_shot {
        if let Some(example) = rule.one_shot.as_deref().filter(|s| !s.trim().is_empty()) {
            parts.push(templates::example_block(example));
        }
    }
    parts.push(
        match stage {
            Stage::ConditionProbe => CONDITION_INSTRUCTION,
            _ => VERDICT_INSTRUCTION,
        }
        .to_string(),
    );
    let messages = vec![Message::system(SYSTEM_PERSONA), Message::user(parts.join("\n\n"))];
    let token_estimate: usize = messages.iter().map(|m| estimate_tokens(&m.content)).sum();
    if token_estimate > opts.budget {
        return Err(PromptError::BudgetExceeded {
            estimate: token_estimate,
            budget: opts.budget,
        });
    }
    Ok(PromptTask {
        rule_id: rule.id.clone(),
        function: function.to_string(),
        slice: slice.anchor,
        messages,
        stage,
        token_estimate,
    })
}

fn question(rule: &ErcRule, function: &str, opts: &PromptOptions) -> String {
    if opts.specialize {
        templates::specialized_question(rule, function)
    } else {
        templates::generic_question(rule, function)
    }
}

/// One prompt asking whether the slice satisfies `rule`. Used for
/// non-compound rules, and for compound rules when splitting is off.
pub fn specialize_prompt(rule: &ErcRule, slice: &CodeSlice, opts: &PromptOptions) -> Result<PromptTask, PromptError> {
    let function = slice.function.as_str();
    build(rule, slice, function, question(rule, function, opts), Stage::Single, opts)
}

/// Deferred construction of a compound rule's second prompt.
#[derive(Debug, Clone)]
pub struct ActionBuilder<'a> {
    rule: &'a ErcRule,
    slice: &'a CodeSlice,
    opts: PromptOptions,
}

impl ActionBuilder<'_> {
    pub fn build(self) -> Result<PromptTask, PromptError> {
        let function = self.slice.function.as_str();
        build(
            self.rule,
            self.slice,
            function,
            question(self.rule, function, &self.opts),
            Stage::ActionProbe,
            &self.opts,
        )
    }
}

/// Two-stage plan for a compound rule: first ask whether the condition
/// arises at all, and only if it does ask about the action.
pub fn plan_compound<'a>(
    rule: &'a ErcRule,
    slice: &'a CodeSlice,
    opts: &PromptOptions,
) -> Result<(PromptTask, ActionBuilder<'a>), PromptError> {
    let function = slice.function.as_str();
    let condition = build(
        rule,
        slice,
        function,
        templates::condition_question(rule, function),
        Stage::ConditionProbe,
        opts,
    )?;
    Ok((condition, ActionBuilder { rule, slice, opts: *opts }))
}
