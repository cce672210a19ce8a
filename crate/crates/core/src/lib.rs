//! Core of the ERC compliance auditor.
//!
//! Everything in this crate is pure and allocation-only: the ERC rule model
//! and its validator, a line-accurate Solidity front end with call-graph
//! slicing and declaration checks, the per-rule prompt engine, and the audit
//! orchestrator that drives any [`llm::ChatModel`] implementation. File IO,
//! network access and the command line live in the `erc-sentinel` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod audit;
pub mod llm;
pub mod prompt;
pub mod rules;
pub mod solidity;

pub use audit::{audit_contract, AuditConfig, AuditError, AuditReport, Finding};
pub use llm::{ChatModel, Completion, GatewayError, Message, Role};
pub use prompt::{estimate_tokens, PromptOptions, PromptTask, Verdict, VerdictOutcome};
pub use rules::{ErcRule, ErcRuleSet, GroupPayload, RuleGroup, ValidationIssue};
pub use solidity::{parse_contract, CodeSlice, ContractModel, SliceReason};
