//! File, network and command-line side of the ERC compliance auditor.
//!
//! The analysis itself lives in `erc-sentinel-core`. This crate adds rule
//! file IO, the chat-completion gateway with its scripted mock, ERC
//! document ingestion, a parallel audit driver, configuration merging and
//! the bundled rule sets.

pub mod bundled;
pub mod config;
pub mod driver;
pub mod gateway;
pub mod ingest;
pub mod rulefile;

pub use driver::run_audit;
pub use rulefile::{load_ruleset, parse_ruleset, save_ruleset, RuleFileError};
