//! The narrow interface between the audit pipeline and a chat model.

use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    System,
    User,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: Role::User,
            content: content.into(),
        }
    }
}

/// All message contents joined by blank lines; mock matchers run over this.
pub fn concat_prompt(messages: &[Message]) -> String {
    messages.iter().map(|m| m.content.as_str()).collect::<Vec<_>>().join("\n\n")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub in_tokens: usize,
    pub out_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GatewayError {
    #[error("prompt needs about {estimate} tokens but the budget is {budget}")]
    BudgetExceeded { estimate: usize, budget: usize },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("authentication failed: {0}")]
    Auth(String),
}

/// A chat-completion backend. Implementations must be safe to call from
/// several audit workers at once.
pub trait ChatModel: Send + Sync {
    fn complete(&self, messages: &[Message]) -> Result<Completion, GatewayError>;

    /// Model identifier recorded in reports.
    fn model_id(&self) -> &str;

    fn temperature(&self) -> f64 {
        0.0
    }
}
