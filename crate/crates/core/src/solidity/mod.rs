//! Solidity front end.
//!
//! The parser is deliberately shallow: it recovers contracts, callable
//! definitions, state variables and events with exact line spans, and scans
//! function bodies for call sites and identifier references. Expressions are
//! never built into a tree. That is enough for call-graph slicing and for
//! checking declarations against an ERC interface, and it accepts every
//! compiler dialect from 0.4 to 0.8.

mod callgraph;
mod lexer;
mod parser;
mod slice;
mod surface;
mod types;

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub use callgraph::{direct_callees, linearize, related_code, related_code_in, RelatedCode};
pub use parser::parse_contract;
pub use slice::{slice_in_context, slice_public_function, CodeSlice, SliceReason};
pub use surface::{
    check_declarations, check_declarations_in, match_erc_surface, match_erc_surface_in, select_main_contract,
    Binding, DeclFinding, DeclFindingKind, SurfaceBinding,
};
pub use types::{getter_signature, normalize_type, parse_declaration, Declaration, EventSignature, FunctionSignature};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("syntax error at line {line}: {message}")]
pub struct SyntaxError {
    pub line: u32,
    pub message: String,
}

impl SyntaxError {
    pub(crate) fn new(line: u32, message: impl Into<String>) -> Self {
        SyntaxError {
            line,
            message: message.into(),
        }
    }
}

/// Inclusive 1-based line range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: u32,
    pub end: u32,
}

impl Span {
    pub fn new(start: u32, end: u32) -> Self {
        Span { start, end }
    }

    pub fn line(line: u32) -> Self {
        Span { start: line, end: line }
    }

    pub fn lines(self) -> impl Iterator<Item = u32> {
        self.start..=self.end
    }

    pub fn contains(self, line: u32) -> bool {
        self.start <= line && line <= self.end
    }

    pub fn line_count(self) -> u32 {
        self.end - self.start + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContractKind {
    Contract,
    Interface,
    Library,
    Abstract,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsingFor {
    pub library: String,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractDecl {
    pub name: String,
    pub kind: ContractKind,
    /// Direct bases in declaration order (`is A, B`).
    pub parents: Vec<String>,
    /// From the `contract` keyword to the opening brace.
    pub header_span: Span,
    /// Whole definition; `span.end` is the closing brace.
    pub span: Span,
    pub using_for: Vec<UsingFor>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FunctionId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ContractId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FieldId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionKind {
    Function,
    Constructor,
    Fallback,
    Receive,
    Modifier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Visibility {
    Public,
    External,
    Internal,
    Private,
}

impl Visibility {
    pub fn is_externally_callable(self) -> bool {
        matches!(self, Visibility::Public | Visibility::External)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Visibility::Public => "public",
            Visibility::External => "external",
            Visibility::Internal => "internal",
            Visibility::Private => "private",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutability {
    Pure,
    View,
    Payable,
    NonPayable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamDecl {
    pub name: Option<String>,
    /// Type as written, locations and `indexed` removed.
    pub ty: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventParamDecl {
    pub name: Option<String>,
    pub ty: String,
    pub indexed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModifierInvocation {
    pub name: String,
    pub arity: usize,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum CallTarget {
    /// `f(...)`
    Plain(String),
    /// `this.f(...)`
    This(String),
    /// `super.f(...)`
    Super(String),
    /// `x.f(...)` where `x` is a plain identifier.
    Member(String, String),
    /// `<expr>.f(...)`
    MemberExpr(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct CallSite {
    pub target: CallTarget,
    pub arity: usize,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionDef {
    /// `constructor`, `fallback` and `receive` use their keyword as name.
    pub name: String,
    pub owner: ContractId,
    pub kind: FunctionKind,
    pub visibility: Visibility,
    pub params: Vec<ParamDecl>,
    pub returns: Vec<ParamDecl>,
    pub modifiers: Vec<ModifierInvocation>,
    /// Header through closing brace (or `;` when there is no body).
    pub body_span: Span,
    pub leading_comment_span: Option<Span>,
    pub state_mutability: Mutability,
    pub has_body: bool,
    pub(crate) calls: Vec<CallSite>,
    pub(crate) idents: Vec<(String, u32)>,
    pub(crate) locals: BTreeSet<String>,
}

impl FunctionDef {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    pub fn header_line(&self) -> u32 {
        self.body_span.start
    }

    pub fn is_modifier(&self) -> bool {
        self.kind == FunctionKind::Modifier
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDef {
    pub name: String,
    pub ty: String,
    pub visibility: Visibility,
    pub owner: ContractId,
    pub decl_line: u32,
    pub span: Span,
    pub constant: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventDef {
    pub name: String,
    pub owner: ContractId,
    pub params: Vec<EventParamDecl>,
    pub decl_line: u32,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelWarning {
    /// Inline assembly is kept verbatim but never analysed.
    UnsupportedConstruct { line: u32, what: String },
    UnresolvedCall { function: String, callee: String, line: u32 },
    /// A call through an interface or abstract base with no unique override.
    AmbiguousDispatch { function: String, callee: String, line: u32 },
    UnknownBase { contract: String, base: String },
    Skipped { line: u32, what: String },
}

impl fmt::Display for ModelWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelWarning::UnsupportedConstruct { line, what } => write!(f, "line {line}: {what} is not analysed"),
            ModelWarning::UnresolvedCall { function, callee, line } => {
                write!(f, "line {line}: call to `{callee}` in `{function}` could not be resolved")
            }
            ModelWarning::AmbiguousDispatch { function, callee, line } => {
                write!(f, "line {line}: virtual call to `{callee}` in `{function}` has no unique override")
            }
            ModelWarning::UnknownBase { contract, base } => {
                write!(f, "base `{base}` of `{contract}` is not defined in this file")
            }
            ModelWarning::Skipped { line, what } => write!(f, "line {line}: skipped {what}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LineKind {
    Blank,
    /// Only comment text on the line.
    Comment,
    Code,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractModel {
    pub source_lines: Vec<String>,
    pub contracts: Vec<ContractDecl>,
    /// Functions, constructors, fallbacks and modifiers in source order.
    pub functions: Vec<FunctionDef>,
    pub fields: Vec<FieldDef>,
    pub events: Vec<EventDef>,
    pub pragma: Option<String>,
    pub warnings: Vec<ModelWarning>,
    pub(crate) line_kinds: Vec<LineKind>,
    /// Struct, enum, error and user type names.
    pub(crate) type_names: BTreeSet<String>,
}

impl ContractModel {
    pub fn contract(&self, id: ContractId) -> &ContractDecl {
        &self.contracts[id.0]
    }

    pub fn function(&self, id: FunctionId) -> &FunctionDef {
        &self.functions[id.0]
    }

    pub fn field(&self, id: FieldId) -> &FieldDef {
        &self.fields[id.0]
    }

    pub fn contract_id(&self, name: &str) -> Option<ContractId> {
        self.contracts.iter().position(|c| c.name == name).map(ContractId)
    }

    /// Functions and modifiers owned by a contract.
    pub fn functions_of(&self, contract: ContractId) -> impl Iterator<Item = (FunctionId, &FunctionDef)> {
        self.functions
            .iter()
            .enumerate()
            .filter(move |(_, f)| f.owner == contract)
            .map(|(i, f)| (FunctionId(i), f))
    }

    /// Finds a non-modifier function by `Contract.name` or bare name. The
    /// bare form picks the last definition in the file, which is usually the
    /// most derived one.
    pub fn find_function(&self, name: &str) -> Option<FunctionId> {
        let (contract, fname) = match name.split_once('.') {
            Some((c, f)) => (Some(c), f),
            None => (None, name),
        };
        self.functions
            .iter()
            .enumerate()
            .rev()
            .find(|(_, f)| {
                !f.is_modifier()
                    && f.name == fname
                    && contract.is_none_or(|c| self.contracts[f.owner.0].name == c)
            })
            .map(|(i, _)| FunctionId(i))
    }

    pub fn find_field(&self, name: &str) -> Option<FieldId> {
        self.fields.iter().position(|f| f.name == name).map(FieldId)
    }

    pub fn line(&self, line: u32) -> &str {
        self.source_lines.get(line as usize - 1).map_or("", |s| s.as_str())
    }

    pub fn line_count(&self) -> u32 {
        self.source_lines.len() as u32
    }

    pub(crate) fn is_comment_line(&self, line: u32) -> bool {
        self.line_kinds.get(line as usize - 1) == Some(&LineKind::Comment)
    }

    pub(crate) fn is_blank_line(&self, line: u32) -> bool {
        self.line_kinds.get(line as usize - 1) == Some(&LineKind::Blank)
    }

    /// `Contract.function`
    pub fn qualified_name(&self, id: FunctionId) -> String {
        let f = self.function(id);
        let mut s = self.contracts[f.owner.0].name.clone();
        s.push('.');
        s.push_str(&f.name);
        s
    }
}
