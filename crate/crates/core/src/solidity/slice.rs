//! Per-function code slices: the anchor function plus everything it can
//! reach, rendered as a subset of the original source lines.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::Serialize;

use super::callgraph::related_code_in;
use super::{ContractId, ContractModel, FunctionId, Span};

/// Why a line was included in a slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SliceReason {
    AnchorFn,
    Callee,
    Field,
    ContractHeader,
    Comment,
    ClosingBrace,
}

impl SliceReason {
    pub fn as_str(self) -> &'static str {
        match self {
            SliceReason::AnchorFn => "anchor-fn",
            SliceReason::Callee => "callee",
            SliceReason::Field => "field",
            SliceReason::ContractHeader => "contract-header",
            SliceReason::Comment => "comment",
            SliceReason::ClosingBrace => "closing-brace",
        }
    }
}

impl fmt::Display for SliceReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeSlice {
    pub anchor: FunctionId,
    /// Owner contract of the anchor.
    pub contract: String,
    pub function: String,
    /// Ascending source line numbers.
    pub lines: Vec<u32>,
    pub reasons: BTreeMap<u32, SliceReason>,
    /// Selected source lines joined with `\n`.
    pub rendered: String,
}

impl CodeSlice {
    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    /// `(line number, reason, source text)` in source order.
    pub fn entries(&self) -> impl Iterator<Item = (u32, SliceReason, &str)> {
        self.lines
            .iter()
            .zip(self.rendered.split('\n'))
            .map(|(&l, text)| (l, self.reasons[&l], text))
    }

    /// Debug dump: a header line, then every line prefixed with its
    /// original line number.
    pub fn dump(&self) -> String {
        let mut out = format!("// slice: {}.{} ({} lines)\n", self.contract, self.function, self.len());
        for (line, _, text) in self.entries() {
            out.push_str(&format!("{line}|{text}\n"));
        }
        out
    }
}

/// Slice for a public or external function, resolving virtual calls in the
/// function's own contract.
pub fn slice_public_function(model: &ContractModel, f: FunctionId) -> CodeSlice {
    slice_in_context(model, f, model.function(f).owner)
}

/// Slice for `f` as it executes in an instance of `ctx`.
pub fn slice_in_context(model: &ContractModel, f: FunctionId, ctx: ContractId) -> CodeSlice {
    let related = related_code_in(model, f, ctx);
    let anchor = model.function(f);

    let mut reasons: BTreeMap<u32, SliceReason> = BTreeMap::new();
    let mut owners: BTreeSet<ContractId> = BTreeSet::new();

    let add_span = |reasons: &mut BTreeMap<u32, SliceReason>, span: Span, reason: SliceReason| {
        for l in span.lines() {
            let r = if model.is_comment_line(l) { SliceReason::Comment } else { reason };
            reasons.entry(l).or_insert(r);
        }
    };

    add_span(&mut reasons, anchor.body_span, SliceReason::AnchorFn);
    owners.insert(anchor.owner);
    for &c in &related.callees {
        let def = model.function(c);
        add_span(&mut reasons, def.body_span, SliceReason::Callee);
        owners.insert(def.owner);
    }
    for &fid in &related.fields {
        let field = model.field(fid);
        add_span(&mut reasons, field.span, SliceReason::Field);
        owners.insert(field.owner);
    }
    for &c in &owners {
        for l in model.contract(c).header_span.lines() {
            reasons.entry(l).or_insert(SliceReason::ContractHeader);
        }
    }
    for id in core::iter::once(f).chain(related.callees.iter().copied()) {
        if let Some(span) = model.function(id).leading_comment_span {
            for l in span.lines() {
                reasons.entry(l).or_insert(SliceReason::Comment);
            }
        }
    }
    for &c in &owners {
        reasons.entry(model.contract(c).span.end).or_insert(SliceReason::ClosingBrace);
    }

    let lines: Vec<u32> = reasons.keys().copied().collect();
    let rendered = lines.iter().map(|&l| model.line(l)).collect::<Vec<_>>().join("\n");
    CodeSlice {
        anchor: f,
        contract: model.contract(anchor.owner).name.clone(),
        function: anchor.name.clone(),
        lines,
        reasons,
        rendered,
    }
}
