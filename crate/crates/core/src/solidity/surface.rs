//! Binding an ERC interface to contract code and checking declarations.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::callgraph::linearize;
use super::types::{getter_signature, normalize_type, parse_declaration, Declaration, FunctionSignature};
use super::{ContractId, ContractKind, ContractModel, FieldId, FunctionId, FunctionKind};
use crate::rules::{ErcRuleSet, FunctionSpec, GroupPayload};

/// How one ERC function is implemented by the main contract.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Binding {
    Function(FunctionId),
    /// Compiler-generated getter of a public state variable.
    Getter(FieldId),
    /// Several same-name, same-arity definitions that types cannot separate.
    Ambiguous(Vec<FunctionId>),
    Absent,
}

#[derive(Debug, Clone)]
pub struct SurfaceBinding<'r> {
    pub spec: &'r FunctionSpec,
    pub binding: Binding,
}

impl SurfaceBinding<'_> {
    /// Functions with code that should be audited for this spec.
    pub fn bodies(&self, model: &ContractModel) -> Vec<FunctionId> {
        let ids = match &self.binding {
            Binding::Function(id) => alloc::vec![*id],
            Binding::Ambiguous(ids) => ids.clone(),
            _ => Vec::new(),
        };
        ids.into_iter().filter(|&id| model.function(id).has_body).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeclFindingKind {
    MissingFunction,
    SignatureMismatch,
    MissingEvent,
    EventParamMismatch,
    MissingIndexed,
}

impl DeclFindingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DeclFindingKind::MissingFunction => "missing-function",
            DeclFindingKind::SignatureMismatch => "signature-mismatch",
            DeclFindingKind::MissingEvent => "missing-event",
            DeclFindingKind::EventParamMismatch => "event-param-mismatch",
            DeclFindingKind::MissingIndexed => "missing-indexed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeclFinding {
    pub rule_id: String,
    pub kind: DeclFindingKind,
    pub detail: String,
    /// Line of the offending declaration; absent for missing items.
    pub location: Option<u32>,
}

fn spec_types(spec: &FunctionSpec) -> Vec<String> {
    spec.params.iter().map(|p| normalize_type(&p.ty)).collect()
}

fn def_types(model: &ContractModel, id: FunctionId) -> Vec<String> {
    model.function(id).params.iter().map(|p| normalize_type(&p.ty)).collect()
}

fn candidates(model: &ContractModel, chain: &[ContractId], name: &str, arity: usize, bodied: bool) -> Vec<FunctionId> {
    for &c in chain {
        let found: Vec<FunctionId> = model
            .functions_of(c)
            .filter(|(_, f)| {
                f.kind == FunctionKind::Function && f.name == name && f.arity() == arity && (!bodied || f.has_body)
            })
            .map(|(id, _)| id)
            .collect();
        if !found.is_empty() {
            return found;
        }
    }
    Vec::new()
}

fn getter(model: &ContractModel, chain: &[ContractId], name: &str, arity: usize) -> Option<FieldId> {
    chain.iter().find_map(|&c| {
        model
            .fields
            .iter()
            .enumerate()
            .find(|(_, f)| {
                f.owner == c && f.name == name && getter_signature(f).is_some_and(|g| g.params.len() == arity)
            })
            .map(|(i, _)| FieldId(i))
    })
}

fn bind(model: &ContractModel, chain: &[ContractId], spec: &FunctionSpec) -> Binding {
    // most derived first: a bodied function or a public getter in the same
    // contract wins over anything further up the chain
    let mut found = Vec::new();
    for (i, &c) in chain.iter().enumerate() {
        found = candidates(model, &chain[i..=i], &spec.name, spec.arity(), true);
        if !found.is_empty() {
            break;
        }
        if let Some(f) = getter(model, &[c], &spec.name, spec.arity()) {
            return Binding::Getter(f);
        }
    }
    if found.is_empty() {
        found = candidates(model, chain, &spec.name, spec.arity(), false);
    }
    match found.len() {
        0 => Binding::Absent,
        1 => Binding::Function(found[0]),
        _ => {
            let want = spec_types(spec);
            let exact: Vec<FunctionId> = found.iter().copied().filter(|&id| def_types(model, id) == want).collect();
            if exact.len() == 1 {
                Binding::Function(exact[0])
            } else {
                Binding::Ambiguous(found)
            }
        }
    }
}

fn inherited(model: &ContractModel, c: ContractId) -> bool {
    let name = &model.contract(c).name;
    model
        .contracts
        .iter()
        .any(|d| d.parents.iter().any(|p| p.rsplit('.').next() == Some(name.as_str())))
}

/// Picks the contract the audit is about: the most derived concrete contract
/// implementing the most ERC functions. Ties go to the one defined last.
pub fn select_main_contract(model: &ContractModel, rules: &ErcRuleSet) -> Option<ContractId> {
    let concrete: Vec<ContractId> = (0..model.contracts.len())
        .map(ContractId)
        .filter(|&c| !matches!(model.contract(c).kind, ContractKind::Interface | ContractKind::Library))
        .collect();
    let mut pool: Vec<ContractId> = concrete.iter().copied().filter(|&c| !inherited(model, c)).collect();
    if pool.is_empty() {
        pool = concrete;
    }
    if pool.is_empty() {
        pool = (0..model.contracts.len()).map(ContractId).collect();
    }
    let score = |c: ContractId| {
        let chain = linearize(model, c);
        rules
            .functions
            .iter()
            .filter(|s| bind(model, &chain, s) != Binding::Absent)
            .count()
    };
    let mut best: Option<(usize, ContractId)> = None;
    for c in pool {
        let s = score(c);
        if best.is_none_or(|(b, _)| s >= b) {
            best = Some((s, c));
        }
    }
    best.map(|(_, c)| c)
}

/// Binds every ERC function to the main contract's code.
pub fn match_erc_surface<'r>(model: &ContractModel, rules: &'r ErcRuleSet) -> Vec<SurfaceBinding<'r>> {
    match select_main_contract(model, rules) {
        Some(main) => match_erc_surface_in(model, rules, main),
        None => rules
            .functions
            .iter()
            .map(|spec| SurfaceBinding {
                spec,
                binding: Binding::Absent,
            })
            .collect(),
    }
}

pub fn match_erc_surface_in<'r>(model: &ContractModel, rules: &'r ErcRuleSet, main: ContractId) -> Vec<SurfaceBinding<'r>> {
    let chain = linearize(model, main);
    rules
        .functions
        .iter()
        .map(|spec| SurfaceBinding {
            spec,
            binding: bind(model, &chain, spec),
        })
        .collect()
}

/// Static DECL checks against the main contract.
pub fn check_declarations(model: &ContractModel, rules: &ErcRuleSet) -> Vec<DeclFinding> {
    match select_main_contract(model, rules) {
        Some(main) => check_declarations_in(model, rules, main),
        None => check_with(model, rules, &[], &match_erc_surface(model, rules)),
    }
}

pub fn check_declarations_in(model: &ContractModel, rules: &ErcRuleSet, main: ContractId) -> Vec<DeclFinding> {
    let chain = linearize(model, main);
    let bindings = match_erc_surface_in(model, rules, main);
    check_with(model, rules, &chain, &bindings)
}

fn render_sig(sig: &FunctionSignature) -> String {
    let ret = sig.canonical_returns();
    if ret.is_empty() {
        sig.canonical()
    } else {
        format!("{} returns ({ret})", sig.canonical())
    }
}

fn check_with(
    model: &ContractModel,
    rules: &ErcRuleSet,
    chain: &[ContractId],
    bindings: &[SurfaceBinding<'_>],
) -> Vec<DeclFinding> {
    let mut out = Vec::new();
    for (spec, b) in rules.functions.iter().zip(bindings) {
        for rule in &spec.rules {
            let GroupPayload::Decl { expected_signature } = &rule.payload else {
                continue;
            };
            let Ok(Declaration::Function(expected)) = parse_declaration(expected_signature) else {
                continue;
            };
            let finding = |kind, detail, location| DeclFinding {
                rule_id: rule.id.clone(),
                kind,
                detail,
                location,
            };
            let actual: Vec<(FunctionSignature, u32, bool)> = match &b.binding {
                Binding::Absent => {
                    if !spec.optional_flag {
                        out.push(finding(
                            DeclFindingKind::MissingFunction,
                            format!("`{}` is not implemented", render_sig(&expected)),
                            None,
                        ));
                    }
                    continue;
                }
                Binding::Function(id) => {
                    let f = model.function(*id);
                    alloc::vec![(FunctionSignature::from_def(f), f.header_line(), f.visibility.is_externally_callable())]
                }
                Binding::Ambiguous(ids) => ids
                    .iter()
                    .map(|&id| {
                        let f = model.function(id);
                        (FunctionSignature::from_def(f), f.header_line(), f.visibility.is_externally_callable())
                    })
                    .collect(),
                Binding::Getter(fid) => {
                    let fd = model.field(*fid);
                    match getter_signature(fd) {
                        Some(g) => alloc::vec![(g, fd.decl_line, true)],
                        None => continue,
                    }
                }
            };
            let matches = |(sig, _, public): &(FunctionSignature, u32, bool)| {
                *public
                    && sig.canonical() == expected.canonical()
                    && (expected.returns.is_empty() || sig.canonical_returns() == expected.canonical_returns())
            };
            if actual.iter().any(matches) {
                continue;
            }
            let (sig, line, public) = &actual[0];
            let detail = if !public {
                format!("`{}` is not externally callable", render_sig(sig))
            } else {
                format!("declared as `{}`, expected `{}`", render_sig(sig), render_sig(&expected))
            };
            out.push(finding(DeclFindingKind::SignatureMismatch, detail, Some(*line)));
        }
    }

    for spec in &rules.events {
        for rule in &spec.rules {
            let GroupPayload::Decl { expected_signature } = &rule.payload else {
                continue;
            };
            let Ok(Declaration::Event(expected)) = parse_declaration(expected_signature) else {
                continue;
            };
            let finding = |kind, detail, location| DeclFinding {
                rule_id: rule.id.clone(),
                kind,
                detail,
                location,
            };
            let event = chain
                .iter()
                .find_map(|&c| model.events.iter().find(|e| e.owner == c && e.name == expected.name));
            let Some(event) = event else {
                out.push(finding(
                    DeclFindingKind::MissingEvent,
                    format!("event `{}` is not declared", expected.canonical()),
                    None,
                ));
                continue;
            };
            let actual_types: Vec<String> = event.params.iter().map(|p| normalize_type(&p.ty)).collect();
            let want_types: Vec<String> = expected.params.iter().map(|p| normalize_type(&p.ty)).collect();
            if actual_types != want_types {
                out.push(finding(
                    DeclFindingKind::EventParamMismatch,
                    format!("declared as `{}({})`, expected `{}`", event.name, actual_types.join(","), expected.canonical()),
                    Some(event.decl_line),
                ));
                continue;
            }
            let param_name = |i: usize| {
                expected.params[i]
                    .name
                    .clone()
                    .or_else(|| event.params[i].name.clone())
                    .unwrap_or_else(|| format!("#{i}"))
            };
            let missing: Vec<String> = (0..want_types.len())
                .filter(|&i| expected.params[i].indexed && !event.params[i].indexed)
                .map(param_name)
                .collect();
            let extra: Vec<String> = (0..want_types.len())
                .filter(|&i| !expected.params[i].indexed && event.params[i].indexed)
                .map(param_name)
                .collect();
            if !missing.is_empty() {
                out.push(finding(
                    DeclFindingKind::MissingIndexed,
                    format!("`{}` must mark {} as indexed", event.name, missing.join(", ")),
                    Some(event.decl_line),
                ));
            } else if !extra.is_empty() {
                out.push(finding(
                    DeclFindingKind::EventParamMismatch,
                    format!("`{}` marks {} as indexed, which the standard does not", event.name, extra.join(", ")),
                    Some(event.decl_line),
                ));
            }
        }
    }
    out
}
