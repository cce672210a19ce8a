//! Inheritance linearization, call resolution and transitive reachability.
//!
//! Calls are resolved by name and argument count against the linearized
//! inheritance chain of a context contract. External calls through another
//! contract's address are ignored because their code is not in scope.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::{CallTarget, ContractId, ContractModel, FieldId, FunctionId, FunctionKind, ModelWarning};

/// Everything a function can reach inside the file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RelatedCode {
    /// Transitive callees, including modifiers, sorted by id. The anchor
    /// itself is never listed.
    pub callees: Vec<FunctionId>,
    /// State variables read or written by the anchor or any callee.
    pub fields: Vec<FieldId>,
}

/// C3 linearization with the contract itself first and the rightmost base
/// treated as the most derived. Falls back to a depth-first order when the
/// hierarchy is not linearizable.
pub fn linearize(model: &ContractModel, contract: ContractId) -> Vec<ContractId> {
    let mut stack = Vec::new();
    lin(model, contract, &mut stack)
}

fn base_id(model: &ContractModel, base: &str) -> Option<ContractId> {
    model.contract_id(base.rsplit('.').next().unwrap_or(base))
}

fn lin(model: &ContractModel, c: ContractId, stack: &mut Vec<ContractId>) -> Vec<ContractId> {
    if stack.contains(&c) {
        return Vec::new();
    }
    stack.push(c);
    let parents: Vec<ContractId> = model
        .contract(c)
        .parents
        .iter()
        .rev()
        .filter_map(|p| base_id(model, p))
        .filter(|p| !stack.contains(p))
        .collect();
    let mut seqs: Vec<Vec<ContractId>> = parents.iter().map(|&p| lin(model, p, stack)).collect();
    stack.pop();
    seqs.push(parents.clone());

    let mut out = vec![c];
    match merge(seqs) {
        Some(m) => out.extend(m),
        None => {
            let mut seen = BTreeSet::new();
            seen.insert(c);
            dfs(model, &parents, &mut seen, &mut out);
        }
    }
    out
}

fn dfs(model: &ContractModel, parents: &[ContractId], seen: &mut BTreeSet<ContractId>, out: &mut Vec<ContractId>) {
    for &p in parents {
        if seen.insert(p) {
            out.push(p);
            let next: Vec<ContractId> = model
                .contract(p)
                .parents
                .iter()
                .rev()
                .filter_map(|b| base_id(model, b))
                .collect();
            dfs(model, &next, seen, out);
        }
    }
}

fn merge(mut seqs: Vec<Vec<ContractId>>) -> Option<Vec<ContractId>> {
    let mut out = Vec::new();
    loop {
        seqs.retain(|s| !s.is_empty());
        if seqs.is_empty() {
            return Some(out);
        }
        let head = seqs
            .iter()
            .map(|s| s[0])
            .find(|h| seqs.iter().all(|s| !s[1..].contains(h)))?;
        out.push(head);
        for s in &mut seqs {
            if s[0] == head {
                s.remove(0);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Resolution {
    Resolved(FunctionId),
    /// A virtual call with several bodied overrides.
    Ambiguous,
    Unresolved,
    /// Builtins, type conversions, events and external calls.
    Ignored,
}

pub(crate) struct Resolver<'m> {
    model: &'m ContractModel,
    lin: Vec<ContractId>,
}

impl<'m> Resolver<'m> {
    /// Resolver for code owned by `owner` executing as part of `ctx`. When
    /// `ctx` does not inherit from `owner` (libraries, unrelated contracts)
    /// the owner's own chain is used.
    pub(crate) fn new(model: &'m ContractModel, owner: ContractId, ctx: ContractId) -> Self {
        let lin = linearize(model, ctx);
        let lin = if lin.contains(&owner) { lin } else { linearize(model, owner) };
        Resolver { model, lin }
    }

    fn find(&self, chain: &[ContractId], name: &str, arity: Option<usize>, modifier: bool) -> Option<FunctionId> {
        chain.iter().find_map(|&c| {
            self.model
                .functions_of(c)
                .find(|(_, f)| {
                    f.name == name
                        && f.is_modifier() == modifier
                        && f.kind != FunctionKind::Constructor
                        && arity.is_none_or(|a| f.arity() == a)
                })
                .map(|(id, _)| id)
        })
    }

    /// Sends a call to a bodiless declaration on to its implementation.
    fn dispatch(&self, id: FunctionId) -> Resolution {
        let f = self.model.function(id);
        if f.has_body {
            return Resolution::Resolved(id);
        }
        let impls: Vec<FunctionId> = self
            .model
            .functions
            .iter()
            .enumerate()
            .filter(|(_, g)| {
                g.has_body
                    && g.name == f.name
                    && g.arity() == f.arity()
                    && !g.is_modifier()
                    && linearize(self.model, g.owner).contains(&f.owner)
            })
            .map(|(i, _)| FunctionId(i))
            .collect();
        match impls.as_slice() {
            [one] => Resolution::Resolved(*one),
            [] => Resolution::Unresolved,
            _ => Resolution::Ambiguous,
        }
    }

    fn is_type_like(&self, name: &str) -> bool {
        self.model.contract_id(name).is_some()
            || self.model.type_names.contains(name)
            || self.model.events.iter().any(|e| e.name == name)
    }

    fn using_for(&self, name: &str, arity: usize) -> Option<FunctionId> {
        self.lin.iter().find_map(|&c| {
            self.model.contract(c).using_for.iter().find_map(|u| {
                let lib = self.model.contract_id(&u.library)?;
                self.find(&[lib], name, Some(arity + 1), false)
            })
        })
    }

    pub(crate) fn call(&self, caller: FunctionId, target: &CallTarget, arity: usize) -> Resolution {
        let f = self.model.function(caller);
        match target {
            CallTarget::Plain(name) | CallTarget::This(name) => {
                if let Some(id) = self.find(&self.lin, name, Some(arity), false) {
                    return self.dispatch(id);
                }
                let capitalized = name.chars().next().is_some_and(|c| c.is_ascii_uppercase());
                if self.is_type_like(name) || f.locals.contains(name.as_str()) || capitalized {
                    Resolution::Ignored
                } else {
                    Resolution::Unresolved
                }
            }
            CallTarget::Super(name) => {
                let pos = self.lin.iter().position(|&c| c == f.owner).map_or(0, |p| p + 1);
                match self.find(&self.lin[pos..], name, Some(arity), false) {
                    Some(id) => self.dispatch(id),
                    None => Resolution::Unresolved,
                }
            }
            CallTarget::Member(base, name) => {
                if let Some(c) = self.model.contract_id(base) {
                    let chain = linearize(self.model, c);
                    return match self.find(&chain, name, Some(arity), false) {
                        Some(id) => self.dispatch(id),
                        // `I(x).f` style through a contract name used as a value
                        None => Resolution::Ignored,
                    };
                }
                match self.using_for(name, arity) {
                    Some(id) => self.dispatch(id),
                    None => Resolution::Ignored,
                }
            }
            CallTarget::MemberExpr(name) => match self.using_for(name, arity) {
                Some(id) => self.dispatch(id),
                None => Resolution::Ignored,
            },
        }
    }

    pub(crate) fn modifier(&self, name: &str, arity: usize) -> Resolution {
        if name.contains('.') {
            return Resolution::Ignored;
        }
        if let Some(id) = self
            .find(&self.lin, name, Some(arity), true)
            .or_else(|| self.find(&self.lin, name, None, true))
        {
            return Resolution::Resolved(id);
        }
        if let Some(c) = self.model.contract_id(name) {
            return match self
                .model
                .functions_of(c)
                .find(|(_, g)| g.kind == FunctionKind::Constructor)
            {
                Some((id, _)) => Resolution::Resolved(id),
                None => Resolution::Ignored,
            };
        }
        Resolution::Unresolved
    }

    /// Direct callees of `f`, modifiers first, in order of appearance.
    pub(crate) fn callees(&self, f: FunctionId) -> Vec<FunctionId> {
        let def = self.model.function(f);
        let mut out = Vec::new();
        let mods = def.modifiers.iter().map(|m| self.modifier(&m.name, m.arity));
        let calls = def.calls.iter().map(|c| self.call(f, &c.target, c.arity));
        for r in mods.chain(calls) {
            if let Resolution::Resolved(id) = r {
                if !out.contains(&id) {
                    out.push(id);
                }
            }
        }
        out
    }

    /// State variables referenced by name in the body of `f`.
    pub(crate) fn fields(&self, f: FunctionId) -> Vec<FieldId> {
        let def = self.model.function(f);
        let mut out = Vec::new();
        for (name, _) in &def.idents {
            if def.locals.contains(name.as_str()) {
                continue;
            }
            let hit = self.lin.iter().find_map(|&c| {
                self.model
                    .fields
                    .iter()
                    .position(|fd| fd.owner == c && fd.name == *name)
                    .map(FieldId)
            });
            if let Some(id) = hit {
                if !out.contains(&id) {
                    out.push(id);
                }
            }
        }
        out
    }
}

/// Direct callees of `f` resolved within its own contract.
pub fn direct_callees(model: &ContractModel, f: FunctionId) -> Vec<FunctionId> {
    let owner = model.function(f).owner;
    Resolver::new(model, owner, owner).callees(f)
}

/// Transitive closure of [`direct_callees`] plus referenced state.
pub fn related_code(model: &ContractModel, f: FunctionId) -> RelatedCode {
    related_code_in(model, f, model.function(f).owner)
}

/// Like [`related_code`], but virtual calls dispatch as they would in an
/// instance of `ctx`.
pub fn related_code_in(model: &ContractModel, f: FunctionId, ctx: ContractId) -> RelatedCode {
    let mut seen = BTreeSet::new();
    let mut fields = BTreeSet::new();
    let mut queue = VecDeque::from([f]);
    seen.insert(f);
    while let Some(g) = queue.pop_front() {
        let r = Resolver::new(model, model.function(g).owner, ctx);
        fields.extend(r.fields(g));
        for c in r.callees(g) {
            if seen.insert(c) {
                queue.push_back(c);
            }
        }
    }
    seen.remove(&f);
    RelatedCode {
        callees: seen.into_iter().collect(),
        fields: fields.into_iter().collect(),
    }
}

/// Problems found while resolving every call in its owner's context.
pub(crate) fn resolution_warnings(model: &ContractModel) -> Vec<ModelWarning> {
    let mut out = Vec::new();
    for c in &model.contracts {
        for base in &c.parents {
            if base_id(model, base).is_none() {
                out.push(ModelWarning::UnknownBase {
                    contract: c.name.clone(),
                    base: base.clone(),
                });
            }
        }
    }
    for (i, f) in model.functions.iter().enumerate() {
        let id = FunctionId(i);
        let r = Resolver::new(model, f.owner, f.owner);
        let mods = f
            .modifiers
            .iter()
            .map(|m| (m.name.to_string(), m.line, r.modifier(&m.name, m.arity)));
        let calls = f.calls.iter().map(|c| {
            let name = match &c.target {
                CallTarget::Plain(n) | CallTarget::MemberExpr(n) => n.clone(),
                CallTarget::This(n) => alloc::format!("this.{n}"),
                CallTarget::Super(n) => alloc::format!("super.{n}"),
                CallTarget::Member(b, n) => alloc::format!("{b}.{n}"),
            };
            (name, c.line, r.call(id, &c.target, c.arity))
        });
        for (callee, line, res) in mods.chain(calls) {
            let function: String = model.qualified_name(id);
            match res {
                Resolution::Unresolved => out.push(ModelWarning::UnresolvedCall { function, callee, line }),
                Resolution::Ambiguous => out.push(ModelWarning::AmbiguousDispatch { function, callee, line }),
                _ => {}
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solidity::parse_contract;
    use alloc::format;
    use proptest::prelude::*;

    fn names(model: &ContractModel, ids: &[ContractId]) -> Vec<String> {
        ids.iter().map(|&c| model.contract(c).name.clone()).collect()
    }

    #[test]
    fn c3_diamond() {
        let src = "contract A {}\ncontract B is A {}\ncontract C is A {}\ncontract D is B, C {}";
        let m = parse_contract(src).unwrap();
        let d = m.contract_id("D").unwrap();
        assert_eq!(names(&m, &linearize(&m, d)), ["D", "C", "B", "A"]);
    }

    #[test]
    fn cyclic_hierarchy_terminates() {
        let m = parse_contract("contract A is B {}\ncontract B is A {}").unwrap();
        let a = m.contract_id("A").unwrap();
        assert_eq!(names(&m, &linearize(&m, a)), ["A", "B"]);
    }

    const CHAIN: &str = r#"
library SafeMath {
    function sub(uint a, uint b) internal pure returns (uint) { require(b <= a); return a - b; }
}
contract Base {
    using SafeMath for uint256;
    mapping(address => uint) balances;
    uint supply;
    modifier live() { require(supply > 0); _; }
    function _move(address a, address b, uint v) internal virtual { balances[a] = balances[a].sub(v); balances[b] += v; }
    function _hook() internal virtual;
    function unused() internal { supply = 0; }
}
contract Token is Base {
    uint other;
    function transfer(address to, uint v) public live returns (bool) { _move(msg.sender, to, v); _hook(); return true; }
    function _hook() internal override { other += 1; }
}
"#;

    #[test]
    fn transitive_closure_with_library_modifier_and_override() {
        let m = parse_contract(CHAIN).unwrap();
        assert!(m.warnings.is_empty(), "{:?}", m.warnings);
        let t = m.find_function("Token.transfer").unwrap();
        let rc = related_code(&m, t);
        let mut got: Vec<String> = rc.callees.iter().map(|&f| m.qualified_name(f)).collect();
        got.sort();
        assert_eq!(got, ["Base._move", "Base.live", "SafeMath.sub", "Token._hook"]);
        let mut fields: Vec<&str> = rc.fields.iter().map(|&f| m.field(f).name.as_str()).collect();
        fields.sort();
        assert_eq!(fields, ["balances", "other", "supply"]);
    }

    #[test]
    fn abstract_call_dispatches_to_unique_override() {
        let m = parse_contract(CHAIN).unwrap();
        let mv = m.find_function("Base._move").unwrap();
        let hook_decl = m
            .functions
            .iter()
            .position(|f| f.name == "_hook" && !f.has_body)
            .unwrap();
        let base = m.contract_id("Base").unwrap();
        let r = Resolver::new(&m, base, base);
        assert_eq!(
            r.dispatch(FunctionId(hook_decl)),
            Resolution::Resolved(m.find_function("Token._hook").unwrap())
        );
        assert_eq!(direct_callees(&m, mv), [m.find_function("SafeMath.sub").unwrap()]);
    }

    #[test]
    fn unresolved_and_ambiguous_warnings() {
        let src = r#"
contract A { function h() internal virtual; function f() public { h(); missing(1); } }
contract B is A { function h() internal override {} }
contract C is A { function h() internal override {} }
"#;
        let m = parse_contract(src).unwrap();
        let text: Vec<String> = m.warnings.iter().map(|w| format!("{w}")).collect();
        assert_eq!(m.warnings.len(), 2, "{text:?}");
        assert!(matches!(&m.warnings[0], ModelWarning::AmbiguousDispatch { callee, .. } if callee == "h"));
        assert!(matches!(&m.warnings[1], ModelWarning::UnresolvedCall { callee, .. } if callee == "missing"));
        // in the context of B the virtual call is unambiguous
        let f = m.find_function("A.f").unwrap();
        let b = m.contract_id("B").unwrap();
        let rc = related_code_in(&m, f, b);
        assert_eq!(rc.callees, [m.find_function("B.h").unwrap()]);
    }

    #[test]
    fn base_constructor_modifier_resolves_to_constructor() {
        let src = "contract A { uint x; constructor(uint v) { x = v; } }\ncontract B is A { constructor() A(1) {} }";
        let m = parse_contract(src).unwrap();
        let ctor_b = m.find_function("B.constructor").unwrap();
        assert_eq!(direct_callees(&m, ctor_b), [m.find_function("A.constructor").unwrap()]);
    }

    #[test]
    fn locals_shadow_fields() {
        let src = "contract A { uint x; uint y; function f(uint x) public { uint y = x; y; } }";
        let m = parse_contract(src).unwrap();
        assert!(related_code(&m, FunctionId(0)).fields.is_empty());
    }

    /// Random single-contract call graphs checked against an adjacency-list
    /// BFS computed straight from the generator's edges.
    fn graph_source(edges: &[Vec<usize>], n_fields: usize, reads: &[Vec<usize>]) -> String {
        let mut s = String::from("contract G {\n");
        for k in 0..n_fields {
            s.push_str(&format!("    uint s{k};\n"));
        }
        for (i, out) in edges.iter().enumerate() {
            s.push_str(&format!("    function f{i}() internal {{\n"));
            for j in out {
                s.push_str(&format!("        f{j}();\n"));
            }
            for k in &reads[i] {
                s.push_str(&format!("        s{k} += 1;\n"));
            }
            s.push_str("    }\n");
        }
        s.push_str("}\n");
        s
    }

    fn oracle(edges: &[Vec<usize>], reads: &[Vec<usize>], start: usize) -> (BTreeSet<usize>, BTreeSet<usize>) {
        let mut seen = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for &w in &edges[v] {
                if seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        let fields = seen.iter().flat_map(|&v| reads[v].iter().copied()).collect();
        seen.remove(&start);
        (seen, fields)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn reachability_matches_bfs_oracle(
            (edges, reads) in (1usize..12, 0usize..5).prop_flat_map(|(n, nf)| (
                proptest::collection::vec(proptest::collection::vec(0..n, 0..4), n),
                proptest::collection::vec(proptest::collection::vec(0..nf.max(1), 0..if nf == 0 { 1 } else { 3 }), n),
            ).prop_map(move |(e, r)| (e, if nf == 0 { vec![Vec::new(); n] } else { r }))),
            start in 0usize..12,
        ) {
            let n = edges.len();
            let start = start % n;
            let n_fields = reads.iter().flatten().max().map_or(0, |m| m + 1);
            let src = graph_source(&edges, n_fields, &reads);
            let m = parse_contract(&src).unwrap();
            prop_assert!(m.warnings.is_empty());
            let rc = related_code(&m, FunctionId(start));
            let (want_fns, want_fields) = oracle(&edges, &reads, start);
            let got_fns: BTreeSet<usize> = rc.callees.iter().map(|f| f.0).collect();
            let got_fields: BTreeSet<usize> = rc.fields.iter().map(|f| f.0).collect();
            prop_assert_eq!(got_fns, want_fns);
            prop_assert_eq!(got_fields, want_fields);
        }
    }
}
