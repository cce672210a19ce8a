use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::lexer::{lex, render, Comment, Kind, Token};
use super::{
    callgraph, CallSite, CallTarget, ContractDecl, ContractId, ContractKind, ContractModel, EventDef,
    EventParamDecl, FieldDef, FunctionDef, FunctionKind, LineKind, ModelWarning, ModifierInvocation,
    Mutability, ParamDecl, Span, SyntaxError, UsingFor, Visibility,
};

/// Statement keywords and builtins that look like calls but never name a
/// user-defined function.
const NOT_CALLABLE: &[&str] = &[
    "if", "for", "while", "do", "return", "returns", "emit", "revert", "require", "assert", "new", "delete",
    "keccak256", "sha256", "sha3", "ripemd160", "ecrecover", "addmod", "mulmod", "selfdestruct", "suicide",
    "blockhash", "gasleft", "type", "payable", "address", "bool", "string", "bytes", "byte", "uint", "int",
    "fixed", "ufixed", "catch", "try", "unchecked", "assembly", "mapping", "function", "throw", "else",
];

/// Tokens after which an identifier cannot be a local variable name.
const STATEMENT_KEYWORDS: &[&str] = &[
    "return", "emit", "delete", "else", "new", "revert", "throw", "case", "do", "is", "using", "import",
    "pragma", "constant", "public", "private", "internal", "external", "indexed",
];

const LOCATIONS: &[&str] = &["memory", "storage", "calldata"];

const FIELD_ATTRIBUTES: &[&str] = &[
    "public", "private", "internal", "external", "constant", "immutable", "override", "transient",
];

pub(crate) fn is_elementary_type(name: &str) -> bool {
    let num_suffix = |prefix: &str| {
        name.strip_prefix(prefix)
            .is_some_and(|rest| rest.is_empty() || rest.bytes().all(|b| b.is_ascii_digit() || b == b'x'))
    };
    matches!(name, "address" | "bool" | "string" | "var")
        || num_suffix("uint")
        || num_suffix("int")
        || num_suffix("bytes")
        || num_suffix("byte")
        || num_suffix("fixed")
        || num_suffix("ufixed")
}

/// Parses one Solidity source file into a [`ContractModel`].
pub fn parse_contract(source: &str) -> Result<ContractModel, SyntaxError> {
    let lexed = lex(source)?;
    let source_lines: Vec<String> = source.lines().map(String::from).collect();
    let line_kinds = classify_lines(source_lines.len(), &lexed.tokens, &lexed.comments);

    let mut p = Parser {
        toks: &lexed.tokens,
        pos: 0,
        model: ContractModel {
            source_lines,
            contracts: Vec::new(),
            functions: Vec::new(),
            fields: Vec::new(),
            events: Vec::new(),
            pragma: None,
            warnings: Vec::new(),
            line_kinds,
            type_names: BTreeSet::new(),
        },
        src: source,
    };
    p.source_unit()?;
    let mut model = p.model;

    for i in 0..model.functions.len() {
        let span = model.functions[i].body_span;
        model.functions[i].leading_comment_span = leading_comment(&model, span.start);
    }
    let warnings = callgraph::resolution_warnings(&model);
    model.warnings.extend(warnings);
    Ok(model)
}

fn classify_lines(n: usize, tokens: &[Token], comments: &[Comment]) -> Vec<LineKind> {
    let mut kinds = alloc::vec![LineKind::Blank; n];
    for c in comments {
        for l in c.start_line..=c.end_line {
            if let Some(k) = kinds.get_mut(l as usize - 1) {
                *k = LineKind::Comment;
            }
        }
    }
    for t in tokens {
        // a token may span lines only if it is a string, which cannot contain newlines
        if let Some(k) = kinds.get_mut(t.line as usize - 1) {
            *k = LineKind::Code;
        }
    }
    kinds
}

/// Contiguous comment block ending at most one blank line above `def_line`.
fn leading_comment(model: &ContractModel, def_line: u32) -> Option<Span> {
    let mut line = def_line.checked_sub(1)?;
    if line >= 1 && model.is_blank_line(line) {
        line -= 1;
    }
    if line == 0 || !model.is_comment_line(line) {
        return None;
    }
    let end = line;
    while line > 1 && model.is_comment_line(line - 1) {
        line -= 1;
    }
    Some(Span::new(line, end))
}

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    model: ContractModel,
    src: &'a str,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, n: usize) -> Option<&'a Token> {
        self.toks.get(self.pos + n)
    }

    fn at(&self, s: &str) -> bool {
        self.peek().is_some_and(|t| t.is(s))
    }

    fn last_line(&self) -> u32 {
        self.toks.last().map_or(1, |t| t.line)
    }

    fn line(&self) -> u32 {
        self.peek().map_or_else(|| self.last_line(), |t| t.line)
    }

    fn next(&mut self) -> Result<&'a Token, SyntaxError> {
        let t = self
            .toks
            .get(self.pos)
            .ok_or_else(|| SyntaxError::new(self.last_line(), "unexpected end of file"))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, s: &str) -> Result<&'a Token, SyntaxError> {
        let line = self.line();
        let t = self.next()?;
        if t.is(s) {
            Ok(t)
        } else {
            Err(SyntaxError::new(line, format!("expected `{s}`, found `{}`", t.text)))
        }
    }

    fn ident(&mut self) -> Result<&'a Token, SyntaxError> {
        let line = self.line();
        let t = self.next()?;
        if t.is_ident() {
            Ok(t)
        } else {
            Err(SyntaxError::new(line, format!("expected identifier, found `{}`", t.text)))
        }
    }

    /// Index of the bracket closing the one at `open`.
    fn matching(&self, open: usize) -> Result<usize, SyntaxError> {
        let mut depth = 0i32;
        for (i, t) in self.toks.iter().enumerate().skip(open) {
            if t.kind != Kind::Punct {
                continue;
            }
            match t.text.as_str() {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => {
                    depth -= 1;
                    if depth == 0 {
                        let want = match self.toks[open].text.as_str() {
                            "(" => ")",
                            "[" => "]",
                            _ => "}",
                        };
                        if t.text != want {
                            return Err(SyntaxError::new(t.line, format!("mismatched `{}`", t.text)));
                        }
                        return Ok(i);
                    }
                }
                _ => {}
            }
        }
        Err(SyntaxError::new(self.toks[open].line, format!("unclosed `{}`", self.toks[open].text)))
    }

    /// Skips a balanced group starting at the current token.
    fn skip_group(&mut self) -> Result<usize, SyntaxError> {
        let close = self.matching(self.pos)?;
        self.pos = close + 1;
        Ok(close)
    }

    /// Skips to the next `;` at bracket depth zero and consumes it.
    fn skip_statement(&mut self) -> Result<(), SyntaxError> {
        loop {
            let t = self.peek().ok_or_else(|| SyntaxError::new(self.last_line(), "expected `;`"))?;
            if t.is(";") {
                self.pos += 1;
                return Ok(());
            }
            if t.is("(") || t.is("[") || t.is("{") {
                self.skip_group()?;
            } else if t.is("}") || t.is(")") || t.is("]") {
                return Err(SyntaxError::new(t.line, format!("unexpected `{}`", t.text)));
            } else {
                self.pos += 1;
            }
        }
    }

    fn source_unit(&mut self) -> Result<(), SyntaxError> {
        while let Some(t) = self.peek() {
            match t.text.as_str() {
                "pragma" if t.is_ident() => self.pragma()?,
                "import" if t.is_ident() => self.skip_statement()?,
                "abstract" if t.is_ident() => {
                    let start = t.line;
                    self.pos += 1;
                    self.expect("contract")?;
                    self.contract(ContractKind::Abstract, start)?;
                }
                "contract" | "interface" | "library" if t.is_ident() => {
                    let kind = match t.text.as_str() {
                        "contract" => ContractKind::Contract,
                        "interface" => ContractKind::Interface,
                        _ => ContractKind::Library,
                    };
                    let start = t.line;
                    self.pos += 1;
                    self.contract(kind, start)?;
                }
                "struct" | "enum" if t.is_ident() => self.type_definition()?,
                "error" | "type" if t.is_ident() => {
                    self.pos += 1;
                    let name = self.ident()?;
                    self.model.type_names.insert(name.text.clone());
                    self.skip_statement()?;
                }
                "function" if t.is_ident() => {
                    let line = t.line;
                    self.skip_free_function()?;
                    self.model.warnings.push(ModelWarning::Skipped {
                        line,
                        what: "free function".to_string(),
                    });
                }
                _ if t.is_ident() => self.skip_statement()?,
                ";" => self.pos += 1,
                _ => return Err(SyntaxError::new(t.line, format!("unexpected `{}`", t.text))),
            }
        }
        Ok(())
    }

    fn pragma(&mut self) -> Result<(), SyntaxError> {
        self.pos += 1;
        let is_solidity = self.at("solidity");
        let start = self.peek_at(1).map(|t| t.start);
        let begin = self.pos;
        self.skip_statement()?;
        if is_solidity && self.model.pragma.is_none() {
            let semi = &self.toks[self.pos - 1];
            if let Some(start) = start {
                if self.pos - 1 > begin + 1 {
                    self.model.pragma = Some(self.src[start..semi.start].trim().to_string());
                }
            }
        }
        Ok(())
    }

    fn type_definition(&mut self) -> Result<(), SyntaxError> {
        self.pos += 1;
        let name = self.ident()?;
        self.model.type_names.insert(name.text.clone());
        if !self.at("{") {
            return Err(SyntaxError::new(self.line(), "expected `{`"));
        }
        self.skip_group()?;
        Ok(())
    }

    fn skip_free_function(&mut self) -> Result<(), SyntaxError> {
        self.pos += 1;
        while let Some(t) = self.peek() {
            if t.is(";") {
                self.pos += 1;
                return Ok(());
            }
            if t.is("{") {
                self.skip_group()?;
                return Ok(());
            }
            if t.is("(") {
                self.skip_group()?;
            } else {
                self.pos += 1;
            }
        }
        Err(SyntaxError::new(self.last_line(), "unexpected end of file"))
    }

    fn contract(&mut self, kind: ContractKind, start_line: u32) -> Result<(), SyntaxError> {
        let name = self.ident()?.text.clone();
        let mut parents = Vec::new();
        if self.at("is") {
            self.pos += 1;
            loop {
                let mut base = self.ident()?.text.clone();
                while self.at(".") {
                    self.pos += 1;
                    base.push('.');
                    base.push_str(&self.ident()?.text);
                }
                if self.at("(") {
                    self.skip_group()?;
                }
                parents.push(base);
                if self.at(",") {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        let open = self.expect("{")?;
        let header_span = Span::new(start_line, open.line);
        let id = ContractId(self.model.contracts.len());
        self.model.contracts.push(ContractDecl {
            name: name.clone(),
            kind,
            parents,
            header_span,
            span: header_span,
            using_for: Vec::new(),
        });

        loop {
            let t = self
                .peek()
                .ok_or_else(|| SyntaxError::new(start_line, format!("contract `{name}` is not closed")))?;
            if t.is("}") {
                self.pos += 1;
                self.model.contracts[id.0].span = Span::new(start_line, t.line);
                return Ok(());
            }
            self.member(id, &name)?;
        }
    }

    fn member(&mut self, owner: ContractId, contract_name: &str) -> Result<(), SyntaxError> {
        let t = self.peek().expect("caller checked");
        if !t.is_ident() {
            if t.is(";") {
                self.pos += 1;
                return Ok(());
            }
            return Err(SyntaxError::new(t.line, format!("unexpected `{}` in contract body", t.text)));
        }
        match t.text.as_str() {
            "function" => self.function(owner, FunctionKind::Function, contract_name),
            "constructor" if self.peek_at(1).is_some_and(|n| n.is("(")) => {
                self.function(owner, FunctionKind::Constructor, contract_name)
            }
            "fallback" if self.peek_at(1).is_some_and(|n| n.is("(")) => {
                self.function(owner, FunctionKind::Fallback, contract_name)
            }
            "receive" if self.peek_at(1).is_some_and(|n| n.is("(")) => {
                self.function(owner, FunctionKind::Receive, contract_name)
            }
            "modifier" => self.function(owner, FunctionKind::Modifier, contract_name),
            "event" => self.event(owner),
            "struct" | "enum" => self.type_definition(),
            "error" | "type" => {
                self.pos += 1;
                let name = self.ident()?;
                self.model.type_names.insert(name.text.clone());
                self.skip_statement()
            }
            "using" => {
                let line = t.line;
                self.pos += 1;
                if let Some(lib) = self.peek().filter(|t| t.is_ident()) {
                    self.model.contracts[owner.0].using_for.push(UsingFor {
                        library: lib.text.clone(),
                        line,
                    });
                }
                self.skip_statement()
            }
            _ => self.state_variable(owner),
        }
    }

    fn param_list(&mut self) -> Result<Vec<(Vec<&'a Token>, bool)>, SyntaxError> {
        let open = self.pos;
        if !self.at("(") {
            return Err(SyntaxError::new(self.line(), "expected `(`"));
        }
        let close = self.matching(open)?;
        self.pos = close + 1;
        let mut params = Vec::new();
        let mut cur: Vec<&'a Token> = Vec::new();
        let mut indexed = false;
        let mut depth = 0;
        for t in &self.toks[open + 1..close] {
            if t.kind == Kind::Punct {
                match t.text.as_str() {
                    "(" | "[" | "{" => depth += 1,
                    ")" | "]" | "}" => depth -= 1,
                    "," if depth == 0 => {
                        params.push((core::mem::take(&mut cur), indexed));
                        indexed = false;
                        continue;
                    }
                    _ => {}
                }
            }
            if depth == 0 && t.is_ident() && (LOCATIONS.contains(&t.text.as_str()) || t.text == "indexed") {
                if t.text == "indexed" {
                    indexed = true;
                }
                continue;
            }
            cur.push(t);
        }
        if !cur.is_empty() || !params.is_empty() {
            if cur.is_empty() {
                return Err(SyntaxError::new(self.toks[close].line, "empty parameter"));
            }
            params.push((cur, indexed));
        }
        Ok(params)
    }

    fn split_param(tokens: &[&Token]) -> (Option<String>, String) {
        let n = tokens.len();
        if n >= 2 {
            let last = tokens[n - 1];
            let prev = tokens[n - 2];
            let typeish_prev = prev.is_ident() || prev.is("]") || prev.is(")");
            if last.is_ident() && typeish_prev && last.text != "payable" && !is_elementary_type(&last.text) {
                let ty: Vec<Token> = tokens[..n - 1].iter().map(|t| (*t).clone()).collect();
                return (Some(last.text.clone()), render(&ty));
            }
        }
        let ty: Vec<Token> = tokens.iter().map(|t| (*t).clone()).collect();
        (None, render(&ty))
    }

    fn params(&mut self) -> Result<Vec<ParamDecl>, SyntaxError> {
        Ok(self
            .param_list()?
            .into_iter()
            .map(|(toks, _)| {
                let (name, ty) = Self::split_param(&toks);
                ParamDecl { name, ty }
            })
            .collect())
    }

    fn function(&mut self, owner: ContractId, mut kind: FunctionKind, contract_name: &str) -> Result<(), SyntaxError> {
        let start_tok = self.next()?;
        let start_line = start_tok.line;
        let name = match kind {
            FunctionKind::Function => {
                if self.at("(") {
                    kind = FunctionKind::Fallback;
                    "fallback".to_string()
                } else {
                    let n = self.ident()?.text.clone();
                    if n == contract_name {
                        kind = FunctionKind::Constructor;
                    }
                    n
                }
            }
            FunctionKind::Modifier => self.ident()?.text.clone(),
            _ => start_tok.text.clone(),
        };
        let params = if kind == FunctionKind::Modifier && !self.at("(") {
            Vec::new()
        } else {
            self.params()?
        };

        let mut visibility = None;
        let mut mutability = Mutability::NonPayable;
        let mut returns = Vec::new();
        let mut modifiers = Vec::new();
        let end_tok = loop {
            let t = self.peek().ok_or_else(|| SyntaxError::new(start_line, "unterminated function header"))?;
            if t.is("{") || t.is(";") {
                break t;
            }
            if !t.is_ident() {
                return Err(SyntaxError::new(t.line, format!("unexpected `{}` in function header", t.text)));
            }
            match t.text.as_str() {
                "public" => visibility = Some(Visibility::Public),
                "external" => visibility = Some(Visibility::External),
                "internal" => visibility = Some(Visibility::Internal),
                "private" => visibility = Some(Visibility::Private),
                "pure" => mutability = Mutability::Pure,
                "view" | "constant" => mutability = Mutability::View,
                "payable" => mutability = Mutability::Payable,
                "virtual" => {}
                "override" => {
                    self.pos += 1;
                    if self.at("(") {
                        self.skip_group()?;
                    }
                    continue;
                }
                "returns" => {
                    self.pos += 1;
                    returns = self.params()?;
                    continue;
                }
                _ => {
                    let line = t.line;
                    let mut m = t.text.clone();
                    self.pos += 1;
                    while self.at(".") {
                        self.pos += 1;
                        m.push('.');
                        m.push_str(&self.ident()?.text);
                    }
                    let arity = if self.at("(") {
                        let open = self.pos;
                        let close = self.skip_group()?;
                        count_args(&self.toks[open + 1..close])
                    } else {
                        0
                    };
                    modifiers.push(ModifierInvocation { name: m, arity, line });
                    continue;
                }
            }
            self.pos += 1;
        };

        let (body_span, has_body, calls, idents, mut locals) = if end_tok.is(";") {
            self.pos += 1;
            (Span::new(start_line, end_tok.line), false, Vec::new(), Vec::new(), BTreeSet::new())
        } else {
            let open = self.pos;
            let close = self.skip_group()?;
            let scan = self.scan_body(open + 1, close, &name);
            (
                Span::new(start_line, self.toks[close].line),
                true,
                scan.calls,
                scan.idents,
                scan.locals,
            )
        };
        for p in params.iter().chain(returns.iter()) {
            if let Some(n) = &p.name {
                locals.insert(n.clone());
            }
        }

        let default_visibility = match kind {
            FunctionKind::Fallback | FunctionKind::Receive => Visibility::External,
            FunctionKind::Modifier => Visibility::Internal,
            _ => Visibility::Public,
        };
        self.model.functions.push(FunctionDef {
            name,
            owner,
            kind,
            visibility: visibility.unwrap_or(default_visibility),
            params,
            returns,
            modifiers,
            body_span,
            leading_comment_span: None,
            state_mutability: mutability,
            has_body,
            calls,
            idents,
            locals,
        });
        Ok(())
    }

    fn event(&mut self, owner: ContractId) -> Result<(), SyntaxError> {
        let start = self.next()?.line;
        let name = self.ident()?.text.clone();
        let params = self
            .param_list()?
            .into_iter()
            .map(|(toks, indexed)| {
                let (name, ty) = Self::split_param(&toks);
                EventParamDecl { name, ty, indexed }
            })
            .collect();
        if self.at("anonymous") {
            self.pos += 1;
        }
        let end = self.expect(";")?.line;
        self.model.events.push(EventDef {
            name,
            owner,
            params,
            decl_line: start,
            span: Span::new(start, end),
        });
        Ok(())
    }

    fn state_variable(&mut self, owner: ContractId) -> Result<(), SyntaxError> {
        let begin = self.pos;
        let start_line = self.line();
        self.skip_statement()?;
        let end = self.pos - 1;
        let end_line = self.toks[end].line;
        let toks = &self.toks[begin..end];

        // depth-0 tokens before any initializer
        let mut lhs: Vec<usize> = Vec::new();
        let mut depth = 0;
        for (i, t) in toks.iter().enumerate() {
            if t.kind == Kind::Punct {
                match t.text.as_str() {
                    "(" | "[" | "{" => depth += 1,
                    ")" | "]" | "}" => depth -= 1,
                    "=" if depth == 0 => break,
                    _ => {}
                }
            }
            lhs.push(i);
        }
        let name_idx = lhs
            .iter()
            .rev()
            .copied()
            .find(|&i| {
                let t = &toks[i];
                t.is_ident() && !FIELD_ATTRIBUTES.contains(&t.text.as_str()) && depth_at(toks, i) == 0
            })
            .ok_or_else(|| SyntaxError::new(start_line, "expected a state variable declaration"))?;
        let mut ty_end = name_idx;
        let mut visibility = Visibility::Internal;
        let mut constant = false;
        for &i in &lhs[..name_idx] {
            let t = &toks[i];
            if depth_at(toks, i) != 0 || !t.is_ident() {
                continue;
            }
            if FIELD_ATTRIBUTES.contains(&t.text.as_str()) {
                ty_end = ty_end.min(i);
                match t.text.as_str() {
                    "public" => visibility = Visibility::Public,
                    "private" => visibility = Visibility::Private,
                    "internal" => visibility = Visibility::Internal,
                    "constant" | "immutable" => constant = true,
                    _ => {}
                }
            }
        }
        if ty_end == 0 {
            return Err(SyntaxError::new(start_line, "state variable without a type"));
        }
        let ty = render(&toks[..ty_end]);
        self.model.fields.push(FieldDef {
            name: toks[name_idx].text.clone(),
            ty,
            visibility,
            owner,
            decl_line: start_line,
            span: Span::new(start_line, end_line),
            constant,
        });
        Ok(())
    }

    fn scan_body(&mut self, from: usize, to: usize, fname: &str) -> BodyScan {
        let toks = self.toks;
        let mut scan = BodyScan::default();
        let mut i = from;
        while i < to {
            let t = &toks[i];
            if t.is_ident() && t.text == "assembly" {
                let line = t.line;
                let mut j = i + 1;
                while j < to && !toks[j].is("{") {
                    j += 1;
                }
                let close = if j < to { self.matching(j).unwrap_or(to) } else { to };
                self.model.warnings.push(ModelWarning::UnsupportedConstruct {
                    line,
                    what: format!("inline assembly in `{fname}`"),
                });
                i = close + 1;
                continue;
            }
            if !t.is_ident() {
                i += 1;
                continue;
            }
            let prev = if i > from { Some(&toks[i - 1]) } else { None };
            let prev_is_dot = prev.is_some_and(|p| p.is("."));
            let after_this = prev_is_dot && i >= from + 2 && toks[i - 2].is("this");

            if !prev_is_dot || after_this {
                scan.idents.push((t.text.clone(), t.line));
            }

            // local declarations: `T name =`, `T name;`, `(T a, T b) =`
            if let (Some(p), Some(n)) = (prev, toks.get(i + 1)) {
                let typeish = (p.is_ident() && !STATEMENT_KEYWORDS.contains(&p.text.as_str())) || p.is("]");
                if typeish && !prev_is_dot && (n.is("=") || n.is(";") || n.is(",") || n.is(")")) && i > from {
                    let pp_dot = i >= from + 2 && toks[i - 2].is(".");
                    if !pp_dot {
                        scan.locals.insert(t.text.clone());
                    }
                }
            }

            if let Some(call) = self.call_at(i, to, from) {
                scan.calls.push(call);
            }
            i += 1;
        }
        scan
    }

    fn call_at(&self, i: usize, to: usize, from: usize) -> Option<CallSite> {
        let toks = self.toks;
        let t = &toks[i];
        let mut open = i + 1;
        // call options: f{value: v}(...)
        if open < to && toks[open].is("{") && i > from && toks[i - 1].is(".") {
            open = self.matching(open).ok()? + 1;
        }
        if open >= to || !toks[open].is("(") {
            return None;
        }
        let close = self.matching(open).ok()?;
        let arity = count_args(&toks[open + 1..close]);
        let name = t.text.clone();
        let prev = if i > from { Some(&toks[i - 1]) } else { None };
        let target = match prev {
            Some(p) if p.is(".") => {
                if i < from + 2 {
                    return None;
                }
                let base = &toks[i - 2];
                if base.is("this") {
                    CallTarget::This(name)
                } else if base.is("super") {
                    CallTarget::Super(name)
                } else if base.is_ident() && !(i >= from + 3 && toks[i - 3].is(".")) {
                    CallTarget::Member(base.text.clone(), name)
                } else {
                    CallTarget::MemberExpr(name)
                }
            }
            Some(p) if p.is("emit") || p.is("new") || p.is("revert") => return None,
            _ => {
                if NOT_CALLABLE.contains(&name.as_str()) || is_elementary_type(&name) {
                    return None;
                }
                CallTarget::Plain(name)
            }
        };
        Some(CallSite {
            target,
            arity,
            line: t.line,
        })
    }
}

#[derive(Default)]
struct BodyScan {
    calls: Vec<CallSite>,
    idents: Vec<(String, u32)>,
    locals: BTreeSet<String>,
}

fn depth_at(toks: &[Token], idx: usize) -> i32 {
    let mut depth = 0;
    for t in &toks[..idx] {
        if t.kind == Kind::Punct {
            match t.text.as_str() {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => depth -= 1,
                _ => {}
            }
        }
    }
    depth
}

/// Number of top-level arguments between a call's parentheses. Named
/// arguments `f({a: 1, b: 2})` count their entries.
fn count_args(inner: &[Token]) -> usize {
    if inner.is_empty() {
        return 0;
    }
    if inner[0].is("{") && inner.last().is_some_and(|t| t.is("}")) {
        let entries = &inner[1..inner.len() - 1];
        return if entries.is_empty() { 0 } else { top_level_commas(entries) + 1 };
    }
    top_level_commas(inner) + 1
}

fn top_level_commas(toks: &[Token]) -> usize {
    let mut depth = 0;
    let mut n = 0;
    for t in toks {
        if t.kind != Kind::Punct {
            continue;
        }
        match t.text.as_str() {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth -= 1,
            "," if depth == 0 => n += 1,
            _ => {}
        }
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solidity::FunctionId;

    const SAMPLE: &str = r#"pragma solidity ^0.8.0;

/// Token storage.
contract A {
    uint256 public total;
    mapping(address => mapping(address => uint256)) private allowed;

    event Moved(address indexed from, uint256 amount);

    // leading
    // comment

    function a(uint256 x) public returns (bool ok) {
        uint256 y = x + total;
        b(y);
        return true;
    }

    function b(uint256 v) internal {
        total = v;
        emit Moved(msg.sender, v);
    }

    function c() external view returns (uint256) { return total; }
}
"#;

    #[test]
    fn parses_counts_and_spans() {
        let m = parse_contract(SAMPLE).unwrap();
        assert_eq!(m.pragma.as_deref(), Some("^0.8.0"));
        assert_eq!(m.contracts.len(), 1);
        assert_eq!(m.contracts[0].header_span, Span::new(4, 4));
        assert_eq!(m.contracts[0].span, Span::new(4, 25));
        assert_eq!(m.functions.len(), 3);
        assert_eq!(m.fields.len(), 2);
        assert_eq!(m.events.len(), 1);

        let a = &m.functions[0];
        assert_eq!(a.name, "a");
        assert_eq!(a.body_span, Span::new(13, 17));
        assert_eq!(a.leading_comment_span, Some(Span::new(10, 11)));
        assert_eq!(a.returns[0].name.as_deref(), Some("ok"));
        assert!(a.locals.contains("y"));
        assert_eq!(a.calls.len(), 1);

        assert_eq!(m.fields[1].ty, "mapping(address => mapping(address => uint256))");
        assert_eq!(m.fields[1].visibility, Visibility::Private);
        assert_eq!(m.fields[0].visibility, Visibility::Public);
        assert!(m.events[0].params[0].indexed);
        assert!(!m.events[0].params[1].indexed);

        let c = m.function(FunctionId(2));
        assert_eq!(c.body_span, Span::line(24));
        assert_eq!(c.visibility, Visibility::External);
        assert_eq!(c.state_mutability, Mutability::View);
        assert!(m.warnings.is_empty(), "{:?}", m.warnings);
    }

    #[test]
    fn empty_contract() {
        let m = parse_contract("contract A {}").unwrap();
        assert_eq!(m.contracts.len(), 1);
        assert!(m.functions.is_empty());
        assert!(m.fields.is_empty());
    }

    #[test]
    fn legacy_dialect() {
        let src = "pragma solidity ^0.4.24;\ncontract T {\n  uint public x;\n  function T() { x = 1; }\n  function () payable { }\n  function get() constant returns (uint) { return x; }\n}\n";
        let m = parse_contract(src).unwrap();
        let kinds: Vec<_> = m.functions.iter().map(|f| f.kind).collect();
        assert_eq!(kinds, [FunctionKind::Constructor, FunctionKind::Fallback, FunctionKind::Function]);
        assert_eq!(m.functions[2].visibility, Visibility::Public);
        assert_eq!(m.functions[2].state_mutability, Mutability::View);
    }

    #[test]
    fn inheritance_modifiers_and_assembly() {
        let src = r#"
abstract contract Base is Ctx, Other("x") {
    modifier onlyOwner { require(msg.sender == owner); _; }
    address owner;
}
contract D is Base {
    function f(address payable to, uint[] memory xs) public onlyOwner override(Base) returns (uint) {
        assembly { let x := 1 }
        return xs.length;
    }
}
"#;
        let m = parse_contract(src).unwrap();
        assert_eq!(m.contracts[0].kind, ContractKind::Abstract);
        assert_eq!(m.contracts[0].parents, ["Ctx", "Other"]);
        let f = m.functions.iter().find(|f| f.name == "f").unwrap();
        assert_eq!(f.modifiers[0].name, "onlyOwner");
        assert_eq!(f.params[0].ty, "address payable");
        assert_eq!(f.params[0].name.as_deref(), Some("to"));
        assert_eq!(f.params[1].ty, "uint[]");
        assert!(m
            .warnings
            .iter()
            .any(|w| matches!(w, ModelWarning::UnsupportedConstruct { line: 8, .. })));
    }

    #[test]
    fn syntax_errors_report_lines() {
        let e = parse_contract("contract A {\n function f() public {\n").unwrap_err();
        assert_eq!(e.line, 2);
        let e = parse_contract("contract A {\n }\n }").unwrap_err();
        assert_eq!(e.line, 3);
        assert!(parse_contract("contract {}").is_err());
    }

    #[test]
    fn call_targets() {
        let src = r#"
library SafeMath { function sub(uint a, uint b) internal pure returns (uint) { return a - b; } }
contract C {
    using SafeMath for uint;
    uint total;
    function f(uint v) public {
        total = total.sub(v);
        SafeMath.sub(v, 1);
        this.g();
        g();
        IERC(msg.sender).transfer(address(0), v);
        emit E(v);
    }
    function g() public {}
}
"#;
        let m = parse_contract(src).unwrap();
        let f = m.functions.iter().find(|f| f.name == "f").unwrap();
        let targets: Vec<_> = f.calls.iter().map(|c| (c.target.clone(), c.arity)).collect();
        assert_eq!(
            targets,
            [
                (CallTarget::Member("total".into(), "sub".into()), 1),
                (CallTarget::Member("SafeMath".into(), "sub".into()), 2),
                (CallTarget::This("g".into()), 0),
                (CallTarget::Plain("g".into()), 0),
                (CallTarget::Plain("IERC".into()), 1),
                (CallTarget::MemberExpr("transfer".into()), 2),
            ]
        );
    }
}
