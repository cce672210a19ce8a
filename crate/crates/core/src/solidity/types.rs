//! Signature-level views of declarations, used to compare contract code
//! against an ERC interface.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::lexer::{lex, render, Kind, Token};
use super::{parse_contract, EventParamDecl, FieldDef, FunctionDef, ParamDecl, SyntaxError, Visibility};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSignature {
    pub name: String,
    pub params: Vec<ParamDecl>,
    pub returns: Vec<ParamDecl>,
}

impl FunctionSignature {
    pub fn from_def(def: &FunctionDef) -> Self {
        FunctionSignature {
            name: def.name.clone(),
            params: def.params.clone(),
            returns: def.returns.clone(),
        }
    }

    /// `name(t1,t2)` with normalized types.
    pub fn canonical(&self) -> String {
        canonical(&self.name, self.params.iter().map(|p| p.ty.as_str()))
    }

    /// Normalized return types joined by commas.
    pub fn canonical_returns(&self) -> String {
        self.returns
            .iter()
            .map(|p| normalize_type(&p.ty))
            .collect::<Vec<_>>()
            .join(",")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventSignature {
    pub name: String,
    pub params: Vec<EventParamDecl>,
}

impl EventSignature {
    pub fn canonical(&self) -> String {
        canonical(&self.name, self.params.iter().map(|p| p.ty.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Declaration {
    Function(FunctionSignature),
    Event(EventSignature),
}

impl Declaration {
    pub fn name(&self) -> &str {
        match self {
            Declaration::Function(f) => &f.name,
            Declaration::Event(e) => &e.name,
        }
    }
}

fn canonical<'a>(name: &str, types: impl Iterator<Item = &'a str>) -> String {
    let types: Vec<String> = types.map(normalize_type).collect();
    format!("{name}({})", types.join(","))
}

/// Canonical spelling of a type: integer and byte aliases expanded, data
/// locations and `payable` dropped.
pub fn normalize_type(ty: &str) -> String {
    let Ok(lexed) = lex(ty) else {
        return ty.trim().to_string();
    };
    let tokens: Vec<Token> = lexed
        .tokens
        .into_iter()
        .filter(|t| !(t.is_ident() && matches!(t.text.as_str(), "memory" | "storage" | "calldata" | "payable")))
        .map(|mut t| {
            if t.kind == Kind::Ident {
                match t.text.as_str() {
                    "uint" => t.text = "uint256".into(),
                    "int" => t.text = "int256".into(),
                    "byte" => t.text = "bytes1".into(),
                    _ => {}
                }
            }
            t
        })
        .collect();
    render(&tokens)
}

/// Parses a single function or event declaration such as
/// `function transfer(address _to, uint256 _value) public returns (bool)`.
pub fn parse_declaration(text: &str) -> Result<Declaration, SyntaxError> {
    let body = text.trim().trim_end_matches(';').trim();
    if body.is_empty() {
        return Err(SyntaxError::new(1, "empty declaration"));
    }
    if body.contains('{') || body.contains('}') {
        return Err(SyntaxError::new(1, "declaration must not have a body"));
    }
    let wrapped = format!("interface __Decl {{\n{body};\n}}");
    let model = parse_contract(&wrapped).map_err(|e| SyntaxError::new(e.line.saturating_sub(1).max(1), e.message))?;
    match (model.functions.as_slice(), model.events.as_slice(), model.fields.is_empty()) {
        ([f], [], true) if !f.is_modifier() => Ok(Declaration::Function(FunctionSignature::from_def(f))),
        ([], [e], true) => Ok(Declaration::Event(EventSignature {
            name: e.name.clone(),
            params: e.params.clone(),
        })),
        _ => Err(SyntaxError::new(1, "expected exactly one function or event declaration")),
    }
}

/// Signature of the getter the compiler generates for a public state
/// variable. Mapping keys and array indexes become parameters.
pub fn getter_signature(field: &FieldDef) -> Option<FunctionSignature> {
    if field.visibility != Visibility::Public {
        return None;
    }
    let lexed = lex(&field.ty).ok()?;
    let mut toks: &[Token] = &lexed.tokens;
    let mut params = Vec::new();
    loop {
        if toks.first().is_some_and(|t| t.is("mapping")) && toks.get(1).is_some_and(|t| t.is("(")) {
            // mapping ( K => V )
            let arrow = toks.iter().position(|t| t.is("=>"))?;
            let key = &toks[2..arrow];
            params.push(ParamDecl {
                name: None,
                ty: render(key),
            });
            if !toks.last()?.is(")") {
                return None;
            }
            toks = &toks[arrow + 1..toks.len() - 1];
        } else if toks.len() >= 2 && toks[toks.len() - 1].is("]") {
            // T[] or T[N]: strip the outermost dimension
            let open = toks.iter().rposition(|t| t.is("["))?;
            params.push(ParamDecl {
                name: None,
                ty: "uint256".into(),
            });
            toks = &toks[..open];
        } else {
            break;
        }
    }
    if toks.is_empty() {
        return None;
    }
    Some(FunctionSignature {
        name: field.name.clone(),
        params,
        returns: alloc::vec![ParamDecl {
            name: None,
            ty: render(toks),
        }],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solidity::{ContractId, Span};

    #[test]
    fn normalization() {
        assert_eq!(normalize_type("uint"), "uint256");
        assert_eq!(normalize_type("uint[] memory"), "uint256[]");
        assert_eq!(normalize_type("address payable"), "address");
        assert_eq!(normalize_type("mapping(address => uint)"), "mapping(address => uint256)");
        assert_eq!(normalize_type("byte"), "bytes1");
        assert_eq!(normalize_type("bytes calldata"), "bytes");
        assert_eq!(normalize_type("uint8"), "uint8");
    }

    #[test]
    fn parse_function_declaration() {
        let d = parse_declaration("function transferFrom(address _from, address _to, uint256 _value) public returns (bool success)")
            .unwrap();
        let Declaration::Function(f) = d else { panic!() };
        assert_eq!(f.name, "transferFrom");
        assert_eq!(f.canonical(), "transferFrom(address,address,uint256)");
        assert_eq!(f.canonical_returns(), "bool");
        assert_eq!(f.params[0].name.as_deref(), Some("_from"));
    }

    #[test]
    fn parse_event_declaration() {
        let d = parse_declaration("event Transfer(address indexed _from, address indexed _to, uint256 _value);").unwrap();
        let Declaration::Event(e) = d else { panic!() };
        assert_eq!(e.canonical(), "Transfer(address,address,uint256)");
        assert_eq!(e.params.iter().filter(|p| p.indexed).count(), 2);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_declaration("function f(").is_err());
        assert!(parse_declaration("").is_err());
        assert!(parse_declaration("uint x").is_err());
        assert!(parse_declaration("function f() {}").is_err());
    }

    fn field(ty: &str, vis: Visibility) -> FieldDef {
        FieldDef {
            name: "x".into(),
            ty: ty.into(),
            visibility: vis,
            owner: ContractId(0),
            decl_line: 1,
            span: Span::line(1),
            constant: false,
        }
    }

    #[test]
    fn getters() {
        let g = getter_signature(&field("uint256", Visibility::Public)).unwrap();
        assert_eq!(g.canonical(), "x()");
        assert_eq!(g.canonical_returns(), "uint256");

        let g = getter_signature(&field("mapping(address => mapping(address => uint))", Visibility::Public)).unwrap();
        assert_eq!(g.canonical(), "x(address,address)");
        assert_eq!(g.canonical_returns(), "uint256");

        let g = getter_signature(&field("address[]", Visibility::Public)).unwrap();
        assert_eq!(g.canonical(), "x(uint256)");
        assert_eq!(g.canonical_returns(), "address");

        assert!(getter_signature(&field("uint256", Visibility::Internal)).is_none());
    }
}
