//! Line-tracking tokenizer. Comments are kept out of the token stream and
//! returned separately so slicing can attach them to definitions.

use alloc::string::String;
use alloc::vec::Vec;

use super::SyntaxError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Kind {
    Ident,
    Number,
    Str,
    Punct,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub kind: Kind,
    pub text: String,
    pub line: u32,
    /// Byte offset into the source.
    pub start: usize,
}

impl Token {
    pub fn is(&self, s: &str) -> bool {
        self.text == s && self.kind != Kind::Str
    }

    pub fn is_ident(&self) -> bool {
        self.kind == Kind::Ident
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Comment {
    pub start_line: u32,
    pub end_line: u32,
}

pub(crate) struct Lexed {
    pub tokens: Vec<Token>,
    pub comments: Vec<Comment>,
}

const PUNCT: &[&str] = &[
    ">>>=", "<<=", ">>=", ">>>", "**=", "=>", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=", "*=",
    "/=", "%=", "|=", "&=", "^=", "<<", ">>", "**", "->", ":=", "(", ")", "{", "}", "[", "]", ";", ",", ".",
    "=", "<", ">", "+", "-", "*", "/", "%", "!", "~", "?", ":", "&", "|", "^",
];

pub(crate) fn lex(src: &str) -> Result<Lexed, SyntaxError> {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut comments = Vec::new();
    let mut i = 0;
    let mut line: u32 = 1;

    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b'\n' => {
                line += 1;
                i += 1;
            }
            b' ' | b'\t' | b'\r' | 0x0c => i += 1,
            b'/' if bytes.get(i + 1) == Some(&b'/') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                comments.push(Comment {
                    start_line: line,
                    end_line: line,
                });
            }
            b'/' if bytes.get(i + 1) == Some(&b'*') => {
                let start_line = line;
                i += 2;
                loop {
                    if i + 1 >= bytes.len() {
                        return Err(SyntaxError::new(start_line, "unterminated block comment"));
                    }
                    if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                        i += 2;
                        break;
                    }
                    if bytes[i] == b'\n' {
                        line += 1;
                    }
                    i += 1;
                }
                comments.push(Comment {
                    start_line,
                    end_line: line,
                });
            }
            b'"' | b'\'' => {
                let start = i;
                let start_line = line;
                i += 1;
                loop {
                    match bytes.get(i) {
                        None | Some(b'\n') => {
                            return Err(SyntaxError::new(start_line, "unterminated string literal"))
                        }
                        Some(b'\\') => i += 2,
                        Some(&q) if q == c => {
                            i += 1;
                            break;
                        }
                        Some(_) => i += 1,
                    }
                }
                tokens.push(Token {
                    kind: Kind::Str,
                    text: String::from(&src[start..i]),
                    line: start_line,
                    start,
                });
            }
            b'0'..=b'9' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'.') {
                    i += 1;
                }
                tokens.push(Token {
                    kind: Kind::Number,
                    text: String::from(&src[start..i]),
                    line,
                    start,
                });
            }
            c if c.is_ascii_alphabetic() || c == b'_' || c == b'$' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'$') {
                    i += 1;
                }
                tokens.push(Token {
                    kind: Kind::Ident,
                    text: String::from(&src[start..i]),
                    line,
                    start,
                });
            }
            _ => {
                let rest = &src[i..];
                match PUNCT.iter().find(|p| rest.starts_with(**p)) {
                    Some(p) => {
                        tokens.push(Token {
                            kind: Kind::Punct,
                            text: String::from(*p),
                            line,
                            start: i,
                        });
                        i += p.len();
                    }
                    None => {
                        let ch = rest.chars().next().unwrap_or('?');
                        return Err(SyntaxError::new(line, alloc::format!("unexpected character `{ch}`")));
                    }
                }
            }
        }
    }
    Ok(Lexed { tokens, comments })
}

/// Joins tokens into compact type text: `mapping(address => uint256)`.
pub(crate) fn render(tokens: &[Token]) -> String {
    let mut out = String::new();
    let mut prev_word = false;
    for t in tokens {
        let word = matches!(t.kind, Kind::Ident | Kind::Number | Kind::Str);
        if t.is("=>") {
            out.push_str(" => ");
            prev_word = false;
            continue;
        }
        if word && prev_word {
            out.push(' ');
        }
        out.push_str(&t.text);
        prev_word = word;
    }
    out
}
