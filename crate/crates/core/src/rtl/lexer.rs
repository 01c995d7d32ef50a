//! A small SystemVerilog lexer.
//!
//! The lexer keeps every byte of the input: whitespace and comments are
//! emitted as trivia tokens so callers can strip, rename or re-emit text
//! without losing layout.

use std::fmt;

/// Kind of a lexed token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Ident,
    /// `$past`, `$countones`, ...
    SystemIdent,
    Number,
    String,
    /// `` `include``, `` `define``, ...
    Directive,
    Symbol,
    LineComment,
    BlockComment,
    Whitespace,
}

impl TokenKind {
    pub fn is_trivia(self) -> bool {
        matches!(
            self,
            TokenKind::Whitespace | TokenKind::LineComment | TokenKind::BlockComment
        )
    }

    pub fn is_comment(self) -> bool {
        matches!(self, TokenKind::LineComment | TokenKind::BlockComment)
    }
}

/// A token with its byte span and 1-based start position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub start: usize,
    pub end: usize,
    pub line: usize,
    pub col: usize,
}

impl Token {
    pub fn text<'a>(&self, src: &'a str) -> &'a str {
        &src[self.start..self.end]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LexError {
    UnterminatedBlockComment { line: usize, col: usize },
    UnterminatedString { line: usize, col: usize },
}

impl fmt::Display for LexError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LexError::UnterminatedBlockComment { line, col } => {
                write!(f, "unterminated block comment starting at {line}:{col}")
            }
            LexError::UnterminatedString { line, col } => {
                write!(f, "unterminated string literal starting at {line}:{col}")
            }
        }
    }
}

impl std::error::Error for LexError {}

// Longest first; the scanner takes the first prefix that matches.
const OPERATORS: &[&str] = &[
    "<<<=", ">>>=", "|->", "|=>", "===", "!==", "==?", "!=?", "<<<", ">>>", "<<=", ">>=", "#-#",
    "#=#", "<->", "##", "==", "!=", "<=", ">=", "&&", "||", "**", "<<", ">>", "->", "::", "+:",
    "-:", "~&", "~|", "~^", "^~", "++", "--", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=",
    ".*", "(*", "*)",
];

/// Lexes `src`, failing on unterminated block comments or strings.
pub fn lex(src: &str) -> Result<Vec<Token>, LexError> {
    let (tokens, err) = scan(src);
    match err {
        Some(e) => Err(e),
        None => Ok(tokens),
    }
}

/// Lexes `src` without failing: an unterminated comment or string extends to
/// the end of input.
pub fn lex_lenient(src: &str) -> Vec<Token> {
    scan(src).0
}

/// Non-trivia tokens only.
pub fn significant(tokens: &[Token]) -> Vec<Token> {
    tokens.iter().copied().filter(|t| !t.kind.is_trivia()).collect()
}

fn scan(src: &str) -> (Vec<Token>, Option<LexError>) {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut error = None;
    let mut pos = 0;
    let mut line = 1;
    let mut col = 1;

    while pos < bytes.len() {
        let start = pos;
        let (kind, end) = match bytes[pos] {
            b' ' | b'\t' | b'\r' | b'\n' | 0x0b | 0x0c => {
                let mut p = pos;
                while p < bytes.len() && matches!(bytes[p], b' ' | b'\t' | b'\r' | b'\n' | 0x0b | 0x0c) {
                    p += 1;
                }
                (TokenKind::Whitespace, p)
            }
            b'/' if bytes.get(pos + 1) == Some(&b'/') => {
                let p = src[pos..].find('\n').map_or(bytes.len(), |i| pos + i);
                (TokenKind::LineComment, p)
            }
            b'/' if bytes.get(pos + 1) == Some(&b'*') => match src[pos + 2..].find("*/") {
                Some(i) => (TokenKind::BlockComment, pos + 2 + i + 2),
                None => {
                    error.get_or_insert(LexError::UnterminatedBlockComment { line, col });
                    (TokenKind::BlockComment, bytes.len())
                }
            },
            b'"' => {
                let mut p = pos + 1;
                let mut closed = false;
                while p < bytes.len() {
                    match bytes[p] {
                        b'\\' => p += 2,
                        b'"' => {
                            p += 1;
                            closed = true;
                            break;
                        }
                        b'\n' => break,
                        _ => p += 1,
                    }
                }
                if !closed {
                    error.get_or_insert(LexError::UnterminatedString { line, col });
                }
                (TokenKind::String, p.min(bytes.len()))
            }
            b'`' => {
                let p = scan_word(bytes, pos + 1);
                (TokenKind::Directive, p.max(pos + 1))
            }
            b'$' if bytes.get(pos + 1).is_some_and(|b| is_ident_start(*b)) => {
                (TokenKind::SystemIdent, scan_word(bytes, pos + 1))
            }
            b'\\' => {
                let mut p = pos + 1;
                while p < bytes.len() && !bytes[p].is_ascii_whitespace() {
                    p += 1;
                }
                (TokenKind::Ident, p)
            }
            b if is_ident_start(b) => (TokenKind::Ident, scan_word(bytes, pos)),
            b if b.is_ascii_digit() => (TokenKind::Number, scan_number(bytes, pos)),
            b'\'' if bytes.get(pos + 1).is_some_and(|b| is_base_char(*b) || b"01xXzZ".contains(b)) => {
                (TokenKind::Number, scan_number(bytes, pos))
            }
            _ => {
                let rest = &src[pos..];
                let len = OPERATORS
                    .iter()
                    .find(|op| rest.starts_with(**op))
                    .map_or_else(|| rest.chars().next().map_or(1, char::len_utf8), |op| op.len());
                (TokenKind::Symbol, pos + len)
            }
        };
        tokens.push(Token { kind, start, end, line, col });
        for ch in src[start..end].chars() {
            if ch == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
        }
        pos = end;
    }
    (tokens, error)
}

fn is_ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_'
}

fn is_ident_char(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'$'
}

fn is_base_char(b: u8) -> bool {
    matches!(b, b'b' | b'B' | b'o' | b'O' | b'd' | b'D' | b'h' | b'H' | b's' | b'S')
}

fn scan_word(bytes: &[u8], mut p: usize) -> usize {
    while p < bytes.len() && is_ident_char(bytes[p]) {
        p += 1;
    }
    p
}

fn scan_number(bytes: &[u8], mut p: usize) -> usize {
    while p < bytes.len() && (bytes[p].is_ascii_digit() || bytes[p] == b'_') {
        p += 1;
    }
    // real: 1.5, 2e3
    if p + 1 < bytes.len() && bytes[p] == b'.' && bytes[p + 1].is_ascii_digit() {
        p += 1;
        while p < bytes.len() && (bytes[p].is_ascii_digit() || bytes[p] == b'_') {
            p += 1;
        }
    }
    if p < bytes.len() && bytes[p] == b'\'' {
        let mut q = p + 1;
        if q < bytes.len() && matches!(bytes[q], b's' | b'S') {
            q += 1;
        }
        if q < bytes.len() && is_base_char(bytes[q]) && !matches!(bytes[q], b's' | b'S') {
            q += 1;
            while q < bytes.len() && (bytes[q].is_ascii_hexdigit() || b"xXzZ?_".contains(&bytes[q])) {
                q += 1;
            }
            return q;
        }
        if q < bytes.len() && b"01xXzZ".contains(&bytes[q]) && q == p + 1 {
            return q + 1;
        }
    }
    p
}
