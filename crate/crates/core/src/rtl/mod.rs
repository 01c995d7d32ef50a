//! SystemVerilog frontend: module interface and declaration extraction,
//! comment stripping, signal classification, FSM detection and identifier
//! renaming.
//!
//! Only the module header and declaration statements are parsed; procedural
//! code is kept as text. That is all the downstream prompt, lint and
//! testbench stages need.

mod fsm;
pub mod keywords;
pub mod lexer;
mod parser;
mod rename;
mod strip;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fsm::detect_fsm;
pub use parser::{parse_module, parse_module_with};
pub use rename::rename_identifiers;
pub use strip::strip_comments;

pub const DEFAULT_REGISTER_SUFFIXES: [&str; 3] = ["_reg", "_r", "_q"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RtlError {
    #[error("no `module ... endmodule` region found")]
    NoModuleFound,
    #[error("expected exactly one module, found {count}")]
    MultipleModules { count: usize },
    #[error("unbalanced {what} at line {line}")]
    UnbalancedDelimiters { what: String, line: usize },
    #[error("unterminated block comment starting at {line}:{col}")]
    UnterminatedBlockComment { line: usize, col: usize },
    #[error("`include directive at line {line} is not supported; pass preprocessed source")]
    IncludeDirective { line: usize },
    #[error("syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("rename mapping collides on `{name}`")]
    MappingCollision { name: String },
    #[error("identifier `{name}` does not occur in the module")]
    UnknownIdentifier { name: String },
    #[error("`{name}` is not a valid identifier")]
    InvalidIdentifier { name: String },
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
}

/// An RTL source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    pub path: PathBuf,
    pub text: String,
    pub line_count: usize,
}

impl SourceFile {
    pub fn new(path: impl Into<PathBuf>, text: impl Into<String>) -> Self {
        let text = text.into();
        let line_count = text.lines().count();
        SourceFile { path: path.into(), text, line_count }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, RtlError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| RtlError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let text = String::from_utf8(bytes).map_err(|e| RtlError::Io {
            path: path.to_path_buf(),
            message: format!("not valid UTF-8: {e}"),
        })?;
        Ok(SourceFile::new(path, text))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Input,
    Output,
    Inout,
}

impl Direction {
    pub fn keyword(self) -> &'static str {
        match self {
            Direction::Input => "input",
            Direction::Output => "output",
            Direction::Inout => "inout",
        }
    }
}

/// Bit width of a port or signal: a resolved integer or the packed
/// dimension text when it depends on parameters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Width {
    Bits(u32),
    Symbolic(String),
}

impl Width {
    /// Builds a width from the packed dimensions as written, e.g.
    /// `["7:0"]` or `["SIZE-1:0"]`.
    pub(crate) fn from_packed(dims: &[String]) -> Width {
        match dims {
            [] => Width::Bits(1),
            [single] => {
                let bounds: Vec<_> = single.split(':').map(str::trim).collect();
                match bounds.as_slice() {
                    [hi, lo] => match (hi.parse::<i64>(), lo.parse::<i64>()) {
                        (Ok(h), Ok(l)) => Width::Bits(((h - l).unsigned_abs() + 1) as u32),
                        _ => Width::Symbolic(single.clone()),
                    },
                    _ => Width::Symbolic(single.clone()),
                }
            }
            many => Width::Symbolic(many.join("][")),
        }
    }

    /// Packed dimension text suitable for a declaration (`""` for one bit).
    pub fn declaration(&self) -> String {
        match self {
            Width::Bits(1) => String::new(),
            Width::Bits(n) => format!("[{}:0]", n - 1),
            Width::Symbolic(s) => format!("[{s}]"),
        }
    }
}

impl fmt::Display for Width {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Width::Bits(n) => write!(f, "{n}"),
            Width::Symbolic(s) => write!(f, "[{s}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Port {
    pub name: String,
    pub direction: Direction,
    pub width: Width,
    /// User-defined type name, when the port is not a plain vector.
    pub data_type: Option<String>,
    pub is_clock: bool,
    pub is_reset: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalKind {
    Register,
    Wire,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalDecl {
    pub name: String,
    pub width: Width,
    pub kind: SignalKind,
    /// Unpacked dimensions plus enclosing generate-loop dimensions.
    pub array_depth: u32,
    pub data_type: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub default: String,
    /// `localparam` (or a body `parameter`, which cannot be overridden either).
    pub local: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FsmInfo {
    pub state_signal: String,
    pub states: Vec<String>,
    pub transitions_detected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseOptions {
    pub register_suffixes: Vec<String>,
    /// Force this port to be the clock instead of name-based detection.
    pub clock: Option<String>,
    pub reset: Option<String>,
    pub reset_active_low: Option<bool>,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            register_suffixes: DEFAULT_REGISTER_SUFFIXES.iter().map(|s| s.to_string()).collect(),
            clock: None,
            reset: None,
            reset_active_low: None,
        }
    }
}

/// A parsed RTL module.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RtlModule {
    pub name: String,
    pub parameters: Vec<Parameter>,
    pub ports: Vec<Port>,
    pub internals: Vec<SignalDecl>,
    pub genvars: Vec<String>,
    pub enum_members: Vec<String>,
    pub typedefs: Vec<String>,
    /// Source text from `module` through `endmodule`.
    pub body_text: String,
    pub stripped_text: String,
    pub reset_active_low: bool,
    pub register_suffixes: Vec<String>,
}

impl RtlModule {
    pub fn port(&self, name: &str) -> Option<&Port> {
        self.ports.iter().find(|p| p.name == name)
    }

    pub fn internal(&self, name: &str) -> Option<&SignalDecl> {
        self.internals.iter().find(|s| s.name == name)
    }

    pub fn clock(&self) -> Option<&Port> {
        self.ports.iter().find(|p| p.is_clock)
    }

    pub fn reset(&self) -> Option<&Port> {
        self.ports.iter().find(|p| p.is_reset)
    }

    /// Parameters, localparams and enum members.
    pub fn is_constant(&self, name: &str) -> bool {
        self.parameters.iter().any(|p| p.name == name) || self.enum_members.iter().any(|m| m == name)
    }

    /// Classification of any port or internal signal by name.
    pub fn signal_kind(&self, name: &str) -> Option<SignalKind> {
        if let Some(s) = self.internal(name) {
            return Some(s.kind);
        }
        self.port(name)
            .map(|_| classify_signal(name, &self.register_suffixes))
    }

    /// Expression that is true while the design is *not* in reset.
    pub fn reset_inactive_expr(&self) -> Option<String> {
        self.reset().map(|r| {
            if self.reset_active_low {
                r.name.clone()
            } else {
                format!("!{}", r.name)
            }
        })
    }

    /// Expression that is true while reset is asserted (for `disable iff`).
    pub fn reset_active_expr(&self) -> Option<String> {
        self.reset().map(|r| {
            if self.reset_active_low {
                format!("!{}", r.name)
            } else {
                r.name.clone()
            }
        })
    }

    /// The module header (parameters and ports) re-rendered in ANSI style,
    /// followed by `endmodule`.
    pub fn interface_text(&self) -> String {
        let mut out = format!("module {}", self.name);
        let header_params: Vec<_> = self.parameters.iter().filter(|p| !p.local).collect();
        if !header_params.is_empty() {
            out.push_str(" #(\n");
            let items: Vec<_> = header_params
                .iter()
                .map(|p| format!("    parameter {} = {}", p.name, p.default))
                .collect();
            out.push_str(&items.join(",\n"));
            out.push_str("\n)");
        }
        out.push_str(" (\n");
        let items: Vec<_> = self.ports.iter().map(port_declaration).collect();
        out.push_str(&items.join(",\n"));
        out.push_str("\n);\nendmodule\n");
        out
    }

    /// Names of ports and internals mapped to their kind.
    pub fn signal_table(&self) -> BTreeMap<&str, SignalKind> {
        let mut table = BTreeMap::new();
        for p in &self.ports {
            table.insert(p.name.as_str(), classify_signal(&p.name, &self.register_suffixes));
        }
        for s in &self.internals {
            table.insert(s.name.as_str(), s.kind);
        }
        table
    }
}

/// `input logic [W-1:0] name` style declaration of a port.
pub fn port_declaration(p: &Port) -> String {
    let ty = p.data_type.clone().unwrap_or_else(|| "logic".to_string());
    let dims = p.width.declaration();
    if dims.is_empty() {
        format!("    {} {} {}", p.direction.keyword(), ty, p.name)
    } else {
        format!("    {} {} {} {}", p.direction.keyword(), ty, dims, p.name)
    }
}

/// Register iff `name` ends with one of `suffixes`.
pub fn classify_signal<S: AsRef<str>>(name: &str, suffixes: &[S]) -> SignalKind {
    if suffixes.iter().any(|s| name.ends_with(s.as_ref())) {
        SignalKind::Register
    } else {
        SignalKind::Wire
    }
}

/// Provider-agnostic token estimate: one token per four characters, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classify_examples() {
        let sfx = DEFAULT_REGISTER_SUFFIXES;
        assert_eq!(classify_signal("buffer_val_reg", &sfx), SignalKind::Register);
        assert_eq!(classify_signal("in_hsk", &sfx), SignalKind::Wire);
        assert_eq!(classify_signal("state_q", &sfx), SignalKind::Register);
        assert_eq!(classify_signal("state_d", &sfx), SignalKind::Wire);
        assert_eq!(classify_signal("count_reg", &["_ff"]), SignalKind::Wire);
    }

    #[test]
    fn token_estimate_formula() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("abcd"), 1);
        assert_eq!(estimate_tokens("abcde"), 2);
        assert_eq!(estimate_tokens(&"x".repeat(8192)), 2048);
        // characters, not bytes
        assert_eq!(estimate_tokens("ééééé"), 2);
    }

    #[test]
    fn width_from_packed_dims() {
        assert_eq!(Width::from_packed(&[]), Width::Bits(1));
        assert_eq!(Width::from_packed(&["7:0".into()]), Width::Bits(8));
        assert_eq!(Width::from_packed(&["0:3".into()]), Width::Bits(4));
        assert_eq!(
            Width::from_packed(&["SIZE-1:0".into()]),
            Width::Symbolic("SIZE-1:0".into())
        );
        assert_eq!(Width::Bits(8).declaration(), "[7:0]");
        assert_eq!(Width::Symbolic("N-1:0".into()).declaration(), "[N-1:0]");
    }

    #[test]
    fn source_file_counts_lines() {
        assert_eq!(SourceFile::new("a.sv", "a\nb\nc\n").line_count, 3);
        assert_eq!(SourceFile::new("a.sv", "").line_count, 0);
    }
}
