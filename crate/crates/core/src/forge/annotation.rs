//! Transaction annotations relating request and response interfaces.
//!
//! One annotation per line:
//!
//! ```text
//! transaction <name>: req.valid=<port> [req.ready=<port>] [req.data=<a>,<b>]
//!     resp.valid=<port> [resp.ready=<port>] [resp.data=<a>,<b>] [attrs=<a>,<b>]
//! ```
//!
//! `#` starts a comment. Lines not starting with `transaction` are returned
//! as skipped so that chatty completions still parse.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ForgeError;
use crate::rtl::RtlModule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    /// Request data is held while valid and not ready.
    StableData,
    /// Every accepted request is eventually answered.
    EventualResponse,
}

impl Attribute {
    pub fn as_str(self) -> &'static str {
        match self {
            Attribute::StableData => "stable_data",
            Attribute::EventualResponse => "eventual_response",
        }
    }
}

impl FromStr for Attribute {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "stable_data" => Ok(Attribute::StableData),
            "eventual_response" => Ok(Attribute::EventualResponse),
            _ => Err(format!("unknown attribute `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Interface {
    pub valid: String,
    pub ready: Option<String>,
    pub data: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionAnnotation {
    pub name: String,
    pub request: Interface,
    pub response: Interface,
    pub attributes: Vec<Attribute>,
}

impl TransactionAnnotation {
    pub fn has(&self, attr: Attribute) -> bool {
        self.attributes.contains(&attr)
    }
}

impl fmt::Display for TransactionAnnotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "transaction {}:", self.name)?;
        for (side, i) in [("req", &self.request), ("resp", &self.response)] {
            write!(f, " {side}.valid={}", i.valid)?;
            if let Some(r) = &i.ready {
                write!(f, " {side}.ready={r}")?;
            }
            if !i.data.is_empty() {
                write!(f, " {side}.data={}", i.data.join(","))?;
            }
        }
        if !self.attributes.is_empty() {
            let attrs: Vec<_> = self.attributes.iter().map(|a| a.as_str()).collect();
            write!(f, " attrs={}", attrs.join(","))?;
        }
        Ok(())
    }
}

/// Parsed annotations plus the non-annotation lines that were skipped.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnnotationSet {
    pub transactions: Vec<TransactionAnnotation>,
    /// `(line, text)` of lines that were neither comments nor annotations.
    pub skipped: Vec<(usize, String)>,
}

/// One annotation per line, in order.
pub fn render_annotations(list: &[TransactionAnnotation]) -> String {
    list.iter().map(|t| format!("{t}\n")).collect()
}

/// Parses annotation text and checks every named port against `module`.
pub fn parse_annotations(text: &str, module: &RtlModule) -> Result<AnnotationSet, ForgeError> {
    let mut set = AnnotationSet::default();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() || line.starts_with("```") {
            continue;
        }
        let Some(rest) = line.strip_prefix("transaction") else {
            set.skipped.push((line_no, line.to_string()));
            continue;
        };
        let t = parse_line(rest, line_no)?;
        for port in t.request_ports().chain(t.response_ports()) {
            if module.port(port).is_none() {
                return Err(ForgeError::UnknownPort { name: port.to_string(), line: line_no });
            }
        }
        if set.transactions.iter().any(|x| x.name == t.name) {
            return Err(malformed(line_no, &format!("transaction `{}` declared twice", t.name)));
        }
        set.transactions.push(t);
    }
    Ok(set)
}

impl TransactionAnnotation {
    fn request_ports(&self) -> impl Iterator<Item = &str> {
        side_ports(&self.request)
    }

    fn response_ports(&self) -> impl Iterator<Item = &str> {
        side_ports(&self.response)
    }
}

fn side_ports(i: &Interface) -> impl Iterator<Item = &str> {
    std::iter::once(i.valid.as_str()).chain(i.ready.as_deref()).chain(i.data.iter().map(String::as_str))
}

fn malformed(line: usize, message: &str) -> ForgeError {
    ForgeError::MalformedAnnotation { line, message: message.to_string() }
}

fn parse_line(rest: &str, line: usize) -> Result<TransactionAnnotation, ForgeError> {
    if !rest.starts_with(char::is_whitespace) {
        return Err(malformed(line, "expected `transaction <name>:`"));
    }
    let (name, fields) = rest.split_once(':').ok_or_else(|| malformed(line, "missing `:` after the name"))?;
    let name = name.trim();
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(malformed(line, &format!("bad transaction name `{name}`")));
    }
    let mut req = Interface::default();
    let mut resp = Interface::default();
    let mut attributes = Vec::new();
    for field in fields.split_whitespace() {
        let (key, value) = field.split_once('=').ok_or_else(|| malformed(line, &format!("expected key=value, found `{field}`")))?;
        if value.is_empty() {
            return Err(malformed(line, &format!("`{key}` has no value")));
        }
        let list = || value.split(',').map(str::to_string).collect::<Vec<_>>();
        match key {
            "req.valid" => req.valid = value.to_string(),
            "req.ready" => req.ready = Some(value.to_string()),
            "req.data" => req.data = list(),
            "resp.valid" => resp.valid = value.to_string(),
            "resp.ready" => resp.ready = Some(value.to_string()),
            "resp.data" => resp.data = list(),
            "attrs" => {
                for a in value.split(',') {
                    let attr = a.parse().map_err(|m: String| malformed(line, &m))?;
                    if !attributes.contains(&attr) {
                        attributes.push(attr);
                    }
                }
            }
            _ => return Err(malformed(line, &format!("unknown field `{key}`"))),
        }
    }
    if req.valid.is_empty() || resp.valid.is_empty() {
        return Err(malformed(line, "req.valid and resp.valid are required"));
    }
    Ok(TransactionAnnotation { name: name.to_string(), request: req, response: resp, attributes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rtl::{parse_module, SourceFile};

    fn module() -> RtlModule {
        let src = "module m(input clk, input rst_n, input a_val, output a_rdy, input [7:0] a_d, output b_val, input b_rdy, output [7:0] b_d);\nendmodule\n";
        parse_module(&SourceFile::new("m.sv", src)).unwrap()
    }

    #[test]
    fn parses_full_line() {
        let text = "Here you go:\n# comment\ntransaction t: req.valid=a_val req.ready=a_rdy req.data=a_d resp.valid=b_val resp.ready=b_rdy resp.data=b_d attrs=stable_data,eventual_response\n";
        let set = parse_annotations(text, &module()).unwrap();
        assert_eq!(set.skipped, [(1, "Here you go:".to_string())]);
        let t = &set.transactions[0];
        assert_eq!(t.request.ready.as_deref(), Some("a_rdy"));
        assert!(t.has(Attribute::EventualResponse) && t.has(Attribute::StableData));
        assert_eq!(render_annotations(&set.transactions), text.lines().nth(2).unwrap().to_string() + "\n");
    }

    #[test]
    fn errors() {
        let m = module();
        assert_eq!(
            parse_annotations("transaction t: req.valid=nope resp.valid=b_val", &m),
            Err(ForgeError::UnknownPort { name: "nope".into(), line: 1 })
        );
        assert!(matches!(
            parse_annotations("\ntransaction t: req.valid=a_val", &m),
            Err(ForgeError::MalformedAnnotation { line: 2, .. })
        ));
        assert!(matches!(
            parse_annotations("transaction t req.valid=a_val resp.valid=b_val", &m),
            Err(ForgeError::MalformedAnnotation { .. })
        ));
        assert!(matches!(
            parse_annotations("transaction t: req.valid=a_val resp.valid=b_val attrs=fast", &m),
            Err(ForgeError::MalformedAnnotation { .. })
        ));
    }
}
