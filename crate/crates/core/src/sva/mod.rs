//! Assertion batches: parsing, linting, merging and diffing.

mod lint;
mod merge;
mod parse;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use lint::{lint, LintFinding, LintOptions, Severity, LINT_KEYS};
pub use merge::{dedup, diff_batches, normalized_key, BatchDiff};
pub use parse::parse_batch;

/// Name prefixes accepted for generated assertions and assumptions.
pub const NAME_PREFIXES: [&str; 3] = ["as__", "asgpt__", "am__"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssertionKind {
    SameCycle,
    NextCycle,
    Immediate,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Directive {
    Assert,
    Assume,
    Cover,
    /// Any other keyword after the label, e.g. `always`.
    Other(String),
}

impl Directive {
    pub fn keyword(&self) -> &str {
        match self {
            Directive::Assert => "assert",
            Directive::Assume => "assume",
            Directive::Cover => "cover",
            Directive::Other(k) => k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Pre,
    Post,
    /// No implication in the expression.
    Whole,
}

/// One identifier occurrence inside an assertion expression.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalRef {
    pub name: String,
    /// Hierarchical prefix, e.g. `fifo` in `fifo.in_hsk`.
    pub prefix: Option<String>,
    pub side: Side,
    /// Inside `$past`, `$stable`, `$rose`, `$fell` or `$changed`.
    pub under_past: bool,
    /// Inside an index or range selection.
    pub in_index: bool,
    pub line: usize,
    pub col: usize,
}

impl SignalRef {
    pub fn prefixed(&self) -> bool {
        self.prefix.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopKind {
    GenerateFor,
    Foreach,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopWrapper {
    pub kind: LoopKind,
    pub genvar: String,
    pub bound: String,
    /// Source from `for`/`foreach` up to and including `begin`, without label.
    pub header: String,
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assertion {
    /// Unique within the batch (collisions get `_dupN`).
    pub name: String,
    /// Label as written, without any bracket suffix.
    pub declared_name: String,
    /// Bracket suffix written after the label, e.g. `[i]`.
    pub name_suffix: Option<String>,
    pub kind: AssertionKind,
    pub directive: Directive,
    /// Item source from the label to the closing `;`.
    pub raw: String,
    /// Item source after the label colon.
    pub body: String,
    /// Text inside `property ( ... )`, or inside the parentheses of an immediate assertion.
    pub expression: String,
    pub precondition: String,
    pub postcondition: String,
    pub signals: Vec<SignalRef>,
    pub loop_wrapper: Option<LoopWrapper>,
    pub leading_comment: Option<String>,
    pub line: usize,
    pub col: usize,
}

impl Assertion {
    /// `name: body` with the resolved name.
    pub fn item_text(&self) -> String {
        format!("{}: {}", self.name, self.body)
    }

    /// Distinct referenced signal names.
    pub fn signal_names(&self) -> BTreeSet<&str> {
        self.signals.iter().map(|s| s.name.as_str()).collect()
    }

    /// Source form: leading comment, loop wrapper, item.
    pub fn render(&self, label: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(c) = &self.leading_comment {
            out.push_str(c);
            out.push('\n');
        }
        match &self.loop_wrapper {
            Some(w) => {
                out.push_str(&w.header);
                if let Some(l) = label.or(w.label.as_deref()) {
                    out.push_str(&format!(": {l}"));
                }
                out.push_str(&format!("\n  {}\nend\n", self.item_text()));
            }
            None => {
                out.push_str(&self.item_text());
                out.push('\n');
            }
        }
        out
    }
}

/// A `property ... endproperty` declaration found in a completion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyDecl {
    pub name: String,
    pub text: String,
    pub line: usize,
}

/// Text the parser could not classify.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Residue {
    pub text: String,
    pub line: usize,
    pub comment_only: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AssertionBatch {
    pub id: usize,
    pub assertions: Vec<Assertion>,
    pub property_decls: Vec<PropertyDecl>,
    pub unparsed_residue: Vec<Residue>,
}

impl AssertionBatch {
    pub fn with_id(mut self, id: usize) -> Self {
        self.id = id;
        self
    }

    pub fn len(&self) -> usize {
        self.assertions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assertions.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Assertion> {
        self.assertions.iter().find(|a| a.name == name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.assertions.iter().map(|a| a.name.as_str()).collect()
    }

    /// Residue that is not just comments.
    pub fn code_residue(&self) -> impl Iterator<Item = &Residue> {
        self.unparsed_residue.iter().filter(|r| !r.comment_only)
    }

    /// All assertions rendered one after another, generate labels made unique.
    pub fn render(&self) -> String {
        let mut used = BTreeSet::new();
        let mut out = String::new();
        for (i, a) in self.assertions.iter().enumerate() {
            let label = a.loop_wrapper.as_ref().and_then(|w| w.label.clone()).map(|l| {
                let mut candidate = l.clone();
                let mut n = 1;
                while !used.insert(candidate.clone()) {
                    candidate = format!("{l}_dup{n}");
                    n += 1;
                }
                candidate
            });
            if i > 0 {
                out.push('\n');
            }
            out.push_str(&a.render(label.as_deref()));
        }
        out
    }
}

/// Whether `name` carries one of the accepted prefixes.
pub fn has_accepted_prefix(name: &str) -> bool {
    NAME_PREFIXES.iter().any(|p| name.starts_with(p) && name.len() > p.len())
}
