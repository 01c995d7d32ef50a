use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rtl::lexer::{lex_lenient, significant, TokenKind};
use crate::rtl::{classify_signal, Direction, RtlModule, SignalKind, DEFAULT_REGISTER_SUFFIXES};
use crate::rules::{Category, RuleSet};

use super::{has_accepted_prefix, Assertion, AssertionBatch, AssertionKind, Directive, LoopKind, Side, SignalRef};

/// Every check the linter implements.
pub const LINT_KEYS: [&str; 14] = [
    "unprefixed_internal",
    "unknown_identifier",
    "no_foreach",
    "no_property_decl",
    "no_clock_in_expr",
    "bad_name_suffix",
    "bad_name_prefix",
    "duplicate_name",
    "wrong_assert_keyword",
    "zero_width_constant",
    "past_in_precondition",
    "past_in_same_cycle_post",
    "stale_read_in_next_cycle",
    "reduction_advisory",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LintFinding {
    pub lint_key: String,
    pub category: Category,
    pub severity: Severity,
    pub message: String,
    pub assertion: String,
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for LintFinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}: {} [{}/{}] {}: {}",
            self.line, self.col, self.severity, self.category, self.lint_key, self.assertion, self.message
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LintOptions {
    /// Enables the reduction-operator advisory.
    pub reduction_advisory: bool,
    /// Names already used by earlier batches.
    pub prior_names: Vec<String>,
}

fn severity_of(key: &str) -> Severity {
    match key {
        "stale_read_in_next_cycle" | "reduction_advisory" | "bad_name_prefix" => Severity::Warning,
        _ => Severity::Error,
    }
}

struct Linter<'a> {
    rs: &'a RuleSet,
    module: Option<&'a RtlModule>,
    opts: &'a LintOptions,
    out: Vec<LintFinding>,
    seen: HashSet<(String, String, String)>,
    property_names: HashSet<String>,
}

impl Linter<'_> {
    fn enabled(&self, key: &str) -> bool {
        if key == "reduction_advisory" && !self.opts.reduction_advisory {
            return false;
        }
        self.rs.backing_rule(key).is_some()
    }

    fn emit(&mut self, key: &str, assertion: &str, (line, col): (usize, usize), subject: &str, message: String) {
        if !self.enabled(key) {
            return;
        }
        if !self.seen.insert((key.to_string(), assertion.to_string(), subject.to_string())) {
            return;
        }
        let category = self.rs.backing_rule(key).expect("enabled implies backed").category;
        self.out.push(LintFinding {
            lint_key: key.to_string(),
            category,
            severity: severity_of(key),
            message,
            assertion: assertion.to_string(),
            line,
            col,
        });
    }

    fn kind_of(&self, name: &str) -> SignalKind {
        match self.module {
            Some(m) => m.signal_kind(name).unwrap_or(SignalKind::Wire),
            None => classify_signal(name, &DEFAULT_REGISTER_SUFFIXES),
        }
    }

    fn assertion(&mut self, a: &Assertion, dup: bool) {
        let at = (a.line, a.col);
        let name = a.declared_name.as_str();
        if a.name_suffix.is_some() {
            self.emit("bad_name_suffix", name, at, "", format!("assertion name `{}{}` must not end with brackets", name, a.name_suffix.as_deref().unwrap_or("")));
        }
        if !has_accepted_prefix(name) {
            self.emit("bad_name_prefix", name, at, "", format!("assertion name `{name}` should start with as__"));
        }
        if dup {
            self.emit("duplicate_name", name, at, "", format!("assertion name `{name}` is already used"));
        }
        match (&a.directive, a.kind) {
            (Directive::Other(k), _) => {
                self.emit("wrong_assert_keyword", name, at, "", format!("`{k}` used where `assert property` is expected"))
            }
            (Directive::Cover, _) => {
                self.emit("wrong_assert_keyword", name, at, "", "`cover` used where `assert property` is expected".into())
            }
            (_, AssertionKind::Immediate) => self.emit(
                "wrong_assert_keyword",
                name,
                at,
                "",
                "immediate assertion used where `assert property` is expected".into(),
            ),
            _ => {}
        }
        let foreach_wrapper = a.loop_wrapper.as_ref().is_some_and(|w| w.kind == LoopKind::Foreach);
        if foreach_wrapper || has_token(&a.raw, "foreach") {
            self.emit("no_foreach", name, at, "", "foreach loop around an assertion; use generate for".into());
        }
        let expr = significant(&lex_lenient(&a.expression));
        let etext = |i: usize| expr.get(i).map_or("", |t| t.text(&a.expression));
        if (0..expr.len()).any(|i| etext(i) == "@") {
            self.emit("no_clock_in_expr", name, at, "", "clocking event inside the assertion expression".into());
        }
        for t in expr.iter().filter(|t| t.kind == TokenKind::Number) {
            let s = t.text(&a.expression);
            if let Some((size, _)) = s.split_once('\'') {
                let digits: String = size.chars().filter(|c| *c != '_').collect();
                if !digits.is_empty() && digits.chars().all(|c| c == '0') {
                    self.emit("zero_width_constant", name, at, s, format!("constant `{s}` has zero width"));
                }
            }
        }
        for i in 0..expr.len() {
            let next = if etext(i + 1) == "(" { etext(i + 2) } else { etext(i + 1) };
            if etext(i) == "!" && matches!(next, "&" | "|" | "~&" | "~|") {
                self.emit("reduction_advisory", name, at, &i.to_string(), format!("`!{next}` reduction: check the intended polarity"));
            }
        }
        if has_token(&a.precondition, "$past") {
            self.emit("past_in_precondition", name, at, "", "$past used in the precondition".into());
        }
        if a.kind == AssertionKind::SameCycle && has_token(&a.postcondition, "$past") {
            self.emit("past_in_same_cycle_post", name, at, "", "$past used in the postcondition of a same-cycle assertion".into());
        }
        let genvar = a.loop_wrapper.as_ref().map(|w| w.genvar.as_str());
        for r in &a.signals {
            if genvar == Some(r.name.as_str())
                || self.property_names.contains(&r.name)
                || self.module.is_some_and(|m| m.is_constant(&r.name) || m.genvars.contains(&r.name)) {
                continue;
            }
            self.reference(a, r);
        }
    }

    fn reference(&mut self, a: &Assertion, r: &SignalRef) {
        let name = a.declared_name.as_str();
        let at = (r.line, r.col);
        if let Some(m) = self.module {
            if let Some(p) = r.prefix.as_deref().filter(|p| *p != m.name) {
                self.emit("unknown_identifier", name, at, p, format!("`{p}` is not the module name `{}`", m.name));
                return;
            }
            let is_port = m.port(&r.name).is_some();
            let internal = m.internal(&r.name);
            if !is_port && internal.is_none() {
                self.emit(
                    "unknown_identifier",
                    name,
                    at,
                    &r.name,
                    format!("`{}` is not a port, internal signal or parameter of `{}`", r.name, m.name),
                );
                return;
            }
            if internal.is_some() && !r.prefixed() {
                self.emit(
                    "unprefixed_internal",
                    name,
                    at,
                    &r.name,
                    format!("internal signal `{}` needs the module prefix: {}.{}", r.name, m.name, r.name),
                );
            }
        }
        if a.kind != AssertionKind::NextCycle || r.side != Side::Post || r.under_past {
            return;
        }
        let register = self.kind_of(&r.name) == SignalKind::Register;
        let wire_or_input = match self.module {
            Some(m) => {
                m.internal(&r.name).is_some_and(|s| s.kind == SignalKind::Wire)
                    || m.port(&r.name).is_some_and(|p| p.direction == Direction::Input && !p.is_clock && !p.is_reset)
            }
            None => false,
        };
        if r.in_index && register {
            self.emit(
                "stale_read_in_next_cycle",
                name,
                at,
                &r.name,
                format!("index `{}` is a register read after the update; use $past({}) for the value at the precondition", r.name, r.name),
            );
        } else if wire_or_input {
            self.emit(
                "stale_read_in_next_cycle",
                name,
                at,
                &r.name,
                format!("`{}` changes in the same cycle; use $past({}) in a next-cycle postcondition", r.name, r.name),
            );
        }
    }
}

fn has_token(text: &str, word: &str) -> bool {
    lex_lenient(text).iter().any(|t| !t.kind.is_trivia() && t.text(text) == word)
}

/// Runs every check backed by a lintable rule of `rs`. Findings are ordered
/// by position, then key.
pub fn lint(batch: &AssertionBatch, module: Option<&RtlModule>, rs: &RuleSet, opts: &LintOptions) -> Vec<LintFinding> {
    let property_names = batch.property_decls.iter().map(|p| p.name.clone()).collect();
    let mut l = Linter { rs, module, opts, out: Vec::new(), seen: HashSet::new(), property_names };
    for p in &batch.property_decls {
        let label = if p.name.is_empty() { "property" } else { p.name.as_str() };
        l.emit("no_property_decl", label, (p.line, 1), &p.line.to_string(), "property declaration; declare assertions directly".into());
    }
    let mut names: HashSet<&str> = opts.prior_names.iter().map(String::as_str).collect();
    for a in &batch.assertions {
        let dup = !names.insert(a.declared_name.as_str());
        l.assertion(a, dup);
    }
    l.out.sort_by(|a, b| (a.line, a.col, &a.lint_key).cmp(&(b.line, b.col, &b.lint_key)));
    l.out
}
