//! Prompt composition under a token budget.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{parse_kv, ConfigError};
use crate::rtl::{estimate_tokens, parse_module, RtlModule, SourceFile};
use crate::rules::{render, RuleSet};

const BUILTIN_PREAMBLE: &str = include_str!("../../../rules/preamble.conf");

pub const GUIDANCE: &str = "break down the RTL into smaller modules";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PromptKind {
    SvaGen,
    AnnotationGen,
    RtlGen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub context_limit: usize,
    pub output_reserve: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { context_limit: 8192, output_reserve: 2048 }
    }
}

impl Budget {
    /// Tokens left for the prompt itself.
    pub fn available(&self) -> usize {
        self.context_limit.saturating_sub(self.output_reserve)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub kind: PromptKind,
    pub preamble: String,
    pub rules_text: String,
    pub payload: String,
    pub appended_sva: Option<String>,
    pub token_estimate: usize,
    pub stripped: bool,
}

impl PromptBundle {
    fn new(
        kind: PromptKind,
        preamble: String,
        rules_text: String,
        payload: String,
        appended_sva: Option<String>,
        stripped: bool,
    ) -> Self {
        let mut b = PromptBundle { kind, preamble, rules_text, payload, appended_sva, token_estimate: 0, stripped };
        b.token_estimate = estimate_tokens(&b.text());
        b
    }

    /// Full prompt text: preamble, rules, payload, then appended SVA.
    pub fn text(&self) -> String {
        let mut parts = vec![self.preamble.as_str(), self.rules_text.as_str(), self.payload.as_str()];
        if let Some(sva) = &self.appended_sva {
            parts.push(sva.as_str());
        }
        parts.iter().map(|p| p.trim_end()).filter(|p| !p.is_empty()).collect::<Vec<_>>().join("\n\n") + "\n"
    }

    /// Hex SHA-256 of the prompt text.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.text().as_bytes()))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("prompt needs {needed} tokens but only {available} fit the budget ({overflow} over); {guidance}")]
    OverBudget { needed: usize, available: usize, overflow: usize, guidance: String },
    #[error("the rule set is empty")]
    EmptyRuleSet,
    #[error("the specification is empty")]
    EmptySpec,
    #[error("malformed module interface: {0}")]
    MalformedInterface(String),
}

/// Task instructions per prompt kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Preambles {
    pub sva: String,
    pub annotation: String,
    pub rtl: String,
}

impl Default for Preambles {
    fn default() -> Self {
        Preambles::parse(BUILTIN_PREAMBLE, "builtin").expect("shipped preamble parses")
    }
}

impl Preambles {
    pub fn parse(text: &str, origin: &str) -> Result<Preambles, ConfigError> {
        let mut p = Preambles { sva: String::new(), annotation: String::new(), rtl: String::new() };
        for e in parse_kv(text, origin)? {
            let slot = match e.key.as_str() {
                "sva" => &mut p.sva,
                "annotation" => &mut p.annotation,
                "rtl" => &mut p.rtl,
                _ => {
                    return Err(ConfigError::Parse {
                        path: origin.to_string(),
                        line: e.line,
                        message: format!("unknown prompt kind `{}`", e.key),
                    })
                }
            };
            *slot = e.value;
        }
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Preambles, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Preambles::parse(&text, &path.display().to_string())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PromptOptions {
    pub preambles: Preambles,
    /// Strip comments even when the RTL fits.
    pub strip: bool,
    /// Extra line appended to the preamble (e.g. FSM hint).
    pub hint: Option<String>,
}

impl PromptOptions {
    fn preamble(&self, base: &str) -> String {
        match &self.hint {
            Some(h) => format!("{base}\n{h}"),
            None => base.to_string(),
        }
    }
}

fn over_budget(bundle: &PromptBundle, budget: Budget) -> PromptError {
    let available = budget.available();
    PromptError::OverBudget {
        needed: bundle.token_estimate,
        available,
        overflow: bundle.token_estimate - available,
        guidance: GUIDANCE.to_string(),
    }
}

fn fits(b: &PromptBundle, budget: Budget) -> bool {
    b.token_estimate <= budget.available()
}

pub fn compose_sva_prompt(
    module: &RtlModule,
    rs: &RuleSet,
    budget: Budget,
    opts: &PromptOptions,
) -> Result<PromptBundle, PromptError> {
    let preamble = opts.preamble(&opts.preambles.sva);
    let rules_text = render(rs, None);
    let make = |payload: &str, stripped| {
        PromptBundle::new(PromptKind::SvaGen, preamble.clone(), rules_text.clone(), payload.to_string(), None, stripped)
    };
    if !opts.strip {
        let full = make(&module.body_text, false);
        if fits(&full, budget) {
            return Ok(full);
        }
    }
    let stripped = make(&module.stripped_text, true);
    if fits(&stripped, budget) {
        Ok(stripped)
    } else {
        Err(over_budget(&stripped, budget))
    }
}

pub fn compose_annotation_prompt(
    module: &RtlModule,
    annotation_rules: &RuleSet,
    budget: Budget,
    opts: &PromptOptions,
) -> Result<PromptBundle, PromptError> {
    if annotation_rules.rules.is_empty() {
        return Err(PromptError::EmptyRuleSet);
    }
    let preamble = opts.preamble(&opts.preambles.annotation);
    let rules_text = render(annotation_rules, None);
    let make = |payload: &str, stripped| {
        PromptBundle::new(
            PromptKind::AnnotationGen,
            preamble.clone(),
            rules_text.clone(),
            payload.to_string(),
            None,
            stripped,
        )
    };
    let mut candidates = Vec::new();
    if !opts.strip {
        candidates.push(make(&module.body_text, false));
    }
    candidates.push(make(&module.stripped_text, true));
    candidates.push(make(&module.interface_text(), true));
    let last = candidates.pop().expect("header candidate");
    if let Some(b) = candidates.into_iter().find(|b| fits(b, budget)) {
        return Ok(b);
    }
    if fits(&last, budget) {
        Ok(last)
    } else {
        Err(over_budget(&last, budget))
    }
}

/// RTL-generation prompt. Previous RTL is never an input.
pub fn compose_rtl_prompt(
    spec: &str,
    interface: &str,
    sva: Option<&str>,
    rtl_rules: &RuleSet,
    budget: Budget,
    opts: &PromptOptions,
) -> Result<PromptBundle, PromptError> {
    if spec.trim().is_empty() {
        return Err(PromptError::EmptySpec);
    }
    check_interface(interface)?;
    let payload = format!("Specification:\n{}\n\nInterface:\n{}", spec.trim(), interface.trim());
    let appended = sva
        .filter(|s| !s.trim().is_empty())
        .map(|s| format!("Assertions the RTL must satisfy:\n{}", s.trim()));
    let bundle = PromptBundle::new(
        PromptKind::RtlGen,
        opts.preamble(&opts.preambles.rtl),
        render(rtl_rules, None),
        payload,
        appended,
        false,
    );
    if fits(&bundle, budget) {
        Ok(bundle)
    } else {
        Err(over_budget(&bundle, budget))
    }
}

/// Parses an interface given as a header, with or without `endmodule`.
pub fn check_interface(interface: &str) -> Result<RtlModule, PromptError> {
    let text = if interface.contains("endmodule") {
        interface.to_string()
    } else {
        format!("{}\nendmodule\n", interface.trim_end())
    };
    let m = parse_module(&SourceFile::new("interface.sv", text))
        .map_err(|e| PromptError::MalformedInterface(e.to_string()))?;
    if m.ports.is_empty() {
        return Err(PromptError::MalformedInterface("no ports declared".into()));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::{builtin_annotation_rules, builtin_rtl_rules, builtin_rules};

    fn module(text: &str) -> RtlModule {
        parse_module(&SourceFile::new("m.sv", text)).unwrap()
    }

    const SMALL: &str = "module m(input clk, input rst_n, output logic p);\n  // state\n  logic q_r;\nendmodule\n";

    #[test]
    fn small_module_is_not_stripped() {
        let b = compose_sva_prompt(&module(SMALL), &builtin_rules(), Budget::default(), &PromptOptions::default())
            .unwrap();
        assert!(!b.stripped);
        assert!(b.payload.contains("// state"));
        assert_eq!(b.token_estimate, estimate_tokens(&b.text()));
        assert!(b.preamble.contains("Output only assertions and comments"));
    }

    #[test]
    fn forced_strip() {
        let opts = PromptOptions { strip: true, ..PromptOptions::default() };
        let b = compose_sva_prompt(&module(SMALL), &builtin_rules(), Budget::default(), &opts).unwrap();
        assert!(b.stripped);
        assert!(!b.payload.contains("// state"));
    }

    #[test]
    fn over_budget_carries_guidance() {
        let tight = Budget { context_limit: 100, output_reserve: 50 };
        let err = compose_sva_prompt(&module(SMALL), &builtin_rules(), tight, &PromptOptions::default())
            .unwrap_err();
        match err {
            PromptError::OverBudget { overflow, guidance, needed, available } => {
                assert_eq!(guidance, GUIDANCE);
                assert_eq!(needed - available, overflow);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn annotation_falls_back_to_header() {
        let mut body = String::from("module m(input clk, input in_val, output logic out_val);\n");
        for i in 0..200 {
            body.push_str(&format!("  logic sig_{i};\n"));
        }
        body.push_str("endmodule\n");
        let m = module(&body);
        let budget = Budget { context_limit: 600, output_reserve: 100 };
        let b = compose_annotation_prompt(&m, &builtin_annotation_rules(), budget, &PromptOptions::default())
            .unwrap();
        assert!(b.stripped);
        assert!(b.payload.contains("in_val") && !b.payload.contains("sig_0"));
        assert_eq!(
            compose_annotation_prompt(&m, &RuleSet::default(), budget, &PromptOptions::default()),
            Err(PromptError::EmptyRuleSet)
        );
    }

    #[test]
    fn rtl_prompt() {
        let iface = "module fifo(input clk, input rst_n, input in_val, output logic in_rdy);";
        let rs = builtin_rtl_rules();
        let opts = PromptOptions::default();
        let b = compose_rtl_prompt("A FIFO.", iface, None, &rs, Budget::default(), &opts).unwrap();
        assert_eq!(b.kind, PromptKind::RtlGen);
        assert!(b.appended_sva.is_none());
        let b2 = compose_rtl_prompt("A FIFO.", iface, Some("as__a: assert property (a |-> b);"), &rs, Budget::default(), &opts)
            .unwrap();
        assert!(b2.appended_sva.is_some());
        assert!(b2.text().ends_with("as__a: assert property (a |-> b);\n"));
        assert_eq!(compose_rtl_prompt(" ", iface, None, &rs, Budget::default(), &opts), Err(PromptError::EmptySpec));
        assert!(matches!(
            compose_rtl_prompt("x", "not a header", None, &rs, Budget::default(), &opts),
            Err(PromptError::MalformedInterface(_))
        ));
    }

    #[test]
    fn deterministic_digest() {
        let m = module(SMALL);
        let a = compose_sva_prompt(&m, &builtin_rules(), Budget::default(), &PromptOptions::default()).unwrap();
        let b = compose_sva_prompt(&m, &builtin_rules(), Budget::default(), &PromptOptions::default()).unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }
}
