//! Categorized prompt-rule catalog.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const BUILTIN_SVA: &str = include_str!("../../../rules/sva_gen.rules");
const BUILTIN_ANNOTATION: &str = include_str!("../../../rules/annotation_gen.rules");
const BUILTIN_RTL: &str = include_str!("../../../rules/rtl_gen.rules");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    IN,
    SY,
    WT,
    WS,
    GEN,
    STRAT,
}

impl Category {
    pub const ALL: [Category; 6] =
        [Category::IN, Category::SY, Category::WT, Category::WS, Category::GEN, Category::STRAT];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::IN => "IN",
            Category::SY => "SY",
            Category::WT => "WT",
            Category::WS => "WS",
            Category::GEN => "GEN",
            Category::STRAT => "STRAT",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown category `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub id: String,
    pub category: Category,
    pub text: String,
    /// Name of the lint check this rule backs; `Some` iff the rule is lintable.
    pub lint_key: Option<String>,
}

impl Rule {
    pub fn lintable(&self) -> bool {
        self.lint_key.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
    pub version: u32,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuleError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate rule id `{id}` on line {line}")]
    DuplicateRuleId { id: String, line: usize },
    #[error("rule `{id}` names lint check `{key}`, which does not exist")]
    UnknownLintKey { id: String, key: String },
    #[error("cannot access {path}: {message}")]
    Io { path: String, message: String },
}

impl RuleSet {
    pub fn parse(text: &str) -> Result<RuleSet, RuleError> {
        let mut rs = RuleSet::default();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("version:") {
                    rs.version = v.trim().parse().map_err(|_| RuleError::Parse {
                        line: line_no,
                        message: format!("bad version `{}`", v.trim()),
                    })?;
                }
                continue;
            }
            let parts: Vec<&str> = line.splitn(4, '|').collect();
            let [id, category, lint, text] = parts[..] else {
                return Err(RuleError::Parse {
                    line: line_no,
                    message: "expected `id|category|lint|text`".into(),
                });
            };
            let id = id.trim();
            if id.is_empty() || text.trim().is_empty() {
                return Err(RuleError::Parse { line: line_no, message: "empty id or text".into() });
            }
            let category = category
                .trim()
                .parse()
                .map_err(|message| RuleError::Parse { line: line_no, message })?;
            if !seen.insert(id.to_string()) {
                return Err(RuleError::DuplicateRuleId { id: id.to_string(), line: line_no });
            }
            let lint = lint.trim();
            rs.rules.push(Rule {
                id: id.to_string(),
                category,
                text: text.trim().to_string(),
                lint_key: (lint != "-" && !lint.is_empty()).then(|| lint.to_string()),
            });
        }
        Ok(rs)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# version: {}\n", self.version);
        for r in &self.rules {
            let lint = r.lint_key.as_deref().unwrap_or("-");
            out.push_str(&format!("{}|{}|{}|{}\n", r.id, r.category, lint, r.text));
        }
        out
    }

    pub fn get(&self, id: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.id == id)
    }

    /// The lintable rule backing `lint_key`, if the set contains one.
    pub fn backing_rule(&self, lint_key: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.lint_key.as_deref() == Some(lint_key))
    }

    /// Fails if any rule names a lint check outside `known`.
    pub fn check_lint_keys(&self, known: &[&str]) -> Result<(), RuleError> {
        for r in &self.rules {
            if let Some(key) = &r.lint_key {
                if !known.contains(&key.as_str()) {
                    return Err(RuleError::UnknownLintKey { id: r.id.clone(), key: key.clone() });
                }
            }
        }
        Ok(())
    }

    /// A copy without the rules of `categories`.
    pub fn without(&self, categories: &[Category]) -> RuleSet {
        RuleSet {
            rules: self.rules.iter().filter(|r| !categories.contains(&r.category)).cloned().collect(),
            version: self.version,
        }
    }

    /// Replaces or appends a rule and bumps the version.
    pub fn upsert(&mut self, rule: Rule) {
        match self.rules.iter_mut().find(|r| r.id == rule.id) {
            Some(slot) => *slot = rule,
            None => self.rules.push(rule),
        }
        self.version += 1;
    }

    /// Removes a rule by id and bumps the version; returns whether it existed.
    pub fn remove(&mut self, id: &str) -> bool {
        let before = self.rules.len();
        self.rules.retain(|r| r.id != id);
        let removed = self.rules.len() != before;
        if removed {
            self.version += 1;
        }
        removed
    }
}

pub fn builtin_rules() -> RuleSet {
    RuleSet::parse(BUILTIN_SVA).expect("shipped SVA rules parse")
}

pub fn builtin_annotation_rules() -> RuleSet {
    RuleSet::parse(BUILTIN_ANNOTATION).expect("shipped annotation rules parse")
}

pub fn builtin_rtl_rules() -> RuleSet {
    RuleSet::parse(BUILTIN_RTL).expect("shipped RTL rules parse")
}

pub fn load_rules(path: &Path) -> Result<RuleSet, RuleError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RuleError::Io { path: path.display().to_string(), message: e.to_string() })?;
    RuleSet::parse(&text)
}

pub fn save_rules(rs: &RuleSet, path: &Path) -> Result<(), RuleError> {
    std::fs::write(path, rs.to_text())
        .map_err(|e| RuleError::Io { path: path.display().to_string(), message: e.to_string() })
}

/// Numbered rule lines in catalog order, optionally restricted to `categories`.
pub fn render(rs: &RuleSet, categories: Option<&[Category]>) -> String {
    let mut out = String::new();
    let selected = rs.rules.iter().filter(|r| categories.is_none_or(|c| c.contains(&r.category)));
    for (i, r) in selected.enumerate() {
        out.push_str(&format!("{}. {}\n", i + 1, r.text));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rtl::estimate_tokens;

    #[test]
    fn builtin_catalog_contents() {
        let rs = builtin_rules();
        assert!(rs.rules.len() >= 18);
        for c in Category::ALL {
            assert!(rs.rules.iter().any(|r| r.category == c), "no {c} rule");
        }
        assert!(rs.rules.iter().any(|r| r
            .text
            .starts_with("Referencing internal signals in the property file ALWAYS requires prepending")));
        let foreach = rs.rules.iter().find(|r| r.text == "DO NOT use foreach loops in assertions, use generate for.").unwrap();
        assert_eq!(foreach.lint_key.as_deref(), Some("no_foreach"));
        let past = rs.rules.iter().find(|r| r.text.starts_with("DO NOT USE $past() in preconditions")).unwrap();
        assert!(past.lintable());
        assert!(rs.rules.iter().any(|r| r.text.contains("$countones")));
        assert_eq!(rs.version, 1);
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.rules");
        let rs = builtin_rules();
        save_rules(&rs, &path).unwrap();
        assert_eq!(load_rules(&path).unwrap(), rs);
    }

    #[test]
    fn parse_errors() {
        assert_eq!(
            RuleSet::parse("a|SY|-|x\na|WT|-|y"),
            Err(RuleError::DuplicateRuleId { id: "a".into(), line: 2 })
        );
        assert!(matches!(RuleSet::parse("a|XX|-|x"), Err(RuleError::Parse { line: 1, .. })));
        assert!(matches!(RuleSet::parse("\n\na|SY"), Err(RuleError::Parse { line: 3, .. })));
        assert_eq!(RuleSet::parse("").unwrap(), RuleSet { rules: vec![], version: 0 });
    }

    #[test]
    fn rendering() {
        let rs = builtin_rules();
        let strat = render(&rs, Some(&[Category::STRAT]));
        assert_eq!(strat.lines().count(), 1);
        assert!(strat.contains("state changes and when it retains its value"));
        assert_eq!(render(&RuleSet::default(), None), "");
        let all = render(&rs, None);
        assert!(all.starts_with("1. DO NOT declare properties"));
        assert!(estimate_tokens(&all) < 1200);
        assert_eq!(all, render(&rs, None));
    }

    #[test]
    fn mutation_bumps_version() {
        let mut rs = builtin_rules();
        let v = rs.version;
        rs.upsert(Rule { id: "X1".into(), category: Category::GEN, text: "x".into(), lint_key: None });
        assert!(rs.remove("X1"));
        assert!(!rs.remove("X1"));
        assert_eq!(rs.version, v + 2);
    }

    #[test]
    fn other_catalogs_parse() {
        assert!(!builtin_annotation_rules().rules.is_empty());
        assert!(!builtin_rtl_rules().rules.is_empty());
    }
}
