//! Append-only JSONL record of every flow iteration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fpv::{CoverageReport, FpvReport, ProofStatus};
use crate::sva::{AssertionBatch, LintFinding, Severity};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BookError {
    #[error("corrupt booklog at line {line}: {message}")]
    CorruptLog { line: usize, message: String },
    #[error("cannot access {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    Refine,
    Sva,
    Design,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    AnnotationGen,
    SvaGen,
    RtlGen,
    Prove,
    HumanEdit,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BatchStats {
    pub n_assertions: usize,
    pub n_lint_errors: usize,
    pub n_lint_warnings: usize,
    /// Findings per rule category.
    pub by_category: BTreeMap<String, usize>,
}

impl BatchStats {
    pub fn new(batch: &AssertionBatch, findings: &[LintFinding]) -> Self {
        let mut by_category = BTreeMap::new();
        for f in findings {
            *by_category.entry(f.category.to_string()).or_insert(0) += 1;
        }
        BatchStats {
            n_assertions: batch.len(),
            n_lint_errors: findings.iter().filter(|f| f.severity == Severity::Error).count(),
            n_lint_warnings: findings.iter().filter(|f| f.severity == Severity::Warning).count(),
            by_category,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FpvStats {
    pub compiled: bool,
    pub n_proven: usize,
    pub n_failing: usize,
    pub n_unknown: usize,
    pub failing: Vec<String>,
}

impl FpvStats {
    pub fn total(&self) -> usize {
        self.n_proven + self.n_failing + self.n_unknown
    }
}

impl From<&FpvReport> for FpvStats {
    fn from(r: &FpvReport) -> Self {
        FpvStats {
            compiled: r.compiled,
            n_proven: r.count(ProofStatus::Proven),
            n_failing: r.count(ProofStatus::Failing),
            n_unknown: r.count(ProofStatus::Unknown),
            failing: r.failing().into_iter().map(str::to_string).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Assigned on append; strictly increasing from 1.
    pub index: usize,
    pub flow: FlowKind,
    pub step: Step,
    pub ruleset_version: u32,
    pub prompt_digest: Option<String>,
    pub completion_text: Option<String>,
    pub batch_stats: Option<BatchStats>,
    pub fpv_stats: Option<FpvStats>,
    pub coverage: Option<CoverageReport>,
    pub notes: String,
    pub timestamp: DateTime<Utc>,
    /// RTL generation this record belongs to (design flow only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtl_iteration: Option<usize>,
}

impl IterationRecord {
    pub fn new(flow: FlowKind, step: Step, ruleset_version: u32) -> Self {
        IterationRecord {
            index: 0,
            flow,
            step,
            ruleset_version,
            prompt_digest: None,
            completion_text: None,
            batch_stats: None,
            fpv_stats: None,
            coverage: None,
            notes: String::new(),
            timestamp: Utc::now(),
            rtl_iteration: None,
        }
    }

    pub fn note(&mut self, text: impl AsRef<str>) {
        if !self.notes.is_empty() {
            self.notes.push_str("; ");
        }
        self.notes.push_str(text.as_ref());
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema: u32,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Booklog {
    path: Option<PathBuf>,
    records: Vec<IterationRecord>,
}

impl Booklog {
    pub fn in_memory() -> Self {
        Booklog::default()
    }

    /// Loads an existing log or starts a new one at `path`.
    pub fn open(path: &Path) -> Result<Self, BookError> {
        let io = |e: std::io::Error| BookError::Io { path: path.display().to_string(), message: e.to_string() };
        let mut log = Booklog { path: Some(path.to_path_buf()), records: Vec::new() };
        if !path.exists() {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(io)?;
            }
            let header = serde_json::to_string(&Header { schema: SCHEMA_VERSION }).expect("header serializes");
            std::fs::write(path, header + "\n").map_err(io)?;
            return Ok(log);
        }
        let text = std::fs::read_to_string(path).map_err(io)?;
        log.records = parse_records(&text)?;
        Ok(log)
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    pub fn next_index(&self) -> usize {
        self.records.last().map_or(1, |r| r.index + 1)
    }

    /// Assigns the next index, persists and returns it.
    pub fn append(&mut self, mut record: IterationRecord) -> Result<usize, BookError> {
        record.index = self.next_index();
        let index = record.index;
        if let Some(path) = &self.path {
            let io = |e: std::io::Error| BookError::Io { path: path.display().to_string(), message: e.to_string() };
            let mut f = OpenOptions::new().append(true).open(path).map_err(io)?;
            writeln!(f, "{}", serde_json::to_string(&record).expect("record serializes")).map_err(io)?;
        }
        self.records.push(record);
        Ok(index)
    }
}

fn parse_records(text: &str) -> Result<Vec<IterationRecord>, BookError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let corrupt = |line: usize, message: String| BookError::CorruptLog { line, message };
    match lines.next() {
        Some((i, l)) => {
            let h: Header = serde_json::from_str(l).map_err(|e| corrupt(i + 1, format!("bad header: {e}")))?;
            if h.schema != SCHEMA_VERSION {
                return Err(corrupt(i + 1, format!("unsupported schema {}", h.schema)));
            }
        }
        None => return Err(corrupt(1, "missing header".into())),
    }
    let mut records: Vec<IterationRecord> = Vec::new();
    for (i, l) in lines {
        let r: IterationRecord = serde_json::from_str(l).map_err(|e| corrupt(i + 1, e.to_string()))?;
        if records.last().is_some_and(|prev| r.index <= prev.index) {
            return Err(corrupt(i + 1, format!("index {} does not increase", r.index)));
        }
        records.push(r);
    }
    Ok(records)
}

fn issues(r: &IterationRecord) -> String {
    let mut parts: Vec<String> = r
        .batch_stats
        .iter()
        .flat_map(|b| b.by_category.iter().map(|(c, n)| format!("{c}:{n}")))
        .collect();
    if let Some(f) = &r.fpv_stats {
        parts.extend(f.failing.iter().map(|n| format!("fails {n}")));
    }
    if !r.notes.is_empty() {
        parts.push(r.notes.clone());
    }
    if parts.is_empty() {
        "-".into()
    } else {
        parts.join(", ")
    }
}

/// Table with columns T, compile, #Prop, #Fail and issues, one row per
/// record that carries batch or proof results.
pub fn export_table(records: &[IterationRecord]) -> String {
    let mut out = String::from("T\tcompile\t#Prop\t#Fail\tissues\n");
    for r in records.iter().filter(|r| r.batch_stats.is_some() || r.fpv_stats.is_some()) {
        let compile = match &r.fpv_stats {
            Some(f) if f.compiled => "yes",
            Some(_) => "no",
            None => "-",
        };
        let props = r
            .batch_stats
            .as_ref()
            .map(|b| b.n_assertions)
            .or(r.fpv_stats.as_ref().map(FpvStats::total))
            .unwrap_or(0);
        let fails = r.fpv_stats.as_ref().map_or("-".to_string(), |f| f.n_failing.to_string());
        let _ = writeln!(out, "{}\t{compile}\t{props}\t{fails}\t{}", r.index, issues(r));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(n: usize, fail: usize) -> IterationRecord {
        let mut r = IterationRecord::new(FlowKind::Refine, Step::SvaGen, 1);
        r.batch_stats = Some(BatchStats { n_assertions: n, ..BatchStats::default() });
        r.fpv_stats = Some(FpvStats { compiled: true, n_proven: n - fail, n_failing: fail, ..FpvStats::default() });
        r
    }

    #[test]
    fn persist_and_reload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("book.jsonl");
        let mut log = Booklog::open(&path).unwrap();
        log.append(record(8, 0)).unwrap();
        log.append(record(8, 1)).unwrap();
        let again = Booklog::open(&path).unwrap();
        assert_eq!(again.records(), log.records());
        assert_eq!(again.records().iter().map(|r| r.index).collect::<Vec<_>>(), [1, 2]);
        assert!(std::fs::read_to_string(&path).unwrap().starts_with("{\"schema\":1}\n"));
    }

    #[test]
    fn non_monotone_index_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("book.jsonl");
        let mut r = record(1, 0);
        r.index = 2;
        let a = serde_json::to_string(&r).unwrap();
        r.index = 2;
        let b = serde_json::to_string(&r).unwrap();
        std::fs::write(&path, format!("{{\"schema\":1}}\n{a}\n{b}\n")).unwrap();
        assert!(matches!(Booklog::open(&path), Err(BookError::CorruptLog { line: 3, .. })));
        std::fs::write(&path, "not json\n").unwrap();
        assert!(matches!(Booklog::open(&path), Err(BookError::CorruptLog { line: 1, .. })));
    }

    #[test]
    fn table() {
        let mut log = Booklog::in_memory();
        log.append(record(8, 0)).unwrap();
        let mut r = record(8, 1);
        r.fpv_stats.as_mut().unwrap().failing = vec!["as__x".into()];
        log.append(r).unwrap();
        let t = export_table(log.records());
        let lines: Vec<_> = t.lines().collect();
        assert_eq!(lines[0], "T\tcompile\t#Prop\t#Fail\tissues");
        assert_eq!(lines[1], "1\tyes\t8\t0\t-");
        assert_eq!(lines[2], "2\tyes\t8\t1\tfails as__x");
    }
}
