//! Tolerant parsing of engine output into a report.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;

use super::{FpvReport, ProofStatus};

static NAME: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b((?:as|asgpt|am)__\w+)").expect("name regex"));
static DONE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"DONE \((PASS|FAIL|UNKNOWN|ERROR|TIMEOUT)").expect("done regex"));
static TRACE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\btrace\b.*?(\S+\.(?:vcd|yw|fst|aiw))").expect("trace regex"));

fn status_of(line: &str) -> Option<ProofStatus> {
    let l = line.to_ascii_lowercase();
    if l.contains("fail") {
        Some(ProofStatus::Failing)
    } else if l.contains("pass") || l.contains("proven") || l.contains("proved") {
        Some(ProofStatus::Proven)
    } else if l.contains("unknown") || l.contains("undetermined") {
        Some(ProofStatus::Unknown)
    } else {
        None
    }
}

/// Extracts per-assertion status, traces and the compile flag from a log.
/// An empty or unrecognizable log yields `compiled == false`.
pub fn parse_engine_log(text: &str) -> FpvReport {
    parse(text).0
}

/// Like [`parse_engine_log`], then assigns the overall verdict to the
/// assertions in `names` the log did not mention.
pub(crate) fn parse_with_names(text: &str, names: &[String]) -> FpvReport {
    let (mut report, overall) = parse(text);
    if !report.compiled {
        return report;
    }
    let fill = match overall {
        Some(ProofStatus::Proven) => ProofStatus::Proven,
        _ => ProofStatus::Unknown,
    };
    for n in names {
        report.per_assertion.entry(n.clone()).or_insert(fill);
    }
    report
}

fn parse(text: &str) -> (FpvReport, Option<ProofStatus>) {
    let mut per_assertion = BTreeMap::new();
    let mut cex_summaries = BTreeMap::new();
    let mut overall = None;
    let mut errored = false;
    let mut last_failing: Option<String> = None;
    for line in text.lines() {
        if let Some(c) = DONE.captures(line) {
            overall = match &c[1] {
                "PASS" => Some(ProofStatus::Proven),
                "FAIL" => Some(ProofStatus::Failing),
                "ERROR" => {
                    errored = true;
                    None
                }
                _ => Some(ProofStatus::Unknown),
            };
            continue;
        }
        if line.contains("ERROR") {
            errored = true;
        }
        let names: Vec<String> = NAME.captures_iter(line).map(|c| c[1].to_string()).collect();
        if let Some(t) = TRACE.captures(line) {
            let targets = if names.is_empty() { last_failing.iter().cloned().collect() } else { names.clone() };
            for n in targets {
                cex_summaries.insert(n.clone(), format!("trace {}", &t[1]));
                per_assertion.insert(n, ProofStatus::Failing);
            }
            continue;
        }
        let Some(status) = status_of(line) else { continue };
        for n in names {
            // A failure is never downgraded by a later line.
            let slot = per_assertion.entry(n.clone()).or_insert(status);
            if *slot != ProofStatus::Failing {
                *slot = status;
            }
            if status == ProofStatus::Failing {
                last_failing = Some(n);
            }
        }
    }
    for (n, s) in &per_assertion {
        if *s == ProofStatus::Failing {
            cex_summaries.entry(n.clone()).or_insert_with(|| "failing, no trace reported".to_string());
        }
    }
    let compiled = !errored && (overall.is_some() || !per_assertion.is_empty());
    let report = FpvReport { per_assertion, cex_summaries, compiled, engine: "log".into(), runtime_secs: 0.0 };
    (report, overall)
}
