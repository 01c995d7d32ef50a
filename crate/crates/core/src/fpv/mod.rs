//! Running a formal engine on a testbench and collecting per-assertion results.

mod coverage;
mod log;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use coverage::{coverage_ratio, ingest_coverage, CoverageDelta, CoverageReport};
pub use log::parse_engine_log;

use crate::forge::FtArtifact;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FpvError {
    #[error("engine command `{cmd}` not found")]
    EngineNotFound { cmd: String },
    #[error("engine script line {line}: {message}")]
    BadScript { line: usize, message: String },
    #[error("mock engine has no script left after {runs} runs")]
    ScriptExhausted { runs: usize },
    #[error("coverage report {path}: {message}")]
    SchemaError { path: String, message: String },
    #[error("coverage value {field}={value} is outside [0, 1]")]
    OutOfRange { field: String, value: f64 },
    #[error("baseline {field} coverage is zero")]
    ZeroBase { field: String },
    #[error("cannot access {path}: {message}")]
    Io { path: String, message: String },
}

impl FpvError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> FpvError {
        FpvError::Io { path: path.display().to_string(), message: e.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProofStatus {
    Proven,
    Failing,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpvReport {
    pub per_assertion: BTreeMap<String, ProofStatus>,
    /// Counterexample trace summary per failing assertion.
    pub cex_summaries: BTreeMap<String, String>,
    pub compiled: bool,
    pub engine: String,
    pub runtime_secs: f64,
}

impl FpvReport {
    pub fn count(&self, status: ProofStatus) -> usize {
        self.per_assertion.values().filter(|s| **s == status).count()
    }

    pub fn failing(&self) -> Vec<&str> {
        self.names_with(ProofStatus::Failing)
    }

    pub fn names_with(&self, status: ProofStatus) -> Vec<&str> {
        self.per_assertion.iter().filter(|(_, s)| **s == status).map(|(n, _)| n.as_str()).collect()
    }

    /// Compiled, at least one assertion, all proven.
    pub fn full_proof(&self) -> bool {
        self.compiled && !self.per_assertion.is_empty() && self.count(ProofStatus::Proven) == self.per_assertion.len()
    }
}

/// One scripted engine outcome.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EngineScript {
    pub compiled: bool,
    /// Status for assertions without an explicit entry.
    pub default: Option<ProofStatus>,
    pub entries: BTreeMap<String, (ProofStatus, Option<String>)>,
}

impl EngineScript {
    /// Lines `name|status[|trace summary]`; `*` names the default and
    /// `compile|fail` marks a compile failure.
    pub fn parse(text: &str) -> Result<EngineScript, FpvError> {
        let mut s = EngineScript { compiled: true, ..EngineScript::default() };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |message: String| FpvError::BadScript { line: i + 1, message };
            let mut parts = line.splitn(3, '|').map(str::trim);
            let name = parts.next().unwrap_or_default();
            let status = parts.next().ok_or_else(|| bad("expected `name|status`".into()))?;
            if name == "compile" {
                s.compiled = match status {
                    "fail" => false,
                    "ok" => true,
                    _ => return Err(bad(format!("compile status must be ok or fail, found `{status}`"))),
                };
                continue;
            }
            let status = match status {
                "proven" => ProofStatus::Proven,
                "failing" => ProofStatus::Failing,
                "unknown" => ProofStatus::Unknown,
                _ => return Err(bad(format!("unknown status `{status}`"))),
            };
            if name == "*" {
                s.default = Some(status);
            } else {
                s.entries.insert(name.to_string(), (status, parts.next().map(str::to_string)));
            }
        }
        Ok(s)
    }

    fn report(&self, names: &[String]) -> FpvReport {
        let mut r = FpvReport {
            per_assertion: BTreeMap::new(),
            cex_summaries: BTreeMap::new(),
            compiled: self.compiled,
            engine: "mock".into(),
            runtime_secs: 0.0,
        };
        if !self.compiled {
            return r;
        }
        for n in names {
            let (status, cex) = match self.entries.get(n) {
                Some((s, c)) => (*s, c.clone()),
                None => (self.default.unwrap_or(ProofStatus::Unknown), None),
            };
            r.per_assertion.insert(n.clone(), status);
            if let (ProofStatus::Failing, Some(c)) = (status, cex) {
                r.cex_summaries.insert(n.clone(), c);
            }
        }
        r
    }
}

#[derive(Debug)]
pub enum Engine {
    /// Plays back one script per run; the last script repeats.
    Mock { scripts: Vec<EngineScript>, runs: Mutex<usize> },
    /// Runs `cmd <config>` in a fresh work directory.
    External { cmd: String, work_root: PathBuf },
}

impl Engine {
    pub fn mock(scripts: Vec<EngineScript>) -> Engine {
        Engine::Mock { scripts, runs: Mutex::new(0) }
    }

    pub fn mock_from_files(paths: &[PathBuf]) -> Result<Engine, FpvError> {
        let scripts = paths
            .iter()
            .map(|p| EngineScript::parse(&std::fs::read_to_string(p).map_err(|e| FpvError::io(p, e))?))
            .collect::<Result<_, _>>()?;
        Ok(Engine::mock(scripts))
    }

    pub fn external(cmd: &str, work_root: &Path) -> Engine {
        Engine::External { cmd: cmd.to_string(), work_root: work_root.to_path_buf() }
    }

    pub fn run(&self, art: &FtArtifact) -> Result<FpvReport, FpvError> {
        match self {
            Engine::Mock { scripts, runs } => {
                let mut n = runs.lock().expect("engine lock");
                let script = scripts.get(*n).or(scripts.last()).ok_or(FpvError::ScriptExhausted { runs: *n })?;
                *n += 1;
                Ok(script.report(&art.assertion_names))
            }
            Engine::External { cmd, work_root } => run_external(cmd, work_root, art),
        }
    }
}

fn run_external(cmd: &str, work_root: &Path, art: &FtArtifact) -> Result<FpvReport, FpvError> {
    let mut words = cmd.split_whitespace();
    let program = words.next().ok_or_else(|| FpvError::EngineNotFound { cmd: cmd.to_string() })?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3f").to_string();
    let dir = work_root.join(&art.design).join(stamp);
    art.write_to(&dir).map_err(|e| FpvError::Io { path: dir.display().to_string(), message: e.to_string() })?;
    let start = Instant::now();
    let output = Command::new(program)
        .args(words)
        .arg(art.config_file())
        .current_dir(&dir)
        .output()
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => FpvError::EngineNotFound { cmd: program.to_string() },
            _ => FpvError::io(&dir, e),
        })?;
    let mut text = String::from_utf8_lossy(&output.stdout).into_owned();
    text.push_str(&String::from_utf8_lossy(&output.stderr));
    std::fs::write(dir.join("engine.log"), &text).map_err(|e| FpvError::io(&dir, e))?;
    let mut report = log::parse_with_names(&text, &art.assertion_names);
    report.engine = program.to_string();
    report.runtime_secs = start.elapsed().as_secs_f64();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn art(names: &[&str]) -> FtArtifact {
        FtArtifact {
            design: "d".into(),
            design_text: String::new(),
            property_module: String::new(),
            bind: String::new(),
            engine_config: String::new(),
            assertion_names: names.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn mock_scripts() {
        let s1 = EngineScript::parse("*|proven\nas__b|failing|trace t.vcd\n").unwrap();
        let s2 = EngineScript::parse("*|proven").unwrap();
        let e = Engine::mock(vec![s1, s2]);
        let a = art(&["as__a", "as__b"]);
        let r1 = e.run(&a).unwrap();
        assert_eq!(r1.failing(), ["as__b"]);
        assert_eq!(r1.cex_summaries["as__b"], "trace t.vcd");
        assert!(!r1.full_proof());
        assert!(e.run(&a).unwrap().full_proof());
        assert!(e.run(&a).unwrap().full_proof());
    }

    #[test]
    fn script_errors() {
        assert!(matches!(EngineScript::parse("x"), Err(FpvError::BadScript { line: 1, .. })));
        assert!(matches!(EngineScript::parse("\nx|maybe"), Err(FpvError::BadScript { line: 2, .. })));
        let s = EngineScript::parse("compile|fail").unwrap();
        let r = s.report(&["as__a".into()]);
        assert!(!r.compiled && r.per_assertion.is_empty());
        assert!(matches!(Engine::mock(vec![]).run(&art(&[])), Err(FpvError::ScriptExhausted { runs: 0 })));
    }

    #[test]
    fn missing_external_engine() {
        let dir = tempfile::tempdir().unwrap();
        let e = Engine::external("definitely-not-an-engine-xyz -f", dir.path());
        assert_eq!(
            e.run(&art(&["as__a"])),
            Err(FpvError::EngineNotFound { cmd: "definitely-not-an-engine-xyz".into() })
        );
    }

    #[test]
    fn external_engine_output_is_parsed() {
        let dir = tempfile::tempdir().unwrap();
        let e = Engine::external("echo DONE (PASS, rc=0)", dir.path());
        let r = e.run(&art(&["as__a", "as__b"])).unwrap();
        assert!(r.full_proof());
        assert_eq!(r.engine, "echo");
    }
}
