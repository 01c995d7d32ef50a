use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{LlmError, Usd};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub timestamp: DateTime<Utc>,
    pub provider: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub rate_per_1k: Usd,
    pub usd: Usd,
}

impl LedgerEntry {
    pub fn new(provider: &str, prompt_tokens: u64, completion_tokens: u64, rate_per_1k: Usd) -> Self {
        LedgerEntry {
            timestamp: Utc::now(),
            provider: provider.to_string(),
            prompt_tokens,
            completion_tokens,
            rate_per_1k,
            usd: rate_per_1k.per_1k(prompt_tokens + completion_tokens),
        }
    }
}

/// Append-only cost ledger, optionally mirrored to a JSONL file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CostLedger {
    entries: Vec<LedgerEntry>,
    path: Option<PathBuf>,
}

impl CostLedger {
    pub fn in_memory() -> Self {
        CostLedger::default()
    }

    /// Opens (or starts) a ledger persisted at `path`.
    pub fn open(path: &Path) -> Result<Self, LlmError> {
        let mut ledger = CostLedger { entries: Vec::new(), path: Some(path.to_path_buf()) };
        if path.exists() {
            let text = std::fs::read_to_string(path).map_err(|e| LlmError::io(path, e))?;
            for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let entry = serde_json::from_str(line).map_err(|e| LlmError::Io {
                    path: path.display().to_string(),
                    message: format!("line {}: {e}", i + 1),
                })?;
                ledger.entries.push(entry);
            }
        }
        Ok(ledger)
    }

    pub fn append(&mut self, entry: LedgerEntry) -> Result<(), LlmError> {
        if let Some(path) = &self.path {
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir).map_err(|e| LlmError::io(dir, e))?;
            }
            let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(|e| LlmError::io(path, e))?;
            let line = serde_json::to_string(&entry).expect("ledger entry serializes");
            writeln!(f, "{line}").map_err(|e| LlmError::io(path, e))?;
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn total_cost(&self) -> Usd {
        total_cost(&self.entries)
    }
}

pub fn total_cost(entries: &[LedgerEntry]) -> Usd {
    entries.iter().map(|e| e.usd).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals() {
        let rate: Usd = "0.03".parse().unwrap();
        let mut l = CostLedger::in_memory();
        assert_eq!(l.total_cost(), Usd::ZERO);
        l.append(LedgerEntry::new("x", 2000, 500, rate)).unwrap();
        assert_eq!(l.total_cost().to_string(), "0.075");
        l.append(LedgerEntry::new("x", 1000, 0, rate)).unwrap();
        assert_eq!(l.total_cost().to_string(), "0.105");
    }

    #[test]
    fn persisted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/cost_ledger.jsonl");
        let mut l = CostLedger::open(&path).unwrap();
        l.append(LedgerEntry::new("x", 2000, 500, "0.03".parse().unwrap())).unwrap();
        let again = CostLedger::open(&path).unwrap();
        assert_eq!(again.entries(), l.entries());
    }
}
