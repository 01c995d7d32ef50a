//! Coverage reports from an external simulator and their comparison.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FpvError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    /// Statement coverage in `[0, 1]`.
    pub statement: f64,
    /// Toggle coverage in `[0, 1]`.
    pub toggle: f64,
    #[serde(default)]
    pub source: String,
}

impl CoverageReport {
    pub fn validate(&self) -> Result<(), FpvError> {
        for (field, value) in [("statement", self.statement), ("toggle", self.toggle)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(FpvError::OutOfRange { field: field.into(), value });
            }
        }
        Ok(())
    }
}

/// New-over-baseline ratios, rounded to two decimals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageDelta {
    pub statement: f64,
    pub toggle: f64,
}

pub fn ingest_coverage(path: &Path) -> Result<CoverageReport, FpvError> {
    let text = std::fs::read_to_string(path).map_err(|e| FpvError::io(path, e))?;
    let report: CoverageReport = serde_json::from_str(&text)
        .map_err(|e| FpvError::SchemaError { path: path.display().to_string(), message: e.to_string() })?;
    report.validate()?;
    Ok(report)
}

pub fn coverage_ratio(base: &CoverageReport, new: &CoverageReport) -> Result<CoverageDelta, FpvError> {
    let ratio = |field: &str, b: f64, n: f64| {
        if b == 0.0 {
            Err(FpvError::ZeroBase { field: field.into() })
        } else {
            Ok((n / b * 100.0).round() / 100.0)
        }
    };
    Ok(CoverageDelta {
        statement: ratio("statement", base.statement, new.statement)?,
        toggle: ratio("toggle", base.toggle, new.toggle)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cov(statement: f64, toggle: f64) -> CoverageReport {
        CoverageReport { statement, toggle, source: String::new() }
    }

    #[test]
    fn ratios() {
        let d = coverage_ratio(&cov(0.24, 0.10), &cov(0.30, 0.374)).unwrap();
        assert_eq!((d.statement, d.toggle), (1.25, 3.74));
        assert_eq!(coverage_ratio(&cov(0.0, 0.5), &cov(0.1, 0.1)), Err(FpvError::ZeroBase { field: "statement".into() }));
    }

    #[test]
    fn schema() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"statement": 0.5}"#).unwrap();
        assert!(matches!(ingest_coverage(&p), Err(FpvError::SchemaError { .. })));
        std::fs::write(&p, r#"{"statement": 0.5, "toggle": -0.1}"#).unwrap();
        assert!(matches!(ingest_coverage(&p), Err(FpvError::OutOfRange { .. })));
        std::fs::write(&p, r#"{"statement": 0.5, "toggle": 1.0, "source": "x"}"#).unwrap();
        assert_eq!(ingest_coverage(&p).unwrap().source, "x");
    }
}
