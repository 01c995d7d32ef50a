use serde::{Deserialize, Serialize};

use super::booklog::{FpvStats, IterationRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Running,
    ConvergedFullProof,
    ConvergedPlateau,
    Exhausted,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Running => "running",
            Verdict::ConvergedFullProof => "converged_full_proof",
            Verdict::ConvergedPlateau => "converged_plateau",
            Verdict::Exhausted => "exhausted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvergenceState {
    pub status: Verdict,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvergenceOptions {
    /// Consecutive proof results with identical counts that count as a plateau.
    pub plateau_window: usize,
    pub max_iters: usize,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        ConvergenceOptions { plateau_window: 2, max_iters: 10 }
    }
}

fn full_proof(r: &IterationRecord, f: &FpvStats) -> bool {
    let covered = r.coverage.as_ref().is_none_or(|c| c.statement >= 1.0 && c.toggle >= 1.0);
    f.compiled && f.total() > 0 && f.n_proven == f.total() && covered
}

/// Verdict over the records that carry proof results, oldest first.
pub fn convergence(records: &[IterationRecord], opts: &ConvergenceOptions) -> ConvergenceState {
    let state = |status, reason: String| ConvergenceState { status, reason };
    let proofs: Vec<(&IterationRecord, &FpvStats)> =
        records.iter().filter_map(|r| r.fpv_stats.as_ref().map(|f| (r, f))).collect();
    let Some((last, last_stats)) = proofs.last() else {
        return state(Verdict::Running, "no proof results yet".into());
    };
    if full_proof(last, last_stats) {
        return state(Verdict::ConvergedFullProof, format!("all {} assertions proven", last_stats.total()));
    }
    let window = opts.plateau_window.max(2);
    if proofs.len() >= window {
        let key = |f: &FpvStats| (f.total(), f.n_failing);
        let tail = &proofs[proofs.len() - window..];
        if tail.iter().all(|(_, f)| key(f) == key(last_stats)) {
            let (n, fail) = key(last_stats);
            return state(
                Verdict::ConvergedPlateau,
                format!("{n} assertions with {fail} failing over the last {window} iterations"),
            );
        }
    }
    if proofs.len() >= opts.max_iters {
        return state(Verdict::Exhausted, format!("reached the limit of {} iterations", opts.max_iters));
    }
    state(Verdict::Running, format!("{} of {} failing", last_stats.n_failing, last_stats.total()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::booklog::{FlowKind, Step};
    use crate::fpv::CoverageReport;

    fn rec(total: usize, failing: usize) -> IterationRecord {
        let mut r = IterationRecord::new(FlowKind::Refine, Step::Prove, 1);
        r.fpv_stats = Some(FpvStats { compiled: true, n_proven: total - failing, n_failing: failing, ..FpvStats::default() });
        r
    }

    #[test]
    fn verdicts() {
        let o = ConvergenceOptions::default();
        assert_eq!(convergence(&[], &o).status, Verdict::Running);
        assert_eq!(convergence(&[rec(8, 1)], &o).status, Verdict::Running);
        assert_eq!(convergence(&[rec(8, 1), rec(8, 0)], &o).status, Verdict::ConvergedFullProof);
        assert_eq!(convergence(&[rec(8, 1), rec(8, 1)], &o).status, Verdict::ConvergedPlateau);
        assert_eq!(convergence(&[rec(8, 1), rec(9, 1)], &o).status, Verdict::Running);
        assert_eq!(convergence(&[rec(0, 0)], &o).status, Verdict::Running);
        let tight = ConvergenceOptions { plateau_window: 3, max_iters: 2 };
        assert_eq!(convergence(&[rec(8, 1), rec(8, 1)], &tight).status, Verdict::Exhausted);
    }

    #[test]
    fn coverage_gates_full_proof() {
        let mut r = rec(4, 0);
        r.coverage = Some(CoverageReport { statement: 0.9, toggle: 1.0, source: String::new() });
        assert_eq!(convergence(&[r.clone()], &ConvergenceOptions::default()).status, Verdict::Running);
        r.coverage = Some(CoverageReport { statement: 1.0, toggle: 1.0, source: String::new() });
        assert_eq!(convergence(&[r], &ConvergenceOptions::default()).status, Verdict::ConvergedFullProof);
    }

    #[test]
    fn compile_failure_never_converges_to_proof() {
        let mut r = rec(4, 0);
        r.fpv_stats.as_mut().unwrap().compiled = false;
        assert_eq!(convergence(&[r], &ConvergenceOptions::default()).status, Verdict::Running);
    }
}
