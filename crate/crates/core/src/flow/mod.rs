//! Iterative flows: rule refinement, multi-batch SVA generation and the
//! spec-to-RTL design loop. Every LLM call leaves one booklog record.

mod booklog;
mod convergence;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use booklog::{export_table, BatchStats, BookError, Booklog, FlowKind, FpvStats, IterationRecord, Step, SCHEMA_VERSION};
pub use convergence::{convergence, ConvergenceOptions, ConvergenceState, Verdict};

use crate::forge::{emit_ft, parse_annotations, render_annotations, ForgeError, FtArtifact, FtOptions, TransactionAnnotation};
use crate::fpv::{Engine, FpvError, FpvReport};
use crate::llm::{Gateway, LlmError};
use crate::prompt::{
    compose_annotation_prompt, compose_rtl_prompt, compose_sva_prompt, Budget, PromptBundle, PromptError, PromptOptions,
};
use crate::rtl::{parse_module, RtlError, RtlModule, SourceFile};
use crate::rules::RuleSet;
use crate::sva::{dedup, lint, normalized_key, parse_batch, AssertionBatch, LintFinding, LintOptions, Severity};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Rtl(#[from] RtlError),
    #[error(transparent)]
    Forge(#[from] ForgeError),
    #[error(transparent)]
    Fpv(#[from] FpvError),
    #[error(transparent)]
    Book(#[from] BookError),
    #[error("{0}")]
    Scenario(String),
    #[error("cannot access {path}: {message}")]
    Io { path: String, message: String },
}

fn io_err(path: &Path, e: std::io::Error) -> FlowError {
    FlowError::Io { path: path.display().to_string(), message: e.to_string() }
}

fn write(path: &Path, text: &str) -> Result<(), FlowError> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn read(path: &Path) -> Result<String, FlowError> {
    std::fs::read_to_string(path).map_err(|e| io_err(path, e))
}

/// Drops markdown code-fence lines from a completion.
pub fn strip_fences(text: &str) -> String {
    text.lines().filter(|l| !l.trim_start().starts_with("```")).map(|l| format!("{l}\n")).collect()
}

/// Everything a flow needs besides the design and the booklog.
pub struct FlowContext<'a> {
    pub gateway: &'a Gateway,
    pub budget: Budget,
    pub prompt: PromptOptions,
    pub sva_rules: RuleSet,
    pub annotation_rules: RuleSet,
    pub rtl_rules: RuleSet,
    pub lint: LintOptions,
    pub ft: FtOptions,
}

impl FlowContext<'_> {
    /// Runs one LLM call. Failures are booked before being returned; on
    /// success the caller completes and appends the record.
    fn call(
        &self,
        book: &mut Booklog,
        flow: FlowKind,
        step: Step,
        version: u32,
        bundle: Result<PromptBundle, PromptError>,
    ) -> Result<(String, IterationRecord), FlowError> {
        let mut rec = IterationRecord::new(flow, step, version);
        let bundle = match bundle {
            Ok(b) => b,
            Err(e) => {
                rec.note(format!("prompt error: {e}"));
                book.append(rec)?;
                return Err(e.into());
            }
        };
        rec.prompt_digest = Some(bundle.digest());
        match self.gateway.complete(&bundle) {
            Ok(c) => {
                rec.completion_text = Some(c.text.clone());
                Ok((c.text, rec))
            }
            Err(e) => {
                rec.note(format!("provider error: {e}"));
                book.append(rec)?;
                Err(e.into())
            }
        }
    }

    fn lint_batch(&self, batch: &AssertionBatch, module: &RtlModule, prior_names: Vec<String>) -> Vec<LintFinding> {
        let opts = LintOptions { prior_names, ..self.lint.clone() };
        lint(batch, Some(module), &self.sva_rules, &opts)
    }

    fn batch_record(&self, rec: &mut IterationRecord, batch: &AssertionBatch, findings: &[LintFinding]) {
        rec.batch_stats = Some(BatchStats::new(batch, findings));
        let residue = batch.code_residue().count();
        if residue > 0 {
            rec.note(format!("{residue} unparsed fragments"));
        }
    }
}

/// Output of the annotation call plus the SVA batches.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub annotations: Vec<TransactionAnnotation>,
    pub batches: Vec<AssertionBatch>,
    pub findings: Vec<Vec<LintFinding>>,
}

/// One annotation call. Unparseable output is noted and yields no transactions.
pub fn annotation_step(
    ctx: &FlowContext,
    module: &RtlModule,
    flow: FlowKind,
    book: &mut Booklog,
) -> Result<Vec<TransactionAnnotation>, FlowError> {
    let bundle = compose_annotation_prompt(module, &ctx.annotation_rules, ctx.budget, &ctx.prompt);
    let (text, mut rec) = ctx.call(book, flow, Step::AnnotationGen, ctx.annotation_rules.version, bundle)?;
    let annotations = match parse_annotations(&text, module) {
        Ok(set) => {
            if !set.skipped.is_empty() {
                rec.note(format!("{} non-annotation lines skipped", set.skipped.len()));
            }
            set.transactions
        }
        Err(e) => {
            rec.note(format!("annotations ignored: {e}"));
            Vec::new()
        }
    };
    book.append(rec)?;
    Ok(annotations)
}

/// One annotation call, then `n` independent SVA calls.
fn generate(
    ctx: &FlowContext,
    module: &RtlModule,
    n: usize,
    flow: FlowKind,
    book: &mut Booklog,
) -> Result<Generated, FlowError> {
    let annotations = annotation_step(ctx, module, flow, book)?;
    let mut out = Generated { annotations, batches: Vec::new(), findings: Vec::new() };
    for id in 1..=n {
        let bundle = compose_sva_prompt(module, &ctx.sva_rules, ctx.budget, &ctx.prompt);
        let (text, mut rec) = ctx.call(book, flow, Step::SvaGen, ctx.sva_rules.version, bundle)?;
        let batch = parse_batch(&strip_fences(&text), Some(module)).with_id(id);
        // Names reused by an identical assertion are merged later, not reported.
        let prior: Vec<String> = out
            .batches
            .iter()
            .flat_map(|b| &b.assertions)
            .filter(|e| {
                !batch.assertions.iter().any(|a| a.declared_name == e.declared_name && normalized_key(a) == normalized_key(e))
            })
            .map(|e| e.declared_name.clone())
            .collect();
        let findings = ctx.lint_batch(&batch, module, prior);
        ctx.batch_record(&mut rec, &batch, &findings);
        book.append(rec)?;
        out.batches.push(batch);
        out.findings.push(findings);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvaFlowOutcome {
    pub generated: Generated,
    pub merged: AssertionBatch,
    pub merged_findings: Vec<LintFinding>,
    /// `None` when the merged batch still has lint errors.
    pub ft: Option<FtArtifact>,
}

/// Annotation call, `n_batches` SVA calls, merge, testbench.
pub fn sva_flow(
    ctx: &FlowContext,
    module: &RtlModule,
    design_text: &str,
    n_batches: usize,
    book: &mut Booklog,
) -> Result<SvaFlowOutcome, FlowError> {
    let generated = generate(ctx, module, n_batches, FlowKind::Sva, book)?;
    let merged = dedup(&generated.batches);
    let merged_findings = ctx.lint_batch(&merged, module, Vec::new());
    let ft = match emit_ft(module, design_text, &merged, &generated.annotations, &ctx.sva_rules, &ctx.ft) {
        Ok(ft) => Some(ft),
        Err(ForgeError::LintErrorsPresent { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(SvaFlowOutcome { generated, merged, merged_findings, ft })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOutcome {
    pub batch: AssertionBatch,
    pub findings: Vec<LintFinding>,
    /// Present when an engine ran; requires a batch without lint errors.
    pub report: Option<FpvReport>,
    pub record_index: usize,
}

/// One rule-refinement iteration: generate, lint and optionally prove.
pub fn refine_iteration(
    ctx: &FlowContext,
    module: &RtlModule,
    design_text: &str,
    engine: Option<&Engine>,
    book: &mut Booklog,
) -> Result<RefineOutcome, FlowError> {
    let bundle = compose_sva_prompt(module, &ctx.sva_rules, ctx.budget, &ctx.prompt);
    let (text, mut rec) = ctx.call(book, FlowKind::Refine, Step::SvaGen, ctx.sva_rules.version, bundle)?;
    let batch = parse_batch(&strip_fences(&text), Some(module));
    let findings = ctx.lint_batch(&batch, module, Vec::new());
    ctx.batch_record(&mut rec, &batch, &findings);
    let mut report = None;
    if let Some(engine) = engine {
        if findings.iter().any(|f| f.severity == Severity::Error) {
            rec.note("not proven: lint errors");
        } else {
            let run = emit_ft(module, design_text, &batch, &[], &ctx.sva_rules, &ctx.ft)
                .map_err(FlowError::from)
                .and_then(|ft| engine.run(&ft).map_err(FlowError::from));
            match run {
                Ok(r) => {
                    rec.fpv_stats = Some(FpvStats::from(&r));
                    report = Some(r);
                }
                Err(e) => {
                    rec.note(format!("engine error: {e}"));
                    book.append(rec)?;
                    return Err(e);
                }
            }
        }
    }
    let record_index = book.append(rec)?;
    Ok(RefineOutcome { batch, findings, report, record_index })
}

/// Where the human-edited SVA of each design iteration comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EditSource {
    /// One edited-SVA file per iteration, consumed in order.
    Scripted(Vec<PathBuf>),
    /// Write `sva_iter<k>.sv` for editing and stop; continue with resume.
    Interactive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DesignOptions {
    pub n_batches: usize,
    pub convergence: ConvergenceOptions,
    pub edits: EditSource,
    pub resume: bool,
    /// Holds generated RTL, annotations and SVA for editing.
    pub work_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignOutcome {
    pub state: ConvergenceState,
    /// RTL iteration reached.
    pub iteration: usize,
    pub rtl_path: PathBuf,
    pub last_report: Option<FpvReport>,
}

/// Path of the SVA file written for editing after iteration `k`.
pub fn sva_edit_path(work_dir: &Path, k: usize) -> PathBuf {
    work_dir.join(format!("sva_iter{k}.sv"))
}

const ANNOTATIONS_FILE: &str = "annotations.txt";

/// Records of the latest design run: from its first RTL generation on.
fn current_run(records: &[IterationRecord]) -> &[IterationRecord] {
    let start = records
        .iter()
        .rposition(|r| r.flow == FlowKind::Design && r.step == Step::RtlGen && r.rtl_iteration == Some(1))
        .unwrap_or(records.len());
    &records[start..]
}

/// Iteration awaiting an SVA edit, read back from the booklog.
fn pending_edit(book: &Booklog, opts: &ConvergenceOptions) -> Result<usize, FlowError> {
    let run: Vec<IterationRecord> =
        current_run(book.records()).iter().filter(|r| r.flow == FlowKind::Design).cloned().collect();
    let last = run
        .last()
        .ok_or_else(|| FlowError::Scenario("the booklog holds no design loop to resume".into()))?;
    let state = convergence(&run, opts);
    if last.step != Step::Prove || state.status != Verdict::Running {
        return Err(FlowError::Scenario(format!(
            "the design loop is not waiting for an SVA edit (status {})",
            state.status.as_str()
        )));
    }
    last.rtl_iteration.ok_or_else(|| FlowError::Scenario("design record without an RTL iteration".into()))
}

/// Spec to RTL to proof, with human SVA edits feeding RTL regeneration.
/// RTL prompts carry the spec, interface and SVA only, never earlier RTL.
/// The booklog is the resume token.
pub fn design_loop(
    ctx: &FlowContext,
    spec: &str,
    interface: &str,
    engine: &Engine,
    book: &mut Booklog,
    opts: &DesignOptions,
) -> Result<DesignOutcome, FlowError> {
    let dir = &opts.work_dir;
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let (mut k, mut sva) = if opts.resume {
        let k = pending_edit(book, &opts.convergence)?;
        (k + 1, Some(read(&sva_edit_path(dir, k))?))
    } else {
        (1, None)
    };
    let tag = |mut r: IterationRecord, k: usize| {
        r.rtl_iteration = Some(k);
        r
    };

    loop {
        let bundle = compose_rtl_prompt(spec, interface, sva.as_deref(), &ctx.rtl_rules, ctx.budget, &ctx.prompt);
        let (text, mut rec) = ctx.call(book, FlowKind::Design, Step::RtlGen, ctx.rtl_rules.version, bundle)?;
        let rtl = strip_fences(&text);
        let rtl_path = dir.join(format!("rtl_iter{k}.sv"));
        write(&rtl_path, &rtl)?;
        let parsed = parse_module(&SourceFile::new(&rtl_path, rtl.clone()));
        if let Err(e) = &parsed {
            rec.note(format!("generated RTL does not parse: {e}"));
        }
        book.append(tag(rec, k))?;

        let mut prove = tag(IterationRecord::new(FlowKind::Design, Step::Prove, ctx.sva_rules.version), k);
        let mut report = None;
        let current_sva = match &parsed {
            Ok(module) => {
                let batch = match &sva {
                    Some(text) => parse_batch(text, Some(module)),
                    None => {
                        let g = generate(ctx, module, opts.n_batches, FlowKind::Design, book)?;
                        write(&dir.join(ANNOTATIONS_FILE), &render_annotations(&g.annotations))?;
                        dedup(&g.batches)
                    }
                };
                let annotations = std::fs::read_to_string(dir.join(ANNOTATIONS_FILE))
                    .ok()
                    .and_then(|t| parse_annotations(&t, module).ok())
                    .map(|s| s.transactions)
                    .unwrap_or_default();
                let findings = ctx.lint_batch(&batch, module, Vec::new());
                prove.batch_stats = Some(BatchStats::new(&batch, &findings));
                let forced = FtOptions { force: true, ..ctx.ft.clone() };
                let ft = emit_ft(module, &rtl, &batch, &annotations, &ctx.sva_rules, &forced)?;
                match engine.run(&ft) {
                    Ok(r) => {
                        prove.fpv_stats = Some(FpvStats::from(&r));
                        report = Some(r);
                    }
                    Err(e) => {
                        prove.note(format!("engine error: {e}"));
                        book.append(prove)?;
                        return Err(e.into());
                    }
                }
                batch.render()
            }
            Err(_) => {
                prove.fpv_stats = Some(FpvStats::default());
                sva.clone().unwrap_or_default()
            }
        };
        book.append(prove)?;

        let run: Vec<IterationRecord> =
            current_run(book.records()).iter().filter(|r| r.flow == FlowKind::Design).cloned().collect();
        let state = convergence(&run, &opts.convergence);
        if state.status != Verdict::Running {
            return Ok(DesignOutcome { state, iteration: k, rtl_path, last_report: report });
        }

        match &opts.edits {
            EditSource::Scripted(files) => {
                let f = files
                    .get(k - 1)
                    .ok_or_else(|| FlowError::Scenario(format!("no edited SVA supplied for iteration {k}")))?;
                sva = Some(read(f)?);
                let mut rec = tag(IterationRecord::new(FlowKind::Design, Step::HumanEdit, ctx.sva_rules.version), k);
                rec.note(format!("edited SVA from {}", f.display()));
                book.append(rec)?;
            }
            EditSource::Interactive => {
                let mut text = String::new();
                if let Some(r) = &report {
                    for n in r.failing() {
                        text.push_str(&format!("// failing: {n}\n"));
                    }
                    if !text.is_empty() {
                        text.push('\n');
                    }
                }
                text.push_str(&current_sva);
                write(&sva_edit_path(dir, k), &text)?;
                return Ok(DesignOutcome { state, iteration: k, rtl_path, last_report: report });
            }
        }
        k += 1;
    }
}
