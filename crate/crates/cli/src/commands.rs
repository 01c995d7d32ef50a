use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sva_forge::flow::{
    annotation_step, convergence, design_loop, export_table, refine_iteration, sva_edit_path, sva_flow,
    ConvergenceOptions, DesignOptions, EditSource, FlowKind, FpvStats, IterationRecord, Step, Verdict,
};
use sva_forge::forge::{emit_ft, ft_dir, render_annotations, FtArtifact};
use sva_forge::fpv::{coverage_ratio, ingest_coverage, FpvReport, ProofStatus};
use sva_forge::llm::CostLedger;
use sva_forge::sva::{diff_batches, lint as lint_batch, parse_batch, AssertionBatch, LintFinding, Severity};

use crate::app::{
    read_file, write_file, App, CliError, Outcome, PromptSwitches, EXIT_FPV, EXIT_LINT, EXIT_OK,
};

fn error_count(findings: &[LintFinding]) -> usize {
    findings.iter().filter(|f| f.severity == Severity::Error).count()
}

fn warning_count(findings: &[LintFinding]) -> usize {
    findings.iter().filter(|f| f.severity == Severity::Warning).count()
}

fn findings_json(findings: &[LintFinding]) -> Value {
    serde_json::to_value(findings).expect("findings serialize")
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

pub fn ft_init(app: &App, rtl: &Path, bmc: bool) -> Result<Outcome, CliError> {
    let module = app.parse_rtl(rtl)?;
    let design_text = read_file(rtl)?;
    let rs = app.sva_rules()?;
    let art = emit_ft(&module, &design_text, &AssertionBatch::default(), &[], &rs, &app.ft_options(bmc))?;
    let dir = art.write_to(&ft_dir(&app.out, &module.name))?;
    Ok(Outcome::ok(
        format!("wrote {} (no assertions)\n", dir.display()),
        json!({ "design": module.name, "ft_dir": path_str(&dir), "assertions": art.assertion_names }),
    ))
}

pub fn annotate(app: &App, rtl: &Path, scripts: &[PathBuf]) -> Result<Outcome, CliError> {
    let module = app.parse_rtl(rtl)?;
    let gateway = app.gateway(scripts)?;
    let ctx = app.flow_context(&gateway, Some(&module), PromptSwitches::default())?;
    let mut book = app.booklog()?;
    let transactions = annotation_step(&ctx, &module, FlowKind::Sva, &mut book)?;
    let text = render_annotations(&transactions);
    let path = app.out.join("annotations").join(format!("{}.txt", module.name));
    write_file(&path, &text)?;
    let mut human = text.clone();
    if transactions.is_empty() {
        human.push_str("no transactions recognised; see the booklog notes\n");
    }
    let _ = writeln!(human, "wrote {}", path.display());
    Ok(Outcome::ok(human, json!({ "design": module.name, "path": path_str(&path), "transactions": transactions })))
}

pub struct GenOptions {
    pub batches: usize,
    pub strip: bool,
    pub fsm_strategy: bool,
    pub bmc: bool,
    pub scripts: Vec<PathBuf>,
}

pub fn gen(app: &App, rtl: &Path, o: &GenOptions) -> Result<Outcome, CliError> {
    let module = app.parse_rtl(rtl)?;
    let design_text = read_file(rtl)?;
    let gateway = app.gateway(&o.scripts)?;
    let sw = PromptSwitches { strip: o.strip, fsm_strategy: o.fsm_strategy, bmc: o.bmc };
    let ctx = app.flow_context(&gateway, Some(&module), sw)?;
    let mut book = app.booklog()?;
    let out = sva_flow(&ctx, &module, &design_text, o.batches, &mut book)?;

    let sva_path = app.out.join("sva").join(format!("{}.sva", module.name));
    write_file(&sva_path, &out.merged.render())?;
    let ann_path = app.out.join("annotations").join(format!("{}.txt", module.name));
    write_file(&ann_path, &render_annotations(&out.generated.annotations))?;

    let mut human = String::new();
    let mut batches = Vec::new();
    for (b, f) in out.generated.batches.iter().zip(&out.generated.findings) {
        let _ = writeln!(
            human,
            "batch {}: {} assertions, {} errors, {} warnings",
            b.id,
            b.len(),
            error_count(f),
            warning_count(f)
        );
        batches.push(json!({ "id": b.id, "assertions": b.len(), "errors": error_count(f), "warnings": warning_count(f) }));
    }
    let errors = error_count(&out.merged_findings);
    let _ = writeln!(
        human,
        "merged: {} assertions, {} errors, {} warnings",
        out.merged.len(),
        errors,
        warning_count(&out.merged_findings)
    );
    for f in &out.merged_findings {
        let _ = writeln!(human, "  {f}");
    }
    let _ = writeln!(human, "wrote {}", sva_path.display());
    let ft = match &out.ft {
        Some(art) => {
            let dir = art.write_to(&ft_dir(&app.out, &module.name))?;
            let _ = writeln!(human, "wrote {}", dir.display());
            Some(path_str(&dir))
        }
        None => {
            let _ = writeln!(human, "no testbench emitted: fix the lint errors in {} and run `lint`", sva_path.display());
            None
        }
    };
    Ok(Outcome {
        code: if errors > 0 { EXIT_LINT } else { EXIT_OK },
        human,
        json: json!({
            "design": module.name,
            "batches": batches,
            "merged": { "assertions": out.merged.len(), "names": out.merged.names(), "path": path_str(&sva_path) },
            "findings": findings_json(&out.merged_findings),
            "ft_dir": ft,
            "booklog_records": book.records().len(),
        }),
    })
}

pub fn lint(app: &App, sva: &Path, rtl: Option<&Path>) -> Result<Outcome, CliError> {
    let module = rtl.map(|p| app.parse_rtl(p)).transpose()?;
    let batch = parse_batch(&read_file(sva)?, module.as_ref());
    let rs = app.sva_rules()?;
    let findings = lint_batch(&batch, module.as_ref(), &rs, &app.lint_options());
    let (errors, warnings) = (error_count(&findings), warning_count(&findings));
    let mut human = String::new();
    for f in &findings {
        let _ = writeln!(human, "{f}");
    }
    let residue: Vec<_> = batch.code_residue().collect();
    for r in &residue {
        let _ = writeln!(human, "{}: not an assertion, skipped: {}", r.line, r.text.trim());
    }
    let _ = writeln!(human, "{} assertions, {errors} errors, {warnings} warnings", batch.len());
    Ok(Outcome {
        code: if errors > 0 { EXIT_LINT } else { EXIT_OK },
        human,
        json: json!({
            "assertions": batch.len(),
            "errors": errors,
            "warnings": warnings,
            "findings": findings_json(&findings),
            "unparsed": residue.iter().map(|r| json!({ "line": r.line, "text": r.text })).collect::<Vec<_>>(),
        }),
    })
}

/// The testbench named by `--ft`, or the only one under `<out>/ft`.
fn find_ft(app: &App, ft: Option<&Path>) -> Result<PathBuf, CliError> {
    if let Some(p) = ft {
        return Ok(p.to_path_buf());
    }
    let root = app.out.join("ft");
    let dirs: Vec<PathBuf> = std::fs::read_dir(&root)
        .map(|rd| rd.filter_map(Result::ok).map(|e| e.path()).filter(|p| p.join("manifest.json").is_file()).collect())
        .unwrap_or_default();
    match dirs.as_slice() {
        [one] => Ok(one.clone()),
        [] => Err(CliError::usage(format!("no testbench under {}; run `gen` or `ft init` first", root.display()))),
        _ => Err(CliError::usage(format!("several testbenches under {}; choose one with --ft", root.display()))),
    }
}

fn report_lines(r: &FpvReport) -> String {
    let mut s = String::new();
    if !r.compiled {
        s.push_str("compile failed\n");
    }
    for (name, status) in &r.per_assertion {
        let word = match status {
            ProofStatus::Proven => "proven",
            ProofStatus::Failing => "failing",
            ProofStatus::Unknown => "unknown",
        };
        let _ = writeln!(s, "{word:<8} {name}");
        if let Some(cex) = r.cex_summaries.get(name) {
            let _ = writeln!(s, "         trace: {cex}");
        }
    }
    let _ = writeln!(
        s,
        "{} proven, {} failing, {} unknown",
        r.count(ProofStatus::Proven),
        r.count(ProofStatus::Failing),
        r.count(ProofStatus::Unknown)
    );
    s
}

pub fn prove(app: &App, external: bool, scripts: &[PathBuf], ft: Option<&Path>) -> Result<Outcome, CliError> {
    let dir = find_ft(app, ft)?;
    let art = FtArtifact::read_from(&dir)?;
    let engine = app.engine(external, scripts)?;
    let report = engine.run(&art)?;
    let report_path = dir.join("fpv_report.json");
    write_file(&report_path, &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))?;

    let mut book = app.booklog()?;
    let mut rec = IterationRecord::new(FlowKind::Sva, Step::Prove, app.sva_rules()?.version);
    rec.fpv_stats = Some(FpvStats::from(&report));
    rec.note(format!("{} on {}", report.engine, dir.display()));
    book.append(rec)?;

    let failed = !report.compiled || report.count(ProofStatus::Failing) > 0;
    Ok(Outcome {
        code: if failed { EXIT_FPV } else { EXIT_OK },
        human: report_lines(&report),
        json: json!({
            "design": art.design,
            "compiled": report.compiled,
            "proven": report.count(ProofStatus::Proven),
            "failing": report.count(ProofStatus::Failing),
            "unknown": report.count(ProofStatus::Unknown),
            "per_assertion": report.per_assertion,
            "cex_summaries": report.cex_summaries,
            "engine": report.engine,
            "report": path_str(&report_path),
        }),
    })
}

fn convergence_options(app: &App) -> ConvergenceOptions {
    ConvergenceOptions { plateau_window: app.config.plateau_window, max_iters: app.config.max_iters }
}

fn flow_name(f: FlowKind) -> &'static str {
    match f {
        FlowKind::Refine => "refine",
        FlowKind::Sva => "sva",
        FlowKind::Design => "design",
    }
}

pub fn report(app: &App, coverage: Option<&[PathBuf]>) -> Result<Outcome, CliError> {
    let book = app.booklog()?;
    let records = book.records();
    let mut human = export_table(records);
    let rows: Vec<Value> = records
        .iter()
        .filter(|r| r.batch_stats.is_some() || r.fpv_stats.is_some())
        .map(|r| {
            json!({
                "index": r.index,
                "flow": flow_name(r.flow),
                "step": r.step,
                "compiled": r.fpv_stats.as_ref().map(|f| f.compiled),
                "assertions": r.batch_stats.as_ref().map(|b| b.n_assertions).or(r.fpv_stats.as_ref().map(FpvStats::total)),
                "failing": r.fpv_stats.as_ref().map(|f| f.n_failing),
                "failing_names": r.fpv_stats.as_ref().map(|f| f.failing.clone()).unwrap_or_default(),
                "by_category": r.batch_stats.as_ref().map(|b| b.by_category.clone()).unwrap_or_default(),
                "notes": r.notes,
            })
        })
        .collect();

    let mut status = serde_json::Map::new();
    for flow in [FlowKind::Refine, FlowKind::Sva, FlowKind::Design] {
        let of_flow: Vec<IterationRecord> = records.iter().filter(|r| r.flow == flow).cloned().collect();
        if of_flow.iter().any(|r| r.fpv_stats.is_some()) {
            let s = convergence(&of_flow, &convergence_options(app));
            let _ = writeln!(human, "{}: {} ({})", flow_name(flow), s.status.as_str(), s.reason);
            status.insert(flow_name(flow).into(), json!({ "status": s.status.as_str(), "reason": s.reason }));
        }
    }

    let mut cov = Value::Null;
    if let Some([base, new]) = coverage {
        let (b, n) = (ingest_coverage(base)?, ingest_coverage(new)?);
        let d = coverage_ratio(&b, &n)?;
        let _ = writeln!(human, "statement coverage ratio: {:.2}", d.statement);
        let _ = writeln!(human, "toggle coverage ratio: {:.2}", d.toggle);
        cov = json!({ "statement": d.statement, "toggle": d.toggle });
    }
    Ok(Outcome::ok(human, json!({ "records": rows, "convergence": status, "coverage": cov })))
}

pub struct RefineOptions {
    pub iterations: usize,
    /// `Some(true)` external engine, `Some(false)` mock, `None` lint only.
    pub engine: Option<bool>,
    pub engine_scripts: Vec<PathBuf>,
    pub strip: bool,
    pub fsm_strategy: bool,
    pub scripts: Vec<PathBuf>,
}

pub fn loop_refine(app: &App, rtl: &Path, o: &RefineOptions) -> Result<Outcome, CliError> {
    if o.iterations == 0 {
        return Err(CliError::usage("--iterations must be at least 1"));
    }
    let module = app.parse_rtl(rtl)?;
    let design_text = read_file(rtl)?;
    let gateway = app.gateway(&o.scripts)?;
    let engine = o.engine.map(|ext| app.engine(ext, &o.engine_scripts)).transpose()?;
    let mut book = app.booklog()?;
    let sw = PromptSwitches { strip: o.strip, fsm_strategy: o.fsm_strategy, bmc: false };
    let mut human = String::new();
    let mut iterations = Vec::new();
    let mut code = EXIT_OK;
    let mut state = None;
    for _ in 0..o.iterations {
        // Rules are reloaded so edits between iterations take effect.
        let ctx = app.flow_context(&gateway, Some(&module), sw)?;
        let r = refine_iteration(&ctx, &module, &design_text, engine.as_ref(), &mut book)?;
        let errors = error_count(&r.findings);
        let _ = write!(
            human,
            "T{}: rules v{}, {} assertions, {errors} errors, {} warnings",
            r.record_index,
            ctx.sva_rules.version,
            r.batch.len(),
            warning_count(&r.findings)
        );
        if let Some(rep) = &r.report {
            let _ = write!(human, ", {} proven, {} failing", rep.count(ProofStatus::Proven), rep.count(ProofStatus::Failing));
        }
        human.push('\n');
        for f in &r.findings {
            let _ = writeln!(human, "  {f}");
        }
        code = if errors > 0 {
            EXIT_LINT
        } else if r.report.as_ref().is_some_and(|rep| !rep.full_proof()) {
            EXIT_FPV
        } else {
            EXIT_OK
        };
        iterations.push(json!({
            "record": r.record_index,
            "rules_version": ctx.sva_rules.version,
            "assertions": r.batch.len(),
            "errors": errors,
            "warnings": warning_count(&r.findings),
            "findings": findings_json(&r.findings),
            "proof": r.report.as_ref().map(|rep| json!({
                "compiled": rep.compiled,
                "proven": rep.count(ProofStatus::Proven),
                "failing": rep.count(ProofStatus::Failing),
                "unknown": rep.count(ProofStatus::Unknown),
            })),
        }));
        let refine: Vec<IterationRecord> = book.records().iter().filter(|r| r.flow == FlowKind::Refine).cloned().collect();
        let s = convergence(&refine, &convergence_options(app));
        let done = s.status != Verdict::Running;
        state = Some(s);
        if done {
            break;
        }
    }
    let state = state.expect("at least one iteration ran");
    let _ = writeln!(human, "status: {} ({})", state.status.as_str(), state.reason);
    Ok(Outcome {
        code,
        human,
        json: json!({ "iterations": iterations, "status": state.status.as_str(), "reason": state.reason }),
    })
}

pub struct DesignArgs {
    pub spec: PathBuf,
    pub interface: PathBuf,
    pub batches: usize,
    pub external: bool,
    pub engine_scripts: Vec<PathBuf>,
    pub edits: Vec<PathBuf>,
    pub resume: bool,
    pub scripts: Vec<PathBuf>,
}

pub fn loop_design(app: &App, a: &DesignArgs) -> Result<Outcome, CliError> {
    let spec = read_file(&a.spec)?;
    let interface = read_file(&a.interface)?;
    let gateway = app.gateway(&a.scripts)?;
    let engine = app.engine(a.external, &a.engine_scripts)?;
    let ctx = app.flow_context(&gateway, None, PromptSwitches::default())?;
    let mut book = app.booklog()?;
    let work_dir = app.out.join("design");
    let opts = DesignOptions {
        n_batches: a.batches,
        convergence: convergence_options(app),
        edits: if a.edits.is_empty() { EditSource::Interactive } else { EditSource::Scripted(a.edits.clone()) },
        resume: a.resume,
        work_dir: work_dir.clone(),
    };
    let out = design_loop(&ctx, &spec, &interface, &engine, &mut book, &opts)?;
    let mut human = format!(
        "status: {} after {} RTL iteration(s) ({})\nrtl: {}\n",
        out.state.status.as_str(),
        out.iteration,
        out.state.reason,
        out.rtl_path.display()
    );
    if let Some(r) = &out.last_report {
        human.push_str(&report_lines(r));
    }
    let edit = (out.state.status == Verdict::Running).then(|| sva_edit_path(&work_dir, out.iteration));
    if let Some(p) = &edit {
        let _ = writeln!(human, "edit {} and rerun with --resume", p.display());
    }
    let code = match out.state.status {
        Verdict::ConvergedFullProof | Verdict::Running => EXIT_OK,
        Verdict::ConvergedPlateau | Verdict::Exhausted => EXIT_FPV,
    };
    Ok(Outcome {
        code,
        human,
        json: json!({
            "status": out.state.status.as_str(),
            "reason": out.state.reason,
            "rtl_iterations": out.iteration,
            "rtl": path_str(&out.rtl_path),
            "edit": edit.as_deref().map(path_str),
            "failing": out.last_report.as_ref().map(|r| r.failing()).unwrap_or_default(),
        }),
    })
}

pub fn diff(app: &App, a: &Path, b: &Path, rtl: Option<&Path>) -> Result<Outcome, CliError> {
    let module = rtl.map(|p| app.parse_rtl(p)).transpose()?;
    let ba = parse_batch(&read_file(a)?, module.as_ref());
    let bb = parse_batch(&read_file(b)?, module.as_ref());
    let d = diff_batches(&ba, &bb);
    Ok(Outcome::ok(
        format!("identical: {}\nvariants: {}\nonly_a: {}\nonly_b: {}\n", d.identical, d.variants, d.only_a, d.only_b),
        serde_json::to_value(d).expect("diff serializes"),
    ))
}

pub fn cost(app: &App) -> Result<Outcome, CliError> {
    let path = app.ledger_path();
    let ledger = CostLedger::open(&path)?;
    let entries = ledger.entries();
    let prompt: u64 = entries.iter().map(|e| e.prompt_tokens).sum();
    let completion: u64 = entries.iter().map(|e| e.completion_tokens).sum();
    let total = ledger.total_cost();
    Ok(Outcome::ok(
        format!("total: {total} USD over {} calls ({prompt} prompt + {completion} completion tokens)\n", entries.len()),
        json!({
            "total_usd": total.as_f64(),
            "calls": entries.len(),
            "prompt_tokens": prompt,
            "completion_tokens": completion,
        }),
    ))
}
