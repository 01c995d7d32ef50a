use std::path::PathBuf;
use std::sync::Arc;

use sva_forge::flow::{
    convergence, design_loop, export_table, refine_iteration, sva_edit_path, sva_flow, Booklog, ConvergenceOptions,
    DesignOptions, EditSource, FlowContext, FlowKind, Step, Verdict,
};
use sva_forge::forge::FtOptions;
use sva_forge::fpv::{Engine, EngineScript};
use sva_forge::llm::{CostLedger, Gateway, MockProvider, ProviderConfig};
use sva_forge::prompt::{Budget, PromptOptions};
use sva_forge::rtl::{parse_module, RtlModule, SourceFile};
use sva_forge::rules::{builtin_annotation_rules, builtin_rtl_rules, builtin_rules};
use sva_forge::sva::{parse_batch, LintOptions};

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

fn read(rel: &str) -> String {
    std::fs::read_to_string(fixture(rel)).unwrap()
}

fn fifo() -> (RtlModule, String) {
    let text = read("fifo.sv");
    (parse_module(&SourceFile::new("fifo.sv", text.clone())).unwrap(), text)
}

fn gateway(responses: &[&str]) -> (Gateway, Arc<MockProvider>) {
    let mock = Arc::new(MockProvider::from_texts(responses.iter().map(|r| read(r)).collect()));
    (Gateway::new(Box::new(mock.clone()), ProviderConfig::mock(), CostLedger::in_memory()), mock)
}

fn ctx(gateway: &Gateway) -> FlowContext<'_> {
    FlowContext {
        gateway,
        budget: Budget::default(),
        prompt: PromptOptions::default(),
        sva_rules: builtin_rules(),
        annotation_rules: builtin_annotation_rules(),
        rtl_rules: builtin_rtl_rules(),
        lint: LintOptions::default(),
        ft: FtOptions::default(),
    }
}

fn engine(scripts: &[&str]) -> Engine {
    Engine::mock(scripts.iter().map(|s| EngineScript::parse(&read(s)).unwrap()).collect())
}

#[test]
fn sva_flow_end_to_end() {
    let (m, text) = fifo();
    let (gw, mock) = gateway(&["batches/fifo.annotation", "batches/t23.sva", "batches/t24.sva", "batches/t23.sva"]);
    let mut book = Booklog::in_memory();
    let out = sva_flow(&ctx(&gw), &m, &text, 3, &mut book).unwrap();
    assert_eq!(mock.calls(), 4);
    assert_eq!(book.records().len(), 4);
    assert_eq!(book.records()[0].step, Step::AnnotationGen);
    assert!(book.records()[1..].iter().all(|r| r.step == Step::SvaGen && r.batch_stats.as_ref().unwrap().n_assertions == 8));
    assert_eq!(out.generated.annotations.len(), 1);
    assert_eq!(out.merged.len(), 14);
    let ft = out.ft.unwrap();
    // Round trip: the merged batch comes back out of the property module.
    let back = parse_batch(&ft.property_module, Some(&m));
    assert_eq!(back.len(), out.merged.len());
    for (a, b) in back.assertions.iter().zip(&out.merged.assertions) {
        assert_eq!((&a.name, &a.expression, &a.loop_wrapper), (&b.name, &b.expression, &b.loop_wrapper));
    }
    assert!(back.code_residue().all(|r| !r.text.contains("assert")));
    let report = engine(&["engine/t24.script"]).run(&ft).unwrap();
    assert_eq!(report.failing(), ["as__out_rdy_low_only_when_empty"]);
}

#[test]
fn refine_iterations_and_convergence() {
    let (m, text) = fifo();
    let (gw, _) = gateway(&["batches/t24.sva", "batches/t23.sva"]);
    let c = ctx(&gw);
    let eng = engine(&["engine/t24.script", "engine/all_proven.script"]);
    let mut book = Booklog::in_memory();
    let first = refine_iteration(&c, &m, &text, Some(&eng), &mut book).unwrap();
    assert_eq!(first.report.unwrap().failing().len(), 1);
    assert_eq!(convergence(book.records(), &ConvergenceOptions::default()).status, Verdict::Running);
    let second = refine_iteration(&c, &m, &text, Some(&eng), &mut book).unwrap();
    assert!(second.report.unwrap().full_proof());
    assert_eq!(convergence(book.records(), &ConvergenceOptions::default()).status, Verdict::ConvergedFullProof);
    let table = export_table(book.records());
    assert!(table.contains("1\tyes\t8\t1\t"));
    assert!(table.contains("2\tyes\t8\t0\t"));
}

#[test]
fn refine_error_is_booked() {
    let (m, text) = fifo();
    let (gw, _) = gateway(&[]);
    let mut book = Booklog::in_memory();
    assert!(refine_iteration(&ctx(&gw), &m, &text, None, &mut book).is_err());
    assert_eq!(book.records().len(), 1);
    assert!(book.records()[0].notes.contains("provider error"));
}

const DESIGN_SCRIPT: [&str; 6] = [
    "design/rtl_v1.txt",
    "design/annotation.txt",
    "design/sva_batch.txt",
    "design/sva_batch.txt",
    "design/sva_batch.txt",
    "design/rtl_v2.txt",
];

#[test]
fn scripted_design_loop_converges_in_two_generations() {
    let (gw, mock) = gateway(&DESIGN_SCRIPT);
    let dir = tempfile::tempdir().unwrap();
    let mut book = Booklog::in_memory();
    let opts = DesignOptions {
        n_batches: 3,
        convergence: ConvergenceOptions::default(),
        edits: EditSource::Scripted(vec![fixture("design/sva_edited_1.sv")]),
        resume: false,
        work_dir: dir.path().to_path_buf(),
    };
    let eng = engine(&["design/prove_iter1.script", "design/prove_iter2.script"]);
    let out = design_loop(&ctx(&gw), &read("design/spec.txt"), &read("design/interface.sv"), &eng, &mut book, &opts).unwrap();
    assert_eq!(out.state.status, Verdict::ConvergedFullProof);
    assert_eq!(out.iteration, 2);
    let rtl_calls: Vec<usize> = book
        .records()
        .iter()
        .filter(|r| r.step != Step::Prove && r.step != Step::HumanEdit)
        .enumerate()
        .filter(|(_, r)| r.step == Step::RtlGen)
        .map(|(i, _)| i)
        .collect();
    assert_eq!(rtl_calls, [0, 5]);
    let prompts = mock.prompts();
    assert_eq!(prompts.len(), 6);
    for i in rtl_calls {
        assert!(!prompts[i].contains("SENTINEL_RTL_V1_7f3a"), "RTL prompt {i} carries earlier RTL");
    }
    assert!(prompts[5].contains("as__no_push_when_full"));
    assert!(book.records().iter().all(|r| r.flow == FlowKind::Design));
    assert!(out.last_report.unwrap().full_proof());
}

#[test]
fn design_loop_plateau() {
    let (gw, _) = gateway(&DESIGN_SCRIPT);
    let dir = tempfile::tempdir().unwrap();
    let mut book = Booklog::in_memory();
    let opts = DesignOptions {
        n_batches: 3,
        convergence: ConvergenceOptions::default(),
        edits: EditSource::Scripted(vec![fixture("design/sva_batch.txt")]),
        resume: false,
        work_dir: dir.path().to_path_buf(),
    };
    let eng = engine(&["design/prove_stuck.script"]);
    let out = design_loop(&ctx(&gw), &read("design/spec.txt"), &read("design/interface.sv"), &eng, &mut book, &opts).unwrap();
    assert_eq!(out.state.status, Verdict::ConvergedPlateau);
    assert_eq!(out.iteration, 2);
}

#[test]
fn design_loop_exhausts_after_max_iters() {
    let (gw, _) = gateway(&DESIGN_SCRIPT[..5]);
    let dir = tempfile::tempdir().unwrap();
    let mut book = Booklog::in_memory();
    let opts = DesignOptions {
        n_batches: 3,
        convergence: ConvergenceOptions { plateau_window: 2, max_iters: 1 },
        edits: EditSource::Scripted(vec![]),
        resume: false,
        work_dir: dir.path().to_path_buf(),
    };
    let eng = engine(&["design/prove_iter1.script"]);
    let out = design_loop(&ctx(&gw), &read("design/spec.txt"), &read("design/interface.sv"), &eng, &mut book, &opts).unwrap();
    assert_eq!(out.state.status, Verdict::Exhausted);
}

#[test]
fn refine_flags_unprefixed_internals() {
    let text = read("fifo_r.sv");
    let m = parse_module(&SourceFile::new("fifo_r.sv", text.clone())).unwrap();
    let (gw, _) = gateway(&["lint/t01_unprefixed_internal.sva"]);
    let mut book = Booklog::in_memory();
    let out = refine_iteration(&ctx(&gw), &m, &text, None, &mut book).unwrap();
    assert_eq!(out.record_index, 1);
    let stats = book.records()[0].batch_stats.as_ref().unwrap();
    assert!(stats.n_lint_errors >= 1);
    assert!(stats.by_category.contains_key("IN"));
}

#[test]
fn interactive_design_loop_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let book_path = dir.path().join("book.jsonl");
    let work = dir.path().join("design");
    let mut opts = DesignOptions {
        n_batches: 3,
        convergence: ConvergenceOptions::default(),
        edits: EditSource::Interactive,
        resume: false,
        work_dir: work.clone(),
    };
    let spec = read("design/spec.txt");
    let iface = read("design/interface.sv");
    {
        let (gw, _) = gateway(&DESIGN_SCRIPT[..5]);
        let mut book = Booklog::open(&book_path).unwrap();
        let eng = engine(&["design/prove_iter1.script"]);
        let out = design_loop(&ctx(&gw), &spec, &iface, &eng, &mut book, &opts).unwrap();
        assert_eq!(out.state.status, Verdict::Running);
        let written = std::fs::read_to_string(sva_edit_path(&work, 1)).unwrap();
        assert!(written.starts_with("// failing: as__in_rdy_when_not_full\n"));
    }
    std::fs::copy(fixture("design/sva_edited_1.sv"), sva_edit_path(&work, 1)).unwrap();
    opts.resume = true;
    let (gw, mock) = gateway(&DESIGN_SCRIPT[5..]);
    let mut book = Booklog::open(&book_path).unwrap();
    let eng = engine(&["design/prove_iter2.script"]);
    let out = design_loop(&ctx(&gw), &spec, &iface, &eng, &mut book, &opts).unwrap();
    assert_eq!((out.state.status, out.iteration), (Verdict::ConvergedFullProof, 2));
    assert!(!mock.prompts()[0].contains("SENTINEL_RTL_V1_7f3a"));
    assert!(design_loop(&ctx(&gw), &spec, &iface, &eng, &mut book, &opts).is_err());
}
