use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fx(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel).display().to_string()
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sva-forge"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("SVA_FORGE_API_KEY")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn text(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

fn gen_t23(out: &Path) -> Output {
    let t23 = fx("batches/t23.sva");
    run(&["gen", &fx("fifo.sv"), "--script", &fx("batches/fifo.annotation"), "--script", &t23], out)
}

#[test]
fn usage_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["frobnicate"], dir.path())), 3);
    assert_eq!(code(&run(&["gen"], dir.path())), 3);
    assert_eq!(code(&run(&["prove", "--engine", "maybe"], dir.path())), 3);
    let help = run(&["--help"], dir.path());
    assert_eq!(code(&help), 0);
    assert!(text(&help).contains("loop"));
}

#[test]
fn gen_without_provider_requires_script() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["gen", &fx("fifo.sv")], dir.path());
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--script"));
}

#[test]
fn http_provider_without_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("http.conf");
    std::fs::write(&cfg, "provider|http\nendpoint|http://127.0.0.1:9/v1/chat/completions\n").unwrap();
    let o = run(&["annotate", &fx("fifo.sv"), "--config", cfg.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("SVA_FORGE_API_KEY"));
}

#[test]
fn unreachable_provider_is_a_service_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("http.conf");
    std::fs::write(&cfg, "provider|http\nendpoint|http://127.0.0.1:9/v1/chat/completions\nmax_retries|0\ntimeout|2\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_sva-forge"))
        .args(["annotate", &fx("fifo.sv"), "--config", cfg.to_str().unwrap(), "--out"])
        .arg(dir.path().join("out"))
        .env("SVA_FORGE_API_KEY", "test-key")
        .output()
        .unwrap();
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bad_config_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.conf");
    std::fs::write(&cfg, "depth|deep\n").unwrap();
    assert_eq!(code(&run(&["cost", "--config", cfg.to_str().unwrap()], dir.path())), 3);
}

#[test]
fn lint_t16_batch() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["lint", &fx("batches/t16.sva"), "--rtl", &fx("fifo_r.sv")], dir.path());
    assert_eq!(code(&o), 1);
    assert!(text(&o).contains("warning [WT/stale_read_in_next_cycle]"));
    let j = json(&run(&["lint", &fx("batches/t16.sva"), "--rtl", &fx("fifo_r.sv"), "--json"], dir.path()));
    assert_eq!(j["errors"], 1);
    assert_eq!(j["warnings"], 1);
    assert!(text(&o).contains("1 errors, 1 warnings"));
}

#[test]
fn diff_human_and_json_agree() {
    let dir = tempfile::tempdir().unwrap();
    let args = [fx("batches/t23.sva"), fx("batches/t24.sva")];
    let h = text(&run(&["diff", &args[0], &args[1]], dir.path()));
    let j = json(&run(&["diff", &args[0], &args[1], "--json"], dir.path()));
    for key in ["identical", "variants", "only_a", "only_b"] {
        assert!(h.contains(&format!("{key}: {}", j[key])), "{key}");
    }
    assert_eq!(j["identical"], 2);
}

#[test]
fn gen_writes_only_below_out_and_booklog() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let book = dir.path().join("elsewhere/book.jsonl");
    let t23 = fx("batches/t23.sva");
    let o = run(
        &["gen", &fx("fifo.sv"), "--batches", "2", "--booklog", book.to_str().unwrap(), "--script", &fx("batches/fifo.annotation"), "--script", &t23, "--script", &t23],
        &out,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(&book).unwrap().lines().count(), 4);
    assert!(!out.join("booklog.jsonl").exists());
    let mut top: Vec<String> =
        std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    top.sort();
    assert_eq!(top, ["elsewhere", "out"]);
    for f in ["fifo.sv", "fifo_prop.sv", "bind.sv", "fifo.sby", "manifest.json"] {
        assert!(out.join("ft/fifo").join(f).is_file(), "{f}");
    }
}

#[test]
fn gen_with_lint_errors_exits_1_without_testbench() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["gen", &fx("fifo_r.sv"), "--script", &fx("batches/fifo.annotation"), "--script", &fx("lint/t02_wrong_keyword.sva")],
        dir.path(),
    );
    assert_eq!(code(&o), 1);
    assert!(dir.path().join("sva/fifo.sva").is_file());
    assert!(!dir.path().join("ft").exists());
}

#[test]
fn prove_failures_exit_2_and_are_booked() {
    let dir = tempfile::tempdir().unwrap();
    let t24 = fx("batches/t24.sva");
    let o = run(&["gen", &fx("fifo.sv"), "--script", &fx("batches/fifo.annotation"), "--script", &t24], dir.path());
    assert_eq!(code(&o), 0);
    let p = run(&["prove", "--engine", "mock", "--script", &fx("engine/t24.script")], dir.path());
    assert_eq!(code(&p), 2);
    assert!(text(&p).contains("failing  as__out_rdy_low_only_when_empty"));
    let r = run(&["report"], dir.path());
    assert!(text(&r).contains("fails as__out_rdy_low_only_when_empty"));
    let j = json(&run(&["report", "--json"], dir.path()));
    assert_eq!(j["convergence"]["sva"]["status"], "running");
}

#[test]
fn prove_needs_a_testbench_and_an_engine() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["prove", "--engine", "mock", "--script", &fx("engine/all_proven.script")], dir.path())), 3);
    assert_eq!(code(&gen_t23(dir.path())), 0);
    assert_eq!(code(&run(&["prove", "--engine", "mock"], dir.path())), 3);
    let cfg = dir.path().join("engine.conf");
    std::fs::write(&cfg, "engine_cmd|no-such-engine-binary -f\n").unwrap();
    assert_eq!(code(&run(&["prove", "--engine", "external", "--config", cfg.to_str().unwrap()], dir.path())), 4);
}

#[test]
fn ft_init_has_no_assertions() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["ft", "init", &fx("ptw.sv"), "--json"], dir.path());
    assert_eq!(code(&o), 0);
    let j = json(&o);
    assert_eq!(j["assertions"].as_array().unwrap().len(), 0);
    let prop = std::fs::read_to_string(dir.path().join("ft/ptw/ptw_prop.sv")).unwrap();
    assert!(prop.contains("default clocking") && !prop.contains("assert property"));
}

#[test]
fn annotate_writes_audit_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["annotate", &fx("fifo.sv"), "--script", &fx("batches/fifo.annotation")], dir.path());
    assert_eq!(code(&o), 0);
    let written = std::fs::read_to_string(dir.path().join("annotations/fifo.txt")).unwrap();
    assert!(written.starts_with("transaction push:"));
}

#[test]
fn refine_loop_stops_on_full_proof() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "loop", "refine", &fx("fifo.sv"), "--iterations", "5", "--engine", "mock",
            "--engine-script", &fx("engine/t24.script"), "--engine-script", &fx("engine/all_proven.script"),
            "--script", &fx("batches/t24.sva"), "--script", &fx("batches/t23.sva"), "--json",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let j = json(&o);
    assert_eq!(j["status"], "converged_full_proof");
    assert_eq!(j["iterations"].as_array().unwrap().len(), 2);
    assert_eq!(j["iterations"][0]["proof"]["failing"], 1);
}

#[test]
fn refine_loop_without_engine_reports_lint() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["loop", "refine", &fx("fifo_r.sv"), "--script", &fx("lint/t01_unprefixed_internal.sva")], dir.path());
    assert_eq!(code(&o), 1);
    assert!(text(&o).contains("[IN/unprefixed_internal]"));
    assert!(text(&o).contains("status: running"));
}

#[test]
fn design_loop_pauses_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let base = [
        "loop", "design", "--spec", &fx("design/spec.txt"), "--interface", &fx("design/interface.sv"), "--engine", "mock",
    ]
    .map(String::from);
    let mut first: Vec<String> = base.to_vec();
    first.extend(["--engine-script".into(), fx("design/prove_iter1.script")]);
    for s in ["rtl_v1.txt", "annotation.txt", "sva_batch.txt", "sva_batch.txt", "sva_batch.txt"] {
        first.extend(["--script".into(), fx(&format!("design/{s}"))]);
    }
    let o = run(&first.iter().map(String::as_str).collect::<Vec<_>>(), dir.path());
    assert_eq!(code(&o), 0);
    assert!(text(&o).contains("status: running"));
    let edit = dir.path().join("design/sva_iter1.sv");
    assert!(std::fs::read_to_string(&edit).unwrap().starts_with("// failing: as__in_rdy_when_not_full"));
    std::fs::copy(fx("design/sva_edited_1.sv"), &edit).unwrap();

    let mut second: Vec<String> = base.to_vec();
    second.extend(
        ["--resume", "--engine-script", &fx("design/prove_iter2.script"), "--script", &fx("design/rtl_v2.txt"), "--json"]
            .map(String::from),
    );
    let o = run(&second.iter().map(String::as_str).collect::<Vec<_>>(), dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let j = json(&o);
    assert_eq!(j["status"], "converged_full_proof");
    assert_eq!(j["rtl_iterations"], 2);
    // Nothing left to resume.
    assert_eq!(code(&run(&second.iter().map(String::as_str).collect::<Vec<_>>(), dir.path())), 3);
}

#[test]
fn cost_is_zero_for_mock_rate() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&gen_t23(dir.path())), 0);
    let j = json(&run(&["cost", "--json"], dir.path()));
    assert_eq!(j["calls"], 2);
    assert_eq!(j["total_usd"], 0.0);
}
