//! Formal testbench generation: property module, bind statement, engine
//! configuration and manifest.

mod annotation;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use annotation::{
    parse_annotations, render_annotations, AnnotationSet, Attribute, Interface, TransactionAnnotation,
};

use crate::rtl::{Direction, Port, RtlModule};
use crate::rules::RuleSet;
use crate::sva::{lint, parse_batch, AssertionBatch, LintOptions, Severity};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ForgeError {
    #[error("annotation line {line}: `{name}` is not a port of the design")]
    UnknownPort { name: String, line: usize },
    #[error("annotation line {line}: {message}")]
    MalformedAnnotation { line: usize, message: String },
    #[error("the batch has {count} lint errors, first: {first}")]
    LintErrorsPresent { count: usize, first: String },
    #[error("module `{design}` has no clock port")]
    NoClockPort { design: String },
    #[error("{path} does not match its manifest hash")]
    ManifestMismatch { path: String },
    #[error("cannot access {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineMode {
    /// Unbounded proof.
    Prove,
    /// Bounded model check.
    Bmc,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FtOptions {
    /// Emit even when the batch has lint errors.
    pub force: bool,
    /// Upper bound `N` of `##[1:N]` in liveness assertions.
    pub liveness_depth: u32,
    pub mode: EngineMode,
    pub depth: u32,
}

impl Default for FtOptions {
    fn default() -> Self {
        FtOptions { force: false, liveness_depth: 16, mode: EngineMode::Prove, depth: 20 }
    }
}

/// A complete formal testbench for one design.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FtArtifact {
    pub design: String,
    pub design_text: String,
    pub property_module: String,
    pub bind: String,
    pub engine_config: String,
    /// Every assertion and assumption in the property module.
    pub assertion_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub design: String,
    pub files: Vec<ManifestEntry>,
    pub assertions: Vec<String>,
}

impl FtArtifact {
    pub fn prop_name(&self) -> String {
        format!("{}_prop", self.design)
    }

    pub fn design_file(&self) -> String {
        format!("{}.sv", self.design)
    }

    pub fn config_file(&self) -> String {
        format!("{}.sby", self.design)
    }

    /// `(relative path, contents)` of every file except the manifest.
    pub fn files(&self) -> Vec<(String, String)> {
        vec![
            (self.design_file(), self.design_text.clone()),
            (format!("{}.sv", self.prop_name()), self.property_module.clone()),
            ("bind.sv".to_string(), self.bind.clone()),
            (self.config_file(), self.engine_config.clone()),
        ]
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            design: self.design.clone(),
            files: self
                .files()
                .into_iter()
                .map(|(path, text)| ManifestEntry { path, sha256: hex::encode(Sha256::digest(text.as_bytes())) })
                .collect(),
            assertions: self.assertion_names.clone(),
        }
    }

    /// Writes the tree under `dir` (created if needed) and returns `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<PathBuf, ForgeError> {
        let io = |p: &Path, e: std::io::Error| ForgeError::Io { path: p.display().to_string(), message: e.to_string() };
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        for (name, text) in self.files() {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| io(&p, e))?;
        }
        let p = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(&self.manifest()).expect("manifest serializes");
        std::fs::write(&p, json + "\n").map_err(|e| io(&p, e))?;
        Ok(dir.to_path_buf())
    }

    /// Loads a tree written by `write_to`, checking every manifest hash.
    pub fn read_from(dir: &Path) -> Result<FtArtifact, ForgeError> {
        let io = |p: &Path, e: String| ForgeError::Io { path: p.display().to_string(), message: e };
        let read = |name: &str| {
            let p = dir.join(name);
            std::fs::read_to_string(&p).map_err(|e| io(&p, e.to_string()))
        };
        let manifest: Manifest =
            serde_json::from_str(&read("manifest.json")?).map_err(|e| io(&dir.join("manifest.json"), e.to_string()))?;
        for e in &manifest.files {
            if hex::encode(Sha256::digest(read(&e.path)?.as_bytes())) != e.sha256 {
                return Err(ForgeError::ManifestMismatch { path: dir.join(&e.path).display().to_string() });
            }
        }
        let d = &manifest.design;
        Ok(FtArtifact {
            design: d.clone(),
            design_text: read(&format!("{d}.sv"))?,
            property_module: read(&format!("{d}_prop.sv"))?,
            bind: read("bind.sv")?,
            engine_config: read(&format!("{d}.sby"))?,
            assertion_names: manifest.assertions,
        })
    }
}

/// Output directory of the testbench for `design` below `out`.
pub fn ft_dir(out: &Path, design: &str) -> PathBuf {
    out.join("ft").join(design)
}

/// Builds the testbench for `module` from a merged batch and annotations.
pub fn emit_ft(
    module: &RtlModule,
    design_text: &str,
    batch: &AssertionBatch,
    annotations: &[TransactionAnnotation],
    rs: &RuleSet,
    opts: &FtOptions,
) -> Result<FtArtifact, ForgeError> {
    let clock = module.clock().ok_or_else(|| ForgeError::NoClockPort { design: module.name.clone() })?;
    if !opts.force {
        let errors: Vec<_> = lint(batch, Some(module), rs, &LintOptions::default())
            .into_iter()
            .filter(|f| f.severity == Severity::Error)
            .collect();
        if let Some(first) = errors.first() {
            return Err(ForgeError::LintErrorsPresent { count: errors.len(), first: first.to_string() });
        }
    }
    let liveness: String = annotations.iter().map(|t| emit_liveness(t, module, opts.liveness_depth)).collect();
    let liveness_batch = parse_batch(&liveness, Some(module));

    let mut names: Vec<String> = batch.names().into_iter().map(str::to_string).collect();
    names.extend(liveness_batch.names().into_iter().map(str::to_string));

    let prop = format!("{}_prop", module.name);
    let mut text = format!("module {prop}");
    text.push_str(&header_params(module));
    text.push_str(" (\n");
    let ports: Vec<_> = module.ports.iter().map(input_port).collect();
    text.push_str(&ports.join(",\n"));
    text.push_str("\n);\n");
    for p in module.parameters.iter().filter(|p| p.local) {
        let _ = writeln!(text, "    localparam {} = {};", p.name, p.default);
    }
    let _ = writeln!(text, "\n    default clocking cb @(posedge {}); endclocking", clock.name);
    if let Some(rst) = module.reset_active_expr() {
        let _ = writeln!(text, "    default disable iff ({rst});");
        let _ = writeln!(text, "\n    initial assume ({rst});");
    }
    if !batch.is_empty() {
        text.push('\n');
        text.push_str(&indent(&batch.render()));
    }
    if !liveness_batch.is_empty() {
        text.push_str("\n    // transaction properties\n");
        text.push_str(&indent(&liveness_batch.render()));
    }
    text.push_str("endmodule\n");

    let overrides: Vec<_> = module
        .parameters
        .iter()
        .filter(|p| !p.local)
        .map(|p| format!(".{0}({0})", p.name))
        .collect();
    let params = if overrides.is_empty() { String::new() } else { format!(" #({})", overrides.join(", ")) };
    let bind = format!("bind {0} {prop}{params} {prop}_i (.*);\n", module.name);

    let mut art = FtArtifact {
        design: module.name.clone(),
        design_text: design_text.to_string(),
        property_module: text,
        bind,
        engine_config: String::new(),
        assertion_names: names,
    };
    art.engine_config = emit_engine_config(&art, opts.mode, opts.depth);
    Ok(art)
}

fn header_params(module: &RtlModule) -> String {
    let params: Vec<_> = module
        .parameters
        .iter()
        .filter(|p| !p.local)
        .map(|p| format!("    parameter {} = {}", p.name, p.default))
        .collect();
    if params.is_empty() {
        String::new()
    } else {
        format!(" #(\n{}\n)", params.join(",\n"))
    }
}

fn input_port(p: &Port) -> String {
    crate::rtl::port_declaration(&Port { direction: Direction::Input, ..p.clone() })
}

fn indent(text: &str) -> String {
    text.lines()
        .map(|l| if l.is_empty() { "\n".to_string() } else { format!("    {l}\n") })
        .collect()
}

/// Liveness and stability properties implied by one annotation.
pub fn emit_liveness(t: &TransactionAnnotation, module: &RtlModule, depth: u32) -> String {
    let mut out = String::new();
    let accepted = match &t.request.ready {
        Some(r) => format!("{} && {r}", t.request.valid),
        None => t.request.valid.clone(),
    };
    if t.has(Attribute::EventualResponse) {
        let _ = writeln!(out, "// every accepted `{}` request is answered within {depth} cycles", t.name);
        let _ = writeln!(
            out,
            "as__{}_eventual_response: assert property ({accepted} |-> ##[1:{depth}] {});",
            t.name, t.response.valid
        );
    }
    if t.has(Attribute::StableData) {
        for (side, iface) in [("req", &t.request), ("resp", &t.response)] {
            let (Some(ready), false) = (&iface.ready, iface.data.is_empty()) else { continue };
            let stable: Vec<_> = iface.data.iter().map(|d| format!("$stable({d})")).collect();
            let driven_outside = module.port(&iface.valid).is_some_and(|p| p.direction == Direction::Input);
            let (prefix, keyword) = if driven_outside { ("am", "assume") } else { ("as", "assert") };
            let _ = writeln!(out, "// {side} data of `{}` holds while stalled", t.name);
            let _ = writeln!(
                out,
                "{prefix}__{}_{side}_data_stable: {keyword} property ({} && !{ready} |=> {});",
                t.name,
                iface.valid,
                stable.join(" && ")
            );
        }
    }
    out
}

/// Engine configuration referencing exactly the design, property and bind files.
pub fn emit_engine_config(art: &FtArtifact, mode: EngineMode, depth: u32) -> String {
    let (task, mode_line, engine) = match mode {
        EngineMode::Prove => ("prove", "mode prove", "abc pdr"),
        EngineMode::Bmc => ("bmc", "mode bmc", "smtbmc"),
    };
    let files = [art.design_file(), format!("{}.sv", art.prop_name()), "bind.sv".to_string()];
    let mut out = format!("[tasks]\n{task}\n\n[options]\n{task}: {mode_line}\ndepth {depth}\n\n[engines]\n{task}: {engine}\n\n[script]\n");
    for f in &files {
        let _ = writeln!(out, "read -formal {f}");
    }
    let _ = writeln!(out, "prep -top {}\n\n[files]", art.design);
    for f in &files {
        let _ = writeln!(out, "{f}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rtl::{parse_module, SourceFile};
    use crate::rules::builtin_rules;

    const DESIGN: &str = "module d #(parameter W = 4) (input clk, input rst_n, input a_val, output a_rdy, input [W-1:0] a_d, output b_val, input b_rdy, output [W-1:0] b_d);\n  localparam D = 2*W;\n  logic [W-1:0] q_r;\nendmodule\n";

    fn module() -> RtlModule {
        parse_module(&SourceFile::new("d.sv", DESIGN)).unwrap()
    }

    #[test]
    fn property_module_shape() {
        let m = module();
        let batch = parse_batch("as__a: assert property (a_val |-> ##1 d.q_r == 0);\n", Some(&m));
        let art = emit_ft(&m, DESIGN, &batch, &[], &builtin_rules(), &FtOptions::default()).unwrap();
        assert!(art.property_module.starts_with("module d_prop #(\n    parameter W = 4\n) (\n    input logic clk,"));
        assert!(art.property_module.contains("input logic [W-1:0] b_d\n);"));
        assert!(art.property_module.contains("localparam D = 2*W;"));
        assert!(art.property_module.contains("default disable iff (!rst_n);"));
        assert_eq!(art.bind, "bind d d_prop #(.W(W)) d_prop_i (.*);\n");
        assert_eq!(art.assertion_names, ["as__a"]);
        let back = parse_batch(&art.property_module, Some(&m));
        assert_eq!(back.names(), ["as__a"]);
        assert_eq!(back.assertions[0].expression, batch.assertions[0].expression);
    }

    #[test]
    fn engine_config_lists_three_files() {
        let m = module();
        let art = emit_ft(&m, DESIGN, &AssertionBatch::default(), &[], &builtin_rules(), &FtOptions::default()).unwrap();
        let files: Vec<_> = art.engine_config.split("[files]\n").nth(1).unwrap().lines().collect();
        assert_eq!(files, ["d.sv", "d_prop.sv", "bind.sv"]);
        assert!(art.engine_config.contains("prove: mode prove") && art.engine_config.contains("abc pdr"));
        let bmc = emit_engine_config(&art, EngineMode::Bmc, 7);
        assert!(bmc.contains("bmc: mode bmc") && bmc.contains("depth 7") && bmc.contains("smtbmc"));
    }

    #[test]
    fn lint_errors_block_unless_forced() {
        let m = module();
        let batch = parse_batch("as__a: assert property (a_val |-> q_r == 0);\n", Some(&m));
        let rs = builtin_rules();
        assert!(matches!(
            emit_ft(&m, DESIGN, &batch, &[], &rs, &FtOptions::default()),
            Err(ForgeError::LintErrorsPresent { count: 1, .. })
        ));
        let forced = FtOptions { force: true, ..FtOptions::default() };
        assert!(emit_ft(&m, DESIGN, &batch, &[], &rs, &forced).is_ok());
    }

    #[test]
    fn no_clock() {
        let src = "module n(input a, output b);\nendmodule\n";
        let m = parse_module(&SourceFile::new("n.sv", src)).unwrap();
        assert_eq!(
            emit_ft(&m, src, &AssertionBatch::default(), &[], &builtin_rules(), &FtOptions::default()),
            Err(ForgeError::NoClockPort { design: "n".into() })
        );
    }

    #[test]
    fn liveness_is_lint_clean() {
        let m = module();
        let set = parse_annotations(
            "transaction t: req.valid=a_val req.ready=a_rdy req.data=a_d resp.valid=b_val resp.ready=b_rdy resp.data=b_d attrs=stable_data,eventual_response",
            &m,
        )
        .unwrap();
        let text = emit_liveness(&set.transactions[0], &m, 16);
        assert!(text.contains("as__t_eventual_response: assert property (a_val && a_rdy |-> ##[1:16] b_val);"));
        assert!(text.contains("am__t_req_data_stable: assume property (a_val && !a_rdy |=> $stable(a_d));"));
        assert!(text.contains("as__t_resp_data_stable: assert property (b_val && !b_rdy |=> $stable(b_d));"));
        let batch = parse_batch(&text, Some(&m));
        assert_eq!(batch.len(), 3);
        assert!(lint(&batch, Some(&m), &builtin_rules(), &LintOptions::default()).is_empty());
        let art = emit_ft(&m, DESIGN, &AssertionBatch::default(), &set.transactions, &builtin_rules(), &FtOptions::default()).unwrap();
        assert_eq!(art.assertion_names.len(), 3);
    }

    #[test]
    fn manifest_hashes() {
        let m = module();
        let art = emit_ft(&m, DESIGN, &AssertionBatch::default(), &[], &builtin_rules(), &FtOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = art.write_to(&ft_dir(dir.path(), "d")).unwrap();
        let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest.files.len(), 4);
        for e in &manifest.files {
            let bytes = std::fs::read(out.join(&e.path)).unwrap();
            assert_eq!(hex::encode(Sha256::digest(&bytes)), e.sha256);
        }
        assert_eq!(FtArtifact::read_from(&out).unwrap(), art);
        std::fs::write(out.join("bind.sv"), "tampered\n").unwrap();
        assert!(matches!(FtArtifact::read_from(&out), Err(ForgeError::ManifestMismatch { .. })));
    }
}
