use std::path::{Path, PathBuf};

use serde_json::Value;
use sva_forge::config::{Config, ConfigError};
use sva_forge::flow::{BookError, Booklog, FlowContext, FlowError};
use sva_forge::forge::{EngineMode, ForgeError, FtOptions};
use sva_forge::fpv::{Engine, FpvError};
use sva_forge::llm::{CostLedger, Gateway, HttpProvider, LlmError, MockProvider, Provider, ProviderKind};
use sva_forge::prompt::{Preambles, PromptError, PromptOptions};
use sva_forge::rtl::{detect_fsm, parse_module_with, ParseOptions, RtlError, RtlModule, SourceFile};
use sva_forge::rules::{
    builtin_annotation_rules, builtin_rtl_rules, builtin_rules, load_rules, Category, RuleError, RuleSet,
};
use sva_forge::sva::{LintOptions, LINT_KEYS};

pub const EXIT_OK: u8 = 0;
pub const EXIT_LINT: u8 = 1;
pub const EXIT_FPV: u8 = 2;
pub const EXIT_USAGE: u8 = 3;
pub const EXIT_SERVICE: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: message.into() }
    }

    fn new(code: u8, e: impl std::fmt::Display) -> Self {
        CliError { code, message: e.to_string() }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::new(EXIT_USAGE, e)
    }
}

impl From<RuleError> for CliError {
    fn from(e: RuleError) -> Self {
        CliError::new(EXIT_USAGE, e)
    }
}

impl From<RtlError> for CliError {
    fn from(e: RtlError) -> Self {
        CliError::new(EXIT_USAGE, e)
    }
}

impl From<PromptError> for CliError {
    fn from(e: PromptError) -> Self {
        CliError::new(EXIT_USAGE, e)
    }
}

impl From<BookError> for CliError {
    fn from(e: BookError) -> Self {
        CliError::new(EXIT_USAGE, e)
    }
}

impl From<LlmError> for CliError {
    fn from(e: LlmError) -> Self {
        let code = match e {
            LlmError::AuthError { .. } | LlmError::ScriptExhausted { .. } | LlmError::Io { .. } => EXIT_USAGE,
            _ => EXIT_SERVICE,
        };
        CliError::new(code, e)
    }
}

impl From<ForgeError> for CliError {
    fn from(e: ForgeError) -> Self {
        let code = match e {
            ForgeError::LintErrorsPresent { .. } => EXIT_LINT,
            _ => EXIT_USAGE,
        };
        CliError::new(code, e)
    }
}

impl From<FpvError> for CliError {
    fn from(e: FpvError) -> Self {
        let code = match e {
            FpvError::EngineNotFound { .. } => EXIT_SERVICE,
            _ => EXIT_USAGE,
        };
        CliError::new(code, e)
    }
}

impl From<FlowError> for CliError {
    fn from(e: FlowError) -> Self {
        match e {
            FlowError::Prompt(e) => e.into(),
            FlowError::Llm(e) => e.into(),
            FlowError::Rtl(e) => e.into(),
            FlowError::Forge(e) => e.into(),
            FlowError::Fpv(e) => e.into(),
            FlowError::Book(e) => e.into(),
            e @ (FlowError::Scenario(_) | FlowError::Io { .. }) => CliError::new(EXIT_USAGE, e),
        }
    }
}

/// Result of a subcommand: exit code plus human and JSON renderings.
pub struct Outcome {
    pub code: u8,
    pub human: String,
    pub json: Value,
}

impl Outcome {
    pub fn ok(human: String, json: Value) -> Self {
        Outcome { code: EXIT_OK, human, json }
    }

    pub fn print(&self, json: bool) {
        if json {
            println!("{}", serde_json::to_string_pretty(&self.json).expect("json output serializes"));
        } else if !self.human.is_empty() {
            print!("{}", self.human);
            if !self.human.ends_with('\n') {
                println!();
            }
        }
    }
}

pub fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::usage(format!("cannot access {}: {e}", path.display()))
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

pub fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| io_error(path, e))
}

/// Per-invocation settings shared by every subcommand.
pub struct App {
    pub config: Config,
    pub out: PathBuf,
    pub booklog_path: PathBuf,
}

/// Prompt-shaping switches of the generating subcommands.
#[derive(Debug, Clone, Copy, Default)]
pub struct PromptSwitches {
    pub strip: bool,
    pub fsm_strategy: bool,
    pub bmc: bool,
}

impl App {
    pub fn new(config: Option<&Path>, out: PathBuf, booklog: Option<PathBuf>) -> Result<App, CliError> {
        let config = match config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        let booklog_path = booklog.unwrap_or_else(|| out.join("booklog.jsonl"));
        Ok(App { config, out, booklog_path })
    }

    pub fn booklog(&self) -> Result<Booklog, CliError> {
        Ok(Booklog::open(&self.booklog_path)?)
    }

    pub fn ledger_path(&self) -> PathBuf {
        self.out.join("cost_ledger.jsonl")
    }

    pub fn parse_rtl(&self, path: &Path) -> Result<RtlModule, CliError> {
        let src = SourceFile::read(path)?;
        let opts = ParseOptions { register_suffixes: self.config.register_suffixes.clone(), ..ParseOptions::default() };
        Ok(parse_module_with(&src, &opts)?)
    }

    /// SVA rules from the configured file or the shipped catalog.
    pub fn sva_rules(&self) -> Result<RuleSet, CliError> {
        let rs = match &self.config.rules {
            Some(p) => load_rules(p)?,
            None => builtin_rules(),
        };
        rs.check_lint_keys(&LINT_KEYS)?;
        log::info!("loaded {} SVA rules (version {})", rs.rules.len(), rs.version);
        Ok(rs)
    }

    pub fn lint_options(&self) -> LintOptions {
        LintOptions { reduction_advisory: self.config.reduction_advisory, prior_names: Vec::new() }
    }

    pub fn ft_options(&self, bmc: bool) -> FtOptions {
        FtOptions {
            force: false,
            liveness_depth: self.config.liveness_depth,
            mode: if bmc { EngineMode::Bmc } else { EngineMode::Prove },
            depth: self.config.depth,
        }
    }

    /// Mock provider from scripts, or the configured HTTP provider.
    pub fn gateway(&self, scripts: &[PathBuf]) -> Result<Gateway, CliError> {
        let cfg = &self.config.provider;
        let provider: Box<dyn Provider> = match cfg.kind {
            ProviderKind::Mock => {
                let scripts = if scripts.is_empty() { &self.config.scripts } else { scripts };
                if scripts.is_empty() {
                    return Err(CliError::usage(
                        "no provider configured: pass --script <response file> or set `provider|http` in --config",
                    ));
                }
                Box::new(MockProvider::from_files(scripts)?)
            }
            ProviderKind::Http => Box::new(HttpProvider::new(cfg)?),
        };
        let ledger = CostLedger::open(&self.ledger_path())?;
        Ok(Gateway::new(provider, cfg.clone(), ledger))
    }

    /// Mock engine from scripts (or the configured one), else the external command.
    pub fn engine(&self, external: bool, scripts: &[PathBuf]) -> Result<Engine, CliError> {
        if external {
            return Ok(Engine::external(&self.config.engine_cmd, &self.out.join("work")));
        }
        let scripts: Vec<PathBuf> = if scripts.is_empty() {
            self.config.engine_script.iter().cloned().collect()
        } else {
            scripts.to_vec()
        };
        if scripts.is_empty() {
            return Err(CliError::usage("the mock engine needs --script <engine script> or `engine_script|` in --config"));
        }
        Ok(Engine::mock_from_files(&scripts)?)
    }

    /// Flow context with freshly loaded rules. Strategy rules are dropped
    /// unless requested; when kept, the prompt names the detected FSM.
    pub fn flow_context<'g>(
        &self,
        gateway: &'g Gateway,
        module: Option<&RtlModule>,
        sw: PromptSwitches,
    ) -> Result<FlowContext<'g>, CliError> {
        let mut sva_rules = self.sva_rules()?;
        let mut hint = None;
        if sw.fsm_strategy {
            if let Some(fsm) = module.and_then(detect_fsm) {
                log::info!("FSM `{}` with {} states", fsm.state_signal, fsm.states.len());
                hint = Some(format!(
                    "The design contains a state machine on `{}` with states {}.",
                    fsm.state_signal,
                    fsm.states.join(", ")
                ));
            }
        } else {
            sva_rules = sva_rules.without(&[Category::STRAT]);
        }
        let preambles = match &self.config.preamble {
            Some(p) => Preambles::load(p)?,
            None => Preambles::default(),
        };
        Ok(FlowContext {
            gateway,
            budget: self.config.budget,
            prompt: PromptOptions { preambles, strip: sw.strip, hint },
            sva_rules,
            annotation_rules: match &self.config.annotation_rules {
                Some(p) => load_rules(p)?,
                None => builtin_annotation_rules(),
            },
            rtl_rules: match &self.config.rtl_rules {
                Some(p) => load_rules(p)?,
                None => builtin_rtl_rules(),
            },
            lint: self.lint_options(),
            ft: self.ft_options(sw.bmc),
        })
    }
}
