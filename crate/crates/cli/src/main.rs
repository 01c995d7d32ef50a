mod app;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use app::{App, CliError, Outcome};

#[derive(Parser, Debug)]
#[command(name = "sva-forge", version, about = "Generate, lint and prove SystemVerilog assertions with an LLM in the loop")]
struct Cli {
    /// Settings file with `key|value` lines.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Iteration log; defaults to <out>/booklog.jsonl.
    #[arg(long, global = true, value_name = "PATH")]
    booklog: Option<PathBuf>,
    /// Output directory for every generated file.
    #[arg(long, global = true, value_name = "DIR", default_value = "ft-out")]
    out: PathBuf,
    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,
    /// Log verbosity (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Formal testbench scaffolding.
    Ft {
        #[command(subcommand)]
        action: FtCommand,
    },
    /// Run the annotation prompt once and write the annotations.
    Annotate {
        rtl: PathBuf,
        /// Scripted provider response (repeatable).
        #[arg(long, value_name = "FILE")]
        script: Vec<PathBuf>,
    },
    /// Generate assertion batches, merge them and emit the testbench.
    Gen(GenArgs),
    /// Lint an assertion file against a design.
    Lint {
        sva: PathBuf,
        #[arg(long)]
        rtl: Option<PathBuf>,
    },
    /// Run a formal engine on an emitted testbench.
    Prove {
        #[arg(long, value_enum)]
        engine: EngineKind,
        /// Mock engine script (repeatable, one per run).
        #[arg(long, value_name = "FILE")]
        script: Vec<PathBuf>,
        /// Testbench directory; defaults to the only one under <out>/ft.
        #[arg(long, value_name = "DIR")]
        ft: Option<PathBuf>,
    },
    /// Iteration table and coverage ratios.
    Report {
        #[arg(long, num_args = 2, value_names = ["BASE", "NEW"])]
        coverage: Option<Vec<PathBuf>>,
    },
    /// Iterative flows.
    Loop {
        #[command(subcommand)]
        flow: LoopCommand,
    },
    /// Compare two assertion batches.
    Diff {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        rtl: Option<PathBuf>,
    },
    /// Total LLM spend from the cost ledger.
    Cost,
}

#[derive(Subcommand, Debug)]
enum FtCommand {
    /// Emit a testbench without assertions.
    Init {
        rtl: PathBuf,
        #[arg(long, value_enum, default_value = "prove")]
        mode: Mode,
    },
}

#[derive(Args, Debug)]
struct GenArgs {
    rtl: PathBuf,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    batches: u32,
    /// Strip comments from the RTL even when it fits the budget.
    #[arg(long)]
    strip: bool,
    /// Keep strategy rules and name the detected FSM in the prompt.
    #[arg(long)]
    fsm_strategy: bool,
    #[arg(long, value_enum, default_value = "prove")]
    mode: Mode,
    #[arg(long, value_name = "FILE")]
    script: Vec<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum LoopCommand {
    /// Rule-refinement iterations; the rule file is reloaded each time.
    Refine {
        rtl: PathBuf,
        #[arg(long, default_value_t = 1)]
        iterations: usize,
        #[arg(long, value_enum)]
        engine: Option<EngineKind>,
        #[arg(long, value_name = "FILE")]
        engine_script: Vec<PathBuf>,
        #[arg(long)]
        strip: bool,
        #[arg(long)]
        fsm_strategy: bool,
        #[arg(long, value_name = "FILE")]
        script: Vec<PathBuf>,
    },
    /// Specification to RTL to proof with SVA edits in between.
    Design {
        #[arg(long, value_name = "FILE")]
        spec: PathBuf,
        #[arg(long, value_name = "FILE")]
        interface: PathBuf,
        #[arg(long, default_value_t = 3)]
        batches: usize,
        #[arg(long, value_enum)]
        engine: EngineKind,
        #[arg(long, value_name = "FILE")]
        engine_script: Vec<PathBuf>,
        /// Edited SVA per iteration, in order; without it the loop pauses for editing.
        #[arg(long, value_name = "FILE")]
        edit: Vec<PathBuf>,
        /// Continue after editing the SVA written by the previous run.
        #[arg(long)]
        resume: bool,
        #[arg(long, value_name = "FILE")]
        script: Vec<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum EngineKind {
    External,
    Mock,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Mode {
    Prove,
    Bmc,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { app::EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let json = cli.json;
    match dispatch(cli) {
        Ok(outcome) => {
            outcome.print(json);
            ExitCode::from(outcome.code)
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn dispatch(cli: Cli) -> Result<Outcome, CliError> {
    let app = App::new(cli.config.as_deref(), cli.out, cli.booklog)?;
    match cli.command {
        Command::Ft { action: FtCommand::Init { rtl, mode } } => commands::ft_init(&app, &rtl, mode == Mode::Bmc),
        Command::Annotate { rtl, script } => commands::annotate(&app, &rtl, &script),
        Command::Gen(g) => commands::gen(
            &app,
            &g.rtl,
            &commands::GenOptions {
                batches: g.batches as usize,
                strip: g.strip,
                fsm_strategy: g.fsm_strategy,
                bmc: g.mode == Mode::Bmc,
                scripts: g.script,
            },
        ),
        Command::Lint { sva, rtl } => commands::lint(&app, &sva, rtl.as_deref()),
        Command::Prove { engine, script, ft } => {
            commands::prove(&app, engine == EngineKind::External, &script, ft.as_deref())
        }
        Command::Report { coverage } => commands::report(&app, coverage.as_deref()),
        Command::Loop { flow: LoopCommand::Refine { rtl, iterations, engine, engine_script, strip, fsm_strategy, script } } => {
            commands::loop_refine(
                &app,
                &rtl,
                &commands::RefineOptions {
                    iterations,
                    engine: engine.map(|e| e == EngineKind::External),
                    engine_scripts: engine_script,
                    strip,
                    fsm_strategy,
                    scripts: script,
                },
            )
        }
        Command::Loop {
            flow: LoopCommand::Design { spec, interface, batches, engine, engine_script, edit, resume, script },
        } => commands::loop_design(
            &app,
            &commands::DesignArgs {
                spec,
                interface,
                batches,
                external: engine == EngineKind::External,
                engine_scripts: engine_script,
                edits: edit,
                resume,
                scripts: script,
            },
        ),
        Command::Diff { a, b, rtl } => commands::diff(&app, &a, &b, rtl.as_deref()),
        Command::Cost => commands::cost(&app),
    }
}
