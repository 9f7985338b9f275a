// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use uvmforge::agent::{connect, BackendConfig, LlmBackend, DEFAULT_API_KEY_ENV};
use uvmforge::harness::{
    emit_reports, resolve_adapter, resolve_backend, run_bench, run_pipeline, BenchManifest, RunMetrics, RunOptions,
    RunStatus, Session,
};
use uvmforge::sim::{AdapterConfig, SimGateway};
use uvmforge::workspace::Layout;

const EXIT_FAILED: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(
    name = "uvmforge",
    version,
    about = "Generate, repair and refine UVM testbenches for an RTL design"
)]
struct Cli {
    /// Log more (repeat for debug output).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the test plan from the design spec.
    Plan(StageArgs),
    /// Generate the testbench from an existing plan.
    Gen(StageArgs),
    /// Simulate the generated testbench and repair failing components.
    Sim(StageArgs),
    /// Supplement stimulus until the coverage target or budget is reached.
    Refine(StageArgs),
    /// All four stages followed by the reports.
    Run(StageArgs),
    /// Repeated runs over every design of a manifest.
    Bench(BenchArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum BackendChoice {
    Mock,
    Http,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum AdapterChoice {
    Mock,
    Cmd,
}

#[derive(Args, Clone)]
struct BackendArgs {
    #[arg(long, value_enum, default_value = "mock")]
    backend: BackendChoice,
    /// Mock fixture directory, relative to the workspace.
    #[arg(long, default_value = "fixtures")]
    fixtures: PathBuf,
    /// Chat-completions URL for the http backend.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long, default_value = DEFAULT_API_KEY_ENV)]
    api_key_env: String,
}

impl BackendArgs {
    fn config(&self) -> BackendConfig {
        match self.backend {
            BackendChoice::Mock => BackendConfig::mock(&self.fixtures),
            BackendChoice::Http => {
                let mut cfg = BackendConfig::http(
                    self.endpoint.clone().unwrap_or_default(),
                    self.model.clone().unwrap_or_default(),
                );
                cfg.endpoint = self.endpoint.clone();
                cfg.model_id = self.model.clone();
                cfg.api_key_env = self.api_key_env.clone();
                cfg
            }
        }
    }
}

#[derive(Args, Clone)]
struct AdapterArgs {
    #[arg(long, value_enum, default_value = "mock")]
    adapter: AdapterChoice,
    /// Scripted outcomes for the mock adapter, relative to the workspace.
    #[arg(long, default_value = "scenario.json")]
    scenario: PathBuf,
    /// Compile command; `{files}`, `{top}` and `{outdir}` are expanded.
    #[arg(long)]
    compile_cmd: Option<String>,
    /// Run command, with the same placeholders.
    #[arg(long)]
    run_cmd: Option<String>,
}

impl AdapterArgs {
    fn config(&self) -> AdapterConfig {
        match self.adapter {
            AdapterChoice::Mock => AdapterConfig::mock(&self.scenario),
            AdapterChoice::Cmd => {
                let mut cfg = AdapterConfig::command("", "");
                cfg.compile_cmd = self.compile_cmd.clone();
                cfg.run_cmd = self.run_cmd.clone();
                cfg
            }
        }
    }
}

#[derive(Args, Clone)]
struct Overrides {
    #[arg(long)]
    max_repair: Option<u32>,
    #[arg(long)]
    max_opt: Option<u32>,
    /// Code coverage target in percent.
    #[arg(long)]
    target_code: Option<f64>,
    /// Functional coverage target in percent.
    #[arg(long)]
    target_func: Option<f64>,
}

impl Overrides {
    fn options(&self, out: Option<PathBuf>) -> RunOptions {
        RunOptions {
            layout: Layout {
                out_dir: out,
                ..Layout::default()
            },
            max_repair_iters: self.max_repair,
            max_opt_iters: self.max_opt,
            target_code_pct: self.target_code,
            target_func_pct: self.target_func,
        }
    }
}

#[derive(Args, Clone)]
struct StageArgs {
    #[arg(long, default_value = ".")]
    workspace: PathBuf,
    /// Output directory, relative to the workspace (default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    backend: BackendArgs,
    #[command(flatten)]
    adapter: AdapterArgs,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Clone)]
struct BenchArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Designs processed in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Directory for summary.md and summary.json.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    backend: BackendArgs,
    #[command(flatten)]
    adapter: AdapterArgs,
    #[command(flatten)]
    overrides: Overrides,
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn backend_for(args: &StageArgs) -> Result<Box<dyn LlmBackend>, ExitCode> {
    connect(&resolve_backend(&args.backend.config(), &args.workspace)).map_err(|e| fail(EXIT_CONFIG, e))
}

fn gateway_for(args: &StageArgs) -> Result<SimGateway, ExitCode> {
    SimGateway::new(resolve_adapter(&args.adapter.config(), &args.workspace)).map_err(|e| fail(EXIT_CONFIG, e))
}

fn print_run(m: &RunMetrics, reports: &Path) {
    println!("status: {:?}", m.status);
    if let Some(f) = &m.failure {
        println!("reason: {f}");
    }
    println!("code coverage: {:.2}%", m.final_code_pct);
    println!("functional coverage: {:.2}%", m.final_func_pct);
    println!("reports: {}", reports.display());
}

fn stage(cmd: &Command, args: &StageArgs) -> Result<ExitCode, ExitCode> {
    let opts = args.overrides.options(args.out.clone());
    if let Command::Run(_) = cmd {
        let backend = backend_for(args)?;
        let metrics = run_pipeline(&args.workspace, &opts, backend.as_ref(), &args.adapter.config())
            .map_err(|e| fail(EXIT_CONFIG, e))?;
        let out = args.out.clone().unwrap_or_else(|| "out".into());
        print_run(&metrics, &args.workspace.join(out).join("reports"));
        return Ok(ExitCode::from(metrics.status.exit_code() as u8));
    }
    let session = Session::open(&args.workspace, &opts).map_err(|e| fail(EXIT_CONFIG, e))?;
    let backend = backend_for(args)?;
    let backend = backend.as_ref();
    let cfg_err = |e: uvmforge::Error| fail(EXIT_CONFIG, e);
    match cmd {
        Command::Plan(_) => {
            let plan = session.plan(backend).map_err(cfg_err)?;
            println!(
                "{} function points -> {}",
                plan.points.len(),
                session.plan_path().display()
            );
        }
        Command::Gen(_) => {
            let plan = session.load_plan().map_err(cfg_err)?;
            let tb = session.generate(&plan, backend).map_err(cfg_err)?;
            println!(
                "{} components -> {}",
                tb.components.len(),
                session.ws.tb_dir().display()
            );
        }
        Command::Sim(_) => {
            let plan = session.load_plan().map_err(cfg_err)?;
            let tb = session.load_testbench().map_err(cfg_err)?;
            let mut gateway = gateway_for(args)?;
            let (_, outcome, report) = session.simulate(tb, &plan, backend, &mut gateway).map_err(cfg_err)?;
            let mut metrics = RunMetrics::empty(if outcome.passed() {
                RunStatus::Success
            } else {
                RunStatus::GenerationFailed
            });
            println!(
                "{:?} after {} simulation(s); log {}",
                outcome.status,
                report.simulations_run,
                outcome.log_path.display()
            );
            metrics.repair_report = Some(report);
            let cov = outcome.coverage.as_ref().map(|d| session.coverage_report(d, &plan));
            if let Some(c) = &cov {
                (metrics.final_code_pct, metrics.final_func_pct) = (c.code_pct, c.func_pct);
            }
            emit_reports(&metrics, &outcome.errors, cov.as_ref(), &session.ws.reports_dir())
                .map_err(|e| fail(EXIT_CONFIG, e))?;
            if !outcome.passed() {
                return Ok(ExitCode::from(EXIT_FAILED));
            }
        }
        Command::Refine(_) => {
            let plan = session.load_plan().map_err(cfg_err)?;
            let tb = session.load_testbench().map_err(cfg_err)?;
            let doc = session.load_coverage().map_err(cfg_err)?;
            let mut gateway = gateway_for(args)?;
            let state = session.refine(tb, doc, &plan, backend, &mut gateway).map_err(cfg_err)?;
            println!(
                "{} iteration(s); code {:.2}%, functional {:.2}%",
                state.iteration, state.best_cov.0, state.best_cov.1
            );
        }
        Command::Run(_) | Command::Bench(_) => unreachable!("handled elsewhere"),
    }
    Ok(ExitCode::SUCCESS)
}

fn bench(args: &BenchArgs) -> Result<ExitCode, ExitCode> {
    let manifest = BenchManifest::load(&args.manifest).map_err(|e| fail(EXIT_CONFIG, e))?;
    let opts = args.overrides.options(None);
    let summary = run_bench(
        &manifest,
        &args.backend.config(),
        &args.adapter.config(),
        &opts,
        args.jobs,
    )
    .map_err(|e| fail(EXIT_CONFIG, e))?;
    let md = summary.to_markdown();
    print!("{md}");
    if let Some(dir) = &args.out {
        let write = |name: &str, text: &str| {
            fs::create_dir_all(dir)
                .and_then(|_| fs::write(dir.join(name), text))
                .map_err(|e| fail(EXIT_CONFIG, format!("{}: {e}", dir.join(name).display())))
        };
        write("summary.md", &md)?;
        write(
            "summary.json",
            &serde_json::to_string_pretty(&summary).expect("summary serializes"),
        )?;
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::Bench(args) => bench(args),
        cmd @ (Command::Plan(a) | Command::Gen(a) | Command::Sim(a) | Command::Refine(a) | Command::Run(a)) => {
            stage(cmd, a)
        }
    };
    result.unwrap_or_else(|code| code)
}
