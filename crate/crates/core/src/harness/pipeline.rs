// SPDX-License-Identifier: Apache-2.0

//! Stage-by-stage driver. Every stage persists its output under `out/` so
//! the CLI can run stages one at a time.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::metrics::{RunMetrics, RunStatus};
use super::report::emit_reports;
use crate::agent::{BackendConfig, BackendKind, LlmBackend};
use crate::optimizer::{
    supplement_loop, CoverageReport, GapKeywords, OptimizationState, SupplementOptions, COVERAGE_REPORT_FILE,
    OPTIMIZATION_FILE,
};
use crate::planner::{generate_plan, read_plan, TestPlan, PLAN_FILE};
use crate::repair::{repair_loop, RepairContext, RepairReport, REPAIR_REPORT_FILE};
use crate::rtl::{classify_ports, extract_interface, DutInterface};
use crate::sim::{
    parse_coverage, AdapterConfig, AdapterKind, CoverageDocument, SimError, SimGateway, SimulationOutcome,
};
use crate::tbgen::{generate_testbench, GenContext, Testbench, STATE_FILE};
use crate::workspace::{load_workspace_with, ConfigError, Layout, Workspace, DEFAULT_OUT_DIR};
use crate::{Error, Result};

/// Overrides applied on top of the workspace configuration.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub layout: Layout,
    pub max_repair_iters: Option<u32>,
    pub max_opt_iters: Option<u32>,
    pub target_code_pct: Option<f64>,
    pub target_func_pct: Option<f64>,
}

/// Joins a relative scenario path onto `root`.
pub fn resolve_adapter(cfg: &AdapterConfig, root: &Path) -> AdapterConfig {
    let mut cfg = cfg.clone();
    if cfg.kind == AdapterKind::Mock {
        if let Some(p) = &cfg.scenario_path {
            if p.is_relative() {
                cfg.scenario_path = Some(root.join(p));
            }
        }
    }
    cfg
}

/// Joins a relative fixture directory onto `root`.
pub fn resolve_backend(cfg: &BackendConfig, root: &Path) -> BackendConfig {
    let mut cfg = cfg.clone();
    if cfg.kind == BackendKind::Mock {
        if let Some(d) = &cfg.fixture_dir {
            if d.is_relative() {
                cfg.fixture_dir = Some(root.join(d));
            }
        }
    }
    cfg
}

fn target_override(field: &str, v: Option<f64>, slot: &mut f64) -> Result<()> {
    if let Some(v) = v {
        if !(0.0..=100.0).contains(&v) {
            return Err(ConfigError::Schema {
                field: field.into(),
                reason: format!("{v} is outside 0..=100"),
            }
            .into());
        }
        *slot = v;
    }
    Ok(())
}

/// A loaded workspace plus the classified DUT interface.
#[derive(Debug, Clone)]
pub struct Session {
    pub ws: Workspace,
    pub iface: DutInterface,
    pub keywords: GapKeywords,
}

impl Session {
    pub fn open(root: &Path, opts: &RunOptions) -> Result<Self> {
        let mut ws = load_workspace_with(root, &opts.layout)?;
        let cfg = &mut ws.config;
        if let Some(n) = opts.max_repair_iters {
            cfg.max_repair_iters = n;
        }
        if let Some(n) = opts.max_opt_iters {
            cfg.max_opt_iters = n;
        }
        target_override(
            "coverage_targets.code_pct",
            opts.target_code_pct,
            &mut cfg.coverage_targets.code_pct,
        )?;
        target_override(
            "coverage_targets.func_pct",
            opts.target_func_pct,
            &mut cfg.coverage_targets.func_pct,
        )?;
        let raw = extract_interface(&ws.source_texts(), &ws.config.top_module)?;
        let iface = classify_ports(&raw, &ws.config)?;
        let keywords = GapKeywords::load_or_default(&ws.root)?;
        Ok(Session { ws, iface, keywords })
    }

    pub fn plan_path(&self) -> PathBuf {
        self.ws.plan_dir().join(PLAN_FILE)
    }

    pub fn state_path(&self) -> PathBuf {
        self.ws.out_dir.join(STATE_FILE)
    }

    pub fn coverage_path(&self) -> PathBuf {
        self.ws.reports_dir().join(COVERAGE_REPORT_FILE)
    }

    fn write_report(&self, name: &str, text: &str) -> Result<()> {
        let path = self.ws.reports_dir().join(name);
        fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    fn ctx<'a>(&'a self, plan: &'a TestPlan) -> RepairContext<'a> {
        RepairContext {
            ws: &self.ws,
            iface: &self.iface,
            plan,
            route_unattributed: true,
        }
    }

    pub fn plan(&self, backend: &dyn LlmBackend) -> Result<TestPlan> {
        Ok(generate_plan(&self.ws.spec, &self.iface, backend, &self.ws.plan_dir())?)
    }

    pub fn load_plan(&self) -> Result<TestPlan> {
        Ok(read_plan(&self.plan_path())?)
    }

    pub fn generate(&self, plan: &TestPlan, backend: &dyn LlmBackend) -> Result<Testbench> {
        let ctx = GenContext {
            iface: &self.iface,
            cfg: &self.ws.config,
            plan,
        };
        let tb = generate_testbench(ctx, backend, &self.ws.tb_dir())?;
        tb.save(&self.state_path())?;
        Ok(tb)
    }

    pub fn load_testbench(&self) -> Result<Testbench> {
        Ok(Testbench::load(&self.state_path())?)
    }

    /// Simulation with repair. Saves the repaired testbench, the repair
    /// report and, when the simulator produced one, the coverage document.
    pub fn simulate(
        &self,
        tb: Testbench,
        plan: &TestPlan,
        backend: &dyn LlmBackend,
        gateway: &mut SimGateway,
    ) -> Result<(Testbench, SimulationOutcome, RepairReport)> {
        let (tb, outcome, report) = repair_loop(tb, gateway, backend, self.ctx(plan), self.ws.config.max_repair_iters)?;
        tb.save(&self.state_path())?;
        let path = self.ws.reports_dir().join(REPAIR_REPORT_FILE);
        report
            .write_json(&path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        if let Some(doc) = &outcome.coverage {
            self.write_report(COVERAGE_REPORT_FILE, &doc.to_json())?;
        }
        Ok((tb, outcome, report))
    }

    pub fn load_coverage(&self) -> Result<CoverageDocument> {
        let path = self.coverage_path();
        let text = fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(parse_coverage(&text)?)
    }

    /// Testcase supplement starting from a passing testbench and its
    /// coverage. Writes the trace, the best coverage document and the best
    /// testbench state.
    pub fn refine(
        &self,
        tb: Testbench,
        doc: CoverageDocument,
        plan: &TestPlan,
        backend: &dyn LlmBackend,
        gateway: &mut SimGateway,
    ) -> Result<OptimizationState> {
        let mut state = OptimizationState::new(tb, doc, self.ws.config.coverage_targets);
        let opts = SupplementOptions {
            max_opt_iters: self.ws.config.max_opt_iters,
            max_repair_iters: self.ws.config.max_repair_iters,
            keywords: self.keywords.clone(),
        };
        let result = supplement_loop(&mut state, backend, gateway, self.ctx(plan), &opts);
        let path = self.ws.reports_dir().join(OPTIMIZATION_FILE);
        state
            .write_trace(&path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        self.write_report(COVERAGE_REPORT_FILE, &state.best_doc.to_json())?;
        state.best_tb.save(&self.state_path())?;
        result?;
        Ok(state)
    }

    pub fn coverage_report(&self, doc: &CoverageDocument, plan: &TestPlan) -> CoverageReport {
        CoverageReport::from_doc(doc, plan, self.ws.config.coverage_targets)
    }
}

struct Progress {
    metrics: RunMetrics,
    errors: Vec<SimError>,
    coverage: Option<CoverageReport>,
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

fn stages(session: &Session, backend: &dyn LlmBackend, adapter: &AdapterConfig, p: &mut Progress) -> Result<()> {
    let t = Instant::now();
    let plan = session.plan(backend)?;
    p.metrics.planning_s += secs(t);

    let t = Instant::now();
    let tb = session.generate(&plan, backend)?;
    p.metrics.generation_s = secs(t);

    let t = Instant::now();
    let mut gateway = SimGateway::new(resolve_adapter(adapter, &session.ws.root))?;
    let (tb, outcome, report) = session.simulate(tb, &plan, backend, &mut gateway)?;
    p.metrics.simulation_s = secs(t);
    p.metrics.repair_report = Some(report);
    p.errors = outcome.errors.clone();
    if let Some(doc) = &outcome.coverage {
        let cov = session.coverage_report(doc, &plan);
        (p.metrics.final_code_pct, p.metrics.final_func_pct) = (cov.code_pct, cov.func_pct);
        p.coverage = Some(cov);
    }
    if !outcome.passed() {
        p.metrics.status = RunStatus::GenerationFailed;
        p.metrics.failure = Some(format!(
            "simulation still failing after {} repair rounds",
            session.ws.config.max_repair_iters
        ));
        return Ok(());
    }

    let t = Instant::now();
    match outcome.coverage {
        Some(doc) => {
            let state = session.refine(tb, doc, &plan, backend, &mut gateway)?;
            let cov = session.coverage_report(&state.best_doc, &plan);
            (p.metrics.final_code_pct, p.metrics.final_func_pct) = (cov.code_pct, cov.func_pct);
            p.coverage = Some(cov);
        }
        None => log::warn!("passing simulation produced no coverage document; skipping supplement"),
    }
    p.metrics.supplement_s = secs(t);
    p.metrics.status = RunStatus::Success;
    Ok(())
}

/// Runs planning, generation, simulation with repair, and supplement, then
/// writes the reports. Fatal errors end the run with
/// [`RunStatus::ConfigError`]; only a failure to write reports is returned
/// as an error.
pub fn run_pipeline(
    root: &Path,
    opts: &RunOptions,
    backend: &dyn LlmBackend,
    adapter: &AdapterConfig,
) -> Result<RunMetrics> {
    let started = Instant::now();
    let mut p = Progress {
        metrics: RunMetrics::empty(RunStatus::ConfigError),
        errors: Vec::new(),
        coverage: None,
    };
    let reports_dir = match Session::open(root, opts) {
        Ok(session) => {
            p.metrics.planning_s = secs(started);
            if let Err(e) = stages(&session, backend, adapter, &mut p) {
                log::error!("{e}");
                p.metrics.status = RunStatus::ConfigError;
                p.metrics.failure = Some(e.to_string());
            }
            Some(session.ws.reports_dir())
        }
        Err(e) => {
            log::error!("{e}");
            p.metrics.failure = Some(e.to_string());
            // never create a workspace root that does not exist
            root.is_dir().then(|| {
                root.join(opts.layout.out_dir.as_deref().unwrap_or(Path::new(DEFAULT_OUT_DIR)))
                    .join("reports")
            })
        }
    };
    p.metrics.total_s = secs(started).max(p.metrics.phase_sum());
    match reports_dir {
        Some(dir) => {
            emit_reports(&p.metrics, &p.errors, p.coverage.as_ref(), &dir)?;
        }
        None => log::warn!("{} is not a directory; no reports written", root.display()),
    }
    Ok(p.metrics)
}
