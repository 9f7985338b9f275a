// SPDX-License-Identifier: Apache-2.0

//! Scripted scenarios shared by the property suites and the acceptance
//! runner.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use chrono::{TimeZone, Utc};
use proptest::prelude::*;

use uvmforge::agent::{AgentError, AgentPrompt, AgentResponse, LlmBackend};
use uvmforge::harness::Session;
use uvmforge::optimizer::{supplement_loop, GapKeywords, OptimizationState, SupplementOptions};
use uvmforge::planner::{FunctionPoint, TestPlan};
use uvmforge::repair::{repair_loop, RepairContext};
use uvmforge::sim::{CodeCounter, CodeMetric, CoverageDocument, FunctionalEntry, ScenarioRecord, SimGateway, SimPhase};
use uvmforge::tbgen::Testbench;
use uvmforge::workspace::CoverageTargets;

use super::snapshot;

/// Wraps a backend and counts its calls.
pub struct Counting<B> {
    pub inner: B,
    pub calls: AtomicUsize,
}

impl<B> Counting<B> {
    pub fn new(inner: B) -> Self {
        Counting {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<B: LlmBackend> LlmBackend for Counting<B> {
    fn invoke(&self, prompt: &AgentPrompt) -> Result<AgentResponse, AgentError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.invoke(prompt)
    }
}

pub fn ctx<'a>(session: &'a Session, plan: &'a TestPlan) -> RepairContext<'a> {
    RepairContext {
        ws: &session.ws,
        iface: &session.iface,
        plan,
        route_unattributed: true,
    }
}

const FAIL_FILES: [Option<&str>; 5] = [
    Some("uart_driver.sv"),
    Some("uart_monitor.sv"),
    Some("uart_scoreboard.sv"),
    Some("uart_interface.sv"),
    None,
];

/// Scripted outcomes: `true` passes, `false` fails with an error chosen by
/// `pick`.
pub fn records(script: &[(bool, u8)]) -> Vec<ScenarioRecord> {
    script
        .iter()
        .map(|&(pass, pick)| {
            if pass {
                ScenarioRecord::pass(None)
            } else {
                let phase = SimPhase::ALL[pick as usize % SimPhase::ALL.len()];
                let file = FAIL_FILES[pick as usize % FAIL_FILES.len()];
                ScenarioRecord::fail(phase, file, "UVM_ERROR @ 0: scripted failure")
            }
        })
        .collect()
}

/// Runs the repair loop over one script and checks the simulation bound
/// and the stop-on-first-pass rule.
pub fn repair_bound_case(
    session: &Session,
    plan: &TestPlan,
    tb: &Testbench,
    backend: &dyn LlmBackend,
    script: &[(bool, u8)],
    max_iters: u32,
) -> Result<(), String> {
    let mut gateway = SimGateway::scripted(records(script));
    let (_, outcome, report) =
        repair_loop(tb.clone(), &mut gateway, backend, ctx(session, plan), max_iters).map_err(|e| e.to_string())?;
    let budget = 1 + max_iters;
    if report.simulations_run > budget {
        return Err(format!("{} simulations with budget {budget}", report.simulations_run));
    }
    let expected = match script.iter().position(|(pass, _)| *pass) {
        Some(i) => (i as u32 + 1).min(budget),
        None => budget,
    };
    if report.simulations_run != expected {
        return Err(format!(
            "{} simulations, expected {expected} for {script:?}",
            report.simulations_run
        ));
    }
    if report.simulations_run != gateway.runs() {
        return Err("report and gateway disagree on simulation count".into());
    }
    if outcome.passed() != script[..expected as usize].iter().any(|(p, _)| *p) {
        return Err("final status does not match the script".into());
    }
    Ok(())
}

pub fn script_strategy() -> impl Strategy<Value = (Vec<(bool, u8)>, u32)> {
    (0u32..=4).prop_flat_map(|max| {
        (
            prop::collection::vec((any::<bool>(), any::<u8>()), (1 + max) as usize),
            Just(max),
        )
    })
}

/// Coverage document at `code` percent over 100 line points and `func`
/// percent over 100 bins of FP-1.
pub fn cov_doc(code: u64, func: u64) -> CoverageDocument {
    CoverageDocument {
        code: BTreeMap::from([(CodeMetric::Line, CodeCounter::new(code, 100))]),
        functional: vec![FunctionalEntry {
            fp_id: "FP-1".into(),
            bins_covered: func,
            bins_total: 100,
        }],
    }
}

fn pass_at(code: u64, func: u64) -> ScenarioRecord {
    ScenarioRecord::pass(Some(cov_doc(code, func)))
}

fn supplement_opts(max_opt: u32) -> SupplementOptions {
    SupplementOptions {
        max_opt_iters: max_opt,
        max_repair_iters: 2,
        keywords: GapKeywords::default(),
    }
}

/// 70, then a regression to 65 that must be reverted with the files on
/// disk restored byte for byte, then 80 which is kept.
pub fn optimizer_revert_case(
    session: &Session,
    tb: &Testbench,
    plan: &TestPlan,
    backend: &dyn LlmBackend,
) -> Result<(), String> {
    let tb_dir = session.ws.tb_dir();
    tb.write_files(&tb_dir).map_err(|e| e.to_string())?;
    let before = snapshot(&tb_dir);
    let targets = CoverageTargets {
        code_pct: 90.0,
        func_pct: 90.0,
    };
    let mut state = OptimizationState::new(tb.clone(), cov_doc(70, 70), targets);
    let mut gateway = SimGateway::scripted(vec![pass_at(65, 65), pass_at(80, 80)]);

    supplement_loop(
        &mut state,
        backend,
        &mut gateway,
        ctx(session, plan),
        &supplement_opts(1),
    )
    .map_err(|e| e.to_string())?;
    if state.trace.len() != 1 || !state.trace[0].reverted {
        return Err(format!("first iteration not reverted: {:?}", state.trace));
    }
    if snapshot(&tb_dir) != before {
        return Err("rollback changed testbench files".into());
    }
    if state.best_tb != *tb {
        return Err("rollback changed the best testbench".into());
    }

    supplement_loop(
        &mut state,
        backend,
        &mut gateway,
        ctx(session, plan),
        &supplement_opts(2),
    )
    .map_err(|e| e.to_string())?;
    if (state.best_cov.0 - 80.0).abs() > 1e-9 || (state.best_cov.1 - 80.0).abs() > 1e-9 {
        return Err(format!("best coverage {:?}, expected 80/80", state.best_cov));
    }
    let reverts = state.trace.iter().filter(|t| t.reverted).count();
    if reverts != 1 || state.iteration != 2 {
        return Err(format!("{reverts} reverts over {} iterations", state.iteration));
    }
    let supplements = state
        .best_tb
        .history
        .iter()
        .filter(|r| r.reason.starts_with("supplement round"))
        .count();
    if supplements != 1 {
        return Err(format!(
            "{supplements} supplement revisions after one accepted iteration"
        ));
    }
    Ok(())
}

/// Coverage never improves: the loop must stop after exactly two
/// iterations.
pub fn optimizer_budget_case(
    session: &Session,
    tb: &Testbench,
    plan: &TestPlan,
    backend: &dyn LlmBackend,
) -> Result<(), String> {
    let targets = CoverageTargets {
        code_pct: 90.0,
        func_pct: 90.0,
    };
    let mut state = OptimizationState::new(tb.clone(), cov_doc(60, 60), targets);
    let mut gateway = SimGateway::scripted(vec![pass_at(60, 60), pass_at(55, 60), pass_at(99, 99)]);
    supplement_loop(
        &mut state,
        backend,
        &mut gateway,
        ctx(session, plan),
        &supplement_opts(2),
    )
    .map_err(|e| e.to_string())?;
    if state.iteration != 2 || state.trace.len() != 2 {
        return Err(format!("stopped after {} iterations", state.iteration));
    }
    if gateway.runs() != 2 || gateway.remaining() != 1 {
        return Err(format!("{} simulations for two iterations", gateway.runs()));
    }
    if state.trace.iter().any(|t| t.accepted) {
        return Err("a non-improving iteration was accepted".into());
    }
    Ok(())
}

fn line() -> impl Strategy<Value = String> {
    "[A-Za-z0-9][A-Za-z0-9 ,.()_=<>-]{0,30}[A-Za-z0-9.)]"
}

fn value(required: bool) -> impl Strategy<Value = String> {
    let min = usize::from(required);
    prop::collection::vec(line(), min..4).prop_map(|lines| lines.join("\n"))
}

fn point() -> impl Strategy<Value = FunctionPoint> {
    (value(true), value(false), value(false), value(false), value(false)).prop_map(
        |(description, stimulus_conditions, observability, coverage_goal, draft_testcase)| FunctionPoint {
            id: String::new(),
            description,
            stimulus_conditions,
            observability,
            coverage_goal,
            draft_testcase,
        },
    )
}

pub fn plan_strategy() -> impl Strategy<Value = TestPlan> {
    (
        prop::collection::vec(point(), 1..8),
        prop::option::of("[0-9a-f]{64}"),
        prop::option::of(0i64..4_000_000_000),
        any::<bool>(),
    )
        .prop_map(|(mut points, digest, stamp, plain_ids)| {
            for (i, p) in points.iter_mut().enumerate() {
                p.id = if plain_ids {
                    format!("FP-{}", i + 1)
                } else {
                    format!("UART-{:03}", i * 7 + 1)
                };
            }
            TestPlan {
                points,
                spec_digest: digest.unwrap_or_default(),
                created_at: stamp.map(|s| Utc.timestamp_opt(s, 0).unwrap()),
            }
        })
}
