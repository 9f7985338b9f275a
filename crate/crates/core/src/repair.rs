// SPDX-License-Identifier: Apache-2.0

//! Phase-scoped repair: walk the simulation phases in order, hand each
//! erroring component back to its generation agent together with the error
//! messages, and re-simulate until the run passes or the budget is spent.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::{assemble_prompt, AgentError, AgentRole, LlmBackend, StageLabel};
use crate::planner::TestPlan;
use crate::rtl::DutInterface;
use crate::sim::{SimError, SimGateway, SimGatewayError, SimPhase, SimStatus, SimulationOutcome};
use crate::tbgen::{
    dependencies_of, ensure_trailing_newline, generation_parts, render_template, ComponentKind, Provenance, TbGenError,
    Testbench, UvmComponent,
};
use crate::workspace::Workspace;

pub const REPAIR_REPORT_FILE: &str = "repair.json";

#[derive(Debug, thiserror::Error)]
pub enum RepairError {
    #[error("repair requested for a passing simulation")]
    NotFailing,
    #[error("no error could be attributed to a testbench component")]
    NoActionableErrors,
    #[error(transparent)]
    TbGen(#[from] TbGenError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Sim(#[from] SimGatewayError),
}

/// Generation agent responsible for `kind`. Template kinds map to their
/// generation role too; the repair engine re-renders those instead of
/// calling an agent.
pub fn gene_agent_map(kind: ComponentKind) -> AgentRole {
    AgentRole::Generation(kind)
}

#[derive(Debug, Clone, Copy)]
pub struct RepairContext<'a> {
    pub ws: &'a Workspace,
    /// Classified interface of the DUT.
    pub iface: &'a DutInterface,
    pub plan: &'a TestPlan,
    /// Send errors without an attributed component to the testcase agent.
    pub route_unattributed: bool,
}

/// One component handled during a repair round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairAction {
    pub kind: ComponentKind,
    /// Earliest phase among the component's errors.
    pub phase: SimPhase,
    pub messages: Vec<String>,
    /// False when the agent returned no code and the old version was kept.
    pub regenerated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairRound {
    pub round_no: u32,
    pub errors_seen: usize,
    pub components_regenerated: Vec<ComponentKind>,
    pub outcome: SimStatus,
    pub errors: Vec<SimError>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairReport {
    pub rounds: Vec<RepairRound>,
    pub final_status: SimStatus,
    pub simulations_run: u32,
}

impl RepairReport {
    /// Index (1-based) of the simulation that first passed, if any.
    pub fn passing_simulation(&self) -> Option<u32> {
        (self.final_status == SimStatus::Pass).then_some(self.simulations_run)
    }

    pub fn write_json(&self, path: &Path) -> std::io::Result<()> {
        fs::write(path, serde_json::to_string_pretty(self).expect("report serializes"))
    }
}

/// Groups the outcome's errors by component, visiting phases in order.
/// Components appear in the order their first error's phase is reached.
pub fn group_errors(
    outcome: &SimulationOutcome,
    route_unattributed: bool,
) -> Vec<(ComponentKind, SimPhase, Vec<&SimError>)> {
    let mut groups: Vec<(ComponentKind, SimPhase, Vec<&SimError>)> = Vec::new();
    for phase in SimPhase::ALL {
        for err in outcome.errors.iter().filter(|e| e.phase == phase) {
            let kind = match (err.component, route_unattributed) {
                (Some(k), _) => k,
                (None, true) => ComponentKind::Testcase,
                (None, false) => continue,
            };
            match groups.iter_mut().find(|(k, _, _)| *k == kind) {
                Some((_, _, errs)) => errs.push(err),
                None => groups.push((kind, phase, vec![err])),
            }
        }
    }
    groups
}

fn repair_notes(component: &UvmComponent, errors: &[&SimError]) -> String {
    let mut s = format!(
        "\n\nThe previous version of {} failed simulation with these errors:\n",
        component.file_name
    );
    for e in errors {
        s.push_str(&format!("- [{}] {}\n", e.phase, e.message));
    }
    s.push_str(&format!(
        "\nPrevious source:\n```systemverilog\n{}\n```\nFix every reported error and return the complete corrected file.",
        component.source.trim_end()
    ));
    s
}

/// Regenerates every component with attributed errors in `outcome`.
pub fn fix_errors(
    outcome: &SimulationOutcome,
    tb: &Testbench,
    ctx: RepairContext<'_>,
    backend: &dyn LlmBackend,
    round_no: u32,
) -> Result<(Testbench, Vec<RepairAction>), RepairError> {
    if outcome.status == SimStatus::Pass {
        return Err(RepairError::NotFailing);
    }
    let groups = group_errors(outcome, ctx.route_unattributed);
    if groups.is_empty() {
        return Err(RepairError::NoActionableErrors);
    }
    let reason = format!("repair round {round_no}");
    let mut next = tb.clone();
    let mut actions = Vec::new();
    for (kind, phase, errors) in groups {
        let messages: Vec<String> = errors.iter().map(|e| e.message.clone()).collect();
        let regenerated = if kind.is_template() {
            let fresh = render_template(kind, ctx.iface, &ctx.ws.config)?;
            next.install(fresh, &reason);
            true
        } else {
            let current = tb.get(kind).ok_or(TbGenError::IncompleteSet(vec![kind]))?;
            let deps = dependencies_of(kind, tb);
            let mut parts: BTreeMap<StageLabel, String> = generation_parts(kind, ctx.plan, &deps, ctx.iface)?;
            parts
                .get_mut(&StageLabel::MistakeMitigation)
                .expect("generation prompt has a mistake mitigation stage")
                .push_str(&repair_notes(current, &errors));
            let prompt = assemble_prompt(gene_agent_map(kind), parts)?;
            let response = backend.invoke(&prompt)?;
            match response.extracted_code.filter(|c| !c.trim().is_empty()) {
                Some(code) => {
                    next.install(
                        UvmComponent {
                            kind,
                            file_name: current.file_name.clone(),
                            source: ensure_trailing_newline(code),
                            version: 0,
                            provenance: Provenance::Agent {
                                role: prompt.role,
                                prompt_digest: prompt.digest(),
                            },
                        },
                        &reason,
                    );
                    true
                }
                None => {
                    log::warn!("repair of {kind} returned no code; keeping version {}", current.version);
                    false
                }
            }
        };
        actions.push(RepairAction {
            kind,
            phase,
            messages,
            regenerated,
        });
    }
    Ok((next, actions))
}

/// Simulates `tb` and repairs it for at most `max_iters` rounds.
pub fn repair_loop(
    mut tb: Testbench,
    gateway: &mut SimGateway,
    backend: &dyn LlmBackend,
    ctx: RepairContext<'_>,
    max_iters: u32,
) -> Result<(Testbench, SimulationOutcome, RepairReport), RepairError> {
    let tb_dir = ctx.ws.tb_dir();
    tb.write_files(&tb_dir)?;
    let mut outcome = gateway.run(&tb, ctx.ws)?;
    let mut simulations_run = 1;
    let mut rounds = Vec::new();
    while !outcome.passed() && (rounds.len() as u32) < max_iters {
        let round_no = rounds.len() as u32 + 1;
        let (next, actions) = fix_errors(&outcome, &tb, ctx, backend, round_no)?;
        tb = next;
        tb.write_files(&tb_dir)?;
        let errors = outcome.errors.clone();
        outcome = gateway.run(&tb, ctx.ws)?;
        simulations_run += 1;
        rounds.push(RepairRound {
            round_no,
            errors_seen: errors.len(),
            components_regenerated: actions.iter().filter(|a| a.regenerated).map(|a| a.kind).collect(),
            outcome: outcome.status,
            errors,
        });
    }
    let report = RepairReport {
        rounds,
        final_status: outcome.status,
        simulations_run,
    };
    Ok((tb, outcome, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn err(phase: SimPhase, kind: Option<ComponentKind>, msg: &str) -> SimError {
        SimError {
            phase,
            component: kind,
            message: msg.into(),
            file: None,
            line: None,
        }
    }

    fn failing(errors: Vec<SimError>) -> SimulationOutcome {
        SimulationOutcome {
            status: SimStatus::Fail,
            errors,
            log_path: PathBuf::new(),
            coverage: None,
            wall_ms: 0,
        }
    }

    #[test]
    fn agent_map() {
        assert_eq!(gene_agent_map(ComponentKind::Driver).agent_id(), "G_driver_agent");
        assert_eq!(gene_agent_map(ComponentKind::Monitor).agent_id(), "G_monitor_agent");
        assert_eq!(
            gene_agent_map(ComponentKind::Top),
            AgentRole::Generation(ComponentKind::Top)
        );
    }

    #[test]
    fn grouping_follows_phase_order() {
        use ComponentKind::*;
        let o = failing(vec![
            err(SimPhase::Run, Some(Scoreboard), "late"),
            err(SimPhase::Compile, Some(Monitor), "a"),
            err(SimPhase::Compile, Some(Monitor), "b"),
            err(SimPhase::Build, None, "orphan"),
        ]);
        let groups = group_errors(&o, true);
        let kinds: Vec<_> = groups.iter().map(|g| (g.0, g.1, g.2.len())).collect();
        assert_eq!(
            kinds,
            [
                (Monitor, SimPhase::Compile, 2),
                (Testcase, SimPhase::Build, 1),
                (Scoreboard, SimPhase::Run, 1)
            ]
        );
        assert_eq!(group_errors(&o, false).len(), 2);
    }
}
