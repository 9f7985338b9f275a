// SPDX-License-Identifier: Apache-2.0

//! Simulator gateway: adapters, log triage and the neutral coverage model.

mod coverage;
mod gateway;
mod logscan;

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::tbgen::ComponentKind;

pub use self::coverage::{
    parse_coverage, CodeCounter, CodeMetric, CoverageDocument, CoverageError, FunctionalEntry, Locus,
};
pub use self::gateway::{
    expand_command, parse_scenario, AdapterConfig, AdapterKind, ScenarioError, ScenarioRecord, SimGateway,
    SimGatewayError, COVERAGE_FILE,
};
pub use self::logscan::{attribute_keyword, default_patterns, parse_log, ErrorPattern};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SimPhase {
    Compile,
    Elaborate,
    Build,
    Connect,
    Run,
    Report,
}

impl SimPhase {
    pub const ALL: [SimPhase; 6] = [
        SimPhase::Compile,
        SimPhase::Elaborate,
        SimPhase::Build,
        SimPhase::Connect,
        SimPhase::Run,
        SimPhase::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SimPhase::Compile => "Compile",
            SimPhase::Elaborate => "Elaborate",
            SimPhase::Build => "Build",
            SimPhase::Connect => "Connect",
            SimPhase::Run => "Run",
            SimPhase::Report => "Report",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name().eq_ignore_ascii_case(s.trim()))
    }
}

impl fmt::Display for SimPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimError {
    pub phase: SimPhase,
    pub component: Option<ComponentKind>,
    pub message: String,
    pub file: Option<String>,
    pub line: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SimStatus {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOutcome {
    pub status: SimStatus,
    pub errors: Vec<SimError>,
    pub log_path: PathBuf,
    pub coverage: Option<CoverageDocument>,
    pub wall_ms: u64,
}

impl SimulationOutcome {
    pub fn passed(&self) -> bool {
        self.status == SimStatus::Pass
    }
}

/// Errors of `outcome` raised in `phase`, in log order.
pub fn errors_in_phase(outcome: &SimulationOutcome, phase: SimPhase) -> Vec<SimError> {
    outcome.errors.iter().filter(|e| e.phase == phase).cloned().collect()
}
