// SPDX-License-Identifier: Apache-2.0

use crate::agent::AgentError;
use crate::harness::MetricsError;
use crate::optimizer::OptError;
use crate::planner::PlanError;
use crate::repair::RepairError;
use crate::rtl::IfaceError;
use crate::sim::{CoverageError, SimGatewayError};
use crate::tbgen::TbGenError;
use crate::workspace::{ConfigError, WorkspaceError};

/// Any failure surfaced by the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Iface(#[from] IfaceError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    TbGen(#[from] TbGenError),
    #[error(transparent)]
    Sim(#[from] SimGatewayError),
    #[error(transparent)]
    Coverage(#[from] CoverageError),
    #[error(transparent)]
    Repair(#[from] RepairError),
    #[error(transparent)]
    Opt(#[from] OptError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
