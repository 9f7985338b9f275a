// SPDX-License-Identifier: Apache-2.0

//! Automated UVM testbench generation for RTL designs.
//!
//! The pipeline runs in four stages:
//!
//! 1. test planning ([`planner`]): an analysis agent turns the Markdown design
//!    spec into a list of function points;
//! 2. testbench generation ([`tbgen`]): templates render the structurally
//!    regular components, generation agents write the behavioural ones, in
//!    dependency order;
//! 3. simulation analysis ([`sim`], [`repair`]): the testbench is simulated
//!    and failing components are regenerated phase by phase;
//! 4. testcase supplement ([`optimizer`]): coverage gaps drive an
//!    optimisation agent that writes additional sequences until the target is
//!    met or the iteration budget runs out.
//!
//! [`harness`] sequences the stages, measures them and writes the reports.

pub mod agent;
pub mod harness;
pub mod optimizer;
pub mod planner;
pub mod repair;
pub mod rtl;
pub mod sim;
pub mod tbgen;
pub mod workspace;

mod error;

pub use error::{Error, Result};
