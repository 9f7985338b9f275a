// SPDX-License-Identifier: Apache-2.0

//! Test planning: the analysis agent turns the spec into function points,
//! stored in a line-oriented plan file.
//!
//! Plan file grammar:
//!
//! ```text
//! # spec_digest: <hex>            (optional header)
//! # created_at: <RFC 3339>        (optional header)
//! [FUNCTION_POINT]
//! id: FP-1
//! description: first line
//!   continuation lines are indented by two spaces
//! stimulus_conditions: ...
//! observability: ...
//! coverage_goal: ...
//! draft_testcase: ...
//! ```
//!
//! Markers must start in column 0. Markers inside fenced code blocks are
//! ignored.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::{assemble_prompt, fenced_blocks, AgentError, AgentPrompt, AgentRole, LlmBackend, StageLabel};
use crate::rtl::DutInterface;
use crate::workspace::SpecDocument;

pub const FUNCTION_POINT_MARKER: &str = "[FUNCTION_POINT]";
pub const PLAN_FILE: &str = "test_plan.txt";

const DIGEST_HEADER: &str = "# spec_digest:";
const CREATED_HEADER: &str = "# created_at:";

#[derive(Debug, thiserror::Error)]
pub enum PlanError {
    #[error("plan contains no {FUNCTION_POINT_MARKER} blocks")]
    PlanEmpty,
    #[error("function point block {block}: {reason}")]
    PlanMalformed { block: usize, reason: String },
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("plan file {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionPoint {
    pub id: String,
    pub description: String,
    pub stimulus_conditions: String,
    pub observability: String,
    pub coverage_goal: String,
    pub draft_testcase: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestPlan {
    pub points: Vec<FunctionPoint>,
    /// Hex SHA-256 of the spec text the plan was derived from; empty when
    /// unknown.
    pub spec_digest: String,
    pub created_at: Option<DateTime<Utc>>,
}

impl TestPlan {
    pub fn point(&self, id: &str) -> Option<&FunctionPoint> {
        self.points.iter().find(|p| p.id == id)
    }
}

pub fn spec_digest(spec: &SpecDocument) -> String {
    hex::encode(Sha256::digest(spec.raw_text.as_bytes()))
}

const FIELDS: [&str; 6] = [
    "id",
    "description",
    "stimulus_conditions",
    "observability",
    "coverage_goal",
    "draft_testcase",
];

fn field_mut<'a>(fp: &'a mut FunctionPoint, key: &str) -> &'a mut String {
    match key {
        "id" => &mut fp.id,
        "description" => &mut fp.description,
        "stimulus_conditions" => &mut fp.stimulus_conditions,
        "observability" => &mut fp.observability,
        "coverage_goal" => &mut fp.coverage_goal,
        _ => &mut fp.draft_testcase,
    }
}

fn field<'a>(fp: &'a FunctionPoint, key: &str) -> &'a str {
    match key {
        "id" => &fp.id,
        "description" => &fp.description,
        "stimulus_conditions" => &fp.stimulus_conditions,
        "observability" => &fp.observability,
        "coverage_goal" => &fp.coverage_goal,
        _ => &fp.draft_testcase,
    }
}

fn is_fence(line: &str) -> bool {
    line.starts_with("```") || line.starts_with("~~~")
}

/// Splits `key: value` when `key` is a plan field.
fn key_line(line: &str) -> Option<(&'static str, &str)> {
    let (key, value) = line.split_once(':')?;
    let key = FIELDS.into_iter().find(|f| *f == key.trim_end())?;
    Some((key, value.trim()))
}

/// Number of `[FUNCTION_POINT]` markers outside fenced code blocks.
pub fn count_markers(text: &str) -> usize {
    let mut in_fence = false;
    let mut n = 0;
    for line in text.lines() {
        let line = line.trim_end_matches('\r');
        if is_fence(line) {
            in_fence = !in_fence;
        } else if !in_fence && line.trim_end() == FUNCTION_POINT_MARKER {
            n += 1;
        }
    }
    n
}

pub fn parse_test_plan(text: &str) -> Result<TestPlan, PlanError> {
    let mut spec_digest = String::new();
    let mut created_at = None;
    let mut blocks: Vec<FunctionPoint> = Vec::new();
    let mut current_key: Option<&'static str> = None;
    let mut in_fence = false;

    for raw in text.lines() {
        let line = raw.trim_end_matches('\r');
        if is_fence(line) {
            in_fence = !in_fence;
            continue;
        }
        if in_fence {
            continue;
        }
        if line.trim_end() == FUNCTION_POINT_MARKER {
            blocks.push(FunctionPoint::default());
            current_key = None;
            continue;
        }
        let Some(fp) = blocks.last_mut() else {
            if let Some(v) = line.strip_prefix(DIGEST_HEADER) {
                spec_digest = v.trim().to_string();
            } else if let Some(v) = line.strip_prefix(CREATED_HEADER) {
                created_at = DateTime::parse_from_rfc3339(v.trim())
                    .ok()
                    .map(|t| t.with_timezone(&Utc));
            }
            continue;
        };
        if let Some(cont) = line.strip_prefix("  ") {
            if let Some(key) = current_key {
                let value = field_mut(fp, key);
                value.push('\n');
                value.push_str(cont);
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if let Some((key, value)) = key_line(line) {
            let slot = field_mut(fp, key);
            if slot.is_empty() {
                slot.push_str(value);
            } else {
                slot.push('\n');
                slot.push_str(value);
            }
            current_key = Some(key);
            continue;
        }
        // stray line: keep it with the preceding field
        let key = current_key.unwrap_or("description");
        let slot = field_mut(fp, key);
        if !slot.is_empty() {
            slot.push('\n');
        }
        slot.push_str(line.trim());
        current_key = Some(key);
    }

    if blocks.is_empty() {
        return Err(PlanError::PlanEmpty);
    }
    let mut seen = BTreeSet::new();
    for (i, fp) in blocks.iter_mut().enumerate() {
        for key in FIELDS {
            let slot = field_mut(fp, key);
            let trimmed = slot.trim_end().to_string();
            *slot = trimmed;
        }
        if fp.id.is_empty() {
            fp.id = format!("FP-{}", i + 1);
        }
        if fp.description.trim().is_empty() {
            return Err(PlanError::PlanMalformed {
                block: i + 1,
                reason: "missing description".into(),
            });
        }
        if !seen.insert(fp.id.clone()) {
            return Err(PlanError::PlanMalformed {
                block: i + 1,
                reason: format!("duplicate id {}", fp.id),
            });
        }
    }
    Ok(TestPlan {
        points: blocks,
        spec_digest,
        created_at,
    })
}

/// Serializes `plan` in the plan grammar.
pub fn plan_round_trip(plan: &TestPlan) -> String {
    let mut out = String::new();
    if !plan.spec_digest.is_empty() {
        out.push_str(&format!("{DIGEST_HEADER} {}\n", plan.spec_digest));
    }
    if let Some(t) = plan.created_at {
        out.push_str(&format!(
            "{CREATED_HEADER} {}\n",
            t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
        ));
    }
    for fp in &plan.points {
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(FUNCTION_POINT_MARKER);
        out.push('\n');
        for key in FIELDS {
            let mut lines = field(fp, key).split('\n');
            let first = lines.next().unwrap_or("");
            if first.is_empty() {
                out.push_str(&format!("{key}:\n"));
            } else {
                out.push_str(&format!("{key}: {first}\n"));
            }
            for more in lines {
                out.push_str(&format!("  {more}\n"));
            }
        }
    }
    out
}

/// Non-fatal findings about a plan.
pub fn validate_plan(plan: &TestPlan) -> Vec<String> {
    let mut warnings = Vec::new();
    for fp in &plan.points {
        for (key, value) in [
            ("stimulus_conditions", &fp.stimulus_conditions),
            ("observability", &fp.observability),
            ("coverage_goal", &fp.coverage_goal),
        ] {
            if value.trim().is_empty() {
                warnings.push(format!("{}: {key} is empty", fp.id));
            }
        }
    }
    warnings
}

fn grammar_text() -> String {
    format!(
        "Write the plan as plain text. Start every function point with a line containing exactly \
         {FUNCTION_POINT_MARKER} in the first column, followed by these `key: value` lines:\n\n\
         {FUNCTION_POINT_MARKER}\n\
         id: FP-<n>\n\
         description: <the behaviour to verify, one sentence>\n\
         stimulus_conditions: <inputs, ordering and corner values that exercise it>\n\
         observability: <outputs or internal events that show it happened>\n\
         coverage_goal: <bins or counts that must be hit>\n\
         draft_testcase: <outline of the test steps>\n\n\
         Continue long values on following lines indented by two spaces. Number ids from FP-1. \
         Only description is mandatory. Write nothing other than the plan."
    )
}

/// Three-stage prompt for the analysis agent.
pub fn build_analysis_prompt(spec: &SpecDocument, iface: &DutInterface) -> AgentPrompt {
    let role = "Act as an IC verification engineer. Read the design specification and extract the \
                signal dataflow, control dependencies, I/O interaction patterns and state \
                transitions of the design, then derive the function points that need verification."
        .to_string();

    let mut formulation = String::from(
        "For each function point state the stimulus conditions, the observability points and the \
         coverage goal, and sketch a draft testcase.\n\n",
    );
    let headings: Vec<&str> = spec.headings().collect();
    if !headings.is_empty() {
        formulation.push_str("Specification outline:\n");
        for h in &headings {
            formulation.push_str(&format!("- {h}\n"));
        }
        formulation.push('\n');
    }
    formulation.push_str("Specification:\n<<<\n");
    formulation.push_str(spec.raw_text.trim_end());
    formulation.push_str("\n>>>\n\nDUT interface:\n");
    formulation.push_str(&iface.summary());

    let parts = BTreeMap::from([
        (StageLabel::RoleCustomisation, role),
        (StageLabel::TestPlanFormulation, formulation),
        (StageLabel::OutputTemplateConstruction, grammar_text()),
    ]);
    assemble_prompt(AgentRole::Analysis, parts).expect("analysis stages are complete and non-empty")
}

/// Parses an agent reply, falling back to the contents of fenced blocks
/// when the reply wraps the whole plan in a fence.
pub fn parse_agent_plan(raw: &str) -> Result<TestPlan, PlanError> {
    match parse_test_plan(raw) {
        Err(PlanError::PlanEmpty) => {
            let inner: Vec<&str> = fenced_blocks(raw).iter().map(|b| b.body).collect();
            parse_test_plan(&inner.join("\n"))
        }
        other => other,
    }
}

/// Runs the analysis agent and writes `<plan_dir>/test_plan.txt`.
pub fn generate_plan(
    spec: &SpecDocument,
    iface: &DutInterface,
    backend: &dyn LlmBackend,
    plan_dir: &Path,
) -> Result<TestPlan, PlanError> {
    let prompt = build_analysis_prompt(spec, iface);
    let response = backend.invoke(&prompt)?;
    let mut plan = parse_agent_plan(&response.raw_text)?;
    plan.spec_digest = spec_digest(spec);
    plan.created_at = Some(Utc::now());
    for w in validate_plan(&plan) {
        log::warn!("test plan: {w}");
    }
    write_plan(&plan, &plan_dir.join(PLAN_FILE))?;
    Ok(plan)
}

pub fn write_plan(plan: &TestPlan, path: &Path) -> Result<(), PlanError> {
    fs::write(path, plan_round_trip(plan)).map_err(|source| PlanError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_plan(path: &Path) -> Result<TestPlan, PlanError> {
    let text = fs::read_to_string(path).map_err(|source| PlanError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_test_plan(&text)
}
