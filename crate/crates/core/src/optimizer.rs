// SPDX-License-Identifier: Apache-2.0

//! Coverage-driven testcase supplement.
//!
//! Each iteration classifies the remaining coverage gaps, asks the
//! optimisation agent for new stimulus, installs it on a copy of the best
//! testbench and simulates that copy under the repair loop. The copy
//! replaces the best testbench only when it passes with coverage that is at
//! least as good on both axes and better on one; otherwise the previous
//! best is restored on disk.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{assemble_prompt, fenced_blocks, AgentError, AgentPrompt, AgentRole, LlmBackend, StageLabel};
use crate::planner::TestPlan;
use crate::repair::{repair_loop, RepairContext, RepairError};
use crate::rtl::DutInterface;
use crate::sim::{CodeMetric, CoverageDocument, Locus, SimGateway};
use crate::tbgen::{ensure_trailing_newline, ComponentKind, Provenance, TbGenError, Testbench, UvmComponent};
use crate::workspace::{CoverageTargets, RtlSource};

pub const OPTIMIZATION_FILE: &str = "optimization.json";
pub const COVERAGE_REPORT_FILE: &str = "coverage.json";
pub const GAP_KEYWORDS_FILE: &str = "gap_keywords.json";

/// Lines of RTL shown on each side of an uncovered locus.
pub const EXCERPT_RADIUS: usize = 20;

#[derive(Debug, thiserror::Error)]
pub enum OptError {
    #[error("no coverage gaps to address")]
    NoGaps,
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Repair(#[from] RepairError),
    #[error(transparent)]
    TbGen(#[from] TbGenError),
    #[error("{}: {message}", path.display())]
    Keywords { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GapCategory {
    LogicRegion,
    TransactionStage,
    StimulusDependency,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageGap {
    pub category: GapCategory,
    pub target: String,
    pub fp_ids: Vec<String>,
    pub evidence: Vec<String>,
    /// Uncovered bins or code points behind the gap.
    pub uncovered: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loci: Vec<Locus>,
}

/// Keyword lists used to categorise functional gaps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapKeywords {
    pub ordering: Vec<String>,
    pub cross: Vec<String>,
}

impl Default for GapKeywords {
    fn default() -> Self {
        let words = |list: &[&str]| list.iter().map(|s| s.to_string()).collect();
        GapKeywords {
            ordering: words(&[
                "then",
                "after",
                "before",
                "back-to-back",
                "followed by",
                "sequence",
                "order",
                "consecutive",
                "burst",
                "subsequent",
                "first",
                "next",
                "repeated",
            ]),
            cross: words(&[
                "and",
                "while",
                "simultaneous",
                "simultaneously",
                "concurrent",
                "both",
                "cross",
                "combination",
                "together",
                "same time",
            ]),
        }
    }
}

impl GapKeywords {
    /// Reads `<root>/gap_keywords.json` when present.
    pub fn load_or_default(root: &Path) -> Result<Self, OptError> {
        let path = root.join(GAP_KEYWORDS_FILE);
        if !path.is_file() {
            return Ok(Self::default());
        }
        let text = fs::read_to_string(&path).map_err(|e| OptError::Keywords {
            path: path.clone(),
            message: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| OptError::Keywords {
            path,
            message: e.to_string(),
        })
    }
}

fn mentions(text: &str, word: &str) -> bool {
    let word = word.to_lowercase();
    text.match_indices(&word).any(|(i, _)| {
        let before = text[..i].chars().next_back();
        let after = text[i + word.len()..].chars().next();
        let wordy = |c: Option<char>| c.is_some_and(|c| c.is_alphanumeric() || c == '_');
        !wordy(before) && !wordy(after)
    })
}

pub fn analyze_gaps(cov: &CoverageDocument, plan: &TestPlan, iface: &DutInterface) -> Vec<CoverageGap> {
    analyze_gaps_with(cov, plan, iface, &GapKeywords::default())
}

pub fn analyze_gaps_with(
    cov: &CoverageDocument,
    plan: &TestPlan,
    iface: &DutInterface,
    kw: &GapKeywords,
) -> Vec<CoverageGap> {
    let mut gaps = Vec::new();
    for entry in cov.functional.iter().filter(|e| e.bins_covered < e.bins_total) {
        let fp = plan.point(&entry.fp_id);
        let text = fp
            .map(|p| format!("{}\n{}", p.description, p.stimulus_conditions))
            .unwrap_or_default()
            .to_lowercase();
        let ports_named = iface.data_ports().filter(|p| mentions(&text, &p.name)).count();
        let category = if kw.ordering.iter().any(|w| mentions(&text, w)) {
            GapCategory::TransactionStage
        } else {
            if ports_named < 2 && !kw.cross.iter().any(|w| mentions(&text, w)) {
                log::debug!(
                    "{}: no ordering or cross terms; treating as stimulus dependency",
                    entry.fp_id
                );
            }
            GapCategory::StimulusDependency
        };
        let missing = entry.missing();
        gaps.push(CoverageGap {
            category,
            target: match fp {
                Some(p) => format!("{}: {}", entry.fp_id, first_line(&p.description)),
                None => entry.fp_id.clone(),
            },
            fp_ids: vec![entry.fp_id.clone()],
            evidence: vec![
                format!("{missing} bins uncovered"),
                format!("{}/{} bins covered", entry.bins_covered, entry.bins_total),
            ],
            uncovered: missing,
            loci: Vec::new(),
        });
    }
    for (metric, counter) in cov.code.iter().filter(|(_, c)| c.covered < c.total) {
        let missing = counter.missing();
        let target = match counter.uncovered.first() {
            Some(l) => format!("{metric} coverage near {}:{}", l.file, l.line),
            None => format!("{metric} coverage of {}", iface.module_name),
        };
        gaps.push(CoverageGap {
            category: GapCategory::LogicRegion,
            target,
            fp_ids: Vec::new(),
            evidence: vec![
                format!("{missing} {metric} points uncovered"),
                format!("{}/{} {metric} points covered", counter.covered, counter.total),
            ],
            uncovered: missing,
            loci: counter.uncovered.clone(),
        });
    }
    gaps.sort_by_key(|g| std::cmp::Reverse(g.uncovered));
    gaps
}

fn first_line(s: &str) -> &str {
    s.lines().next().unwrap_or("")
}

/// RTL lines around every uncovered locus of the logic-region gaps, or the
/// top module's opening lines when no locus is known.
pub fn dut_excerpt(sources: &[RtlSource], gaps: &[CoverageGap], top_module: &str) -> String {
    let mut out = String::new();
    for locus in gaps
        .iter()
        .filter(|g| g.category == GapCategory::LogicRegion)
        .flat_map(|g| g.loci.iter())
    {
        let base = locus.file.rsplit(['/', '\\']).next().unwrap_or(&locus.file);
        let Some(src) = sources
            .iter()
            .find(|s| s.path.file_name().is_some_and(|n| n.to_string_lossy() == base))
        else {
            continue;
        };
        let lines: Vec<&str> = src.text.lines().collect();
        if lines.is_empty() {
            continue;
        }
        let center = (locus.line.max(1) as usize).min(lines.len());
        let lo = center.saturating_sub(EXCERPT_RADIUS).max(1);
        let hi = (center + EXCERPT_RADIUS).min(lines.len());
        out.push_str(&format!("// {base} lines {lo}-{hi}\n"));
        for (i, text) in lines.iter().enumerate().take(hi).skip(lo - 1) {
            out.push_str(&format!("{:>5} | {text}\n", i + 1));
        }
        out.push('\n');
    }
    if out.is_empty() {
        let needle = format!("module {top_module}");
        for src in sources {
            let lines: Vec<&str> = src.text.lines().collect();
            if let Some(start) = lines.iter().position(|l| l.contains(&needle)) {
                let hi = (start + 2 * EXCERPT_RADIUS).min(lines.len());
                for (i, text) in lines.iter().enumerate().take(hi).skip(start) {
                    out.push_str(&format!("{:>5} | {text}\n", i + 1));
                }
                break;
            }
        }
    }
    out
}

fn category_name(c: GapCategory) -> &'static str {
    match c {
        GapCategory::LogicRegion => "logic region",
        GapCategory::TransactionStage => "transaction stage",
        GapCategory::StimulusDependency => "stimulus dependency",
    }
}

/// Four-stage prompt for the optimisation agent.
pub fn build_optimization_prompt(
    gaps: &[CoverageGap],
    dut_excerpt: &str,
    plan: &TestPlan,
    tb: &Testbench,
) -> Result<AgentPrompt, OptError> {
    if gaps.is_empty() {
        return Err(OptError::NoGaps);
    }
    let seq_name = ComponentKind::Sequence.type_name(&tb.dut);
    let test_name = ComponentKind::Testcase.type_name(&tb.dut);

    let role = format!(
        "You are a UVM verification engineer closing coverage on the {} design. You extend existing \
         stimulus so that uncovered logic and function points get exercised.",
        tb.dut
    );

    let mut analysis = String::from("DUT section under analysis:\n```verilog\n");
    if dut_excerpt.trim().is_empty() {
        analysis.push_str("// no RTL excerpt available\n");
    } else {
        analysis.push_str(dut_excerpt.trim_end());
        analysis.push('\n');
    }
    analysis.push_str("```\n");
    for (i, gap) in gaps.iter().enumerate() {
        analysis.push_str(&format!(
            "\n### Gap {}: {} ({})\n",
            i + 1,
            gap.target,
            category_name(gap.category)
        ));
        for e in &gap.evidence {
            analysis.push_str(&format!("- {e}\n"));
        }
        for id in &gap.fp_ids {
            if let Some(fp) = plan.point(id) {
                if !fp.stimulus_conditions.is_empty() {
                    analysis.push_str(&format!(
                        "- intended stimulus: {}\n",
                        fp.stimulus_conditions.replace('\n', " ")
                    ));
                }
                if !fp.coverage_goal.is_empty() {
                    analysis.push_str(&format!("- coverage goal: {}\n", fp.coverage_goal.replace('\n', " ")));
                }
            }
        }
        let hint = match gap.category {
            GapCategory::LogicRegion => "Reach the listed RTL lines with input values that take the untaken branches.",
            GapCategory::TransactionStage => "Issue the transactions in the order the function point describes, including back-to-back and interrupted orderings.",
            GapCategory::StimulusDependency => "Combine the input conditions the function point depends on in the same cycle or transaction.",
        };
        analysis.push_str(&format!("- approach: {hint}\n"));
    }

    let mut supplement = format!(
        "Return an updated {seq_name} class that keeps its current stimulus and adds new stimulus for \
         every gap above: constrained-random items plus directed corner cases such as varying payload \
         sizes, minimum and maximum field values, back-to-back transactions and transactions that \
         trigger error or interrupt conditions. Use inline randomize() with constraints rather than \
         editing the sequence item. If {test_name} has to change to run the new stimulus, return the \
         full updated {test_name} in a second code block.\n"
    );
    for kind in [ComponentKind::Sequence, ComponentKind::Testcase] {
        if let Some(c) = tb.get(kind) {
            supplement.push_str(&format!(
                "\nCurrent {} ({}):\n```systemverilog\n{}\n```\n",
                kind.type_name(&tb.dut),
                c.file_name,
                c.source.trim_end()
            ));
        }
    }

    let mitigation = format!(
        "- The code must compile: no syntax errors, no undeclared identifiers, balanced begin/end and class/endclass.\n\
         - Do not create functionally invalid behaviour: respect reset, protocol handshakes and legal value ranges of the DUT.\n\
         - Keep the class names {seq_name} and {test_name} and the existing `uvm_object_utils/`uvm_component_utils registrations.\n\
         - Touch only the sequence and the testcase; every other component stays as it is.\n\
         - Return each file complete, in its own ```systemverilog code block.\n"
    );

    let parts = BTreeMap::from([
        (StageLabel::RoleCustomisation, role),
        (StageLabel::CoverageAnalysis, analysis),
        (StageLabel::StimulusSupplement, supplement),
        (StageLabel::MistakeMitigation, mitigation),
    ]);
    Ok(assemble_prompt(AgentRole::Optimization, parts)?)
}

/// Splits an optimisation reply into sequence and testcase sources.
pub fn supplement_sources(raw: &str) -> Vec<(ComponentKind, String)> {
    let mut out: Vec<(ComponentKind, String)> = Vec::new();
    let hdl = |info: &str| {
        let lang = info.split_whitespace().next().unwrap_or("");
        lang.is_empty() || lang.eq_ignore_ascii_case("systemverilog") || lang.eq_ignore_ascii_case("verilog")
    };
    let mut bodies: Vec<&str> = fenced_blocks(raw)
        .into_iter()
        .filter(|b| hdl(b.info))
        .map(|b| b.body)
        .collect();
    if bodies.is_empty() {
        if let Some(code) = crate::agent::extract_code(raw) {
            return vec![(ComponentKind::Sequence, code)];
        }
    }
    bodies.retain(|b| !b.trim().is_empty());
    for body in bodies {
        let kind = if body.contains("extends uvm_test") {
            ComponentKind::Testcase
        } else {
            ComponentKind::Sequence
        };
        match out.iter_mut().find(|(k, _)| *k == kind) {
            // keep the longest block per kind
            Some((_, existing)) if existing.lines().count() < body.lines().count() => *existing = body.to_string(),
            Some(_) => {}
            None => out.push((kind, body.to_string())),
        }
    }
    out
}

/// Count-weighted code coverage over line, branch and toggle, and
/// bin-weighted functional coverage. Empty denominators count as 100.
pub fn coverage_pcts(doc: &CoverageDocument) -> (f64, f64) {
    let (c, t) = doc
        .code
        .values()
        .fold((0u64, 0u64), |(c, t), e| (c + e.covered, t + e.total));
    let (fc, ft) = doc
        .functional
        .iter()
        .fold((0u64, 0u64), |(c, t), e| (c + e.bins_covered, t + e.bins_total));
    let pct = |num: u64, den: u64, what: &str| {
        if den == 0 {
            log::warn!("no {what} coverage points recorded; counting as 100%");
            100.0
        } else {
            100.0 * num as f64 / den as f64
        }
    };
    (pct(c, t, "code"), pct(fc, ft, "functional"))
}

pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

const EPS: f64 = 1e-9;

/// Both axes at least as good and one strictly better.
pub fn improves(new: (f64, f64), best: (f64, f64)) -> bool {
    new.0 + EPS >= best.0 && new.1 + EPS >= best.1 && (new.0 > best.0 + EPS || new.1 > best.1 + EPS)
}

pub fn meets(cov: (f64, f64), target: (f64, f64)) -> bool {
    cov.0 + EPS >= target.0 && cov.1 + EPS >= target.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: u32,
    pub gaps: usize,
    pub attempted_cov: Option<(f64, f64)>,
    pub accepted: bool,
    pub reverted: bool,
    pub simulations: u32,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationState {
    pub best_tb: Testbench,
    pub best_doc: CoverageDocument,
    pub best_cov: (f64, f64),
    pub iteration: u32,
    pub target: (f64, f64),
    pub trace: Vec<TraceRecord>,
}

impl OptimizationState {
    pub fn new(tb: Testbench, doc: CoverageDocument, targets: CoverageTargets) -> Self {
        let best_cov = coverage_pcts(&doc);
        OptimizationState {
            best_tb: tb,
            best_doc: doc,
            best_cov,
            iteration: 0,
            target: (targets.code_pct, targets.func_pct),
            trace: Vec::new(),
        }
    }

    pub fn write_trace(&self, path: &Path) -> std::io::Result<()> {
        let doc = serde_json::json!({
            "iterations": self.iteration,
            "target": {"code_pct": self.target.0, "func_pct": self.target.1},
            "best": {"code_pct": round2(self.best_cov.0), "func_pct": round2(self.best_cov.1)},
            "trace": self.trace,
        });
        fs::write(path, serde_json::to_string_pretty(&doc).expect("trace serializes"))
    }
}

/// Budgets and tuning of one supplement run.
#[derive(Debug, Clone)]
pub struct SupplementOptions {
    pub max_opt_iters: u32,
    pub max_repair_iters: u32,
    pub keywords: GapKeywords,
}

/// Runs supplement iterations on `state` until the target is met or the
/// budget `max_opt_iters` is used. On error the best testbench is written
/// back to disk before returning.
pub fn supplement_loop(
    state: &mut OptimizationState,
    backend: &dyn LlmBackend,
    gateway: &mut SimGateway,
    ctx: RepairContext<'_>,
    opts: &SupplementOptions,
) -> Result<(), OptError> {
    let tb_dir = ctx.ws.tb_dir();
    let restore = |state: &OptimizationState| state.best_tb.write_files(&tb_dir);
    while !meets(state.best_cov, state.target) && state.iteration < opts.max_opt_iters {
        state.iteration += 1;
        let n = state.iteration;
        let gaps = analyze_gaps_with(&state.best_doc, ctx.plan, ctx.iface, &opts.keywords);
        if gaps.is_empty() {
            state.trace.push(TraceRecord {
                iteration: n,
                gaps: 0,
                attempted_cov: None,
                accepted: false,
                reverted: false,
                simulations: 0,
                note: "no coverage gaps left".into(),
            });
            break;
        }
        let excerpt = dut_excerpt(&ctx.ws.dut_sources, &gaps, &ctx.ws.config.top_module);
        let prompt = build_optimization_prompt(&gaps, &excerpt, ctx.plan, &state.best_tb)?;
        let response = match backend.invoke(&prompt) {
            Ok(r) => r,
            Err(e) => {
                restore(state)?;
                return Err(e.into());
            }
        };
        let sources = supplement_sources(&response.raw_text);
        if sources.is_empty() {
            state.trace.push(TraceRecord {
                iteration: n,
                gaps: gaps.len(),
                attempted_cov: None,
                accepted: false,
                reverted: true,
                simulations: 0,
                note: "agent returned no code".into(),
            });
            continue;
        }
        let mut candidate = state.best_tb.clone();
        let reason = format!("supplement round {n}");
        for (kind, code) in sources {
            candidate.install(
                UvmComponent {
                    kind,
                    file_name: kind.file_name(&candidate.dut),
                    source: ensure_trailing_newline(code),
                    version: 0,
                    provenance: Provenance::Agent {
                        role: AgentRole::Optimization,
                        prompt_digest: prompt.digest(),
                    },
                },
                &reason,
            );
        }
        let (tb, outcome, report) = match repair_loop(candidate, gateway, backend, ctx, opts.max_repair_iters) {
            Ok(r) => r,
            Err(e) => {
                restore(state)?;
                return Err(e.into());
            }
        };
        let attempted = outcome.coverage.as_ref().map(coverage_pcts);
        let (accepted, note) = match (&outcome.coverage, attempted) {
            (_, _) if !outcome.passed() => (false, "simulation failed after repairs".to_string()),
            (Some(_), Some(cov)) if improves(cov, state.best_cov) => (true, "coverage improved".to_string()),
            (Some(_), Some(_)) => (false, "no coverage improvement".to_string()),
            _ => (false, "no coverage data".to_string()),
        };
        if accepted {
            state.best_tb = tb;
            state.best_doc = outcome.coverage.clone().expect("accepted runs carry coverage");
            state.best_cov = attempted.expect("accepted runs carry coverage");
        } else {
            restore(state)?;
        }
        state.trace.push(TraceRecord {
            iteration: n,
            gaps: gaps.len(),
            attempted_cov: attempted.filter(|_| outcome.passed()),
            accepted,
            reverted: !accepted,
            simulations: report.simulations_run,
            note,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeRow {
    pub metric: CodeMetric,
    pub covered: u64,
    pub total: u64,
    pub pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalRow {
    pub fp_id: String,
    pub description: String,
    pub bins_covered: u64,
    pub bins_total: u64,
    pub pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub code: Vec<CodeRow>,
    pub functional: Vec<FunctionalRow>,
    pub code_pct: f64,
    pub func_pct: f64,
    pub target_code_pct: f64,
    pub target_func_pct: f64,
    pub target_met: bool,
    /// Functional entries whose id is not in the plan.
    pub unknown_fp_ids: Vec<String>,
}

impl CoverageReport {
    pub fn from_doc(doc: &CoverageDocument, plan: &TestPlan, targets: CoverageTargets) -> Self {
        let pct = |c: u64, t: u64| {
            if t == 0 {
                100.0
            } else {
                round2(100.0 * c as f64 / t as f64)
            }
        };
        let code = doc
            .code
            .iter()
            .map(|(m, c)| CodeRow {
                metric: *m,
                covered: c.covered,
                total: c.total,
                pct: pct(c.covered, c.total),
            })
            .collect();
        let mut unknown = Vec::new();
        let functional = doc
            .functional
            .iter()
            .map(|e| {
                let description = match plan.point(&e.fp_id) {
                    Some(p) => first_line(&p.description).to_string(),
                    None => {
                        log::warn!("coverage entry {} does not name a planned function point", e.fp_id);
                        unknown.push(e.fp_id.clone());
                        String::new()
                    }
                };
                FunctionalRow {
                    fp_id: e.fp_id.clone(),
                    description,
                    bins_covered: e.bins_covered,
                    bins_total: e.bins_total,
                    pct: pct(e.bins_covered, e.bins_total),
                }
            })
            .collect();
        let (code_pct, func_pct) = coverage_pcts(doc);
        CoverageReport {
            code,
            functional,
            code_pct: round2(code_pct),
            func_pct: round2(func_pct),
            target_code_pct: targets.code_pct,
            target_func_pct: targets.func_pct,
            target_met: meets((code_pct, func_pct), (targets.code_pct, targets.func_pct)),
            unknown_fp_ids: unknown,
        }
    }
}
