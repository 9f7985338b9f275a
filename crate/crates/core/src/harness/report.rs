// SPDX-License-Identifier: Apache-2.0

//! Markdown and JSON reports written at the end of every run.

use std::fs;
use std::path::{Path, PathBuf};

use super::metrics::{MetricsError, RunMetrics};
use crate::optimizer::CoverageReport;
use crate::sim::{SimError, SimPhase};
use crate::tbgen::ComponentKind;

pub const ERROR_REPORT_FILE: &str = "error_report.md";
pub const COVERAGE_REPORT_MD: &str = "coverage_report.md";
pub const METRICS_FILE: &str = "metrics.json";
pub const TIMING_FILE: &str = "timing.md";

pub const TIMING_COLUMNS: [&str; 5] = ["Planning", "Generation", "Simulation", "Supplement", "Total"];

pub fn render_error_report(errors: &[SimError], failure: Option<&str>) -> String {
    let mut out = String::from("# Error report\n\n");
    if let Some(msg) = failure {
        out.push_str(&format!("## Pipeline failure\n\n{msg}\n\n"));
    }
    if errors.is_empty() {
        out.push_str("No errors recorded.\n");
        return out;
    }
    for phase in SimPhase::ALL {
        let in_phase: Vec<&SimError> = errors.iter().filter(|e| e.phase == phase).collect();
        if in_phase.is_empty() {
            continue;
        }
        out.push_str(&format!("## {phase}\n\n"));
        let owners = ComponentKind::ALL.map(Some).into_iter().chain([None]);
        for owner in owners {
            let mine: Vec<&&SimError> = in_phase.iter().filter(|e| e.component == owner).collect();
            if mine.is_empty() {
                continue;
            }
            match owner {
                Some(kind) => out.push_str(&format!("### {kind}\n\n")),
                None => out.push_str("### unattributed\n\n"),
            }
            for e in mine {
                let place = match (&e.file, e.line) {
                    (Some(f), Some(l)) => format!("`{f}:{l}` "),
                    (Some(f), None) => format!("`{f}` "),
                    _ => String::new(),
                };
                out.push_str(&format!("- {place}{}\n", e.message));
            }
            out.push('\n');
        }
    }
    out
}

pub fn render_coverage_report(cov: Option<&CoverageReport>) -> String {
    let mut out = String::from("# Coverage report\n\n");
    let Some(cov) = cov else {
        out.push_str("No coverage data recorded.\n");
        return out;
    };
    out.push_str(&format!(
        "Code coverage: {:.2}% (target {:.2}%)\n\nFunctional coverage: {:.2}% (target {:.2}%)\n\nTarget met: {}\n\n",
        cov.code_pct,
        cov.target_code_pct,
        cov.func_pct,
        cov.target_func_pct,
        if cov.target_met { "yes" } else { "no" }
    ));
    out.push_str("## Code coverage\n\n| Metric | Covered | Total | % |\n|---|---|---|---|\n");
    for row in &cov.code {
        out.push_str(&format!(
            "| {} | {} | {} | {:.2} |\n",
            row.metric, row.covered, row.total, row.pct
        ));
    }
    out.push_str(&format!("| overall | | | {:.2} |\n", cov.code_pct));
    out.push_str("\n## Functional coverage\n\n| Function point | Description | Bins covered | Bins total | % |\n|---|---|---|---|---|\n");
    for row in &cov.functional {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {:.2} |\n",
            row.fp_id,
            row.description.replace('|', "\\|"),
            row.bins_covered,
            row.bins_total,
            row.pct
        ));
    }
    out.push_str(&format!("| overall | | | | {:.2} |\n", cov.func_pct));
    if !cov.unknown_fp_ids.is_empty() {
        out.push_str(&format!(
            "\nEntries without a planned function point: {}\n",
            cov.unknown_fp_ids.join(", ")
        ));
    }
    out
}

/// Seconds per stage; the values are those recorded in `run`.
pub fn render_timing(run: &RunMetrics) -> String {
    let header = format!("| {} |", TIMING_COLUMNS.join(" | "));
    let rule = format!("|{}", "---|".repeat(TIMING_COLUMNS.len()));
    format!(
        "# Completion time (s)\n\n{header}\n{rule}\n| {:.2} | {:.2} | {:.2} | {:.2} | {:.2} |\n",
        run.planning_s, run.generation_s, run.simulation_s, run.supplement_s, run.total_s
    )
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf, MetricsError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| MetricsError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(path)
}

/// Writes the four report files into `out_dir`, creating it if needed.
pub fn emit_reports(
    run: &RunMetrics,
    errors: &[SimError],
    cov: Option<&CoverageReport>,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, MetricsError> {
    fs::create_dir_all(out_dir).map_err(|e| MetricsError::Io {
        path: out_dir.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(vec![
        write(
            out_dir,
            ERROR_REPORT_FILE,
            &render_error_report(errors, run.failure.as_deref()),
        )?,
        write(out_dir, COVERAGE_REPORT_MD, &render_coverage_report(cov))?,
        write(out_dir, METRICS_FILE, &run.to_json())?,
        write(out_dir, TIMING_FILE, &render_timing(run))?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::RunStatus;
    use crate::optimizer::CoverageReport;
    use crate::planner::TestPlan;
    use crate::sim::{CoverageDocument, FunctionalEntry};
    use crate::workspace::CoverageTargets;

    #[test]
    fn no_errors_line() {
        let text = render_error_report(&[], None);
        assert!(text.lines().any(|l| l == "No errors recorded."));
    }

    #[test]
    fn errors_grouped_by_phase_then_component() {
        let e = |phase, component, message: &str| SimError {
            phase,
            component,
            message: message.into(),
            file: Some("uart_driver.sv".into()),
            line: Some(3),
        };
        let text = render_error_report(
            &[
                e(SimPhase::Run, Some(ComponentKind::Scoreboard), "mismatch"),
                e(SimPhase::Compile, None, "orphan"),
                e(SimPhase::Compile, Some(ComponentKind::Driver), "syntax"),
            ],
            None,
        );
        let pos = |s: &str| text.find(s).unwrap();
        assert!(pos("## Compile") < pos("### driver"));
        assert!(pos("### driver") < pos("### unattributed"));
        assert!(pos("### unattributed") < pos("## Run"));
        assert!(text.contains("- `uart_driver.sv:3` syntax"));
    }

    #[test]
    fn functional_overall() {
        let doc = CoverageDocument {
            code: Default::default(),
            functional: [(4, 4), (2, 4), (0, 4)]
                .iter()
                .enumerate()
                .map(|(i, (c, t))| FunctionalEntry {
                    fp_id: format!("FP-{}", i + 1),
                    bins_covered: *c,
                    bins_total: *t,
                })
                .collect(),
        };
        let report = CoverageReport::from_doc(&doc, &TestPlan::default(), CoverageTargets::default());
        let text = render_coverage_report(Some(&report));
        assert!(text.contains("| overall | | | | 50.00 |"));
        assert!(render_coverage_report(None).contains("No coverage data"));
    }

    #[test]
    fn timing_total() {
        let mut m = RunMetrics::empty(RunStatus::Success);
        (m.planning_s, m.generation_s, m.simulation_s, m.supplement_s) = (60.0, 120.0, 90.0, 30.0);
        m.total_s = m.phase_sum();
        let text = render_timing(&m);
        assert!(text.contains("| Planning | Generation | Simulation | Supplement | Total |"));
        assert!(text.contains("| 60.00 | 120.00 | 90.00 | 30.00 | 300.00 |"));
    }

    #[test]
    fn writes_four_files() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_reports(
            &RunMetrics::empty(RunStatus::ConfigError),
            &[],
            None,
            &dir.path().join("r"),
        )
        .unwrap();
        assert_eq!(files.len(), 4);
        assert!(files.iter().all(|f| f.is_file()));
    }
}
