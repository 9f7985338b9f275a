// SPDX-License-Identifier: Apache-2.0

//! Drives the built binary against copies of the toy workspace.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use uvmforge::harness::{
    RunMetrics, RunStatus, COVERAGE_REPORT_MD, ERROR_REPORT_FILE, METRICS_FILE, TIMING_COLUMNS, TIMING_FILE,
};

pub const REPORTS: [&str; 4] = [ERROR_REPORT_FILE, COVERAGE_REPORT_MD, METRICS_FILE, TIMING_FILE];

pub fn uvmforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uvmforge"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> Result<i32, String> {
    out.status.code().ok_or_else(|| "terminated by signal".to_string())
}

fn fail(what: &str, out: &Output) -> String {
    format!(
        "{what}\nstdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    )
}

fn sim_logs(root: &Path) -> usize {
    fs::read_dir(root.join("out/sim"))
        .map(|d| {
            d.filter_map(Result::ok)
                .filter(|e| e.file_name().to_string_lossy().ends_with(".log"))
                .count()
        })
        .unwrap_or(0)
}

/// Full `run` on the toy workspace: exit 0, every report present and the
/// timing table headed by the five phase columns.
pub fn dry_run_case(root: &Path) -> Result<(), String> {
    let out = uvmforge(&["run", "--workspace", &root.display().to_string()]);
    if code(&out)? != 0 {
        return Err(fail("run did not exit 0", &out));
    }
    let reports = root.join("out/reports");
    for name in REPORTS {
        if !reports.join(name).is_file() {
            return Err(format!("missing report {name}"));
        }
    }
    let timing = fs::read_to_string(reports.join(TIMING_FILE)).map_err(|e| e.to_string())?;
    let header = format!("| {} |", TIMING_COLUMNS.join(" | "));
    if timing.lines().find(|l| l.starts_with('|')) != Some(header.as_str()) {
        return Err(format!("timing header differs:\n{timing}"));
    }
    let metrics = fs::read_to_string(reports.join(METRICS_FILE)).map_err(|e| e.to_string())?;
    let metrics = RunMetrics::from_json(&metrics).map_err(|e| e.to_string())?;
    if metrics.status != RunStatus::Success {
        return Err(format!("status {:?}", metrics.status));
    }
    Ok(())
}

/// Every simulation fails: the repair budget of two rounds is spent and the
/// run exits with the generation-failure code.
pub fn all_fail_case(root: &Path) -> Result<(), String> {
    let scenario = root.join("always-fail.json");
    let record =
        r#"{"status":"fail","errors":[{"phase":"compile","file":"uart_driver.sv","message":"Error: syntax error"}]}"#;
    fs::write(&scenario, format!("[{record},{record},{record},{record},{record}]")).map_err(|e| e.to_string())?;
    let out = uvmforge(&[
        "run",
        "--workspace",
        &root.display().to_string(),
        "--scenario",
        &scenario.display().to_string(),
    ]);
    if code(&out)? != 2 {
        return Err(fail("all-fail run did not exit 2", &out));
    }
    if sim_logs(root) != 3 {
        return Err(format!("{} simulations, expected 3", sim_logs(root)));
    }
    if !root.join("out/reports").join(ERROR_REPORT_FILE).is_file() {
        return Err("no error report".into());
    }
    Ok(())
}

/// A workspace without its spec is a configuration error and never reaches
/// the simulator.
pub fn missing_spec_case(root: &Path) -> Result<(), String> {
    fs::remove_file(root.join("spec.md")).map_err(|e| e.to_string())?;
    let out = uvmforge(&["run", "--workspace", &root.display().to_string()]);
    if code(&out)? != 3 {
        return Err(fail("missing spec did not exit 3", &out));
    }
    if sim_logs(root) != 0 {
        return Err("simulator ran without a spec".into());
    }
    Ok(())
}
