// SPDX-License-Identifier: Apache-2.0

//! Simulator adapters behind one gateway that enforces the pass/fail
//! contract of [`SimulationOutcome`].

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::coverage::{parse_coverage, CoverageDocument, CoverageError};
use super::logscan::{attribute_keyword, default_patterns, parse_log, ErrorPattern};
use super::{SimError, SimPhase, SimStatus, SimulationOutcome};
use crate::tbgen::{ComponentKind, Testbench};
use crate::workspace::Workspace;

/// Coverage file an external tool flow is expected to leave in `out/sim/`.
pub const COVERAGE_FILE: &str = "coverage.json";

#[derive(Debug, thiserror::Error)]
pub enum SimGatewayError {
    #[error("invalid adapter configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot start `{command}`: {source}")]
    AdapterSpawnFailure {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("mock scenario exhausted after {consumed} simulation(s)")]
    ScenarioExhausted { consumed: usize },
    #[error("mock scenario {}: {message}", path.display())]
    ScenarioInvalid { path: PathBuf, message: String },
    #[error(transparent)]
    Coverage(#[from] CoverageError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdapterKind {
    ExternalCommand,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterConfig {
    pub kind: AdapterKind,
    /// Command templates; `{files}`, `{top}` and `{outdir}` are expanded
    /// per argument, without a shell.
    #[serde(default)]
    pub compile_cmd: Option<String>,
    #[serde(default)]
    pub run_cmd: Option<String>,
    #[serde(default = "default_patterns")]
    pub error_patterns: Vec<ErrorPattern>,
    #[serde(default)]
    pub scenario_path: Option<PathBuf>,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: f64,
}

fn default_timeout_s() -> f64 {
    600.0
}

impl AdapterConfig {
    pub fn mock(scenario_path: impl Into<PathBuf>) -> Self {
        AdapterConfig {
            kind: AdapterKind::Mock,
            compile_cmd: None,
            run_cmd: None,
            error_patterns: default_patterns(),
            scenario_path: Some(scenario_path.into()),
            timeout_s: default_timeout_s(),
        }
    }

    pub fn command(compile_cmd: impl Into<String>, run_cmd: impl Into<String>) -> Self {
        AdapterConfig {
            kind: AdapterKind::ExternalCommand,
            compile_cmd: Some(compile_cmd.into()),
            run_cmd: Some(run_cmd.into()),
            scenario_path: None,
            ..AdapterConfig::mock(PathBuf::new())
        }
    }

    pub fn validate(&self) -> Result<(), SimGatewayError> {
        match self.kind {
            AdapterKind::ExternalCommand => {
                let blank = |c: &Option<String>| c.as_deref().is_none_or(|s| s.trim().is_empty());
                if blank(&self.compile_cmd) || blank(&self.run_cmd) {
                    return Err(SimGatewayError::InvalidConfig(
                        "external command adapter needs compile_cmd and run_cmd".into(),
                    ));
                }
                if !(self.timeout_s > 0.0 && self.timeout_s.is_finite()) {
                    return Err(SimGatewayError::InvalidConfig("timeout_s must be positive".into()));
                }
            }
            AdapterKind::Mock => {
                if self.scenario_path.is_none() {
                    return Err(SimGatewayError::InvalidConfig(
                        "mock adapter needs scenario_path".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioError {
    pub phase: SimPhase,
    #[serde(default)]
    pub file: Option<String>,
    pub message: String,
    #[serde(default)]
    pub line: Option<u32>,
}

/// One scripted simulation result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub status: SimStatus,
    #[serde(default)]
    pub errors: Vec<ScenarioError>,
    #[serde(default)]
    pub coverage: Option<CoverageDocument>,
}

impl ScenarioRecord {
    pub fn pass(coverage: Option<CoverageDocument>) -> Self {
        ScenarioRecord {
            status: SimStatus::Pass,
            errors: Vec::new(),
            coverage,
        }
    }

    pub fn fail(phase: SimPhase, file: Option<&str>, message: &str) -> Self {
        ScenarioRecord {
            status: SimStatus::Fail,
            errors: vec![ScenarioError {
                phase,
                file: file.map(str::to_string),
                message: message.to_string(),
                line: None,
            }],
            coverage: None,
        }
    }
}

fn normalise_case(v: &mut Value) {
    if let Some(arr) = v.as_array_mut() {
        for rec in arr {
            if let Some(s) = rec.get_mut("status") {
                if let Some(text) = s.as_str() {
                    let t = text.to_ascii_lowercase();
                    *s = Value::String(if t == "pass" {
                        "Pass".into()
                    } else if t == "fail" {
                        "Fail".into()
                    } else {
                        text.into()
                    });
                }
            }
            if let Some(errs) = rec.get_mut("errors").and_then(Value::as_array_mut) {
                for e in errs {
                    if let Some(p) = e.get_mut("phase") {
                        if let Some(phase) = p.as_str().and_then(SimPhase::parse) {
                            *p = Value::String(phase.name().into());
                        }
                    }
                }
            }
        }
    }
}

/// Parses a scenario file: a JSON array of outcome records. Status and
/// phase names are case-insensitive.
pub fn parse_scenario(text: &str, path: &Path) -> Result<Vec<ScenarioRecord>, SimGatewayError> {
    let invalid = |message: String| SimGatewayError::ScenarioInvalid {
        path: path.to_path_buf(),
        message,
    };
    let mut v: Value = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
    if !v.is_array() {
        return Err(invalid("expected a JSON array of outcome records".into()));
    }
    normalise_case(&mut v);
    let mut records = Vec::new();
    for (i, item) in v.as_array().expect("checked").iter().enumerate() {
        let mut item = item.clone();
        let coverage = match item.get("coverage") {
            None | Some(Value::Null) => None,
            Some(c) => Some(CoverageDocument::from_value(c).map_err(|e| invalid(format!("record {i}: {e}")))?),
        };
        if let Some(obj) = item.as_object_mut() {
            obj.remove("coverage");
        }
        let mut rec: ScenarioRecord = serde_json::from_value(item).map_err(|e| invalid(format!("record {i}: {e}")))?;
        rec.coverage = coverage;
        records.push(rec);
    }
    Ok(records)
}

/// Restores the outcome invariant: `Pass` carries no errors, `Fail` at
/// least one.
fn enforce_consistency(status: SimStatus, mut errors: Vec<SimError>) -> (SimStatus, Vec<SimError>) {
    match status {
        SimStatus::Pass if !errors.is_empty() => (SimStatus::Fail, errors),
        SimStatus::Fail if errors.is_empty() => {
            errors.push(SimError {
                phase: SimPhase::Run,
                component: None,
                message: "simulation reported failure without diagnostics".into(),
                file: None,
                line: None,
            });
            (SimStatus::Fail, errors)
        }
        _ => (status, errors),
    }
}

fn attribute(tb: &Testbench, file: Option<&str>, message: &str) -> Option<ComponentKind> {
    file.and_then(|f| tb.kind_for_file(f))
        .or_else(|| attribute_keyword(message))
}

/// A simulator with per-run state: the scripted scenario cursor for the
/// mock, the run counter for log names.
pub struct SimGateway {
    cfg: AdapterConfig,
    scenario: Vec<ScenarioRecord>,
    cursor: usize,
    runs: u32,
}

impl SimGateway {
    pub fn new(cfg: AdapterConfig) -> Result<Self, SimGatewayError> {
        cfg.validate()?;
        let scenario = match (&cfg.kind, &cfg.scenario_path) {
            (AdapterKind::Mock, Some(path)) => {
                let text = fs::read_to_string(path).map_err(|source| SimGatewayError::Io {
                    path: path.clone(),
                    source,
                })?;
                parse_scenario(&text, path)?
            }
            _ => Vec::new(),
        };
        Ok(SimGateway {
            cfg,
            scenario,
            cursor: 0,
            runs: 0,
        })
    }

    /// Mock gateway over an in-memory scenario.
    pub fn scripted(records: Vec<ScenarioRecord>) -> Self {
        SimGateway {
            cfg: AdapterConfig::mock("<memory>"),
            scenario: records,
            cursor: 0,
            runs: 0,
        }
    }

    pub fn config(&self) -> &AdapterConfig {
        &self.cfg
    }

    pub fn runs(&self) -> u32 {
        self.runs
    }

    pub fn remaining(&self) -> usize {
        self.scenario.len().saturating_sub(self.cursor)
    }

    /// Simulates the testbench currently on disk in `ws`'s `tb/` directory.
    pub fn run(&mut self, tb: &Testbench, ws: &Workspace) -> Result<SimulationOutcome, SimGatewayError> {
        let started = Instant::now();
        let sim_dir = ws.sim_dir();
        fs::create_dir_all(&sim_dir).map_err(|source| SimGatewayError::Io {
            path: sim_dir.clone(),
            source,
        })?;
        let (status, errors, log_text, coverage) = match self.cfg.kind {
            AdapterKind::Mock => self.run_mock(tb)?,
            AdapterKind::ExternalCommand => self.run_external(tb, ws, &sim_dir)?,
        };
        self.runs += 1;
        let log_path = sim_dir.join(format!("run-{}.log", self.runs));
        fs::write(&log_path, log_text).map_err(|source| SimGatewayError::Io {
            path: log_path.clone(),
            source,
        })?;
        let (status, errors) = enforce_consistency(status, errors);
        Ok(SimulationOutcome {
            status,
            errors,
            log_path,
            coverage,
            wall_ms: started.elapsed().as_millis() as u64,
        })
    }

    #[allow(clippy::type_complexity)]
    fn run_mock(
        &mut self,
        tb: &Testbench,
    ) -> Result<(SimStatus, Vec<SimError>, String, Option<CoverageDocument>), SimGatewayError> {
        let rec = self
            .scenario
            .get(self.cursor)
            .cloned()
            .ok_or(SimGatewayError::ScenarioExhausted { consumed: self.cursor })?;
        self.cursor += 1;
        let mut log = format!("mock simulation {} of {}\n", self.cursor, self.scenario.len());
        let errors: Vec<SimError> = rec
            .errors
            .iter()
            .map(|e| {
                log.push_str(&format!(
                    "[{}] {}{}\n",
                    e.phase,
                    e.message,
                    match (&e.file, e.line) {
                        (Some(f), Some(l)) => format!(" ({f}:{l})"),
                        (Some(f), None) => format!(" ({f})"),
                        _ => String::new(),
                    }
                ));
                SimError {
                    phase: e.phase,
                    component: attribute(tb, e.file.as_deref(), &e.message),
                    message: e.message.clone(),
                    file: e.file.clone(),
                    line: e.line,
                }
            })
            .collect();
        log.push_str(match rec.status {
            SimStatus::Pass => "status: PASS\n",
            SimStatus::Fail => "status: FAIL\n",
        });
        Ok((rec.status, errors, log, rec.coverage))
    }

    #[allow(clippy::type_complexity)]
    fn run_external(
        &self,
        tb: &Testbench,
        ws: &Workspace,
        sim_dir: &Path,
    ) -> Result<(SimStatus, Vec<SimError>, String, Option<CoverageDocument>), SimGatewayError> {
        let tb_dir = ws.tb_dir();
        let mut files: Vec<String> = ws.dut_sources.iter().map(|s| s.path.display().to_string()).collect();
        files.extend(tb.file_list().iter().map(|f| tb_dir.join(f).display().to_string()));
        let top = ComponentKind::Top.type_name(&tb.dut);
        let outdir = sim_dir.display().to_string();

        let cov_path = sim_dir.join(COVERAGE_FILE);
        if cov_path.exists() {
            fs::remove_file(&cov_path).map_err(|source| SimGatewayError::Io {
                path: cov_path.clone(),
                source,
            })?;
        }

        let timeout = Duration::from_secs_f64(self.cfg.timeout_s);
        let mut log = String::new();
        let mut status = SimStatus::Pass;
        let mut extra = Vec::new();
        let steps = [
            (SimPhase::Compile, self.cfg.compile_cmd.as_deref().unwrap_or_default()),
            (SimPhase::Run, self.cfg.run_cmd.as_deref().unwrap_or_default()),
        ];
        for (phase, template) in steps {
            let argv = expand_command(template, &files, &top, &outdir);
            log.push_str(&format!("$ {}\n", argv.join(" ")));
            let result = run_with_timeout(&argv, sim_dir, timeout)?;
            log.push_str(&result.output);
            if result.timed_out {
                status = SimStatus::Fail;
                extra.push(SimError {
                    phase,
                    component: None,
                    message: format!("`{}` timed out after {} s", argv[0], self.cfg.timeout_s),
                    file: None,
                    line: None,
                });
                break;
            }
            if result.code != Some(0) {
                status = SimStatus::Fail;
                break;
            }
        }

        let mut errors = parse_log(&log, &self.cfg.error_patterns, tb);
        if status == SimStatus::Fail && errors.is_empty() && extra.is_empty() {
            errors.push(SimError {
                phase: SimPhase::Compile,
                component: None,
                message: "tool exited nonzero".into(),
                file: None,
                line: None,
            });
        }
        errors.extend(extra);
        if !errors.is_empty() {
            status = SimStatus::Fail;
        }
        let coverage = if cov_path.is_file() {
            let text = fs::read_to_string(&cov_path).map_err(|source| SimGatewayError::Io {
                path: cov_path.clone(),
                source,
            })?;
            Some(parse_coverage(&text)?)
        } else {
            None
        };
        Ok((status, errors, log, coverage))
    }
}

/// Splits `template` on whitespace and substitutes placeholders per
/// argument; `{files}` standing alone expands to one argument per file.
pub fn expand_command(template: &str, files: &[String], top: &str, outdir: &str) -> Vec<String> {
    let mut argv = Vec::new();
    for token in template.split_whitespace() {
        if token == "{files}" {
            argv.extend(files.iter().cloned());
            continue;
        }
        argv.push(
            token
                .replace("{files}", &files.join(" "))
                .replace("{top}", top)
                .replace("{outdir}", outdir),
        );
    }
    argv
}

struct ProcessResult {
    code: Option<i32>,
    output: String,
    timed_out: bool,
}

fn run_with_timeout(argv: &[String], cwd: &Path, timeout: Duration) -> Result<ProcessResult, SimGatewayError> {
    let Some((program, args)) = argv.split_first() else {
        return Err(SimGatewayError::InvalidConfig("empty command".into()));
    };
    let mut child = Command::new(program)
        .args(args)
        .current_dir(cwd)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|source| SimGatewayError::AdapterSpawnFailure {
            command: argv.join(" "),
            source,
        })?;
    let mut stdout = child.stdout.take().expect("piped");
    let mut stderr = child.stderr.take().expect("piped");
    let out_reader = thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stdout.read_to_end(&mut buf);
        buf
    });
    let err_reader = thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stderr.read_to_end(&mut buf);
        buf
    });

    let deadline = Instant::now() + timeout;
    let mut timed_out = false;
    let code = loop {
        match child.try_wait() {
            Ok(Some(status)) => break status.code(),
            Ok(None) if Instant::now() >= deadline => {
                timed_out = true;
                let _ = child.kill();
                let _ = child.wait();
                break None;
            }
            Ok(None) => thread::sleep(Duration::from_millis(5)),
            Err(source) => {
                return Err(SimGatewayError::AdapterSpawnFailure {
                    command: argv.join(" "),
                    source,
                })
            }
        }
    };
    let mut output = String::from_utf8_lossy(&out_reader.join().unwrap_or_default()).into_owned();
    output.push_str(&String::from_utf8_lossy(&err_reader.join().unwrap_or_default()));
    if !output.is_empty() && !output.ends_with('\n') {
        output.push('\n');
    }
    Ok(ProcessResult {
        code,
        output,
        timed_out,
    })
}
