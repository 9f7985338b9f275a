// SPDX-License-Identifier: Apache-2.0

//! Repeated pipeline attempts over a set of designs.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::metrics::{round_table, success_rate, MetricsError, RoundTable, RunMetrics, RunStatus};
use super::pipeline::{resolve_adapter, resolve_backend, run_pipeline, RunOptions};
use crate::agent::{connect, BackendConfig};
use crate::optimizer::round2;
use crate::sim::{AdapterConfig, AdapterKind};
use crate::workspace::DEFAULT_OUT_DIR;

pub const DEFAULT_ATTEMPTS: u32 = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchEntry {
    pub design_id: String,
    /// Workspace root; relative paths are taken from the manifest's directory.
    pub workspace: PathBuf,
    #[serde(default)]
    pub expected_modules: u32,
    #[serde(default)]
    pub expected_lines: u32,
}

fn default_attempts() -> u32 {
    DEFAULT_ATTEMPTS
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchManifest {
    pub entries: Vec<BenchEntry>,
    #[serde(default = "default_attempts")]
    pub attempts_per_component: u32,
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("reading {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest is not valid: {0}")]
    Parse(String),
    #[error("duplicate design_id `{0}`")]
    DuplicateDesign(String),
    #[error("attempts_per_component must be positive")]
    NoAttempts,
}

impl BenchManifest {
    pub fn parse(text: &str, base: &Path) -> Result<Self, ManifestError> {
        let mut m: BenchManifest = serde_json::from_str(text).map_err(|e| ManifestError::Parse(e.to_string()))?;
        m.validate()?;
        for e in &mut m.entries {
            if e.workspace.is_relative() {
                e.workspace = base.join(&e.workspace);
            }
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<(), ManifestError> {
        if self.attempts_per_component == 0 {
            return Err(ManifestError::NoAttempts);
        }
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            if !seen.insert(e.design_id.as_str()) {
                return Err(ManifestError::DuplicateDesign(e.design_id.clone()));
            }
        }
        Ok(())
    }
}

/// Output directory of attempt `k` (1-based) inside a workspace.
pub fn attempt_out_dir(k: u32) -> PathBuf {
    Path::new(DEFAULT_OUT_DIR).join(format!("attempt-{k}"))
}

/// Mock adapters use `scenario-<k>.json` from the workspace when present.
fn attempt_adapter(adapter: &AdapterConfig, ws: &Path, k: u32) -> AdapterConfig {
    let mut cfg = resolve_adapter(adapter, ws);
    if cfg.kind == AdapterKind::Mock {
        let per_attempt = ws.join(format!("scenario-{k}.json"));
        if per_attempt.is_file() {
            cfg.scenario_path = Some(per_attempt);
        }
    }
    cfg
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSummary {
    pub design_id: String,
    pub attempts: u32,
    pub successes: u32,
    pub sr_g: f64,
    pub mean_code_pct: f64,
    pub mean_func_pct: f64,
    /// Planning, Generation, Simulation, Supplement, Total.
    pub mean_timings_s: [f64; 5],
    /// One message per attempt that did not succeed.
    pub failures: Vec<String>,
    #[serde(skip)]
    pub runs: Vec<RunMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub rows: Vec<DesignSummary>,
    pub average: DesignSummary,
    pub rounds: RoundTable,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn summarize(design_id: &str, runs: Vec<RunMetrics>) -> Result<DesignSummary, MetricsError> {
    let attempts = runs.len() as u32;
    let ok: Vec<&RunMetrics> = runs.iter().filter(|r| r.status == RunStatus::Success).collect();
    let timings = |f: fn(&RunMetrics) -> f64| round2(mean(runs.iter().map(f)));
    Ok(DesignSummary {
        design_id: design_id.to_string(),
        attempts,
        successes: ok.len() as u32,
        sr_g: success_rate(ok.len() as u64, attempts as u64)?,
        mean_code_pct: round2(mean(ok.iter().map(|r| r.final_code_pct))),
        mean_func_pct: round2(mean(ok.iter().map(|r| r.final_func_pct))),
        mean_timings_s: [
            timings(|r| r.planning_s),
            timings(|r| r.generation_s),
            timings(|r| r.simulation_s),
            timings(|r| r.supplement_s),
            timings(|r| r.total_s),
        ],
        failures: runs
            .iter()
            .enumerate()
            .filter(|(_, r)| r.status != RunStatus::Success)
            .map(|(i, r)| format!("attempt {}: {}", i + 1, r.failure.as_deref().unwrap_or("failed")))
            .collect(),
        runs,
    })
}

/// Cumulative passing attempts after each simulation round.
pub fn round_counts(runs: &[RunMetrics], rounds: usize) -> Vec<u64> {
    (1..=rounds as u32)
        .map(|k| {
            runs.iter()
                .filter(|r| {
                    r.repair_report
                        .as_ref()
                        .and_then(|rep| rep.passing_simulation())
                        .is_some_and(|s| s <= k)
                })
                .count() as u64
        })
        .collect()
}

/// Builds the summary from finished attempts, one list per design.
pub fn summarize_bench(designs: Vec<(String, Vec<RunMetrics>)>) -> Result<BenchSummary, MetricsError> {
    let rounds = designs
        .iter()
        .flat_map(|(_, runs)| runs.iter())
        .filter_map(|r| r.repair_report.as_ref().map(|rep| rep.simulations_run as usize))
        .max()
        .unwrap_or(1)
        .max(1);
    let inputs: Vec<(String, Vec<u64>, u64)> = designs
        .iter()
        .map(|(id, runs)| (id.clone(), round_counts(runs, rounds), runs.len() as u64))
        .collect();
    let table = round_table(&inputs)?;
    let rows = designs
        .into_iter()
        .map(|(id, runs)| summarize(&id, runs))
        .collect::<Result<Vec<_>, _>>()?;
    let avg = |f: fn(&DesignSummary) -> f64| round2(mean(rows.iter().map(f)));
    let average = DesignSummary {
        design_id: "Average".into(),
        attempts: rows.iter().map(|r| r.attempts).sum(),
        successes: rows.iter().map(|r| r.successes).sum(),
        sr_g: avg(|r| r.sr_g),
        mean_code_pct: avg(|r| r.mean_code_pct),
        mean_func_pct: avg(|r| r.mean_func_pct),
        mean_timings_s: std::array::from_fn(|i| round2(mean(rows.iter().map(|r| r.mean_timings_s[i])))),
        failures: Vec::new(),
        runs: Vec::new(),
    };
    Ok(BenchSummary {
        rows,
        average,
        rounds: table,
    })
}

impl BenchSummary {
    pub fn to_markdown(&self) -> String {
        let mut out = String::from(
            "| Design | Attempts | SR_G (%) | Code cov (%) | Func cov (%) | Planning | Generation | Simulation | Supplement | Total |\n\
             |---|---|---|---|---|---|---|---|---|---|\n",
        );
        for r in self.rows.iter().chain(std::iter::once(&self.average)) {
            let t = r.mean_timings_s;
            out.push_str(&format!(
                "| {} | {} | {:.2} | {:.2} | {:.2} | {:.2} | {:.2} | {:.2} | {:.2} | {:.2} |\n",
                r.design_id, r.attempts, r.sr_g, r.mean_code_pct, r.mean_func_pct, t[0], t[1], t[2], t[3], t[4]
            ));
        }
        out.push('\n');
        out.push_str(&self.rounds.to_markdown());
        out
    }
}

fn run_entry(
    entry: &BenchEntry,
    attempts: u32,
    backend: &BackendConfig,
    adapter: &AdapterConfig,
    opts: &RunOptions,
) -> Vec<RunMetrics> {
    let backend_cfg = resolve_backend(backend, &entry.workspace);
    let client = match connect(&backend_cfg) {
        Ok(c) => c,
        Err(e) => {
            let mut m = RunMetrics::empty(RunStatus::ConfigError);
            m.failure = Some(e.to_string());
            return vec![m; attempts as usize];
        }
    };
    (1..=attempts)
        .map(|k| {
            let mut o = opts.clone();
            o.layout.out_dir = Some(attempt_out_dir(k));
            let ad = attempt_adapter(adapter, &entry.workspace, k);
            run_pipeline(&entry.workspace, &o, client.as_ref(), &ad).unwrap_or_else(|e| {
                let mut m = RunMetrics::empty(RunStatus::ConfigError);
                m.failure = Some(e.to_string());
                m
            })
        })
        .collect()
}

/// Runs `attempts_per_component` pipeline attempts per entry, with up to
/// `jobs` entries in flight. A failing entry never stops the batch.
pub fn run_bench(
    manifest: &BenchManifest,
    backend: &BackendConfig,
    adapter: &AdapterConfig,
    opts: &RunOptions,
    jobs: usize,
) -> Result<BenchSummary, MetricsError> {
    let results: Mutex<Vec<Option<Vec<RunMetrics>>>> = Mutex::new(vec![None; manifest.entries.len()]);
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, manifest.entries.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(entry) = manifest.entries.get(i) else { break };
                log::info!(
                    "bench: {} ({} attempts)",
                    entry.design_id,
                    manifest.attempts_per_component
                );
                let runs = run_entry(entry, manifest.attempts_per_component, backend, adapter, opts);
                results.lock().expect("results lock")[i] = Some(runs);
            });
        }
    });
    let results = results.into_inner().expect("results lock");
    let designs = manifest
        .entries
        .iter()
        .zip(results)
        .map(|(e, r)| (e.design_id.clone(), r.unwrap_or_default()))
        .collect();
    summarize_bench(designs)
}
