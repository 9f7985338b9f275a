// SPDX-License-Identifier: Apache-2.0

//! Pipeline driver, metrics, reports and the benchmark runner.

mod bench;
mod metrics;
mod pipeline;
mod report;

pub use bench::{
    attempt_out_dir, round_counts, run_bench, summarize_bench, BenchEntry, BenchManifest, BenchSummary, DesignSummary,
    ManifestError, DEFAULT_ATTEMPTS,
};
pub use metrics::{round_table, success_rate, MetricsError, RoundRow, RoundTable, RunMetrics, RunStatus};
pub use pipeline::{resolve_adapter, resolve_backend, run_pipeline, RunOptions, Session};
pub use report::{
    emit_reports, render_coverage_report, render_error_report, render_timing, COVERAGE_REPORT_MD, ERROR_REPORT_FILE,
    METRICS_FILE, TIMING_COLUMNS, TIMING_FILE,
};
