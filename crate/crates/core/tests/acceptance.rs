// SPDX-License-Identifier: Apache-2.0

//! Prints one PASS/FAIL line per acceptance criterion and exits nonzero if
//! any fails.

mod common;

use std::time::{Duration, Instant};

use proptest::test_runner::{Config, TestCaseError, TestRunner};

use common::golden::{classified, connection_counts, golden_mismatches};
use common::scenarios::{
    optimizer_budget_case, optimizer_revert_case, plan_strategy, repair_bound_case, script_strategy,
};
use uvmforge::harness::success_rate;
use uvmforge::optimizer::coverage_pcts;
use uvmforge::planner::{parse_test_plan, plan_round_trip};
use uvmforge::sim::{CodeCounter, CodeMetric, CoverageDocument, FunctionalEntry};
use uvmforge::tbgen::{dep_edges, dependency_order, render_template, ComponentKind};

/// Runner config without failure persistence; these runners have no source
/// file to record regressions next to.
fn cases(n: u32) -> Config {
    Config {
        failure_persistence: None,
        ..Config::with_cases(n)
    }
}

type Check = fn() -> Result<(), String>;

fn close(got: f64, want: f64) -> Result<(), String> {
    if (got - want).abs() <= 0.01 + 1e-9 {
        Ok(())
    } else {
        Err(format!("{got} vs {want}"))
    }
}

fn success_rates() -> Result<(), String> {
    close(success_rate(39, 45).map_err(|e| e.to_string())?, 86.67)?;
    close(success_rate(42, 45).map_err(|e| e.to_string())?, 93.33)
}

fn repair_bound() -> Result<(), String> {
    let (_tmp, root) = common::toy_copy();
    let (session, plan, tb) = common::toy_session(&root);
    let backend = common::toy_backend(&root);
    TestRunner::new(cases(200))
        .run(&script_strategy(), |(script, max)| {
            repair_bound_case(&session, &plan, &tb, &backend, &script, max).map_err(TestCaseError::fail)
        })
        .map_err(|e| e.to_string())
}

fn scheduler() -> Result<(), String> {
    let order = dependency_order();
    let mut kinds = order.clone();
    kinds.sort();
    let mut all = ComponentKind::ALL.to_vec();
    all.sort();
    if kinds != all {
        return Err(format!("not a permutation of the 11 kinds: {order:?}"));
    }
    let pos = |k| order.iter().position(|&o| o == k).unwrap();
    match dep_edges().into_iter().find(|&(a, b)| pos(a) > pos(b)) {
        Some((a, b)) => Err(format!("{b} scheduled before {a}")),
        None => Ok(()),
    }
}

fn templates() -> Result<(), String> {
    let bad = golden_mismatches();
    if !bad.is_empty() {
        return Err(format!("golden mismatch: {bad:?}"));
    }
    for h in common::header_corpus(64, true) {
        let (iface, cfg) = classified(&h.source, &h.module);
        let top = render_template(ComponentKind::Top, &iface, &cfg)
            .map_err(|e| e.to_string())?
            .source;
        if let Some((name, n)) = connection_counts(&iface, &top).into_iter().find(|(_, n)| *n != 1) {
            return Err(format!("port {name} connected {n} times"));
        }
    }
    Ok(())
}

fn extraction() -> Result<(), String> {
    let corpus = common::header_corpus(40, false);
    corpus.iter().try_for_each(common::oracle::check)
}

fn optimizer() -> Result<(), String> {
    let (_tmp, root) = common::toy_copy();
    let (session, plan, tb) = common::toy_session(&root);
    let backend = common::toy_backend(&root);
    optimizer_revert_case(&session, &tb, &plan, &backend)?;
    optimizer_budget_case(&session, &tb, &plan, &backend)
}

fn aggregation() -> Result<(), String> {
    let doc = CoverageDocument {
        code: [
            (CodeMetric::Line, CodeCounter::new(80, 100)),
            (CodeMetric::Branch, CodeCounter::new(40, 50)),
            (CodeMetric::Toggle, CodeCounter::new(80, 100)),
        ]
        .into_iter()
        .collect(),
        functional: [(3, 4), (1, 2)]
            .into_iter()
            .enumerate()
            .map(|(i, (c, t))| FunctionalEntry {
                fp_id: format!("FP-{}", i + 1),
                bins_covered: c,
                bins_total: t,
            })
            .collect(),
    };
    let (code, func) = coverage_pcts(&doc);
    close(code, 80.00)?;
    close(func, 66.67)
}

fn dry_run() -> Result<(), String> {
    let (_tmp, root) = common::toy_copy();
    common::cli::dry_run_case(&root)
}

fn plan_grammar() -> Result<(), String> {
    TestRunner::new(cases(100))
        .run(&plan_strategy(), |plan| {
            let text = plan_round_trip(&plan);
            let parsed = parse_test_plan(&text).map_err(|e| TestCaseError::fail(e.to_string()))?;
            if parsed == plan {
                Ok(())
            } else {
                Err(TestCaseError::fail(format!("round trip changed the plan:\n{text}")))
            }
        })
        .map_err(|e| e.to_string())
}

const CRITERIA: [(&str, Duration, Check); 10] = [
    ("success-rate arithmetic", Duration::from_millis(1), success_rates),
    ("repair-loop simulation bound", Duration::from_secs(5), repair_bound),
    ("dependency scheduler", Duration::from_millis(1), scheduler),
    ("template goldens and port wiring", Duration::from_secs(1), templates),
    ("interface extraction oracle", Duration::from_secs(2), extraction),
    ("optimizer revert and budget", Duration::from_secs(2), optimizer),
    ("coverage aggregation", Duration::from_millis(1), aggregation),
    ("end-to-end dry run", Duration::from_secs(10), dry_run),
    (
        "round-gain accounting",
        Duration::from_secs(1),
        common::rounds::round_gain_case,
    ),
    ("plan grammar round-trip", Duration::from_secs(2), plan_grammar),
];

fn main() {
    let mut failed = 0;
    for (i, (name, limit, check)) in CRITERIA.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let verdict = match result {
            Ok(()) if elapsed <= *limit => Ok(()),
            Ok(()) => Err(format!("took {elapsed:?}, limit {limit:?}")),
            Err(e) => Err(e),
        };
        match verdict {
            Ok(()) => println!("PASS criterion {}: {name} ({elapsed:.2?})", i + 1),
            Err(e) => {
                failed += 1;
                println!("FAIL criterion {}: {name} ({elapsed:.2?}): {e}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
