// SPDX-License-Identifier: Apache-2.0

//! Synthetic three-round batch and the per-round rates and gains it must
//! produce.

use uvmforge::harness::{summarize_bench, RunMetrics, RunStatus};
use uvmforge::repair::RepairReport;
use uvmforge::sim::SimStatus;

pub const ATTEMPTS: u64 = 45;

/// Cumulative passing attempts after each round.
pub const COUNTS: [(&str, [u64; 3]); 9] = [
    ("AES", [42, 43, 43]),
    ("ALU", [39, 41, 42]),
    ("DFI", [37, 41, 41]),
    ("HUF", [20, 35, 35]),
    ("SDRAM", [19, 39, 39]),
    ("SHA256", [30, 38, 38]),
    ("SM4", [26, 37, 37]),
    ("SPI", [29, 36, 36]),
    ("UART", [38, 39, 40]),
];

/// Reference rates and gains: round 1, round 2, gain 2, round 3, gain 3.
pub const REFERENCE: [(&str, [f64; 5]); 10] = [
    ("AES", [93.33, 95.56, 2.23, 95.56, 0.00]),
    ("ALU", [86.67, 91.11, 4.44, 93.33, 2.22]),
    ("DFI", [82.22, 91.11, 8.89, 91.11, 0.00]),
    ("HUF", [44.44, 77.78, 33.34, 77.78, 0.00]),
    ("SDRAM", [42.22, 86.67, 44.45, 86.67, 0.00]),
    ("SHA256", [66.67, 84.44, 17.77, 84.44, 0.00]),
    ("SM4", [57.77, 82.22, 24.45, 82.22, 0.00]),
    ("SPI", [64.44, 80.00, 15.56, 80.00, 0.00]),
    ("UART", [84.44, 86.67, 2.23, 88.89, 2.22]),
    ("Average", [69.13, 86.17, 17.04, 86.67, 0.50]),
];

fn attempt(passing_sim: Option<u32>) -> RunMetrics {
    let mut m = RunMetrics::empty(if passing_sim.is_some() {
        RunStatus::Success
    } else {
        RunStatus::GenerationFailed
    });
    m.repair_report = Some(RepairReport {
        rounds: Vec::new(),
        final_status: if passing_sim.is_some() {
            SimStatus::Pass
        } else {
            SimStatus::Fail
        },
        simulations_run: passing_sim.unwrap_or(3),
    });
    m
}

/// Attempts for one design: `c1` pass on the first simulation, the next
/// `c2 - c1` on the second, and so on; the rest never pass.
pub fn attempts(counts: [u64; 3]) -> Vec<RunMetrics> {
    let mut runs = Vec::new();
    let mut prev = 0;
    for (k, &c) in counts.iter().enumerate() {
        runs.extend((prev..c).map(|_| attempt(Some(k as u32 + 1))));
        prev = c;
    }
    runs.extend((prev..ATTEMPTS).map(|_| attempt(None)));
    runs
}

/// Runs the batch through the bench summarizer and compares every rate and
/// gain, including the consecutive-difference identity, within 0.01.
pub fn round_gain_case() -> Result<(), String> {
    let batch = COUNTS.iter().map(|(id, c)| (id.to_string(), attempts(*c))).collect();
    let summary = summarize_bench(batch).map_err(|e| e.to_string())?;
    let table = summary.rounds;
    if table.rounds != 3 {
        return Err(format!("{} rounds", table.rounds));
    }
    if table.rows.len() + 1 != REFERENCE.len() {
        return Err(format!("{} design rows", table.rows.len()));
    }
    for (row, (id, want)) in table.rows.iter().chain(std::iter::once(&table.average)).zip(REFERENCE) {
        if row.design_id != id {
            return Err(format!("row {} where {id} expected", row.design_id));
        }
        let got = [row.rates[0], row.rates[1], row.gains[0], row.rates[2], row.gains[1]];
        for (g, w) in got.iter().zip(want) {
            if (g - w).abs() > 0.01 + 1e-9 {
                return Err(format!("{id}: {got:?} vs {want:?}"));
            }
        }
        for k in 1..3 {
            let diff = row.rates[k] - row.rates[k - 1];
            if (row.gains[k - 1] - diff).abs() > 0.005 + 1e-9 {
                return Err(format!("{id}: gain {} is not {diff:.2}", row.gains[k - 1]));
            }
        }
    }
    Ok(())
}
