// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use crate::optimizer::round2;
use crate::repair::RepairReport;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("success rate over zero attempts")]
    DivisionDomain,
    #[error("{correct} correct out of {total} attempts")]
    CorrectExceedsTotal { correct: u64, total: u64 },
    #[error("metrics document: {0}")]
    Parse(String),
    #[error("round table: {0}")]
    RoundShape(String),
    #[error("writing {path}: {message}")]
    Io { path: String, message: String },
}

/// Percentage of correct attempts, rounded to two decimals.
pub fn success_rate(correct: u64, total: u64) -> Result<f64, MetricsError> {
    if total == 0 {
        return Err(MetricsError::DivisionDomain);
    }
    if correct > total {
        return Err(MetricsError::CorrectExceedsTotal { correct, total });
    }
    Ok(round2(100.0 * correct as f64 / total as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RunStatus {
    Success,
    GenerationFailed,
    ConfigError,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Success => 0,
            RunStatus::GenerationFailed => 2,
            RunStatus::ConfigError => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub planning_s: f64,
    pub generation_s: f64,
    pub simulation_s: f64,
    pub supplement_s: f64,
    pub total_s: f64,
    pub final_code_pct: f64,
    pub final_func_pct: f64,
    /// Absent when the run stopped before simulating.
    pub repair_report: Option<RepairReport>,
    pub status: RunStatus,
    /// What stopped a run that did not succeed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl RunMetrics {
    /// Metrics of a run that has not reached any stage yet.
    pub fn empty(status: RunStatus) -> Self {
        RunMetrics {
            planning_s: 0.0,
            generation_s: 0.0,
            simulation_s: 0.0,
            supplement_s: 0.0,
            total_s: 0.0,
            final_code_pct: 0.0,
            final_func_pct: 0.0,
            repair_report: None,
            status,
            failure: None,
        }
    }

    pub fn phase_sum(&self) -> f64 {
        self.planning_s + self.generation_s + self.simulation_s + self.supplement_s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, MetricsError> {
        serde_json::from_str(text).map_err(|e| MetricsError::Parse(e.to_string()))
    }
}

/// Per-round success rates of one design plus their gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRow {
    pub design_id: String,
    pub rates: Vec<f64>,
    /// `gains[k]` is `rates[k] - rates[k-1]`; there is no gain for round 1.
    pub gains: Vec<f64>,
}

impl RoundRow {
    pub fn from_rates(design_id: String, rates: Vec<f64>) -> Self {
        let gains = rates.windows(2).map(|w| round2(w[1] - w[0])).collect();
        RoundRow {
            design_id,
            rates,
            gains,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTable {
    pub rounds: usize,
    pub rows: Vec<RoundRow>,
    pub average: RoundRow,
}

/// Builds the round table from cumulative correct counts per round.
/// Each input is `(design, correct_after_round_k for k = 1..=n, total)`.
/// The average row is the mean of the rounded per-design rates.
pub fn round_table(inputs: &[(String, Vec<u64>, u64)]) -> Result<RoundTable, MetricsError> {
    let rounds = inputs.first().map_or(0, |(_, c, _)| c.len());
    let mut rows = Vec::with_capacity(inputs.len());
    for (id, counts, total) in inputs {
        if counts.len() != rounds {
            return Err(MetricsError::RoundShape(format!(
                "{id} has {} rounds, expected {rounds}",
                counts.len()
            )));
        }
        if counts.windows(2).any(|w| w[1] < w[0]) {
            return Err(MetricsError::RoundShape(format!("{id}: counts must be cumulative")));
        }
        let rates = counts
            .iter()
            .map(|c| success_rate(*c, *total))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(RoundRow::from_rates(id.clone(), rates));
    }
    let averages = (0..rounds)
        .map(|k| {
            if rows.is_empty() {
                0.0
            } else {
                round2(rows.iter().map(|r| r.rates[k]).sum::<f64>() / rows.len() as f64)
            }
        })
        .collect();
    Ok(RoundTable {
        rounds,
        rows,
        average: RoundRow::from_rates("Average".into(), averages),
    })
}

impl RoundTable {
    pub fn to_markdown(&self) -> String {
        let mut head = String::from("| Design |");
        let mut rule = String::from("|---|");
        for k in 1..=self.rounds {
            head.push_str(&format!(" Round {k} |"));
            rule.push_str("---|");
            if k > 1 {
                head.push_str(&format!(" Gain {k} |"));
                rule.push_str("---|");
            }
        }
        let mut out = format!("{head}\n{rule}\n");
        for row in self.rows.iter().chain(std::iter::once(&self.average)) {
            out.push_str(&format!("| {} |", row.design_id));
            for (k, rate) in row.rates.iter().enumerate() {
                out.push_str(&format!(" {rate:.2} |"));
                if k > 0 {
                    out.push_str(&format!(" {:+.2} |", row.gains[k - 1]));
                }
            }
            out.push('\n');
        }
        out
    }
}
