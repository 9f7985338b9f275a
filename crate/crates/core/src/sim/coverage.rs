// SPDX-License-Identifier: Apache-2.0

//! Neutral coverage document.
//!
//! ```json
//! {"code": {"line": {"covered": 80, "total": 100}, "branch": {...}, "toggle": {...}},
//!  "functional": [{"fp_id": "FP-1", "bins_covered": 3, "bins_total": 4}]}
//! ```
//!
//! A code entry may carry `"uncovered": [{"file": "uart.v", "line": 57}]`
//! listing the source lines behind its shortfall.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CoverageError {
    #[error("coverage document is not valid JSON: {0}")]
    Syntax(String),
    #[error("coverage field `{field}`: {reason}")]
    Schema { field: String, reason: String },
}

fn schema(field: impl Into<String>, reason: impl Into<String>) -> CoverageError {
    CoverageError::Schema {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodeMetric {
    Line,
    Branch,
    Toggle,
}

impl CodeMetric {
    pub const ALL: [CodeMetric; 3] = [CodeMetric::Line, CodeMetric::Branch, CodeMetric::Toggle];

    pub fn key(self) -> &'static str {
        match self {
            CodeMetric::Line => "line",
            CodeMetric::Branch => "branch",
            CodeMetric::Toggle => "toggle",
        }
    }
}

impl fmt::Display for CodeMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Locus {
    pub file: String,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeCounter {
    pub covered: u64,
    pub total: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub uncovered: Vec<Locus>,
}

impl CodeCounter {
    pub fn new(covered: u64, total: u64) -> Self {
        CodeCounter {
            covered,
            total,
            uncovered: Vec::new(),
        }
    }

    pub fn missing(&self) -> u64 {
        self.total - self.covered
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionalEntry {
    pub fp_id: String,
    pub bins_covered: u64,
    pub bins_total: u64,
}

impl FunctionalEntry {
    pub fn missing(&self) -> u64 {
        self.bins_total - self.bins_covered
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageDocument {
    pub code: BTreeMap<CodeMetric, CodeCounter>,
    pub functional: Vec<FunctionalEntry>,
}

impl CoverageDocument {
    pub fn from_value(v: &Value) -> Result<Self, CoverageError> {
        let root = v.as_object().ok_or_else(|| schema("$", "expected an object"))?;
        let code_v = root.get("code").ok_or_else(|| schema("code", "missing"))?;
        let code_obj = code_v.as_object().ok_or_else(|| schema("code", "expected an object"))?;
        let mut code = BTreeMap::new();
        for (key, entry) in code_obj {
            let metric = CodeMetric::ALL.into_iter().find(|m| m.key() == key).ok_or_else(|| {
                schema(
                    format!("code.{key}"),
                    "unknown metric (expected line, branch or toggle)",
                )
            })?;
            let path = format!("code.{key}");
            let obj = entry.as_object().ok_or_else(|| schema(&path, "expected an object"))?;
            let covered = count(obj.get("covered"), &format!("{path}.covered"))?;
            let total = count(obj.get("total"), &format!("{path}.total"))?;
            if covered > total {
                return Err(schema(
                    format!("{path}.covered"),
                    format!("{covered} exceeds total {total}"),
                ));
            }
            let mut uncovered = Vec::new();
            if let Some(list) = obj.get("uncovered") {
                let arr = list
                    .as_array()
                    .ok_or_else(|| schema(format!("{path}.uncovered"), "expected an array"))?;
                for (i, item) in arr.iter().enumerate() {
                    let ipath = format!("{path}.uncovered[{i}]");
                    let file = item
                        .get("file")
                        .and_then(Value::as_str)
                        .ok_or_else(|| schema(format!("{ipath}.file"), "expected a string"))?;
                    let line = count(item.get("line"), &format!("{ipath}.line"))?;
                    uncovered.push(Locus {
                        file: file.to_string(),
                        line: u32::try_from(line).map_err(|_| schema(format!("{ipath}.line"), "out of range"))?,
                    });
                }
            }
            code.insert(
                metric,
                CodeCounter {
                    covered,
                    total,
                    uncovered,
                },
            );
        }

        let func_v = root.get("functional").ok_or_else(|| schema("functional", "missing"))?;
        let func_arr = func_v
            .as_array()
            .ok_or_else(|| schema("functional", "expected an array"))?;
        let mut functional = Vec::with_capacity(func_arr.len());
        for (i, item) in func_arr.iter().enumerate() {
            let path = format!("functional[{i}]");
            let fp_id = item
                .get("fp_id")
                .and_then(Value::as_str)
                .ok_or_else(|| schema(format!("{path}.fp_id"), "expected a string"))?;
            let bins_covered = count(item.get("bins_covered"), &format!("{path}.bins_covered"))?;
            let bins_total = count(item.get("bins_total"), &format!("{path}.bins_total"))?;
            if bins_covered > bins_total {
                return Err(schema(
                    format!("{path}.bins_covered"),
                    format!("{bins_covered} exceeds bins_total {bins_total}"),
                ));
            }
            functional.push(FunctionalEntry {
                fp_id: fp_id.to_string(),
                bins_covered,
                bins_total,
            });
        }
        Ok(CoverageDocument { code, functional })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("coverage serializes")
    }
}

fn count(v: Option<&Value>, path: &str) -> Result<u64, CoverageError> {
    match v {
        None => Err(schema(path, "missing")),
        Some(v) => v
            .as_u64()
            .ok_or_else(|| schema(path, "expected a non-negative integer")),
    }
}

pub fn parse_coverage(doc_text: &str) -> Result<CoverageDocument, CoverageError> {
    let v: Value = serde_json::from_str(doc_text).map_err(|e| CoverageError::Syntax(e.to_string()))?;
    CoverageDocument::from_value(&v)
}
