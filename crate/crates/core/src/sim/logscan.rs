// SPDX-License-Identifier: Apache-2.0

//! Line-based log triage.
//!
//! Every line is matched independently against an ordered pattern list;
//! the first pattern that matches decides the phase. File and line are
//! taken from named groups `file`/`line` when the pattern has them,
//! otherwise from the first `<name>.sv|.svh|.v` locator on the line.

use std::collections::HashSet;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{SimError, SimPhase};
use crate::tbgen::{ComponentKind, Testbench};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawPattern", into = "RawPattern")]
pub struct ErrorPattern {
    pub regex: Regex,
    pub phase: SimPhase,
}

#[derive(Serialize, Deserialize)]
struct RawPattern {
    regex: String,
    phase: SimPhase,
}

impl TryFrom<RawPattern> for ErrorPattern {
    type Error = regex::Error;

    fn try_from(raw: RawPattern) -> Result<Self, Self::Error> {
        ErrorPattern::new(&raw.regex, raw.phase)
    }
}

impl From<ErrorPattern> for RawPattern {
    fn from(p: ErrorPattern) -> Self {
        RawPattern {
            regex: p.regex.as_str().to_string(),
            phase: p.phase,
        }
    }
}

impl PartialEq for ErrorPattern {
    fn eq(&self, other: &Self) -> bool {
        self.phase == other.phase && self.regex.as_str() == other.regex.as_str()
    }
}

impl ErrorPattern {
    pub fn new(pattern: &str, phase: SimPhase) -> Result<Self, regex::Error> {
        Ok(ErrorPattern {
            regex: Regex::new(pattern)?,
            phase,
        })
    }
}

const DEFAULT_PATTERNS: [(&str, SimPhase); 8] = [
    // VCS elaboration diagnostics
    (
        r"Error-\[(?:URMI|UPIMI|IND|ICPD|SIOB|PCWM|TFIPC|MNF|UMI|NOA|ELAB[A-Z0-9_-]*)\]",
        SimPhase::Elaborate,
    ),
    (r"Error-\[[^\]]+\]", SimPhase::Compile),
    // VCS source locator line: "file.sv", 42: ...
    (r#"^\s*"[^"]+\.(?:svh|sv|v)",\s*\d+\s*:"#, SimPhase::Compile),
    // Questa / Verilator style
    (
        r"^\s*(?:\*\* Error(?: \(suppressible\))?:|%Error(?:-[A-Z0-9_]+)?:)",
        SimPhase::Compile,
    ),
    (
        r"UVM_(?:ERROR|FATAL)\b[^@]*@[^:]*:.*(?:build_phase|NOVIF)",
        SimPhase::Build,
    ),
    (r"UVM_(?:ERROR|FATAL)\b[^@]*@[^:]*:.*connect_phase", SimPhase::Connect),
    (
        r"UVM_(?:ERROR|FATAL)\b[^@]*@[^:]*:.*(?:extract_phase|check_phase|report_phase|final_phase)",
        SimPhase::Report,
    ),
    // summary lines ("UVM_ERROR :    0") carry no time stamp and are skipped
    (r"UVM_(?:ERROR|FATAL)\b[^@]*@", SimPhase::Run),
];

static DEFAULTS: LazyLock<Vec<ErrorPattern>> = LazyLock::new(|| {
    DEFAULT_PATTERNS
        .iter()
        .map(|(re, phase)| ErrorPattern::new(re, *phase).expect("default pattern compiles"))
        .collect()
});

pub fn default_patterns() -> Vec<ErrorPattern> {
    DEFAULTS.clone()
}

static LOCATOR: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#""?(?P<file>[A-Za-z0-9_./\\-]+\.(?:svh|sv|v))"?(?:(?:\s*,\s*|\(|:)(?P<line>\d+))?"#)
        .expect("locator compiles")
});

/// Keywords per kind, most specific first.
const KEYWORDS: [(ComponentKind, &[&str]); 11] = {
    use ComponentKind::*;
    [
        (SeqItem, &["seq_item", "item", "txn", "transaction"]),
        (Sequencer, &["sequencer", "sqr"]),
        (Sequence, &["sequence", "seq"]),
        (Driver, &["driver", "drv"]),
        (Monitor, &["monitor", "mon"]),
        (Scoreboard, &["scoreboard", "scb", "sb"]),
        (Agent, &["agent", "agt"]),
        (Env, &["env", "environment"]),
        (Testcase, &["testcase", "test"]),
        (Interface, &["interface", "intf", "vif"]),
        (Top, &["top"]),
    ]
};

fn contains_keyword(haystack: &str, word: &str) -> bool {
    haystack.match_indices(word).any(|(i, _)| {
        let before = haystack[..i].bytes().next_back();
        let after = haystack[i + word.len()..].bytes().next();
        let letter = |b: Option<u8>| b.is_some_and(|b| b.is_ascii_alphabetic());
        !letter(before) && !letter(after)
    })
}

/// Component named by a keyword in `message`, if any.
pub fn attribute_keyword(message: &str) -> Option<ComponentKind> {
    let lower = message.to_ascii_lowercase();
    KEYWORDS
        .iter()
        .find(|(_, words)| words.iter().any(|w| contains_keyword(&lower, w)))
        .map(|(k, _)| *k)
}

fn locate(pattern: &ErrorPattern, line: &str) -> (Option<String>, Option<u32>) {
    if let Some(caps) = pattern.regex.captures(line) {
        let file = caps.name("file").map(|m| m.as_str().to_string());
        let num = caps.name("line").and_then(|m| m.as_str().parse().ok());
        if file.is_some() {
            return (file, num);
        }
    }
    match LOCATOR.captures(line) {
        Some(caps) => (
            caps.name("file").map(|m| m.as_str().to_string()),
            caps.name("line").and_then(|m| m.as_str().parse().ok()),
        ),
        None => (None, None),
    }
}

/// Converts log lines matching `patterns` into attributed errors.
pub fn parse_log(text: &str, patterns: &[ErrorPattern], tb: &Testbench) -> Vec<SimError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for raw in text.lines() {
        let line = raw.trim_end_matches('\r');
        let Some(pattern) = patterns.iter().find(|p| p.regex.is_match(line)) else {
            continue;
        };
        let (file, line_no) = locate(pattern, line);
        let component = file
            .as_deref()
            .and_then(|f| tb.kind_for_file(f))
            .or_else(|| attribute_keyword(line));
        let err = SimError {
            phase: pattern.phase,
            component,
            message: line.trim().to_string(),
            file,
            line: line_no,
        };
        let key = (err.phase, err.file.clone(), err.line, err.message.clone());
        if seen.insert(key) {
            out.push(err);
        }
    }
    out
}
