// SPDX-License-Identifier: Apache-2.0

//! Run inputs and on-disk layout.
//!
//! A workspace root holds the three inputs a run needs:
//!
//! ```text
//! <root>/spec.md        Markdown design specification
//! <root>/config.json    DUT configuration (top module, clock, reset, targets)
//! <root>/rtl/*.v|*.sv   RTL sources of the design under test
//! ```
//!
//! Artifacts go under `<root>/out/{plan,tb,sim,reports}`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const DEFAULT_SPEC_FILE: &str = "spec.md";
pub const DEFAULT_CONFIG_FILE: &str = "config.json";
pub const DEFAULT_RTL_DIR: &str = "rtl";
pub const DEFAULT_OUT_DIR: &str = "out";

/// Subdirectories created under the run directory.
pub const OUT_SUBDIRS: [&str; 4] = ["plan", "tb", "sim", "reports"];

pub const DEFAULT_COVERAGE_TARGET_PCT: f64 = 90.0;
pub const DEFAULT_MAX_REPAIR_ITERS: u32 = 2;
pub const DEFAULT_MAX_OPT_ITERS: u32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config.json:{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("config field `{field}`: {reason}")]
    Schema { field: String, reason: String },
}

impl ConfigError {
    fn schema(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Schema {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Dotted path of the offending field, for schema errors.
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::Schema { field, .. } => Some(field),
            ConfigError::Syntax { .. } => None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum WorkspaceError {
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("cannot read {}: {source}", path.display())]
    UnreadableSource {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("spec file {} is empty", .0.display())]
    EmptySpec(PathBuf),
    #[error("output directory {} overlaps the RTL source tree", .0.display())]
    OutDirInSources(PathBuf),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot create {}: {source}", path.display())]
    CreateOutDir {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClockSpec {
    pub signal: String,
    pub period_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResetSpec {
    pub signal: String,
    /// Logic level that holds the design in reset (0 = active low).
    pub active_level: u8,
    pub duration_cycles: u32,
}

impl ResetSpec {
    pub fn active_low(&self) -> bool {
        self.active_level == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageTargets {
    pub code_pct: f64,
    pub func_pct: f64,
}

impl Default for CoverageTargets {
    fn default() -> Self {
        CoverageTargets {
            code_pct: DEFAULT_COVERAGE_TARGET_PCT,
            func_pct: DEFAULT_COVERAGE_TARGET_PCT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DutConfig {
    pub top_module: String,
    pub clock: ClockSpec,
    pub reset: ResetSpec,
    pub coverage_targets: CoverageTargets,
    pub max_repair_iters: u32,
    pub max_opt_iters: u32,
}

impl DutConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Returns true for a simple (non-escaped) Verilog identifier.
pub fn is_verilog_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$')
}

/// Parses and validates `config.json` text.
///
/// Fields are checked in declaration order and the first missing or
/// ill-typed one is reported by its dotted path (`reset.active_level`).
pub fn parse_config(text: &str) -> Result<DutConfig, ConfigError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let root = value
        .as_object()
        .ok_or_else(|| ConfigError::schema("$", "expected a JSON object"))?;

    let top_module = identifier_field(root, "", "top_module")?;

    let clock = object_field(root, "", "clock")?;
    let clock = ClockSpec {
        signal: identifier_field(clock, "clock.", "signal")?,
        period_ns: {
            let p = number_field(clock, "clock.", "period_ns")?
                .ok_or_else(|| ConfigError::schema("clock.period_ns", "required"))?;
            if !(p > 0.0 && p.is_finite()) {
                return Err(ConfigError::schema("clock.period_ns", "must be positive"));
            }
            p
        },
    };

    let reset = object_field(root, "", "reset")?;
    let reset = ResetSpec {
        signal: identifier_field(reset, "reset.", "signal")?,
        active_level: match integer_field(reset, "reset.", "active_level")? {
            Some(0) => 0,
            Some(1) => 1,
            Some(_) => return Err(ConfigError::schema("reset.active_level", "must be 0 or 1")),
            None => return Err(ConfigError::schema("reset.active_level", "required")),
        },
        duration_cycles: match integer_field(reset, "reset.", "duration_cycles")? {
            Some(n) if n >= 1 && n <= u32::MAX as u64 => n as u32,
            Some(_) => {
                return Err(ConfigError::schema(
                    "reset.duration_cycles",
                    "must be a positive integer",
                ))
            }
            None => return Err(ConfigError::schema("reset.duration_cycles", "required")),
        },
    };

    let mut coverage_targets = CoverageTargets::default();
    if let Some(v) = root.get("coverage_targets") {
        let obj = v
            .as_object()
            .ok_or_else(|| ConfigError::schema("coverage_targets", "expected an object"))?;
        for (key, slot) in [
            ("code_pct", &mut coverage_targets.code_pct),
            ("func_pct", &mut coverage_targets.func_pct),
        ] {
            if let Some(p) = number_field(obj, "coverage_targets.", key)? {
                if !(0.0..=100.0).contains(&p) {
                    return Err(ConfigError::schema(
                        format!("coverage_targets.{key}"),
                        "must lie in 0..=100",
                    ));
                }
                *slot = p;
            }
        }
    }

    let max_repair_iters = budget_field(root, "max_repair_iters", DEFAULT_MAX_REPAIR_ITERS)?;
    let max_opt_iters = budget_field(root, "max_opt_iters", DEFAULT_MAX_OPT_ITERS)?;

    Ok(DutConfig {
        top_module,
        clock,
        reset,
        coverage_targets,
        max_repair_iters,
        max_opt_iters,
    })
}

fn object_field<'a>(
    obj: &'a Map<String, Value>,
    prefix: &str,
    key: &str,
) -> Result<&'a Map<String, Value>, ConfigError> {
    match obj.get(key) {
        None => Err(ConfigError::schema(format!("{prefix}{key}"), "required")),
        Some(v) => v
            .as_object()
            .ok_or_else(|| ConfigError::schema(format!("{prefix}{key}"), "expected an object")),
    }
}

fn identifier_field(obj: &Map<String, Value>, prefix: &str, key: &str) -> Result<String, ConfigError> {
    let path = format!("{prefix}{key}");
    match obj.get(key) {
        None => Err(ConfigError::schema(path, "required")),
        Some(Value::String(s)) if is_verilog_identifier(s) => Ok(s.clone()),
        Some(Value::String(_)) => Err(ConfigError::schema(path, "not a Verilog identifier")),
        Some(_) => Err(ConfigError::schema(path, "expected a string")),
    }
}

fn number_field(obj: &Map<String, Value>, prefix: &str, key: &str) -> Result<Option<f64>, ConfigError> {
    match obj.get(key) {
        None => Ok(None),
        Some(Value::Number(n)) => Ok(n.as_f64()),
        Some(_) => Err(ConfigError::schema(format!("{prefix}{key}"), "expected a number")),
    }
}

fn integer_field(obj: &Map<String, Value>, prefix: &str, key: &str) -> Result<Option<u64>, ConfigError> {
    match obj.get(key) {
        None => Ok(None),
        Some(Value::Number(n)) => n
            .as_u64()
            .map(Some)
            .ok_or_else(|| ConfigError::schema(format!("{prefix}{key}"), "expected a non-negative integer")),
        Some(_) => Err(ConfigError::schema(
            format!("{prefix}{key}"),
            "expected a non-negative integer",
        )),
    }
}

fn budget_field(obj: &Map<String, Value>, key: &str, default: u32) -> Result<u32, ConfigError> {
    match integer_field(obj, "", key)? {
        None => Ok(default),
        Some(n) => u32::try_from(n).map_err(|_| ConfigError::schema(key, "out of range")),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecSection {
    pub heading: String,
    /// Byte offset of the heading's first `#`.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecDocument {
    pub raw_text: String,
    pub section_index: Vec<SpecSection>,
}

impl SpecDocument {
    pub fn headings(&self) -> impl Iterator<Item = &str> {
        self.section_index.iter().map(|s| s.heading.as_str())
    }
}

/// Indexes every ATX heading of a Markdown document, skipping fenced code.
pub fn index_spec(raw: &str) -> SpecDocument {
    let mut section_index = Vec::new();
    // (fence char, fence length) while inside a fenced block
    let mut fence: Option<(u8, usize)> = None;
    let mut line_start = 0usize;

    for line in raw.split_inclusive('\n') {
        let start = line_start;
        line_start += line.len();
        let content = line.trim_end_matches(['\n', '\r']);
        let indent = content.bytes().take_while(|&b| b == b' ').count();
        if indent > 3 {
            continue;
        }
        let rest = &content[indent..];

        if let Some((ch, len)) = fence {
            let run = rest.bytes().take_while(|&b| b == ch).count();
            if run >= len && rest[run..].trim().is_empty() {
                fence = None;
            }
            continue;
        }
        if let Some(open) = fence_opening(rest) {
            fence = Some(open);
            continue;
        }
        if let Some(heading) = atx_heading(rest) {
            section_index.push(SpecSection {
                heading,
                offset: start + indent,
            });
        }
    }

    SpecDocument {
        raw_text: raw.to_string(),
        section_index,
    }
}

fn fence_opening(rest: &str) -> Option<(u8, usize)> {
    let ch = *rest.as_bytes().first()?;
    if ch != b'`' && ch != b'~' {
        return None;
    }
    let run = rest.bytes().take_while(|&b| b == ch).count();
    if run < 3 {
        return None;
    }
    // backtick fences cannot carry backticks in their info string
    if ch == b'`' && rest[run..].contains('`') {
        return None;
    }
    Some((ch, run))
}

fn atx_heading(rest: &str) -> Option<String> {
    let level = rest.bytes().take_while(|&b| b == b'#').count();
    if level == 0 || level > 6 {
        return None;
    }
    let after = &rest[level..];
    if !(after.is_empty() || after.starts_with(' ') || after.starts_with('\t')) {
        return None;
    }
    let mut text = after.trim();
    // optional closing sequence: a run of '#' preceded by whitespace
    let trimmed = text.trim_end_matches('#');
    if trimmed.is_empty() {
        text = "";
    } else if trimmed.len() != text.len() && trimmed.ends_with([' ', '\t']) {
        text = trimmed.trim_end();
    }
    Some(text.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RtlSource {
    pub path: PathBuf,
    pub text: String,
}

/// Input file names, relative to the root unless absolute.
#[derive(Debug, Clone)]
pub struct Layout {
    pub spec: PathBuf,
    pub config: PathBuf,
    pub rtl_dir: PathBuf,
    pub out_dir: Option<PathBuf>,
}

impl Default for Layout {
    fn default() -> Self {
        Layout {
            spec: DEFAULT_SPEC_FILE.into(),
            config: DEFAULT_CONFIG_FILE.into(),
            rtl_dir: DEFAULT_RTL_DIR.into(),
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Workspace {
    pub root: PathBuf,
    pub spec: SpecDocument,
    pub config: DutConfig,
    /// RTL files in lexicographic path order.
    pub dut_sources: Vec<RtlSource>,
    pub out_dir: PathBuf,
}

impl Workspace {
    pub fn plan_dir(&self) -> PathBuf {
        self.out_dir.join("plan")
    }

    pub fn tb_dir(&self) -> PathBuf {
        self.out_dir.join("tb")
    }

    pub fn sim_dir(&self) -> PathBuf {
        self.out_dir.join("sim")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.out_dir.join("reports")
    }

    pub fn source_texts(&self) -> Vec<&str> {
        self.dut_sources.iter().map(|s| s.text.as_str()).collect()
    }
}

pub fn load_workspace(root: &Path) -> Result<Workspace, WorkspaceError> {
    load_workspace_with(root, &Layout::default())
}

pub fn load_workspace_with(root: &Path, layout: &Layout) -> Result<Workspace, WorkspaceError> {
    let spec_path = root.join(&layout.spec);
    let config_path = root.join(&layout.config);
    let rtl_dir = root.join(&layout.rtl_dir);

    let raw_spec = read_input(&spec_path, &layout.spec)?;
    if raw_spec.trim().is_empty() {
        return Err(WorkspaceError::EmptySpec(spec_path));
    }
    let config_text = read_input(&config_path, &layout.config)?;
    let config = parse_config(&config_text)?;

    if !rtl_dir.is_dir() {
        return Err(WorkspaceError::MissingInput(format!("{}/", layout.rtl_dir.display())));
    }
    let mut rtl_files: Vec<PathBuf> = fs::read_dir(&rtl_dir)
        .map_err(|source| WorkspaceError::UnreadableSource {
            path: rtl_dir.clone(),
            source,
        })?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && matches!(p.extension().and_then(|e| e.to_str()), Some("v") | Some("sv")))
        .collect();
    rtl_files.sort();
    if rtl_files.is_empty() {
        return Err(WorkspaceError::MissingInput(format!(
            "{}/*.v|*.sv",
            layout.rtl_dir.display()
        )));
    }
    let dut_sources = rtl_files
        .into_iter()
        .map(|path| {
            let text = fs::read_to_string(&path).map_err(|source| WorkspaceError::UnreadableSource {
                path: path.clone(),
                source,
            })?;
            Ok(RtlSource { path, text })
        })
        .collect::<Result<Vec<_>, WorkspaceError>>()?;

    let out_dir = match &layout.out_dir {
        Some(dir) => root.join(dir),
        None => root.join(DEFAULT_OUT_DIR),
    };
    if out_dir.starts_with(&rtl_dir) {
        return Err(WorkspaceError::OutDirInSources(out_dir));
    }
    for sub in OUT_SUBDIRS {
        let dir = out_dir.join(sub);
        fs::create_dir_all(&dir).map_err(|source| WorkspaceError::CreateOutDir {
            path: dir.clone(),
            source,
        })?;
    }

    Ok(Workspace {
        root: root.to_path_buf(),
        spec: index_spec(&raw_spec),
        config,
        dut_sources,
        out_dir,
    })
}

fn read_input(path: &Path, name: &Path) -> Result<String, WorkspaceError> {
    if !path.exists() {
        return Err(WorkspaceError::MissingInput(name.display().to_string()));
    }
    fs::read_to_string(path).map_err(|source| WorkspaceError::UnreadableSource {
        path: path.to_path_buf(),
        source,
    })
}
