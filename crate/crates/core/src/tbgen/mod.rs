// SPDX-License-Identifier: Apache-2.0

//! Testbench generation: component kinds, the fixed dependency graph,
//! hybrid template/agent dispatch and on-disk assembly.

mod prompt;
mod template;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{AgentError, AgentRole, LlmBackend};
use crate::planner::TestPlan;
use crate::rtl::DutInterface;
use crate::workspace::DutConfig;

pub(crate) use prompt::generation_parts;
pub use prompt::{build_generation_prompt, kind_pitfalls, kind_responsibility};
pub use template::{render_template, substitute, TemplateError};

#[derive(Debug, thiserror::Error)]
pub enum TbGenError {
    #[error("{kind} prompt needs the {missing} source, which has not been generated")]
    MissingDependency {
        kind: ComponentKind,
        missing: ComponentKind,
    },
    #[error("{0} is template-generated")]
    NotAnAgentKind(ComponentKind),
    #[error("{0} has no template")]
    NotATemplateKind(ComponentKind),
    #[error("clock or reset port is not classified; run classify_ports first")]
    UnclassifiedClock,
    #[error("agent returned no code for {0}")]
    EmptyGeneration(ComponentKind),
    #[error("testbench is incomplete, missing: {}", list_kinds(.0))]
    IncompleteSet(Vec<ComponentKind>),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("testbench state {}: {message}", path.display())]
    State { path: PathBuf, message: String },
}

fn list_kinds(kinds: &[ComponentKind]) -> String {
    kinds.iter().map(|k| k.slug()).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ComponentKind {
    Interface,
    Top,
    Sequencer,
    SeqItem,
    Sequence,
    Driver,
    Monitor,
    Agent,
    Env,
    Scoreboard,
    Testcase,
}

impl ComponentKind {
    pub const ALL: [ComponentKind; 11] = [
        ComponentKind::Interface,
        ComponentKind::Top,
        ComponentKind::Sequencer,
        ComponentKind::SeqItem,
        ComponentKind::Sequence,
        ComponentKind::Driver,
        ComponentKind::Monitor,
        ComponentKind::Agent,
        ComponentKind::Env,
        ComponentKind::Scoreboard,
        ComponentKind::Testcase,
    ];

    pub const TEMPLATES: [ComponentKind; 3] = [ComponentKind::Interface, ComponentKind::Top, ComponentKind::Sequencer];

    pub fn is_template(self) -> bool {
        Self::TEMPLATES.contains(&self)
    }

    pub fn slug(self) -> &'static str {
        match self {
            ComponentKind::Interface => "interface",
            ComponentKind::Top => "top",
            ComponentKind::Sequencer => "sequencer",
            ComponentKind::SeqItem => "seq_item",
            ComponentKind::Sequence => "sequence",
            ComponentKind::Driver => "driver",
            ComponentKind::Monitor => "monitor",
            ComponentKind::Agent => "agent",
            ComponentKind::Env => "env",
            ComponentKind::Scoreboard => "scoreboard",
            ComponentKind::Testcase => "testcase",
        }
    }

    pub fn from_slug(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.slug() == s)
    }

    /// `<dut>_<slug>.sv`, lowercase.
    pub fn file_name(self, dut: &str) -> String {
        format!("{}_{}.sv", dut.to_lowercase(), self.slug())
    }

    /// Name of the class or module the component defines.
    pub fn type_name(self, dut: &str) -> String {
        let prefix = dut.to_lowercase();
        match self {
            ComponentKind::Interface => format!("{prefix}_if"),
            ComponentKind::Top => format!("{prefix}_tb_top"),
            ComponentKind::Testcase => format!("{prefix}_test"),
            other => format!("{prefix}_{}", other.slug()),
        }
    }
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

/// Edges `(a, b)`: `b` is built on `a`.
pub const DEP_EDGES: [(ComponentKind, ComponentKind); 16] = {
    use ComponentKind::*;
    [
        (Interface, Driver),
        (Interface, Monitor),
        (Interface, Top),
        (SeqItem, Sequencer),
        (SeqItem, Driver),
        (SeqItem, Monitor),
        (SeqItem, Sequence),
        (SeqItem, Scoreboard),
        (Sequencer, Agent),
        (Driver, Agent),
        (Monitor, Agent),
        (Agent, Env),
        (Scoreboard, Env),
        (Sequence, Testcase),
        (Env, Testcase),
        (Env, Top),
    ]
};

/// Ready kinds are taken in this order when several are available.
const TIE_BREAK: [ComponentKind; 11] = {
    use ComponentKind::*;
    [
        Interface, SeqItem, Sequencer, Sequence, Driver, Monitor, Agent, Scoreboard, Env, Testcase, Top,
    ]
};

pub fn dep_edges() -> Vec<(ComponentKind, ComponentKind)> {
    DEP_EDGES.to_vec()
}

/// Direct predecessors of `kind`.
pub fn predecessors(kind: ComponentKind) -> Vec<ComponentKind> {
    let set: BTreeSet<_> = DEP_EDGES.iter().filter(|(_, b)| *b == kind).map(|(a, _)| *a).collect();
    TIE_BREAK.into_iter().filter(|k| set.contains(k)).collect()
}

/// Topological order of the dependency graph (Kahn, fixed tie-break).
pub fn dependency_order() -> Vec<ComponentKind> {
    let edges = dep_edges();
    let mut indegree: BTreeMap<ComponentKind, usize> = ComponentKind::ALL.iter().map(|k| (*k, 0)).collect();
    for (_, b) in &edges {
        *indegree.get_mut(b).expect("known kind") += 1;
    }
    let mut order = Vec::with_capacity(11);
    while order.len() < ComponentKind::ALL.len() {
        let next = TIE_BREAK
            .into_iter()
            .find(|k| !order.contains(k) && indegree[k] == 0)
            .expect("dependency graph is acyclic");
        order.push(next);
        for (_, b) in edges.iter().filter(|(a, _)| *a == next) {
            *indegree.get_mut(b).expect("known kind") -= 1;
        }
    }
    order
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Provenance {
    Template { template_id: String },
    Agent { role: AgentRole, prompt_digest: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UvmComponent {
    pub kind: ComponentKind,
    pub file_name: String,
    pub source: String,
    pub version: u32,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Revision {
    pub kind: ComponentKind,
    pub version: u32,
    pub reason: String,
}

/// Name of the file list written next to the component sources.
pub const FILE_LIST: &str = "files.f";

/// Persisted testbench metadata, kept outside `tb/` so that directory holds
/// only simulator inputs.
pub const STATE_FILE: &str = "testbench.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Testbench {
    /// Lowercase prefix used for file and type names.
    pub dut: String,
    pub components: BTreeMap<ComponentKind, UvmComponent>,
    pub dep_graph: Vec<(ComponentKind, ComponentKind)>,
    pub history: Vec<Revision>,
}

impl Testbench {
    pub fn new(dut: &str) -> Self {
        Testbench {
            dut: dut.to_lowercase(),
            components: BTreeMap::new(),
            dep_graph: dep_edges(),
            history: Vec::new(),
        }
    }

    pub fn get(&self, kind: ComponentKind) -> Option<&UvmComponent> {
        self.components.get(&kind)
    }

    pub fn version(&self, kind: ComponentKind) -> u32 {
        self.get(kind).map_or(0, |c| c.version)
    }

    /// Installs `component`, assigning the next version of its kind and
    /// recording one history entry. Returns the assigned version.
    pub fn install(&mut self, mut component: UvmComponent, reason: &str) -> u32 {
        let version = self.version(component.kind) + 1;
        component.version = version;
        component.file_name = component.kind.file_name(&self.dut);
        self.history.push(Revision {
            kind: component.kind,
            version,
            reason: reason.to_string(),
        });
        self.components.insert(component.kind, component);
        version
    }

    pub fn missing_kinds(&self) -> Vec<ComponentKind> {
        ComponentKind::ALL
            .into_iter()
            .filter(|k| !self.components.contains_key(k))
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.missing_kinds().is_empty()
    }

    /// Component whose file name equals the last path segment of `path`.
    pub fn kind_for_file(&self, path: &str) -> Option<ComponentKind> {
        let base = path.rsplit(['/', '\\']).next().unwrap_or(path);
        self.components.values().find(|c| c.file_name == base).map(|c| c.kind)
    }

    /// File names in dependency order; Top comes last.
    pub fn file_list(&self) -> Vec<String> {
        dependency_order()
            .into_iter()
            .filter_map(|k| self.get(k).map(|c| c.file_name.clone()))
            .collect()
    }

    /// Writes every component plus `files.f` into `dir`, replacing stale
    /// `.sv` files from earlier generations.
    pub fn write_files(&self, dir: &Path) -> Result<Vec<PathBuf>, TbGenError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| TbGenError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        if let Ok(entries) = fs::read_dir(dir) {
            for entry in entries.flatten() {
                let p = entry.path();
                let name = entry.file_name().to_string_lossy().into_owned();
                let ours = self.components.values().any(|c| c.file_name == name);
                if p.extension().is_some_and(|e| e == "sv") && !ours {
                    fs::remove_file(&p).map_err(io(&p))?;
                }
            }
        }
        let mut written = Vec::new();
        for name in self.file_list() {
            let c = self
                .components
                .values()
                .find(|c| c.file_name == name)
                .expect("listed component");
            let path = dir.join(&name);
            fs::write(&path, &c.source).map_err(io(&path))?;
            written.push(path);
        }
        let list = dir.join(FILE_LIST);
        let mut text = self.file_list().join("\n");
        text.push('\n');
        fs::write(&list, text).map_err(io(&list))?;
        written.push(list);
        Ok(written)
    }

    pub fn save(&self, path: &Path) -> Result<(), TbGenError> {
        let text = serde_json::to_string_pretty(self).expect("testbench serializes");
        fs::write(path, text).map_err(|source| TbGenError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, TbGenError> {
        let text = fs::read_to_string(path).map_err(|source| TbGenError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| TbGenError::State {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Checks completeness of `components` and writes the file set to `tb_dir`.
pub fn assemble_testbench(
    dut: &str,
    components: impl IntoIterator<Item = UvmComponent>,
    tb_dir: &Path,
) -> Result<Testbench, TbGenError> {
    let mut tb = Testbench::new(dut);
    for c in components {
        tb.install(c, "initial generation");
    }
    let missing = tb.missing_kinds();
    if !missing.is_empty() {
        return Err(TbGenError::IncompleteSet(missing));
    }
    tb.write_files(tb_dir)?;
    Ok(tb)
}

/// Inputs shared by every component generation of one run.
#[derive(Debug, Clone, Copy)]
pub struct GenContext<'a> {
    pub iface: &'a DutInterface,
    pub cfg: &'a DutConfig,
    pub plan: &'a TestPlan,
}

/// Already generated predecessors of `kind` in `tb`.
pub fn dependencies_of(kind: ComponentKind, tb: &Testbench) -> Vec<&UvmComponent> {
    predecessors(kind).into_iter().filter_map(|k| tb.get(k)).collect()
}

/// Generates one component at version 1: templates are rendered, the other
/// kinds go through their generation agent.
pub fn generate_component(
    kind: ComponentKind,
    ctx: GenContext<'_>,
    tb: &Testbench,
    backend: &dyn LlmBackend,
) -> Result<UvmComponent, TbGenError> {
    if kind.is_template() {
        return render_template(kind, ctx.iface, ctx.cfg);
    }
    let deps = dependencies_of(kind, tb);
    let prompt = build_generation_prompt(kind, ctx.plan, &deps, ctx.iface)?;
    let response = backend.invoke(&prompt)?;
    let source = response
        .extracted_code
        .filter(|c| !c.trim().is_empty())
        .ok_or(TbGenError::EmptyGeneration(kind))?;
    Ok(UvmComponent {
        kind,
        file_name: kind.file_name(&ctx.cfg.top_module),
        source: ensure_trailing_newline(source),
        version: 1,
        provenance: Provenance::Agent {
            role: AgentRole::Generation(kind),
            prompt_digest: prompt.digest(),
        },
    })
}

pub(crate) fn ensure_trailing_newline(mut s: String) -> String {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

/// Generates all eleven components in dependency order and writes them to
/// `tb_dir`.
pub fn generate_testbench(
    ctx: GenContext<'_>,
    backend: &dyn LlmBackend,
    tb_dir: &Path,
) -> Result<Testbench, TbGenError> {
    let mut tb = Testbench::new(&ctx.cfg.top_module);
    for kind in dependency_order() {
        let component = generate_component(kind, ctx, &tb, backend)?;
        log::info!("generated {kind} ({})", component.file_name);
        tb.install(component, "initial generation");
    }
    tb.write_files(tb_dir)?;
    Ok(tb)
}
