// SPDX-License-Identifier: Apache-2.0

//! Agent abstraction shared by planning, generation and optimisation.
//!
//! Every agent prompt is a fixed sequence of labelled stages. The stage
//! sequence depends only on the agent's role, so a prompt assembled for a
//! role either carries exactly the canonical stages in canonical order or
//! is rejected.

mod backend;
mod extract;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::tbgen::ComponentKind;

pub use backend::{
    connect, invoke, BackendConfig, BackendKind, HttpBackend, MockBackend, ReqwestTransport, Transport, TransportError,
    DEFAULT_API_KEY_ENV,
};
pub use extract::{extract_code, fenced_blocks, FencedBlock};

pub const DEFAULT_TEMPERATURE: f64 = 0.3;

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("prompt for {role} is missing the {label} stage")]
    MissingStage { role: AgentRole, label: StageLabel },
    #[error("prompt for {role} does not take a {label} stage")]
    ExtraStage { role: AgentRole, label: StageLabel },
    #[error("{label} stage body is empty")]
    EmptyStage { label: StageLabel },
    #[error("{0} is template-generated and has no generation agent prompt")]
    TemplateKind(ComponentKind),
    #[error("temperature {0} outside [0, 2]")]
    Temperature(f64),
    #[error("invalid backend configuration: {0}")]
    InvalidBackendConfig(String),
    #[error("environment variable {0} holding the API key is not set")]
    AuthMissing(String),
    #[error("backend unreachable after {attempts} attempt(s): {last_error}")]
    BackendUnreachable { attempts: u32, last_error: String },
    #[error("backend rejected the request with HTTP {status}: {body}")]
    BackendRejected { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error("no mock fixture for key {key} in {dir}")]
    MockFixtureMissing { key: String, dir: String },
    #[error("cannot read mock fixture {path}: {source}")]
    MockFixtureUnreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Which agent a prompt is addressed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgentRole {
    Analysis,
    Generation(ComponentKind),
    Optimization,
}

impl AgentRole {
    /// File-name friendly key: `analysis`, `generation-driver`, `optimization`.
    pub fn slug(&self) -> String {
        match self {
            AgentRole::Analysis => "analysis".into(),
            AgentRole::Generation(kind) => format!("generation-{}", kind.slug()),
            AgentRole::Optimization => "optimization".into(),
        }
    }

    /// Agent identifier in the `G_driver_agent` style.
    pub fn agent_id(&self) -> String {
        match self {
            AgentRole::Analysis => "A_analysis_agent".into(),
            AgentRole::Generation(kind) => format!("G_{}_agent", kind.slug()),
            AgentRole::Optimization => "O_optimization_agent".into(),
        }
    }

    pub fn canonical_stages(&self) -> &'static [StageLabel] {
        use StageLabel::*;
        match self {
            AgentRole::Analysis => &[RoleCustomisation, TestPlanFormulation, OutputTemplateConstruction],
            AgentRole::Generation(_) => &[
                RoleCustomisation,
                DependencyDefinition,
                FunctionExpectation,
                MistakeMitigation,
            ],
            AgentRole::Optimization => &[
                RoleCustomisation,
                CoverageAnalysis,
                StimulusSupplement,
                MistakeMitigation,
            ],
        }
    }
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.agent_id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StageLabel {
    RoleCustomisation,
    DependencyDefinition,
    FunctionExpectation,
    MistakeMitigation,
    TestPlanFormulation,
    OutputTemplateConstruction,
    CoverageAnalysis,
    StimulusSupplement,
}

impl StageLabel {
    pub fn title(self) -> &'static str {
        match self {
            StageLabel::RoleCustomisation => "Role customisation",
            StageLabel::DependencyDefinition => "Dependency definition",
            StageLabel::FunctionExpectation => "Function expectation",
            StageLabel::MistakeMitigation => "Mistake mitigation",
            StageLabel::TestPlanFormulation => "Test plan formulation",
            StageLabel::OutputTemplateConstruction => "Output template construction",
            StageLabel::CoverageAnalysis => "Coverage analysis",
            StageLabel::StimulusSupplement => "Stimulus supplement",
        }
    }
}

impl fmt::Display for StageLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.title())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptStage {
    pub label: StageLabel,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentPrompt {
    pub role: AgentRole,
    pub stages: Vec<PromptStage>,
    pub temperature: f64,
}

impl AgentPrompt {
    pub fn stage(&self, label: StageLabel) -> Option<&str> {
        self.stages.iter().find(|s| s.label == label).map(|s| s.body.as_str())
    }

    /// Hex SHA-256 over the concatenated stage bodies.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for stage in &self.stages {
            hasher.update(stage.body.as_bytes());
        }
        hex::encode(hasher.finalize())
    }

    pub fn with_temperature(mut self, temperature: f64) -> Result<Self, AgentError> {
        if !(0.0..=2.0).contains(&temperature) {
            return Err(AgentError::Temperature(temperature));
        }
        self.temperature = temperature;
        Ok(self)
    }

    /// System message: the role customisation stage.
    pub fn system_message(&self) -> &str {
        self.stage(StageLabel::RoleCustomisation).unwrap_or_default()
    }

    /// User message: every other stage under a `## <stage>` header.
    pub fn user_message(&self) -> String {
        let mut out = String::new();
        for stage in self.stages.iter().filter(|s| s.label != StageLabel::RoleCustomisation) {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str(&format!("## {}\n\n{}\n", stage.label.title(), stage.body.trim_end()));
        }
        out
    }
}

/// Orders `parts` into the role's canonical stage sequence.
pub fn assemble_prompt(role: AgentRole, mut parts: BTreeMap<StageLabel, String>) -> Result<AgentPrompt, AgentError> {
    if let AgentRole::Generation(kind) = role {
        if kind.is_template() {
            return Err(AgentError::TemplateKind(kind));
        }
    }
    let canonical = role.canonical_stages();
    if let Some(extra) = parts.keys().find(|label| !canonical.contains(label)) {
        return Err(AgentError::ExtraStage { role, label: *extra });
    }
    let mut stages = Vec::with_capacity(canonical.len());
    for &label in canonical {
        let body = parts.remove(&label).ok_or(AgentError::MissingStage { role, label })?;
        if body.trim().is_empty() {
            return Err(AgentError::EmptyStage { label });
        }
        stages.push(PromptStage { label, body });
    }
    Ok(AgentPrompt {
        role,
        stages,
        temperature: DEFAULT_TEMPERATURE,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt: u64,
    pub completion: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentResponse {
    pub raw_text: String,
    pub extracted_code: Option<String>,
    pub token_usage: TokenUsage,
    pub latency_ms: u64,
}

impl AgentResponse {
    pub fn from_text(raw_text: String, token_usage: TokenUsage, latency_ms: u64) -> Self {
        let extracted_code = extract_code(&raw_text);
        AgentResponse {
            raw_text,
            extracted_code,
            token_usage,
            latency_ms,
        }
    }
}

/// A language-model endpoint. Implementations are shared across runs.
pub trait LlmBackend: Send + Sync {
    fn invoke(&self, prompt: &AgentPrompt) -> Result<AgentResponse, AgentError>;
}

impl<B: LlmBackend + ?Sized> LlmBackend for &B {
    fn invoke(&self, prompt: &AgentPrompt) -> Result<AgentResponse, AgentError> {
        (**self).invoke(prompt)
    }
}

impl<B: LlmBackend + ?Sized> LlmBackend for Box<B> {
    fn invoke(&self, prompt: &AgentPrompt) -> Result<AgentResponse, AgentError> {
        (**self).invoke(prompt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parts(labels: &[StageLabel]) -> BTreeMap<StageLabel, String> {
        labels.iter().map(|l| (*l, format!("body of {}", l.title()))).collect()
    }

    #[test]
    fn generation_prompt_has_four_stages_in_order() {
        use StageLabel::*;
        let role = AgentRole::Generation(ComponentKind::Driver);
        // insertion order deliberately scrambled
        let p = assemble_prompt(
            role,
            parts(&[
                MistakeMitigation,
                RoleCustomisation,
                FunctionExpectation,
                DependencyDefinition,
            ]),
        )
        .unwrap();
        let labels: Vec<StageLabel> = p.stages.iter().map(|s| s.label).collect();
        assert_eq!(
            labels,
            vec![
                RoleCustomisation,
                DependencyDefinition,
                FunctionExpectation,
                MistakeMitigation
            ]
        );
        assert_eq!(p.temperature, 0.3);
    }

    #[test]
    fn missing_and_extra_stages() {
        use StageLabel::*;
        let err = assemble_prompt(AgentRole::Analysis, parts(&[RoleCustomisation, TestPlanFormulation])).unwrap_err();
        assert!(matches!(
            err,
            AgentError::MissingStage {
                label: OutputTemplateConstruction,
                ..
            }
        ));

        let err = assemble_prompt(
            AgentRole::Optimization,
            parts(&[
                RoleCustomisation,
                CoverageAnalysis,
                StimulusSupplement,
                MistakeMitigation,
                DependencyDefinition,
            ]),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            AgentError::ExtraStage {
                label: DependencyDefinition,
                ..
            }
        ));
    }

    #[test]
    fn template_kinds_and_empty_bodies_rejected() {
        use StageLabel::*;
        let full = parts(&[
            RoleCustomisation,
            DependencyDefinition,
            FunctionExpectation,
            MistakeMitigation,
        ]);
        assert!(matches!(
            assemble_prompt(AgentRole::Generation(ComponentKind::Top), full.clone()),
            Err(AgentError::TemplateKind(ComponentKind::Top))
        ));
        let mut blank = full;
        blank.insert(FunctionExpectation, "  \n".into());
        assert!(matches!(
            assemble_prompt(AgentRole::Generation(ComponentKind::Monitor), blank),
            Err(AgentError::EmptyStage {
                label: FunctionExpectation
            })
        ));
    }

    #[test]
    fn digest_is_sha256_of_concatenated_bodies() {
        use StageLabel::*;
        let p = assemble_prompt(
            AgentRole::Analysis,
            parts(&[RoleCustomisation, TestPlanFormulation, OutputTemplateConstruction]),
        )
        .unwrap();
        let mut concatenated = String::new();
        for s in &p.stages {
            concatenated.push_str(&s.body);
        }
        let expected = hex::encode(Sha256::digest(concatenated.as_bytes()));
        assert_eq!(p.digest(), expected);
        assert_eq!(p.digest().len(), 64);
    }

    #[test]
    fn temperature_bounds() {
        use StageLabel::*;
        let p = assemble_prompt(
            AgentRole::Analysis,
            parts(&[RoleCustomisation, TestPlanFormulation, OutputTemplateConstruction]),
        )
        .unwrap();
        assert_eq!(p.clone().with_temperature(1.5).unwrap().temperature, 1.5);
        assert!(p.with_temperature(2.5).is_err());
    }

    #[test]
    fn messages_split_role_from_rest() {
        use StageLabel::*;
        let p = assemble_prompt(
            AgentRole::Analysis,
            parts(&[RoleCustomisation, TestPlanFormulation, OutputTemplateConstruction]),
        )
        .unwrap();
        assert_eq!(p.system_message(), "body of Role customisation");
        let user = p.user_message();
        assert!(user.starts_with("## Test plan formulation\n"));
        assert!(user.contains("## Output template construction\n"));
        assert!(!user.contains("Role customisation"));
    }

    #[test]
    fn role_names() {
        assert_eq!(
            AgentRole::Generation(ComponentKind::Driver).agent_id(),
            "G_driver_agent"
        );
        assert_eq!(
            AgentRole::Generation(ComponentKind::SeqItem).slug(),
            "generation-seq_item"
        );
        assert_eq!(AgentRole::Optimization.slug(), "optimization");
    }
}
