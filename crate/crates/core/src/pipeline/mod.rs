// SPDX-License-Identifier: Apache-2.0

//! Analyze, Draft, Improve and Rectify: turns a specification and its
//! reference code into a self-checking testbench, or gives up with the
//! stage that ran out of attempts.

mod stages;

pub use stages::{missing_scaffold, Pipeline};

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::llm::{ChatBackend, ChatError, FunctionPoint, TestCase, UnfilledPlaceholder};
use crate::sim::{BackendError, SimBackend};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecCodePair {
    pub id: String,
    pub spec: String,
    pub code: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageTemperatures {
    pub analyze: f64,
    pub draft: f64,
    pub improve: f64,
    pub rectify: f64,
}

impl Default for StageTemperatures {
    fn default() -> Self {
        StageTemperatures { analyze: 0.0, draft: 0.0, improve: 0.0, rectify: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub max_draft_attempts: u32,
    /// Counts candidate testbenches measured for coverage, the draft included.
    pub max_improve_attempts: u32,
    pub max_rectify_iterations: u32,
    pub coverage_threshold: f64,
    pub skip_coverage: bool,
    pub temperatures: StageTemperatures,
    pub max_tokens: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            max_draft_attempts: 3,
            max_improve_attempts: 3,
            max_rectify_iterations: 3,
            coverage_threshold: 90.0,
            skip_coverage: false,
            temperatures: StageTemperatures::default(),
            max_tokens: 4096,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.max_draft_attempts == 0 || self.max_improve_attempts == 0 || self.max_rectify_iterations == 0 {
            return Err(PipelineError::Config("attempt bounds must be at least 1".into()));
        }
        if !(self.coverage_threshold > 0.0 && self.coverage_threshold <= 100.0) {
            return Err(PipelineError::Config("coverage threshold must be in (0, 100]".into()));
        }
        if self.max_tokens == 0 {
            return Err(PipelineError::Config("max_tokens must be positive".into()));
        }
        let t = &self.temperatures;
        if [t.analyze, t.draft, t.improve, t.rectify].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(PipelineError::Config("temperatures must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    Analyze,
    Draft,
    Improve,
    Rectify,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Analyze => "Analyze",
            Stage::Draft => "Draft",
            Stage::Improve => "Improve",
            Stage::Rectify => "Rectify",
        }
    }
}

/// Where a pipeline gave up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TermStage {
    Analyze,
    DraftCompile,
    DraftScaffold,
    ImproveCoverage,
    RectifyVerify,
}

impl TermStage {
    pub fn as_str(self) -> &'static str {
        match self {
            TermStage::Analyze => "Analyze",
            TermStage::DraftCompile => "DraftCompile",
            TermStage::DraftScaffold => "DraftScaffold",
            TermStage::ImproveCoverage => "ImproveCoverage",
            TermStage::RectifyVerify => "RectifyVerify",
        }
    }

    pub fn stage(self) -> Stage {
        match self {
            TermStage::Analyze => Stage::Analyze,
            TermStage::DraftCompile | TermStage::DraftScaffold => Stage::Draft,
            TermStage::ImproveCoverage => Stage::Improve,
            TermStage::RectifyVerify => Stage::Rectify,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Pass,
    Fail,
    Max,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Max => "max",
        }
    }
}

/// One feedback check: which stage, what was checked, and how it came out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEntry {
    pub stage: Stage,
    pub action: &'static str,
    pub status: Status,
}

impl fmt::Display for TraceEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.stage.as_str(), self.action, self.status.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Provenance {
    /// Draft testbenches that reached the compiler.
    pub draft_attempts: u32,
    /// Candidate testbenches measured or compiled in Improve, the draft included.
    pub improve_attempts: u32,
    pub rectify_iterations: u32,
    pub llm_calls: u32,
    pub sim_calls: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestbenchRecord {
    pub testbench: String,
    pub testcase_count: u32,
    pub function_points: Vec<FunctionPoint>,
    pub testcases: Vec<TestCase>,
    /// `None` when coverage was skipped.
    pub coverage_percent: Option<f64>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Termination {
    pub stage: TermStage,
    pub attempts: u32,
    pub log: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Finished(TestbenchRecord),
    Terminated(Termination),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    pub outcome: Outcome,
    pub trace: Vec<TraceEntry>,
    pub provenance: Provenance,
}

impl PipelineResult {
    pub fn record(&self) -> Option<&TestbenchRecord> {
        match &self.outcome {
            Outcome::Finished(r) => Some(r),
            Outcome::Terminated(_) => None,
        }
    }

    pub fn termination(&self) -> Option<&Termination> {
        match &self.outcome {
            Outcome::Finished(_) => None,
            Outcome::Terminated(t) => Some(t),
        }
    }
}

/// Failures that are not a verdict on the data row: backends, configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PipelineError {
    Chat(ChatError),
    Sim(BackendError),
    Config(String),
    Template(UnfilledPlaceholder),
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineError::Chat(e) => write!(f, "{e}"),
            PipelineError::Sim(e) => write!(f, "{e}"),
            PipelineError::Config(e) => write!(f, "configuration error: {e}"),
            PipelineError::Template(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for PipelineError {}

impl From<ChatError> for PipelineError {
    fn from(e: ChatError) -> Self {
        PipelineError::Chat(e)
    }
}

impl From<BackendError> for PipelineError {
    fn from(e: BackendError) -> Self {
        PipelineError::Sim(e)
    }
}

impl From<UnfilledPlaceholder> for PipelineError {
    fn from(e: UnfilledPlaceholder) -> Self {
        PipelineError::Template(e)
    }
}

/// Runs all four stages on one pair.
pub fn run_pipeline<C: ChatBackend, S: SimBackend>(
    pair: &SpecCodePair,
    cfg: &PipelineConfig,
    chat: C,
    sim: S,
) -> Result<PipelineResult, PipelineError> {
    if pair.spec.trim().is_empty() || pair.code.trim().is_empty() {
        return Err(PipelineError::Config(alloc::format!("row {}: empty spec or code", pair.id)));
    }
    Pipeline::new(cfg, chat, sim)?.run(&pair.spec, &pair.code)
}
