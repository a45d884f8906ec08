// SPDX-License-Identifier: Apache-2.0

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec::Vec;

use super::log::{render_sim_log, synthetic_report};
use super::{BackendError, CompileOutcome, RunOutput, SimBackend};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MockStep {
    Compile(CompileOutcome),
    Run(RunOutput),
    Coverage(String),
    /// Fails the next call of any kind.
    Error(BackendError),
}

impl MockStep {
    pub fn compile_ok() -> Self {
        MockStep::Compile(CompileOutcome::Ok)
    }

    pub fn compile_error(log: impl Into<String>) -> Self {
        MockStep::Compile(CompileOutcome::Failed(log.into()))
    }

    /// A run whose stdout is a rendered report with `total` cases and `failures` mismatches.
    pub fn report(total: u32, failures: u32) -> Self {
        MockStep::stdout(render_sim_log(&synthetic_report(total, failures)))
    }

    pub fn stdout(text: impl Into<String>) -> Self {
        MockStep::Run(RunOutput::Exited { code: Some(0), stdout: text.into(), stderr: String::new() })
    }

    fn name(&self) -> &'static str {
        match self {
            MockStep::Compile(_) => "compile",
            MockStep::Run(_) => "run",
            MockStep::Coverage(_) => "coverage",
            MockStep::Error(_) => "error",
        }
    }
}

/// Scripted simulator: each call consumes the next step, which must be of the matching kind.
#[derive(Debug, Clone)]
pub struct MockSim {
    steps: VecDeque<MockStep>,
    coverage: bool,
    calls: usize,
}

impl MockSim {
    /// Returns `None` for an empty script.
    pub fn new(script: Vec<MockStep>) -> Option<Self> {
        if script.is_empty() {
            return None;
        }
        let coverage = script.iter().any(|s| matches!(s, MockStep::Coverage(_)));
        Some(MockSim { steps: script.into(), coverage, calls: 0 })
    }

    /// Forces the coverage capability flag.
    pub fn with_coverage(mut self, available: bool) -> Self {
        self.coverage = available;
        self
    }

    pub fn calls(&self) -> usize {
        self.calls
    }

    pub fn remaining(&self) -> usize {
        self.steps.len()
    }

    fn next(&mut self, wanted: &'static str) -> Result<MockStep, BackendError> {
        self.calls += 1;
        let step = self.steps.pop_front().ok_or(BackendError::ScriptExhausted)?;
        match step {
            MockStep::Error(e) => Err(e),
            s if s.name() == wanted => Ok(s),
            s => Err(BackendError::ScriptMismatch { wanted, found: s.name() }),
        }
    }
}

impl SimBackend for MockSim {
    fn compile(&mut self, _dut: &str, _tb: &str) -> Result<CompileOutcome, BackendError> {
        match self.next("compile")? {
            MockStep::Compile(c) => Ok(c),
            _ => unreachable!(),
        }
    }

    fn run(&mut self, _dut: &str, _tb: &str) -> Result<RunOutput, BackendError> {
        match self.next("run")? {
            MockStep::Run(r) => Ok(r),
            _ => unreachable!(),
        }
    }

    fn coverage(&mut self, _dut: &str, _tb: &str) -> Result<String, BackendError> {
        match self.next("coverage")? {
            MockStep::Coverage(c) => Ok(c),
            _ => unreachable!(),
        }
    }

    fn has_coverage(&self) -> bool {
        self.coverage
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn empty_script_rejected() {
        assert!(MockSim::new(vec![]).is_none());
    }

    #[test]
    fn steps_in_order_then_exhausted() {
        let mut m =
            MockSim::new(vec![MockStep::compile_error("e1"), MockStep::compile_error("e2"), MockStep::compile_ok()])
                .unwrap();
        assert_eq!(m.compile("", "").unwrap(), CompileOutcome::Failed("e1".into()));
        assert_eq!(m.compile("", "").unwrap(), CompileOutcome::Failed("e2".into()));
        assert_eq!(m.compile("", "").unwrap(), CompileOutcome::Ok);
        assert_eq!(m.compile("", ""), Err(BackendError::ScriptExhausted));
    }

    #[test]
    fn kind_mismatch() {
        let mut m = MockSim::new(vec![MockStep::compile_ok()]).unwrap();
        assert_eq!(m.run("", ""), Err(BackendError::ScriptMismatch { wanted: "run", found: "compile" }));
    }
}
