// SPDX-License-Identifier: Apache-2.0

//! Simulator abstraction and parsing of its textual outputs.

mod coverage;
mod log;
mod mock;

pub use coverage::{parse_coverage, render_coverage, CoverageItem, CoverageReport};
pub use log::{
    parse_sim_log, render_sim_log, synthetic_report, CaseLine, SimReport, CASES_BANNER, END_BANNER, PASS_MARKER,
};
pub use mock::{MockSim, MockStep};

use alloc::string::String;
use core::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CompileOutcome {
    Ok,
    /// Combined tool output.
    Failed(String),
}

impl CompileOutcome {
    pub fn is_ok(&self) -> bool {
        matches!(self, CompileOutcome::Ok)
    }
}

/// Raw result of compiling and running a DUT/testbench pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunOutput {
    CompileFailed(String),
    /// `code` is `None` when the process died from a signal.
    Exited {
        code: Option<i32>,
        stdout: String,
        stderr: String,
    },
    TimedOut {
        stdout: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AbortReason {
    Timeout,
    Crash,
}

impl AbortReason {
    pub fn as_str(self) -> &'static str {
        match self {
            AbortReason::Timeout => "timeout",
            AbortReason::Crash => "crash",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimOutcome {
    CompileError { log: String },
    RuntimeAbort { reason: AbortReason, log: String },
    Report(SimReport),
}

impl SimOutcome {
    /// Short status tag: `compile_error`, `timeout`, `crash`, `pass` or `fail`.
    pub fn status(&self) -> &'static str {
        match self {
            SimOutcome::CompileError { .. } => "compile_error",
            SimOutcome::RuntimeAbort { reason, .. } => reason.as_str(),
            SimOutcome::Report(r) if r.failures == 0 => "pass",
            SimOutcome::Report(_) => "fail",
        }
    }

    /// Text suitable as LLM feedback.
    pub fn log_text(&self) -> String {
        match self {
            SimOutcome::CompileError { log } => log.clone(),
            SimOutcome::RuntimeAbort { reason, log } => {
                let mut s = String::from("simulation aborted: ");
                s.push_str(reason.as_str());
                if !log.is_empty() {
                    s.push('\n');
                    s.push_str(log);
                }
                s
            }
            SimOutcome::Report(r) => render_sim_log(r),
        }
    }
}

/// Turns raw process output into an outcome.
///
/// A run that exits without a parseable report counts as a crash whatever
/// its exit status.
pub fn classify(output: RunOutput) -> SimOutcome {
    match output {
        RunOutput::CompileFailed(log) => SimOutcome::CompileError { log },
        RunOutput::TimedOut { stdout } => SimOutcome::RuntimeAbort { reason: AbortReason::Timeout, log: stdout },
        RunOutput::Exited { code, stdout, stderr } => match parse_sim_log(&stdout) {
            Ok(report) => SimOutcome::Report(report),
            Err(_) => {
                let mut log = stdout;
                if !stderr.is_empty() {
                    if !log.is_empty() && !log.ends_with('\n') {
                        log.push('\n');
                    }
                    log.push_str(&stderr);
                }
                if let Some(c) = code.filter(|c| *c != 0) {
                    log.push_str(&alloc::format!("\nexit status {c}"));
                }
                SimOutcome::RuntimeAbort { reason: AbortReason::Crash, log }
            }
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendError {
    /// The configured tool could not be executed.
    ToolMissing(String),
    /// No coverage command configured.
    NoCoverage,
    Io(String),
    ScriptExhausted,
    ScriptMismatch {
        wanted: &'static str,
        found: &'static str,
    },
}

impl fmt::Display for BackendError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendError::ToolMissing(t) => write!(f, "simulator tool not executable: {t}"),
            BackendError::NoCoverage => f.write_str("no coverage command configured"),
            BackendError::Io(e) => write!(f, "simulator io error: {e}"),
            BackendError::ScriptExhausted => f.write_str("simulator script exhausted"),
            BackendError::ScriptMismatch { wanted, found } => {
                write!(f, "simulator script mismatch: called {wanted}, next step is {found}")
            }
        }
    }
}

impl core::error::Error for BackendError {}

/// A compile/run/coverage provider. Each call works on a private copy of the sources.
pub trait SimBackend {
    fn compile(&mut self, dut: &str, tb: &str) -> Result<CompileOutcome, BackendError>;

    /// Compiles then runs the pair under the configured deadline.
    fn run(&mut self, dut: &str, tb: &str) -> Result<RunOutput, BackendError>;

    /// Returns the textual line-coverage report for the DUT.
    fn coverage(&mut self, dut: &str, tb: &str) -> Result<String, BackendError>;

    fn has_coverage(&self) -> bool;

    fn simulate(&mut self, dut: &str, tb: &str) -> Result<SimOutcome, BackendError> {
        self.run(dut, tb).map(classify)
    }
}

impl<B: SimBackend + ?Sized> SimBackend for &mut B {
    fn compile(&mut self, dut: &str, tb: &str) -> Result<CompileOutcome, BackendError> {
        (**self).compile(dut, tb)
    }
    fn run(&mut self, dut: &str, tb: &str) -> Result<RunOutput, BackendError> {
        (**self).run(dut, tb)
    }
    fn coverage(&mut self, dut: &str, tb: &str) -> Result<String, BackendError> {
        (**self).coverage(dut, tb)
    }
    fn has_coverage(&self) -> bool {
        (**self).has_coverage()
    }
}

impl<B: SimBackend + ?Sized> SimBackend for alloc::boxed::Box<B> {
    fn compile(&mut self, dut: &str, tb: &str) -> Result<CompileOutcome, BackendError> {
        (**self).compile(dut, tb)
    }
    fn run(&mut self, dut: &str, tb: &str) -> Result<RunOutput, BackendError> {
        (**self).run(dut, tb)
    }
    fn coverage(&mut self, dut: &str, tb: &str) -> Result<String, BackendError> {
        (**self).coverage(dut, tb)
    }
    fn has_coverage(&self) -> bool {
        (**self).has_coverage()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimParseError {
    /// Neither a pass marker nor a failure count was found.
    UnparseableLog,
    UnparseableReport(&'static str),
}

impl fmt::Display for SimParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimParseError::UnparseableLog => f.write_str("simulation log has no pass or failure marker"),
            SimParseError::UnparseableReport(why) => {
                write!(f, "unparseable coverage report: {why}")
            }
        }
    }
}

impl core::error::Error for SimParseError {}
