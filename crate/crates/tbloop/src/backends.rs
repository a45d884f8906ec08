// SPDX-License-Identifier: Apache-2.0

//! Backend construction per row: live (HTTP + processes) or scripted from a
//! JSON file keyed by row id, optionally recording what the live backends said.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use tbloop_core::llm::{ChatBackend, ChatError, ChatRequest, ScriptedChat};
use tbloop_core::sim::{render_coverage, BackendError, CompileOutcome, MockSim, MockStep, RunOutput, SimBackend};

use crate::config::{Config, LlmProvider, SimProvider};
use crate::error::CliError;
use crate::http::{with_retries, HttpChatClient};
use crate::process::ProcessSimulator;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RowScript {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub llm: Vec<LlmStep>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sim: Vec<SimStep>,
    /// Overrides the default (available iff a coverage step exists).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage_available: Option<bool>,
}

pub type ScriptFile = BTreeMap<String, RowScript>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LlmStep {
    Reply(String),
    TransportError(String),
    RateLimited(Option<u64>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SimStep {
    Compile(CompileStep),
    Run(RunStep),
    /// Shorthand for a run printing a rendered report.
    Report {
        total: u32,
        failures: u32,
    },
    Coverage(CoverageStep),
    ToolMissing(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CompileStep {
    Ok { ok: bool },
    Error { error: String },
}

fn exit_zero() -> Option<i32> {
    Some(0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RunStep {
    Timeout {
        timeout: String,
    },
    CompileFailed {
        compile_failed: String,
    },
    Exited {
        stdout: String,
        #[serde(default, skip_serializing_if = "String::is_empty")]
        stderr: String,
        #[serde(default = "exit_zero")]
        code: Option<i32>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoverageStep {
    Counts { total: u32, covered: u32 },
    Text { text: String },
}

impl From<LlmStep> for Result<String, ChatError> {
    fn from(s: LlmStep) -> Self {
        match s {
            LlmStep::Reply(t) => Ok(t),
            LlmStep::TransportError(e) => Err(ChatError::Transport(e)),
            LlmStep::RateLimited(retry_after_secs) => Err(ChatError::RateLimited { retry_after_secs }),
        }
    }
}

impl From<SimStep> for MockStep {
    fn from(s: SimStep) -> Self {
        match s {
            SimStep::Compile(CompileStep::Ok { ok: true }) => MockStep::compile_ok(),
            SimStep::Compile(CompileStep::Ok { ok: false }) => MockStep::compile_error(""),
            SimStep::Compile(CompileStep::Error { error }) => MockStep::compile_error(error),
            SimStep::Run(RunStep::Timeout { timeout }) => MockStep::Run(RunOutput::TimedOut { stdout: timeout }),
            SimStep::Run(RunStep::CompileFailed { compile_failed }) => {
                MockStep::Run(RunOutput::CompileFailed(compile_failed))
            }
            SimStep::Run(RunStep::Exited { stdout, stderr, code }) => {
                MockStep::Run(RunOutput::Exited { code, stdout, stderr })
            }
            SimStep::Report { total, failures } => MockStep::report(total, failures),
            SimStep::Coverage(CoverageStep::Counts { total, covered }) => {
                MockStep::Coverage(render_coverage("dut", &[], total, covered))
            }
            SimStep::Coverage(CoverageStep::Text { text }) => MockStep::Coverage(text),
            SimStep::ToolMissing(t) => MockStep::Error(BackendError::ToolMissing(t)),
        }
    }
}

pub fn load_script(path: &Path) -> Result<ScriptFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn save_script(path: &Path, script: &ScriptFile) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(script).expect("script serializes");
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

/// Simulator used when a row has no scripted steps.
struct ExhaustedSim;

impl SimBackend for ExhaustedSim {
    fn compile(&mut self, _: &str, _: &str) -> Result<CompileOutcome, BackendError> {
        Err(BackendError::ScriptExhausted)
    }
    fn run(&mut self, _: &str, _: &str) -> Result<RunOutput, BackendError> {
        Err(BackendError::ScriptExhausted)
    }
    fn coverage(&mut self, _: &str, _: &str) -> Result<String, BackendError> {
        Err(BackendError::ScriptExhausted)
    }
    fn has_coverage(&self) -> bool {
        false
    }
}

type Recording = Arc<Mutex<ScriptFile>>;

struct RecordingChat<B> {
    inner: B,
    id: String,
    log: Recording,
}

impl<B: ChatBackend> ChatBackend for RecordingChat<B> {
    fn complete(&mut self, req: &ChatRequest) -> Result<String, ChatError> {
        let r = self.inner.complete(req);
        let step = match &r {
            Ok(t) => Some(LlmStep::Reply(t.clone())),
            Err(ChatError::Transport(e)) => Some(LlmStep::TransportError(e.clone())),
            Err(ChatError::RateLimited { retry_after_secs }) => Some(LlmStep::RateLimited(*retry_after_secs)),
            Err(_) => None,
        };
        if let Some(step) = step {
            self.log.lock().expect("recording lock").entry(self.id.clone()).or_default().llm.push(step);
        }
        r
    }
}

struct RecordingSim<S> {
    inner: S,
    id: String,
    log: Recording,
}

impl<S> RecordingSim<S> {
    fn push(&self, step: SimStep) {
        self.log.lock().expect("recording lock").entry(self.id.clone()).or_default().sim.push(step);
    }
}

impl<S: SimBackend> SimBackend for RecordingSim<S> {
    fn compile(&mut self, dut: &str, tb: &str) -> Result<CompileOutcome, BackendError> {
        let r = self.inner.compile(dut, tb)?;
        self.push(SimStep::Compile(match &r {
            CompileOutcome::Ok => CompileStep::Ok { ok: true },
            CompileOutcome::Failed(log) => CompileStep::Error { error: log.clone() },
        }));
        Ok(r)
    }

    fn run(&mut self, dut: &str, tb: &str) -> Result<RunOutput, BackendError> {
        let r = self.inner.run(dut, tb)?;
        self.push(SimStep::Run(match &r {
            RunOutput::CompileFailed(log) => RunStep::CompileFailed { compile_failed: log.clone() },
            RunOutput::TimedOut { stdout } => RunStep::Timeout { timeout: stdout.clone() },
            RunOutput::Exited { code, stdout, stderr } => {
                RunStep::Exited { stdout: stdout.clone(), stderr: stderr.clone(), code: *code }
            }
        }));
        Ok(r)
    }

    fn coverage(&mut self, dut: &str, tb: &str) -> Result<String, BackendError> {
        let r = self.inner.coverage(dut, tb)?;
        self.push(SimStep::Coverage(CoverageStep::Text { text: r.clone() }));
        Ok(r)
    }

    fn has_coverage(&self) -> bool {
        self.inner.has_coverage()
    }
}

pub type DynChat = Box<dyn ChatBackend + Send>;
pub type DynSim = Box<dyn SimBackend + Send>;

/// Hands out one chat and one simulator backend per row.
pub struct Backends {
    cfg: Config,
    script: Option<ScriptFile>,
    http: Option<HttpChatClient>,
    recording: Option<Recording>,
}

impl Backends {
    pub fn new(cfg: &Config, record: bool) -> Result<Self, CliError> {
        let script = match &cfg.mock_script {
            Some(p) if cfg.llm.provider == LlmProvider::Mock || cfg.simulator.provider == SimProvider::Mock => {
                Some(load_script(p)?)
            }
            _ => None,
        };
        let http = match cfg.llm.provider {
            LlmProvider::Http => {
                Some(HttpChatClient::from_config(&cfg.llm).map_err(|e| CliError::Backend(e.to_string()))?)
            }
            LlmProvider::Mock => None,
        };
        let recording = record.then(|| Arc::new(Mutex::new(ScriptFile::new())));
        Ok(Backends { cfg: cfg.clone(), script, http, recording })
    }

    /// Fails with a backend-unavailable error when a configured tool is missing.
    pub fn check_simulator(&self) -> Result<(), CliError> {
        if self.cfg.simulator.provider == SimProvider::Process {
            if let Some(tool) = ProcessSimulator::new(self.cfg.simulator.clone()).missing_tool() {
                return Err(CliError::Backend(format!("simulator tool `{tool}` not found on PATH")));
            }
        }
        Ok(())
    }

    fn row(&self, id: &str) -> RowScript {
        self.script.as_ref().and_then(|s| s.get(id)).cloned().unwrap_or_default()
    }

    pub fn chat(&self, id: &str) -> DynChat {
        let base: DynChat = match &self.http {
            Some(client) => Box::new(with_retries(
                client.clone(),
                self.cfg.llm.retries,
                Duration::from_millis(self.cfg.llm.backoff_ms),
            )),
            None => Box::new(ScriptedChat::new(self.row(id).llm.into_iter().map(Into::into))),
        };
        match &self.recording {
            Some(log) => Box::new(RecordingChat { inner: base, id: id.into(), log: log.clone() }),
            None => base,
        }
    }

    pub fn sim(&self, id: &str) -> DynSim {
        let base: DynSim = match self.cfg.simulator.provider {
            SimProvider::Process => Box::new(ProcessSimulator::new(self.cfg.simulator.clone())),
            SimProvider::Mock => {
                let row = self.row(id);
                let steps: Vec<MockStep> = row.sim.into_iter().map(Into::into).collect();
                match MockSim::new(steps) {
                    Some(m) => match row.coverage_available {
                        Some(c) => Box::new(m.with_coverage(c)),
                        None => Box::new(m),
                    },
                    None => Box::new(ExhaustedSim),
                }
            }
        };
        match &self.recording {
            Some(log) => Box::new(RecordingSim { inner: base, id: id.into(), log: log.clone() }),
            None => base,
        }
    }

    /// Writes everything recorded so far as a replayable script.
    pub fn save_recording(&self, path: &Path) -> Result<(), CliError> {
        match &self.recording {
            Some(log) => save_script(path, &log.lock().expect("recording lock")),
            None => Ok(()),
        }
    }
}
