// SPDX-License-Identifier: Apache-2.0

//! Simulator backend that shells out to configured command templates.
//!
//! Every call gets a fresh temporary directory holding `dut.v` and `tb.v`;
//! templates refer to them through `{dut}`, `{tb}` and `{out}`.

use std::io::Read;
use std::os::unix::process::CommandExt;
use std::path::Path;
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use tbloop_core::sim::{BackendError, CompileOutcome, RunOutput, SimBackend};
use tempfile::TempDir;

use crate::config::SimulatorConfig;

const DUT_FILE: &str = "dut.v";
const TB_FILE: &str = "tb.v";
const OUT_FILE: &str = "sim.out";
const POLL: Duration = Duration::from_millis(5);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exec {
    /// `None` when killed by a signal or by the timeout.
    pub code: Option<i32>,
    pub stdout: String,
    pub stderr: String,
    pub timed_out: bool,
}

impl Exec {
    fn success(&self) -> bool {
        self.code == Some(0) && !self.timed_out
    }

    fn combined(&self) -> String {
        let mut s = self.stdout.clone();
        if !s.is_empty() && !self.stderr.is_empty() && !s.ends_with('\n') {
            s.push('\n');
        }
        s.push_str(&self.stderr);
        s
    }
}

/// Runs `cmd` through `sh -c` in `dir`, killing its whole process group at the deadline.
pub fn exec_with_timeout(cmd: &str, dir: &Path, timeout: Duration) -> Result<Exec, BackendError> {
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(cmd)
        .current_dir(dir)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0)
        .spawn()
        .map_err(|e| BackendError::Io(format!("spawn sh: {e}")))?;
    let pid = child.id() as libc::pid_t;
    let drain = |mut r: Box<dyn Read + Send>| {
        thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = r.read_to_end(&mut buf);
            String::from_utf8_lossy(&buf).into_owned()
        })
    };
    let out = drain(Box::new(child.stdout.take().expect("piped")));
    let err = drain(Box::new(child.stderr.take().expect("piped")));

    let deadline = Instant::now() + timeout;
    let mut timed_out = false;
    let status = loop {
        match child.try_wait().map_err(|e| BackendError::Io(e.to_string()))? {
            Some(s) => break s,
            None if Instant::now() >= deadline => {
                // SAFETY: signalling a process group we created; no memory is touched.
                unsafe {
                    libc::kill(-pid, libc::SIGKILL);
                }
                timed_out = true;
                break child.wait().map_err(|e| BackendError::Io(e.to_string()))?;
            }
            None => thread::sleep(POLL),
        }
    };
    // Grandchildren may keep the pipes open briefly after the group kill.
    let stdout = out.join().unwrap_or_default();
    let stderr = err.join().unwrap_or_default();
    let code = if timed_out { None } else { status.code() };
    if code == Some(127) {
        let tool = cmd.split_whitespace().next().unwrap_or(cmd).to_string();
        return Err(BackendError::ToolMissing(tool));
    }
    Ok(Exec { code, stdout, stderr, timed_out })
}

fn render(template: &str) -> String {
    template.replace("{dut}", DUT_FILE).replace("{tb}", TB_FILE).replace("{out}", OUT_FILE)
}

#[derive(Debug, Clone)]
pub struct ProcessSimulator {
    cfg: SimulatorConfig,
}

impl ProcessSimulator {
    pub fn new(cfg: SimulatorConfig) -> Self {
        ProcessSimulator { cfg }
    }

    /// First program named by each configured template that is not on `PATH`.
    pub fn missing_tool(&self) -> Option<String> {
        let templates =
            [Some(&self.cfg.compile_command), Some(&self.cfg.run_command), self.cfg.coverage_command.as_ref()];
        templates.into_iter().flatten().filter_map(|t| t.split_whitespace().next()).find_map(|tool| {
            let found = Command::new("sh")
                .arg("-c")
                .arg(format!("command -v '{}' >/dev/null 2>&1", tool.replace('\'', "")))
                .status()
                .is_ok_and(|s| s.success());
            (!found).then(|| tool.to_string())
        })
    }

    fn workdir(&self, dut: &str, tb: &str) -> Result<TempDir, BackendError> {
        let builder =
            tempfile::Builder::new().prefix("tbloop-").tempdir_in_or_default(self.cfg.workdir_root.as_deref());
        let dir = builder.map_err(|e| BackendError::Io(format!("workdir: {e}")))?;
        for (name, text) in [(DUT_FILE, dut), (TB_FILE, tb)] {
            std::fs::write(dir.path().join(name), text).map_err(|e| BackendError::Io(format!("{name}: {e}")))?;
        }
        Ok(dir)
    }

    fn exec(&self, template: &str, dir: &Path) -> Result<Exec, BackendError> {
        exec_with_timeout(&render(template), dir, self.cfg.timeout())
    }

    fn compile_in(&self, dir: &Path) -> Result<CompileOutcome, BackendError> {
        let e = self.exec(&self.cfg.compile_command, dir)?;
        Ok(if e.success() {
            CompileOutcome::Ok
        } else if e.timed_out {
            CompileOutcome::Failed("compilation timed out".into())
        } else {
            CompileOutcome::Failed(e.combined())
        })
    }
}

trait TempdirIn {
    fn tempdir_in_or_default(&self, root: Option<&Path>) -> std::io::Result<TempDir>;
}

impl TempdirIn for tempfile::Builder<'_, '_> {
    fn tempdir_in_or_default(&self, root: Option<&Path>) -> std::io::Result<TempDir> {
        match root {
            Some(r) => self.tempdir_in(r),
            None => self.tempdir(),
        }
    }
}

impl SimBackend for ProcessSimulator {
    fn compile(&mut self, dut: &str, tb: &str) -> Result<CompileOutcome, BackendError> {
        let dir = self.workdir(dut, tb)?;
        self.compile_in(dir.path())
    }

    fn run(&mut self, dut: &str, tb: &str) -> Result<RunOutput, BackendError> {
        let dir = self.workdir(dut, tb)?;
        if let CompileOutcome::Failed(log) = self.compile_in(dir.path())? {
            return Ok(RunOutput::CompileFailed(log));
        }
        let e = self.exec(&self.cfg.run_command, dir.path())?;
        Ok(if e.timed_out {
            RunOutput::TimedOut { stdout: e.stdout }
        } else {
            RunOutput::Exited { code: e.code, stdout: e.stdout, stderr: e.stderr }
        })
    }

    fn coverage(&mut self, dut: &str, tb: &str) -> Result<String, BackendError> {
        let Some(cmd) = self.cfg.coverage_command.clone() else {
            return Err(BackendError::NoCoverage);
        };
        let dir = self.workdir(dut, tb)?;
        if let CompileOutcome::Failed(log) = self.compile_in(dir.path())? {
            return Err(BackendError::Io(format!("coverage build failed: {log}")));
        }
        let e = self.exec(&cmd, dir.path())?;
        if !e.success() {
            return Err(BackendError::Io(format!("coverage command failed: {}", e.combined())));
        }
        Ok(e.stdout)
    }

    fn has_coverage(&self) -> bool {
        self.cfg.coverage_command.is_some()
    }
}
