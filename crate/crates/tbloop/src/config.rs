// SPDX-License-Identifier: Apache-2.0

//! TOML configuration. Unknown keys are rejected; the API key is never read
//! from the file, only from the environment variable it names.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;
use tbloop_core::pipeline::{PipelineConfig, StageTemperatures};
use tbloop_core::preference::SamplingParams;

use crate::error::CliError;

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub simulator: SimulatorConfig,
    pub llm: LlmConfig,
    pub pipeline: PipelineSection,
    pub sampling: SamplingSection,
    /// Scripted replies used by any backend whose provider is `mock`.
    pub mock_script: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SimProvider {
    #[default]
    Process,
    Mock,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SimulatorConfig {
    pub provider: SimProvider,
    /// Placeholders: `{dut}`, `{tb}`, `{out}`.
    pub compile_command: String,
    /// Placeholder: `{out}`.
    pub run_command: String,
    /// Must print a line-coverage report on stdout.
    pub coverage_command: Option<String>,
    pub timeout_secs: f64,
    pub workdir_root: Option<PathBuf>,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        SimulatorConfig {
            provider: SimProvider::Process,
            compile_command: "iverilog -g2012 -o {out} {tb} {dut}".into(),
            run_command: "vvp -n {out}".into(),
            coverage_command: None,
            timeout_secs: 30.0,
            workdir_root: None,
        }
    }
}

impl SimulatorConfig {
    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum LlmProvider {
    #[default]
    Http,
    Mock,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct LlmConfig {
    pub provider: LlmProvider,
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub retries: u32,
    pub backoff_ms: u64,
    pub request_timeout_secs: u64,
    pub temperatures: TemperatureSection,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            provider: LlmProvider::Http,
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model: "default".into(),
            api_key_env: "TBLOOP_API_KEY".into(),
            retries: 3,
            backoff_ms: 1000,
            request_timeout_secs: 300,
            temperatures: TemperatureSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TemperatureSection {
    pub analyze: f64,
    pub draft: f64,
    pub improve: f64,
    pub rectify: f64,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineSection {
    pub max_draft_attempts: u32,
    pub max_improve_attempts: u32,
    pub max_rectify_iterations: u32,
    pub coverage_threshold: f64,
    pub skip_coverage: bool,
    pub max_tokens: u32,
}

impl Default for PipelineSection {
    fn default() -> Self {
        let d = PipelineConfig::default();
        PipelineSection {
            max_draft_attempts: d.max_draft_attempts,
            max_improve_attempts: d.max_improve_attempts,
            max_rectify_iterations: d.max_rectify_iterations,
            coverage_threshold: d.coverage_threshold,
            skip_coverage: d.skip_coverage,
            max_tokens: d.max_tokens,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingSection {
    pub n: u32,
    pub temperature: f64,
    pub top_p: Option<f64>,
    pub top_k: Option<u32>,
    pub max_tokens: u32,
}

impl Default for SamplingSection {
    fn default() -> Self {
        let d = SamplingParams::default();
        SamplingSection { n: d.n, temperature: d.temperature, top_p: d.top_p, top_k: d.top_k, max_tokens: d.max_tokens }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        // Relative script paths are resolved against the config file.
        if let (Some(script), Some(dir)) = (&cfg.mock_script, path.parent()) {
            if script.is_relative() {
                cfg.mock_script = Some(dir.join(script));
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Config = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.into()));
        let s = &self.simulator;
        if !(s.timeout_secs.is_finite() && s.timeout_secs > 0.0) {
            return bad("simulator.timeout_secs must be positive");
        }
        for (name, tpl, required) in [
            ("compile_command", Some(&s.compile_command), &["{dut}", "{tb}", "{out}"][..]),
            ("run_command", Some(&s.run_command), &["{out}"][..]),
            ("coverage_command", s.coverage_command.as_ref(), &[][..]),
        ] {
            if let Some(tpl) = tpl {
                if tpl.trim().is_empty() {
                    return bad(&format!("simulator.{name} is empty"));
                }
                if let Some(p) = required.iter().find(|p| !tpl.contains(**p)) {
                    return bad(&format!("simulator.{name} lacks placeholder {p}"));
                }
            }
        }
        if self.llm.api_key_env.trim().is_empty() {
            return bad("llm.api_key_env must name an environment variable");
        }
        let uses_mock = self.llm.provider == LlmProvider::Mock || s.provider == SimProvider::Mock;
        if uses_mock && self.mock_script.is_none() {
            return bad("a mock provider needs mock_script");
        }
        self.pipeline_config().validate().map_err(|e| CliError::Config(e.to_string()))?;
        let sp = &self.sampling;
        if sp.n == 0 || sp.max_tokens == 0 || !(sp.temperature.is_finite() && sp.temperature >= 0.0) {
            return bad("sampling.n and sampling.max_tokens must be positive, temperature non-negative");
        }
        if sp.top_p.is_some_and(|p| !(p > 0.0 && p <= 1.0)) || sp.top_k == Some(0) {
            return bad("sampling.top_p must be in (0, 1] and top_k positive");
        }
        Ok(())
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        let p = &self.pipeline;
        let t = &self.llm.temperatures;
        PipelineConfig {
            max_draft_attempts: p.max_draft_attempts,
            max_improve_attempts: p.max_improve_attempts,
            max_rectify_iterations: p.max_rectify_iterations,
            coverage_threshold: p.coverage_threshold,
            skip_coverage: p.skip_coverage,
            temperatures: StageTemperatures {
                analyze: t.analyze,
                draft: t.draft,
                improve: t.improve,
                rectify: t.rectify,
            },
            max_tokens: p.max_tokens,
        }
    }

    pub fn sampling_params(&self) -> SamplingParams {
        let s = &self.sampling;
        SamplingParams { n: s.n, temperature: s.temperature, top_p: s.top_p, top_k: s.top_k, max_tokens: s.max_tokens }
    }
}
