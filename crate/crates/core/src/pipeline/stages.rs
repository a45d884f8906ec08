// SPDX-License-Identifier: Apache-2.0

use alloc::string::String;
use alloc::vec::Vec;

use super::{
    Outcome, PipelineConfig, PipelineError, PipelineResult, Provenance, Stage, Status, TermStage, Termination,
    TestbenchRecord, TraceEntry,
};
use crate::llm::prompts::format_threshold;
use crate::llm::{
    extract_code_block, parse_json_points, render, ChatBackend, ChatRequest, FunctionPoint, Message, PointRecord,
    PromptName, TestCase,
};
use crate::sim::{
    classify, parse_coverage, CompileOutcome, RunOutput, SimBackend, SimOutcome, CASES_BANNER, PASS_MARKER,
};

type StageResult<T> = Result<Result<T, Termination>, PipelineError>;

fn stop<T>(stage: TermStage, attempts: u32, log: impl Into<String>) -> StageResult<T> {
    Ok(Err(Termination { stage, attempts, log: log.into() }))
}

fn has_case_line(tb: &str, word: &str) -> bool {
    tb.match_indices("Test Case ").any(|(i, m)| {
        let rest = &tb[i + m.len()..];
        let digits = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
        digits > 0 && rest[digits..].strip_prefix('.').is_some_and(|r| r.trim_start().starts_with(word))
    })
}

/// Parts of the required display scaffolding absent from `tb`.
pub fn missing_scaffold(tb: &str) -> Vec<&'static str> {
    let mut missing = Vec::new();
    if !tb.contains(CASES_BANNER) {
        missing.push("the TestCases banner");
    }
    if !has_case_line(tb, "Expected") {
        missing.push("Expected lines");
    }
    if !has_case_line(tb, "Actual") {
        missing.push("Actual lines");
    }
    if !tb.contains("$finish") {
        missing.push("$finish");
    }
    missing
}

/// One pipeline instance over a chat backend and a simulator backend.
pub struct Pipeline<'a, C, S> {
    cfg: &'a PipelineConfig,
    chat: C,
    sim: S,
    trace: Vec<TraceEntry>,
    prov: Provenance,
}

impl<'a, C: ChatBackend, S: SimBackend> Pipeline<'a, C, S> {
    pub fn new(cfg: &'a PipelineConfig, chat: C, sim: S) -> Result<Self, PipelineError> {
        cfg.validate()?;
        Ok(Pipeline { cfg, chat, sim, trace: Vec::new(), prov: Provenance::default() })
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    pub fn provenance(&self) -> Provenance {
        self.prov
    }

    fn note(&mut self, stage: Stage, action: &'static str, status: Status) {
        self.trace.push(TraceEntry { stage, action, status });
    }

    fn ask(&mut self, messages: &[Message], temperature: f64) -> Result<String, PipelineError> {
        let req = ChatRequest::new(messages.to_vec(), temperature, self.cfg.max_tokens);
        self.prov.llm_calls += 1;
        Ok(self.chat.complete(&req)?)
    }

    fn compile(&mut self, code: &str, tb: &str) -> Result<CompileOutcome, PipelineError> {
        self.prov.sim_calls += 1;
        Ok(self.sim.compile(code, tb)?)
    }

    fn run_sim(&mut self, code: &str, tb: &str) -> Result<RunOutput, PipelineError> {
        self.prov.sim_calls += 1;
        Ok(self.sim.run(code, tb)?)
    }

    fn ask_points<R: PointRecord>(
        &mut self,
        conv: &mut Vec<Message>,
        action: &'static str,
    ) -> Result<Result<Vec<R>, String>, PipelineError> {
        let t = self.cfg.temperatures.analyze;
        let reply = self.ask(conv, t)?;
        conv.push(Message::assistant(reply.clone()));
        if let Ok(points) = parse_json_points::<R>(&reply) {
            return Ok(Ok(points));
        }
        self.note(Stage::Analyze, action, Status::Fail);
        conv.push(Message::user(render(PromptName::JsonRetry, &[])?));
        let reply = self.ask(conv, t)?;
        conv.push(Message::assistant(reply.clone()));
        match parse_json_points::<R>(&reply) {
            Ok(points) => Ok(Ok(points)),
            Err(e) => {
                self.note(Stage::Analyze, action, Status::Max);
                Ok(Err(alloc::format!("{e}")))
            }
        }
    }

    /// Function points then test cases, in one conversation that sees only the
    /// specification. Returns the conversation so Draft can continue it.
    #[allow(clippy::type_complexity)]
    pub fn analyze(&mut self, spec: &str) -> StageResult<(Vec<FunctionPoint>, Vec<TestCase>, Vec<Message>)> {
        let mut conv =
            alloc::vec![Message::user(render(PromptName::GenerateFunctionPoints, &[("Specification", spec)])?)];
        let points = match self.ask_points::<FunctionPoint>(&mut conv, "function_points")? {
            Ok(p) => p,
            Err(log) => return stop(TermStage::Analyze, 2, log),
        };
        conv.push(Message::user(render(PromptName::GenerateTestCases, &[])?));
        let cases = match self.ask_points::<TestCase>(&mut conv, "test_cases")? {
            Ok(c) => c,
            Err(log) => return stop(TermStage::Analyze, 2, log),
        };
        self.note(Stage::Analyze, "analyze", Status::Pass);
        Ok(Ok((points, cases, conv)))
    }

    /// Asks for a testbench until one compiles against `code`.
    pub fn draft(&mut self, code: &str, mut conv: Vec<Message>) -> StageResult<String> {
        let t = self.cfg.temperatures.draft;
        conv.push(Message::user(render(PromptName::DraftTestbench, &[("Code", code)])?));
        let mut scaffold_reprompted = false;
        loop {
            let reply = self.ask(&conv, t)?;
            conv.push(Message::assistant(reply.clone()));
            let mut tb = extract_code_block(&reply, "verilog").unwrap_or_default();
            let mut missing = missing_scaffold(&tb);
            if !missing.is_empty() {
                if scaffold_reprompted {
                    self.note(Stage::Draft, "scaffold", Status::Max);
                    return stop(TermStage::DraftScaffold, self.prov.draft_attempts, missing.join(", "));
                }
                scaffold_reprompted = true;
                self.note(Stage::Draft, "scaffold", Status::Fail);
                let joined = missing.join(", ");
                conv.push(Message::user(render(PromptName::ScaffoldFeedback, &[("Missing", &joined)])?));
                let reply = self.ask(&conv, t)?;
                conv.push(Message::assistant(reply.clone()));
                tb = extract_code_block(&reply, "verilog").unwrap_or_default();
                missing = missing_scaffold(&tb);
                if !missing.is_empty() {
                    self.note(Stage::Draft, "scaffold", Status::Max);
                    return stop(TermStage::DraftScaffold, self.prov.draft_attempts, missing.join(", "));
                }
            }
            self.prov.draft_attempts += 1;
            match self.compile(code, &tb)? {
                CompileOutcome::Ok => {
                    self.note(Stage::Draft, "compile", Status::Pass);
                    return Ok(Ok(tb));
                }
                CompileOutcome::Failed(log) => {
                    if self.prov.draft_attempts >= self.cfg.max_draft_attempts {
                        self.note(Stage::Draft, "compile", Status::Max);
                        return stop(TermStage::DraftCompile, self.prov.draft_attempts, log);
                    }
                    self.note(Stage::Draft, "compile", Status::Fail);
                    conv.push(Message::user(render(
                        PromptName::CompileFeedback,
                        &[("ErrorLog", &log), ("PreviousTestbench", &tb)],
                    )?));
                }
            }
        }
    }

    /// Raises line coverage to the threshold. Returns the testbench and the
    /// last measured percentage, or `None` when coverage is skipped.
    pub fn improve(&mut self, spec: &str, code: &str, tb: String) -> StageResult<(String, Option<f64>)> {
        if self.cfg.skip_coverage {
            self.note(Stage::Improve, "skipped", Status::Pass);
            return Ok(Ok((tb, None)));
        }
        if !self.sim.has_coverage() {
            return Err(PipelineError::Config(
                "coverage measurement requested but no coverage tool is configured".into(),
            ));
        }
        let t = self.cfg.temperatures.improve;
        let max = self.cfg.max_improve_attempts;
        let threshold = format_threshold(self.cfg.coverage_threshold);
        let context = render(PromptName::Context, &[("Specification", spec), ("Code", code)])?;
        let mut tb = tb;
        self.prov.improve_attempts = 1;
        loop {
            self.prov.sim_calls += 1;
            let text = self.sim.coverage(code, &tb)?;
            let report = match parse_coverage(&text) {
                Ok(r) => r,
                Err(e) => {
                    self.note(Stage::Improve, "coverage", Status::Max);
                    return stop(TermStage::ImproveCoverage, self.prov.improve_attempts, alloc::format!("{e}\n{text}"));
                }
            };
            if report.percent >= self.cfg.coverage_threshold {
                self.note(Stage::Improve, "coverage", Status::Pass);
                return Ok(Ok((tb, Some(report.percent))));
            }
            if self.prov.improve_attempts >= max {
                self.note(Stage::Improve, "coverage", Status::Max);
                return stop(TermStage::ImproveCoverage, self.prov.improve_attempts, text);
            }
            self.note(Stage::Improve, "coverage", Status::Fail);
            let prompt = render(
                PromptName::ImproveTestbench,
                &[("Threshold", &threshold), ("CoverageReport", text.trim_end()), ("PreviousTestbench", &tb)],
            )?;
            let mut conv = alloc::vec![Message::user(alloc::format!("{context}\n\n{prompt}"))];
            loop {
                let reply = self.ask(&conv, t)?;
                conv.push(Message::assistant(reply.clone()));
                let candidate = extract_code_block(&reply, "verilog").unwrap_or_default();
                self.prov.improve_attempts += 1;
                match self.compile(code, &candidate)? {
                    CompileOutcome::Ok => {
                        tb = candidate;
                        break;
                    }
                    CompileOutcome::Failed(log) => {
                        if self.prov.improve_attempts >= max {
                            self.note(Stage::Improve, "compile", Status::Max);
                            return stop(TermStage::ImproveCoverage, self.prov.improve_attempts, log);
                        }
                        self.note(Stage::Improve, "compile", Status::Fail);
                        let fb = render(
                            PromptName::CompileFeedback,
                            &[("ErrorLog", &log), ("PreviousTestbench", &candidate)],
                        )?;
                        conv.push(Message::user(alloc::format!("{fb}\n\nCoverage report:\n{}", text.trim_end())));
                    }
                }
            }
        }
    }

    fn rectify_prompt(&mut self, context: &str, tb: &str, sim_text: &str) -> Result<String, PipelineError> {
        let prompt = render(PromptName::RectifyTestbench, &[("PreviousTestbench", tb), ("Simulation", sim_text)])?;
        let conv = [Message::user(alloc::format!("{context}\n\n{prompt}"))];
        let reply = self.ask(&conv, self.cfg.temperatures.rectify)?;
        Ok(extract_code_block(&reply, "verilog").unwrap_or_default())
    }

    /// Aligns expected values with the reference code's actual behaviour.
    /// Returns the final testbench and its test case count.
    pub fn rectify(&mut self, spec: &str, code: &str, tb: String) -> StageResult<(String, u32)> {
        let context = render(PromptName::Context, &[("Specification", spec), ("Code", code)])?;
        let mut tb = tb;
        if !tb.contains(PASS_MARKER) {
            // One pass to add the pass/fail epilogue; not a rectify iteration.
            let out = self.run_sim(code, &tb)?;
            let text = match out {
                RunOutput::Exited { stdout, .. } => stdout,
                other => classify(other).log_text(),
            };
            self.note(Stage::Rectify, "epilogue", Status::Fail);
            tb = self.rectify_prompt(&context, &tb, &text)?;
            if !tb.contains(PASS_MARKER) {
                self.note(Stage::Rectify, "epilogue", Status::Max);
                return stop(TermStage::RectifyVerify, 0, "testbench still lacks the pass marker");
            }
        }
        loop {
            let outcome = classify(self.run_sim(code, &tb)?);
            if let SimOutcome::Report(r) = &outcome {
                if r.failures == 0 && r.total_cases >= 1 {
                    self.note(Stage::Rectify, "verify", Status::Pass);
                    return Ok(Ok((tb, r.total_cases)));
                }
            }
            let mut log = outcome.log_text();
            if matches!(&outcome, SimOutcome::Report(r) if r.total_cases == 0) {
                log.push_str("\nno test cases were reported");
            }
            if self.prov.rectify_iterations >= self.cfg.max_rectify_iterations {
                self.note(Stage::Rectify, "verify", Status::Max);
                return stop(TermStage::RectifyVerify, self.prov.rectify_iterations, log);
            }
            self.note(Stage::Rectify, "verify", Status::Fail);
            self.prov.rectify_iterations += 1;
            tb = self.rectify_prompt(&context, &tb, &log)?;
        }
    }

    pub fn run(mut self, spec: &str, code: &str) -> Result<PipelineResult, PipelineError> {
        let outcome = self.run_stages(spec, code)?;
        Ok(PipelineResult { outcome, trace: self.trace, provenance: self.prov })
    }

    fn run_stages(&mut self, spec: &str, code: &str) -> Result<Outcome, PipelineError> {
        let (function_points, testcases, conv) = match self.analyze(spec)? {
            Ok(v) => v,
            Err(t) => return Ok(Outcome::Terminated(t)),
        };
        let tb = match self.draft(code, conv)? {
            Ok(tb) => tb,
            Err(t) => return Ok(Outcome::Terminated(t)),
        };
        let (tb, coverage_percent) = match self.improve(spec, code, tb)? {
            Ok(v) => v,
            Err(t) => return Ok(Outcome::Terminated(t)),
        };
        let (testbench, testcase_count) = match self.rectify(spec, code, tb)? {
            Ok(v) => v,
            Err(t) => return Ok(Outcome::Terminated(t)),
        };
        Ok(Outcome::Finished(TestbenchRecord {
            testbench,
            testcase_count,
            function_points,
            testcases,
            coverage_percent,
            provenance: self.prov,
        }))
    }
}
