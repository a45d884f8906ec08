// SPDX-License-Identifier: Apache-2.0

//! Candidate evaluation and preference-pair construction.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::llm::{extract_code_block, render, ChatBackend, ChatError, ChatRequest, Message, PromptName};
use crate::sim::{BackendError, SimBackend, SimOutcome};
use crate::similarity::{ast_similarity, bleu, dfg_similarity, Method};
use crate::verilog::{extract_dfg, lex, parse_source};

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingParams {
    pub n: u32,
    pub temperature: f64,
    pub top_p: Option<f64>,
    pub top_k: Option<u32>,
    pub max_tokens: u32,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams { n: 2, temperature: 0.8, top_p: Some(0.95), top_k: Some(50), max_tokens: 4096 }
    }
}

/// `n` independent generations for `spec`. A reply without code yields `None`.
pub fn sample_candidates<C: ChatBackend>(
    spec: &str,
    params: &SamplingParams,
    mut chat: C,
) -> Result<Vec<Option<String>>, ChatError> {
    let prompt = render(PromptName::GenerateCode, &[("Specification", spec)])
        .map_err(|_| ChatError::InvalidRequest("generation template"))?;
    let mut req = ChatRequest::new(alloc::vec![Message::user(prompt)], params.temperature, params.max_tokens);
    req.top_p = params.top_p;
    req.top_k = params.top_k;
    (0..params.n).map(|_| chat.complete(&req).map(|reply| extract_code_block(&reply, "verilog").ok())).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateEval {
    pub code: String,
    pub compile_ok: bool,
    pub outcome: SimOutcome,
    pub passed: u32,
    pub total: u32,
}

impl CandidateEval {
    pub fn from_outcome(code: impl Into<String>, outcome: SimOutcome) -> Self {
        let (compile_ok, passed, total) = match &outcome {
            SimOutcome::CompileError { .. } => (false, 0, 0),
            SimOutcome::RuntimeAbort { .. } => (true, 0, 0),
            SimOutcome::Report(r) => (true, r.passed(), r.total_cases),
        };
        CandidateEval { code: code.into(), compile_ok, outcome, passed, total }
    }

    /// A candidate with no extractable code.
    pub fn no_code() -> Self {
        Self::from_outcome(String::new(), SimOutcome::CompileError { log: "no code found".into() })
    }

    pub fn aborted(&self) -> bool {
        matches!(self.outcome, SimOutcome::RuntimeAbort { .. })
    }

    pub fn status(&self) -> &'static str {
        self.outcome.status()
    }
}

/// Runs `code` under the testbench `tb`.
pub fn evaluate_candidate<S: SimBackend>(code: &str, tb: &str, mut sim: S) -> Result<CandidateEval, BackendError> {
    if code.trim().is_empty() {
        return Ok(CandidateEval::no_code());
    }
    Ok(CandidateEval::from_outcome(code, sim.simulate(code, tb)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PairMethod {
    Testbench,
    Bleu,
    Ast,
    Dfg,
    TestbenchWithFails,
}

impl PairMethod {
    pub const ALL: [PairMethod; 5] =
        [PairMethod::Testbench, PairMethod::Bleu, PairMethod::Ast, PairMethod::Dfg, PairMethod::TestbenchWithFails];

    pub fn as_str(self) -> &'static str {
        match self {
            PairMethod::Testbench => "testbench",
            PairMethod::Bleu => "bleu",
            PairMethod::Ast => "ast",
            PairMethod::Dfg => "dfg",
            PairMethod::TestbenchWithFails => "tb-with-fails",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        PairMethod::ALL.into_iter().find(|m| m.as_str() == s)
    }

    pub fn similarity(self) -> Option<Method> {
        match self {
            PairMethod::Bleu => Some(Method::Bleu),
            PairMethod::Ast => Some(Method::Ast),
            PairMethod::Dfg => Some(Method::Dfg),
            _ => None,
        }
    }
}

impl fmt::Display for PairMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreferencePair {
    pub spec: String,
    pub chosen: String,
    pub rejected: String,
    pub chosen_passed: u32,
    pub rejected_passed: u32,
    pub method: PairMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DiscardReason {
    CompileFailure,
    Aborted,
    Tie,
    Parse,
}

impl DiscardReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DiscardReason::CompileFailure => "compile_failure",
            DiscardReason::Aborted => "aborted",
            DiscardReason::Tie => "tie",
            DiscardReason::Parse => "parse",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PairDecision {
    Pair(PreferencePair),
    Discard(DiscardReason),
}

impl PairDecision {
    pub fn pair(&self) -> Option<&PreferencePair> {
        match self {
            PairDecision::Pair(p) => Some(p),
            PairDecision::Discard(_) => None,
        }
    }
}

fn make_pair(spec: &str, chosen: &CandidateEval, rejected: &CandidateEval, method: PairMethod) -> PairDecision {
    PairDecision::Pair(PreferencePair {
        spec: spec.into(),
        chosen: chosen.code.clone(),
        rejected: rejected.code.clone(),
        chosen_passed: chosen.passed,
        rejected_passed: rejected.passed,
        method,
    })
}

fn both_usable(a: &CandidateEval, b: &CandidateEval) -> Result<(), DiscardReason> {
    if !a.compile_ok || !b.compile_ok {
        Err(DiscardReason::CompileFailure)
    } else if a.aborted() || b.aborted() {
        Err(DiscardReason::Aborted)
    } else {
        Ok(())
    }
}

/// More passed test cases wins; compile failures, aborts and ties are discarded.
pub fn build_pair_testbench(spec: &str, a: &CandidateEval, b: &CandidateEval) -> PairDecision {
    testbench_rule(spec, a, b, PairMethod::Testbench)
}

fn testbench_rule(spec: &str, a: &CandidateEval, b: &CandidateEval, method: PairMethod) -> PairDecision {
    if let Err(r) = both_usable(a, b) {
        return PairDecision::Discard(r);
    }
    match a.passed.cmp(&b.passed) {
        core::cmp::Ordering::Greater => make_pair(spec, a, b, method),
        core::cmp::Ordering::Less => make_pair(spec, b, a, method),
        core::cmp::Ordering::Equal => PairDecision::Discard(DiscardReason::Tie),
    }
}

/// Similarity of `code` to `reference`, or `None` when either side cannot be analysed.
pub fn similarity_to(method: Method, code: &str, reference: &str) -> Option<f64> {
    match method {
        Method::Bleu => {
            let c = lex(code).ok()?;
            let r = lex(reference).ok()?;
            bleu(&c, &r).ok().map(|s| s.value)
        }
        Method::Ast => {
            let c = parse_source(code).ok()?;
            let r = parse_source(reference).ok()?;
            Some(ast_similarity(&c, &r).value)
        }
        Method::Dfg => {
            let c = extract_dfg(&parse_source(code).ok()?);
            let r = extract_dfg(&parse_source(reference).ok()?);
            Some(dfg_similarity(&c, &r).value)
        }
    }
}

/// Higher similarity to the reference code wins. Both candidates must compile.
pub fn build_pair_similarity(
    spec: &str,
    reference: &str,
    a: &CandidateEval,
    b: &CandidateEval,
    method: Method,
) -> PairDecision {
    if let Err(r) = both_usable(a, b) {
        return PairDecision::Discard(r);
    }
    let (Some(sa), Some(sb)) = (similarity_to(method, &a.code, reference), similarity_to(method, &b.code, reference))
    else {
        return PairDecision::Discard(DiscardReason::Parse);
    };
    let pm = match method {
        Method::Bleu => PairMethod::Bleu,
        Method::Ast => PairMethod::Ast,
        Method::Dfg => PairMethod::Dfg,
    };
    if sa > sb {
        make_pair(spec, a, b, pm)
    } else if sb > sa {
        make_pair(spec, b, a, pm)
    } else {
        PairDecision::Discard(DiscardReason::Tie)
    }
}

/// A compiling candidate beats a non-compiling one; two compiling candidates
/// fall back to the testbench rule.
pub fn build_pair_with_fails(spec: &str, a: &CandidateEval, b: &CandidateEval) -> PairDecision {
    match (a.compile_ok, b.compile_ok) {
        (true, false) => make_pair(spec, a, b, PairMethod::TestbenchWithFails),
        (false, true) => make_pair(spec, b, a, PairMethod::TestbenchWithFails),
        (false, false) => PairDecision::Discard(DiscardReason::CompileFailure),
        (true, true) => build_pair_testbench(spec, a, b),
    }
}

pub fn build_pair(
    method: PairMethod,
    spec: &str,
    reference: &str,
    a: &CandidateEval,
    b: &CandidateEval,
) -> PairDecision {
    match method {
        PairMethod::Testbench => build_pair_testbench(spec, a, b),
        PairMethod::TestbenchWithFails => build_pair_with_fails(spec, a, b),
        PairMethod::Bleu => build_pair_similarity(spec, reference, a, b, Method::Bleu),
        PairMethod::Ast => build_pair_similarity(spec, reference, a, b, Method::Ast),
        PairMethod::Dfg => build_pair_similarity(spec, reference, a, b, Method::Dfg),
    }
}

/// Decisions for every unordered candidate pair `(i, j)`, `i < j`, keeping at
/// most `cap` emitted pairs. Discards past the cap are still reported.
pub fn pairs_for_spec(
    method: PairMethod,
    spec: &str,
    reference: &str,
    evals: &[CandidateEval],
    cap: usize,
) -> Vec<PairDecision> {
    let mut out = Vec::new();
    let mut emitted = 0;
    for i in 0..evals.len() {
        for j in i + 1..evals.len() {
            let d = build_pair(method, spec, reference, &evals[i], &evals[j]);
            if d.pair().is_some() {
                if emitted == cap {
                    continue;
                }
                emitted += 1;
            }
            out.push(d);
        }
    }
    out
}

/// Fraction of test cases passed; 0 for compile failures and aborts.
pub fn ppo_reward(eval: &CandidateEval) -> f64 {
    match &eval.outcome {
        SimOutcome::Report(r) if r.total_cases > 0 => r.passed() as f64 / r.total_cases as f64,
        _ => 0.0,
    }
}

/// Lines that are neither blank nor comment-only.
pub fn count_code_lines(code: &str) -> usize {
    let mut in_block = false;
    let mut count = 0;
    for line in code.lines() {
        let mut rest = line.trim();
        let mut has_code = false;
        while !rest.is_empty() {
            if in_block {
                match rest.find("*/") {
                    Some(i) => {
                        in_block = false;
                        rest = rest[i + 2..].trim_start();
                    }
                    None => rest = "",
                }
            } else if rest.starts_with("//") {
                rest = "";
            } else if let Some(r) = rest.strip_prefix("/*") {
                in_block = true;
                rest = r;
            } else {
                has_code = true;
                break;
            }
        }
        if has_code {
            count += 1;
        }
    }
    count
}
