// SPDX-License-Identifier: Apache-2.0

//! Library form of every subcommand. Each returns a JSON-serializable summary;
//! the binary only parses flags and prints.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use tbloop_core::dpo::{dpo_loss, PairLogProbs, DEFAULT_BETA};
use tbloop_core::metrics::{pass_at_k, MetricsError, PassMode, TaskResults};
use tbloop_core::pipeline::{run_pipeline, Outcome, PipelineError, SpecCodePair};
use tbloop_core::preference::{
    count_code_lines, evaluate_candidate, pairs_for_spec, sample_candidates, CandidateEval, PairDecision, PairMethod,
};
use tbloop_core::sim::{parse_coverage, BackendError, SimOutcome};
use tbloop_core::similarity::{ast_similarity, bleu, dfg_similarity, Method};
use tbloop_core::verilog::{extract_dfg, lex, parse_source};

use crate::backends::Backends;
use crate::config::{Config, SimProvider};
use crate::error::CliError;
use crate::gradcheck::run_gradcheck;
use crate::rows::*;

/// Rows handed to the pool per batch; output is flushed between batches.
const BATCH_PER_JOB: usize = 4;

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    if jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| CliError::Usage(e.to_string()))
}

/// Maps `f` over `items` on `jobs` threads; `on_batch` receives results in input order.
fn batched<T: Sync, R: Send>(
    items: &[T],
    jobs: usize,
    f: impl Fn(&T) -> R + Sync,
    mut on_batch: impl FnMut(Vec<R>) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let pool = pool(jobs)?;
    for chunk in items.chunks(jobs * BATCH_PER_JOB) {
        on_batch(pool.install(|| chunk.par_iter().map(&f).collect()))?;
    }
    Ok(())
}

fn bump(map: &mut BTreeMap<String, usize>, key: &str) {
    *map.entry(key.to_string()).or_default() += 1;
}

fn backend_fatal(e: &BackendError) -> Option<CliError> {
    matches!(e, BackendError::ToolMissing(_)).then(|| CliError::Backend(e.to_string()))
}

fn error_kind(e: &PipelineError) -> &'static str {
    use tbloop_core::llm::ChatError;
    match e {
        PipelineError::Chat(ChatError::RateLimited { .. }) => "rate_limited",
        PipelineError::Chat(ChatError::ScriptExhausted) | PipelineError::Sim(BackendError::ScriptExhausted) => {
            "script_exhausted"
        }
        PipelineError::Chat(_) => "llm",
        PipelineError::Sim(_) => "simulator",
        PipelineError::Config(_) => "config",
        PipelineError::Template(_) => "template",
    }
}

#[derive(Debug, Clone)]
pub struct GenTestbenchArgs {
    pub input: PathBuf,
    pub out: PathBuf,
    pub jobs: usize,
    pub trace: Option<PathBuf>,
    pub record: Option<PathBuf>,
    /// Append to `out`, skipping ids it already holds.
    pub resume: bool,
    /// Rows whose reference code has fewer non-comment lines are skipped.
    pub min_code_lines: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct GenSummary {
    pub rows: usize,
    pub finished: usize,
    pub terminated: BTreeMap<String, usize>,
    pub errors: BTreeMap<String, usize>,
    pub skipped: BTreeMap<String, usize>,
}

enum GenRow {
    Finished(TestbenchRow, Vec<String>),
    Terminated(&'static str, Vec<String>),
    Failed(&'static str, String),
    Fatal(CliError),
}

fn trace_lines(id: &str, r: &tbloop_core::pipeline::PipelineResult) -> Vec<String> {
    let mut lines: Vec<String> =
        r.trace.iter().map(|e| format!("{id}\t{}\t{}\t{}", e.stage.as_str(), e.action, e.status.as_str())).collect();
    if let Some(t) = r.termination() {
        lines.push(format!("{id}\tterminated\t{}\tattempts={}", t.stage.as_str(), t.attempts));
    }
    lines
}

/// Runs the testbench pipeline over every spec/code row.
pub fn gen_testbench(args: &GenTestbenchArgs, cfg: &Config) -> Result<GenSummary, CliError> {
    let backends = Backends::new(cfg, args.record.is_some())?;
    backends.check_simulator()?;
    if cfg.simulator.provider == SimProvider::Process
        && !cfg.pipeline.skip_coverage
        && cfg.simulator.coverage_command.is_none()
    {
        return Err(CliError::Config("no simulator.coverage_command; set pipeline.skip_coverage = true".into()));
    }
    let pcfg = cfg.pipeline_config();
    let (rows, malformed) = read_jsonl::<SpecCodeRow>(&args.input)?;
    let mut summary = GenSummary::default();
    if !malformed.is_empty() {
        summary.skipped.insert("malformed".into(), malformed.len());
    }
    let done = if args.resume { existing_keys::<TestbenchRow>(&args.out)? } else { Default::default() };
    let mut todo = Vec::new();
    for row in rows {
        if done.contains(&row.id) {
            bump(&mut summary.skipped, "done");
        } else if count_code_lines(&row.code) < args.min_code_lines {
            bump(&mut summary.skipped, "short_code");
        } else {
            todo.push(SpecCodePair::from(row));
        }
    }
    let mut out = JsonlWriter::create(&args.out, args.resume)?;
    let mut trace = match &args.trace {
        Some(p) => Some(JsonlTextWriter::create(p)?),
        None => None,
    };

    let process = |pair: &SpecCodePair| -> GenRow {
        let mut chat = backends.chat(&pair.id);
        let mut sim = backends.sim(&pair.id);
        match run_pipeline(pair, &pcfg, &mut chat, &mut sim) {
            Ok(r) => {
                let lines = trace_lines(&pair.id, &r);
                match r.outcome {
                    Outcome::Finished(rec) => GenRow::Finished(
                        TestbenchRow {
                            id: pair.id.clone(),
                            tb: rec.testbench,
                            testcase_count: rec.testcase_count,
                            coverage_percent: rec.coverage_percent,
                            provenance: r.provenance.into(),
                        },
                        lines,
                    ),
                    Outcome::Terminated(t) => GenRow::Terminated(t.stage.as_str(), lines),
                }
            }
            Err(PipelineError::Sim(e)) if backend_fatal(&e).is_some() => GenRow::Fatal(backend_fatal(&e).unwrap()),
            Err(e) => GenRow::Failed(error_kind(&e), format!("{}\terror\t{e}", pair.id)),
        }
    };

    summary.rows = todo.len();
    batched(&todo, args.jobs, process, |batch| {
        for row in batch {
            let lines = match row {
                GenRow::Finished(tb, lines) => {
                    summary.finished += 1;
                    out.write(&tb)?;
                    lines
                }
                GenRow::Terminated(stage, lines) => {
                    bump(&mut summary.terminated, stage);
                    log::info!("{}", lines.last().map(String::as_str).unwrap_or_default());
                    lines
                }
                GenRow::Failed(kind, line) => {
                    bump(&mut summary.errors, kind);
                    log::error!("{line}");
                    vec![line]
                }
                GenRow::Fatal(e) => return Err(e),
            };
            if let Some(t) = trace.as_mut() {
                t.lines(&lines)?;
            }
        }
        out.flush()?;
        trace.as_mut().map_or(Ok(()), |t| t.flush())
    })?;
    if let Some(p) = &args.record {
        backends.save_recording(p)?;
    }
    Ok(summary)
}

/// Plain line writer for trace logs.
struct JsonlTextWriter {
    path: PathBuf,
    out: std::io::BufWriter<std::fs::File>,
}

impl JsonlTextWriter {
    fn create(path: &Path) -> Result<Self, CliError> {
        let f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
        Ok(JsonlTextWriter { path: path.into(), out: std::io::BufWriter::new(f) })
    }

    fn lines(&mut self, lines: &[String]) -> Result<(), CliError> {
        use std::io::Write;
        for l in lines {
            writeln!(self.out, "{l}").map_err(|e| CliError::io(&self.path, e))?;
        }
        Ok(())
    }

    fn flush(&mut self) -> Result<(), CliError> {
        use std::io::Write;
        self.out.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

#[derive(Debug, Clone)]
pub struct CollectPairsArgs {
    pub specs: PathBuf,
    pub testbenches: PathBuf,
    pub out: PathBuf,
    pub method: PairMethod,
    /// Overrides `sampling.n`.
    pub n: Option<u32>,
    pub max_pairs: usize,
    pub evals: Option<PathBuf>,
    pub task_results: Option<PathBuf>,
    pub jobs: usize,
    pub record: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PairSummary {
    pub specs: usize,
    pub pairs: usize,
    pub discards: BTreeMap<String, usize>,
    pub errors: BTreeMap<String, usize>,
    pub skipped: BTreeMap<String, usize>,
}

enum SpecPairs {
    Done { id: String, evals: Vec<CandidateEval>, decisions: Vec<PairDecision> },
    Failed(&'static str, String),
    Fatal(CliError),
}

/// Samples candidates per spec, scores them with its testbench and emits preference pairs.
pub fn collect_pairs(args: &CollectPairsArgs, cfg: &Config) -> Result<PairSummary, CliError> {
    let backends = Backends::new(cfg, args.record.is_some())?;
    backends.check_simulator()?;
    let mut params = cfg.sampling_params();
    if let Some(n) = args.n {
        if n == 0 {
            return Err(CliError::Usage("--n must be at least 1".into()));
        }
        params.n = n;
    }
    let (specs, bad_specs) = read_jsonl::<SpecCodeRow>(&args.specs)?;
    let (tbs, bad_tbs) = read_jsonl::<TestbenchRow>(&args.testbenches)?;
    let tb_by_id: BTreeMap<&str, &str> = tbs.iter().map(|t| (t.id.as_str(), t.tb.as_str())).collect();
    let mut summary = PairSummary::default();
    if bad_specs.len() + bad_tbs.len() > 0 {
        summary.skipped.insert("malformed".into(), bad_specs.len() + bad_tbs.len());
    }
    let mut todo = Vec::new();
    for s in &specs {
        match tb_by_id.get(s.id.as_str()) {
            Some(tb) => todo.push((s, *tb)),
            None => bump(&mut summary.skipped, "no_testbench"),
        }
    }
    summary.specs = todo.len();

    let mut out = JsonlWriter::create(&args.out, false)?;
    let mut evals_out = args.evals.as_deref().map(|p| JsonlWriter::create(p, false)).transpose()?;
    let mut results_out = args.task_results.as_deref().map(|p| JsonlWriter::create(p, false)).transpose()?;

    let process = |(row, tb): &(&SpecCodeRow, &str)| -> SpecPairs {
        let mut chat = backends.chat(&row.id);
        let mut sim = backends.sim(&row.id);
        let codes = match sample_candidates(&row.spec, &params, &mut chat) {
            Ok(c) => c,
            Err(e) => return SpecPairs::Failed(error_kind(&e.clone().into()), format!("{}: {e}", row.id)),
        };
        let mut evals = Vec::with_capacity(codes.len());
        for code in codes {
            match evaluate_candidate(code.as_deref().unwrap_or(""), tb, &mut sim) {
                Ok(e) => evals.push(e),
                Err(e) => {
                    if let Some(fatal) = backend_fatal(&e) {
                        return SpecPairs::Fatal(fatal);
                    }
                    return SpecPairs::Failed(error_kind(&e.clone().into()), format!("{}: {e}", row.id));
                }
            }
        }
        let decisions = pairs_for_spec(args.method, &row.spec, &row.code, &evals, args.max_pairs);
        SpecPairs::Done { id: row.id.clone(), evals, decisions }
    };

    batched(&todo, args.jobs, process, |batch| {
        for r in batch {
            match r {
                SpecPairs::Done { id, evals, decisions } => {
                    for (idx, e) in evals.iter().enumerate() {
                        if let Some(w) = evals_out.as_mut() {
                            w.write(&EvalRow {
                                id: id.clone(),
                                candidate_idx: idx as u32,
                                compile_ok: e.compile_ok,
                                passed: e.passed,
                                total: e.total,
                                status: e.status().into(),
                            })?;
                        }
                    }
                    if let Some(w) = results_out.as_mut() {
                        w.write(&TaskResultRow {
                            task: id.clone(),
                            n: Some(evals.len() as u32),
                            c_syntax: evals.iter().filter(|e| e.compile_ok).count() as u32,
                            c_function: evals.iter().filter(|e| e.status() == "pass").count() as u32,
                        })?;
                    }
                    let mut emitted = 0;
                    for d in decisions {
                        match d {
                            PairDecision::Pair(p) => {
                                let pair_id = if emitted == 0 { id.clone() } else { format!("{id}-{emitted}") };
                                emitted += 1;
                                out.write(&PairRow {
                                    id: pair_id,
                                    method: p.method.as_str().into(),
                                    spec: p.spec,
                                    chosen: p.chosen,
                                    rejected: p.rejected,
                                    chosen_passed: p.chosen_passed,
                                    rejected_passed: p.rejected_passed,
                                })?;
                            }
                            PairDecision::Discard(reason) => bump(&mut summary.discards, reason.as_str()),
                        }
                    }
                    summary.pairs += emitted;
                }
                SpecPairs::Failed(kind, msg) => {
                    bump(&mut summary.errors, kind);
                    log::error!("{msg}");
                }
                SpecPairs::Fatal(e) => return Err(e),
            }
        }
        out.flush()?;
        if let Some(w) = evals_out.as_mut() {
            w.flush()?;
        }
        results_out.as_mut().map_or(Ok(()), |w| w.flush())
    })?;
    if let Some(p) = &args.record {
        backends.save_recording(p)?;
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassKRow {
    pub k: u32,
    pub pass_at_k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassKReport {
    pub mode: &'static str,
    pub tasks: usize,
    pub results: Vec<PassKRow>,
}

/// pass@k for every requested `k`, in the order given.
pub fn passk(results: &Path, ks: &[u32], default_n: u32, mode: PassMode) -> Result<PassKReport, CliError> {
    if ks.is_empty() {
        return Err(CliError::Usage("at least one k is required".into()));
    }
    let (rows, _) = read_jsonl::<TaskResultRow>(results)?;
    let tasks: Vec<TaskResults> = rows
        .into_iter()
        .map(|r| TaskResults {
            task: r.task,
            n: r.n.unwrap_or(default_n),
            c_syntax: r.c_syntax,
            c_function: r.c_function,
        })
        .collect();
    let mut out = Vec::with_capacity(ks.len());
    for &k in ks {
        let v = pass_at_k(&tasks, k, mode).map_err(|e| match e {
            MetricsError::EmptyInput => CliError::Usage(format!("{}: no task results", results.display())),
            other => CliError::Usage(other.to_string()),
        })?;
        out.push(PassKRow { k, pass_at_k: v });
    }
    Ok(PassKReport { mode: mode.as_str(), tasks: tasks.len(), results: out })
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Similarity of `a` (candidate) to `b` (reference).
pub fn similarity(method: Method, a: &Path, b: &Path) -> Result<f64, CliError> {
    let (ta, tb) = (read_text(a)?, read_text(b)?);
    let unsupported =
        |p: &Path, e: &dyn std::fmt::Display| CliError::Usage(format!("ParseUnsupported: {}: {e}", p.display()));
    let parse = |p: &Path, t: &str| parse_source(t).map_err(|e| unsupported(p, &e));
    Ok(match method {
        Method::Bleu => {
            let la = lex(&ta).map_err(|e| unsupported(a, &e))?;
            let lb = lex(&tb).map_err(|e| unsupported(b, &e))?;
            bleu(&la, &lb).map_err(|e| CliError::Usage(e.to_string()))?.value
        }
        Method::Ast => ast_similarity(&parse(a, &ta)?, &parse(b, &tb)?).value,
        Method::Dfg => dfg_similarity(&extract_dfg(&parse(a, &ta)?), &extract_dfg(&parse(b, &tb)?)).value,
    })
}

/// Mean DPO loss over a log-probability file.
pub fn dpo_report(pairs: &Path, beta: f64) -> Result<Value, CliError> {
    let (rows, _) = read_jsonl::<PairLogProbsRow>(pairs)?;
    let batch: Vec<PairLogProbs> = rows
        .iter()
        .map(|r| PairLogProbs {
            policy_chosen: r.policy_chosen,
            ref_chosen: r.ref_chosen,
            policy_rejected: r.policy_rejected,
            ref_rejected: r.ref_rejected,
        })
        .collect();
    let loss = dpo_loss(&batch, beta).map_err(|e| CliError::Usage(e.to_string()))?;
    let n = batch.len() as f64;
    let mean_margin = batch.iter().map(PairLogProbs::margin).sum::<f64>() / n;
    let accuracy = batch.iter().filter(|p| p.margin() > 0.0).count() as f64 / n;
    Ok(
        json!({"pairs": batch.len(), "beta": beta, "loss": loss, "mean_margin": mean_margin, "reward_accuracy": accuracy}),
    )
}

pub fn dpo_gradcheck(seeds: u64, beta: Option<f64>) -> Result<Value, CliError> {
    if seeds == 0 {
        return Err(CliError::Usage("--gradcheck needs at least one seed".into()));
    }
    let r = run_gradcheck(0..seeds, beta).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(serde_json::to_value(r).expect("report serializes"))
}

pub fn default_beta() -> f64 {
    DEFAULT_BETA
}

/// Compiles and runs one DUT/testbench pair and reports the parsed outcome.
pub fn simulate(dut: &Path, tb: &Path, cfg: &Config, id: &str, with_coverage: bool) -> Result<Value, CliError> {
    let (dut_text, tb_text) = (read_text(dut)?, read_text(tb)?);
    let backends = Backends::new(cfg, false)?;
    backends.check_simulator()?;
    let mut sim = backends.sim(id);
    let fatal = |e: BackendError| backend_fatal(&e).unwrap_or_else(|| CliError::Backend(e.to_string()));
    let outcome = sim.simulate(&dut_text, &tb_text).map_err(fatal)?;
    let mut v = outcome_json(&outcome);
    if with_coverage && matches!(outcome, SimOutcome::Report(_)) {
        let text = sim.coverage(&dut_text, &tb_text).map_err(fatal)?;
        v["coverage"] = match parse_coverage(&text) {
            Ok(c) => json!({
                "total_lines": c.total_lines,
                "covered_lines": c.covered_lines,
                "percent": c.percent,
                "uncovered_lines": c.uncovered_lines().collect::<Vec<_>>(),
            }),
            Err(e) => json!({"error": e.to_string()}),
        };
    }
    Ok(v)
}

pub fn outcome_json(o: &SimOutcome) -> Value {
    match o {
        SimOutcome::CompileError { log } | SimOutcome::RuntimeAbort { log, .. } => {
            json!({"status": o.status(), "log": log})
        }
        SimOutcome::Report(r) => json!({
            "status": o.status(),
            "total_cases": r.total_cases,
            "failures": r.failures,
            "passed": r.passed(),
            "inconsistent": r.inconsistent,
            "cases": r.cases.iter().map(|c| json!({"index": c.index, "expected": c.expected, "actual": c.actual})).collect::<Vec<_>>(),
        }),
    }
}
