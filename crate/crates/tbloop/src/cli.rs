// SPDX-License-Identifier: Apache-2.0

//! Flag parsing and dispatch. Exit codes: 0 ok, 1 usage/config, 2 IO, 3 backend unavailable.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use tbloop_core::metrics::PassMode;
use tbloop_core::preference::PairMethod;
use tbloop_core::similarity::Method;

use crate::commands::{self, CollectPairsArgs, GenTestbenchArgs};
use crate::config::Config;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "tbloop", version, about = "Testbench generation and preference-pair tooling for Verilog")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Testbench,
    Bleu,
    Ast,
    Dfg,
    #[value(name = "tb-with-fails")]
    TbWithFails,
}

impl From<MethodArg> for PairMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Testbench => PairMethod::Testbench,
            MethodArg::Bleu => PairMethod::Bleu,
            MethodArg::Ast => PairMethod::Ast,
            MethodArg::Dfg => PairMethod::Dfg,
            MethodArg::TbWithFails => PairMethod::TestbenchWithFails,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SimilarityArg {
    Bleu,
    Ast,
    Dfg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Syntax,
    Function,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Generate a testbench for every {id, spec, code} row.
    GenTestbench {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Write per-row stage trace lines here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Save every backend reply as a replayable mock script.
        #[arg(long)]
        record: Option<PathBuf>,
        /// Append to --out and skip ids already present.
        #[arg(long)]
        resume: bool,
        #[arg(long, default_value_t = 0)]
        min_code_lines: usize,
    },
    /// Sample candidates per spec and build preference pairs.
    CollectPairs {
        #[arg(long)]
        specs: PathBuf,
        #[arg(long)]
        testbenches: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long)]
        config: PathBuf,
        /// Candidates per spec; defaults to sampling.n.
        #[arg(long)]
        n: Option<u32>,
        #[arg(long, default_value_t = 1)]
        max_pairs: usize,
        /// Per-candidate evaluation rows.
        #[arg(long)]
        evals: Option<PathBuf>,
        /// Per-spec pass counts for `passk`.
        #[arg(long)]
        task_results: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        record: Option<PathBuf>,
    },
    /// pass@k over task results.
    Passk {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<u32>,
        /// Samples per task for rows without `n`.
        #[arg(long, default_value_t = 20)]
        n: u32,
        #[arg(long, value_enum, default_value = "function")]
        mode: ModeArg,
    },
    /// Similarity of FILE_A (candidate) to FILE_B (reference).
    Similarity {
        #[arg(long, value_enum)]
        method: SimilarityArg,
        file_a: PathBuf,
        file_b: PathBuf,
    },
    /// DPO loss over log-probabilities, or a gradient check on random instances.
    Dpo {
        #[arg(long, required_unless_present = "gradcheck")]
        pairs: Option<PathBuf>,
        #[arg(long)]
        beta: Option<f64>,
        /// Number of random seeds to check.
        #[arg(long)]
        gradcheck: Option<u64>,
    },
    /// Compile and run one DUT/testbench pair.
    Simulate {
        #[arg(long)]
        dut: PathBuf,
        #[arg(long)]
        tb: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Script key when the simulator provider is `mock`.
        #[arg(long, default_value = "simulate")]
        id: String,
        #[arg(long)]
        coverage: bool,
    },
}

fn load(config: &Path) -> Result<Config, CliError> {
    Config::load(config)
}

fn emit<T: Serialize>(out: &mut dyn Write, v: &T) -> Result<(), CliError> {
    let text = serde_json::to_string(v).expect("reports serialize");
    writeln!(out, "{text}").map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

pub fn execute(cmd: Cmd, out: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Cmd::GenTestbench { input, out: path, config, jobs, trace, record, resume, min_code_lines } => {
            let cfg = load(&config)?;
            let args = GenTestbenchArgs { input, out: path, jobs, trace, record, resume, min_code_lines };
            emit(out, &commands::gen_testbench(&args, &cfg)?)
        }
        Cmd::CollectPairs {
            specs,
            testbenches,
            out: path,
            method,
            config,
            n,
            max_pairs,
            evals,
            task_results,
            jobs,
            record,
        } => {
            let cfg = load(&config)?;
            let args = CollectPairsArgs {
                specs,
                testbenches,
                out: path,
                method: method.into(),
                n,
                max_pairs,
                evals,
                task_results,
                jobs,
                record,
            };
            emit(out, &commands::collect_pairs(&args, &cfg)?)
        }
        Cmd::Passk { results, k, n, mode } => {
            let mode = match mode {
                ModeArg::Syntax => PassMode::Syntax,
                ModeArg::Function => PassMode::Function,
            };
            emit(out, &commands::passk(&results, &k, n, mode)?)
        }
        Cmd::Similarity { method, file_a, file_b } => {
            let m = match method {
                SimilarityArg::Bleu => Method::Bleu,
                SimilarityArg::Ast => Method::Ast,
                SimilarityArg::Dfg => Method::Dfg,
            };
            let v = commands::similarity(m, &file_a, &file_b)?;
            writeln!(out, "{v}").map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
        Cmd::Dpo { pairs, beta, gradcheck } => {
            if let Some(seeds) = gradcheck {
                return emit(out, &commands::dpo_gradcheck(seeds, beta)?);
            }
            let pairs = pairs.ok_or_else(|| CliError::Usage("--pairs is required".into()))?;
            emit(out, &commands::dpo_report(&pairs, beta.unwrap_or_else(commands::default_beta))?)
        }
        Cmd::Simulate { dut, tb, config, id, coverage } => {
            let cfg = load(&config)?;
            emit(out, &commands::simulate(&dut, &tb, &cfg, &id, coverage)?)
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
