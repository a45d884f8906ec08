// SPDX-License-Identifier: Apache-2.0

//! JSONL row schemas and line-oriented reading/writing.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tbloop_core::pipeline::{Provenance, SpecCodePair};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecCodeRow {
    pub id: String,
    pub spec: String,
    pub code: String,
}

impl From<SpecCodeRow> for SpecCodePair {
    fn from(r: SpecCodeRow) -> Self {
        SpecCodePair { id: r.id, spec: r.spec, code: r.code }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProvenanceRow {
    pub draft_attempts: u32,
    pub improve_attempts: u32,
    pub rectify_iterations: u32,
    pub llm_calls: u32,
    pub sim_calls: u32,
}

impl From<Provenance> for ProvenanceRow {
    fn from(p: Provenance) -> Self {
        ProvenanceRow {
            draft_attempts: p.draft_attempts,
            improve_attempts: p.improve_attempts,
            rectify_iterations: p.rectify_iterations,
            llm_calls: p.llm_calls,
            sim_calls: p.sim_calls,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestbenchRow {
    pub id: String,
    pub tb: String,
    pub testcase_count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage_percent: Option<f64>,
    pub provenance: ProvenanceRow,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalRow {
    pub id: String,
    pub candidate_idx: u32,
    pub compile_ok: bool,
    pub passed: u32,
    pub total: u32,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairRow {
    pub id: String,
    pub method: String,
    pub spec: String,
    pub chosen: String,
    pub rejected: String,
    pub chosen_passed: u32,
    pub rejected_passed: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskResultRow {
    pub task: String,
    /// Falls back to the `--n` flag of `passk` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    pub c_syntax: u32,
    pub c_function: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairLogProbsRow {
    pub id: String,
    pub policy_chosen: f64,
    pub ref_chosen: f64,
    pub policy_rejected: f64,
    pub ref_rejected: f64,
}

/// Rows with a primary key that must be unique within a file.
pub trait Keyed {
    fn key(&self) -> String;
}

macro_rules! keyed_by {
    ($t:ty, $field:ident) => {
        impl Keyed for $t {
            fn key(&self) -> String {
                self.$field.clone()
            }
        }
    };
}

keyed_by!(SpecCodeRow, id);
keyed_by!(TestbenchRow, id);
keyed_by!(PairRow, id);
keyed_by!(TaskResultRow, task);
keyed_by!(PairLogProbsRow, id);

impl Keyed for EvalRow {
    fn key(&self) -> String {
        format!("{}#{}", self.id, self.candidate_idx)
    }
}

/// A line that could not be used; the rest of the file is still read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedLine {
    pub line: usize,
    pub reason: String,
}

/// Reads one JSON object per line. Blank lines are ignored; malformed lines and
/// repeated keys are reported and skipped.
pub fn read_jsonl<T: DeserializeOwned + Keyed>(path: &Path) -> Result<(Vec<T>, Vec<SkippedLine>), CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<T>(&line) {
            Ok(row) => {
                if seen.insert(row.key()) {
                    rows.push(row);
                } else {
                    skipped.push(SkippedLine { line: i + 1, reason: format!("duplicate key {}", row.key()) });
                }
            }
            Err(e) => skipped.push(SkippedLine { line: i + 1, reason: e.to_string() }),
        }
    }
    for s in &skipped {
        log::error!("{}:{}: skipped: {}", path.display(), s.line, s.reason);
    }
    Ok((rows, skipped))
}

/// Keys already present in an output file, for append-and-skip resumption.
pub fn existing_keys<T: DeserializeOwned + Keyed>(path: &Path) -> Result<HashSet<String>, CliError> {
    if !path.exists() {
        return Ok(HashSet::new());
    }
    Ok(read_jsonl::<T>(path)?.0.into_iter().map(|r| r.key()).collect())
}

/// Single writer for one output file.
pub struct JsonlWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl JsonlWriter {
    pub fn create(path: &Path, append: bool) -> Result<Self, CliError> {
        let file = if append { OpenOptions::new().create(true).append(true).open(path) } else { File::create(path) }
            .map_err(|e| CliError::io(path, e))?;
        Ok(JsonlWriter { path: path.to_owned(), out: BufWriter::new(file) })
    }

    pub fn write<T: Serialize>(&mut self, row: &T) -> Result<(), CliError> {
        let line = serde_json::to_string(row).expect("row types always serialize");
        writeln!(self.out, "{line}").map_err(|e| CliError::io(&self.path, e))
    }

    /// Flushes buffered rows; called after each batch so partial runs survive.
    pub fn flush(&mut self) -> Result<(), CliError> {
        self.out.flush().map_err(|e| CliError::io(&self.path, e))
    }
}
