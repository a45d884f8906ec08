// SPDX-License-Identifier: Apache-2.0

//! pass@k, perplexity and the perplexity/correctness alignment rate.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskResults {
    pub task: String,
    pub n: u32,
    pub c_syntax: u32,
    pub c_function: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PassMode {
    /// Counted when the code compiles.
    Syntax,
    /// Counted when the code passes the testbench.
    Function,
}

impl PassMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PassMode::Syntax => "syntax",
            PassMode::Function => "function",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "syntax" => Some(PassMode::Syntax),
            "function" => Some(PassMode::Function),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MetricsError {
    EmptyInput,
    InvalidK,
    KExceedsN { task: String, k: u32, n: u32 },
    InvalidCounts { task: String },
    PositiveLogProb,
    TiedPassCounts { index: usize },
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::EmptyInput => f.write_str("empty input"),
            MetricsError::InvalidK => f.write_str("k must be at least 1"),
            MetricsError::KExceedsN { task, k, n } => {
                write!(f, "k = {k} exceeds n = {n} for task {task}")
            }
            MetricsError::InvalidCounts { task } => {
                write!(f, "task {task}: counts must satisfy c_function <= c_syntax <= n")
            }
            MetricsError::PositiveLogProb => f.write_str("log-probabilities must be finite and <= 0"),
            MetricsError::TiedPassCounts { index } => {
                write!(f, "pair {index} has equal pass counts")
            }
        }
    }
}

impl core::error::Error for MetricsError {}

/// Unbiased estimate 1 - C(n-c, k) / C(n, k) for one task, as a running product.
pub fn pass_at_k_single(n: u32, c: u32, k: u32) -> f64 {
    debug_assert!(k >= 1 && k <= n && c <= n);
    if k == 1 {
        return c as f64 / n as f64;
    }
    if n - c < k {
        return 1.0;
    }
    let mut miss = 1.0;
    for j in 0..k {
        miss *= (n - c - j) as f64 / (n - j) as f64;
    }
    1.0 - miss
}

/// Mean pass@k over tasks.
pub fn pass_at_k(results: &[TaskResults], k: u32, mode: PassMode) -> Result<f64, MetricsError> {
    if results.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if k == 0 {
        return Err(MetricsError::InvalidK);
    }
    let mut sum = 0.0;
    for t in results {
        if t.c_function > t.c_syntax || t.c_syntax > t.n {
            return Err(MetricsError::InvalidCounts { task: t.task.clone() });
        }
        if k > t.n {
            return Err(MetricsError::KExceedsN { task: t.task.clone(), k, n: t.n });
        }
        let c = match mode {
            PassMode::Syntax => t.c_syntax,
            PassMode::Function => t.c_function,
        };
        sum += pass_at_k_single(t.n, c, k);
    }
    Ok(sum / results.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceLogProb {
    token_logprobs: Vec<f64>,
}

impl SequenceLogProb {
    pub fn new(token_logprobs: Vec<f64>) -> Result<Self, MetricsError> {
        if token_logprobs.is_empty() {
            return Err(MetricsError::EmptyInput);
        }
        if token_logprobs.iter().any(|l| !(l.is_finite() && *l <= 0.0)) {
            return Err(MetricsError::PositiveLogProb);
        }
        Ok(SequenceLogProb { token_logprobs })
    }

    pub fn token_logprobs(&self) -> &[f64] {
        &self.token_logprobs
    }

    pub fn len(&self) -> usize {
        self.token_logprobs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// `exp(-mean log p)`.
pub fn perplexity(seq: &SequenceLogProb) -> f64 {
    let sum: f64 = seq.token_logprobs.iter().sum();
    libm::exp(-sum / seq.len() as f64)
}

/// One code pair: perplexity and passed test cases of each side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PplPair {
    pub ppl_a: f64,
    pub passed_a: u32,
    pub ppl_b: f64,
    pub passed_b: u32,
}

/// Fraction of pairs whose better-passing code also has strictly lower perplexity.
pub fn ppl_alignment_rate(pairs: &[PplPair]) -> Result<f64, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut aligned = 0usize;
    for (i, p) in pairs.iter().enumerate() {
        let (better, worse) = match p.passed_a.cmp(&p.passed_b) {
            core::cmp::Ordering::Greater => (p.ppl_a, p.ppl_b),
            core::cmp::Ordering::Less => (p.ppl_b, p.ppl_a),
            core::cmp::Ordering::Equal => return Err(MetricsError::TiedPassCounts { index: i }),
        };
        if better < worse {
            aligned += 1;
        }
    }
    Ok(aligned as f64 / pairs.len() as f64)
}
