// SPDX-License-Identifier: Apache-2.0

//! BLEU, AST-signature and dataflow-graph similarity between two modules.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use crate::verilog::{AstNode, Dfg, NodeKind, Token, TokenKind};

/// Number of child levels folded into an AST signature.
pub const SIGNATURE_DEPTH: usize = 1;

/// Largest n-gram order used by [`bleu`].
pub const BLEU_MAX_N: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Bleu,
    Ast,
    Dfg,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Bleu => "bleu",
            Method::Ast => "ast",
            Method::Dfg => "dfg",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "bleu" => Some(Method::Bleu),
            "ast" => Some(Method::Ast),
            "dfg" => Some(Method::Dfg),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityScore {
    pub method: Method,
    /// In `[0, 1]`.
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimilarityError {
    EmptyInput,
}

impl fmt::Display for SimilarityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimilarityError::EmptyInput => f.write_str("empty token list"),
        }
    }
}

impl core::error::Error for SimilarityError {}

type Gram<'a> = Vec<(TokenKind, &'a str)>;

fn ngram_counts(tokens: &[Token], n: usize) -> BTreeMap<Gram<'_>, usize> {
    let mut counts = BTreeMap::new();
    for w in tokens.windows(n) {
        let g: Gram<'_> = w.iter().map(|t| (t.kind, t.text.as_str())).collect();
        *counts.entry(g).or_insert(0) += 1;
    }
    counts
}

/// Clipped n-gram precision as (matches, candidate n-gram count).
pub fn modified_precision(candidate: &[Token], reference: &[Token], n: usize) -> (usize, usize) {
    let cand = ngram_counts(candidate, n);
    let refc = ngram_counts(reference, n);
    let total = cand.values().sum();
    let matched = cand.iter().map(|(g, &c)| c.min(refc.get(g).copied().unwrap_or(0))).sum();
    (matched, total)
}

/// Sentence BLEU with uniform weights over 1..=4-grams and the standard
/// brevity penalty. A zero precision at any order yields 0 (no smoothing).
pub fn bleu(candidate: &[Token], reference: &[Token]) -> Result<SimilarityScore, SimilarityError> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(SimilarityError::EmptyInput);
    }
    let mut log_sum = 0.0;
    for n in 1..=BLEU_MAX_N {
        let (m, t) = modified_precision(candidate, reference, n);
        if m == 0 || t == 0 {
            return Ok(SimilarityScore { method: Method::Bleu, value: 0.0 });
        }
        log_sum += libm::log(m as f64 / t as f64);
    }
    let c = candidate.len() as f64;
    let r = reference.len() as f64;
    let bp = if c > r { 1.0 } else { libm::exp(1.0 - r / c) };
    let value = (bp * libm::exp(log_sum / BLEU_MAX_N as f64)).clamp(0.0, 1.0);
    Ok(SimilarityScore { method: Method::Bleu, value })
}

/// Structural signature of a node: its kind and, down to `depth` levels,
/// the signatures of its children. Labels are not part of it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Signature {
    pub kind: NodeKind,
    pub children: Vec<Signature>,
}

pub fn signature(node: &AstNode, depth: usize) -> Signature {
    let children =
        if depth == 0 { Vec::new() } else { node.children.iter().map(|c| signature(c, depth - 1)).collect() };
    Signature { kind: node.kind, children }
}

/// Multiset of depth-[`SIGNATURE_DEPTH`] signatures over every node.
pub fn signature_counts(ast: &AstNode) -> BTreeMap<Signature, usize> {
    let mut counts = BTreeMap::new();
    ast.walk(&mut |n| {
        *counts.entry(signature(n, SIGNATURE_DEPTH)).or_insert(0) += 1;
    });
    counts
}

fn multiset_jaccard<K: Ord>(a: &BTreeMap<K, usize>, b: &BTreeMap<K, usize>) -> f64 {
    let mut inter = 0usize;
    let mut union = 0usize;
    for (k, &x) in a {
        let y = b.get(k).copied().unwrap_or(0);
        inter += x.min(y);
        union += x.max(y);
    }
    union += b.iter().filter(|(k, _)| !a.contains_key(*k)).map(|(_, &y)| y).sum::<usize>();
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn ast_similarity(candidate: &AstNode, reference: &AstNode) -> SimilarityScore {
    let value = multiset_jaccard(&signature_counts(candidate), &signature_counts(reference));
    SimilarityScore { method: Method::Ast, value }
}

/// Jaccard index of the two edge sets; two empty graphs score 1.
pub fn dfg_similarity(candidate: &Dfg, reference: &Dfg) -> SimilarityScore {
    let union = candidate.union_len(reference);
    let value = if union == 0 { 1.0 } else { candidate.intersection_len(reference) as f64 / union as f64 };
    SimilarityScore { method: Method::Dfg, value }
}
