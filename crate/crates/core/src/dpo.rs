// SPDX-License-Identifier: Apache-2.0

//! DPO loss with its analytic gradient, token-mean SFT loss, and a tabular
//! softmax policy small enough to check gradients by finite differences.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Default inverse temperature of the preference loss.
pub const DEFAULT_BETA: f64 = 0.1;

/// Central-difference step for [`dpo_policy_grad_check`].
pub const FD_STEP: f64 = 1e-5;

/// Denominator floor of the relative error in [`dpo_policy_grad_check`].
pub const REL_ERROR_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairLogProbs {
    pub policy_chosen: f64,
    pub ref_chosen: f64,
    pub policy_rejected: f64,
    pub ref_rejected: f64,
}

impl PairLogProbs {
    /// `(policy_chosen - ref_chosen) - (policy_rejected - ref_rejected)`.
    pub fn margin(&self) -> f64 {
        (self.policy_chosen - self.ref_chosen) - (self.policy_rejected - self.ref_rejected)
    }

    fn is_finite(&self) -> bool {
        [self.policy_chosen, self.ref_chosen, self.policy_rejected, self.ref_rejected].iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DpoError {
    NonPositiveBeta,
    EmptyInput,
    NonFinite,
    IndexOutOfRange { context: usize, token: usize },
    LengthMismatch,
    Shape,
}

impl fmt::Display for DpoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DpoError::NonPositiveBeta => f.write_str("beta must be positive"),
            DpoError::EmptyInput => f.write_str("empty input"),
            DpoError::NonFinite => f.write_str("non-finite value"),
            DpoError::IndexOutOfRange { context, token } => {
                write!(f, "index out of range: context {context}, token {token}")
            }
            DpoError::LengthMismatch => f.write_str("context and token sequences differ in length"),
            DpoError::Shape => f.write_str("logit table does not match contexts x vocab"),
        }
    }
}

impl core::error::Error for DpoError {}

/// `log(sigmoid(x))` without overflow for large `|x|`.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -libm::log1p(libm::exp(-x))
    } else {
        x - libm::log1p(libm::exp(x))
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

fn check_beta(beta: f64) -> Result<(), DpoError> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(DpoError::NonPositiveBeta)
    }
}

pub fn dpo_pair_loss(pair: &PairLogProbs, beta: f64) -> f64 {
    -log_sigmoid(beta * pair.margin())
}

/// Mean loss over the batch.
pub fn dpo_loss(batch: &[PairLogProbs], beta: f64) -> Result<f64, DpoError> {
    check_beta(beta)?;
    if batch.is_empty() {
        return Err(DpoError::EmptyInput);
    }
    if batch.iter().any(|p| !p.is_finite()) {
        return Err(DpoError::NonFinite);
    }
    Ok(batch.iter().map(|p| dpo_pair_loss(p, beta)).sum::<f64>() / batch.len() as f64)
}

/// `(dL/d policy_chosen, dL/d policy_rejected)` for one pair; the reference
/// terms carry no gradient.
pub fn dpo_grad(pair: &PairLogProbs, beta: f64) -> (f64, f64) {
    let s = beta * sigmoid(-beta * pair.margin());
    (-s, s)
}

/// Softmax policy over `vocab` tokens for each of `contexts` contexts.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    contexts: usize,
    vocab: usize,
    /// Row-major `contexts x vocab`.
    logits: Vec<f64>,
}

impl TabularPolicy {
    pub fn new(contexts: usize, vocab: usize, logits: Vec<f64>) -> Result<Self, DpoError> {
        if contexts == 0 || vocab == 0 || logits.len() != contexts * vocab {
            return Err(DpoError::Shape);
        }
        if logits.iter().any(|l| !l.is_finite()) {
            return Err(DpoError::NonFinite);
        }
        Ok(TabularPolicy { contexts, vocab, logits })
    }

    pub fn uniform(contexts: usize, vocab: usize) -> Result<Self, DpoError> {
        Self::new(contexts, vocab, vec![0.0; contexts * vocab])
    }

    pub fn contexts(&self) -> usize {
        self.contexts
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn logits_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }

    fn row(&self, context: usize) -> &[f64] {
        &self.logits[context * self.vocab..(context + 1) * self.vocab]
    }

    pub fn log_softmax(&self, context: usize) -> Vec<f64> {
        let row = self.row(context);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + libm::log(row.iter().map(|l| libm::exp(l - max)).sum::<f64>());
        row.iter().map(|l| l - lse).collect()
    }

    pub fn softmax(&self, context: usize) -> Vec<f64> {
        self.log_softmax(context).into_iter().map(libm::exp).collect()
    }

    fn check(&self, seq: &Sequence) -> Result<(), DpoError> {
        if seq.contexts.len() != seq.tokens.len() {
            return Err(DpoError::LengthMismatch);
        }
        for (&c, &t) in seq.contexts.iter().zip(&seq.tokens) {
            if c >= self.contexts || t >= self.vocab {
                return Err(DpoError::IndexOutOfRange { context: c, token: t });
            }
        }
        Ok(())
    }
}

/// A token sequence with the context id in force at each position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sequence {
    pub contexts: Vec<usize>,
    pub tokens: Vec<usize>,
}

impl Sequence {
    pub fn new(contexts: Vec<usize>, tokens: Vec<usize>) -> Self {
        Sequence { contexts, tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Per-position `log p(token | context)`.
pub fn token_logprobs(policy: &TabularPolicy, seq: &Sequence) -> Result<Vec<f64>, DpoError> {
    policy.check(seq)?;
    Ok(seq.contexts.iter().zip(&seq.tokens).map(|(&c, &t)| policy.log_softmax(c)[t]).collect())
}

/// Summed log-probability of the sequence.
pub fn sequence_logprob(policy: &TabularPolicy, seq: &Sequence) -> Result<f64, DpoError> {
    Ok(token_logprobs(policy, seq)?.iter().sum())
}

/// Gradient of [`sequence_logprob`] with respect to every logit.
pub fn sequence_logprob_grad(policy: &TabularPolicy, seq: &Sequence) -> Result<Vec<f64>, DpoError> {
    policy.check(seq)?;
    let mut g = vec![0.0; policy.logits.len()];
    for (&c, &t) in seq.contexts.iter().zip(&seq.tokens) {
        let p = policy.softmax(c);
        let row = &mut g[c * policy.vocab..(c + 1) * policy.vocab];
        for (j, pj) in p.iter().enumerate() {
            row[j] -= pj;
        }
        row[t] += 1.0;
    }
    Ok(g)
}

pub fn pair_logprobs(
    policy: &TabularPolicy,
    reference: &TabularPolicy,
    chosen: &Sequence,
    rejected: &Sequence,
) -> Result<PairLogProbs, DpoError> {
    Ok(PairLogProbs {
        policy_chosen: sequence_logprob(policy, chosen)?,
        ref_chosen: sequence_logprob(reference, chosen)?,
        policy_rejected: sequence_logprob(policy, rejected)?,
        ref_rejected: sequence_logprob(reference, rejected)?,
    })
}

/// Analytic gradient of the pair loss with respect to the policy logits.
pub fn dpo_policy_grad(
    policy: &TabularPolicy,
    reference: &TabularPolicy,
    chosen: &Sequence,
    rejected: &Sequence,
    beta: f64,
) -> Result<Vec<f64>, DpoError> {
    check_beta(beta)?;
    let (gc, gr) = dpo_grad(&pair_logprobs(policy, reference, chosen, rejected)?, beta);
    let dc = sequence_logprob_grad(policy, chosen)?;
    let dr = sequence_logprob_grad(policy, rejected)?;
    Ok(dc.iter().zip(&dr).map(|(a, b)| gc * a + gr * b).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub loss: f64,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    /// `max |a - f| / max(|a|, |f|, REL_ERROR_FLOOR)`.
    pub max_rel_error: f64,
}

/// Compares [`dpo_policy_grad`] with central finite differences over every logit.
pub fn dpo_policy_grad_check(
    policy: &TabularPolicy,
    reference: &TabularPolicy,
    chosen: &Sequence,
    rejected: &Sequence,
    beta: f64,
) -> Result<GradCheck, DpoError> {
    let analytic = dpo_policy_grad(policy, reference, chosen, rejected, beta)?;
    let loss_at = |p: &TabularPolicy| -> Result<f64, DpoError> {
        Ok(dpo_pair_loss(&pair_logprobs(p, reference, chosen, rejected)?, beta))
    };
    let loss = loss_at(policy)?;
    let mut probe = policy.clone();
    let mut numeric = Vec::with_capacity(analytic.len());
    for i in 0..analytic.len() {
        let orig = probe.logits[i];
        probe.logits[i] = orig + FD_STEP;
        let up = loss_at(&probe)?;
        probe.logits[i] = orig - FD_STEP;
        let down = loss_at(&probe)?;
        probe.logits[i] = orig;
        numeric.push((up - down) / (2.0 * FD_STEP));
    }
    let max_rel_error = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, f)| libm::fabs(a - f) / libm::fabs(*a).max(libm::fabs(*f)).max(REL_ERROR_FLOOR))
        .fold(0.0, f64::max);
    Ok(GradCheck { loss, analytic, numeric, max_rel_error })
}

/// Negative log-likelihood per token over the dataset.
pub fn sft_loss(policy: &TabularPolicy, dataset: &[Sequence]) -> Result<f64, DpoError> {
    let mut sum = 0.0;
    let mut tokens = 0usize;
    for seq in dataset {
        sum += sequence_logprob(policy, seq)?;
        tokens += seq.len();
    }
    if tokens == 0 {
        return Err(DpoError::EmptyInput);
    }
    Ok(-sum / tokens as f64)
}
