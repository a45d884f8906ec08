// SPDX-License-Identifier: Apache-2.0

//! Random tabular-policy instances for checking the DPO gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use tbloop_core::dpo::{dpo_policy_grad_check, DpoError, Sequence, TabularPolicy};

pub const MAX_CONTEXTS: usize = 5;
pub const MAX_VOCAB: usize = 8;
/// Acceptance bound on the maximum relative error.
pub const TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct Instance {
    pub policy: TabularPolicy,
    pub reference: TabularPolicy,
    pub chosen: Sequence,
    pub rejected: Sequence,
    pub beta: f64,
}

fn table(rng: &mut ChaCha8Rng, c: usize, v: usize) -> TabularPolicy {
    TabularPolicy::new(c, v, (0..c * v).map(|_| rng.random_range(-3.0..3.0)).collect()).expect("shape matches")
}

fn sequence(rng: &mut ChaCha8Rng, c: usize, v: usize) -> Sequence {
    let len = rng.random_range(1..=10);
    Sequence::new(
        (0..len).map(|_| rng.random_range(0..c)).collect(),
        (0..len).map(|_| rng.random_range(0..v)).collect(),
    )
}

/// Deterministic instance with up to 5 contexts and 8 tokens.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = rng.random_range(1..=MAX_CONTEXTS);
    let v = rng.random_range(2..=MAX_VOCAB);
    Instance {
        policy: table(&mut rng, c, v),
        reference: table(&mut rng, c, v),
        chosen: sequence(&mut rng, c, v),
        rejected: sequence(&mut rng, c, v),
        beta: rng.random_range(0.01..2.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub instances: usize,
    pub max_rel_error: f64,
    pub worst_seed: u64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Checks every seed; `beta` overrides the per-instance random value.
pub fn run_gradcheck(seeds: impl IntoIterator<Item = u64>, beta: Option<f64>) -> Result<GradcheckReport, DpoError> {
    let mut report =
        GradcheckReport { instances: 0, max_rel_error: 0.0, worst_seed: 0, tolerance: TOLERANCE, passed: true };
    for seed in seeds {
        let inst = random_instance(seed);
        let g = dpo_policy_grad_check(
            &inst.policy,
            &inst.reference,
            &inst.chosen,
            &inst.rejected,
            beta.unwrap_or(inst.beta),
        )?;
        report.instances += 1;
        if g.max_rel_error > report.max_rel_error || report.instances == 1 {
            report.max_rel_error = g.max_rel_error;
            report.worst_seed = seed;
        }
    }
    report.passed = report.instances > 0 && report.max_rel_error < TOLERANCE;
    Ok(report)
}
