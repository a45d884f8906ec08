// SPDX-License-Identifier: Apache-2.0

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tbloop_core::llm::ScriptedChat;
use tbloop_core::preference::*;
use tbloop_core::sim::{synthetic_report, AbortReason, MockSim, MockStep, SimOutcome};

fn eval(code: &str, outcome: SimOutcome) -> CandidateEval {
    CandidateEval::from_outcome(code, outcome)
}

fn report(total: u32, failures: u32) -> SimOutcome {
    SimOutcome::Report(synthetic_report(total, failures))
}

fn compile_error() -> SimOutcome {
    SimOutcome::CompileError { log: "syntax error".into() }
}

fn abort() -> SimOutcome {
    SimOutcome::RuntimeAbort { reason: AbortReason::Timeout, log: String::new() }
}

fn random_eval(rng: &mut ChaCha8Rng, tag: usize) -> CandidateEval {
    let code = format!("module m{tag}; endmodule");
    match rng.random_range(0..10) {
        0..=1 => eval(&code, compile_error()),
        2 => eval(&code, abort()),
        _ => {
            let total = rng.random_range(1..6);
            eval(&code, report(total, rng.random_range(0..=total)))
        }
    }
}

#[test]
fn thousand_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut emitted = [0usize; 2];
    for i in 0..1000 {
        let a = random_eval(&mut rng, 2 * i);
        let b = random_eval(&mut rng, 2 * i + 1);

        let tb = build_pair_testbench("s", &a, &b);
        match &tb {
            PairDecision::Pair(p) => {
                emitted[0] += 1;
                assert!(a.compile_ok && b.compile_ok);
                assert!(!a.aborted() && !b.aborted());
                assert!(p.chosen_passed > p.rejected_passed);
                let winner = if a.passed > b.passed { &a } else { &b };
                assert_eq!(p.chosen, winner.code);
            }
            PairDecision::Discard(r) => {
                let expect = if !a.compile_ok || !b.compile_ok {
                    DiscardReason::CompileFailure
                } else if a.aborted() || b.aborted() {
                    DiscardReason::Aborted
                } else {
                    assert_eq!(a.passed, b.passed);
                    DiscardReason::Tie
                };
                assert_eq!(*r, expect);
            }
        }
        // Swapping the candidates never changes the decision.
        assert_eq!(build_pair_testbench("s", &b, &a), tb);

        let wf = build_pair_with_fails("s", &a, &b);
        if a.compile_ok != b.compile_ok {
            let p = wf.pair().expect("differing compile status must pair");
            assert_eq!(p.method, PairMethod::TestbenchWithFails);
            assert_eq!(p.chosen, if a.compile_ok { &a.code } else { &b.code }.clone());
            emitted[1] += 1;
        } else if let Some(p) = wf.pair() {
            assert!(a.compile_ok && b.compile_ok && p.chosen_passed > p.rejected_passed);
            emitted[1] += 1;
        }
    }
    // The generator should exercise both branches.
    assert!(emitted[0] > 100 && emitted[1] > emitted[0]);
}

#[test]
fn pair_accounting() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let n = rng.random_range(2..6);
        let evals: Vec<CandidateEval> = (0..n).map(|i| random_eval(&mut rng, i)).collect();
        let cap = rng.random_range(0..4);
        let ds = pairs_for_spec(PairMethod::Testbench, "s", "", &evals, cap);
        let pairs = ds.iter().filter(|d| d.pair().is_some()).count();
        let discards = ds.len() - pairs;
        let all = pairs_for_spec(PairMethod::Testbench, "s", "", &evals, usize::MAX);
        let possible = all.iter().filter(|d| d.pair().is_some()).count();
        assert_eq!(pairs, possible.min(cap));
        assert_eq!(discards, all.len() - possible);
        assert_eq!(all.len(), n * (n - 1) / 2);
    }
}

#[test]
fn bleu_pair_fixture() {
    let reference = "module add(input [3:0] a, input [3:0] b, output [4:0] y);\n  assign y = a + b;\nendmodule";
    let close = "module add(input [3:0] a, input [3:0] b, output [4:0] y);\n  assign y = a - b;\nendmodule";
    let far = "module add(input [3:0] p, input [3:0] q, output [4:0] r);\n  assign r = {1'b0, p} ^ q;\nendmodule";
    let a = eval(far, report(3, 0));
    let b = eval(close, report(3, 3));
    let d = build_pair(PairMethod::Bleu, "spec", reference, &a, &b);
    let p = d.pair().unwrap();
    // Similarity ignores test results.
    assert_eq!((p.chosen.as_str(), p.rejected.as_str()), (close, far));
    assert_eq!(p.method, PairMethod::Bleu);
    for m in [PairMethod::Ast, PairMethod::Dfg] {
        let d = build_pair(m, "spec", reference, &a, &b);
        assert!(matches!(d, PairDecision::Pair(_) | PairDecision::Discard(DiscardReason::Tie)), "{m}");
    }
    let broken = eval("module (", report(3, 0));
    assert_eq!(build_pair(PairMethod::Ast, "s", reference, &broken, &b), PairDecision::Discard(DiscardReason::Parse));
}

#[test]
fn evaluation_and_sampling() {
    let mut sim = MockSim::new(vec![MockStep::report(4, 1)]).unwrap();
    let e = evaluate_candidate("module x; endmodule", "tb", &mut sim).unwrap();
    assert_eq!((e.compile_ok, e.passed, e.total, e.status()), (true, 3, 4, "fail"));
    assert!((ppo_reward(&e) - 0.75).abs() < 1e-15);
    let e = evaluate_candidate("   ", "tb", &mut sim).unwrap();
    assert!(!e.compile_ok);
    assert_eq!(sim.calls(), 1);

    let mut chat = ScriptedChat::from_texts(["```verilog\nmodule a; endmodule\n```", "sorry"]);
    let params = SamplingParams::default();
    let got = sample_candidates("spec", &params, &mut chat).unwrap();
    assert_eq!(got, [Some("module a; endmodule".to_string()), None]);
    let req = &chat.requests[0];
    assert_eq!((req.temperature, req.top_p, req.top_k), (0.8, Some(0.95), Some(50)));
    assert_eq!(chat.requests[0], chat.requests[1]);
}

#[test]
fn method_names_round_trip() {
    for m in PairMethod::ALL {
        assert_eq!(PairMethod::parse(m.as_str()), Some(m));
    }
    assert_eq!(PairMethod::parse("tb"), None);
}

#[test]
fn code_line_count() {
    let code = "// header\nmodule a; /* c */\n\n/* multi\n line */\n  assign x = 1; // tail\nendmodule\n";
    assert_eq!(count_code_lines(code), 3);
}
