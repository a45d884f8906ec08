// SPDX-License-Identifier: Apache-2.0

use proptest::prelude::*;
use tbloop_core::llm::*;

#[test]
fn code_block_prefers_language_hint() {
    let r = "Intro\n```python\nprint(1)\n```\nthen\n```verilog\nmodule t; endmodule\n```\n";
    assert_eq!(extract_code_block(r, "verilog").unwrap(), "module t; endmodule");
    let r = "```systemverilog\nmodule s; endmodule\n```";
    assert_eq!(extract_code_block(r, "verilog").unwrap(), "module s; endmodule");
}

#[test]
fn code_block_fallbacks() {
    assert_eq!(extract_code_block("```\nmodule a; endmodule\n```", "verilog").unwrap(), "module a; endmodule");
    // Unclosed fence runs to the end.
    assert_eq!(extract_code_block("```verilog\nmodule b;\nendmodule", "verilog").unwrap(), "module b;\nendmodule");
    // No fences at all: the bare module span.
    let bare = extract_code_block("Sure.\nmodule c(input x);\nendmodule\nHope it helps.", "verilog").unwrap();
    assert_eq!(bare, "module c(input x);\nendmodule");
    assert_eq!(extract_code_block("no code here", "verilog"), Err(NoCodeFound));
    assert_eq!(extract_code_block("```verilog\n```", "verilog"), Err(NoCodeFound));
}

#[test]
fn json_points_three_and_cap() {
    let r = "Points:\n{\n 1: {\"Point\": \"reset\", \"Scenario\": \"s\", \"Application\": \"a\"},\n 2: {\"point\": \"shift\", \"scenario\": \"s2\", \"application\": \"a2\"},\n 3: {\"Point\": \"valid\", \"Scenario\": \"\", \"Application\": \"\"},\n}\nDone.";
    let p: Vec<FunctionPoint> = parse_json_points(r).unwrap();
    assert_eq!(p.len(), 3);
    assert_eq!(p[1].point, "shift");
    assert_eq!(p[1].application, "a2");

    let seven: Vec<String> = (1..=7)
        .rev()
        .map(|i| format!("\"{i}\": {{\"Title\": \"t{i}\", \"Objective\": \"\", \"Setup\": \"\", \"Coverage\": \"\"}}"))
        .collect();
    let t: Vec<TestCase> = parse_json_points(&format!("{{{}}}", seven.join(","))).unwrap();
    assert_eq!(t.iter().map(|c| c.title.as_str()).collect::<Vec<_>>(), ["t1", "t2", "t3", "t4", "t5"]);
}

#[test]
fn json_points_rejects_prose_and_bad_keys() {
    assert!(parse_json_points::<FunctionPoint>("I am unable to help.").is_err());
    assert!(parse_json_points::<FunctionPoint>("{\"a\": {\"Point\": \"x\"}}").is_err());
    assert!(parse_json_points::<FunctionPoint>("{1: {\"Point\": ").is_err());
}

#[test]
fn templates_render_deterministically() {
    for name in PromptName::ALL {
        let vars: Vec<(&str, String)> = name.placeholders().into_iter().map(|p| (p, format!("<{p} value>"))).collect();
        let refs: Vec<(&str, &str)> = vars.iter().map(|(k, v)| (*k, v.as_str())).collect();
        let a = render(name, &refs).unwrap();
        assert_eq!(a, render(name, &refs).unwrap());
        for (_, v) in &vars {
            assert!(a.contains(v.as_str()), "{name:?}");
        }
        if let Some(first) = name.placeholders().first() {
            let missing: Vec<(&str, &str)> = refs.iter().copied().filter(|(k, _)| k != first).collect();
            assert!(render(name, &missing).is_err());
        }
    }
}

#[test]
fn placeholder_values_are_not_rescanned() {
    let out = render(PromptName::GenerateSpecification, &[("Code", "{Specification}")]).unwrap();
    assert!(out.contains("{Specification}"));
}

#[test]
fn improve_template_threshold() {
    let out = render(
        PromptName::ImproveTestbench,
        &[("Threshold", "90"), ("CoverageReport", "R"), ("PreviousTestbench", "T")],
    )
    .unwrap();
    assert!(out.contains("threshold of 90"));
}

#[test]
fn retrying_backs_off_then_gives_up() {
    let mut waits = Vec::new();
    let chat = ScriptedChat::new([
        Err(ChatError::Transport("reset".into())),
        Err(ChatError::Transport("reset".into())),
        Ok("ok".into()),
    ]);
    let req = ChatRequest::new(vec![Message::user("hi")], 0.0, 16);
    let mut r = Retrying::new(chat, 2, |a| waits.push(a));
    assert_eq!(r.complete(&req).unwrap(), "ok");
    drop(r);
    assert_eq!(waits, [1, 2]);

    let chat = ScriptedChat::new([Err(ChatError::Transport("x".into())), Err(ChatError::Transport("y".into()))]);
    let mut r = Retrying::new(chat, 1, |_| {});
    assert_eq!(r.complete(&req), Err(ChatError::Transport("y".into())));

    // Rate limits are surfaced, never retried here.
    let chat = ScriptedChat::new([Err(ChatError::RateLimited { retry_after_secs: None }), Ok("late".into())]);
    let mut r = Retrying::new(chat, 5, |_| panic!("no retry expected"));
    assert!(matches!(r.complete(&req), Err(ChatError::RateLimited { .. })));
    assert_eq!(r.inner.remaining(), 1);
}

#[test]
fn invalid_requests_rejected() {
    let mut chat = ScriptedChat::from_texts(["x"]);
    assert!(chat.complete(&ChatRequest::new(vec![], 0.0, 16)).is_err());
    assert!(chat.complete(&ChatRequest::new(vec![Message::user("a")], -1.0, 16)).is_err());
    assert_eq!(chat.remaining(), 1);
}

proptest! {
    #[test]
    fn extracted_code_has_no_fences(parts in proptest::collection::vec("[a-z ;\n`]{0,20}", 0..6), fence in any::<bool>()) {
        let mut text = String::new();
        for (i, p) in parts.iter().enumerate() {
            text.push_str(p);
            if fence || i % 2 == 0 {
                text.push_str("\n```verilog\n");
            }
        }
        if let Ok(code) = extract_code_block(&text, "verilog") {
            prop_assert!(code.lines().all(|l| !l.trim_start().starts_with("```")));
            prop_assert!(!code.trim().is_empty());
        }
    }
}
