// SPDX-License-Identifier: Apache-2.0

//! Scripted-backend fixtures shared by the integration tests.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use serde_json::{json, Value};

pub fn points(n: usize) -> String {
    let body: Vec<String> = (1..=n)
        .map(|i| format!("\"{i}\": {{\"Point\": \"p{i}\", \"Scenario\": \"s{i}\", \"Application\": \"a{i}\"}}"))
        .collect();
    format!("{{{}}}", body.join(", "))
}

pub fn cases(n: usize) -> String {
    let body: Vec<String> = (1..=n)
        .map(|i| {
            format!("\"{i}\": {{\"Title\": \"t{i}\", \"Objective\": \"o\", \"Setup\": \"s\", \"Coverage\": \"c\"}}")
        })
        .collect();
    format!("{{{}}}", body.join(", "))
}

/// A testbench reply with the full reporting scaffold.
pub fn tb_reply(tag: &str) -> String {
    format!(
        "```verilog\nmodule testbench; // {tag}\ninteger error_count = 0;\ninitial begin\n  $display(\"===========TestCases===========\");\n  $display(\"Test Case 1. Expected y: 1\");\n  $display(\"Test Case 1. Actual y: %d\", 1);\n  $display(\"===========End===========\");\n  if (error_count == 0) $display(\"Your Design Passed\");\n  else $display(\"Test with %d failures\", error_count);\n  $finish;\nend\nendmodule\n```"
    )
}

pub fn code_reply(body: &str) -> String {
    format!("Here is the design.\n```verilog\n{body}\n```")
}

pub fn and_module(name: &str) -> String {
    format!("module {name}(input a, input b, output y);\n  assign y = a & b;\nendmodule")
}

pub fn spec_row(id: &str) -> Value {
    json!({"id": id, "spec": format!("Spec for {id}: y = a & b."), "code": and_module(id)})
}

/// Script entry for a row that passes every stage on the first try.
pub fn green_pipeline(tag: &str) -> Value {
    json!({
        "llm": [{"reply": points(3)}, {"reply": cases(5)}, {"reply": tb_reply(tag)}],
        "sim": [{"compile": {"ok": true}}, {"coverage": {"total": 20, "covered": 19}}, {"report": {"total": 5, "failures": 0}}],
    })
}

/// Script entry whose three draft compiles all fail.
pub fn failing_draft(tag: &str) -> Value {
    json!({
        "llm": [{"reply": points(3)}, {"reply": cases(5)}, {"reply": tb_reply(tag)}, {"reply": tb_reply(tag)}, {"reply": tb_reply(tag)}],
        "sim": [{"compile": {"error": "e1"}}, {"compile": {"error": "e2"}}, {"compile": {"error": "e3"}}],
    })
}

/// Candidate sampling for `collect-pairs`: each entry is (failures of 5, or None for a compile error).
pub fn candidates(id: &str, outcomes: &[Option<u32>]) -> Value {
    let llm: Vec<Value> = outcomes
        .iter()
        .enumerate()
        .map(|(i, _)| json!({"reply": code_reply(&and_module(&format!("{id}_c{i}")))}))
        .collect();
    let sim: Vec<Value> = outcomes
        .iter()
        .map(|o| match o {
            Some(f) => json!({"report": {"total": 5, "failures": f}}),
            None => json!({"run": {"compile_failed": "syntax error"}}),
        })
        .collect();
    json!({"llm": llm, "sim": sim})
}

pub fn write_jsonl(path: &Path, rows: &[Value]) {
    let text: String = rows.iter().map(|r| format!("{r}\n")).collect();
    std::fs::write(path, text).unwrap();
}

pub fn write_json(path: &Path, v: &Value) {
    std::fs::write(path, serde_json::to_string_pretty(v).unwrap()).unwrap();
}

/// Writes a mock-backed config referring to `script` and returns its path.
pub fn mock_config(dir: &Path, name: &str, script: &str, extra: &str) -> PathBuf {
    let path = dir.join(name);
    let text = format!(
        "mock_script = \"{script}\"\n{extra}\n[llm]\nprovider = \"mock\"\n\n[simulator]\nprovider = \"mock\"\n"
    );
    std::fs::write(&path, text).unwrap();
    path
}

/// Runs the CLI in-process and returns (exit code, stdout).
pub fn cli(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut argv = vec!["tbloop"];
    argv.extend_from_slice(args);
    let code = tbloop::cli::run(argv, &mut out);
    (code, String::from_utf8(out).unwrap())
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}
