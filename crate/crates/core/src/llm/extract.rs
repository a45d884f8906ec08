// SPDX-License-Identifier: Apache-2.0

//! Post-processing of chat replies.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoCodeFound;

impl fmt::Display for NoCodeFound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("no code found in response")
    }
}

impl core::error::Error for NoCodeFound {}

struct Fenced<'a> {
    info: &'a str,
    body: Vec<&'a str>,
}

fn fenced_blocks(text: &str) -> Vec<Fenced<'_>> {
    let mut blocks = Vec::new();
    let mut current: Option<Fenced<'_>> = None;
    for line in text.lines() {
        let t = line.trim_start();
        if let Some(rest) = t.strip_prefix("```") {
            match current.take() {
                Some(b) => blocks.push(b),
                None => current = Some(Fenced { info: rest.trim(), body: Vec::new() }),
            }
        } else if let Some(b) = current.as_mut() {
            b.body.push(line);
        }
    }
    // An unclosed fence runs to the end of the reply.
    blocks.extend(current);
    blocks
}

fn info_matches(info: &str, hint: &str) -> bool {
    let lang = info.split_whitespace().next().unwrap_or("");
    if lang.eq_ignore_ascii_case(hint) {
        return true;
    }
    hint.eq_ignore_ascii_case("verilog") && ["v", "sv", "systemverilog"].iter().any(|a| lang.eq_ignore_ascii_case(a))
}

fn trim_blank_lines(lines: &[&str]) -> String {
    let first = lines.iter().position(|l| !l.trim().is_empty());
    let last = lines.iter().rposition(|l| !l.trim().is_empty());
    match (first, last) {
        (Some(a), Some(b)) => {
            let mut s = lines[a..=b].join("\n");
            s.truncate(s.trim_end().len());
            s
        }
        _ => String::new(),
    }
}

fn is_word_at(text: &str, at: usize, word: &str) -> bool {
    let before = text[..at].chars().next_back();
    let after = text[at + word.len()..].chars().next();
    let ident = |c: char| c.is_ascii_alphanumeric() || c == '_' || c == '$';
    !before.is_some_and(ident) && !after.is_some_and(ident)
}

fn module_span(text: &str) -> Option<&str> {
    let start = text.match_indices("module").map(|(i, _)| i).find(|&i| is_word_at(text, i, "module"))?;
    let end =
        text.rmatch_indices("endmodule").map(|(i, _)| i).find(|&i| i > start && is_word_at(text, i, "endmodule"))?;
    Some(&text[start..end + "endmodule".len()])
}

/// Code from the first fenced block tagged `hint`, else the first non-empty
/// fenced block, else a bare `module ... endmodule` span.
pub fn extract_code_block(response: &str, hint: &str) -> Result<String, NoCodeFound> {
    let blocks: Vec<_> =
        fenced_blocks(response).into_iter().filter(|b| b.body.iter().any(|l| !l.trim().is_empty())).collect();
    if let Some(b) = blocks.iter().find(|b| info_matches(b.info, hint)).or(blocks.first()) {
        return Ok(trim_blank_lines(&b.body));
    }
    let span = module_span(response).ok_or(NoCodeFound)?;
    let lines: Vec<&str> = span.lines().collect();
    Ok(trim_blank_lines(&lines))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MalformedJson(pub String);

impl fmt::Display for MalformedJson {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "malformed JSON: {}", self.0)
    }
}

impl core::error::Error for MalformedJson {}

/// A record type carried in a `{1: {...}, 2: {...}}` reply.
pub trait PointRecord: Sized {
    /// At most this many records are kept.
    const CAP: usize;
    fn from_fields(get: &dyn Fn(&str) -> String) -> Self;
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FunctionPoint {
    pub point: String,
    pub scenario: String,
    pub application: String,
}

impl PointRecord for FunctionPoint {
    const CAP: usize = 3;
    fn from_fields(get: &dyn Fn(&str) -> String) -> Self {
        FunctionPoint { point: get("Point"), scenario: get("Scenario"), application: get("Application") }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TestCase {
    pub title: String,
    pub objective: String,
    pub setup: String,
    pub coverage: String,
}

impl PointRecord for TestCase {
    const CAP: usize = 5;
    fn from_fields(get: &dyn Fn(&str) -> String) -> Self {
        TestCase { title: get("Title"), objective: get("Objective"), setup: get("Setup"), coverage: get("Coverage") }
    }
}

/// Quotes bare object keys and drops trailing commas, leaving string contents alone.
fn relax_json(src: &str) -> String {
    let chars: Vec<char> = src.chars().collect();
    let mut out = String::with_capacity(src.len() + 16);
    let mut in_str = false;
    let mut escaped = false;
    let mut last_sig = '\0';
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if in_str {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_str = false;
                last_sig = '"';
            }
            i += 1;
            continue;
        }
        match c {
            '"' => {
                in_str = true;
                out.push(c);
            }
            ',' => {
                let next = chars[i + 1..].iter().find(|c| !c.is_whitespace());
                if !matches!(next, Some('}') | Some(']')) {
                    out.push(c);
                    last_sig = c;
                }
            }
            c if (c.is_ascii_alphanumeric() || c == '_') && matches!(last_sig, '{' | ',') => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                let next = chars[i..].iter().find(|c| !c.is_whitespace());
                if next == Some(&':') {
                    out.push('"');
                    out.push_str(&word);
                    out.push('"');
                } else {
                    out.push_str(&word);
                }
                last_sig = 'w';
                continue;
            }
            c => {
                out.push(c);
                if !c.is_whitespace() {
                    last_sig = c;
                }
            }
        }
        i += 1;
    }
    out
}

fn value_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => alloc::format!("{other}"),
    }
}

/// Parses a numbered JSON object of records from a reply that may carry
/// surrounding prose, bare numeric keys or trailing commas. Keeps at most
/// [`PointRecord::CAP`] records in key order.
pub fn parse_json_points<R: PointRecord>(response: &str) -> Result<Vec<R>, MalformedJson> {
    let open = response.find('{').ok_or_else(|| MalformedJson("no object".into()))?;
    let close = response.rfind('}').filter(|&c| c > open).ok_or_else(|| MalformedJson("no object".into()))?;
    let text = relax_json(&response[open..=close]);
    let value: Value = serde_json::from_str(&text).map_err(|e| MalformedJson(alloc::format!("{e}")))?;
    let Value::Object(map) = value else {
        return Err(MalformedJson("top level is not an object".into()));
    };
    let mut entries: Vec<(u64, Map<String, Value>)> = Vec::new();
    for (k, v) in map {
        let n: u64 = k.trim().parse().map_err(|_| MalformedJson(alloc::format!("key {k:?} is not a number")))?;
        let Value::Object(fields) = v else {
            return Err(MalformedJson(alloc::format!("entry {k} is not an object")));
        };
        entries.push((n, fields));
    }
    if entries.is_empty() {
        return Err(MalformedJson("empty object".into()));
    }
    entries.sort_by_key(|(n, _)| *n);
    Ok(entries
        .into_iter()
        .take(R::CAP)
        .map(|(_, fields)| {
            R::from_fields(&|name: &str| {
                fields
                    .iter()
                    .find(|(k, _)| k.eq_ignore_ascii_case(name))
                    .map(|(_, v)| value_text(v))
                    .unwrap_or_default()
            })
        })
        .collect())
}
