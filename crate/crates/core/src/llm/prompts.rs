// SPDX-License-Identifier: Apache-2.0

//! Versioned prompt templates with `{Name}` placeholders.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub const TEMPLATE_VERSION: &str = "v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PromptName {
    GenerateSpecification,
    GenerateFunctionPoints,
    GenerateTestCases,
    DraftTestbench,
    ImproveTestbench,
    RectifyTestbench,
    /// Specification and DUT preamble for stages that open a fresh conversation.
    Context,
    CompileFeedback,
    ScaffoldFeedback,
    JsonRetry,
    /// Candidate generation from a specification.
    GenerateCode,
}

impl PromptName {
    pub const ALL: [PromptName; 11] = [
        PromptName::GenerateSpecification,
        PromptName::GenerateFunctionPoints,
        PromptName::GenerateTestCases,
        PromptName::DraftTestbench,
        PromptName::ImproveTestbench,
        PromptName::RectifyTestbench,
        PromptName::Context,
        PromptName::CompileFeedback,
        PromptName::ScaffoldFeedback,
        PromptName::JsonRetry,
        PromptName::GenerateCode,
    ];

    pub fn body(self) -> &'static str {
        match self {
            PromptName::GenerateSpecification => {
                include_str!("../../prompts/v1/generate_specification.txt")
            }
            PromptName::GenerateFunctionPoints => {
                include_str!("../../prompts/v1/generate_function_points.txt")
            }
            PromptName::GenerateTestCases => {
                include_str!("../../prompts/v1/generate_test_cases.txt")
            }
            PromptName::DraftTestbench => include_str!("../../prompts/v1/draft_testbench.txt"),
            PromptName::ImproveTestbench => include_str!("../../prompts/v1/improve_testbench.txt"),
            PromptName::RectifyTestbench => include_str!("../../prompts/v1/rectify_testbench.txt"),
            PromptName::Context => include_str!("../../prompts/v1/context.txt"),
            PromptName::CompileFeedback => include_str!("../../prompts/v1/compile_feedback.txt"),
            PromptName::ScaffoldFeedback => include_str!("../../prompts/v1/scaffold_feedback.txt"),
            PromptName::JsonRetry => include_str!("../../prompts/v1/json_retry.txt"),
            PromptName::GenerateCode => include_str!("../../prompts/v1/generate_code.txt"),
        }
    }

    /// Placeholders the body requires, in order of first appearance.
    pub fn placeholders(self) -> Vec<&'static str> {
        let mut out: Vec<&'static str> = Vec::new();
        for (_, name, _) in placeholder_spans(self.body()) {
            if !out.contains(&name) {
                out.push(name);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnfilledPlaceholder {
    pub template: PromptName,
    pub placeholder: String,
}

impl fmt::Display for UnfilledPlaceholder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "template {:?} needs a value for {{{}}}", self.template, self.placeholder)
    }
}

impl core::error::Error for UnfilledPlaceholder {}

/// `(start, name, end)` byte spans of `{Name}` tokens where Name is ASCII letters.
fn placeholder_spans(body: &str) -> impl Iterator<Item = (usize, &str, usize)> {
    let bytes = body.as_bytes();
    let mut i = 0;
    core::iter::from_fn(move || {
        while i < bytes.len() {
            if bytes[i] == b'{' {
                let start = i;
                let mut j = i + 1;
                while j < bytes.len() && bytes[j].is_ascii_alphabetic() {
                    j += 1;
                }
                if j > start + 1 && j < bytes.len() && bytes[j] == b'}' {
                    i = j + 1;
                    return Some((start, &body[start + 1..j], j + 1));
                }
            }
            i += 1;
        }
        None
    })
}

/// Substitutes every placeholder in one pass; values are not re-scanned.
pub fn render(template: PromptName, vars: &[(&str, &str)]) -> Result<String, UnfilledPlaceholder> {
    let body = template.body();
    let mut out = String::with_capacity(body.len());
    let mut last = 0;
    for (start, name, end) in placeholder_spans(body) {
        let value = vars
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| UnfilledPlaceholder { template, placeholder: name.into() })?;
        out.push_str(&body[last..start]);
        out.push_str(value);
        last = end;
    }
    out.push_str(&body[last..]);
    Ok(String::from(out.trim_end()))
}

/// Threshold as written in the improve prompt: `90` rather than `90.0`.
pub fn format_threshold(t: f64) -> String {
    if libm::trunc(t) == t && libm::fabs(t) < 1e15 {
        alloc::format!("{}", t as i64)
    } else {
        alloc::format!("{t}")
    }
}
