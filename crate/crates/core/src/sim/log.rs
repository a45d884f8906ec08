// SPDX-License-Identifier: Apache-2.0

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use super::SimParseError;

pub const PASS_MARKER: &str = "Your Design Passed";
pub const CASES_BANNER: &str = "===========TestCases===========";
pub const END_BANNER: &str = "===========End===========";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseLine {
    pub index: u32,
    pub expected: String,
    pub actual: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimReport {
    pub total_cases: u32,
    pub failures: u32,
    pub cases: Vec<CaseLine>,
    /// Set when the log claimed more failures than it showed cases.
    pub inconsistent: bool,
}

impl SimReport {
    pub fn passed(&self) -> u32 {
        self.total_cases.saturating_sub(self.failures)
    }
}

fn leading_number(s: &str) -> Option<(u32, &str)> {
    let end = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
    if end == 0 {
        return None;
    }
    Some((s[..end].parse().ok()?, &s[end..]))
}

/// `Test Case N.` followed by the rest of the line.
fn case_line(line: &str) -> Option<(u32, &str)> {
    let rest = line.trim_start().strip_prefix("Test Case ")?;
    let (n, rest) = leading_number(rest)?;
    let rest = rest.strip_prefix('.')?;
    Some((n, rest))
}

/// `Test with N failure(s)` or `Test completed with N failure(s)`.
fn failure_line(line: &str) -> Option<u32> {
    let t = line.trim_start();
    let rest = t.strip_prefix("Test with ").or_else(|| t.strip_prefix("Test completed with "))?;
    let (n, rest) = leading_number(rest.trim_start())?;
    rest.trim_start().starts_with("failure").then_some(n)
}

/// Parses the display format used by generated testbenches.
pub fn parse_sim_log(stdout: &str) -> Result<SimReport, SimParseError> {
    let mut cases: BTreeMap<u32, CaseLine> = BTreeMap::new();
    let mut total = 0u32;
    let mut verdict = None;
    for line in stdout.lines() {
        if let Some((n, rest)) = case_line(line) {
            total = total.max(n);
            let entry =
                cases.entry(n).or_insert_with(|| CaseLine { index: n, expected: String::new(), actual: String::new() });
            let rest = rest.strip_prefix(' ').unwrap_or(rest);
            if let Some(e) = rest.strip_prefix("Expected") {
                entry.expected = e.strip_prefix(' ').unwrap_or(e).trim_end().into();
            } else if let Some(a) = rest.strip_prefix("Actual") {
                entry.actual = a.strip_prefix(' ').unwrap_or(a).trim_end().into();
            }
        } else if let Some(k) = failure_line(line) {
            verdict = Some(k);
        } else if line.contains(PASS_MARKER) {
            verdict = Some(0);
        }
    }
    let failures = verdict.ok_or(SimParseError::UnparseableLog)?;
    let inconsistent = failures > total;
    Ok(SimReport { total_cases: total.max(failures), failures, cases: cases.into_values().collect(), inconsistent })
}

/// Inverse of [`parse_sim_log`] for consistent reports.
pub fn render_sim_log(report: &SimReport) -> String {
    let mut s = String::new();
    s.push_str(CASES_BANNER);
    s.push('\n');
    for c in &report.cases {
        let _ = writeln!(s, "Test Case {}. Expected {}", c.index, c.expected);
        let _ = writeln!(s, "Test Case {}. Actual {}", c.index, c.actual);
    }
    s.push_str(END_BANNER);
    s.push('\n');
    match report.failures {
        0 => s.push_str(PASS_MARKER),
        1 => s.push_str("Test with 1 failure"),
        n => {
            let _ = write!(s, "Test with {n} failures");
        }
    }
    s.push('\n');
    s
}

/// A consistent report with `total` cases of which the last `failures` mismatch.
pub fn synthetic_report(total: u32, failures: u32) -> SimReport {
    let cases = (1..=total)
        .map(|i| {
            let bad = i > total.saturating_sub(failures);
            CaseLine {
                index: i,
                expected: alloc::format!("out: {i}"),
                actual: alloc::format!("out: {}", if bad { i + 1 } else { i }),
            }
        })
        .collect();
    SimReport { total_cases: total.max(failures), failures, cases, inconsistent: failures > total }
}
