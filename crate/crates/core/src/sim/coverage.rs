// SPDX-License-Identifier: Apache-2.0

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use super::SimParseError;

/// A per-construct row such as `CONT_ASSIGN 25 1 1 100.00`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageItem {
    pub kind: String,
    pub line: u32,
    pub total: u32,
    pub covered: u32,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub module_name: String,
    pub total_lines: u32,
    pub covered_lines: u32,
    pub percent: f64,
    pub items: Vec<CoverageItem>,
    /// `(line, covered)` for every annotated source line, in report order.
    pub line_flags: Vec<(u32, bool)>,
}

impl CoverageReport {
    pub fn uncovered_lines(&self) -> impl Iterator<Item = u32> + '_ {
        self.line_flags.iter().filter(|(_, c)| !c).map(|(l, _)| *l)
    }
}

fn hits(tok: &str) -> Option<(u32, u32)> {
    let (a, b) = tok.split_once('/')?;
    Some((a.parse().ok()?, b.parse().ok()?))
}

fn is_row_kind(tok: &str) -> bool {
    !tok.is_empty() && tok.chars().all(|c| c.is_ascii_uppercase() || c == '_')
}

/// Parses a line-coverage report: the `TOTAL` row, construct rows and the
/// annotated source listing (`k/m` before a line, `0/1 ==>` when missed).
///
/// Listing lines without an explicit line number are numbered by their
/// position among annotated lines.
pub fn parse_coverage(report: &str) -> Result<CoverageReport, SimParseError> {
    let mut module_name = String::new();
    let mut total = None;
    let mut items = Vec::new();
    let mut line_flags = Vec::new();
    for raw in report.lines() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix("Line Coverage for Module") {
            module_name = rest.trim_start_matches([' ', ':', '\t']).trim().into();
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["TOTAL", t, c, p, ..] => {
                let t: u32 = t.parse().map_err(|_| SimParseError::UnparseableReport("TOTAL row"))?;
                let c: u32 = c.parse().map_err(|_| SimParseError::UnparseableReport("TOTAL row"))?;
                let p: f64 = p.parse().map_err(|_| SimParseError::UnparseableReport("TOTAL row"))?;
                total = Some((t, c, p));
            }
            [kind, l, t, c, p] if is_row_kind(kind) => {
                if let (Ok(line), Ok(total), Ok(covered), Ok(percent)) = (l.parse(), t.parse(), c.parse(), p.parse()) {
                    items.push(CoverageItem { kind: String::from(*kind), line, total, covered, percent });
                }
            }
            [first, rest @ ..] => {
                let (number, marker) = match (first.parse::<u32>(), rest.first()) {
                    (Ok(n), Some(m)) if hits(m).is_some() => (Some(n), *m),
                    _ => (None, *first),
                };
                if let Some((h, m)) = hits(marker) {
                    let n = number.unwrap_or(line_flags.len() as u32 + 1);
                    line_flags.push((n, m > 0 && h >= m));
                }
            }
            [] => {}
        }
    }
    let (total_lines, covered_lines, percent) = total.ok_or(SimParseError::UnparseableReport("no TOTAL row"))?;
    if covered_lines > total_lines {
        return Err(SimParseError::UnparseableReport("covered exceeds total"));
    }
    let expected = if total_lines == 0 { 100.0 } else { 100.0 * covered_lines as f64 / total_lines as f64 };
    if libm::fabs(expected - percent) > 0.01 {
        return Err(SimParseError::UnparseableReport("percent disagrees with counts"));
    }
    Ok(CoverageReport { module_name, total_lines, covered_lines, percent, items, line_flags })
}

/// Writes a report in the layout accepted by [`parse_coverage`].
/// `flags` become a numbered listing.
pub fn render_coverage(module: &str, flags: &[(u32, bool)], total_lines: u32, covered_lines: u32) -> String {
    let percent = if total_lines == 0 { 100.0 } else { 100.0 * covered_lines as f64 / total_lines as f64 };
    let mut s = String::new();
    let _ = writeln!(s, "Line Coverage for Module : {module}");
    s.push_str("Line No.\tTotal\tCovered\tPercent\n");
    let _ = writeln!(s, "TOTAL\t\t{total_lines}\t{covered_lines}\t{percent:.2}");
    s.push('\n');
    for (line, covered) in flags {
        if *covered {
            let _ = writeln!(s, "{line} 1/1");
        } else {
            let _ = writeln!(s, "{line} 0/1 ==>");
        }
    }
    s
}
