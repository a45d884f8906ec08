// SPDX-License-Identifier: Apache-2.0

use alloc::string::String;
use alloc::vec::Vec;

use super::ast::{AstNode, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Input,
    Output,
    Inout,
}

impl Direction {
    pub fn from_keyword(s: &str) -> Option<Self> {
        match s {
            "input" => Some(Direction::Input),
            "output" => Some(Direction::Output),
            "inout" => Some(Direction::Inout),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Input => "input",
            Direction::Output => "output",
            Direction::Inout => "inout",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Port {
    pub name: String,
    pub direction: Direction,
    /// Bit count, at least 1.
    pub width: u32,
    /// Set when the declared range could not be reduced to constants; `width` is then 1.
    pub symbolic_width: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parameter {
    pub name: String,
    pub default: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuleInterface {
    pub name: String,
    pub ports: Vec<Port>,
    pub parameters: Vec<Parameter>,
}

impl ModuleInterface {
    pub fn port(&self, name: &str) -> Option<&Port> {
        self.ports.iter().find(|p| p.name == name)
    }
}

/// Ports in declaration order with resolved widths, plus overridable parameters.
///
/// `ast` must be a `Module` root as produced by the parser.
pub fn extract_interface(ast: &AstNode) -> ModuleInterface {
    debug_assert_eq!(ast.kind, NodeKind::Module);
    let mut ports = Vec::new();
    let mut parameters = Vec::new();
    for item in &ast.children {
        match item.kind {
            NodeKind::PortDecl => {
                let direction =
                    item.modifiers.first().and_then(|m| Direction::from_keyword(m)).unwrap_or(Direction::Input);
                let (width, symbolic_width) = match item.children.first() {
                    Some(range) if range.kind == NodeKind::Range => match range_width(range) {
                        Some(w) => (w, false),
                        None => (1, true),
                    },
                    _ => (1, false),
                };
                ports.push(Port { name: item.label().into(), direction, width, symbolic_width });
            }
            NodeKind::ParamDecl if item.has_modifier("parameter") => {
                let default = item.children.last().map(AstNode::expr_text).unwrap_or_default();
                parameters.push(Parameter { name: item.label().into(), default });
            }
            _ => {}
        }
    }
    ModuleInterface { name: ast.label().into(), ports, parameters }
}

fn range_width(range: &AstNode) -> Option<u32> {
    let msb = const_eval(&range.children[0])?;
    let lsb = const_eval(&range.children[1])?;
    let w = msb.checked_sub(lsb)?.checked_abs()?.checked_add(1)?;
    u32::try_from(w).ok()
}

/// Evaluates constant-literal arithmetic. Identifiers (including parameters) are not resolved.
pub fn const_eval(expr: &AstNode) -> Option<i64> {
    match expr.kind {
        NodeKind::NumberLit => number_value(expr.label()),
        NodeKind::UnaryOp => {
            let v = const_eval(expr.children.first()?)?;
            match expr.label() {
                "-" => v.checked_neg(),
                "+" => Some(v),
                _ => None,
            }
        }
        NodeKind::BinaryOp => {
            let a = const_eval(&expr.children[0])?;
            let b = const_eval(&expr.children[1])?;
            match expr.label() {
                "+" => a.checked_add(b),
                "-" => a.checked_sub(b),
                "*" => a.checked_mul(b),
                "/" => a.checked_div(b),
                "%" => a.checked_rem(b),
                "<<" | "<<<" => a.checked_shl(u32::try_from(b).ok()?),
                ">>" | ">>>" => a.checked_shr(u32::try_from(b).ok()?),
                "**" => a.checked_pow(u32::try_from(b).ok()?),
                _ => None,
            }
        }
        _ => None,
    }
}

/// Value of a decimal or based literal without x/z digits.
pub fn number_value(text: &str) -> Option<i64> {
    let text: String = text.chars().filter(|c| *c != '_' && !c.is_whitespace()).collect();
    let Some(apos) = text.find('\'') else {
        return text.parse().ok();
    };
    let mut rest = &text[apos + 1..];
    if rest.starts_with(['s', 'S']) {
        rest = &rest[1..];
    }
    let mut chars = rest.chars();
    let radix = match chars.next()? {
        'b' | 'B' => 2,
        'o' | 'O' => 8,
        'd' | 'D' => 10,
        'h' | 'H' => 16,
        _ => return None,
    };
    i64::from_str_radix(chars.as_str(), radix).ok()
}
