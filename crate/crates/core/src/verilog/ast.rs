// SPDX-License-Identifier: Apache-2.0

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKind {
    Module,
    PortDecl,
    ParamDecl,
    NetDecl,
    ContAssign,
    AlwaysBlock,
    SeqBlock,
    IfStmt,
    CaseStmt,
    CaseItem,
    BlockingAssign,
    NonblockingAssign,
    Instance,
    PortConn,
    BinaryOp,
    UnaryOp,
    TernaryOp,
    Concat,
    Replicate,
    BitSelect,
    PartSelect,
    IdentRef,
    NumberLit,
    /// `[msb:lsb]` on a declaration.
    Range,
    /// One entry of an `@(...)` sensitivity list.
    EventExpr,
}

impl NodeKind {
    pub const ALL: [NodeKind; 25] = [
        NodeKind::Module,
        NodeKind::PortDecl,
        NodeKind::ParamDecl,
        NodeKind::NetDecl,
        NodeKind::ContAssign,
        NodeKind::AlwaysBlock,
        NodeKind::SeqBlock,
        NodeKind::IfStmt,
        NodeKind::CaseStmt,
        NodeKind::CaseItem,
        NodeKind::BlockingAssign,
        NodeKind::NonblockingAssign,
        NodeKind::Instance,
        NodeKind::PortConn,
        NodeKind::BinaryOp,
        NodeKind::UnaryOp,
        NodeKind::TernaryOp,
        NodeKind::Concat,
        NodeKind::Replicate,
        NodeKind::BitSelect,
        NodeKind::PartSelect,
        NodeKind::IdentRef,
        NodeKind::NumberLit,
        NodeKind::Range,
        NodeKind::EventExpr,
    ];

    pub fn is_expression(self) -> bool {
        matches!(
            self,
            NodeKind::BinaryOp
                | NodeKind::UnaryOp
                | NodeKind::TernaryOp
                | NodeKind::Concat
                | NodeKind::Replicate
                | NodeKind::BitSelect
                | NodeKind::PartSelect
                | NodeKind::IdentRef
                | NodeKind::NumberLit
        )
    }
}

/// A node of the subset syntax tree.
///
/// Child layout per kind:
///
/// | kind | label | modifiers | children |
/// |------|-------|-----------|----------|
/// | `Module` | module name | | params, ports, items |
/// | `PortDecl` | port name | direction, net type, `signed` | `Range`? |
/// | `ParamDecl` | name | `parameter` / `localparam`, `signed` | `Range`?, default expr |
/// | `NetDecl` | name | `wire` / `reg` / `integer` ..., `signed` | `Range`?, `Range`* (array dims), init expr? |
/// | `ContAssign` | | | lvalue, expr |
/// | `AlwaysBlock` | | `*` for `@*` | `EventExpr`*, statement |
/// | `EventExpr` | | `posedge` / `negedge` | expr |
/// | `SeqBlock` | block name? | | statements |
/// | `IfStmt` | | | cond, then, else? |
/// | `CaseStmt` | | `case` / `casez` / `casex` | selector, `CaseItem`* |
/// | `CaseItem` | | `default` | label exprs, statement (last) |
/// | `BlockingAssign` / `NonblockingAssign` | | | lvalue, expr |
/// | `Instance` | instance name | module type | `PortConn`* (parameter overrides carry modifier `param`) |
/// | `PortConn` | formal name (named) | `param`? | expr? (absent for `.p()`) |
/// | `BinaryOp` / `UnaryOp` | operator | | operands |
/// | `TernaryOp` | `?:` | | cond, then, else |
/// | `Replicate` | | | count, `Concat` |
/// | `BitSelect` | | | base, index |
/// | `PartSelect` | `:` / `+:` / `-:` | | base, a, b |
/// | `IdentRef` / `NumberLit` | source text | | |
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AstNode {
    pub kind: NodeKind,
    pub label: Option<String>,
    pub modifiers: Vec<String>,
    pub children: Vec<AstNode>,
}

impl AstNode {
    pub fn new(kind: NodeKind) -> Self {
        AstNode { kind, label: None, modifiers: Vec::new(), children: Vec::new() }
    }

    pub fn labeled(kind: NodeKind, label: impl Into<String>) -> Self {
        AstNode { label: Some(label.into()), ..AstNode::new(kind) }
    }

    pub fn with_children(mut self, children: Vec<AstNode>) -> Self {
        self.children = children;
        self
    }

    pub fn with_modifier(mut self, m: impl Into<String>) -> Self {
        self.modifiers.push(m.into());
        self
    }

    pub fn has_modifier(&self, m: &str) -> bool {
        self.modifiers.iter().any(|x| x == m)
    }

    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or("")
    }

    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a AstNode)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }

    pub fn count_nodes(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |_| n += 1);
        n
    }

    /// Renders an expression subtree back to Verilog-like text.
    pub fn expr_text(&self) -> String {
        let mut s = String::new();
        let _ = write_expr(&mut s, self);
        s
    }
}

fn write_operand(out: &mut String, n: &AstNode) -> fmt::Result {
    if matches!(n.kind, NodeKind::BinaryOp | NodeKind::TernaryOp) {
        out.push('(');
        write_expr(out, n)?;
        out.push(')');
        Ok(())
    } else {
        write_expr(out, n)
    }
}

fn write_expr(out: &mut String, n: &AstNode) -> fmt::Result {
    match n.kind {
        NodeKind::IdentRef | NodeKind::NumberLit => out.push_str(n.label()),
        NodeKind::UnaryOp => {
            let op = n.label();
            if op.starts_with('$') {
                write!(out, "{op}(")?;
                for (i, c) in n.children.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_expr(out, c)?;
                }
                out.push(')');
            } else {
                out.push_str(op);
                write_operand(out, &n.children[0])?;
            }
        }
        NodeKind::BinaryOp => {
            write_operand(out, &n.children[0])?;
            write!(out, " {} ", n.label())?;
            write_operand(out, &n.children[1])?;
        }
        NodeKind::TernaryOp => {
            write_operand(out, &n.children[0])?;
            out.push_str(" ? ");
            write_operand(out, &n.children[1])?;
            out.push_str(" : ");
            write_operand(out, &n.children[2])?;
        }
        NodeKind::Concat => {
            out.push('{');
            for (i, c) in n.children.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, c)?;
            }
            out.push('}');
        }
        NodeKind::Replicate => {
            out.push('{');
            write_expr(out, &n.children[0])?;
            write_expr(out, &n.children[1])?;
            out.push('}');
        }
        NodeKind::BitSelect => {
            write_expr(out, &n.children[0])?;
            out.push('[');
            write_expr(out, &n.children[1])?;
            out.push(']');
        }
        NodeKind::PartSelect => {
            write_expr(out, &n.children[0])?;
            out.push('[');
            write_expr(out, &n.children[1])?;
            out.push_str(n.label());
            write_expr(out, &n.children[2])?;
            out.push(']');
        }
        _ => write!(out, "<{:?}>", n.kind)?,
    }
    Ok(())
}
