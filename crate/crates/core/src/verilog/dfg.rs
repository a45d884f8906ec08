// SPDX-License-Identifier: Apache-2.0

//! Signal-level dataflow graph.
//!
//! Edges run from every signal read on the right-hand side of an assignment,
//! and from every signal in an enclosing `if`/`case` condition, to each
//! assigned signal. Event-control signals (clocks, async resets in the
//! sensitivity list) are not sources. Parameters and undeclared names never
//! appear as endpoints.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use super::ast::{AstNode, NodeKind};
use super::interface::{Direction, ModuleInterface};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dfg {
    pub edges: BTreeSet<(String, String)>,
}

impl Dfg {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, source: &str, target: &str) -> bool {
        self.edges.iter().any(|(s, t)| s == source && t == target)
    }

    pub fn intersection_len(&self, other: &Dfg) -> usize {
        self.edges.intersection(&other.edges).count()
    }

    pub fn union_len(&self, other: &Dfg) -> usize {
        self.edges.union(&other.edges).count()
    }
}

impl FromIterator<(String, String)> for Dfg {
    fn from_iter<I: IntoIterator<Item = (String, String)>>(iter: I) -> Self {
        Dfg { edges: iter.into_iter().collect() }
    }
}

/// Extracts the dataflow graph of a `Module` root.
///
/// Instance port directions are inferred: a connection is an output when it
/// is a plain assignable expression whose signals are neither inputs of this
/// module nor driven by any assignment here nor already claimed as the output
/// of an earlier instance. Use [`extract_dfg_with`] when the instantiated
/// modules' interfaces are known.
pub fn extract_dfg(ast: &AstNode) -> Dfg {
    extract_dfg_with(ast, &[])
}

pub fn extract_dfg_with(ast: &AstNode, library: &[ModuleInterface]) -> Dfg {
    debug_assert_eq!(ast.kind, NodeKind::Module);
    let mut cx = Extractor { declared: BTreeSet::new(), inputs: BTreeSet::new(), dfg: Dfg::new() };
    for item in &ast.children {
        match item.kind {
            NodeKind::PortDecl => {
                cx.declared.insert(item.label());
                if item.modifiers.first().map(String::as_str) == Some("input") {
                    cx.inputs.insert(item.label());
                }
            }
            NodeKind::NetDecl => {
                cx.declared.insert(item.label());
            }
            _ => {}
        }
    }

    let mut driven: BTreeSet<&str> = BTreeSet::new();
    for item in &ast.children {
        collect_driven(item, &mut driven);
    }

    let mut conds = Vec::new();
    for item in &ast.children {
        match item.kind {
            NodeKind::ContAssign => cx.assign(&item.children[0], &item.children[1], &conds),
            NodeKind::NetDecl => {
                if let Some(init) = item.children.last().filter(|c| c.kind.is_expression()) {
                    cx.edges_into(&[item.label()], init, &conds);
                }
            }
            NodeKind::AlwaysBlock => {
                if let Some(stmt) = item.children.last() {
                    cx.statement(stmt, &mut conds);
                }
            }
            _ => {}
        }
    }

    let mut claimed: BTreeSet<&str> = BTreeSet::new();
    for inst in ast.children.iter().filter(|c| c.kind == NodeKind::Instance) {
        let iface = inst.modifiers.first().and_then(|ty| library.iter().find(|m| &m.name == ty));
        let mut ins: BTreeSet<&str> = BTreeSet::new();
        let mut outs: BTreeSet<&str> = BTreeSet::new();
        let ports = inst.children.iter().filter(|c| !c.has_modifier("param"));
        for (position, conn) in ports.enumerate() {
            let Some(expr) = conn.children.first() else {
                continue;
            };
            let direction = match iface {
                Some(iface) => match conn.label.as_deref() {
                    Some(formal) => iface.port(formal).map(|p| p.direction),
                    None => iface.ports.get(position).map(|p| p.direction),
                },
                None => {
                    let mut bases = Vec::new();
                    let assignable = lvalue_bases(expr, &mut bases);
                    let free =
                        bases.iter().all(|b| !cx.inputs.contains(b) && !driven.contains(b) && !claimed.contains(b));
                    Some(if assignable && free && !bases.is_empty() { Direction::Output } else { Direction::Input })
                }
            };
            match direction {
                Some(Direction::Output) => {
                    let mut bases = Vec::new();
                    lvalue_bases(expr, &mut bases);
                    for b in bases {
                        claimed.insert(b);
                        outs.insert(b);
                    }
                }
                Some(Direction::Inout) => {
                    let mut sigs = Vec::new();
                    cx.signals(expr, &mut sigs);
                    ins.extend(sigs.iter().copied());
                    outs.extend(sigs);
                }
                _ => {
                    let mut sigs = Vec::new();
                    cx.signals(expr, &mut sigs);
                    ins.extend(sigs);
                }
            }
        }
        for o in outs.iter().filter(|o| cx.declared.contains(*o)) {
            for i in &ins {
                cx.dfg.edges.insert(((*i).into(), (*o).into()));
            }
        }
    }

    cx.dfg
}

struct Extractor<'a> {
    declared: BTreeSet<&'a str>,
    inputs: BTreeSet<&'a str>,
    dfg: Dfg,
}

impl<'a> Extractor<'a> {
    fn signals(&self, expr: &'a AstNode, out: &mut Vec<&'a str>) {
        expr.walk(&mut |n| {
            if n.kind == NodeKind::IdentRef && self.declared.contains(n.label()) {
                out.push(n.label());
            }
        });
    }

    fn edges_into(&mut self, targets: &[&'a str], rhs: &'a AstNode, conds: &[&'a str]) {
        let mut sources = Vec::new();
        self.signals(rhs, &mut sources);
        sources.extend_from_slice(conds);
        for t in targets.iter().filter(|t| self.declared.contains(*t)) {
            for s in &sources {
                self.dfg.edges.insert(((*s).into(), (*t).into()));
            }
        }
    }

    fn assign(&mut self, lhs: &'a AstNode, rhs: &'a AstNode, conds: &[&'a str]) {
        let mut targets = Vec::new();
        lvalue_bases(lhs, &mut targets);
        self.edges_into(&targets, rhs, conds);
    }

    fn statement(&mut self, stmt: &'a AstNode, conds: &mut Vec<&'a str>) {
        match stmt.kind {
            NodeKind::SeqBlock => {
                for s in &stmt.children {
                    self.statement(s, conds);
                }
            }
            NodeKind::IfStmt => {
                let mark = conds.len();
                self.signals(&stmt.children[0], conds);
                for branch in &stmt.children[1..] {
                    self.statement(branch, conds);
                }
                conds.truncate(mark);
            }
            NodeKind::CaseStmt => {
                let mark = conds.len();
                self.signals(&stmt.children[0], conds);
                for item in &stmt.children[1..] {
                    let inner = conds.len();
                    if let Some((body, labels)) = item.children.split_last() {
                        for l in labels {
                            self.signals(l, conds);
                        }
                        self.statement(body, conds);
                    }
                    conds.truncate(inner);
                }
                conds.truncate(mark);
            }
            NodeKind::BlockingAssign | NodeKind::NonblockingAssign => {
                self.assign(&stmt.children[0], &stmt.children[1], conds);
            }
            _ => {}
        }
    }
}

/// Collects base signal names of an assignable expression. Returns false if
/// the expression is not assignable (the collected names are then partial).
fn lvalue_bases<'a>(n: &'a AstNode, out: &mut Vec<&'a str>) -> bool {
    match n.kind {
        NodeKind::IdentRef => {
            out.push(n.label());
            true
        }
        NodeKind::BitSelect | NodeKind::PartSelect => lvalue_bases(&n.children[0], out),
        // Not `all`: every part must be visited even after one fails.
        #[allow(clippy::unnecessary_fold)]
        NodeKind::Concat => n.children.iter().fold(true, |ok, c| lvalue_bases(c, out) && ok),
        _ => false,
    }
}

fn collect_driven<'a>(n: &'a AstNode, out: &mut BTreeSet<&'a str>) {
    match n.kind {
        NodeKind::ContAssign | NodeKind::BlockingAssign | NodeKind::NonblockingAssign => {
            let mut bases = Vec::new();
            lvalue_bases(&n.children[0], &mut bases);
            out.extend(bases);
        }
        NodeKind::NetDecl => {
            if n.children.last().is_some_and(|c| c.kind.is_expression()) {
                out.insert(n.label());
            }
        }
        NodeKind::Instance => {}
        _ => {
            for c in &n.children {
                collect_driven(c, out);
            }
        }
    }
}
