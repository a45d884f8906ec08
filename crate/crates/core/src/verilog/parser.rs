// SPDX-License-Identifier: Apache-2.0

//! Recursive-descent parser for a single synthesizable Verilog module.
//!
//! Anything outside the subset (generate blocks, functions, tasks, loops,
//! system tasks, timing controls inside statements) is rejected with
//! [`ParseError::Unsupported`] instead of being skipped.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use super::ast::{AstNode, NodeKind};
use super::lexer::{lex, LexError, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseError {
    Lex(LexError),
    /// Construct outside the supported subset.
    Unsupported {
        construct: String,
        line: usize,
    },
    /// Malformed input.
    Malformed {
        message: String,
        line: usize,
    },
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::Lex(e) => write!(f, "lex error: {e}"),
            ParseError::Unsupported { construct, line } => {
                write!(f, "unsupported construct `{construct}` at line {line}")
            }
            ParseError::Malformed { message, line } => {
                write!(f, "parse error at line {line}: {message}")
            }
        }
    }
}

impl core::error::Error for ParseError {}

impl From<LexError> for ParseError {
    fn from(e: LexError) -> Self {
        ParseError::Lex(e)
    }
}

type PResult<T> = Result<T, ParseError>;

/// Lexes and parses `source`.
pub fn parse_source(source: &str) -> PResult<AstNode> {
    let tokens = lex(source)?;
    parse_module(&tokens)
}

/// Parses a token stream holding exactly one `module ... endmodule`.
pub fn parse_module(tokens: &[Token]) -> PResult<AstNode> {
    let mut p = Parser { tokens, pos: 0 };
    let module = p.module()?;
    if let Some(t) = p.peek() {
        if t.is(TokenKind::Keyword, "module") {
            return Err(p.unsupported("multiple modules"));
        }
        return Err(p.malformed("trailing tokens after endmodule"));
    }
    Ok(module)
}

const NET_TYPES: &[&str] = &[
    "wire", "reg", "tri", "integer", "supply0", "supply1", "wand", "wor", "tri0", "tri1", "trireg", "real", "time",
    "realtime",
];

const UNSUPPORTED_ITEMS: &[&str] = &[
    "initial",
    "generate",
    "genvar",
    "function",
    "task",
    "for",
    "defparam",
    "specify",
    "specparam",
    "event",
    "primitive",
    "and",
    "or",
    "nand",
    "nor",
    "xor",
    "xnor",
    "not",
    "buf",
    "bufif0",
    "bufif1",
    "notif0",
    "notif1",
    "pullup",
    "pulldown",
    "tran",
    "nmos",
    "pmos",
    "cmos",
];

fn binary_precedence(op: &str) -> Option<u8> {
    Some(match op {
        "||" => 1,
        "&&" => 2,
        "|" => 3,
        "^" | "^~" | "~^" => 4,
        "&" => 5,
        "==" | "!=" | "===" | "!==" => 6,
        "<" | "<=" | ">" | ">=" => 7,
        "<<" | ">>" | "<<<" | ">>>" => 8,
        "+" | "-" => 9,
        "*" | "/" | "%" => 10,
        "**" => 11,
        _ => return None,
    })
}

const UNARY_OPS: &[&str] = &["+", "-", "!", "~", "&", "~&", "|", "~|", "^", "~^", "^~"];

const SYSTEM_FUNCTIONS: &[&str] = &["$signed", "$unsigned", "$clog2"];

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
}

impl<'t> Parser<'t> {
    fn peek(&self) -> Option<&'t Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, n: usize) -> Option<&'t Token> {
        self.tokens.get(self.pos + n)
    }

    fn line(&self) -> usize {
        self.peek().or_else(|| self.tokens.last()).map_or(1, |t| t.line)
    }

    fn malformed(&self, message: impl Into<String>) -> ParseError {
        ParseError::Malformed { message: message.into(), line: self.line() }
    }

    fn unsupported(&self, construct: impl Into<String>) -> ParseError {
        ParseError::Unsupported { construct: construct.into(), line: self.line() }
    }

    fn at(&self, kind: TokenKind, text: &str) -> bool {
        self.peek().is_some_and(|t| t.is(kind, text))
    }

    fn at_punct(&self, text: &str) -> bool {
        self.at(TokenKind::Punctuation, text)
    }

    fn at_op(&self, text: &str) -> bool {
        self.at(TokenKind::Operator, text)
    }

    fn eat(&mut self, kind: TokenKind, text: &str) -> bool {
        if self.at(kind, text) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: TokenKind, text: &str) -> PResult<()> {
        if self.eat(kind, text) {
            Ok(())
        } else {
            let found = self.peek().map_or("end of input".to_string(), |t| format!("`{}`", t.text));
            Err(self.malformed(format!("expected `{text}`, found {found}")))
        }
    }

    fn expect_punct(&mut self, text: &str) -> PResult<()> {
        self.expect(TokenKind::Punctuation, text)
    }

    fn identifier(&mut self) -> PResult<String> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => {
                if t.text.starts_with('`') {
                    return Err(self.unsupported("macro usage"));
                }
                if t.text.starts_with('$') {
                    return Err(self.unsupported(t.text.clone()));
                }
                self.pos += 1;
                Ok(t.text.clone())
            }
            Some(t) if t.kind == TokenKind::Keyword => {
                Err(self.malformed(format!("expected identifier, found keyword `{}`", t.text)))
            }
            Some(t) => Err(self.malformed(format!("expected identifier, found `{}`", t.text))),
            None => Err(self.malformed("expected identifier, found end of input")),
        }
    }

    fn module(&mut self) -> PResult<AstNode> {
        if !(self.eat(TokenKind::Keyword, "module") || self.eat(TokenKind::Keyword, "macromodule")) {
            return Err(self.malformed("expected `module`"));
        }
        let name = self.identifier()?;
        let mut module = AstNode::labeled(NodeKind::Module, name);

        if self.eat(TokenKind::Punctuation, "#") {
            self.expect_punct("(")?;
            self.parameter_port_list(&mut module.children)?;
        }

        let mut header_names: Vec<(String, usize)> = Vec::new();
        let mut ansi = false;
        if self.eat(TokenKind::Punctuation, "(") && !self.eat(TokenKind::Punctuation, ")") {
            if self.peek().is_some_and(|t| is_direction(&t.text) && t.kind == TokenKind::Keyword) {
                ansi = true;
                self.ansi_port_list(&mut module.children)?;
            } else {
                loop {
                    if self.at_punct(".") {
                        return Err(self.unsupported("explicit port expression"));
                    }
                    let line = self.line();
                    header_names.push((self.identifier()?, line));
                    if self.eat(TokenKind::Punctuation, ",") {
                        continue;
                    }
                    self.expect_punct(")")?;
                    break;
                }
            }
        }
        self.expect_punct(";")?;

        loop {
            if self.eat(TokenKind::Keyword, "endmodule") {
                break;
            }
            if self.peek().is_none() {
                return Err(self.malformed("missing `endmodule`"));
            }
            self.module_item(&mut module.children)?;
        }

        let mut seen = BTreeSet::new();
        for c in module.children.iter().filter(|c| c.kind == NodeKind::PortDecl) {
            if !seen.insert(c.label()) {
                return Err(ParseError::Malformed {
                    message: format!("duplicate port `{}`", c.label()),
                    line: self.line(),
                });
            }
        }
        if !ansi {
            for (name, line) in &header_names {
                if !seen.contains(name.as_str()) {
                    return Err(ParseError::Malformed {
                        message: format!("port `{name}` has no direction declaration"),
                        line: *line,
                    });
                }
            }
        }
        Ok(module)
    }

    fn parameter_port_list(&mut self, out: &mut Vec<AstNode>) -> PResult<()> {
        if self.eat(TokenKind::Punctuation, ")") {
            return Ok(());
        }
        let mut signed = false;
        let mut range: Option<AstNode> = None;
        loop {
            if self.eat(TokenKind::Keyword, "parameter") {
                signed = self.eat(TokenKind::Keyword, "signed");
                self.eat(TokenKind::Keyword, "integer");
                range = self.optional_range()?;
            }
            out.push(self.param_assignment("parameter", signed, range.clone())?);
            if self.eat(TokenKind::Punctuation, ",") {
                continue;
            }
            self.expect_punct(")")?;
            return Ok(());
        }
    }

    fn param_assignment(&mut self, keyword: &str, signed: bool, range: Option<AstNode>) -> PResult<AstNode> {
        let name = self.identifier()?;
        self.expect(TokenKind::Operator, "=")?;
        let value = self.expression()?;
        let mut node = AstNode::labeled(NodeKind::ParamDecl, name).with_modifier(keyword);
        if signed {
            node.modifiers.push("signed".into());
        }
        node.children.extend(range);
        node.children.push(value);
        Ok(node)
    }

    fn ansi_port_list(&mut self, out: &mut Vec<AstNode>) -> PResult<()> {
        let mut mods: Vec<String> = Vec::new();
        let mut range: Option<AstNode> = None;
        loop {
            if let Some(t) = self.peek().filter(|t| t.kind == TokenKind::Keyword && is_direction(&t.text)) {
                self.pos += 1;
                mods = vec![t.text.clone()];
                (mods, range) = self.port_type(mods)?;
            }
            let name = self.identifier()?;
            let mut node = AstNode::labeled(NodeKind::PortDecl, name);
            node.modifiers = mods.clone();
            node.children.extend(range.clone());
            out.push(node);
            if self.eat(TokenKind::Punctuation, ",") {
                continue;
            }
            self.expect_punct(")")?;
            return Ok(());
        }
    }

    /// Optional net type, `signed` and range after a port direction.
    fn port_type(&mut self, mut mods: Vec<String>) -> PResult<(Vec<String>, Option<AstNode>)> {
        if let Some(t) = self.peek().filter(|t| t.kind == TokenKind::Keyword && NET_TYPES.contains(&t.text.as_str())) {
            self.pos += 1;
            mods.push(t.text.clone());
        }
        if self.eat(TokenKind::Keyword, "signed") {
            mods.push("signed".into());
        }
        let range = self.optional_range()?;
        Ok((mods, range))
    }

    fn optional_range(&mut self) -> PResult<Option<AstNode>> {
        if !self.at_punct("[") {
            return Ok(None);
        }
        self.pos += 1;
        let msb = self.expression()?;
        self.expect(TokenKind::Operator, ":")?;
        let lsb = self.expression()?;
        self.expect_punct("]")?;
        Ok(Some(AstNode::new(NodeKind::Range).with_children(vec![msb, lsb])))
    }

    fn module_item(&mut self, out: &mut Vec<AstNode>) -> PResult<()> {
        let t = self.peek().ok_or_else(|| self.malformed("unexpected end of input"))?;
        match (t.kind, t.text.as_str()) {
            (TokenKind::Punctuation, ";") => {
                self.pos += 1;
            }
            (TokenKind::Keyword, dir) if is_direction(dir) => {
                self.pos += 1;
                let (mods, range) = self.port_type(vec![dir.to_string()])?;
                loop {
                    let name = self.identifier()?;
                    let mut node = AstNode::labeled(NodeKind::PortDecl, name);
                    node.modifiers = mods.clone();
                    node.children.extend(range.clone());
                    out.push(node);
                    if !self.eat(TokenKind::Punctuation, ",") {
                        break;
                    }
                }
                self.expect_punct(";")?;
            }
            (TokenKind::Keyword, net) if NET_TYPES.contains(&net) => {
                self.pos += 1;
                self.net_declaration(net, out)?;
            }
            (TokenKind::Keyword, kw @ ("parameter" | "localparam")) => {
                self.pos += 1;
                let signed = self.eat(TokenKind::Keyword, "signed");
                self.eat(TokenKind::Keyword, "integer");
                let range = self.optional_range()?;
                loop {
                    out.push(self.param_assignment(kw, signed, range.clone())?);
                    if !self.eat(TokenKind::Punctuation, ",") {
                        break;
                    }
                }
                self.expect_punct(";")?;
            }
            (TokenKind::Keyword, "assign") => {
                self.pos += 1;
                if self.at_punct("(") {
                    return Err(self.unsupported("drive strength"));
                }
                self.skip_delay()?;
                loop {
                    let lhs = self.lvalue()?;
                    self.expect(TokenKind::Operator, "=")?;
                    let rhs = self.expression()?;
                    out.push(AstNode::new(NodeKind::ContAssign).with_children(vec![lhs, rhs]));
                    if !self.eat(TokenKind::Punctuation, ",") {
                        break;
                    }
                }
                self.expect_punct(";")?;
            }
            (TokenKind::Keyword, "always") => {
                self.pos += 1;
                out.push(self.always_block()?);
            }
            (TokenKind::Keyword, kw) if UNSUPPORTED_ITEMS.contains(&kw) => {
                return Err(self.unsupported(kw));
            }
            (TokenKind::Identifier, name) if name.starts_with('`') => {
                return Err(self.unsupported("macro usage"));
            }
            (TokenKind::Identifier, name) if name.starts_with('$') => {
                return Err(self.unsupported(name));
            }
            (TokenKind::Identifier, _) => {
                self.instantiation(out)?;
            }
            (_, text) => {
                let text = text.to_string();
                if t.kind == TokenKind::Keyword {
                    return Err(self.unsupported(text));
                }
                return Err(self.malformed(format!("unexpected `{text}` in module body")));
            }
        }
        Ok(())
    }

    fn net_declaration(&mut self, net: &str, out: &mut Vec<AstNode>) -> PResult<()> {
        let mut mods = vec![net.to_string()];
        if self.eat(TokenKind::Keyword, "signed") {
            mods.push("signed".into());
        }
        if self.at_punct("#") {
            return Err(self.unsupported("net delay"));
        }
        let range = self.optional_range()?;
        loop {
            let name = self.identifier()?;
            let mut node = AstNode::labeled(NodeKind::NetDecl, name);
            node.modifiers = mods.clone();
            node.children.extend(range.clone());
            while let Some(dim) = self.optional_range()? {
                node.children.push(dim.with_modifier("array"));
            }
            if self.eat(TokenKind::Operator, "=") {
                node.children.push(self.expression()?);
            }
            out.push(node);
            if !self.eat(TokenKind::Punctuation, ",") {
                break;
            }
        }
        self.expect_punct(";")
    }

    fn skip_delay(&mut self) -> PResult<()> {
        if self.eat(TokenKind::Punctuation, "#") {
            if self.eat(TokenKind::Punctuation, "(") {
                self.expression()?;
                self.expect_punct(")")?;
            } else {
                self.primary()?;
            }
        }
        Ok(())
    }

    fn always_block(&mut self) -> PResult<AstNode> {
        if !self.eat(TokenKind::Punctuation, "@") {
            return Err(self.unsupported("always without event control"));
        }
        let mut node = AstNode::new(NodeKind::AlwaysBlock);
        if self.eat(TokenKind::Operator, "*") {
            node.modifiers.push("*".into());
        } else {
            self.expect_punct("(")?;
            if self.at_op("*") && self.peek_at(1).is_some_and(|t| t.is(TokenKind::Punctuation, ")")) {
                self.pos += 2;
                node.modifiers.push("*".into());
            } else {
                loop {
                    let mut ev = AstNode::new(NodeKind::EventExpr);
                    if let Some(t) = self
                        .peek()
                        .filter(|t| t.is(TokenKind::Keyword, "posedge") || t.is(TokenKind::Keyword, "negedge"))
                    {
                        self.pos += 1;
                        ev.modifiers.push(t.text.clone());
                    }
                    ev.children.push(self.expression()?);
                    node.children.push(ev);
                    if self.eat(TokenKind::Keyword, "or") || self.eat(TokenKind::Punctuation, ",") {
                        continue;
                    }
                    self.expect_punct(")")?;
                    break;
                }
            }
        }
        node.children.push(self.statement()?);
        Ok(node)
    }

    fn statement(&mut self) -> PResult<AstNode> {
        let t = self.peek().ok_or_else(|| self.malformed("expected statement, found end of input"))?;
        match (t.kind, t.text.as_str()) {
            (TokenKind::Punctuation, ";") => {
                self.pos += 1;
                Ok(AstNode::new(NodeKind::SeqBlock))
            }
            (TokenKind::Keyword, "begin") => {
                self.pos += 1;
                let mut block = AstNode::new(NodeKind::SeqBlock);
                if self.eat(TokenKind::Operator, ":") {
                    block.label = Some(self.identifier()?);
                }
                while !self.eat(TokenKind::Keyword, "end") {
                    if self.peek().is_none() {
                        return Err(self.malformed("missing `end`"));
                    }
                    if self.peek().is_some_and(|t| t.kind == TokenKind::Keyword && NET_TYPES.contains(&t.text.as_str()))
                    {
                        return Err(self.unsupported("block-local declaration"));
                    }
                    block.children.push(self.statement()?);
                }
                Ok(block)
            }
            (TokenKind::Keyword, "if") => {
                self.pos += 1;
                self.expect_punct("(")?;
                let cond = self.expression()?;
                self.expect_punct(")")?;
                let then = self.statement()?;
                let mut node = AstNode::new(NodeKind::IfStmt).with_children(vec![cond, then]);
                if self.eat(TokenKind::Keyword, "else") {
                    node.children.push(self.statement()?);
                }
                Ok(node)
            }
            (TokenKind::Keyword, kw @ ("case" | "casez" | "casex")) => {
                self.pos += 1;
                self.case_statement(kw)
            }
            (TokenKind::Punctuation, "#") => Err(self.unsupported("delay control")),
            (TokenKind::Punctuation, "@") => Err(self.unsupported("event control")),
            (TokenKind::Keyword, kw) => Err(self.unsupported(kw)),
            (TokenKind::Identifier, name) if name.starts_with('$') => Err(self.unsupported(name)),
            (TokenKind::Identifier, _) | (TokenKind::Punctuation, "{") => {
                if t.kind == TokenKind::Identifier
                    && self
                        .peek_at(1)
                        .is_some_and(|n| n.is(TokenKind::Punctuation, "(") || n.is(TokenKind::Punctuation, ";"))
                {
                    return Err(self.unsupported("task call"));
                }
                let lhs = self.lvalue()?;
                let kind = if self.eat(TokenKind::Operator, "=") {
                    NodeKind::BlockingAssign
                } else if self.eat(TokenKind::Operator, "<=") {
                    NodeKind::NonblockingAssign
                } else {
                    return Err(self.malformed("expected `=` or `<=` in assignment"));
                };
                if self.at_punct("@") {
                    return Err(self.unsupported("intra-assignment event control"));
                }
                self.skip_delay()?;
                let rhs = self.expression()?;
                self.expect_punct(";")?;
                Ok(AstNode::new(kind).with_children(vec![lhs, rhs]))
            }
            (_, text) => Err(self.malformed(format!("unexpected `{text}` in statement"))),
        }
    }

    fn case_statement(&mut self, kw: &str) -> PResult<AstNode> {
        self.expect_punct("(")?;
        let selector = self.expression()?;
        self.expect_punct(")")?;
        let mut node = AstNode::new(NodeKind::CaseStmt).with_modifier(kw).with_children(vec![selector]);
        loop {
            if self.eat(TokenKind::Keyword, "endcase") {
                return Ok(node);
            }
            if self.peek().is_none() {
                return Err(self.malformed("missing `endcase`"));
            }
            let mut item = AstNode::new(NodeKind::CaseItem);
            if self.eat(TokenKind::Keyword, "default") {
                item.modifiers.push("default".into());
                self.eat(TokenKind::Operator, ":");
            } else {
                loop {
                    item.children.push(self.expression()?);
                    if !self.eat(TokenKind::Punctuation, ",") {
                        break;
                    }
                }
                self.expect(TokenKind::Operator, ":")?;
            }
            item.children.push(self.statement()?);
            node.children.push(item);
        }
    }

    fn instantiation(&mut self, out: &mut Vec<AstNode>) -> PResult<()> {
        let module_type = self.identifier()?;
        let mut params = Vec::new();
        if self.eat(TokenKind::Punctuation, "#") {
            self.expect_punct("(")?;
            params = self.connection_list()?;
            for p in &mut params {
                p.modifiers.push("param".into());
            }
        }
        loop {
            let name = self.identifier()?;
            if self.at_punct("[") {
                return Err(self.unsupported("instance array"));
            }
            self.expect_punct("(")?;
            let mut inst = AstNode::labeled(NodeKind::Instance, name).with_modifier(module_type.clone());
            inst.children.extend(params.iter().cloned());
            inst.children.extend(self.connection_list()?);
            out.push(inst);
            if !self.eat(TokenKind::Punctuation, ",") {
                break;
            }
        }
        self.expect_punct(";")
    }

    /// Named or positional connections, after the opening parenthesis.
    fn connection_list(&mut self) -> PResult<Vec<AstNode>> {
        let mut conns = Vec::new();
        if self.eat(TokenKind::Punctuation, ")") {
            return Ok(conns);
        }
        loop {
            if self.eat(TokenKind::Punctuation, ".") {
                if self.at_op("*") {
                    return Err(self.unsupported(".* connection"));
                }
                let formal = self.identifier()?;
                self.expect_punct("(")?;
                let mut conn = AstNode::labeled(NodeKind::PortConn, formal);
                if !self.at_punct(")") {
                    conn.children.push(self.expression()?);
                }
                self.expect_punct(")")?;
                conns.push(conn);
            } else {
                let mut conn = AstNode::new(NodeKind::PortConn);
                if !self.at_punct(",") && !self.at_punct(")") {
                    conn.children.push(self.expression()?);
                }
                conns.push(conn);
            }
            if self.eat(TokenKind::Punctuation, ",") {
                continue;
            }
            self.expect_punct(")")?;
            return Ok(conns);
        }
    }

    fn lvalue(&mut self) -> PResult<AstNode> {
        let line = self.line();
        let node = self.primary()?;
        if is_lvalue(&node) {
            Ok(node)
        } else {
            Err(ParseError::Malformed { message: "invalid assignment target".into(), line })
        }
    }

    fn expression(&mut self) -> PResult<AstNode> {
        let cond = self.binary(1)?;
        if self.eat(TokenKind::Operator, "?") {
            let then = self.expression()?;
            self.expect(TokenKind::Operator, ":")?;
            let other = self.expression()?;
            return Ok(AstNode::labeled(NodeKind::TernaryOp, "?:").with_children(vec![cond, then, other]));
        }
        Ok(cond)
    }

    fn binary(&mut self, min_prec: u8) -> PResult<AstNode> {
        let mut lhs = self.unary()?;
        while let Some(t) = self.peek().filter(|t| t.kind == TokenKind::Operator) {
            let Some(prec) = binary_precedence(&t.text) else {
                break;
            };
            if prec < min_prec {
                break;
            }
            self.pos += 1;
            let rhs = self.binary(prec + 1)?;
            lhs = AstNode::labeled(NodeKind::BinaryOp, t.text.clone()).with_children(vec![lhs, rhs]);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<AstNode> {
        if let Some(t) = self.peek().filter(|t| t.kind == TokenKind::Operator && UNARY_OPS.contains(&t.text.as_str())) {
            self.pos += 1;
            let operand = self.unary()?;
            return Ok(AstNode::labeled(NodeKind::UnaryOp, t.text.clone()).with_children(vec![operand]));
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<AstNode> {
        let t = self.peek().ok_or_else(|| self.malformed("expected expression, found end of input"))?;
        match t.kind {
            TokenKind::Number => {
                self.pos += 1;
                Ok(AstNode::labeled(NodeKind::NumberLit, t.text.clone()))
            }
            TokenKind::StringLiteral => Err(self.unsupported("string literal")),
            TokenKind::Identifier if SYSTEM_FUNCTIONS.contains(&t.text.as_str()) => {
                self.pos += 1;
                self.expect_punct("(")?;
                let mut node = AstNode::labeled(NodeKind::UnaryOp, t.text.clone());
                loop {
                    node.children.push(self.expression()?);
                    if !self.eat(TokenKind::Punctuation, ",") {
                        break;
                    }
                }
                self.expect_punct(")")?;
                Ok(node)
            }
            TokenKind::Identifier => {
                let name = self.identifier()?;
                if self.at_punct("(") {
                    return Err(self.unsupported("function call"));
                }
                if self.at_punct(".") {
                    return Err(self.unsupported("hierarchical reference"));
                }
                let mut node = AstNode::labeled(NodeKind::IdentRef, name);
                while self.eat(TokenKind::Punctuation, "[") {
                    let first = self.expression()?;
                    if self.eat(TokenKind::Punctuation, "]") {
                        node = AstNode::new(NodeKind::BitSelect).with_children(vec![node, first]);
                        continue;
                    }
                    let op = match self.peek() {
                        Some(t) if t.kind == TokenKind::Operator && matches!(t.text.as_str(), ":" | "+:" | "-:") => {
                            t.text.clone()
                        }
                        _ => return Err(self.malformed("expected `]`, `:`, `+:` or `-:` in select")),
                    };
                    self.pos += 1;
                    let second = self.expression()?;
                    self.expect_punct("]")?;
                    node = AstNode::labeled(NodeKind::PartSelect, op).with_children(vec![node, first, second]);
                }
                Ok(node)
            }
            TokenKind::Punctuation if t.text == "(" => {
                self.pos += 1;
                let e = self.expression()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            TokenKind::Punctuation if t.text == "{" => {
                self.pos += 1;
                let first = self.expression()?;
                if self.eat(TokenKind::Punctuation, "{") {
                    let mut inner = AstNode::new(NodeKind::Concat);
                    loop {
                        inner.children.push(self.expression()?);
                        if !self.eat(TokenKind::Punctuation, ",") {
                            break;
                        }
                    }
                    self.expect_punct("}")?;
                    self.expect_punct("}")?;
                    return Ok(AstNode::new(NodeKind::Replicate).with_children(vec![first, inner]));
                }
                let mut node = AstNode::new(NodeKind::Concat).with_children(vec![first]);
                while self.eat(TokenKind::Punctuation, ",") {
                    node.children.push(self.expression()?);
                }
                self.expect_punct("}")?;
                Ok(node)
            }
            TokenKind::Keyword => Err(self.malformed(format!("unexpected keyword `{}` in expression", t.text))),
            _ => Err(self.malformed(format!("unexpected `{}` in expression", t.text))),
        }
    }
}

fn is_direction(s: &str) -> bool {
    matches!(s, "input" | "output" | "inout")
}

fn is_lvalue(n: &AstNode) -> bool {
    match n.kind {
        NodeKind::IdentRef => true,
        NodeKind::BitSelect | NodeKind::PartSelect => is_lvalue(&n.children[0]),
        NodeKind::Concat => n.children.iter().all(is_lvalue),
        _ => false,
    }
}
