// SPDX-License-Identifier: Apache-2.0

//! Tokenizer for the synthesizable Verilog subset.
//!
//! Comments, whitespace, attributes `(* ... *)`, escaped identifiers and
//! compiler-directive lines produce no tokens.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TokenKind {
    Identifier,
    Number,
    Keyword,
    Operator,
    Punctuation,
    StringLiteral,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    /// Exact source slice.
    pub text: String,
    /// 1-based source line.
    pub line: usize,
}

impl Token {
    pub fn is(&self, kind: TokenKind, text: &str) -> bool {
        self.kind == kind && self.text == text
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LexErrorKind {
    UnterminatedString,
    UnterminatedComment,
    UnterminatedAttribute,
    MalformedNumber,
    IllegalCharacter(char),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub kind: LexErrorKind,
    pub line: usize,
    pub column: usize,
}

impl core::error::Error for LexError {}

impl fmt::Display for LexError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            LexErrorKind::UnterminatedString => write!(f, "unterminated string literal")?,
            LexErrorKind::UnterminatedComment => write!(f, "unterminated block comment")?,
            LexErrorKind::UnterminatedAttribute => write!(f, "unterminated attribute")?,
            LexErrorKind::MalformedNumber => write!(f, "malformed number literal")?,
            LexErrorKind::IllegalCharacter(c) => write!(f, "illegal character {c:?}")?,
        }
        write!(f, " at line {}, column {}", self.line, self.column)
    }
}

pub const KEYWORDS: &[&str] = &[
    "always",
    "and",
    "assign",
    "automatic",
    "begin",
    "buf",
    "bufif0",
    "bufif1",
    "case",
    "casex",
    "casez",
    "cell",
    "cmos",
    "config",
    "deassign",
    "default",
    "defparam",
    "design",
    "disable",
    "edge",
    "else",
    "end",
    "endcase",
    "endconfig",
    "endfunction",
    "endgenerate",
    "endmodule",
    "endprimitive",
    "endspecify",
    "endtable",
    "endtask",
    "event",
    "for",
    "force",
    "forever",
    "fork",
    "function",
    "generate",
    "genvar",
    "highz0",
    "highz1",
    "if",
    "ifnone",
    "incdir",
    "include",
    "initial",
    "inout",
    "input",
    "instance",
    "integer",
    "join",
    "large",
    "liblist",
    "library",
    "localparam",
    "macromodule",
    "medium",
    "module",
    "nand",
    "negedge",
    "nmos",
    "nor",
    "noshowcancelled",
    "not",
    "notif0",
    "notif1",
    "or",
    "output",
    "parameter",
    "pmos",
    "posedge",
    "primitive",
    "pull0",
    "pull1",
    "pulldown",
    "pullup",
    "pulsestyle_ondetect",
    "pulsestyle_onevent",
    "rcmos",
    "real",
    "realtime",
    "reg",
    "release",
    "repeat",
    "rnmos",
    "rpmos",
    "rtran",
    "rtranif0",
    "rtranif1",
    "scalared",
    "showcancelled",
    "signed",
    "small",
    "specify",
    "specparam",
    "strong0",
    "strong1",
    "supply0",
    "supply1",
    "table",
    "task",
    "time",
    "tran",
    "tranif0",
    "tranif1",
    "tri",
    "tri0",
    "tri1",
    "triand",
    "trior",
    "trireg",
    "unsigned",
    "use",
    "vectored",
    "wait",
    "wand",
    "weak0",
    "weak1",
    "while",
    "wire",
    "wor",
    "xnor",
    "xor",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.binary_search(&word).is_ok()
}

// Longest match first.
const OPERATORS: &[&str] = &[
    "<<<", ">>>", "===", "!==", "==", "!=", "<=", ">=", "&&", "||", "**", "<<", ">>", "~&", "~|", "~^", "^~", "->",
    "+:", "-:", "+", "-", "*", "/", "%", "<", ">", "!", "~", "&", "|", "^", "=", "?", ":",
];

const PUNCTUATION: &[char] = &['(', ')', '[', ']', '{', '}', ';', ',', '.', '#', '@'];

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    line_start: usize,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.rest().chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.line_start = self.pos;
        }
        Some(c)
    }

    fn column(&self) -> usize {
        self.src[self.line_start..self.pos].chars().count() + 1
    }

    fn error(&self, kind: LexErrorKind) -> LexError {
        LexError { kind, line: self.line, column: self.column() }
    }

    fn eat_while(&mut self, f: impl Fn(char) -> bool) {
        while let Some(c) = self.peek() {
            if !f(c) {
                break;
            }
            self.bump();
        }
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '$'
}

fn is_based_digit(c: char) -> bool {
    c.is_ascii_hexdigit() || matches!(c, 'x' | 'X' | 'z' | 'Z' | '?' | '_')
}

/// Tokenizes Verilog source text.
pub fn lex(source: &str) -> Result<Vec<Token>, LexError> {
    let mut cur = Cursor { src: source, pos: 0, line: 1, line_start: 0 };
    let mut tokens = Vec::new();

    while let Some(c) = cur.peek() {
        let start = cur.pos;
        let line = cur.line;

        if c.is_whitespace() {
            cur.bump();
            continue;
        }

        if cur.rest().starts_with("//") {
            cur.eat_while(|c| c != '\n');
            continue;
        }

        if cur.rest().starts_with("/*") {
            let err = cur.error(LexErrorKind::UnterminatedComment);
            cur.bump();
            cur.bump();
            loop {
                if cur.rest().starts_with("*/") {
                    cur.bump();
                    cur.bump();
                    break;
                }
                if cur.bump().is_none() {
                    return Err(err);
                }
            }
            continue;
        }

        // `(*)` is a wildcard sensitivity list, anything else after `(*` is an attribute.
        if cur.rest().starts_with("(*") && !cur.rest().starts_with("(*)") {
            let err = cur.error(LexErrorKind::UnterminatedAttribute);
            cur.bump();
            cur.bump();
            loop {
                if cur.rest().starts_with("*)") {
                    cur.bump();
                    cur.bump();
                    break;
                }
                if cur.bump().is_none() {
                    return Err(err);
                }
            }
            continue;
        }

        if c == '\\' {
            // escaped identifier, terminated by whitespace
            cur.bump();
            cur.eat_while(|c| !c.is_whitespace());
            continue;
        }

        if c == '`' {
            cur.bump();
            cur.eat_while(is_ident_char);
            let name = &source[start + 1..cur.pos];
            if is_directive(name) {
                cur.eat_while(|c| c != '\n');
            } else if name.is_empty() {
                return Err(cur.error(LexErrorKind::IllegalCharacter('`')));
            } else {
                tokens.push(Token { kind: TokenKind::Identifier, text: source[start..cur.pos].into(), line });
            }
            continue;
        }

        if c == '"' {
            let err = cur.error(LexErrorKind::UnterminatedString);
            cur.bump();
            loop {
                match cur.bump() {
                    None | Some('\n') => return Err(err),
                    Some('\\') => {
                        if cur.bump().is_none() {
                            return Err(err);
                        }
                    }
                    Some('"') => break,
                    Some(_) => {}
                }
            }
            tokens.push(Token { kind: TokenKind::StringLiteral, text: source[start..cur.pos].into(), line });
            continue;
        }

        if is_ident_start(c) || c == '$' {
            cur.bump();
            cur.eat_while(is_ident_char);
            let text = &source[start..cur.pos];
            let kind = if is_keyword(text) { TokenKind::Keyword } else { TokenKind::Identifier };
            tokens.push(Token { kind, text: text.into(), line });
            continue;
        }

        if c.is_ascii_digit() || (c == '\'' && is_base_char(cur.peek_at(1))) {
            lex_number(&mut cur)?;
            tokens.push(Token { kind: TokenKind::Number, text: source[start..cur.pos].into(), line });
            continue;
        }

        if let Some(op) = OPERATORS.iter().find(|op| cur.rest().starts_with(**op)) {
            for _ in 0..op.len() {
                cur.bump();
            }
            tokens.push(Token { kind: TokenKind::Operator, text: (*op).into(), line });
            continue;
        }

        if PUNCTUATION.contains(&c) {
            cur.bump();
            tokens.push(Token { kind: TokenKind::Punctuation, text: c.into(), line });
            continue;
        }

        return Err(cur.error(LexErrorKind::IllegalCharacter(c)));
    }

    Ok(tokens)
}

fn is_directive(name: &str) -> bool {
    matches!(
        name,
        "timescale"
            | "define"
            | "undef"
            | "include"
            | "ifdef"
            | "ifndef"
            | "else"
            | "elsif"
            | "endif"
            | "default_nettype"
            | "resetall"
            | "celldefine"
            | "endcelldefine"
            | "unconnected_drive"
            | "nounconnected_drive"
            | "line"
    )
}

fn is_base_char(c: Option<char>) -> bool {
    matches!(c, Some('b' | 'B' | 'o' | 'O' | 'd' | 'D' | 'h' | 'H' | 's' | 'S'))
}

/// Decimal, real, sized (`4'b1010`) and unsized based (`'hFF`) literals.
/// No whitespace is accepted between the size and the apostrophe; whitespace
/// between the base character and the digits is.
fn lex_number(cur: &mut Cursor<'_>) -> Result<(), LexError> {
    if cur.peek() != Some('\'') {
        cur.eat_while(|c| c.is_ascii_digit() || c == '_');
        if cur.peek() != Some('\'') {
            if cur.peek() == Some('.') && cur.peek_at(1).is_some_and(|c| c.is_ascii_digit()) {
                cur.bump();
                cur.eat_while(|c| c.is_ascii_digit() || c == '_');
            }
            if matches!(cur.peek(), Some('e' | 'E')) {
                let sign = matches!(cur.peek_at(1), Some('+' | '-'));
                let digit_at = if sign { 2 } else { 1 };
                if cur.peek_at(digit_at).is_some_and(|c| c.is_ascii_digit()) {
                    for _ in 0..digit_at {
                        cur.bump();
                    }
                    cur.eat_while(|c| c.is_ascii_digit() || c == '_');
                }
            }
            return Ok(());
        }
    }
    // at the apostrophe
    let err = cur.error(LexErrorKind::MalformedNumber);
    cur.bump();
    if matches!(cur.peek(), Some('s' | 'S')) {
        cur.bump();
    }
    if !matches!(cur.peek(), Some('b' | 'B' | 'o' | 'O' | 'd' | 'D' | 'h' | 'H')) {
        return Err(err);
    }
    cur.bump();
    let save = (cur.pos, cur.line, cur.line_start);
    cur.eat_while(|c| c == ' ' || c == '\t');
    let digits_start = cur.pos;
    cur.eat_while(is_based_digit);
    if cur.pos == digits_start {
        (cur.pos, cur.line, cur.line_start) = save;
        return Err(err);
    }
    Ok(())
}

/// Joins token texts with single spaces.
pub fn render_tokens(tokens: &[Token]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&t.text);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn kt(tokens: &[Token]) -> Vec<(TokenKind, &str)> {
        tokens.iter().map(|t| (t.kind, t.text.as_str())).collect()
    }

    #[test]
    fn keywords_are_sorted_for_binary_search() {
        let mut sorted = KEYWORDS.to_vec();
        sorted.sort_unstable();
        assert_eq!(sorted, KEYWORDS);
    }

    #[test]
    fn continuous_assign() {
        use TokenKind::*;
        let toks = lex("assign y = a & b;").unwrap();
        assert_eq!(
            kt(&toks),
            vec![
                (Keyword, "assign"),
                (Identifier, "y"),
                (Operator, "="),
                (Identifier, "a"),
                (Operator, "&"),
                (Identifier, "b"),
                (Punctuation, ";"),
            ]
        );
    }

    #[test]
    fn empty_and_comment_only() {
        assert!(lex("").unwrap().is_empty());
        assert!(lex("  // nothing\n/* block\n comment */ \n").unwrap().is_empty());
    }

    #[test]
    fn unterminated_string_reports_position() {
        let err = lex("x = \"abc").unwrap_err();
        assert_eq!(err.kind, LexErrorKind::UnterminatedString);
        assert_eq!((err.line, err.column), (1, 5));
    }

    #[test]
    fn illegal_character() {
        let err = lex("assign y = a\n  \u{00a7} b;").unwrap_err();
        assert_eq!(err.kind, LexErrorKind::IllegalCharacter('\u{00a7}'));
        assert_eq!((err.line, err.column), (2, 3));
    }

    #[test]
    fn lines_are_tracked() {
        let toks = lex("module m;\n\nendmodule").unwrap();
        assert_eq!(toks.iter().map(|t| t.line).collect::<Vec<_>>(), vec![1, 1, 1, 3]);
    }

    #[test]
    fn attributes_escaped_identifiers_and_directives_are_dropped() {
        let toks = lex("`timescale 1ns / 1ps\n(* keep *) wire \\bus[0] ;").unwrap();
        assert_eq!(kt(&toks), vec![(TokenKind::Keyword, "wire"), (TokenKind::Punctuation, ";")]);
    }

    #[test]
    fn star_sensitivity_is_not_an_attribute() {
        let toks = lex("always @(*)").unwrap();
        let texts: Vec<_> = toks.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(texts, vec!["always", "@", "(", "*", ")"]);
    }

    #[test]
    fn malformed_based_literal() {
        assert_eq!(lex("4'b").unwrap_err().kind, LexErrorKind::MalformedNumber);
        assert_eq!(lex("4'q1").unwrap_err().kind, LexErrorKind::MalformedNumber);
    }

    #[test]
    fn macro_usage_is_an_identifier() {
        let toks = lex("`WIDTH").unwrap();
        assert_eq!(kt(&toks), vec![(TokenKind::Identifier, "`WIDTH")]);
    }
}
