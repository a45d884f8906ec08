// SPDX-License-Identifier: Apache-2.0

//! Verilog subset frontend: tokens, syntax tree, module interface and
//! dataflow graph.

mod ast;
mod dfg;
mod interface;
mod lexer;
mod parser;

pub use ast::{AstNode, NodeKind};
pub use dfg::{extract_dfg, extract_dfg_with, Dfg};
pub use interface::{const_eval, extract_interface, number_value, Direction, ModuleInterface, Parameter, Port};
pub use lexer::{is_keyword, lex, render_tokens, LexError, LexErrorKind, Token, TokenKind, KEYWORDS};
pub use parser::{parse_module, parse_source, ParseError};
