// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;

use proptest::prelude::*;
use tbloop_core::verilog::*;

const ENCODER: &str = include_str!("fixtures/serial_audio_encoder.v");
const MISC: &str = include_str!("fixtures/corpus_misc.v");

fn short(kind: TokenKind) -> &'static str {
    match kind {
        TokenKind::Identifier => "I",
        TokenKind::Number => "N",
        TokenKind::Keyword => "K",
        TokenKind::Operator => "O",
        TokenKind::Punctuation => "P",
        TokenKind::StringLiteral => "S",
    }
}

fn golden(src: &str) -> String {
    lex(src).unwrap().iter().map(|t| format!("{}:{}", short(t.kind), t.text)).collect::<Vec<_>>().join(" ")
}

#[test]
fn golden_tokens() {
    let cases: &[(&str, &str)] = &[
        ("2'b01", "N:2'b01"),
        (
            "always @(posedge clk or posedge reset) begin",
            "K:always P:@ P:( K:posedge I:clk K:or K:posedge I:reset P:) K:begin",
        ),
        ("if (reset) begin", "K:if P:( I:reset P:) K:begin"),
        ("shift_count <= shift_count - 1'b1;", "I:shift_count O:<= I:shift_count O:- N:1'b1 P:;"),
        ("is_valid_shift <= shift_count != 0;", "I:is_valid_shift O:<= I:shift_count O:!= N:0 P:;"),
        ("shift <= shift << 1;", "I:shift O:<= I:shift O:<< N:1 P:;"),
        ("reg_lrclk <= 1'b1;", "I:reg_lrclk O:<= N:1'b1 P:;"),
        ("0/1 ==>    reg_sdata <= 2'b00;", "N:0 O:/ N:1 O:== O:> I:reg_sdata O:<= N:2'b00 P:;"),
        ("`timescale 1ns / 1ps\nmodule testbench;", "K:module I:testbench P:;"),
        ("localparam width = 16;", "K:localparam I:width O:= N:16 P:;"),
        ("reg reset;", "K:reg I:reset P:;"),
        ("serial_audio_encoder #(width) uut (", "I:serial_audio_encoder P:# P:( I:width P:) I:uut P:("),
        ("always #5 clk = ~clk;", "K:always P:# N:5 I:clk O:= O:~ I:clk P:;"),
        ("reset = 1;\n#10;", "I:reset O:= N:1 P:; P:# N:10 P:;"),
        (
            "$display(\"Test Case 1. Expected i_ready: 0, is_underrun: 0\");",
            "I:$display P:( S:\"Test Case 1. Expected i_ready: 0, is_underrun: 0\" P:) P:;",
        ),
        (
            "if (i_ready !== 0 || is_underrun !== 0) error_count = error_count + 1;",
            "K:if P:( I:i_ready O:!== N:0 O:|| I:is_underrun O:!== N:0 P:) I:error_count O:= I:error_count O:+ N:1 P:;",
        ),
        ("$finish;", "I:$finish P:;"),
        ("end else begin", "K:end K:else K:begin"),
        ("is_underrun <= 1'b1; // underflow", "I:is_underrun O:<= N:1'b1 P:;"),
        (
            "Test Case 1. Expected i_ready: 2'b01, is_underrun: 3'b100",
            "I:Test I:Case N:1 P:. I:Expected I:i_ready O:: N:2'b01 P:, I:is_underrun O:: N:3'b100",
        ),
        ("if (error_count == 0) begin", "K:if P:( I:error_count O:== N:0 P:) K:begin"),
        ("8'hFF 'd7 4'b10_x1 3.14 1e3 8'h ff", "N:8'hFF N:'d7 N:4'b10_x1 N:3.14 N:1e3 N:8'h ff"),
    ];
    for (src, want) in cases {
        assert_eq!(golden(src), *want, "snippet {src:?}");
    }
}

#[test]
fn encoder_always_block_has_nested_if() {
    let m = parse_source(ENCODER).unwrap();
    let always = m.children.iter().find(|c| c.kind == NodeKind::AlwaysBlock).unwrap();
    let events: Vec<_> = always
        .children
        .iter()
        .filter(|c| c.kind == NodeKind::EventExpr)
        .map(|e| (e.modifiers[0].as_str(), e.children[0].label()))
        .collect();
    assert_eq!(events, [("posedge", "clk"), ("posedge", "reset")]);
    let body = always.children.last().unwrap();
    assert_eq!(body.kind, NodeKind::SeqBlock);
    let outer_if = &body.children[0];
    assert_eq!(outer_if.kind, NodeKind::IfStmt);
    let else_block = &outer_if.children[2];
    assert_eq!(else_block.children[0].kind, NodeKind::IfStmt);
}

#[test]
fn encoder_interface() {
    let i = extract_interface(&parse_source(ENCODER).unwrap());
    assert_eq!(i.name, "serial_audio_encoder");
    assert_eq!(i.parameters, vec![Parameter { name: "width".into(), default: "16".into() }]);
    let audio = i.port("i_audio").unwrap();
    assert_eq!((audio.direction, audio.width, audio.symbolic_width), (Direction::Input, 1, true));
    let names: Vec<_> = i.ports.iter().map(|p| p.name.as_str()).collect();
    assert_eq!(
        names,
        ["reset", "clk", "i_valid", "i_ready", "i_is_left", "i_audio", "is_underrun", "sclk", "lrclk", "sdata"]
    );
}

fn port(name: &str, direction: Direction, width: u32, symbolic_width: bool) -> Port {
    Port { name: name.into(), direction, width, symbolic_width }
}

#[test]
fn handwritten_interfaces() {
    use Direction::*;
    #[allow(clippy::type_complexity)]
    let cases: Vec<(&str, Vec<Port>, Vec<(&str, &str)>)> = vec![
        ("module a; endmodule", vec![], vec![]),
        (
            "module b(input x, output y); endmodule",
            vec![port("x", Input, 1, false), port("y", Output, 1, false)],
            vec![],
        ),
        (
            "module c(input [7:0] d, output reg [0:3] q); endmodule",
            vec![port("d", Input, 8, false), port("q", Output, 4, false)],
            vec![],
        ),
        (
            "module d(p, q); output [3:0] q; input p; endmodule",
            vec![port("q", Output, 4, false), port("p", Input, 1, false)],
            vec![],
        ),
        (
            "module e #(parameter N = 4, M = N * 2) (input [N-1:0] a, inout [2*8-1:0] bus); endmodule",
            vec![port("a", Input, 1, true), port("bus", Inout, 16, false)],
            vec![("N", "4"), ("M", "N * 2")],
        ),
        (
            "module f(input signed [15:0] s, output wire signed [31:0] p); endmodule",
            vec![port("s", Input, 16, false), port("p", Output, 32, false)],
            vec![],
        ),
        (
            "module g(input a, b, c, output [1:0] y, z); parameter DEPTH = 8'd32; endmodule",
            vec![
                port("a", Input, 1, false),
                port("b", Input, 1, false),
                port("c", Input, 1, false),
                port("y", Output, 2, false),
                port("z", Output, 2, false),
            ],
            vec![("DEPTH", "8'd32")],
        ),
        (
            "module h(input [(1<<3)-1:0] w, input [3'd7:3'd4] hi); endmodule",
            vec![port("w", Input, 8, false), port("hi", Input, 4, false)],
            vec![],
        ),
        (
            "module i(input [$clog2(8)-1:0] addr); localparam L = 1; endmodule",
            vec![port("addr", Input, 1, true)],
            vec![],
        ),
        (
            "module j #(parameter [7:0] INIT = 8'hA5) (clk, q); input clk; output reg [7:0] q; endmodule",
            vec![port("clk", Input, 1, false), port("q", Output, 8, false)],
            vec![("INIT", "8'hA5")],
        ),
    ];
    for (src, ports, params) in cases {
        let i = extract_interface(&parse_source(src).unwrap());
        assert_eq!(i.ports, ports, "{src}");
        let got: Vec<_> = i.parameters.iter().map(|p| (p.name.as_str(), p.default.as_str())).collect();
        assert_eq!(got, params, "{src}");
    }
}

fn edge_set(list: &[(&str, &str)]) -> BTreeSet<(String, String)> {
    list.iter().map(|(s, t)| (s.to_string(), t.to_string())).collect()
}

#[test]
fn encoder_dataflow_graph() {
    // Traced by hand from the fixture: RHS signals plus enclosing conditions.
    let want = edge_set(&[
        ("clk", "sclk"),
        ("reg_lrclk", "lrclk"),
        ("reg_sdata", "sdata"),
        ("is_valid_shift", "i_ready"),
        ("reset", "shift_count"),
        ("shift_count", "shift_count"),
        ("is_valid_shift", "shift_count"),
        ("i_valid", "shift_count"),
        ("reset", "is_valid_shift"),
        ("shift_count", "is_valid_shift"),
        ("is_valid_shift", "is_valid_shift"),
        ("i_valid", "is_valid_shift"),
        ("reset", "shift"),
        ("shift", "shift"),
        ("is_valid_shift", "shift"),
        ("i_audio", "shift"),
        ("i_valid", "shift"),
        ("reset", "reg_sdata"),
        ("reg_sdata", "reg_sdata"),
        ("shift", "reg_sdata"),
        ("is_valid_shift", "reg_sdata"),
        ("i_valid", "reg_sdata"),
        ("reset", "reg_lrclk"),
        ("is_valid_shift", "reg_lrclk"),
        ("i_valid", "reg_lrclk"),
        ("i_is_left", "reg_lrclk"),
        ("reset", "is_next_left"),
        ("is_valid_shift", "is_next_left"),
        ("i_valid", "is_next_left"),
        ("i_is_left", "is_next_left"),
        ("reset", "is_underrun"),
        ("is_valid_shift", "is_underrun"),
        ("i_valid", "is_underrun"),
    ]);
    assert_eq!(want.len(), 33);
    let got = extract_dfg(&parse_source(ENCODER).unwrap());
    assert_eq!(got.edges, want);
}

#[test]
fn misc_dataflow_graph() {
    let want = edge_set(&[
        ("a", "sum"),
        ("b", "sum"),
        ("sum", "y"),
        ("a", "y"),
        ("idx", "y"),
        ("b", "y"),
        ("a", "carry"),
        ("b", "carry"),
        ("sel", "z"),
        ("a", "z"),
        ("b", "z"),
        ("sum", "mem"),
        ("a", "q"),
        ("b", "q"),
    ]);
    let got = extract_dfg(&parse_source(MISC).unwrap());
    assert_eq!(got.edges, want);
}

#[test]
fn every_node_kind_is_reachable_from_the_corpus() {
    let mut seen = BTreeSet::new();
    for src in [ENCODER, MISC] {
        parse_source(src).unwrap().walk(&mut |n| {
            seen.insert(n.kind);
        });
    }
    let missing: Vec<_> = NodeKind::ALL.iter().filter(|k| !seen.contains(k)).collect();
    assert!(missing.is_empty(), "unreached kinds: {missing:?}");
}

#[test]
fn identifiers_in_ast_are_lexed_identifiers() {
    let tokens = lex(MISC).unwrap();
    let idents: BTreeSet<_> =
        tokens.iter().filter(|t| t.kind == TokenKind::Identifier).map(|t| t.text.clone()).collect();
    parse_module(&tokens).unwrap().walk(&mut |n| {
        if n.kind == NodeKind::IdentRef {
            assert!(idents.contains(n.label()), "{}", n.label());
        }
    });
}

fn token_strategy() -> impl Strategy<Value = (TokenKind, String)> {
    let ident = "[a-zA-Z_][a-zA-Z0-9_$]{0,6}"
        .prop_filter_map("keyword", |s| (!is_keyword(&s)).then_some((TokenKind::Identifier, s)));
    let keyword = proptest::sample::select(KEYWORDS).prop_map(|k| (TokenKind::Keyword, k.to_string()));
    let number = prop_oneof![
        "[0-9]{1,5}",
        "[1-9][0-9]?'[bB][01xz_]{1,8}",
        "[1-9][0-9]?'[hH][0-9a-fA-F]{1,4}",
        "'[dD][0-9]{1,3}",
        "[0-9]{1,3}\\.[0-9]{1,3}",
    ]
    .prop_map(|s| (TokenKind::Number, s));
    let op = proptest::sample::select(vec![
        "<<<", ">>>", "===", "!==", "==", "!=", "<=", ">=", "&&", "||", "**", "<<", ">>", "~&", "~|", "~^", "^~", "+:",
        "-:", "+", "-", "*", "/", "%", "<", ">", "!", "~", "&", "|", "^", "=", "?", ":",
    ])
    .prop_map(|o| (TokenKind::Operator, o.to_string()));
    let punct = proptest::sample::select(vec!["(", ")", "[", "]", "{", "}", ";", ",", ".", "#", "@"])
        .prop_map(|p| (TokenKind::Punctuation, p.to_string()));
    let string = "[a-zA-Z0-9 .:,]{0,12}".prop_map(|s| (TokenKind::StringLiteral, format!("\"{s}\"")));
    prop_oneof![ident, keyword, number, op, punct, string]
}

proptest! {
    #[test]
    fn space_joined_tokens_relex_identically(toks in proptest::collection::vec(token_strategy(), 0..40)) {
        let joined = toks.iter().map(|(_, t)| t.as_str()).collect::<Vec<_>>().join(" ");
        let relexed: Vec<_> = lex(&joined).unwrap().into_iter().map(|t| (t.kind, t.text)).collect();
        prop_assert_eq!(relexed, toks);
    }

    #[test]
    fn render_then_lex_is_stable(seed in 0usize..2) {
        let src = [ENCODER, MISC][seed];
        let toks = lex(src).unwrap();
        let again = lex(&render_tokens(&toks)).unwrap();
        let a: Vec<_> = toks.iter().map(|t| (t.kind, t.text.clone())).collect();
        let b: Vec<_> = again.iter().map(|t| (t.kind, t.text.clone())).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn dfg_ignores_whitespace_and_comments(extra in proptest::collection::vec(prop_oneof![
        Just(" "), Just("\n"), Just("\t"), Just(" /* note */ "), Just(" // c\n")
    ], 1..8)) {
        // Re-space the token stream with random separators and comments.
        let toks = lex(ENCODER).unwrap();
        let mut src = String::new();
        for (i, t) in toks.iter().enumerate() {
            src.push_str(&t.text);
            src.push_str(extra[i % extra.len()]);
        }
        let a = extract_dfg(&parse_source(ENCODER).unwrap());
        let b = extract_dfg(&parse_source(&src).unwrap());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn dfg_invariant_under_item_reordering(perm in Just((0..4usize).collect::<Vec<_>>()).prop_shuffle()) {
        let assigns = [
            "assign sclk = clk;",
            "assign lrclk = reg_lrclk;",
            "assign sdata = reg_sdata[1];",
            "assign i_ready = !is_valid_shift;",
        ];
        let block: String = assigns.join("\n  ");
        let shuffled: String = perm.iter().map(|&i| assigns[i]).collect::<Vec<_>>().join("\n  ");
        let reordered = ENCODER.replacen(&block, &shuffled, 1);
        prop_assert!(reordered != ENCODER || perm == vec![0, 1, 2, 3]);
        let a = extract_dfg(&parse_source(ENCODER).unwrap());
        let b = extract_dfg(&parse_source(&reordered).unwrap());
        prop_assert_eq!(a, b);
    }
}
