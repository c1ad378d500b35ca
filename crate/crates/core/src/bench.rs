// SPDX-License-Identifier: Apache-2.0

//! Reader for the ISCAS-89 `.bench` format, extended with `DFFE(data, enable)`.
//!
//! Flip-flop power-up values are carried in a comment directive
//! `#@ init <net> <0|1>` so files stay readable by stock `.bench` tools.

use crate::netlist::{GateKind, Netlist, NetlistBuilder, NetlistError};

fn syntax(line: usize, reason: impl Into<String>) -> NetlistError {
    NetlistError::Syntax {
        line,
        reason: reason.into(),
    }
}

fn valid_net_name(name: &str) -> bool {
    !name.is_empty()
        && !name
            .chars()
            .any(|c| c.is_whitespace() || matches!(c, '(' | ')' | ',' | '=' | '#'))
}

/// Splits `KEYWORD(arg, arg)` into the keyword and its argument list.
fn split_call(text: &str, line: usize) -> Result<(&str, Vec<&str>), NetlistError> {
    let open = text.find('(').ok_or_else(|| syntax(line, "expected '('"))?;
    let body = text[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| syntax(line, "expected ')' at end of line"))?;
    let keyword = text[..open].trim();
    if body.contains('(') || body.contains(')') {
        return Err(syntax(line, "nested parentheses"));
    }
    let args: Vec<&str> = body.split(',').map(str::trim).collect();
    for arg in &args {
        if !valid_net_name(arg) {
            return Err(syntax(line, format!("invalid net name {arg:?}")));
        }
    }
    Ok((keyword, args))
}

/// Parses and validates a `.bench` netlist.
///
/// The netlist name is taken from a leading `# <name>` comment when present.
pub fn parse_bench(text: &str) -> Result<Netlist, NetlistError> {
    let mut builder = NetlistBuilder::new("netlist");
    let mut named = false;
    let mut inits: Vec<(usize, String, bool)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let raw = raw.trim();
        if let Some(directive) = raw.strip_prefix("#@") {
            let parts: Vec<&str> = directive.split_whitespace().collect();
            match parts.as_slice() {
                ["init", net, value] => {
                    let bit = match *value {
                        "0" => false,
                        "1" => true,
                        _ => return Err(syntax(line_no, "init value must be 0 or 1")),
                    };
                    inits.push((line_no, net.to_string(), bit));
                }
                _ => return Err(syntax(line_no, "unknown directive")),
            }
            continue;
        }
        let (content, comment) = match raw.find('#') {
            Some(pos) => (raw[..pos].trim(), Some(raw[pos + 1..].trim())),
            None => (raw, None),
        };
        if content.is_empty() {
            if let (false, Some(c)) = (named, comment) {
                let mut words = c.split_whitespace();
                if let (Some(word), None) = (words.next(), words.next()) {
                    builder.set_name(word);
                    named = true;
                }
            }
            continue;
        }
        // any statement ends the header
        named = true;

        if let Some((lhs, rhs)) = content.split_once('=') {
            let lhs = lhs.trim();
            if !valid_net_name(lhs) {
                return Err(syntax(line_no, format!("invalid net name {lhs:?}")));
            }
            let (kind, args) = split_call(rhs.trim(), line_no)?;
            match kind.to_ascii_uppercase().as_str() {
                "DFF" => {
                    if args.len() != 1 {
                        return Err(syntax(line_no, "DFF takes exactly one input"));
                    }
                    builder.add_flip_flop(lhs, args[0], None);
                }
                "DFFE" => {
                    if args.len() != 2 {
                        return Err(syntax(line_no, "DFFE takes data and enable"));
                    }
                    builder.add_flip_flop(lhs, args[0], Some(args[1]));
                }
                _ => {
                    let gate =
                        GateKind::from_name(kind).ok_or_else(|| NetlistError::UnknownGateKind {
                            line: line_no,
                            kind: kind.to_string(),
                        })?;
                    if !gate.arity_ok(args.len()) {
                        return Err(syntax(
                            line_no,
                            format!("{gate} cannot take {} input(s)", args.len()),
                        ));
                    }
                    builder.add_gate(gate, lhs, &args);
                }
            }
        } else {
            let (keyword, args) = split_call(content, line_no)?;
            if args.len() != 1 {
                return Err(syntax(line_no, format!("{keyword} takes one net")));
            }
            match keyword.to_ascii_uppercase().as_str() {
                "INPUT" => {
                    builder.add_input(args[0]);
                }
                "OUTPUT" => {
                    builder.add_output(args[0]);
                }
                _ => return Err(syntax(line_no, format!("unknown statement {keyword:?}"))),
            }
        }
    }

    for (line, net, bit) in inits {
        if !builder.set_init(&net, bit) {
            return Err(syntax(
                line,
                format!("init target {net} is not a flip-flop"),
            ));
        }
    }
    builder.build()
}
