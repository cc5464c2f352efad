// SPDX-License-Identifier: Apache-2.0

//! ISCAS `.bench` reader and writer.
//!
//! Besides the standard `INPUT(x)`, `OUTPUT(y)` and `y = TYPE(a, b, ...)`
//! lines, LUTs are written as `y = LUT[b0b1...](a, b, ...)` where `bj` is the
//! output for fanin pattern `j` (first fanin is the most significant bit).
//! Inputs whose name starts with [`KEY_INPUT_PREFIX`] are key inputs.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{Circuit, Gate, GateId, GateType, NetlistError};

pub const KEY_INPUT_PREFIX: &str = "keyinput";

enum Decl<'a> {
    Input(&'a str),
    Output(&'a str),
    Gate {
        name: &'a str,
        kind: GateType,
        table: Option<Vec<bool>>,
        args: Vec<(&'a str, usize)>,
    },
}

struct LineCursor<'a> {
    text: &'a str,
    pos: usize,
    line: usize,
}

fn is_name_char(c: char) -> bool {
    !c.is_whitespace() && !matches!(c, '(' | ')' | ',' | '=' | '#' | '[' | ']')
}

impl<'a> LineCursor<'a> {
    fn err(&self, message: impl Into<String>) -> NetlistError {
        NetlistError::Syntax {
            line: self.line,
            column: self.text[..self.pos].chars().count() + 1,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        let rest = &self.text[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.text.len()
    }

    fn expect(&mut self, c: char) -> Result<(), NetlistError> {
        self.skip_ws();
        match self.peek() {
            Some(p) if p == c => {
                self.pos += c.len_utf8();
                Ok(())
            }
            Some(p) => Err(self.err(format!("expected `{c}`, found `{p}`"))),
            None => Err(self.err(format!("expected `{c}`, found end of line"))),
        }
    }

    fn name(&mut self) -> Result<(&'a str, usize), NetlistError> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.text[start..];
        let len = rest.find(|c: char| !is_name_char(c)).unwrap_or(rest.len());
        if len == 0 {
            return Err(self.err("expected a net name"));
        }
        let col = self.text[..start].chars().count() + 1;
        self.pos += len;
        Ok((&rest[..len], col))
    }
}

fn parse_line(raw: &str, line: usize) -> Result<Option<Decl<'_>>, NetlistError> {
    let text = match raw.find('#') {
        Some(i) => &raw[..i],
        None => raw,
    };
    let mut cur = LineCursor { text, pos: 0, line };
    if cur.at_end() {
        return Ok(None);
    }
    let (first, _) = cur.name()?;
    cur.skip_ws();
    match cur.peek() {
        Some('(') => {
            let upper = first.to_ascii_uppercase();
            cur.expect('(')?;
            let (net, _) = cur.name()?;
            cur.expect(')')?;
            if !cur.at_end() {
                return Err(cur.err("unexpected trailing text"));
            }
            match upper.as_str() {
                "INPUT" => Ok(Some(Decl::Input(net))),
                "OUTPUT" => Ok(Some(Decl::Output(net))),
                _ => Err(NetlistError::Syntax {
                    line,
                    column: 1,
                    message: format!("unknown declaration `{first}`"),
                }),
            }
        }
        Some('=') => {
            cur.expect('=')?;
            let (kw, kw_col) = cur.name()?;
            let kind = GateType::from_keyword(kw).ok_or_else(|| NetlistError::Syntax {
                line,
                column: kw_col,
                message: format!("unknown gate type `{kw}`"),
            })?;
            cur.skip_ws();
            let table = if cur.peek() == Some('[') {
                if kind != GateType::Lut {
                    return Err(cur.err("only LUT gates take a truth table"));
                }
                cur.expect('[')?;
                let mut bits = Vec::new();
                loop {
                    match cur.peek() {
                        Some('0') => bits.push(false),
                        Some('1') => bits.push(true),
                        Some(']') => break,
                        Some(c) => return Err(cur.err(format!("invalid truth-table digit `{c}`"))),
                        None => return Err(cur.err("unterminated truth table")),
                    }
                    cur.pos += 1;
                }
                cur.expect(']')?;
                Some(bits)
            } else if kind == GateType::Lut {
                return Err(cur.err("LUT gate requires a `[bits]` truth table"));
            } else {
                None
            };
            cur.expect('(')?;
            let mut args = Vec::new();
            cur.skip_ws();
            if cur.peek() != Some(')') {
                loop {
                    args.push(cur.name()?);
                    cur.skip_ws();
                    match cur.peek() {
                        Some(',') => cur.pos += 1,
                        Some(')') => break,
                        Some(c) => return Err(cur.err(format!("expected `,` or `)`, found `{c}`"))),
                        None => return Err(cur.err("unterminated argument list")),
                    }
                }
            }
            cur.expect(')')?;
            if !cur.at_end() {
                return Err(cur.err("unexpected trailing text"));
            }
            Ok(Some(Decl::Gate {
                name: first,
                kind,
                table,
                args,
            }))
        }
        Some(c) => Err(cur.err(format!("expected `(` or `=`, found `{c}`"))),
        None => Err(cur.err("incomplete declaration")),
    }
}

/// Parses bench text into a validated [`Circuit`].
///
/// Gates get ids in declaration order; fanins may reference nets declared
/// later in the file.
pub fn parse_bench(text: &str) -> Result<Circuit, NetlistError> {
    struct Pending<'a> {
        name: &'a str,
        kind: GateType,
        table: Option<Vec<bool>>,
        args: Vec<(&'a str, usize)>,
        line: usize,
    }

    let mut defs: Vec<Pending<'_>> = Vec::new();
    let mut index: HashMap<&str, GateId> = HashMap::new();
    let mut outputs: Vec<(&str, usize)> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let Some(decl) = parse_line(raw, line)? else {
            continue;
        };
        let (name, kind, table, args) = match decl {
            Decl::Output(net) => {
                outputs.push((net, line));
                continue;
            }
            Decl::Input(net) => (net, GateType::Input, None, Vec::new()),
            Decl::Gate {
                name,
                kind,
                table,
                args,
            } => (name, kind, table, args),
        };
        if index.insert(name, defs.len()).is_some() {
            return Err(NetlistError::DuplicateDefinition {
                name: name.to_string(),
                line,
            });
        }
        defs.push(Pending {
            name,
            kind,
            table,
            args,
            line,
        });
    }

    let mut gates = Vec::with_capacity(defs.len());
    let mut primary_inputs = Vec::new();
    let mut key_inputs = Vec::new();
    for (id, d) in defs.into_iter().enumerate() {
        let mut fanin = Vec::with_capacity(d.args.len());
        for (arg, _col) in &d.args {
            let f = *index.get(arg).ok_or_else(|| NetlistError::UndefinedNet {
                name: arg.to_string(),
                line: d.line,
            })?;
            fanin.push(f);
        }
        if d.kind == GateType::Input {
            if d.name.starts_with(KEY_INPUT_PREFIX) {
                key_inputs.push(id);
            } else {
                primary_inputs.push(id);
            }
        }
        gates.push(Gate {
            id,
            name: d.name.to_string(),
            kind: d.kind,
            fanin,
            lut_table: d.table,
        });
    }
    let primary_outputs = outputs
        .into_iter()
        .map(|(net, line)| {
            index.get(net).copied().ok_or_else(|| NetlistError::UndefinedNet {
                name: net.to_string(),
                line,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    Circuit::new(gates, primary_inputs, key_inputs, primary_outputs)
}

/// Writes a circuit in bench syntax such that [`parse_bench`] reproduces
/// the same ids, names, types and fanin order.
pub fn emit_bench(c: &Circuit) -> String {
    let mut out = String::new();
    let gates = c.gates();
    let leading_inputs = gates.iter().take_while(|g| g.kind == GateType::Input).count();
    for g in &gates[..leading_inputs] {
        let _ = writeln!(out, "INPUT({})", g.name);
    }
    for &o in c.primary_outputs() {
        let _ = writeln!(out, "OUTPUT({})", gates[o].name);
    }
    for g in &gates[leading_inputs..] {
        if g.kind == GateType::Input {
            let _ = writeln!(out, "INPUT({})", g.name);
            continue;
        }
        let args: Vec<&str> = g.fanin.iter().map(|&f| gates[f].name.as_str()).collect();
        match &g.lut_table {
            Some(t) => {
                let bits: String = t.iter().map(|&b| if b { '1' } else { '0' }).collect();
                let _ = writeln!(out, "{} = LUT[{}]({})", g.name, bits, args.join(", "));
            }
            None => {
                let _ = writeln!(out, "{} = {}({})", g.name, g.kind.keyword(), args.join(", "));
            }
        }
    }
    out
}
