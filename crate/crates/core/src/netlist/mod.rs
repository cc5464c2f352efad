// SPDX-License-Identifier: Apache-2.0

//! Gate-level combinational netlists.
//!
//! A [`Circuit`] is a DAG of [`Gate`]s with dense ids. Primary inputs are
//! nodes of type [`GateType::Input`]; key inputs of locked circuits are
//! `Input` nodes too but are tracked separately in [`Circuit::key_inputs`].
//! LUT gates are key-programmable: their truth table is supplied through the
//! key vector during simulation.

mod bench;
mod graph;
mod sim;

pub use bench::{emit_bench, parse_bench, KEY_INPUT_PREFIX};
pub use graph::{graph_matrix, GraphKind, GraphMatrix, GraphOptions};
pub use sim::bits_msb_first;

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type GateId = usize;

/// Largest LUT arity accepted anywhere in the toolkit.
pub const MAX_LUT_ARITY: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetlistError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: reference to undefined net `{name}`")]
    UndefinedNet { name: String, line: usize },
    #[error("line {line}: net `{name}` is defined more than once")]
    DuplicateDefinition { name: String, line: usize },
    #[error("combinational cycle through gate `{0}`")]
    Cycle(String),
    #[error("gate `{name}` of type {kind} has invalid fanin count {got}")]
    Arity {
        name: String,
        kind: GateType,
        got: usize,
    },
    #[error("LUT `{name}` has {got} table bits, expected {expected}")]
    LutTable {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("gate `{gate}` references nonexistent gate id {fanin}")]
    DanglingFanin { gate: String, fanin: GateId },
    #[error("{what}: expected {expected} bits, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid gate id {0}")]
    InvalidGate(GateId),
    #[error("input-port list is inconsistent: {0}")]
    Ports(String),
}

/// Gate vocabulary. The discriminant order is the one-hot feature order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateType {
    And,
    Nand,
    Or,
    Nor,
    Xor,
    Xnor,
    Not,
    Buff,
    Input,
    Lut,
}

impl GateType {
    pub const ALL: [GateType; 10] = [
        GateType::And,
        GateType::Nand,
        GateType::Or,
        GateType::Nor,
        GateType::Xor,
        GateType::Xnor,
        GateType::Not,
        GateType::Buff,
        GateType::Input,
        GateType::Lut,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn keyword(self) -> &'static str {
        match self {
            GateType::And => "AND",
            GateType::Nand => "NAND",
            GateType::Or => "OR",
            GateType::Nor => "NOR",
            GateType::Xor => "XOR",
            GateType::Xnor => "XNOR",
            GateType::Not => "NOT",
            GateType::Buff => "BUFF",
            GateType::Input => "INPUT",
            GateType::Lut => "LUT",
        }
    }

    pub fn from_keyword(word: &str) -> Option<GateType> {
        let upper = word.to_ascii_uppercase();
        Some(match upper.as_str() {
            "AND" => GateType::And,
            "NAND" => GateType::Nand,
            "OR" => GateType::Or,
            "NOR" => GateType::Nor,
            "XOR" => GateType::Xor,
            "XNOR" => GateType::Xnor,
            "NOT" | "INV" => GateType::Not,
            "BUFF" | "BUF" => GateType::Buff,
            "LUT" => GateType::Lut,
            _ => return None,
        })
    }

    /// Whether `n` fanins is a legal arity for this type.
    pub fn accepts_arity(self, n: usize) -> bool {
        match self {
            GateType::Input => n == 0,
            GateType::Not | GateType::Buff => n == 1,
            GateType::Lut => (1..=MAX_LUT_ARITY).contains(&n),
            _ => n >= 2,
        }
    }

    /// Evaluates a non-LUT, non-input gate.
    pub fn eval(self, values: impl IntoIterator<Item = bool>) -> bool {
        let mut it = values.into_iter();
        match self {
            GateType::And => it.all(|v| v),
            GateType::Nand => !it.all(|v| v),
            GateType::Or => it.any(|v| v),
            GateType::Nor => !it.any(|v| v),
            GateType::Xor => it.fold(false, |acc, v| acc ^ v),
            GateType::Xnor => !it.fold(false, |acc, v| acc ^ v),
            GateType::Not => !it.next().expect("NOT needs one fanin"),
            GateType::Buff => it.next().expect("BUFF needs one fanin"),
            GateType::Input | GateType::Lut => panic!("{self} is not a fixed-function gate"),
        }
    }
}

impl fmt::Display for GateType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gate {
    pub id: GateId,
    pub name: String,
    pub kind: GateType,
    pub fanin: Vec<GateId>,
    /// Programmed truth table of a LUT (index = fanin values, first fanin
    /// most significant). `None` for every other gate type.
    pub lut_table: Option<Vec<bool>>,
}

/// Position of one key-programmable element inside the flat key vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeySlot {
    pub gate: GateId,
    pub offset: usize,
    pub width: usize,
}

/// A validated combinational netlist. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    gates: Vec<Gate>,
    primary_inputs: Vec<GateId>,
    key_inputs: Vec<GateId>,
    primary_outputs: Vec<GateId>,
    topo: Vec<GateId>,
    key_slots: Vec<KeySlot>,
    key_len: usize,
}

impl Circuit {
    /// Validates and assembles a circuit. Gate ids must equal their index.
    pub fn new(
        gates: Vec<Gate>,
        primary_inputs: Vec<GateId>,
        key_inputs: Vec<GateId>,
        primary_outputs: Vec<GateId>,
    ) -> Result<Circuit, NetlistError> {
        let n = gates.len();
        for (i, g) in gates.iter().enumerate() {
            if g.id != i {
                return Err(NetlistError::InvalidGate(g.id));
            }
            if !g.kind.accepts_arity(g.fanin.len()) {
                return Err(NetlistError::Arity {
                    name: g.name.clone(),
                    kind: g.kind,
                    got: g.fanin.len(),
                });
            }
            if let Some(&bad) = g.fanin.iter().find(|&&f| f >= n) {
                return Err(NetlistError::DanglingFanin {
                    gate: g.name.clone(),
                    fanin: bad,
                });
            }
            match (g.kind, &g.lut_table) {
                (GateType::Lut, Some(t)) if t.len() != 1 << g.fanin.len() => {
                    return Err(NetlistError::LutTable {
                        name: g.name.clone(),
                        expected: 1 << g.fanin.len(),
                        got: t.len(),
                    })
                }
                (GateType::Lut, None) => {
                    return Err(NetlistError::LutTable {
                        name: g.name.clone(),
                        expected: 1 << g.fanin.len(),
                        got: 0,
                    })
                }
                (GateType::Lut, Some(_)) | (_, None) => {}
                (_, Some(_)) => {
                    return Err(NetlistError::LutTable {
                        name: g.name.clone(),
                        expected: 0,
                        got: g.lut_table.as_ref().map_or(0, Vec::len),
                    })
                }
            }
        }

        let mut port_seen = vec![false; n];
        for &p in primary_inputs.iter().chain(&key_inputs) {
            if p >= n {
                return Err(NetlistError::InvalidGate(p));
            }
            if gates[p].kind != GateType::Input {
                return Err(NetlistError::Ports(format!("`{}` is not an INPUT node", gates[p].name)));
            }
            if port_seen[p] {
                return Err(NetlistError::Ports(format!("`{}` listed twice", gates[p].name)));
            }
            port_seen[p] = true;
        }
        if let Some(g) = gates.iter().find(|g| g.kind == GateType::Input && !port_seen[g.id]) {
            return Err(NetlistError::Ports(format!(
                "INPUT node `{}` is neither a primary nor a key input",
                g.name
            )));
        }
        if let Some(&p) = primary_outputs.iter().find(|&&p| p >= n) {
            return Err(NetlistError::InvalidGate(p));
        }

        let topo = topological_order(&gates)?;

        let mut key_slots = Vec::new();
        let mut offset = 0;
        let mut is_key = vec![false; n];
        for &k in &key_inputs {
            is_key[k] = true;
        }
        for g in &gates {
            let width = if is_key[g.id] {
                1
            } else if g.kind == GateType::Lut {
                1 << g.fanin.len()
            } else {
                continue;
            };
            key_slots.push(KeySlot {
                gate: g.id,
                offset,
                width,
            });
            offset += width;
        }

        Ok(Circuit {
            gates,
            primary_inputs,
            key_inputs,
            primary_outputs,
            topo,
            key_slots,
            key_len: offset,
        })
    }

    pub fn empty() -> Circuit {
        Circuit::new(Vec::new(), Vec::new(), Vec::new(), Vec::new()).expect("empty circuit is valid")
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn gate(&self, id: GateId) -> Option<&Gate> {
        self.gates.get(id)
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn primary_inputs(&self) -> &[GateId] {
        &self.primary_inputs
    }

    pub fn key_inputs(&self) -> &[GateId] {
        &self.key_inputs
    }

    pub fn primary_outputs(&self) -> &[GateId] {
        &self.primary_outputs
    }

    /// Gate ids in a deterministic topological order (fanins first).
    pub fn topological_order(&self) -> &[GateId] {
        &self.topo
    }

    /// Key-programmable elements in gate-id order. Key inputs take one bit,
    /// a k-input LUT takes 2^k bits.
    pub fn key_slots(&self) -> &[KeySlot] {
        &self.key_slots
    }

    /// Total number of key bits.
    pub fn key_len(&self) -> usize {
        self.key_len
    }

    pub fn is_key_input(&self, id: GateId) -> bool {
        self.key_inputs.contains(&id)
    }

    pub fn find(&self, name: &str) -> Option<GateId> {
        self.gates.iter().position(|g| g.name == name)
    }

    pub fn name_index(&self) -> HashMap<&str, GateId> {
        self.gates.iter().map(|g| (g.name.as_str(), g.id)).collect()
    }

    /// Fanout lists (one entry per fanin occurrence, in gate-id order).
    pub fn fanouts(&self) -> Vec<Vec<GateId>> {
        let mut out = vec![Vec::new(); self.gates.len()];
        for g in &self.gates {
            for &f in &g.fanin {
                out[f].push(g.id);
            }
        }
        out
    }

    /// The key stored in the circuit itself: LUT tables as written, key
    /// inputs as 0.
    pub fn programmed_key(&self) -> Vec<bool> {
        let mut key = vec![false; self.key_len];
        for slot in &self.key_slots {
            if let Some(t) = &self.gates[slot.gate].lut_table {
                key[slot.offset..slot.offset + slot.width].copy_from_slice(t);
            }
        }
        key
    }

    /// Counts of each gate type, in [`GateType::ALL`] order.
    pub fn type_histogram(&self) -> [usize; 10] {
        let mut h = [0; 10];
        for g in &self.gates {
            h[g.kind.index()] += 1;
        }
        h
    }
}

fn topological_order(gates: &[Gate]) -> Result<Vec<GateId>, NetlistError> {
    let n = gates.len();
    let mut indeg = vec![0usize; n];
    let mut fanouts = vec![Vec::new(); n];
    for g in gates {
        indeg[g.id] = g.fanin.len();
        for &f in &g.fanin {
            fanouts[f].push(g.id);
        }
    }
    let mut queue: VecDeque<GateId> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(g) = queue.pop_front() {
        order.push(g);
        for &o in &fanouts[g] {
            indeg[o] -= 1;
            if indeg[o] == 0 {
                queue.push_back(o);
            }
        }
    }
    if order.len() != n {
        let stuck = (0..n).find(|&i| indeg[i] > 0).expect("some gate is on a cycle");
        return Err(NetlistError::Cycle(gates[stuck].name.clone()));
    }
    Ok(order)
}

/// Incremental construction helper for programmatic circuits.
#[derive(Debug, Default, Clone)]
pub struct CircuitBuilder {
    gates: Vec<Gate>,
    primary_inputs: Vec<GateId>,
    key_inputs: Vec<GateId>,
    primary_outputs: Vec<GateId>,
}

impl CircuitBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn input(&mut self, name: impl Into<String>) -> GateId {
        let id = self.push(name.into(), GateType::Input, Vec::new(), None);
        self.primary_inputs.push(id);
        id
    }

    pub fn key_input(&mut self, name: impl Into<String>) -> GateId {
        let id = self.push(name.into(), GateType::Input, Vec::new(), None);
        self.key_inputs.push(id);
        id
    }

    pub fn gate(&mut self, name: impl Into<String>, kind: GateType, fanin: &[GateId]) -> GateId {
        self.push(name.into(), kind, fanin.to_vec(), None)
    }

    pub fn lut(&mut self, name: impl Into<String>, table: Vec<bool>, fanin: &[GateId]) -> GateId {
        self.push(name.into(), GateType::Lut, fanin.to_vec(), Some(table))
    }

    pub fn output(&mut self, id: GateId) -> &mut Self {
        self.primary_outputs.push(id);
        self
    }

    pub fn build(self) -> Result<Circuit, NetlistError> {
        Circuit::new(self.gates, self.primary_inputs, self.key_inputs, self.primary_outputs)
    }

    fn push(&mut self, name: String, kind: GateType, fanin: Vec<GateId>, lut_table: Option<Vec<bool>>) -> GateId {
        let id = self.gates.len();
        self.gates.push(Gate {
            id,
            name,
            kind,
            fanin,
            lut_table,
        });
        id
    }
}
