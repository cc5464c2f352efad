// SPDX-License-Identifier: Apache-2.0

//! Logic locking: XOR/XNOR key-gate insertion and LUT replacement.
//!
//! Locations are kept in ascending base-gate-id order, so the concatenated
//! per-location keys line up with the locked circuit's key slots (which are
//! ordered by gate id).

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{Circuit, Gate, GateId, GateType, NetlistError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ObfuscationError {
    #[error("gate id {0} cannot be locked (missing, INPUT, or LUT)")]
    InvalidGate(GateId),
    #[error("gate `{name}` has {fanin} fanins, more than LUT arity {arity}")]
    ArityOverflow {
        name: String,
        fanin: usize,
        arity: usize,
    },
    #[error("not enough nets to pad `{name}` to a {arity}-input LUT")]
    PaddingUnavailable { name: String, arity: usize },
    #[error("LUT arity {0} outside 1..=4")]
    BadArity(usize),
    #[error("requested {requested} locations but only {eligible} gates are eligible")]
    TooManyLocations { requested: usize, eligible: usize },
    #[error("at least one location is required")]
    NoLocations,
    #[error("base circuit already carries {0} key bits")]
    LockedBase(usize),
    #[error("unknown gate `{0}`")]
    UnknownGate(String),
    #[error("malformed obfuscation kind `{0}`")]
    BadKind(String),
    #[error("malformed bit string `{0}`")]
    BadBits(String),
    #[error("stored {field} does not match the reconstructed instance")]
    Mismatch { field: &'static str },
    #[error(transparent)]
    Netlist(#[from] NetlistError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KeyGateKind {
    Xor,
    Xnor,
}

impl KeyGateKind {
    /// The key value that makes this gate transparent.
    pub fn transparent_bit(self) -> bool {
        matches!(self, KeyGateKind::Xnor)
    }

    fn gate_type(self) -> GateType {
        match self {
            KeyGateKind::Xor => GateType::Xor,
            KeyGateKind::Xnor => GateType::Xnor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObfuscationKind {
    XorKeygate,
    XnorKeygate,
    LutReplace { arity: usize },
}

impl ObfuscationKind {
    pub fn lut(arity: usize) -> Result<Self, ObfuscationError> {
        if (1..=4).contains(&arity) {
            Ok(ObfuscationKind::LutReplace { arity })
        } else {
            Err(ObfuscationError::BadArity(arity))
        }
    }
}

impl fmt::Display for ObfuscationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObfuscationKind::XorKeygate => f.write_str("XOR_KEYGATE"),
            ObfuscationKind::XnorKeygate => f.write_str("XNOR_KEYGATE"),
            ObfuscationKind::LutReplace { arity } => write!(f, "LUT_REPLACE({arity})"),
        }
    }
}

impl FromStr for ObfuscationKind {
    type Err = ObfuscationError;

    /// Accepts the canonical names (`XOR_KEYGATE`, `LUT_REPLACE(4)`) and the
    /// short CLI forms `xor`, `xnor`, `lut4`, `lut:4`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ObfuscationError::BadKind(s.to_string());
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "xor" | "xor_keygate" => return Ok(ObfuscationKind::XorKeygate),
            "xnor" | "xnor_keygate" => return Ok(ObfuscationKind::XnorKeygate),
            _ => {}
        }
        let digits = lower
            .strip_prefix("lut_replace(")
            .and_then(|r| r.strip_suffix(')'))
            .or_else(|| lower.strip_prefix("lut:"))
            .or_else(|| lower.strip_prefix("lut"))
            .ok_or_else(bad)?;
        let arity: usize = digits.parse().map_err(|_| bad())?;
        ObfuscationKind::lut(arity)
    }
}

impl Serialize for ObfuscationKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ObfuscationKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A base circuit, its locked variant, and the ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ObfuscationInstance {
    pub base: Arc<Circuit>,
    pub obfuscated: Circuit,
    pub kind: ObfuscationKind,
    /// Correct key, concatenated per location in location order.
    pub key_truth: Vec<bool>,
    /// One entry per node of `obfuscated`; set on inserted key gates and LUTs.
    pub mask: Vec<bool>,
    /// Locked base-gate ids, ascending.
    pub locations: Vec<GateId>,
    pub seed: u64,
}

impl ObfuscationInstance {
    pub fn n_locations(&self) -> usize {
        self.locations.len()
    }

    pub fn mask_popcount(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn to_record(&self, base_file: &str) -> InstanceRecord {
        InstanceRecord {
            base_file: base_file.to_string(),
            seed: self.seed,
            kind: self.kind,
            locations: self
                .locations
                .iter()
                .map(|&l| self.base.gates()[l].name.clone())
                .collect(),
            key_truth: bits_to_string(&self.key_truth),
            mask: bits_to_string(&self.mask),
        }
    }

    /// Rebuilds an instance from its serialized form and checks that the
    /// stored key and mask agree with the reconstruction.
    pub fn from_record(base: Arc<Circuit>, record: &InstanceRecord) -> Result<Self, ObfuscationError> {
        let mut locations = Vec::with_capacity(record.locations.len());
        for name in &record.locations {
            locations.push(base.find(name).ok_or_else(|| ObfuscationError::UnknownGate(name.clone()))?);
        }
        let stored_key = string_to_bits(&record.key_truth)?;
        let keygate_bits = match record.kind {
            ObfuscationKind::LutReplace { .. } => Vec::new(),
            _ => stored_key.clone(),
        };
        let inst = obfuscate_at(base, record.kind, &locations, &keygate_bits, record.seed)?;
        if inst.key_truth != stored_key {
            return Err(ObfuscationError::Mismatch { field: "key_truth" });
        }
        if bits_to_string(&inst.mask) != record.mask {
            return Err(ObfuscationError::Mismatch { field: "mask" });
        }
        Ok(inst)
    }
}

/// Serialized form of an [`ObfuscationInstance`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub base_file: String,
    pub seed: u64,
    pub kind: ObfuscationKind,
    pub locations: Vec<String>,
    pub key_truth: String,
    pub mask: String,
}

pub fn bits_to_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn string_to_bits(s: &str) -> Result<Vec<bool>, ObfuscationError> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(ObfuscationError::BadBits(s.to_string())),
        })
        .collect()
}

fn unique_name(c: &[Gate], base: &str) -> String {
    let taken = |n: &str| c.iter().any(|g| g.name == n);
    if !taken(base) {
        return base.to_string();
    }
    (1..)
        .map(|i| format!("{base}_{i}"))
        .find(|n| !taken(n))
        .expect("unbounded search")
}

fn lockable(c: &Circuit, gate_id: GateId) -> Result<&Gate, ObfuscationError> {
    match c.gate(gate_id) {
        Some(g) if g.kind != GateType::Input && g.kind != GateType::Lut => Ok(g),
        _ => Err(ObfuscationError::InvalidGate(gate_id)),
    }
}

/// Splices a key gate between `gate_id` and all of its fanouts.
///
/// The key gate's second input is a fresh key input. If `key_bit` is not
/// the kind's transparent value, an inverter follows the key gate so the
/// circuit still computes the original function under `key_bit`. Returns
/// the new circuit and the id of the key gate.
pub fn insert_keygate(
    c: &Circuit,
    gate_id: GateId,
    kind: KeyGateKind,
    key_bit: bool,
) -> Result<(Circuit, GateId), ObfuscationError> {
    let target = lockable(c, gate_id)?.name.clone();
    let mut gates = c.gates().to_vec();
    let n = gates.len();
    let key_no = c.key_inputs().len();

    let key_id = n;
    let key_name = unique_name(&gates, &format!("keyinput{key_no}"));
    gates.push(Gate {
        id: key_id,
        name: key_name,
        kind: GateType::Input,
        fanin: vec![],
        lut_table: None,
    });
    let kg_id = n + 1;
    let kg_name = unique_name(&gates, &format!("{target}_kg{key_no}"));
    gates.push(Gate {
        id: kg_id,
        name: kg_name,
        kind: kind.gate_type(),
        fanin: vec![gate_id, key_id],
        lut_table: None,
    });
    let mut driver = kg_id;
    if key_bit != kind.transparent_bit() {
        let inv_name = unique_name(&gates, &format!("{target}_kginv{key_no}"));
        gates.push(Gate {
            id: n + 2,
            name: inv_name,
            kind: GateType::Not,
            fanin: vec![kg_id],
            lut_table: None,
        });
        driver = n + 2;
    }

    for g in gates.iter_mut().take(n) {
        for f in g.fanin.iter_mut() {
            if *f == gate_id {
                *f = driver;
            }
        }
    }
    let outputs = c
        .primary_outputs()
        .iter()
        .map(|&o| if o == gate_id { driver } else { o })
        .collect();
    let mut key_inputs = c.key_inputs().to_vec();
    key_inputs.push(key_id);
    let circuit = Circuit::new(gates, c.primary_inputs().to_vec(), key_inputs, outputs)?;
    Ok((circuit, kg_id))
}

/// Chooses `count` padding nets for a LUT at `gate_id`: nearest topological
/// predecessors first, then primary inputs. Existing fanins and key inputs
/// are skipped.
fn padding_nets(c: &Circuit, gate_id: GateId, count: usize) -> Option<Vec<GateId>> {
    let topo = c.topological_order();
    let pos = topo.iter().position(|&g| g == gate_id)?;
    let fanin = &c.gates()[gate_id].fanin;
    let mut chosen: Vec<GateId> = Vec::with_capacity(count);
    let candidates = topo[..pos].iter().rev().chain(c.primary_inputs().iter());
    for &cand in candidates {
        if chosen.len() == count {
            break;
        }
        if cand == gate_id || fanin.contains(&cand) || chosen.contains(&cand) || c.is_key_input(cand) {
            continue;
        }
        chosen.push(cand);
    }
    (chosen.len() == count).then_some(chosen)
}

/// Replaces a logic gate by a `arity`-input LUT. Returns the new circuit and
/// the truth table (the LUT's key bits) reproducing the original function.
///
/// The LUT's fanins are the gate's fanins followed by padding nets; the
/// table ignores the padding inputs. The LUT is stored unprogrammed (all-zero
/// table) so an emitted netlist does not reveal the key.
pub fn replace_with_lut(c: &Circuit, gate_id: GateId, arity: usize) -> Result<(Circuit, Vec<bool>), ObfuscationError> {
    if !(1..=4).contains(&arity) {
        return Err(ObfuscationError::BadArity(arity));
    }
    let g = lockable(c, gate_id)?;
    let m = g.fanin.len();
    if m > arity {
        return Err(ObfuscationError::ArityOverflow {
            name: g.name.clone(),
            fanin: m,
            arity,
        });
    }
    let pad = padding_nets(c, gate_id, arity - m).ok_or_else(|| ObfuscationError::PaddingUnavailable {
        name: g.name.clone(),
        arity,
    })?;

    let table: Vec<bool> = (0..1usize << arity)
        .map(|j| {
            let vals = (0..m).map(|i| (j >> (arity - 1 - i)) & 1 == 1);
            g.kind.eval(vals)
        })
        .collect();

    let mut gates = c.gates().to_vec();
    let lut = &mut gates[gate_id];
    lut.kind = GateType::Lut;
    lut.fanin.extend(pad);
    lut.lut_table = Some(vec![false; 1 << arity]);
    let circuit = Circuit::new(
        gates,
        c.primary_inputs().to_vec(),
        c.key_inputs().to_vec(),
        c.primary_outputs().to_vec(),
    )?;
    Ok((circuit, table))
}

/// Gates that `kind` may lock in `c`.
pub fn eligible_gates(c: &Circuit, kind: ObfuscationKind) -> Vec<GateId> {
    c.gates()
        .iter()
        .filter(|g| g.kind != GateType::Input && g.kind != GateType::Lut)
        .filter(|g| match kind {
            ObfuscationKind::LutReplace { arity } => {
                g.fanin.len() <= arity && padding_nets(c, g.id, arity - g.fanin.len()).is_some()
            }
            _ => true,
        })
        .map(|g| g.id)
        .collect()
}

/// Locks `base` at the given locations.
///
/// For key-gate kinds `keygate_bits` supplies the correct key bit of each
/// location (missing entries default to the transparent value).
pub fn obfuscate_at(
    base: Arc<Circuit>,
    kind: ObfuscationKind,
    locations: &[GateId],
    keygate_bits: &[bool],
    seed: u64,
) -> Result<ObfuscationInstance, ObfuscationError> {
    if base.key_len() != 0 {
        return Err(ObfuscationError::LockedBase(base.key_len()));
    }
    if locations.is_empty() {
        return Err(ObfuscationError::NoLocations);
    }
    let mut locs = locations.to_vec();
    locs.sort_unstable();
    locs.dedup();
    for &l in &locs {
        lockable(&base, l)?;
    }

    let mut circuit = (*base).clone();
    let mut key_truth = Vec::new();
    let mut marked = Vec::with_capacity(locs.len());
    for (i, &loc) in locs.iter().enumerate() {
        match kind {
            ObfuscationKind::XorKeygate | ObfuscationKind::XnorKeygate => {
                let kg = if kind == ObfuscationKind::XorKeygate {
                    KeyGateKind::Xor
                } else {
                    KeyGateKind::Xnor
                };
                let bit = keygate_bits.get(i).copied().unwrap_or(kg.transparent_bit());
                let (next, kg_id) = insert_keygate(&circuit, loc, kg, bit)?;
                circuit = next;
                key_truth.push(bit);
                marked.push(kg_id);
            }
            ObfuscationKind::LutReplace { arity } => {
                let (next, table) = replace_with_lut(&circuit, loc, arity)?;
                circuit = next;
                key_truth.extend(table);
                marked.push(loc);
            }
        }
    }
    let mut mask = vec![false; circuit.len()];
    for m in marked {
        mask[m] = true;
    }
    Ok(ObfuscationInstance {
        base,
        obfuscated: circuit,
        kind,
        key_truth,
        mask,
        locations: locs,
        seed,
    })
}

/// Locks `n_locations` distinct eligible gates chosen uniformly with `seed`.
/// Key-gate key bits are drawn from the same seeded stream.
pub fn random_obfuscate(
    base: Arc<Circuit>,
    n_locations: usize,
    kind: ObfuscationKind,
    seed: u64,
) -> Result<ObfuscationInstance, ObfuscationError> {
    if n_locations == 0 {
        return Err(ObfuscationError::NoLocations);
    }
    let eligible = eligible_gates(&base, kind);
    if n_locations > eligible.len() {
        return Err(ObfuscationError::TooManyLocations {
            requested: n_locations,
            eligible: eligible.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut locations: Vec<GateId> = sample(&mut rng, eligible.len(), n_locations)
        .into_iter()
        .map(|i| eligible[i])
        .collect();
    locations.sort_unstable();
    let bits: Vec<bool> = (0..n_locations).map(|_| rng.random::<bool>()).collect();
    obfuscate_at(base, kind, &locations, &bits, seed)
}
