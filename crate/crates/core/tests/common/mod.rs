// SPDX-License-Identifier: Apache-2.0
#![allow(dead_code)]

use std::sync::Arc;

use deobtime::netlist::{bits_msb_first, parse_bench, Circuit, CircuitBuilder, GateType};
use rand::Rng;

pub const C17: &str = include_str!("../../data/c17.bench");
pub const MUL5: &str = include_str!("../../data/mul5.bench");

pub fn c17() -> Arc<Circuit> {
    Arc::new(parse_bench(C17).unwrap())
}

pub fn mul5() -> Arc<Circuit> {
    Arc::new(parse_bench(MUL5).unwrap())
}

pub fn vectors(width: usize) -> impl Iterator<Item = Vec<bool>> {
    (0..1u64 << width).map(move |v| bits_msb_first(v, width))
}

/// Exhaustive when the input count allows it, else 2000 seeded vectors.
pub fn equivalent(base: &Circuit, locked: &Circuit, key: &[bool], rng: &mut impl Rng) -> bool {
    let p = base.primary_inputs().len();
    let check = |x: &[bool]| base.simulate(x, &[]).unwrap() == locked.simulate(x, key).unwrap();
    if p <= 16 {
        vectors(p).all(|x| check(&x))
    } else {
        (0..2000).all(|_| {
            let x: Vec<bool> = (0..p).map(|_| rng.random_bool(0.5)).collect();
            check(&x)
        })
    }
}

/// Random acyclic circuit with at most `max_nets` nodes, including key
/// inputs and small LUTs.
pub fn random_circuit(rng: &mut impl Rng, max_nets: usize) -> Circuit {
    let mut b = CircuitBuilder::new();
    let n_pi = rng.random_range(1..=3usize);
    let mut nodes: Vec<usize> = (0..n_pi).map(|i| b.input(format!("i{i}"))).collect();
    if rng.random_bool(0.4) {
        nodes.push(b.key_input("keyinput0"));
    }
    let n_gates = rng.random_range(1..=max_nets - nodes.len());
    let kinds = [
        GateType::And,
        GateType::Nand,
        GateType::Or,
        GateType::Nor,
        GateType::Xor,
        GateType::Xnor,
        GateType::Not,
        GateType::Buff,
        GateType::Lut,
    ];
    let mut last = 0;
    for g in 0..n_gates {
        let kind = kinds[rng.random_range(0..kinds.len())];
        let arity = match kind {
            GateType::Not | GateType::Buff => 1,
            GateType::Lut => rng.random_range(1..=2usize).min(nodes.len()),
            _ => rng.random_range(2..=3usize),
        };
        let fanin: Vec<usize> = (0..arity).map(|_| nodes[rng.random_range(0..nodes.len())]).collect();
        last = if kind == GateType::Lut {
            b.lut(format!("g{g}"), vec![false; 1 << fanin.len()], &fanin)
        } else {
            b.gate(format!("g{g}"), kind, &fanin)
        };
        nodes.push(last);
    }
    b.output(last);
    if nodes.len() > n_pi + 1 && rng.random_bool(0.5) {
        b.output(nodes[rng.random_range(n_pi..nodes.len())]);
    }
    b.build().expect("generator builds valid circuits")
}
